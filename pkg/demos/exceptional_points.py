"""Locate the Liouvillian exceptional point as the jump weight q varies."""

import numpy as np

from chiralbell import locate_ep
from chiralbell.experiments import TRANSFER_CONFIG
from chiralbell.spectra import analytic_ep_gamma

for q in np.linspace(0, 1, 5):
    ep = locate_ep(float(q), TRANSFER_CONFIG)
    print(
        f"q={q:.2f}: gamma_EP={ep.gamma_EP:.6f} (closed form {analytic_ep_gamma(TRANSFER_CONFIG, float(q)):.6f}) "
        f"order={ep.order} residual={ep.residual_gap:.1e}"
    )
