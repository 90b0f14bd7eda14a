"""Encircle the gain/loss exceptional point in both directions.

Starting from Psi+, a counter-clockwise loop ends near Psi- while a
clockwise loop returns to Psi+.  Runs in about five seconds.
"""

import numpy as np

from chiralbell import bell_fidelity, concurrence, propagate
from chiralbell.experiments import TRANSFER_CONFIG, TRANSFER_LOOP
from chiralbell.model import bell_states, projector

plus, _ = bell_states()
rho0 = projector(plus)

for loop in (TRANSFER_LOOP, TRANSFER_LOOP.reversed()):
    rec = propagate(loop, TRANSFER_CONFIG, rho0)
    final = rec.final_state
    print(
        f"{loop.orientation:>3}: F+={bell_fidelity(final, '+'):.3f} "
        f"F-={bell_fidelity(final, '-'):.3f} C={concurrence(final):.3f}"
    )

# removing the quantum jumps (q = 0) gives the postselected limit
rec = propagate(TRANSFER_LOOP, TRANSFER_CONFIG.replace(q=0.0), rho0)
print(f"q=0 CCW: F-={rec.fidelity('-')[-1]:.4f}, max|P-1|={np.max(np.abs(rec.purity - 1)):.1e}")
