"""Config-driven experiment runners, parameter sweeps and figure reproduction.

An experiment is described by a JSON document with top-level keys
``base_config``, ``trajectory``, ``initial_state``, optional ``sweep`` and
``output`` (plus optional ``name`` and ``steps``).  Results are written as
CSV files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import Trajectory, propagate
from .metrics import MetricSample, bell_fidelity, concurrence
from .model import (
    BASIS_LABELS,
    MarkovianValidityWarning,
    SystemConfig,
    _decode_float,
    _encode_float,
    basis_state,
    bell_states,
    check_density_matrix,
    projector,
)
from .spectra import NoExceptionalPointError, locate_ep, spectrum_sweep


class ValidationError(ValueError):
    """An experiment description is malformed or inconsistent."""


NAMED_STATES = ("bell_plus", "bell_minus", "maximally_mixed")
SPEC_KEYS = {"name", "base_config", "trajectory", "initial_state", "sweep", "output", "steps"}


def initial_density_matrix(state) -> np.ndarray:
    """Resolve an ``initial_state`` entry to a 4x4 density matrix.

    Accepted forms: ``"bell_plus"``, ``"bell_minus"``, ``"maximally_mixed"``,
    ``"basis:ab"`` with ``ab`` one of ``11, 10, 01, 00``, a mapping
    ``{"re": 4x4, "im": 4x4}`` or a 4x4 array.
    """
    if isinstance(state, str):
        plus, minus = bell_states()
        if state == "bell_plus":
            return projector(plus)
        if state == "bell_minus":
            return projector(minus)
        if state == "maximally_mixed":
            return np.eye(4, dtype=np.complex128) / 4
        if state.startswith("basis:"):
            label = state[len("basis:"):].strip("|>")
            if label not in BASIS_LABELS:
                raise ValidationError(f"unknown basis label {label!r}; use one of {BASIS_LABELS}")
            return projector(basis_state(label))
        raise ValidationError(f"unknown initial state {state!r}")
    if isinstance(state, dict):
        if set(state) != {"re", "im"}:
            raise ValidationError("explicit initial state needs exactly the keys 're' and 'im'")
        try:
            rho = np.asarray(state["re"], dtype=float) + 1j * np.asarray(state["im"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"explicit initial state is not numeric: {exc}") from exc
    else:
        rho = np.asarray(state, dtype=np.complex128)
    try:
        return check_density_matrix(rho)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _encode_state(state):
    if isinstance(state, str):
        return state
    rho = np.asarray(state, dtype=np.complex128)
    return {"re": rho.real.tolist(), "im": rho.imag.tolist()}


@dataclass(frozen=True)
class SweepSpec:
    """1-D scan of one real field, addressed as ``"base_config.<field>"`` or ``"trajectory.<field>"``."""

    parameter: str
    grid: tuple

    def __post_init__(self):
        try:
            grid = tuple(_decode_float(v) for v in self.grid)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"sweep grid: {exc}") from exc
        object.__setattr__(self, "grid", grid)
        section, _, name = self.parameter.partition(".")
        if section == "base_config":
            allowed = set(SystemConfig.__dataclass_fields__)
        elif section == "trajectory":
            allowed = set(Trajectory.__dataclass_fields__) - {"orientation"}
        else:
            allowed = set()
        if name not in allowed:
            raise ValidationError(f"sweep parameter {self.parameter!r} is not a real field of base_config or trajectory")
        if not grid:
            raise ValidationError("sweep grid is empty")
        if any(math.isnan(v) for v in grid):
            raise ValidationError("sweep grid contains NaN")
        infinite_ok = self.parameter in ("base_config.beta1", "base_config.beta2")
        if not infinite_ok and not all(math.isfinite(v) for v in grid):
            raise ValidationError("sweep grid must be finite")
        d = np.diff(grid)
        if len(grid) > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ValidationError("sweep grid must be strictly monotone")

    @property
    def section(self) -> str:
        return self.parameter.partition(".")[0]

    @property
    def field_name(self) -> str:
        return self.parameter.partition(".")[2]

    def to_dict(self) -> dict:
        return {"parameter": self.parameter, "grid": [_encode_float(v) for v in self.grid]}


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to run one propagation or one sweep."""

    base_config: SystemConfig
    trajectory: Trajectory
    initial_state: object = "bell_plus"
    output: str = "out.csv"
    sweep: SweepSpec | None = None
    name: str = "experiment"
    steps: int | None = None

    def __post_init__(self):
        initial_density_matrix(self.initial_state)
        if self.steps is not None and (isinstance(self.steps, bool) or not isinstance(self.steps, int) or self.steps < 1):
            raise ValidationError("steps must be a positive integer")

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "base_config": self.base_config.to_dict(),
            "trajectory": self.trajectory.to_dict(),
            "initial_state": _encode_state(self.initial_state),
            "output": self.output,
        }
        if self.sweep is not None:
            d["sweep"] = self.sweep.to_dict()
        if self.steps is not None:
            d["steps"] = self.steps
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "ExperimentSpec":
        if not isinstance(d, dict):
            raise ValidationError("experiment description must be a JSON object")
        unknown = set(d) - SPEC_KEYS
        if unknown:
            raise ValidationError(f"unknown keys: {sorted(unknown)}")
        missing = {"base_config", "trajectory", "initial_state", "output"} - set(d)
        if missing:
            raise ValidationError(f"missing keys: {sorted(missing)}")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", MarkovianValidityWarning)
                base = SystemConfig.from_dict(d["base_config"])
            traj = Trajectory.from_dict(d["trajectory"])
            sweep = None
            if d.get("sweep") is not None:
                s = d["sweep"]
                if not isinstance(s, dict) or set(s) != {"parameter", "grid"}:
                    raise ValidationError("sweep needs exactly the keys 'parameter' and 'grid'")
                if not isinstance(s["grid"], list):
                    raise ValidationError("sweep grid must be a list")
                sweep = SweepSpec(s["parameter"], tuple(s["grid"]))
            state = d["initial_state"]
            if isinstance(state, list):
                state = np.asarray(state, dtype=float)
            return cls(
                base_config=base,
                trajectory=traj,
                initial_state=state,
                output=str(d["output"]),
                sweep=sweep,
                name=str(d.get("name", "experiment")),
                steps=d.get("steps"),
            )
        except ValidationError:
            raise
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(d)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read {path}: {exc}") from exc
        return cls.from_json(text)

    def __eq__(self, other):
        if not isinstance(other, ExperimentSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    __hash__ = None

    def configured(self, value: float) -> tuple[SystemConfig, Trajectory]:
        """Base config and trajectory with the sweep field set to ``value``."""
        if self.sweep is None:
            return self.base_config, self.trajectory
        if self.sweep.section == "base_config":
            return self.base_config.replace(**{self.sweep.field_name: value}), self.trajectory
        d = self.trajectory.to_dict()
        d[self.sweep.field_name] = value
        return self.base_config, Trajectory.from_dict(d)


# --- running ---------------------------------------------------------------


@dataclass
class RunSummary:
    name: str
    output: str
    final: MetricSample
    steps: int

    def line(self) -> str:
        f = self.final
        return (
            f"{self.name}: F+(T)={f.fidelity_plus:.6f} F-(T)={f.fidelity_minus:.6f} "
            f"C(T)={f.concurrence:.6f} P(T)={f.purity:.6f} steps={self.steps} -> {self.output}"
        )


@dataclass
class SweepResult:
    name: str
    output: str
    parameter: str
    values: np.ndarray
    fidelity_plus: np.ndarray
    fidelity_minus: np.ndarray
    concurrence: np.ndarray

    def line(self) -> str:
        k = int(np.argmax(self.fidelity_minus))
        return (
            f"{self.name}: {len(self.values)} points over {self.parameter}; "
            f"max F-(T)={self.fidelity_minus[k]:.6f} at {self.values[k]:g} -> {self.output}"
        )


def _prepare_output(path) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def run_experiment(spec: ExperimentSpec, steps: int | None = None, stride: int = 1):
    """Run ``spec``; sweeps are delegated to :func:`run_sweep`.

    A single run writes the full time series to ``spec.output`` and returns
    a :class:`RunSummary`.  ``steps`` overrides ``spec.steps``.

    Raises
    ------
    ValidationError
        Invalid specification.
    OSError
        Output path cannot be written.
    NumericalError
        Propagation failed.
    """
    if spec.sweep is not None:
        return run_sweep(spec, steps=steps)
    n = steps if steps is not None else spec.steps
    rho0 = initial_density_matrix(spec.initial_state)
    rec = propagate(spec.trajectory, spec.base_config, rho0, steps=n)
    out = _prepare_output(spec.output)
    rec.to_csv(out, stride=stride)
    return RunSummary(spec.name, str(out), MetricSample.of(rec.final_state), len(rec.times) - 1)


def _final_metrics(args) -> tuple[float, float, float]:
    base, traj, rho0, steps = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarkovianValidityWarning)
        rec = propagate(traj, base, rho0, steps=steps)
    rho = rec.final_state
    return bell_fidelity(rho, "+"), bell_fidelity(rho, "-"), concurrence(rho)


def sweep_values(spec: ExperimentSpec, steps: int | None = None, jobs: int = 1) -> np.ndarray:
    """Final ``(F+, F-, C)`` for every grid point, shape ``(n, 3)``, in grid order."""
    if spec.sweep is None:
        raise ValidationError("experiment has no sweep")
    if jobs < 1:
        raise ValidationError("jobs must be at least 1")
    n = steps if steps is not None else spec.steps
    rho0 = initial_density_matrix(spec.initial_state)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MarkovianValidityWarning)
        tasks = [(*spec.configured(v), rho0, n) for v in spec.sweep.grid]
    if jobs == 1 or len(tasks) == 1:
        rows = [_final_metrics(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_final_metrics, tasks))
    return np.array(rows, dtype=float).reshape(-1, 3)


def write_sweep_csv(path, values, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["sweep_value", "fidelity_psi_plus", "fidelity_psi_minus", "concurrence"])
        for v, r in zip(values, rows):
            w.writerow([format(float(v), ".12g")] + [format(float(x), ".12g") for x in r])


def run_sweep(spec: ExperimentSpec, steps: int | None = None, jobs: int = 1) -> SweepResult:
    """One full propagation per grid point, farmed to ``jobs`` worker processes.

    Rows are gathered by grid index, so the CSV does not depend on ``jobs``.
    """
    rows = sweep_values(spec, steps=steps, jobs=jobs)
    out = _prepare_output(spec.output)
    write_sweep_csv(out, spec.sweep.grid, rows)
    return SweepResult(
        spec.name, str(out), spec.sweep.parameter, np.array(spec.sweep.grid), rows[:, 0], rows[:, 1], rows[:, 2]
    )


# --- EP table -------------------------------------------------------------


def ep_report(qs, template: SystemConfig, gamma_max: float | None = None) -> list:
    """``locate_ep`` for each ``q``; raises :class:`NoExceptionalPointError` if one is missing."""
    return [locate_ep(float(q), template, gamma_max=gamma_max) for q in qs]


def write_ep_csv(path, results) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "gamma_EP", "branch", "order", "residual_gap"])
        for r in results:
            w.writerow([format(r.q, ".12g"), format(r.gamma_EP, ".12g"), r.branch, r.order, format(r.residual_gap, ".12g")])


# --- built-in figure experiments ---------------------------------------------

# loop and system parameters shared by the transfer figures
TRANSFER_CONFIG = SystemConfig(epsilon=1.0, g=0.01, alpha=1.2, beta1=-math.inf, beta2=math.inf, q=1.0)
TRANSFER_LOOP = Trajectory(delta_amp=0.04, gamma0=0.0, gamma_amp=0.008, period=2500.0, orientation="CCW")
PRODUCTION_LOOP = Trajectory(delta_amp=0.06, gamma0=0.0, gamma_amp=0.008, period=2500.0, orientation="CCW")

# rates gamma1- = 0.02, gamma1+ = 0.01, gamma2- = 0.01, gamma2+ = 0.005 (n = 1/3 on both sides)
SPECTRUM_CONFIG = SystemConfig(epsilon=1.0, gamma=0.03, alpha=0.5, beta1=math.log(2), beta2=math.log(2), q=1.0)
SPECTRUM_G_GRID = tuple(np.linspace(5e-5, 5e-3, 100))

Q_GRID = tuple(np.linspace(0.0, 1.0, 21))
GAMMA0_GRID = tuple(np.linspace(0.0, 0.02, 11))
SIDE_Q = (0.0, 0.5, 1.0)
_LOG_BETA = np.geomspace(1e-1, 1e3, 9)
BETA1_GRID = (-math.inf, *(-_LOG_BETA[::-1]), *_LOG_BETA, math.inf)
GAMMA_AMP_BASE = tuple(np.linspace(0.002, 0.03, 25))


def gamma_amp_grid(q: float) -> tuple:
    """Loop-amplitude grid for ``q``: 25 points in ``[0.002, 0.03]`` plus points up to past the EP.

    Loops at zero detuning reach ``gamma = gamma_amp``, so an amplitude
    above ``gamma_EP`` encircles the EP.  When ``gamma_EP`` lies beyond the
    base range, four log-spaced amplitudes from ``gamma_EP/2`` to
    ``1.25 gamma_EP`` are appended.
    """
    ep = locate_ep(q, TRANSFER_CONFIG).gamma_EP
    grid = list(GAMMA_AMP_BASE)
    if 1.25 * ep > grid[-1]:
        grid += [v for v in np.geomspace(ep / 2, 1.25 * ep, 4) if v > grid[-1]]
    return tuple(grid)


def _spec(name, base, traj, state, out, sweep=None) -> ExperimentSpec:
    return ExperimentSpec(base, traj, state, str(out), sweep, name)


def figure_specs(figure: str, outdir=".") -> list:
    """Built-in experiment specs behind a figure; figS1 has none (spectra only)."""
    d = Path(outdir)
    specs = []
    if figure == "fig2a":
        for q in (0.0, 1.0):
            for o in ("CW", "CCW"):
                tag = f"q{q:g}_{o.lower()}"
                traj = Trajectory.from_dict({**TRANSFER_LOOP.to_dict(), "orientation": o})
                specs.append(_spec(f"fig2a_{tag}", TRANSFER_CONFIG.replace(q=q), traj, "bell_plus", d / f"fig2a_{tag}.csv"))
    elif figure == "fig2b":
        specs.append(
            _spec("fig2b_q", TRANSFER_CONFIG, TRANSFER_LOOP, "bell_plus", d / "fig2b_q_sweep.csv",
                  SweepSpec("base_config.q", Q_GRID))
        )
        specs.append(
            _spec("fig2b_gamma0", TRANSFER_CONFIG, TRANSFER_LOOP, "bell_plus", d / "fig2b_gamma0_sweep.csv",
                  SweepSpec("trajectory.gamma0", GAMMA0_GRID))
        )
    elif figure == "fig3a":
        for q in SIDE_Q:
            specs.append(
                _spec(f"fig3a_q{q:g}", TRANSFER_CONFIG.replace(q=q), TRANSFER_LOOP, "bell_plus",
                      d / f"fig3a_q{q:g}_beta1_sweep.csv", SweepSpec("base_config.beta1", BETA1_GRID))
            )
    elif figure == "fig3b":
        for q in SIDE_Q:
            specs.append(
                _spec(f"fig3b_q{q:g}", TRANSFER_CONFIG.replace(q=q), TRANSFER_LOOP, "bell_plus",
                      d / f"fig3b_q{q:g}_gamma_amp_sweep.csv", SweepSpec("trajectory.gamma_amp", gamma_amp_grid(q)))
            )
    elif figure in ("fig4a", "fig4b"):
        orients = ("CW", "CCW") if figure == "fig4a" else ("CCW",)
        for q in SIDE_Q:
            for o in orients:
                tag = f"q{q:g}_{o.lower()}"
                traj = Trajectory.from_dict({**PRODUCTION_LOOP.to_dict(), "orientation": o})
                specs.append(
                    _spec(f"{figure}_{tag}", TRANSFER_CONFIG.replace(q=q), traj, "maximally_mixed", d / f"{figure}_{tag}.csv")
                )
    elif figure != "figS1":
        raise ValidationError(f"unknown figure id {figure!r}; choose from {FIGURES}")
    return specs


FIGURES = ("fig2a", "fig2b", "fig3a", "fig3b", "fig4a", "fig4b", "figS1")


def reproduce(figure: str, outdir=".", steps: int | None = None, jobs: int = 1, stride: int = 10) -> list:
    """Run the built-in experiments for ``figure`` and write CSVs into ``outdir``.

    Time series are written every ``stride`` steps (plus the final step).
    Returns the list of run summaries or sweep results; for ``figS1`` the
    list holds the spectrum sweeps.
    """
    if figure not in FIGURES:
        raise ValidationError(f"unknown figure id {figure!r}; choose from {FIGURES}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    results = []
    if figure == "figS1":
        for q in SIDE_Q:
            sw = spectrum_sweep(SPECTRUM_CONFIG.replace(q=q), "g", SPECTRUM_G_GRID)
            sw.to_csv(outdir / f"figS1_q{q:g}_spectrum.csv")
            results.append(sw)
        return results
    for spec in figure_specs(figure, outdir):
        if spec.sweep is None:
            results.append(run_experiment(spec, steps=steps, stride=stride))
        else:
            results.append(run_sweep(spec, steps=steps, jobs=jobs))
    if figure == "fig3b":
        write_ep_csv(outdir / "fig3b_ep_markers.csv", ep_report(SIDE_Q, TRANSFER_CONFIG))
    return results


def default_jobs() -> int:
    return max(1, min(os.cpu_count() or 1, 8))


__all__ = [
    "ExperimentSpec",
    "FIGURES",
    "NoExceptionalPointError",
    "RunSummary",
    "SweepResult",
    "SweepSpec",
    "ValidationError",
    "ep_report",
    "figure_specs",
    "initial_density_matrix",
    "reproduce",
    "run_experiment",
    "run_sweep",
    "sweep_values",
]
