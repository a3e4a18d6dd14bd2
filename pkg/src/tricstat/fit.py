"""Least-squares fitting of the reduced energies and n0 to occupancy data."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import OptimizeResult, minimize

from .countdp import count_resolved_weights
from .energy import DEFAULT_N0, ReducedParams, bath_from_conc, entropy_term
from .ensemble import OccupancyDistribution, distribution, distribution_from_log_weights
from .errors import DatasetError, DegenerateEnsembleError, ModelError
from .lattice import LatticeSpec

__all__ = [
    "MeanPoint",
    "HistPoint",
    "Dataset",
    "FitConfig",
    "FitResult",
    "loss",
    "fit",
    "synthesize_dataset",
    "curve_rmse",
    "load_dataset",
    "dataset_to_csv",
]

log = logging.getLogger(__name__)

PARAM_NAMES = ("alpha_hat_0", "alpha_hat_1", "alpha_hat_2", "beta_hat_1", "beta_hat_2", "beta_hat_3", "gamma0")


@dataclass(frozen=True)
class MeanPoint:
    atp_conc: float
    value: float
    weight: float = 1.0


@dataclass(frozen=True)
class HistPoint:
    atp_conc: float
    n: int
    value: float
    weight: float = 1.0


@dataclass
class Dataset:
    """Observed mean occupancies and occupancy histograms.

    Histogram values at one concentration may not sum to exactly one, but a
    total outside [0.9, 1.1] is rejected.
    """

    mean_points: list[MeanPoint] = field(default_factory=list)
    hist_points: list[HistPoint] = field(default_factory=list)

    def __post_init__(self):
        totals: dict[float, float] = defaultdict(float)
        for p in [*self.mean_points, *self.hist_points]:
            if not (math.isfinite(p.atp_conc) and math.isfinite(p.value) and math.isfinite(p.weight)):
                raise DatasetError(f"non-finite value in {p}")
            if p.atp_conc <= 0:
                raise DatasetError(f"concentration must be positive: {p}")
            if p.weight < 0:
                raise DatasetError(f"weight must be non-negative: {p}")
        for p in self.hist_points:
            if not 0.0 <= p.value <= 1.0:
                raise DatasetError(f"probability outside [0, 1]: {p}")
            if p.n < 0:
                raise DatasetError(f"negative bound count: {p}")
            totals[p.atp_conc] += p.value
        for conc, total in totals.items():
            if not 0.9 <= total <= 1.1:
                raise DatasetError(f"histogram at {conc:g} uM sums to {total:.4f}, outside [0.9, 1.1]")

    def __len__(self) -> int:
        return len(self.mean_points) + len(self.hist_points)

    def concentrations(self) -> list[float]:
        return sorted({p.atp_conc for p in [*self.mean_points, *self.hist_points]})


@dataclass
class FitConfig:
    restarts: int = 16
    max_iter: int = 3000  # per simplex round
    polish_rounds: int = 4
    simplex_scale: float = 1.0
    simplex_shrink: float = 0.3
    max_draws: int = 100
    seed: int = 0
    engine: str = "dp"
    spec: LatticeSpec = field(default_factory=LatticeSpec)
    energy_box: tuple[float, float] = (-10.0, 10.0)
    gamma0_box: tuple[float, float] = (-150.0, 0.0)
    n0_box: tuple[float, float] = (5.0, 100.0)
    fit_n0: bool = True
    n0: float = DEFAULT_N0
    xatol: float = 1e-7
    fatol: float = 1e-13


@dataclass
class FitResult:
    params: ReducedParams
    n0: float
    objective: float
    trace: list[float]
    restarts: int
    converged: bool
    restart_losses: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "n0": self.n0,
            "loss": self.objective,
            "converged": self.converged,
            "restarts": self.restarts,
            "restart_losses": self.restart_losses,
            "trace": self.trace,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self) -> str:
        """Single-row parameter table in k_BT."""
        heads = ("a0", "a1", "a2", "b1", "b2", "b3", "gamma0", "N0")
        vals = (*self.params.alpha_hat, *self.params.beta_hat, self.params.gamma0, self.n0)
        rule = "=" * (10 * len(heads))
        return "\n".join(
            [
                rule,
                "".join(f"{h:>10}" for h in heads),
                "-" * (10 * len(heads)),
                "".join(f"{v:>10.2f}" for v in vals),
                rule,
            ]
        )


# -- forward model and loss ----------------------------------------------------


def forward_model(
    params: ReducedParams, n0: float, concs: Sequence[float], spec: LatticeSpec, engine: str = "dp"
) -> tuple[np.ndarray, np.ndarray]:
    """Model P_n (one row per concentration) and mean occupancies.

    Raises on bath or model errors.
    """
    M = spec.total_sites
    n = np.arange(M + 1)
    if engine != "dp":
        dists = [distribution(params, bath_from_conc(c, n0, spec), spec, engine) for c in concs]
        p = np.array([d.p_n for d in dists]).reshape(len(dists), M + 1)
        return p, p @ n
    # the site-energy sums do not depend on the bath, so share them
    log_omega = count_resolved_weights(params, spec).log_omega
    n_total = np.array([bath_from_conc(c, n0, spec).n_total for c in concs])
    log_w = log_omega[None, :] - params.gamma0 * np.log(n_total[:, None] - n[None, :])
    log_w -= log_w.max(axis=1, keepdims=True)
    if not np.all(np.isfinite(log_w)):
        raise DegenerateEnsembleError("non-finite weights")
    p = np.exp(log_w)
    p /= p.sum(axis=1, keepdims=True)
    return p, p @ n


def model_distributions(
    params: ReducedParams, n0: float, concs: Sequence[float], spec: LatticeSpec, engine: str = "dp"
) -> dict[float, OccupancyDistribution]:
    """Forward model at each concentration as OccupancyDistribution objects."""
    if engine != "dp":
        return {c: distribution(params, bath_from_conc(c, n0, spec), spec, engine) for c in concs}
    log_omega = count_resolved_weights(params, spec).log_omega
    n = np.arange(spec.total_sites + 1)
    out = {}
    for c in concs:
        bath = bath_from_conc(c, n0, spec)
        out[c] = distribution_from_log_weights(log_omega - entropy_term(n, bath.n_total, params.gamma0))
    return out


class _Residuals:
    """Dataset flattened to index arrays for vectorised residuals."""

    def __init__(self, data: Dataset, spec: LatticeSpec):
        self.spec = spec
        self.concs = data.concentrations()
        row = {c: i for i, c in enumerate(self.concs)}
        M = spec.total_sites
        self.mean_row = np.array([row[p.atp_conc] for p in data.mean_points], dtype=int)
        self.mean_obs = np.array([p.value for p in data.mean_points], dtype=float)
        self.mean_w = np.array([p.weight for p in data.mean_points], dtype=float)
        hist = [p for p in data.hist_points if p.n <= M]
        # bins beyond M have model probability zero
        self.offgrid = sum(p.weight * p.value**2 for p in data.hist_points if p.n > M)
        self.hist_row = np.array([row[p.atp_conc] for p in hist], dtype=int)
        self.hist_n = np.array([p.n for p in hist], dtype=int)
        self.hist_obs = np.array([p.value for p in hist], dtype=float)
        self.hist_w = np.array([p.weight for p in hist], dtype=float)

    def residuals(self, params: ReducedParams, n0: float, engine: str) -> tuple[np.ndarray, np.ndarray]:
        p, mean = forward_model(params, n0, self.concs, self.spec, engine)
        return mean[self.mean_row] - self.mean_obs, p[self.hist_row, self.hist_n] - self.hist_obs

    def loss(self, params: ReducedParams, n0: float, engine: str) -> float:
        if not self.concs:
            return 0.0
        try:
            r_mean, r_hist = self.residuals(params, n0, engine)
        except ModelError:
            return math.inf
        return float(np.dot(self.mean_w, r_mean**2) + np.dot(self.hist_w, r_hist**2) + self.offgrid)


def loss(
    params: ReducedParams,
    n0: float,
    data: Dataset,
    spec: LatticeSpec | None = None,
    engine: str = "dp",
) -> float:
    """Weighted sum of squared residuals over mean and histogram points.

    Bath or model failures give ``inf`` so optimisers can step over them.
    """
    return _Residuals(data, spec or LatticeSpec()).loss(params, n0, engine)


def curve_rmse(
    params: ReducedParams, n0: float, data: Dataset, spec: LatticeSpec | None = None, engine: str = "dp"
) -> dict[str, float]:
    """Unweighted RMSE of the mean curve and of the histogram values."""
    r_mean, r_hist = _Residuals(data, spec or LatticeSpec()).residuals(params, n0, engine)
    out = {}
    if r_mean.size:
        out["mean_n"] = float(np.sqrt(np.mean(r_mean**2)))
    if r_hist.size:
        out["p_n"] = float(np.sqrt(np.mean(r_hist**2)))
    return out


# -- optimisation --------------------------------------------------------------
#
# The optimiser works in internal coordinates: the six site energies, then
# gamma0 / n0 and ln n0 when n0 is free (gamma0 alone otherwise). Only
# gamma0 * ln(1 - n / N) survives normalisation, so at high [ATP] the data
# constrain the ratio gamma0 / n0; fitting that ratio directly removes a
# long curved valley from the simplex's path.

_SIMPLEX_STEP_FREE = np.array([1.0] * 6 + [0.5, 0.3])
_SIMPLEX_STEP_FIXED = np.array([1.0] * 6 + [5.0])


def _to_internal(params: ReducedParams, n0: float, config: FitConfig) -> np.ndarray:
    v = params.as_vector()
    if config.fit_n0:
        return np.r_[v[:6], v[6] / n0, math.log(n0)]
    return v


def _from_internal(z: np.ndarray, config: FitConfig) -> tuple[ReducedParams, float]:
    if config.fit_n0:
        n0 = math.exp(z[7])
        return ReducedParams.from_vector([*z[:6], z[6] * n0]), n0
    return ReducedParams.from_vector(z), config.n0


def _draw_start(rng: np.random.Generator, config: FitConfig) -> tuple[ReducedParams, float]:
    params = ReducedParams.from_vector([*rng.uniform(*config.energy_box, size=6), rng.uniform(*config.gamma0_box)])
    n0 = float(rng.uniform(*config.n0_box)) if config.fit_n0 else config.n0
    return params, n0


def _run_restart(z0: np.ndarray, objective, config: FitConfig) -> tuple[np.ndarray, float, list[float], bool]:
    """Nelder-Mead with the simplex rebuilt around the incumbent each round.

    Each round shrinks the initial simplex by ``simplex_shrink``; rebuilding
    escapes simplices that collapsed onto a subspace.
    """
    trace: list[float] = []

    def record(intermediate_result: OptimizeResult):
        trace.append(float(intermediate_result.fun))

    steps = _SIMPLEX_STEP_FREE if config.fit_n0 else _SIMPLEX_STEP_FIXED
    z, fun, ok = z0, objective(z0), False
    scale = config.simplex_scale
    for _ in range(max(1, config.polish_rounds)):
        simplex = np.vstack([z, z + scale * np.diag(steps)])
        res = minimize(
            objective,
            z,
            method="Nelder-Mead",
            callback=record,
            options={
                "maxiter": config.max_iter,
                "maxfev": config.max_iter,
                "xatol": config.xatol,
                "fatol": config.fatol,
                "adaptive": True,
                "initial_simplex": simplex,
            },
        )
        improved = res.fun < fun
        if improved:
            z, fun = res.x, float(res.fun)
        # an exact fit counts even when flat directions keep the simplex wide
        ok = bool(res.success) or fun <= config.fatol
        if not improved:
            break
        scale *= config.simplex_shrink
    return z, fun, trace, ok


def fit(data: Dataset, config: FitConfig | None = None) -> FitResult:
    """Multistart Nelder-Mead fit; deterministic for a fixed ``config.seed``.

    Start points are drawn uniformly from the configured boxes; a draw whose
    loss is infinite (bath undefined somewhere in the data) is redrawn. The
    best restart wins, ties going to the earliest one.
    """
    config = config or FitConfig()
    if config.max_iter <= 0 or config.restarts <= 0:
        raise ValueError("max_iter and restarts must be positive")
    if not len(data):
        raise DatasetError("cannot fit an empty dataset")
    compiled = _Residuals(data, config.spec)

    def objective(z: np.ndarray) -> float:
        if not np.all(np.isfinite(z)):
            return math.inf
        try:
            params, n0 = _from_internal(z, config)
        except (ModelError, OverflowError):
            return math.inf
        return compiled.loss(params, n0, config.engine)

    rng = np.random.default_rng(config.seed)
    best = None
    losses = []
    for i in range(config.restarts):
        for _ in range(config.max_draws):
            z0 = _to_internal(*_draw_start(rng, config), config)
            if math.isfinite(objective(z0)):
                break
        else:
            raise DatasetError(f"no feasible start found in {config.max_draws} draws; widen n0_box")
        z, fun, trace, ok = _run_restart(z0, objective, config)
        losses.append(fun)
        log.debug("restart %d: loss %.3e after %d iterations", i, fun, len(trace))
        if best is None or fun < best[1]:
            best = (z, fun, trace, ok)
    z, fun, trace, ok = best
    params, n0 = _from_internal(z, config)
    return FitResult(params, n0, fun, trace, config.restarts, ok, losses)


def synthesize_dataset(
    params: ReducedParams,
    n0: float,
    conc_list: Sequence[float],
    noise_sd: float = 0.0,
    seed: int = 0,
    spec: LatticeSpec | None = None,
    engine: str = "dp",
) -> Dataset:
    """Forward-model mean occupancies and full histograms, optionally noised."""
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    spec = spec or LatticeSpec()
    rng = np.random.default_rng(seed)
    model = model_distributions(params, n0, list(conc_list), spec, engine)
    means, hists = [], []
    for c in conc_list:
        d = model[c]
        means.append(MeanPoint(float(c), float(d.mean_n + noise_sd * rng.standard_normal()) if noise_sd else d.mean_n))
        for n, p in enumerate(d.p_n):
            v = float(np.clip(p + noise_sd * rng.standard_normal(), 0.0, 1.0)) if noise_sd else float(p)
            hists.append(HistPoint(float(c), n, v))
    return Dataset(means, hists)


# -- dataset files -------------------------------------------------------------

_COLUMNS = ["atp_uM", "kind", "n", "value", "weight"]


def dataset_to_csv(data: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_COLUMNS)
    for p in data.mean_points:
        w.writerow([repr(p.atp_conc), "mean", "", repr(p.value), repr(p.weight)])
    for p in data.hist_points:
        w.writerow([repr(p.atp_conc), "hist", p.n, repr(p.value), repr(p.weight)])
    return buf.getvalue()


def parse_dataset(text: str) -> Dataset:
    reader = csv.DictReader(io.StringIO(text))
    missing = set(_COLUMNS[:4]) - set(reader.fieldnames or [])
    if missing:
        raise DatasetError(f"dataset missing columns {sorted(missing)}")
    means, hists = [], []
    for line, row in enumerate(reader, start=2):
        try:
            conc = float(row["atp_uM"])
            value = float(row["value"])
            weight = float(row["weight"]) if row.get("weight") not in (None, "") else 1.0
            kind = row["kind"].strip()
            if kind == "mean":
                means.append(MeanPoint(conc, value, weight))
            elif kind == "hist":
                hists.append(HistPoint(conc, int(row["n"]), value, weight))
            else:
                raise DatasetError(f"unknown kind {kind!r}")
        except (TypeError, ValueError) as exc:
            raise DatasetError(f"line {line}: {exc}") from None
    return Dataset(means, hists)


def load_dataset(path: str | Path) -> Dataset:
    return parse_dataset(Path(path).read_text(encoding="utf-8"))
