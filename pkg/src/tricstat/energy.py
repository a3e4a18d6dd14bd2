"""Model parameters, the ATP bath, and state energies in units of k_BT."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import BathError, ParameterError
from .lattice import LatticeSpec, MicroState, neighbor_signature, popcounts, signature_table

__all__ = [
    "RawParams",
    "ReducedParams",
    "Bath",
    "TABLE1",
    "DEFAULT_N0",
    "reduce_params",
    "bath_from_conc",
    "site_potential",
    "entropy_term",
    "state_energy_reduced",
    "state_energy_full",
    "reduced_energies",
    "load_params",
    "dump_params",
    "default_params_path",
]

REFERENCE_CONC = 5.0  # µM at which N == n0
DEFAULT_N0 = 25.0


def _check_finite(obj) -> None:
    for f in fields(obj):
        v = getattr(obj, f.name)
        vals = v if isinstance(v, tuple) else (v,)
        if not all(math.isfinite(float(x)) for x in vals):
            raise ParameterError(f"{type(obj).__name__}.{f.name} must be finite, got {v!r}")


@dataclass(frozen=True)
class RawParams:
    alpha: tuple[float, float, float]
    beta: tuple[float, float, float]
    gamma0: float
    gamma1: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        _check_finite(self)


@dataclass(frozen=True)
class ReducedParams:
    """The seven identifiable energies.

    ``alpha_hat[i]`` is the potential of a bound site with ``i`` bound in-ring
    neighbours and an empty mirror; ``beta_hat[i-1]`` (i = 1..3) the potential
    when the mirror is bound, counting the mirror among the ``i`` neighbours.
    """

    alpha_hat: tuple[float, float, float]
    beta_hat: tuple[float, float, float]
    gamma0: float

    def __post_init__(self):
        object.__setattr__(self, "alpha_hat", tuple(float(x) for x in self.alpha_hat))
        object.__setattr__(self, "beta_hat", tuple(float(x) for x in self.beta_hat))
        object.__setattr__(self, "gamma0", float(self.gamma0))
        if len(self.alpha_hat) != 3 or len(self.beta_hat) != 3:
            raise ParameterError("alpha_hat and beta_hat need three entries each")
        _check_finite(self)

    @property
    def site_vector(self) -> np.ndarray:
        """Coefficients matching the column order of ``signature_table``."""
        return np.array(self.alpha_hat + self.beta_hat, dtype=float)

    def as_vector(self) -> np.ndarray:
        return np.array(self.alpha_hat + self.beta_hat + (self.gamma0,), dtype=float)

    @classmethod
    def from_vector(cls, v) -> "ReducedParams":
        v = [float(x) for x in v]
        return cls(tuple(v[0:3]), tuple(v[3:6]), v[6])

    @classmethod
    def zeros(cls) -> "ReducedParams":
        return cls((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0)

    def to_dict(self) -> dict[str, float]:
        d = {f"alpha_hat_{i}": a for i, a in enumerate(self.alpha_hat)}
        d.update({f"beta_hat_{i + 1}": b for i, b in enumerate(self.beta_hat)})
        d["gamma0"] = self.gamma0
        return d


TABLE1 = ReducedParams((5.33, 2.28, -0.04), (3.07, 1.32, 0.31), -76.50)


@dataclass(frozen=True)
class Bath:
    atp_conc: float
    n_total: float
    n0: float = DEFAULT_N0


def reduce_params(raw: RawParams) -> ReducedParams:
    shift = raw.epsilon + raw.gamma1
    return ReducedParams(
        tuple(a - shift for a in raw.alpha),
        tuple(b - shift for b in raw.beta),
        raw.gamma0,
    )


def bath_from_conc(atp_conc: float, n0: float = DEFAULT_N0, spec: LatticeSpec | None = None) -> Bath:
    """Effective ATP count ``N = n0 * [ATP] / 5`` (not rounded).

    Raises BathError unless N exceeds the number of sites, since every state
    must leave at least one free ATP.
    """
    spec = spec or LatticeSpec()
    if not (atp_conc > 0 and math.isfinite(atp_conc)):
        raise BathError(f"atp_conc must be positive, got {atp_conc!r}")
    if not (n0 > 0 and math.isfinite(n0)):
        raise BathError(f"n0 must be positive, got {n0!r}")
    n_total = n0 * atp_conc / REFERENCE_CONC
    if n_total <= spec.total_sites:
        raise BathError(
            f"[ATP]={atp_conc:g} uM gives N={n_total:g} <= M={spec.total_sites}; model undefined"
        )
    return Bath(float(atp_conc), float(n_total), float(n0))


def site_potential(in_ring_bound: int, mirror_bound: bool, params: ReducedParams) -> float:
    if in_ring_bound not in (0, 1, 2):
        raise ParameterError(f"in-ring bound neighbour count must be 0..2, got {in_ring_bound}")
    return params.beta_hat[in_ring_bound] if mirror_bound else params.alpha_hat[in_ring_bound]


def entropy_term(n, n_total: float, gamma0: float):
    """``gamma0 * ln(N - n)``; +inf where no free ATP remains (n >= N)."""
    free = n_total - np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(free > 0, gamma0 * np.log(np.where(free > 0, free, 1.0)), np.inf)
    return out if out.ndim else float(out)


def state_energy_reduced(state: MicroState, params: ReducedParams, bath: Bath) -> float:
    sig = neighbor_signature(state, state.spec)
    site = float(np.dot(params.site_vector, sig.as_vector()))
    return site + entropy_term(state.n_bound, bath.n_total, params.gamma0)


def state_energy_full(state: MicroState, raw: RawParams, bath: Bath, spec: LatticeSpec) -> float:
    sig = neighbor_signature(state, spec)
    n = state.n_bound
    site = float(np.dot(np.array(raw.alpha + raw.beta, dtype=float), sig.as_vector()))
    entropy = entropy_term(n, bath.n_total, raw.gamma0)
    if math.isinf(entropy):
        return entropy
    return site + entropy + raw.gamma1 * (bath.n_total - n) + raw.epsilon * (spec.total_sites - n)


def reduced_energies(params: ReducedParams, bath: Bath, spec: LatticeSpec) -> np.ndarray:
    """Reduced energy of every state, indexed by code ``k - 1``."""
    site = signature_table(spec) @ params.site_vector
    per_n = entropy_term(np.arange(spec.total_sites + 1), bath.n_total, params.gamma0)
    return site + per_n[popcounts(spec)]


# -- parameter files -----------------------------------------------------------

_REDUCED_KEYS = ("alpha_hat_0", "alpha_hat_1", "alpha_hat_2", "beta_hat_1", "beta_hat_2", "beta_hat_3", "gamma0")
_RAW_KEYS = ("alpha_0", "alpha_1", "alpha_2", "beta_1", "beta_2", "beta_3", "gamma0", "gamma1", "epsilon")


def default_params_path() -> Path:
    return Path(str(resources.files("tricstat") / "data" / "table1.json"))


def load_params(path: str | Path | None = None) -> tuple[ReducedParams, float | None]:
    """Read a flat key/value JSON parameter file in reduced or raw form.

    Returns the reduced parameters and ``n0`` (None when the file has none).
    """
    path = Path(path) if path is not None else default_params_path()
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ParameterError(f"{path}: expected a key/value object")
    n0 = doc.pop("n0", None)
    try:
        if set(_REDUCED_KEYS) <= doc.keys():
            extra = doc.keys() - set(_REDUCED_KEYS)
            values = [float(doc[k]) for k in _REDUCED_KEYS]
            params = ReducedParams.from_vector(values)
        elif set(_RAW_KEYS) - {"gamma1", "epsilon"} <= doc.keys():
            extra = doc.keys() - set(_RAW_KEYS)
            raw = RawParams(
                (float(doc["alpha_0"]), float(doc["alpha_1"]), float(doc["alpha_2"])),
                (float(doc["beta_1"]), float(doc["beta_2"]), float(doc["beta_3"])),
                float(doc["gamma0"]),
                float(doc.get("gamma1", 0.0)),
                float(doc.get("epsilon", 0.0)),
            )
            params = reduce_params(raw)
        else:
            missing = sorted(set(_REDUCED_KEYS) - doc.keys())
            raise ParameterError(f"{path}: missing keys {missing}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"{path}: {exc}") from None
    if extra:
        raise ParameterError(f"{path}: unknown keys {sorted(extra)}")
    if n0 is not None:
        n0 = float(n0)
        if not (n0 > 0 and math.isfinite(n0)):
            raise ParameterError(f"{path}: n0 must be positive")
    return params, n0


def dump_params(params: ReducedParams, n0: float | None = None) -> str:
    d = params.to_dict()
    if n0 is not None:
        d["n0"] = n0
    return json.dumps(d, indent=2)
