"""Exact Boltzmann ensemble over all 2^M microstates.

All weights are handled in the log domain. Per bound count ``n`` the
log-weight ``log W_n = log sum_{k in I_n} exp(-E_k)`` is accumulated with its
own max-shift, so even counts whose total weight underflows a double keep an
accurate logarithm.

Reduction order: the state range is cut into consecutive chunks of
``chunk_size`` codes; each chunk yields a partial ``log W_n`` vector and the
partials are folded left to right with ``logaddexp``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .energy import Bath, ReducedParams, bath_from_conc, reduced_energies
from .errors import BathError, CrossoverNotFound, DegenerateEnsembleError, StateIndexError
from .lattice import (
    LatticeSpec,
    MicroState,
    canonical_codes,
    format_state,
    parse_state,
    popcounts,
)

__all__ = [
    "OccupancyDistribution",
    "DominantState",
    "SweepRow",
    "SweepResult",
    "state_probabilities",
    "occupancy_distribution",
    "distribution",
    "dominant_state",
    "dominant_state_given_n",
    "mean_occupancy",
    "sweep",
    "find_mode_crossover",
    "default_engine",
    "distribution_from_log_weights",
]

ENGINES = ("enum", "dp")
DEFAULT_CHUNK = 1 << 16


@dataclass
class OccupancyDistribution:
    """Probabilities P_0..P_M of the bound count and derived summaries.

    ``mode_all`` maximises over 0..M, ``mode_nonzero`` over 1..M.
    ``dominant_state`` is None when the engine cannot resolve microstates.
    """

    p_n: np.ndarray
    log_p_n: np.ndarray
    mean_n: float
    mode_all: int
    mode_nonzero: int
    dominant_state: MicroState | None = None
    dominant_tie: bool | None = None

    @property
    def max_p(self) -> float:
        return float(self.p_n.max())


class DominantState(NamedTuple):
    state: MicroState
    energy: float
    tie: bool


def default_engine(spec: LatticeSpec) -> str:
    return "enum" if spec.total_sites <= 16 else "dp"


def _logsumexp(a: np.ndarray) -> float:
    m = np.max(a)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(a - m))))


def distribution_from_log_weights(log_w: np.ndarray) -> OccupancyDistribution:
    """Normalise per-count log-weights into an OccupancyDistribution."""
    log_w = np.asarray(log_w, dtype=float)
    log_z = _logsumexp(log_w)
    if not np.isfinite(log_z):
        raise DegenerateEnsembleError("every state has zero Boltzmann weight")
    log_p = log_w - log_z
    p = np.exp(log_p)
    p /= p.sum()
    n = np.arange(len(p))
    return OccupancyDistribution(
        p_n=p,
        log_p_n=log_p,
        mean_n=float(np.dot(n, p)),
        mode_all=int(np.argmax(p)),
        mode_nonzero=int(np.argmax(p[1:]) + 1),
    )


def _chunk_log_weights(energies: np.ndarray, counts: np.ndarray, M: int) -> np.ndarray:
    out = np.full(M + 1, -np.inf)
    for n in range(M + 1):
        e = energies[counts == n]
        if e.size:
            out[n] = _logsumexp(-e)
    return out


def _min_energy(energies: np.ndarray) -> float:
    e_min = float(np.min(energies))
    if not np.isfinite(e_min):
        raise DegenerateEnsembleError("every state has zero Boltzmann weight")
    return e_min


def state_probabilities(params: ReducedParams, bath: Bath, spec: LatticeSpec) -> np.ndarray:
    """Probability of every state; entry ``k - 1`` holds p_k."""
    energies = reduced_energies(params, bath, spec)
    e_min = _min_energy(energies)
    w = np.exp(-(energies - e_min))
    return w / w.sum()


def _dominant_from_energies(energies: np.ndarray, spec: LatticeSpec, rtol: float = 1e-12) -> DominantState:
    e_min = _min_energy(energies)
    near = np.flatnonzero(energies <= e_min + rtol * max(1.0, abs(e_min)))
    canon = np.unique(canonical_codes(near, spec))
    state = MicroState.from_code(int(canon[0]), spec)
    return DominantState(state, e_min, bool(canon.size > 1))


def occupancy_distribution(
    params: ReducedParams, bath: Bath, spec: LatticeSpec, chunk_size: int = DEFAULT_CHUNK
) -> OccupancyDistribution:
    M = spec.total_sites
    energies = reduced_energies(params, bath, spec)
    counts = popcounts(spec)
    log_w = np.full(M + 1, -np.inf)
    for lo in range(0, spec.num_states, chunk_size):
        part = _chunk_log_weights(energies[lo : lo + chunk_size], counts[lo : lo + chunk_size], M)
        log_w = np.logaddexp(log_w, part)
    dist = distribution_from_log_weights(log_w)
    dom = _dominant_from_energies(energies, spec)
    dist.dominant_state = dom.state
    dist.dominant_tie = dom.tie
    return dist


def distribution(
    params: ReducedParams, bath: Bath, spec: LatticeSpec, engine: str | None = None
) -> OccupancyDistribution:
    """Occupancy distribution from the chosen engine (``enum`` or ``dp``)."""
    engine = engine or default_engine(spec)
    if engine == "enum":
        return occupancy_distribution(params, bath, spec)
    if engine == "dp":
        from .countdp import distribution_via_dp

        return distribution_via_dp(params, bath, spec)
    raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")


def dominant_state(params: ReducedParams, bath: Bath, spec: LatticeSpec) -> DominantState:
    """Canonical form of the lowest-energy state, with a tie flag.

    Orbit members of the winner never count as ties; only distinct canonical
    forms at the minimum energy do.
    """
    return _dominant_from_energies(reduced_energies(params, bath, spec), spec)


def dominant_state_given_n(n: int, params: ReducedParams, bath: Bath, spec: LatticeSpec) -> DominantState:
    M = spec.total_sites
    if not 0 <= n <= M:
        raise StateIndexError(f"bound count {n} outside 0..{M}")
    energies = reduced_energies(params, bath, spec)
    masked = np.where(popcounts(spec) == n, energies, np.inf)
    return _dominant_from_energies(masked, spec)


def mean_occupancy(params: ReducedParams, bath: Bath, spec: LatticeSpec) -> float:
    """Mean bound count summed over states, sum_k n(k) p_k."""
    p = state_probabilities(params, bath, spec)
    return float(np.dot(popcounts(spec), p))


# -- sweeps --------------------------------------------------------------------


@dataclass
class SweepRow:
    atp_conc: float
    n_total: float
    dist: OccupancyDistribution


@dataclass
class SweepResult:
    ring_len: int
    rows: list[SweepRow] = field(default_factory=list)

    def header(self) -> list[str]:
        M = 2 * self.ring_len
        return ["atp_uM", "N", "mean_n", *[f"P{n}" for n in range(M + 1)], "mode_all", "mode_nonzero", "dominant_state"]

    def records(self) -> list[dict]:
        out = []
        for row in self.rows:
            d = row.dist
            out.append(
                {
                    "atp_uM": row.atp_conc,
                    "N": row.n_total,
                    "mean_n": d.mean_n,
                    "p_n": [float(x) for x in d.p_n],
                    "mode_all": d.mode_all,
                    "mode_nonzero": d.mode_nonzero,
                    "dominant_state": format_state(d.dominant_state) if d.dominant_state else None,
                }
            )
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for rec in self.records():
            w.writerow(
                [repr(rec["atp_uM"]), repr(rec["N"]), repr(rec["mean_n"])]
                + [repr(p) for p in rec["p_n"]]
                + [rec["mode_all"], rec["mode_nonzero"], rec["dominant_state"] or ""]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"ring_len": self.ring_len, "rows": self.records()}, indent=2)

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        reader = csv.DictReader(io.StringIO(text))
        p_cols = [c for c in reader.fieldnames or [] if c.startswith("P") and c[1:].isdigit()]
        ring_len = (len(p_cols) - 1) // 2
        return cls(ring_len, [_row_from_record(r, [float(r[c]) for c in p_cols]) for r in reader])

    @classmethod
    def from_json(cls, text: str) -> "SweepResult":
        doc = json.loads(text)
        return cls(doc["ring_len"], [_row_from_record(r, r["p_n"]) for r in doc["rows"]])


def _row_from_record(rec: dict, p_n: Sequence[float]) -> SweepRow:
    p = np.asarray(p_n, dtype=float)
    with np.errstate(divide="ignore"):
        log_p = np.log(p)
    dom = rec.get("dominant_state") or None
    dist = OccupancyDistribution(
        p_n=p,
        log_p_n=log_p,
        mean_n=float(rec["mean_n"]),
        mode_all=int(rec["mode_all"]),
        mode_nonzero=int(rec["mode_nonzero"]),
        dominant_state=parse_state(dom) if dom else None,
    )
    return SweepRow(float(rec["atp_uM"]), float(rec["N"]), dist)


def sweep(
    params: ReducedParams,
    conc_list: Sequence[float],
    n0: float,
    spec: LatticeSpec,
    engine: str | None = None,
) -> SweepResult:
    conc_list = [float(c) for c in conc_list]
    if any(b <= a for a, b in zip(conc_list, conc_list[1:])):
        raise ValueError("concentrations must be strictly increasing")
    result = SweepResult(spec.ring_len)
    for c in conc_list:
        try:
            bath = bath_from_conc(c, n0, spec)
        except BathError as exc:
            raise BathError(f"at [ATP]={c:g} uM: {exc}") from None
        result.rows.append(SweepRow(c, bath.n_total, distribution(params, bath, spec, engine)))
    return result


def find_mode_crossover(
    params: ReducedParams,
    n0: float,
    spec: LatticeSpec,
    lo: float,
    hi: float,
    resolution: float = 0.1,
    engine: str | None = None,
) -> float:
    """Smallest concentration (to ``resolution`` µM) at which ``mode_all`` changes.

    Bisects on "mode differs from its value at ``lo``"; the returned value is
    the upper end of the final bracket, where the switch is known to have
    happened.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")

    def mode(c: float) -> int:
        return distribution(params, bath_from_conc(c, n0, spec), spec, engine).mode_all

    low_mode = mode(lo)
    if mode(hi) == low_mode:
        raise CrossoverNotFound(f"mode_all is {low_mode} at both {lo:g} and {hi:g} uM")
    a, b = lo, hi
    while b - a > resolution:
        mid = 0.5 * (a + b)
        if mode(mid) == low_mode:
            a = mid
        else:
            b = mid
    return round(math.ceil(b / resolution - 1e-9) * resolution, 10)
