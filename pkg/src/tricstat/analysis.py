"""Cooperativity orderings and geometric checks on dominant configurations."""
from __future__ import annotations

from dataclasses import dataclass

from .energy import ReducedParams
from .lattice import LatticeSpec, MicroState

__all__ = [
    "Check",
    "cooperativity_chains",
    "sign_structure",
    "is_ring_block",
    "is_connected_cluster",
]


@dataclass(frozen=True)
class Check:
    name: str
    values: tuple[float, ...]
    holds: bool


def _chain(name: str, *values: float) -> Check:
    return Check(name, tuple(values), all(a < b for a, b in zip(values, values[1:])))


def cooperativity_chains(params: ReducedParams, k_max: int = 8) -> list[Check]:
    """Strict orderings of competing growth energies for a bound cluster.

    Each chain compares the energy of adding the next ATP next to an in-ring
    block against placing it on a mirror site or isolated. The last family
    is parametrised by the block size ``k`` = 4..k_max.
    """
    a0, a1, a2 = params.alpha_hat
    b1, b2, b3 = params.beta_hat
    checks = [
        _chain("2a1 < 2b1 < 2a0", 2 * a1, 2 * b1, 2 * a0),
        _chain("2a1+a2 < b1+b2+a1 < 2a1+a0", 2 * a1 + a2, b1 + b2 + a1, 2 * a1 + a0),
        _chain("2a1+2a2 < a1+a2+b1+b2 < 2a1+b1+b3", 2 * a1 + 2 * a2, a1 + a2 + b1 + b2, 2 * a1 + b1 + b3),
    ]
    for k in range(4, k_max + 1):
        checks.append(
            _chain(
                f"k={k}: 2a1+(k-2)a2 < a1+(k-3)a2+b1+b2 < 2a1+(k-4)a2+b1+b3",
                2 * a1 + (k - 2) * a2,
                a1 + (k - 3) * a2 + b1 + b2,
                2 * a1 + (k - 4) * a2 + b1 + b3,
            )
        )
    return checks


def sign_structure(params: ReducedParams) -> list[Check]:
    """Positive in-ring and negative cross-ring cooperativity signs."""
    a0, a1, a2 = params.alpha_hat
    return [
        _chain("a2 < a1 < a0", a2, a1, a0),
        Check("a2 < 0", (a2,), a2 < 0),
        Check("gamma0 < 0", (params.gamma0,), params.gamma0 < 0),
        Check("b_i > 0", params.beta_hat, all(b > 0 for b in params.beta_hat)),
    ]


def is_ring_block(state: MicroState, spec: LatticeSpec) -> bool:
    """True when all bound sites sit in one ring as a single cyclic run."""
    R = spec.ring_len
    sites = state.bound_sites()
    if not sites:
        return False
    rings = {spec.ring_of(s) for s in sites}
    if len(rings) != 1:
        return False
    ring = state.bits[:R] if rings == {1} else state.bits[R:]
    if all(ring):
        return True
    # a single run has exactly one 0 -> 1 transition going around the ring
    starts = sum(1 for j in range(R) if ring[j] and not ring[j - 1])
    return starts == 1


def is_connected_cluster(state: MicroState, spec: LatticeSpec) -> bool:
    """True when bound sites form one component under in-ring and mirror adjacency."""
    sites = set(state.bound_sites())
    if not sites:
        return False
    start = next(iter(sites))
    seen = {start}
    stack = [start]
    while stack:
        s = stack.pop()
        for t in (*spec.neighbors(s), spec.mirror(s)):
            if t in sites and t not in seen:
                seen.add(t)
                stack.append(t)
    return seen == sites
