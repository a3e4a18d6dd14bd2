"""Double-ring lattice: topology, microstate codec, index sets and symmetry.

Sites are labelled 1..M with M = 2R. Sites 1..R form ring 1 and R+1..2R
form ring 2; site j and site j+R are mirror partners. A microstate with
occupancies (i_1, ..., i_M) has index ``k = sum(i_j * 2**(j-1)) + 1``, so
the integer ``k - 1`` (the *code*) stores site j in bit j-1.
"""
from __future__ import annotations

import functools
import itertools
import re
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import StateIndexError, TopologyError

__all__ = [
    "LatticeSpec",
    "MicroState",
    "NeighborSignature",
    "encode_state",
    "decode_state",
    "bound_count",
    "states_with_count",
    "neighbor_signature",
    "canonicalize",
    "orbit",
    "parse_state",
    "format_state",
    "canonical_codes",
    "signature_table",
    "popcounts",
]

# Enumeration tables are materialised for every code, so keep M bounded.
MAX_ENUM_SITES = 20


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry of two perfectly stacked periodic rings of ``ring_len`` sites."""

    ring_len: int = 8
    num_rings: int = 2

    def __post_init__(self):
        if int(self.ring_len) != self.ring_len or self.ring_len < 3:
            raise TopologyError(f"ring_len must be an integer >= 3, got {self.ring_len!r}")
        if self.num_rings != 2:
            raise TopologyError("only double-ring lattices are supported")

    @property
    def total_sites(self) -> int:
        return 2 * self.ring_len

    @property
    def num_states(self) -> int:
        return 1 << self.total_sites

    def ring_of(self, site: int) -> int:
        self._check_site(site)
        return 1 if site <= self.ring_len else 2

    def neighbors(self, site: int) -> tuple[int, int]:
        """In-ring left and right neighbours of a 1-based site (periodic)."""
        self._check_site(site)
        R = self.ring_len
        offset = 0 if site <= R else R
        pos = site - 1 - offset
        return (offset + (pos - 1) % R + 1, offset + (pos + 1) % R + 1)

    def mirror(self, site: int) -> int:
        self._check_site(site)
        return (site - 1 + self.ring_len) % self.total_sites + 1

    def _check_site(self, site: int) -> None:
        if not 1 <= site <= self.total_sites:
            raise TopologyError(f"site {site} outside 1..{self.total_sites}")


@dataclass(frozen=True)
class MicroState:
    """One occupancy configuration; ``bits[j-1]`` is the occupancy of site j."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.bits) % 2 or len(self.bits) < 6:
            raise TopologyError(f"state must have an even number (>= 6) of sites, got {len(self.bits)}")
        if any(b not in (0, 1) for b in self.bits):
            raise TopologyError("occupancies must be 0 or 1")

    @classmethod
    def from_code(cls, code: int, spec: LatticeSpec) -> "MicroState":
        return cls(tuple((int(code) >> j) & 1 for j in range(spec.total_sites)))

    @property
    def spec(self) -> LatticeSpec:
        return LatticeSpec(len(self.bits) // 2)

    @property
    def code(self) -> int:
        return sum(b << j for j, b in enumerate(self.bits))

    @property
    def index(self) -> int:
        return self.code + 1

    @property
    def n_bound(self) -> int:
        return sum(self.bits)

    def bound_sites(self) -> list[int]:
        return [j + 1 for j, b in enumerate(self.bits) if b]

    def __str__(self) -> str:
        return format_state(self)


@dataclass(frozen=True)
class NeighborSignature:
    """Counts of bound sites by number of bound in-ring neighbours.

    ``n1[i]`` counts bound sites with ``i`` bound in-ring neighbours and an
    empty mirror; ``n2[i]`` the same with a bound mirror.
    """

    n1: tuple[int, int, int]
    n2: tuple[int, int, int]

    @property
    def total(self) -> int:
        return sum(self.n1) + sum(self.n2)

    def as_vector(self) -> np.ndarray:
        return np.array(self.n1 + self.n2, dtype=np.int64)


def encode_state(bits: Sequence[int], spec: LatticeSpec | None = None) -> int:
    """Return the 1-based state index of an occupancy sequence."""
    bits = tuple(int(b) for b in bits)
    if spec is not None and len(bits) != spec.total_sites:
        raise TopologyError(f"expected {spec.total_sites} occupancies, got {len(bits)}")
    return MicroState(bits).index


def decode_state(k: int, spec: LatticeSpec) -> MicroState:
    if not 1 <= k <= spec.num_states:
        raise StateIndexError(f"state index {k} outside 1..{spec.num_states}")
    return MicroState.from_code(k - 1, spec)


def bound_count(state: MicroState) -> int:
    return state.n_bound


def states_with_count(n: int, spec: LatticeSpec) -> Iterator[MicroState]:
    """Yield the C(M, n) states with exactly ``n`` bound sites."""
    M = spec.total_sites
    if not 0 <= n <= M:
        raise StateIndexError(f"bound count {n} outside 0..{M}")
    for sites in itertools.combinations(range(M), n):
        bits = [0] * M
        for j in sites:
            bits[j] = 1
        yield MicroState(tuple(bits))


def _check_pair(state: MicroState, spec: LatticeSpec) -> None:
    if len(state.bits) != spec.total_sites:
        raise TopologyError(f"state has {len(state.bits)} sites, lattice has {spec.total_sites}")


def neighbor_signature(state: MicroState, spec: LatticeSpec) -> NeighborSignature:
    _check_pair(state, spec)
    n1 = [0, 0, 0]
    n2 = [0, 0, 0]
    b = state.bits
    for site in range(1, spec.total_sites + 1):
        if not b[site - 1]:
            continue
        left, right = spec.neighbors(site)
        i = b[left - 1] + b[right - 1]
        if b[spec.mirror(site) - 1]:
            n2[i] += 1
        else:
            n1[i] += 1
    return NeighborSignature(tuple(n1), tuple(n2))


# -- vectorised tables ---------------------------------------------------------


def _ring_transform(ring: np.ndarray, R: int, shift: int, reflect: bool) -> np.ndarray:
    mask = (1 << R) - 1
    if reflect:
        out = np.zeros_like(ring)
        for j in range(R):
            out |= ((ring >> j) & 1) << (R - 1 - j)
        ring = out
    if shift:
        ring = ((ring << shift) | (ring >> (R - shift))) & mask
    return ring


def symmetry_images(codes: np.ndarray, spec: LatticeSpec) -> Iterator[np.ndarray]:
    """Images of ``codes`` under rotation x reflection x ring swap (order 4R).

    Rotation and reflection act on both rings at once so mirror pairs are
    preserved.
    """
    R = spec.ring_len
    mask = (1 << R) - 1
    codes = np.asarray(codes, dtype=np.int64)
    lo, hi = codes & mask, (codes >> R) & mask
    for reflect in (False, True):
        for shift in range(R):
            a = _ring_transform(lo, R, shift, reflect)
            b = _ring_transform(hi, R, shift, reflect)
            yield a | (b << R)
            yield b | (a << R)


def canonical_codes(codes: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    """Least code in each orbit, elementwise."""
    codes = np.asarray(codes, dtype=np.int64)
    best = codes.copy()
    for img in symmetry_images(codes, spec):
        np.minimum(best, img, out=best)
    return best


def canonicalize(state: MicroState, spec: LatticeSpec) -> MicroState:
    """Least-index member of the state's symmetry orbit."""
    _check_pair(state, spec)
    code = int(canonical_codes(np.array([state.code]), spec)[0])
    return MicroState.from_code(code, spec)


def orbit(state: MicroState, spec: LatticeSpec) -> set[MicroState]:
    _check_pair(state, spec)
    codes = {int(img[0]) for img in symmetry_images(np.array([state.code]), spec)}
    return {MicroState.from_code(c, spec) for c in sorted(codes)}


def _check_enumerable(spec: LatticeSpec) -> None:
    if spec.total_sites > MAX_ENUM_SITES:
        raise TopologyError(
            f"enumeration limited to M <= {MAX_ENUM_SITES} sites (M={spec.total_sites}); use the dp engine"
        )


@functools.lru_cache(maxsize=8)
def popcounts(spec: LatticeSpec) -> np.ndarray:
    """Bound count of every code 0..2^M-1 (read-only)."""
    _check_enumerable(spec)
    codes = np.arange(spec.num_states, dtype=np.int64)
    out = np.zeros(spec.num_states, dtype=np.int8)
    for j in range(spec.total_sites):
        out += ((codes >> j) & 1).astype(np.int8)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=8)
def signature_table(spec: LatticeSpec) -> np.ndarray:
    """Neighbour signature of every code, shape (2^M, 6), columns n1[0..2], n2[0..2]."""
    _check_enumerable(spec)
    R, M = spec.ring_len, spec.total_sites
    codes = np.arange(spec.num_states, dtype=np.int64)
    bit = [((codes >> j) & 1).astype(np.int8) for j in range(M)]
    table = np.zeros((spec.num_states, 6), dtype=np.int8)
    for j in range(M):
        ring0 = 0 if j < R else R
        pos = j - ring0
        i = bit[ring0 + (pos - 1) % R] + bit[ring0 + (pos + 1) % R]
        mirrored = bit[(j + R) % M]
        col = i + 3 * mirrored
        occupied = bit[j].astype(bool)
        # col ranges over 0..5; one-hot accumulate for occupied sites only
        for c in range(6):
            table[:, c] += (occupied & (col == c)).astype(np.int8)
    table.setflags(write=False)
    return table


# -- literal format ------------------------------------------------------------

_LITERAL = re.compile(r"^\[([01]+)\]\[([01]+)\]$")


def format_state(state: MicroState) -> str:
    R = len(state.bits) // 2
    b = "".join(str(x) for x in state.bits)
    return f"[{b[:R]}][{b[R:]}]"


def parse_state(text: str, spec: LatticeSpec | None = None) -> MicroState:
    """Parse a ``[b1..bR][bR+1..b2R]`` literal."""
    m = _LITERAL.match(text.strip())
    if not m or len(m.group(1)) != len(m.group(2)):
        raise TopologyError(f"malformed state literal {text!r}")
    state = MicroState(tuple(int(c) for c in m.group(1) + m.group(2)))
    if spec is not None:
        _check_pair(state, spec)
    return state
