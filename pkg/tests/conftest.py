import itertools
import math

import numpy as np
import pytest

from tricstat.energy import TABLE1, ReducedParams
from tricstat.lattice import LatticeSpec


@pytest.fixture
def spec16():
    return LatticeSpec(8)


@pytest.fixture
def table1():
    return TABLE1


def brute_site_energy(bits, params: ReducedParams) -> float:
    """Site-energy sum written straight from the model definition.

    Independent of the library's signature tables: walks every site, counts
    its bound ring neighbours with explicit modular arithmetic.
    """
    M = len(bits)
    R = M // 2
    total = 0.0
    for ring in (0, 1):
        for pos in range(R):
            j = ring * R + pos
            if not bits[j]:
                continue
            left = ring * R + (pos - 1) % R
            right = ring * R + (pos + 1) % R
            i = bits[left] + bits[right]
            mirror = (1 - ring) * R + pos
            total += params.beta_hat[i] if bits[mirror] else params.alpha_hat[i]
    return total


def brute_distribution(params: ReducedParams, n_total: float, R: int) -> np.ndarray:
    """P_n by plain-Python enumeration of all 2^(2R) states (math.fsum, no shifts)."""
    M = 2 * R
    energies = []
    counts = []
    for bits in itertools.product((0, 1), repeat=M):
        n = sum(bits)
        e = brute_site_energy(bits, params) + params.gamma0 * math.log(n_total - n)
        energies.append(e)
        counts.append(n)
    e_min = min(energies)
    weights = [math.exp(-(e - e_min)) for e in energies]
    z = math.fsum(weights)
    p = np.zeros(M + 1)
    for n, w in zip(counts, weights):
        p[n] += w / z
    return p


def random_params(rng: np.random.Generator) -> ReducedParams:
    return ReducedParams.from_vector([*rng.uniform(-5, 5, size=6), rng.uniform(-100, 0)])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
