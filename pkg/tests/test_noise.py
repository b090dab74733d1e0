import math

import numpy as np
import pytest

from dcqec.lattice import ToricLattice
from dcqec.noise import (
    NoiseSpec,
    enumerate_errors,
    enumeration_size,
    sample_depolarizing,
    sample_depolarizing_planes,
)


def test_zero_rate_is_identity():
    lat = ToricLattice(7)
    for i in range(20):
        assert sample_depolarizing(NoiseSpec(0.0, 1), lat, i).weight() == 0


def test_unit_rate_hits_every_qubit():
    lat = ToricLattice(7)
    for i in range(20):
        assert sample_depolarizing(NoiseSpec(1.0, 1), lat, i).weight() == lat.n_qubits


@pytest.mark.parametrize("p", [-0.1, 1.5, float("nan")])
def test_rate_validated(p):
    with pytest.raises(ValueError):
        NoiseSpec(p, 0)


def test_marginals_match_binomial():
    lat = ToricLattice(31)
    spec = NoiseSpec(0.15, 2024)
    counts = np.zeros(4, dtype=np.int64)
    samples = 100_000
    for start in range(0, samples, 5000):
        x, z = sample_depolarizing_planes(spec, lat, start, 5000)
        counts[1] += np.count_nonzero(x & ~z)
        counts[2] += np.count_nonzero(x & z)
        counts[3] += np.count_nonzero(~x & z)
    n = samples * lat.n_qubits
    errors = counts[1:].sum()
    sigma = math.sqrt(n * 0.15 * 0.85)
    assert abs(errors - 0.15 * n) < 3 * sigma
    for c in counts[1:]:
        s = math.sqrt(errors * (1 / 3) * (2 / 3))
        assert abs(c - errors / 3) < 3 * s


def test_streams_are_reproducible_and_distinct():
    lat = ToricLattice(9)
    spec = NoiseSpec(0.3, 77)
    a = sample_depolarizing(spec, lat, 5)
    assert a == sample_depolarizing(spec, lat, 5)
    assert a != sample_depolarizing(spec, lat, 6)
    assert a != sample_depolarizing(NoiseSpec(0.3, 78), lat, 5)


def test_chunking_does_not_change_instances():
    lat = ToricLattice(5)
    spec = NoiseSpec(0.2, 9)
    x, z = sample_depolarizing_planes(spec, lat, 0, 40)
    x2, z2 = sample_depolarizing_planes(spec, lat, 17, 10)
    assert np.array_equal(x[17:27], x2) and np.array_equal(z[17:27], z2)


def test_stream_independence():
    # correlation of per-qubit error indicators between neighbouring streams
    lat = ToricLattice(15)
    x, z = sample_depolarizing_planes(NoiseSpec(0.5, 1), lat, 0, 2000)
    err = (x | z).astype(float)
    a, b = err[:-1].ravel(), err[1:].ravel()
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) < 4 / math.sqrt(a.size)


@pytest.mark.parametrize("L, w, expected", [(3, 1, 55), (5, 0, 1), (5, 2, 11_176)])
def test_enumeration_counts(L, w, expected):
    lat = ToricLattice(L)
    assert enumeration_size(lat, w) == expected
    frames = list(enumerate_errors(lat, w))
    assert len(frames) == expected
    assert len(set(frames)) == expected
    assert max(f.weight() for f in frames) == w


def test_enumeration_cap():
    with pytest.raises(ValueError):
        enumerate_errors(ToricLattice(9), 4, cap=1000)
