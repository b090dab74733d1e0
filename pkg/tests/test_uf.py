import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcqec import _ufpy
from dcqec.lattice import PauliFrame, Syndrome, ToricLattice, compute_syndrome, decode_succeeded, syndrome_planes
from dcqec.noise import NoiseSpec, enumerate_errors, sample_depolarizing_planes
from dcqec.oracle import exact_mwpm
from dcqec.uf import BACKEND, ClusterForest, plane_decoder, uf_decode, uf_decode_plane, uf_decode_planes

BACKENDS = ["python"] + (["compiled"] if BACKEND == "compiled" else [])


@pytest.mark.parametrize("backend", BACKENDS)
def test_no_defects_gives_empty_correction(backend):
    lat = ToricLattice(5)
    assert not uf_decode_plane(np.zeros(25, np.uint8), lat, backend=backend).any()
    assert uf_decode(Syndrome.trivial(lat), lat, backend=backend).weight() == 0


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("plane", ["primal", "dual"])
def test_adjacent_defects_joined_by_one_edge(backend, plane):
    lat = ToricLattice(7)
    for a, b in [(0, 1), (8, 15), (6, 0), (3, 45)]:
        d = np.zeros(lat.n_vertices, np.uint8)
        d[[a, b]] = 1
        corr = uf_decode_plane(d, lat, plane, backend)
        assert corr.sum() == 1
        assert np.array_equal(corr, exact_mwpm(d, lat, plane))


@pytest.mark.parametrize("backend", BACKENDS)
def test_every_single_qubit_error_at_L5_is_corrected(backend):
    lat = ToricLattice(5)
    for q in range(lat.n_qubits):
        for label in "XYZ":
            err = PauliFrame.single(lat.n_qubits, q, label)
            syn = compute_syndrome(err, lat)
            corr = uf_decode(syn, lat, backend=backend)
            assert compute_syndrome(corr, lat) == syn
            assert decode_succeeded(err, corr, lat)


def test_single_y_gives_one_edge_per_part():
    lat = ToricLattice(9)
    err = PauliFrame.single(lat.n_qubits, 40, "Y")
    corr = uf_decode(compute_syndrome(err, lat), lat)
    assert corr.x_part.sum() == 1 and corr.z_part.sum() == 1
    assert compute_syndrome(corr, lat) == compute_syndrome(err, lat)


@pytest.mark.parametrize("backend", BACKENDS)
def test_odd_defect_count_rejected(backend):
    lat = ToricLattice(5)
    d = np.zeros(25, np.uint8)
    d[[0, 3, 7]] = 1
    with pytest.raises(ValueError):
        uf_decode_plane(d, lat, backend=backend)


@pytest.mark.parametrize("backend", BACKENDS)
def test_growth_rounds_bounded(backend):
    for L in (5, 9, 15):
        lat = ToricLattice(L)
        x, z = sample_depolarizing_planes(NoiseSpec(0.3, L), lat, 0, 200)
        vd, _ = syndrome_planes(x, z, lat)
        dec = plane_decoder(lat, "primal", backend)
        worst = 0
        for row in vd:
            if row.any():
                dec.decode(row, 2 * L)
                worst = max(worst, dec.last_rounds)
        assert 0 < worst <= 2 * L


@pytest.mark.parametrize("backend", BACKENDS)
def test_round_budget_enforced(backend):
    lat = ToricLattice(9)
    d = np.zeros(lat.n_vertices, np.uint8)
    d[[0, 4 * 9 + 4]] = 1  # distance 8 apart: needs several rounds
    with pytest.raises(RuntimeError):
        plane_decoder(lat, "primal", backend).decode(d, 1)


@pytest.mark.skipif(BACKEND != "compiled", reason="extension not built")
@pytest.mark.parametrize("L, p", [(3, 0.2), (7, 0.1), (11, 0.15), (15, 0.3)])
def test_backends_bit_identical(L, p):
    lat = ToricLattice(L)
    x, z = sample_depolarizing_planes(NoiseSpec(p, 11), lat, 0, 300)
    vd, pd = syndrome_planes(x, z, lat)
    cx, cz = uf_decode_planes(vd, pd, lat, backend="compiled")
    px, pz = uf_decode_planes(vd, pd, lat, backend="python")
    assert np.array_equal(cx, px) and np.array_equal(cz, pz)


@pytest.mark.parametrize("L", [7, 15])
def test_syndrome_consistency_sweep(L):
    lat = ToricLattice(L)
    spec = NoiseSpec(0.1, 5)
    for start in range(0, 100_000, 10_000):
        x, z = sample_depolarizing_planes(spec, lat, start, 10_000)
        vd, pd = syndrome_planes(x, z, lat)
        cx, cz = uf_decode_planes(vd, pd, lat)
        rv, rp = syndrome_planes(cx, cz, lat)
        assert np.array_equal(rv, vd) and np.array_equal(rp, pd)


def test_weight_two_errors_at_L5_never_fail():
    lat = ToricLattice(5)
    frames = list(enumerate_errors(lat, 2))
    x = np.stack([f.x_part for f in frames])
    z = np.stack([f.z_part for f in frames])
    vd, pd = syndrome_planes(x, z, lat)
    cx, cz = uf_decode_planes(vd, pd, lat)
    failures = sum(not decode_succeeded(f, PauliFrame(cx[i], cz[i]), lat) for i, f in enumerate(frames))
    assert failures == 0


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_cluster_forest_union_properties(data):
    n = data.draw(st.integers(2, 40))
    defects = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    forest = ClusterForest(defects)
    pairs = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=60))
    # reference partition by naive relabelling
    label = list(range(n))
    for u, w in pairs:
        forest.union(u, w)
        lu, lw = label[u], label[w]
        label = [lu if l == lw else l for l in label]
    for v in range(n):
        r = forest.find(v)
        assert forest.find(r) == r  # idempotent
        assert forest.find(v) == r
    groups = {}
    for v in range(n):
        groups.setdefault(label[v], []).append(v)
    for members in groups.values():
        roots = {forest.find(v) for v in members}
        assert len(roots) == 1
        root = roots.pop()
        assert forest.parity[root] == sum(defects[v] for v in members) % 2
        assert forest.size[root] == len(members)
    total = sum(forest.parity[r] for r in {forest.find(v) for v in range(n)})
    assert total % 2 == sum(defects) % 2


def test_python_kernel_is_importable_standalone():
    lat = ToricLattice(3)
    dec = _ufpy.PlaneDecoder(lat.vertex_edges, lat.edge_vertices)
    d = np.zeros(9, np.uint8)
    d[[0, 1]] = 1
    assert dec.decode(d).sum() == 1
