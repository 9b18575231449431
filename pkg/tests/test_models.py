import math

import numpy as np
import pytest

from entlab.errors import CapacityError
from entlab.measures import LOG2E, vn_entropy_bits
from entlab.models import (
    FreeBosonSpec,
    LocalHamiltonian,
    build_model,
    dimer_state,
    free_boson_block_entropy,
    free_energy,
    gibbs_state,
    ground_pure_state,
    ground_state,
    overlap_scan,
    two_site_entanglement_scan,
)
from entlab.states import (
    DensityOperator,
    SiteSpace,
    SIGMA_X,
    SIGMA_Z,
    random_density_operator,
)


def _dense_oracle_ising(n, b, periodic):
    """Independent literal kron-loop assembly (second implementation)."""
    sz = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)

    def site_op(op, i):
        m = np.array([[1.0]], dtype=complex)
        for k in range(n):
            m = np.kron(m, op if k == i else np.eye(2))
        return m

    dim = 2**n
    ham = np.zeros((dim, dim), dtype=complex)
    bonds = [(i, i + 1) for i in range(n - 1)] + ([(n - 1, 0)] if periodic else [])
    for i, j in bonds:
        ham -= site_op(sz, i) @ site_op(sz, j)
    for i in range(n):
        ham -= b * site_op(sx, i)
    return ham


def test_build_model_term_counts():
    mg4 = build_model("majumdar-ghosh", 4)
    two_site = [t for t in mg4.terms if len(t[0]) == 2]
    assert len(two_site) == 8  # 4 nearest + 4 next-nearest
    with pytest.raises(ValueError):
        build_model("majumdar-ghosh", 5)
    with pytest.raises(ValueError):
        build_model("unknown-model", 4)


def test_build_model_matches_oracle():
    for n, b, boundary in ((4, 0.0, "periodic"), (5, 0.7, "open"), (6, 1.3, "periodic")):
        h = build_model("transverse-ising", n, b, boundary)
        oracle = _dense_oracle_ising(n, b, boundary == "periodic")
        assert np.max(np.abs(h.to_dense() - oracle)) < 1e-12


def test_ising_classical_limit():
    res = ground_state(build_model("transverse-ising", 4, 0.0))
    assert res.ground_energy == pytest.approx(-4.0, abs=1e-12)


def test_ising_spectrum_matches_oracle_n10():
    h = build_model("transverse-ising", 10, 1.0)
    res = ground_state(h)
    oracle = np.linalg.eigvalsh(_dense_oracle_ising(10, 1.0, True))
    k = len(res.eigenvalues)
    assert np.max(np.abs(res.eigenvalues - oracle[:k])) < 1e-9


def test_mg_ground_space_and_dimer_states():
    h = build_model("majumdar-ghosh", 8)
    res = ground_state(h)
    assert res.ground_dim == 2
    assert res.ground_energy == pytest.approx(-3.0 * 8 / 8.0, abs=1e-9)
    for covering in (0, 1):
        dimer = dimer_state(8, covering)
        assert h.energy(dimer) == pytest.approx(res.ground_energy, abs=1e-9)
        # the dimer vector lies inside the computed ground space
        overlap = res.ground_vectors.conj().T @ dimer.amplitudes
        assert np.linalg.norm(overlap) == pytest.approx(1.0, abs=1e-9)


def test_single_site_hamiltonian_and_gibbs():
    # H = sigma_z on one qubit: ground state |0> at energy -1 in this convention
    h = LocalHamiltonian(SiteSpace((2,)), (((0,), SIGMA_Z),))
    res = ground_state(h)
    assert res.ground_energy == pytest.approx(-1.0, abs=1e-14)
    assert abs(res.ground_vectors[0, 0]) == pytest.approx(1.0, abs=1e-12)
    rho = gibbs_state(h, 1.0)
    z = math.exp(1.0) + math.exp(-1.0)
    assert np.allclose(np.diag(rho.matrix).real, [math.exp(1.0) / z, math.exp(-1.0) / z], atol=1e-12)


def test_gibbs_limits():
    h = build_model("transverse-ising", 4, 1.0)
    hot = gibbs_state(h, 1e6)
    assert np.max(np.abs(hot.matrix - np.eye(16) / 16.0)) < 1e-5
    h_open = build_model("transverse-ising", 4, 1.3, "open")  # nondegenerate ground
    cold = gibbs_state(h_open, 1e-2)
    psi = ground_pure_state(h_open)
    projector = np.outer(psi.amplitudes, psi.amplitudes.conj())
    assert np.max(np.abs(cold.matrix - projector)) < 1e-8
    with pytest.raises(ValueError):
        gibbs_state(h, 0.0)


def test_gibbs_minimizes_free_energy():
    h = build_model("transverse-ising", 3, 0.8, "open")
    t = 1.3
    rho_t = gibbs_state(h, t)
    f_gibbs = free_energy(h, rho_t, t)
    rng = np.random.default_rng(0)
    for k in range(50):
        other = random_density_operator(h.space, seed=int(rng.integers(1 << 30)))
        mixed = DensityOperator(h.space, 0.7 * rho_t.matrix + 0.3 * other.matrix)
        assert free_energy(h, mixed, t) >= f_gibbs - 1e-9


def test_spectrum_translation_invariance():
    h = build_model("transverse-ising", 6, 0.9)
    base = np.linalg.eigvalsh(h.to_dense())
    shifted_terms = tuple(
        (tuple(sorted((s + 1) % 6 for s in sites)), mat) for sites, mat in h.terms
    )
    # note: sorted site relabeling preserves the symmetric bond matrices
    h_shift = LocalHamiltonian(h.space, shifted_terms, True)
    shifted = np.linalg.eigvalsh(h_shift.to_dense())
    assert np.max(np.abs(base - shifted)) < 1e-9


def test_term_bound_is_max_trace_norm():
    h = build_model("transverse-ising", 4, 1.0, "open")
    norms = [np.abs(np.linalg.eigvalsh(mat)).sum() for _, mat in h.terms]
    assert h.term_bound == pytest.approx(max(norms), abs=1e-12)


def test_capacity_cap():
    with pytest.raises(CapacityError):
        ground_state(build_model("transverse-ising", 15, 1.0))


def test_overlap_scan_zero_epsilon_and_degeneracy_flag():
    pts = overlap_scan("transverse-ising", 4, [0.6, 1.0], epsilon=0.0)
    assert all(p.overlap == pytest.approx(1.0, abs=1e-12) for p in pts)
    # the dimerized model is doubly degenerate: every point flagged
    flagged = overlap_scan("majumdar-ghosh", 6, [0.0])
    assert flagged[0].degenerate


def test_overlap_scan_dip_near_critical_field():
    grid = [0.6 + 0.1 * k for k in range(9)]
    pts = overlap_scan("transverse-ising", 8, grid)
    dip = min(pts, key=lambda p: p.overlap)
    assert abs(dip.b - 1.0) <= 0.2


def test_two_site_scan_limits():
    pts = two_site_entanglement_scan("transverse-ising", 6, [0.0, 10.0, 50.0], pair=(0, 1))
    # symmetry-broken point resolves deterministically to the even combination
    assert pts[0].value == pytest.approx(0.0, abs=1e-9)
    # approach to the paramagnetic product limit: ~1/(2B) residual coherence
    assert pts[2].value < 0.02
    assert pts[2].value < pts[1].value


def test_two_site_scan_peak_sharpens_with_size():
    grid = [0.7, 0.85, 1.0, 1.15, 1.3]

    def max_slope(n):
        pts = two_site_entanglement_scan("transverse-ising", n, grid, pair=(0, 1))
        return max(abs(p.derivative) for p in pts)

    assert max_slope(10) > max_slope(6)


def test_free_boson_single_particle():
    for r, length in ((10, 3), (7, 2)):
        spec = FreeBosonSpec(1, r, length)
        expected = -(length / r) * math.log2(length / r) - (1 - length / r) * math.log2(1 - length / r)
        assert free_boson_block_entropy(spec, "exact") == pytest.approx(expected, abs=1e-12)


def test_free_boson_exact_vs_gaussian():
    for length in (100, 1000):
        spec = FreeBosonSpec(10**4, 10**4, length)
        exact = free_boson_block_entropy(spec, "exact")
        gauss = free_boson_block_entropy(spec, "gaussian")
        assert abs(exact - gauss) < 0.02


def test_free_boson_doubling_increment():
    s1 = free_boson_block_entropy(FreeBosonSpec(10**4, 10**4, 100), "exact")
    s2 = free_boson_block_entropy(FreeBosonSpec(10**4, 10**4, 200), "exact")
    assert abs((s2 - s1) - 0.5) < 0.02


def test_free_boson_block_symmetry():
    a = free_boson_block_entropy(FreeBosonSpec(500, 60, 13), "exact")
    b = free_boson_block_entropy(FreeBosonSpec(500, 60, 47), "exact")
    assert a == pytest.approx(b, abs=1e-12)


def test_free_boson_validation():
    with pytest.raises(ValueError):
        FreeBosonSpec(5, 10, 10)
    with pytest.raises(ValueError):
        FreeBosonSpec(0, 10, 2)
    with pytest.raises(ValueError):
        free_boson_block_entropy(FreeBosonSpec(10, 10, 2), "nope")


def test_dimer_state_requires_even():
    with pytest.raises(ValueError):
        dimer_state(5)
