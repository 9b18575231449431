import math

import numpy as np
import pytest

from entlab.errors import CapacityError, ZeroProbabilityBranchError
from entlab.states import (
    DensityOperator,
    KrausSet,
    PureState,
    RegionPartition,
    SiteSpace,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    apply_measurement,
    basis_state,
    bell_state,
    compose,
    expectation,
    load_density_operator,
    load_pure_state,
    partial_trace,
    partial_transpose,
    pauli_direction,
    plus_state,
    random_density_operator,
    random_pure_state,
    save_density_operator,
    save_pure_state,
    theta_state,
    validate_kraus,
    w_state,
)


def test_pauli_algebra():
    for s in (SIGMA_X, SIGMA_Y, SIGMA_Z):
        assert np.allclose(s @ s, np.eye(2))
    pairs = [(SIGMA_X, SIGMA_Y), (SIGMA_Y, SIGMA_Z), (SIGMA_X, SIGMA_Z)]
    for a, b in pairs:
        assert np.max(np.abs(a @ b + b @ a)) < 1e-14
    assert np.allclose(SIGMA_Z, -1j * SIGMA_X @ SIGMA_Y)
    # |0> is the -1 eigenstate of sigma_z in this convention
    assert SIGMA_Z[0, 0] == -1.0


def test_pauli_direction_unit_check():
    with pytest.raises(ValueError):
        pauli_direction((0.5, 0.5))
    assert np.allclose(pauli_direction((0.0, 1.0)), SIGMA_Z)


def test_site_space_validation():
    with pytest.raises(ValueError):
        SiteSpace((1, 2))
    with pytest.raises(CapacityError):
        SiteSpace((2,) * 21)  # 2^21 over the default cap
    sp = SiteSpace((2, 3, 2))
    assert sp.total_dim == 12


def test_pure_state_norm_enforced():
    with pytest.raises(ValueError):
        PureState(SiteSpace.qubits(1), np.array([1.0, 1.0]))
    st = PureState.from_vector(SiteSpace.qubits(1), [1.0, 1.0], normalize=True)
    assert abs(np.linalg.norm(st.amplitudes) - 1.0) < 1e-14


def test_density_operator_validation():
    space = SiteSpace.qubits(1)
    with pytest.raises(ValueError):
        DensityOperator(space, np.array([[0.5, 0.5j], [0.5j, 0.5]]))  # not Hermitian
    with pytest.raises(ValueError):
        DensityOperator(space, np.array([[1.5, 0.0], [0.0, -0.5]]))  # negative eigenvalue
    with pytest.raises(ValueError):
        DensityOperator(space, np.eye(2))  # trace 2


def test_compose_basis_product():
    zero = basis_state(SiteSpace.qubits(1), [0])
    one = basis_state(SiteSpace.qubits(1), [1])
    st = compose([zero, one])
    assert st.amplitudes[1] == 1.0
    assert np.count_nonzero(st.amplitudes) == 1


def test_compose_uniform_plus():
    st = compose([plus_state(1), plus_state(1)])
    assert np.allclose(st.amplitudes, 0.5)


def test_compose_fourteen_qubits_norm_by_direct_summation():
    rng = np.random.default_rng(7)
    parts = []
    for k in range(14):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        parts.append(PureState.from_vector(SiteSpace.qubits(1), v, normalize=True))
    st = compose(parts)
    assert st.space.total_dim == 16384
    norm_sq = math.fsum(float(abs(a) ** 2) for a in st.amplitudes)
    assert abs(norm_sq - 1.0) < 1e-12


def test_compose_capacity_error():
    qubit = plus_state(1)
    with pytest.raises(CapacityError):
        compose([qubit] * 21)


def test_partial_trace_bell():
    part = RegionPartition(2, (0,))
    rho_a = partial_trace(bell_state("phi+").to_density(), part, "a")
    assert np.allclose(np.linalg.eigvalsh(rho_a.matrix), [0.5, 0.5])


def test_partial_trace_product_factorizes():
    rng = np.random.default_rng(3)
    rho_a = random_density_operator(SiteSpace.qubits(1), seed=1)
    rho_b = random_density_operator(SiteSpace.qubits(2), seed=2)
    joint = DensityOperator(SiteSpace.qubits(3), np.kron(rho_a.matrix, rho_b.matrix))
    part = RegionPartition(3, (0,))
    assert np.max(np.abs(partial_trace(joint, part, "a").matrix - rho_a.matrix)) < 1e-12
    assert np.max(np.abs(partial_trace(joint, part, "b").matrix - rho_b.matrix)) < 1e-12


def test_partial_trace_w_state():
    part = RegionPartition(3, (0,))
    reduced = partial_trace(w_state(3), part, "a")
    assert np.allclose(np.diag(reduced.matrix).real, [2.0 / 3.0, 1.0 / 3.0])
    assert np.max(np.abs(reduced.matrix - np.diag(np.diag(reduced.matrix)))) < 1e-14


def test_partial_trace_composition_law():
    # tracing down to {1} directly equals tracing to {1, 3} and then to {1}
    psi = random_pure_state(SiteSpace.qubits(4), seed=5)
    step1 = partial_trace(psi, RegionPartition(4, (1, 3)), "a")
    step2 = partial_trace(step1, RegionPartition(2, (0,)), "a")
    direct = partial_trace(psi, RegionPartition(4, (1,)), "a")
    assert np.max(np.abs(step2.matrix - direct.matrix)) < 1e-12


def test_partial_transpose_separable_stays_positive():
    rng = np.random.default_rng(11)
    part = RegionPartition(2, (0,))
    for _ in range(20):
        m = np.zeros((4, 4), dtype=complex)
        weights = rng.dirichlet(np.ones(4))
        for w in weights:
            a = random_pure_state(SiteSpace.qubits(1), seed=rng.integers(1 << 30))
            b = random_pure_state(SiteSpace.qubits(1), seed=rng.integers(1 << 30))
            v = np.kron(a.amplitudes, b.amplitudes)
            m += w * np.outer(v, v.conj())
        rho = DensityOperator(SiteSpace.qubits(2), m)
        assert np.linalg.eigvalsh(partial_transpose(rho, part)).min() > -1e-12


def test_partial_transpose_bell_eigenvalues():
    pt = partial_transpose(bell_state("phi+").to_density(), RegionPartition(2, (0,)))
    assert np.allclose(sorted(np.linalg.eigvalsh(pt)), [-0.5, 0.5, 0.5, 0.5])


def test_partial_transpose_involution_and_conservation():
    rng = np.random.default_rng(2)
    part = RegionPartition(3, (0, 2))
    for k in range(100):
        rho = random_density_operator(SiteSpace.qubits(3), seed=k)
        pt = partial_transpose(rho, part)
        # applying it twice is a pure index permutation, exactly undone
        again = partial_transpose(pt, part)
        assert np.array_equal(again, rho.matrix)
        assert np.max(np.abs(pt - pt.conj().T)) < 1e-12
        assert abs(np.trace(pt).real - 1.0) < 1e-12


def test_projective_measurement_on_plus():
    kraus = KrausSet.projective(SIGMA_Z)
    for label, expected_index in ((1.0, 1), (-1.0, 0)):
        out = apply_measurement(plus_state(1), kraus, forced_outcome=label)
        assert abs(out.probability - 0.5) < 1e-12
        assert abs(abs(out.post_state.amplitudes[expected_index]) - 1.0) < 1e-12


def test_distillation_kraus_probability():
    from entlab.protocols import distillation_kraus

    theta = math.pi / 7
    out = apply_measurement(theta_state(theta), distillation_kraus(theta), sites=(0,), forced_outcome=0)
    assert abs(out.probability - 2.0 * math.sin(theta) ** 2) < 1e-12


def test_identity_kraus_leaves_state():
    st = random_pure_state(SiteSpace.qubits(2), seed=9)
    out = apply_measurement(st, KrausSet((np.eye(4),)), rng_seed=0)
    assert out.probability == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(out.post_state.amplitudes - st.amplitudes)) < 1e-12


def test_zero_probability_branch_errors():
    kraus = KrausSet.projective(SIGMA_Z)
    zero = basis_state(SiteSpace.qubits(1), [0])
    with pytest.raises(ZeroProbabilityBranchError):
        apply_measurement(zero, kraus, forced_outcome=1.0)


def _random_kraus(d: int, k: int, seed: int) -> KrausSet:
    rng = np.random.default_rng(seed)
    blocks = rng.standard_normal((k, d, d)) + 1j * rng.standard_normal((k, d, d))
    total = sum(b.conj().T @ b for b in blocks)
    w, v = np.linalg.eigh(total)
    inv_sqrt = (v / np.sqrt(w)) @ v.conj().T
    return KrausSet(tuple(b @ inv_sqrt for b in blocks))


def test_random_kraus_probabilities_sum_and_posts_validate():
    for seed in range(10):
        kraus = _random_kraus(4, 3, seed)
        assert validate_kraus(kraus).passed
        rho = random_density_operator(SiteSpace.qubits(2), seed=seed + 100)
        total = 0.0
        for label in kraus.labels:
            out = apply_measurement(rho, kraus, forced_outcome=label)
            total += out.probability
            assert isinstance(out.post_state, DensityOperator)  # revalidates in constructor
        assert abs(total - 1.0) < 1e-10


def test_validate_kraus_reports_residual():
    half = KrausSet((0.5 * np.eye(2),))
    report = validate_kraus(half)
    assert not report.passed
    assert report.residual == pytest.approx(0.75, abs=1e-15)
    projectors = KrausSet.projective(SIGMA_X)
    assert validate_kraus(projectors).passed


def test_expectation_bell_correlations():
    phi = bell_state("phi+")
    rng = np.random.default_rng(4)
    for _ in range(10):
        a1, a2 = rng.standard_normal(2)
        n = (math.cos(a1), math.sin(a1))
        m = (math.cos(a2), math.sin(a2))
        obs = np.kron(pauli_direction(n), pauli_direction(m))
        dot = n[0] * m[0] + n[1] * m[1]
        assert expectation(phi, obs) == pytest.approx(dot, abs=1e-12)
        assert expectation(phi, pauli_direction(n), sites=(0,)) == pytest.approx(0.0, abs=1e-12)


def test_expectation_classical_correlated_state():
    m = 0.5 * np.diag([1.0, 0.0, 0.0, 1.0]).astype(complex)
    rho = DensityOperator(SiteSpace.qubits(2), m)
    assert expectation(rho, np.kron(SIGMA_Z, SIGMA_Z)) == pytest.approx(1.0, abs=1e-14)
    assert expectation(rho, SIGMA_Z, sites=(0,)) == pytest.approx(0.0, abs=1e-14)


def test_expectation_linear_and_real():
    rho = random_density_operator(SiteSpace.qubits(2), seed=8)
    rng = np.random.default_rng(8)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    a = a + a.conj().T
    b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    b = b + b.conj().T
    lhs = expectation(rho, 2.0 * a + 3.0 * b)
    rhs = 2.0 * expectation(rho, a) + 3.0 * expectation(rho, b)
    assert lhs == pytest.approx(rhs, abs=1e-10)
    raw = np.einsum("ij,ji->", rho.matrix, a)
    assert abs(raw.imag) < 1e-12


def test_expectation_rejects_non_hermitian():
    with pytest.raises(ValueError):
        expectation(plus_state(1), np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_state_serialization_roundtrip(tmp_path):
    st = random_pure_state(SiteSpace((2, 3)), seed=13)
    path = tmp_path / "state.txt"
    save_pure_state(path, st)
    loaded = load_pure_state(path)
    assert loaded.space.dims == (2, 3)
    assert np.array_equal(loaded.amplitudes, st.amplitudes)


def test_density_serialization_roundtrip(tmp_path):
    rho = random_density_operator(SiteSpace.qubits(2), seed=21)
    path = tmp_path / "rho.txt"
    save_density_operator(path, rho)
    loaded = load_density_operator(path)
    assert np.array_equal(loaded.matrix, rho.matrix)


def test_region_partition_boundaries():
    part = RegionPartition.chain(6, (2, 3), periodic=False)
    assert part.region_b == (0, 1, 4, 5)
    assert part.boundary_count == 2
    end = RegionPartition.chain(6, (0,), periodic=False)
    assert end.boundary_count == 1
    ring = RegionPartition.chain(6, (0,), periodic=True)
    assert ring.boundary_count == 1
    ring2 = RegionPartition.chain(6, (0, 1, 2), periodic=True)
    assert ring2.boundary_count == 2


def test_region_partition_validation():
    with pytest.raises(ValueError):
        RegionPartition(4, ())
    with pytest.raises(ValueError):
        RegionPartition(4, (0, 1, 2, 3))
    with pytest.raises(ValueError):
        RegionPartition(4, (4,))
    # a strict subset of a connected chain always has a border site
    for n in range(2, 7):
        for size in range(1, n):
            part = RegionPartition.chain(n, tuple(range(size)), periodic=True)
            assert part.boundary_count >= 1
