import math

import numpy as np
import pytest

from entlab.area_law import (
    block_entropy_scan,
    correlation_length,
    fit_linear_coefficient,
    fit_log_coefficient,
    mutual_info_area_check,
    purity_via_swap,
    renyi2_block,
    swap_matrix,
)
from entlab.measures import renyi_entropy, vn_entropy_bits
from entlab.models import build_model, dimer_state, gibbs_state, ground_pure_state
from entlab.states import (
    DensityOperator,
    RegionPartition,
    SiteSpace,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    bell_state,
    compose,
    ghz_state,
    plus_state,
    random_density_operator,
    random_pure_state,
    reduce_to_sites,
)


def test_dimer_blocks_bounded_by_two():
    psi = dimer_state(10, 0)
    records = block_entropy_scan(psi, range(1, 10), starts=range(10), periodic=True)
    assert max(r.value for r in records) <= 2.0 + 1e-9
    assert all(r.boundary_count in (1, 2) for r in records)


def test_dimer_block_alignment():
    psi = dimer_state(8, 0)
    aligned = block_entropy_scan(psi, [4], starts=[0], periodic=True)[0]
    shifted = block_entropy_scan(psi, [4], starts=[1], periodic=True)[0]
    assert aligned.value == pytest.approx(0.0, abs=1e-10)
    assert shifted.value == pytest.approx(2.0, abs=1e-10)


def test_critical_block_scaling_fit():
    psi = ground_pure_state(build_model("transverse-ising", 10, 1.0))
    records = block_entropy_scan(psi, range(1, 6), periodic=True)
    coeff = fit_log_coefficient(records)
    assert 0.08 <= coeff <= 0.30  # wider window than at 12 sites


def test_random_state_volume_law_contrast():
    psi = random_pure_state(SiteSpace.qubits(12), seed=1)
    records = block_entropy_scan(psi, range(1, 7), periodic=True)
    assert fit_linear_coefficient(records) > 0.5


def test_thermal_bound_all_partitions():
    h = build_model("transverse-ising", 6, 1.0)
    for t in (0.7, 2.0):
        records = mutual_info_area_check(h, t)
        assert all(r.passed for r in records)
        for r in records:
            assert r.mutual_info <= r.intermediate + 1e-9
            assert r.intermediate <= r.bound + 1e-9


def test_thermal_bound_scales_inversely_with_temperature():
    h = build_model("transverse-ising", 6, 1.0)
    region = [tuple(range(3))]
    b1 = mutual_info_area_check(h, 1.0, partitions=region)[0].bound
    b2 = mutual_info_area_check(h, 0.5, partitions=region)[0].bound
    assert b2 == pytest.approx(2.0 * b1, rel=1e-12)


def test_thermal_bound_bulk_terms_cancel():
    # terms supported inside A or inside B contribute nothing to the
    # energy difference between the Gibbs state and its marginal product
    from entlab.area_law import _marginal_energy
    from entlab.models import _reorder_term

    h = build_model("transverse-ising", 6, 0.9)
    rho = gibbs_state(h, 1.0)
    region = set(range(3))
    for sites, mat in h.terms:
        order = tuple(sorted(sites))
        inside = set(order) <= region or set(order).isdisjoint(region)
        if not inside:
            continue
        single = type(h)(h.space, ((sites, mat),), h.periodic)
        diff = _marginal_energy(single, rho, region) - single.energy(rho)
        assert abs(diff) < 1e-10


def test_thermal_bound_hot_limit():
    h = build_model("transverse-ising", 6, 1.0)
    records = mutual_info_area_check(h, 1e6, partitions=[tuple(range(3))])
    assert records[0].mutual_info < 1e-4
    assert records[0].mutual_info < records[0].bound


def test_correlation_length_product_state():
    psi = compose([plus_state(1)] * 8)
    report = correlation_length(psi, regions=[(0, 1)], separations=[0, 1, 2, 3])
    assert report.regions[0].xi == 1.0
    assert report.regions[0].flag == "no-correlations"
    assert all(i < 1e-12 for i in report.regions[0].infos)
    assert report.bound_checked and report.bound_passed


def test_correlation_length_gapped_chain():
    h = build_model("transverse-ising", 10, 2.0, "open")
    rho = gibbs_state(h, 0.5)
    report = correlation_length(rho, regions=[(0, 2), (1, 2)], separations=[0, 1, 2, 3, 4])
    assert math.isfinite(report.xi_info)
    assert report.bound_checked and report.bound_passed
    # the halving definition holds at the reported point by construction
    for region in report.regions:
        if math.isfinite(region.xi) and region.flag == "":
            half = region.infos[0] / 2.0
            later = [i for sep, i in zip(region.separations, region.infos) if sep >= region.xi]
            if later:
                assert min(later) <= half + 1e-9


def test_correlation_length_never_halving_flag():
    # GHZ correlations do not decay: xi is reported infinite and the
    # bound check is skipped
    psi = ghz_state(8)
    report = correlation_length(psi, regions=[(0, 1)], separations=[0, 1, 2, 3])
    assert math.isinf(report.xi_info)
    assert not report.bound_checked


def test_swap_identity_two_qubit_ladder_expression():
    t = swap_matrix(2)
    ladder = 0.5 * (
        np.eye(4)
        + np.kron(SIGMA_X, SIGMA_X)
        + np.kron(SIGMA_Y, SIGMA_Y)
        + np.kron(SIGMA_Z, SIGMA_Z)
    )
    assert np.array_equal(t, ladder)


def test_purity_via_swap_exact():
    psi = random_pure_state(SiteSpace.qubits(3), seed=2)
    assert purity_via_swap(psi) == pytest.approx(1.0, abs=1e-10)
    mixed = DensityOperator(SiteSpace.qubits(4), np.eye(16) / 16.0)
    assert purity_via_swap(mixed) == pytest.approx(2.0**-4, abs=1e-12)


def test_purity_via_swap_random_states():
    rng = np.random.default_rng(0)
    for k in range(100):
        n = int(rng.integers(1, 6))
        rho = random_density_operator(SiteSpace.qubits(n), seed=k)
        assert abs(purity_via_swap(rho) - rho.purity()) < 1e-10


def test_purity_via_swap_sampled_unbiased():
    rho = random_density_operator(SiteSpace.qubits(2), seed=5)
    exact = rho.purity()
    shots = 4000
    estimates = []
    for seed in range(50):
        est, _ = purity_via_swap(rho, mode="sampled", shots=shots, seed=seed)
        estimates.append(est)
    mean = float(np.mean(estimates))
    sigma_mean = float(np.std(estimates, ddof=1) / math.sqrt(len(estimates)))
    assert abs(mean - exact) < 4.0 * sigma_mean + 1e-6


def test_purity_via_swap_argument_errors():
    rho = random_density_operator(SiteSpace.qubits(2), seed=1)
    with pytest.raises(ValueError):
        purity_via_swap(rho, mode="sampled", shots=0, seed=1)
    with pytest.raises(ValueError):
        purity_via_swap(random_density_operator(SiteSpace((3,)), seed=1), mode="sampled", shots=10)


def test_renyi2_block_values():
    pair = bell_state("phi+")
    assert renyi2_block(pair, RegionPartition(2, (0,))) == pytest.approx(1.0, abs=1e-10)
    prod = compose([plus_state(1)] * 3)
    assert renyi2_block(prod, RegionPartition(3, (0, 1))) == pytest.approx(0.0, abs=1e-10)


def test_renyi2_half_chain_below_vn():
    psi = dimer_state(12, 1)
    part = RegionPartition.chain(12, tuple(range(6)), periodic=True)
    s2 = renyi2_block(psi, part)
    block = reduce_to_sites(psi, part.region_a)
    s1 = vn_entropy_bits(block)
    assert s2 <= s1 + 1e-9
    assert s2 == pytest.approx(renyi_entropy(block, 2.0), abs=1e-12)
