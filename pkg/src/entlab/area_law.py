"""Area-law checks: block-entropy scaling, the thermal mutual-information
bound, region-to-region correlation lengths, and swap-based purity.

The thermal bound compares I(A:B) on a Gibbs state against
N_border * (h/T) * log2(e), where h bounds the term trace norms, and
also reports the tighter intermediate quantity obtained from the free
energy of the product of marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, NumericalValidationError
from .measures import (
    LOG2E,
    entanglement_entropy,
    mutual_information,
    renyi_entropy,
    vn_entropy_bits,
)
from .models import LocalHamiltonian, _reorder_term, gibbs_state
from .states import (
    DensityOperator,
    PureState,
    RegionPartition,
    reduce_to_sites,
)


# ---------------------------------------------------------------------------
# Block-entropy scans


@dataclass(frozen=True)
class AreaScanRecord:
    start: int
    length: int
    boundary_count: int
    value: float
    tags: dict = field(default_factory=dict)


def _contiguous_block(n: int, start: int, length: int, periodic: bool) -> tuple[int, ...]:
    if periodic:
        return tuple(sorted((start + k) % n for k in range(length)))
    if start + length > n:
        raise ValueError("block exceeds the open chain")
    return tuple(range(start, start + length))


def block_entropy_scan(
    psi: PureState,
    lengths,
    starts=(0,),
    periodic: bool = True,
    tags: dict | None = None,
) -> list[AreaScanRecord]:
    """Entanglement entropy of contiguous blocks, one record per block."""
    n = psi.space.n_sites
    records = []
    for length in lengths:
        length = int(length)
        if not 1 <= length < n:
            raise ValueError(f"block length {length} must be in [1, {n - 1}]")
        for start in starts:
            block = _contiguous_block(n, int(start), length, periodic)
            part = RegionPartition.chain(n, block, periodic)
            value = entanglement_entropy(psi, part)
            records.append(
                AreaScanRecord(int(start), length, part.boundary_count, value, dict(tags or {}))
            )
    return records


def fit_log_coefficient(records) -> float:
    """Least-squares slope of entropy against log2(block length)."""
    xs = np.array([math.log2(r.length) for r in records])
    ys = np.array([r.value for r in records])
    if len(set(xs.tolist())) < 2:
        raise ValueError("need at least two distinct block lengths")
    coeff = np.polyfit(xs, ys, 1)
    return float(coeff[0])


def fit_linear_coefficient(records) -> float:
    """Least-squares slope of entropy against block length (volume-law probe)."""
    xs = np.array([r.length for r in records], dtype=float)
    ys = np.array([r.value for r in records])
    coeff = np.polyfit(xs, ys, 1)
    return float(coeff[0])


# ---------------------------------------------------------------------------
# Thermal mutual-information bound


@dataclass(frozen=True)
class AreaBoundRecord:
    region_a: tuple[int, ...]
    boundary_count: int
    mutual_info: float
    bound: float
    intermediate: float
    passed: bool


def _marginal_energy(h: LocalHamiltonian, rho: DensityOperator, region: set[int]) -> float:
    """<H> under rho_A x rho_B, term by term from marginals of rho."""
    total = 0.0
    for sites, mat in h.terms:
        order = tuple(sorted(sites))
        if order != sites:
            mat = _reorder_term(mat, sites, h.space.dims)
        in_a = [s for s in order if s in region]
        in_b = [s for s in order if s not in region]
        if not in_a or not in_b:
            sub = reduce_to_sites(rho, order).matrix
        else:
            # product of the two marginals, ordered (A sites, B sites)
            ma = reduce_to_sites(rho, tuple(in_a)).matrix
            mb = reduce_to_sites(rho, tuple(in_b)).matrix
            prod = np.kron(ma, mb)
            combined = in_a + in_b
            sub_dims = [h.space.dims[s] for s in combined]
            inv = list(np.argsort(combined))
            k = len(combined)
            d = int(np.prod(sub_dims, dtype=object))
            sub = prod.reshape(tuple(sub_dims) * 2).transpose(inv + [k + p for p in inv]).reshape(d, d)
        total += float(np.einsum("ij,ji->", sub, mat).real)
    return total


def mutual_info_area_check(
    h: LocalHamiltonian,
    temperature: float,
    partitions=None,
) -> list[AreaBoundRecord]:
    """I(A:B) on the Gibbs state against the border bound, per partition.

    ``partitions`` defaults to every contiguous region (all starts and
    lengths). Each record carries the bound N_border*(h/T)*log2(e) and
    the intermediate free-energy quantity
    (<H>_{rho_A x rho_B} - <H>_{rho_T}) * log2(e)/T.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    n = h.space.n_sites
    rho = gibbs_state(h, temperature)
    if partitions is None:
        partitions = []
        for length in range(1, n):
            for start in range(n if h.periodic else n - length + 1):
                block = _contiguous_block(n, start, length, h.periodic)
                partitions.append(block)
        partitions = sorted(set(partitions))
    records = []
    h_bound = h.term_bound
    for region in partitions:
        part = h.partition(region)
        info = mutual_information(rho, part)
        bound = part.boundary_count * (h_bound / temperature) * LOG2E
        inter = (_marginal_energy(h, rho, set(region)) - h.energy(rho)) * LOG2E / temperature
        records.append(
            AreaBoundRecord(
                part.region_a,
                part.boundary_count,
                info,
                bound,
                inter,
                info <= bound + 1e-9,
            )
        )
    return records


# ---------------------------------------------------------------------------
# Correlation length from mutual-information decay


@dataclass(frozen=True)
class RegionDecay:
    start: int
    width: int
    boundary_count: int
    separations: tuple[int, ...]
    infos: tuple[float, ...]
    xi: float  # halving separation, may be inf
    flag: str = ""


@dataclass(frozen=True)
class CorrelationLengthReport:
    regions: tuple[RegionDecay, ...]
    xi_info: float  # max over regions, may be inf
    bound_lhs: float
    bound_rhs: float
    bound_checked: bool
    bound_passed: bool


def _halving_separation(seps, infos) -> tuple[float, str]:
    i0 = infos[0]
    if i0 < 1e-14:
        return 1.0, "no-correlations"
    half = i0 / 2.0
    for k in range(1, len(seps)):
        if infos[k] <= half:
            prev_l, prev_i = seps[k - 1], infos[k - 1]
            if prev_i <= half:
                return max(float(prev_l), 1.0), ""
            frac = (prev_i - half) / (prev_i - infos[k])
            return max(prev_l + frac * (seps[k] - prev_l), 1.0), ""
    return math.inf, "never-halves"


def correlation_length(
    state: PureState | DensityOperator,
    regions,
    separations,
    periodic: bool = False,
) -> CorrelationLengthReport:
    """Mutual-information decay I_L(A:B) for window pairs on a chain.

    Each region is a (start, width) window A; B is an equal window
    separated by L sites. xi per region is the interpolated separation
    where I drops to half its L=0 value; the reported correlation length
    is the maximum. When finite, the area bound
    I_{L=0} <= 4 N_border xi log2(max local dim) is checked.
    """
    n = state.space.n_sites
    seps = sorted(int(s) for s in separations)
    if seps[0] != 0:
        raise ValueError("separations must start at 0")
    decays = []
    for start, width in regions:
        start, width = int(start), int(width)
        if start + 2 * width + seps[-1] > n:
            raise ValueError(
                f"region ({start}, {width}) with separation {seps[-1]} exceeds the chain"
            )
        infos = []
        for sep in seps:
            a = tuple(range(start, start + width))
            b = tuple(range(start + width + sep, start + 2 * width + sep))
            sub = reduce_to_sites(state, a + b)
            part = RegionPartition(2 * width, tuple(range(width)))
            infos.append(mutual_information(sub, part))
        part_full = RegionPartition.chain(n, tuple(range(start, start + width)), periodic=periodic)
        xi, flag = _halving_separation(seps, infos)
        decays.append(
            RegionDecay(start, width, part_full.boundary_count, tuple(seps), tuple(infos), xi, flag)
        )
    xi_info = max(d.xi for d in decays)
    lhs = max(d.infos[0] for d in decays)
    if math.isinf(xi_info):
        return CorrelationLengthReport(tuple(decays), xi_info, lhs, math.inf, False, False)
    log_d = math.log2(max(state.space.dims))
    worst = max(d.infos[0] - 4 * d.boundary_count * xi_info * log_d for d in decays)
    rhs = min(4 * d.boundary_count * xi_info * log_d for d in decays)
    return CorrelationLengthReport(tuple(decays), xi_info, lhs, rhs, True, worst <= 1e-9)


# ---------------------------------------------------------------------------
# Swap-operator purity and Renyi-2


def swap_matrix(d: int) -> np.ndarray:
    """The exchange operator sum |n,m><m,n| on two copies of one site."""
    t = np.zeros((d * d, d * d), dtype=complex)
    for n_ in range(d):
        for m_ in range(d):
            t[n_ * d + m_, m_ * d + n_] = 1.0
    return t


def _swap_total(dims) -> np.ndarray:
    """Tensor product of per-site swaps, ordered (copy 1 sites, copy 2 sites)."""
    n = len(dims)
    d = int(np.prod(dims, dtype=object))
    full = np.zeros((d * d, d * d))
    idx = np.arange(d * d)
    row, col = idx // d, idx % d
    full[idx, col * d + row] = 1.0
    return full


def purity_via_swap(
    state: PureState | DensityOperator,
    mode: str = "exact",
    shots: int | None = None,
    seed: int = 0,
):
    """tr[(rho x rho) T^xN] with T the per-site swap between the two copies.

    exact: evaluated by direct contraction; equals tr(rho^2).
    sampled: simulates per-site swap measurements on two copies (qubits
    only); outcomes are drawn from the exact joint +-1 distribution and
    multiplied per shot. Returns (estimate, std_error) in sampled mode.
    """
    rho = state.to_density() if isinstance(state, PureState) else state
    dims = rho.space.dims
    d = rho.space.total_dim
    if mode == "exact":
        if d <= 32:
            big = np.kron(rho.matrix, rho.matrix)
            return float(np.einsum("ij,ji->", big, _swap_total(dims)).real)
        return float(np.einsum("nm,mn->", rho.matrix, rho.matrix).real)
    if mode != "sampled":
        raise ValueError("mode must be 'exact' or 'sampled'")
    if shots is None or shots < 1:
        raise ValueError("sampled mode needs shots >= 1")
    if any(x != 2 for x in dims):
        raise ValueError("sampled mode supports qubit sites only")
    n = len(dims)
    if n > 5:
        raise CapacityError("sampled swap mode materializes two copies; at most 5 qubits")
    joint = _swap_outcome_distribution(rho.matrix, n)
    rng = np.random.default_rng(seed)
    draws = rng.choice(2**n, size=shots, p=joint)
    signs = 1.0 - 2.0 * (
        np.unpackbits(draws.astype(np.uint8)[:, None], axis=1, count=8)[:, -n:].sum(axis=1) % 2
    )
    estimate = float(signs.mean())
    std_error = float(signs.std(ddof=1) / math.sqrt(shots)) if shots > 1 else math.inf
    return estimate, std_error


_PAIR_SYM_BASIS = np.array(
    [
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0 / math.sqrt(2.0), 1.0 / math.sqrt(2.0), 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 1.0 / math.sqrt(2.0), -1.0 / math.sqrt(2.0), 0.0],
    ]
)  # rows: triplet (swap +1) then singlet (swap -1) for one qubit pair


def _swap_outcome_distribution(rho: np.ndarray, n: int) -> np.ndarray:
    """Joint distribution of per-site swap signs on rho x rho (qubits)."""
    d = rho.shape[0]
    omega = np.kron(rho, rho)
    # permute to pair-local ordering: (site1, site1', site2, site2', ...)
    order = [x for k in range(n) for x in (k, n + k)]
    t = omega.reshape((2,) * (4 * n))
    perm = order + [2 * n + x for x in order]
    omega = t.transpose(perm).reshape(d * d, d * d)
    u = _PAIR_SYM_BASIS
    for _ in range(n - 1):
        u = np.kron(u, _PAIR_SYM_BASIS)
    diag = np.einsum("ij,jk,ki->i", u, omega, u.conj().T).real
    diag = np.clip(diag, 0.0, None)
    # aggregate each pair's 4 basis states into (+, -) per site
    agg = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    table = diag.reshape((4,) * n)
    for axis in range(n):
        table = np.tensordot(table, agg, axes=(0, 0))
    joint = table.reshape(-1)
    total = joint.sum()
    if abs(total - 1.0) > 1e-8:
        raise NumericalValidationError(f"outcome distribution sums to {total!r}")
    return joint / total


def renyi2_block(state: PureState | DensityOperator, part: RegionPartition) -> float:
    """Renyi-2 entropy of the reduced block, cross-checked two ways.

    The spectrum route and the swap-contraction route must agree within
    1e-9; disagreement raises NumericalValidationError.
    """
    block = reduce_to_sites(state, part.region_a)
    s2_spectrum = renyi_entropy(block, 2.0)
    purity = purity_via_swap(block, mode="exact")
    s2_swap = -math.log2(purity)
    if abs(s2_spectrum - s2_swap) > 1e-9:
        raise NumericalValidationError(
            f"Renyi-2 routes disagree: {s2_spectrum} vs {s2_swap}"
        )
    return s2_spectrum


def volume_law_reference(psi: PureState, lengths, periodic: bool = True) -> float:
    """Fitted bits-per-site slope of the block entropies (contrast check)."""
    records = block_entropy_scan(psi, lengths, periodic=periodic)
    return fit_linear_coefficient(records)
