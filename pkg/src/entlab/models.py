"""Spin-chain Hamiltonians, exact diagonalization, Gibbs states,
phase-transition scan quantities, and a free-boson block entropy.

Hamiltonians are stored as lists of few-site Hermitian terms, so the
same object feeds dense or sparse assembly, thermal-state bounds (via
the largest term trace norm) and the variational solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import gammaln

from .errors import CapacityError
from .measures import LOG2E, entropy_bits, negativity, trace_norm, vn_entropy_bits
from .states import (
    DensityOperator,
    PureState,
    RegionPartition,
    SiteSpace,
    SIGMA_X,
    SIGMA_Z,
    reduce_to_sites,
)

DENSE_DIM_CAP = 2**14


def _heisenberg_coupling() -> np.ndarray:
    """S.S on two qubits with S = sigma/2."""
    from .states import SIGMA_Y

    coupling = np.zeros((4, 4), dtype=complex)
    for s in (SIGMA_X, SIGMA_Y, SIGMA_Z):
        coupling += 0.25 * np.kron(s, s)
    return coupling


@dataclass(frozen=True)
class LocalHamiltonian:
    """Sum of bounded few-site Hermitian terms on a chain."""

    space: SiteSpace
    terms: tuple[tuple[tuple[int, ...], np.ndarray], ...]
    periodic: bool = False

    def __post_init__(self):
        n = self.space.n_sites
        dims = self.space.dims
        cleaned = []
        for sites, mat in self.terms:
            sites = tuple(int(s) for s in sites)
            mat = np.asarray(mat, dtype=complex)
            if any(s < 0 or s >= n for s in sites):
                raise ValueError(f"term support {sites} outside the lattice")
            d = int(np.prod([dims[s] for s in sites], dtype=object))
            if mat.shape != (d, d):
                raise ValueError(f"term on {sites} has shape {mat.shape}, expected {(d, d)}")
            if np.max(np.abs(mat - mat.conj().T)) > 1e-10:
                raise ValueError(f"term on {sites} is not Hermitian within 1e-10")
            mat = mat.copy()
            mat.setflags(write=False)
            cleaned.append((sites, mat))
        object.__setattr__(self, "terms", tuple(cleaned))

    @property
    def term_bound(self) -> float:
        """h = max over terms of the trace norm."""
        return max(trace_norm(mat) for _, mat in self.terms)

    @property
    def adjacency(self) -> tuple[tuple[int, int], ...]:
        links = set()
        for sites, _ in self.terms:
            for i in range(len(sites)):
                for j in range(i + 1, len(sites)):
                    links.add(tuple(sorted((sites[i], sites[j]))))
        return tuple(sorted(links))

    def partition(self, region_a) -> RegionPartition:
        return RegionPartition(self.space.n_sites, tuple(region_a), self.adjacency)

    def to_sparse(self) -> sp.csr_matrix:
        dims = self.space.dims
        d = self.space.total_dim
        if d > DENSE_DIM_CAP:
            raise CapacityError(f"dimension {d} exceeds the assembly cap {DENSE_DIM_CAP}")
        h = sp.csr_matrix((d, d), dtype=complex)
        for sites, mat in self.terms:
            h = h + _embed_sparse(mat, sites, dims)
        return h

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def energy(self, state: PureState | DensityOperator) -> float:
        """<H> evaluated term by term through reduced operators."""
        total = 0.0
        for sites, mat in self.terms:
            order = tuple(sorted(sites))
            if order != sites:
                mat = _reorder_term(mat, sites, self.space.dims)
            sub = reduce_to_sites(state, order)
            total += float(np.einsum("ij,ji->", sub.matrix, mat).real)
        return total


def _reorder_term(mat: np.ndarray, sites: tuple[int, ...], dims) -> np.ndarray:
    sub_dims = [dims[s] for s in sites]
    k = len(sites)
    perm = list(np.argsort(sites))
    t = mat.reshape(tuple(sub_dims) * 2).transpose(perm + [k + p for p in perm])
    d = int(np.prod(sub_dims, dtype=object))
    return t.reshape(d, d)


def _embed_sparse(op: np.ndarray, sites, dims) -> sp.csr_matrix:
    n = len(dims)
    sites = list(sites)
    rest = [s for s in range(n) if s not in set(sites)]
    d_rest = int(np.prod([dims[s] for s in rest], dtype=object)) if rest else 1
    k = sp.kron(sp.csr_matrix(op), sp.identity(d_rest, format="csr"), format="csr")
    order = sites + rest
    # per-basis-state map: full lexicographic index -> (sites..., rest...) index
    digits = np.array(np.unravel_index(np.arange(int(np.prod(dims, dtype=object))), dims))
    sub_dims = [dims[s] for s in order]
    perm = np.ravel_multi_index([digits[s] for s in order], sub_dims)
    return k[perm][:, perm].tocsr()


def build_model(kind: str, n_sites: int, b: float = 0.0, boundary: str = "periodic") -> LocalHamiltonian:
    """Assemble one of the bundled chain models.

    transverse-ising: -sum sigma_z sigma_z - B sum sigma_x, with the field
    split onto the bond terms so the Hamiltonian is a pure sum of
    nearest-neighbor terms.
    heisenberg: sum S.S - B sum S_z, field split the same way.
    majumdar-ghosh: sum (S.S nearest + 1/2 S.S next-nearest); N even.
    """
    if boundary not in ("periodic", "open"):
        raise ValueError("boundary must be 'periodic' or 'open'")
    n = int(n_sites)
    if n < 2:
        raise ValueError("need at least two sites")
    periodic = boundary == "periodic"
    space = SiteSpace.qubits(n)
    eye = np.eye(2, dtype=complex)
    terms: list[tuple[tuple[int, ...], np.ndarray]] = []

    def bond_weights(i: int, j: int) -> tuple[float, float]:
        # share of a single-site field assigned to this bond per endpoint
        def w(site: int) -> float:
            if periodic:
                return 0.5
            inner = 0 < site < n - 1
            return 0.5 if inner else 1.0

        return w(i), w(j)

    bonds = [(i, i + 1) for i in range(n - 1)]
    if periodic:
        bonds.append((n - 1, 0))

    if kind == "transverse-ising":
        for i, j in bonds:
            wi, wj = bond_weights(i, j)
            mat = -np.kron(SIGMA_Z, SIGMA_Z) - b * (wi * np.kron(SIGMA_X, eye) + wj * np.kron(eye, SIGMA_X))
            terms.append(((i, j), mat))
    elif kind == "heisenberg":
        coupling = _heisenberg_coupling()
        sz_half = 0.5 * SIGMA_Z
        for i, j in bonds:
            wi, wj = bond_weights(i, j)
            mat = coupling - b * (wi * np.kron(sz_half, eye) + wj * np.kron(eye, sz_half))
            terms.append(((i, j), mat))
    elif kind == "majumdar-ghosh":
        if n % 2:
            raise ValueError("the dimerized model needs an even number of sites")
        coupling = _heisenberg_coupling()
        for i, j in bonds:
            terms.append(((i, j), coupling))
        nnn = [(i, i + 2) for i in range(n - 2)]
        if periodic:
            nnn += [(n - 2, 0), (n - 1, 1)]
        for i, j in nnn:
            terms.append((tuple(sorted((i, j))), 0.5 * coupling))
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return LocalHamiltonian(space, tuple(terms), periodic)


def dimer_state(n_sites: int, covering: int = 0) -> PureState:
    """Product of singlets on pairs (2k, 2k+1) (covering 0) or the cyclic
    shift pairing (2k+1, 2k+2) with a wrap pair (covering 1).

    Both are exact ground states of the periodic dimerized model.
    """
    n = int(n_sites)
    if n % 2 or n < 4:
        raise ValueError("dimer states need an even number of sites (>= 4)")
    singlet = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / math.sqrt(2.0)
    vec = np.array([1.0], dtype=complex)
    for _ in range(n // 2):
        vec = np.kron(vec, singlet)
    if covering == 1:
        # shift every site label up by one (site i takes what i-1 held)
        perm = tuple(range(1, n)) + (0,)
        vec = vec.reshape((2,) * n).transpose(perm).reshape(-1)
    elif covering != 0:
        raise ValueError("covering must be 0 or 1")
    return PureState(SiteSpace.qubits(n), vec)


# ---------------------------------------------------------------------------
# Spectra, ground states, Gibbs states


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray  # ascending; may be a partial low-energy window
    ground_energy: float
    ground_dim: int
    ground_vectors: np.ndarray  # columns
    complete: bool

    @property
    def gap(self) -> float:
        """Energy distance from the ground space to the next level."""
        above = self.eigenvalues[self.ground_dim :]
        return float(above[0] - self.ground_energy) if above.size else math.inf


_DENSE_EIG_DIM = 512
_DEGENERACY_TOL = 1e-9


def ground_state(h: LocalHamiltonian, k: int = 8) -> SpectrumResult:
    """Low end of the spectrum with the ground space fully resolved.

    Small problems are solved densely (full spectrum); larger ones use a
    sparse Lanczos solve with a fixed starting vector, enlarging k until
    the ground cluster is strictly inside the computed window.
    """
    d = h.space.total_dim
    if d > DENSE_DIM_CAP:
        raise CapacityError(f"dimension {d} exceeds the cap {DENSE_DIM_CAP}")
    if d <= _DENSE_EIG_DIM:
        w, v = np.linalg.eigh(h.to_dense())
        complete = True
    else:
        mat = h.to_sparse()
        v0 = np.random.default_rng(1234).standard_normal(d)
        k_eff = min(max(k, 4), d - 2)
        while True:
            w, v = spla.eigsh(mat, k=k_eff, which="SA", v0=v0)
            order = np.argsort(w)
            w, v = w[order], v[:, order]
            cluster = int(np.sum(w <= w[0] + _DEGENERACY_TOL))
            if cluster < k_eff or k_eff >= d - 2:
                break
            k_eff = min(2 * k_eff, d - 2)
        complete = False
    g = int(np.sum(w <= w[0] + _DEGENERACY_TOL))
    return SpectrumResult(w, float(w[0]), g, v[:, :g], complete)


def ground_pure_state(h: LocalHamiltonian) -> PureState:
    res = ground_state(h)
    if res.ground_dim != 1:
        raise ValueError(f"ground space is {res.ground_dim}-fold degenerate")
    return PureState.from_vector(h.space, res.ground_vectors[:, 0], normalize=True)


def gibbs_state(h: LocalHamiltonian, temperature: float) -> DensityOperator:
    """exp(-H/T)/Z via eigendecomposition with a max-shift for safety."""
    if temperature <= 0:
        raise ValueError("temperature must be positive; use ground_state at T = 0")
    w, v = np.linalg.eigh(h.to_dense())
    x = np.exp(-(w - w.min()) / temperature)
    x /= x.sum()
    rho = (v * x) @ v.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityOperator(h.space, rho)


def free_energy(h: LocalHamiltonian, rho: DensityOperator, temperature: float) -> float:
    """<H> - T S(rho) with the entropy converted to nats."""
    return h.energy(rho) - temperature * vn_entropy_bits(rho) / LOG2E


# ---------------------------------------------------------------------------
# Phase-transition scans


@dataclass(frozen=True)
class OverlapPoint:
    b: float
    overlap: float
    degenerate: bool


def overlap_scan(
    kind: str,
    n_sites: int,
    b_grid,
    epsilon: float = 1e-3,
    boundary: str = "periodic",
) -> list[OverlapPoint]:
    """|<psi(B + eps)|psi(B)>| along the grid; degenerate points are flagged."""
    points = []
    for b in b_grid:
        res_0 = ground_state(build_model(kind, n_sites, float(b), boundary))
        res_1 = ground_state(build_model(kind, n_sites, float(b) + epsilon, boundary))
        if res_0.ground_dim != 1 or res_1.ground_dim != 1:
            points.append(OverlapPoint(float(b), math.nan, True))
            continue
        f = abs(np.vdot(res_1.ground_vectors[:, 0], res_0.ground_vectors[:, 0]))
        points.append(OverlapPoint(float(b), float(f), False))
    return points


def _parity_even_ground_vector(h: LocalHamiltonian, res: SpectrumResult) -> np.ndarray:
    """Deterministic ground vector; degenerate spaces resolve to the
    eigenvector of the global spin-flip with the largest eigenvalue."""
    if res.ground_dim == 1:
        return res.ground_vectors[:, 0]
    dims = h.space.dims
    basis = res.ground_vectors
    flip = basis.reshape(dims + (basis.shape[1],))
    for axis in range(len(dims)):
        flip = np.flip(flip, axis=axis)
    flip = flip.reshape(basis.shape)
    block = basis.conj().T @ flip
    w, u = np.linalg.eigh(0.5 * (block + block.conj().T))
    return basis @ u[:, -1]


@dataclass(frozen=True)
class PairEntanglementPoint:
    b: float
    value: float
    derivative: float


def two_site_entanglement_scan(
    kind: str,
    n_sites: int,
    b_grid,
    pair: tuple[int, int] = (0, 1),
    boundary: str = "periodic",
) -> list[PairEntanglementPoint]:
    """Negativity of the reduced pair along the grid, with a central
    difference estimate of its derivative."""
    pair = tuple(sorted(int(p) for p in pair))
    values = []
    grid = [float(b) for b in b_grid]
    for b in grid:
        h = build_model(kind, n_sites, b, boundary)
        res = ground_state(h)
        vec = _parity_even_ground_vector(h, res)
        psi = PureState.from_vector(h.space, vec, normalize=True)
        sub = reduce_to_sites(psi, pair)
        part = RegionPartition(2, (0,))
        values.append(negativity(sub, part))
    points = []
    for i, b in enumerate(grid):
        lo = max(i - 1, 0)
        hi = min(i + 1, len(grid) - 1)
        dv = (values[hi] - values[lo]) / (grid[hi] - grid[lo]) if hi > lo else 0.0
        points.append(PairEntanglementPoint(b, values[i], float(dv)))
    return points


# ---------------------------------------------------------------------------
# Free bosons on a ring, split into a block of L of R sites


@dataclass(frozen=True)
class FreeBosonSpec:
    n_particles: int
    n_sites: int
    block: int

    def __post_init__(self):
        if min(self.n_particles, self.n_sites, self.block) < 1:
            raise ValueError("all free-boson parameters must be positive")
        if self.block >= self.n_sites:
            raise ValueError("block length must be smaller than the ring")

    @property
    def mean_occupation(self) -> float:
        return self.n_particles * self.block / self.n_sites

    @property
    def occupation_variance(self) -> float:
        n, r, l = self.n_particles, self.n_sites, self.block
        return n * l * (r - l) / r**2


GAUSSIAN_ENTROPY_CONST = 0.5 * math.log2(2.0 * math.pi * math.e)


def free_boson_block_entropy(spec: FreeBosonSpec, mode: str = "exact") -> float:
    """Mode entanglement of the block, in bits.

    exact: entropy of the binomial occupation distribution, evaluated in
    log space so particle numbers up to ~1e6 stay finite.
    gaussian: log2(sigma) + log2(2 pi e)/2 with the binomial variance.
    """
    if mode == "gaussian":
        return 0.5 * math.log2(spec.occupation_variance) + GAUSSIAN_ENTROPY_CONST
    if mode != "exact":
        raise ValueError("mode must be 'exact' or 'gaussian'")
    n, r, l = spec.n_particles, spec.n_sites, spec.block
    if n > 10**6:
        raise CapacityError("exact mode supports at most 1e6 particles")
    ks = np.arange(n + 1)
    log_p = (
        gammaln(n + 1.0)
        - gammaln(ks + 1.0)
        - gammaln(n - ks + 1.0)
        + ks * math.log(l / r)
        + (n - ks) * math.log((r - l) / r)
    )
    return entropy_bits(np.exp(log_p))
