"""Dense states on a finite lattice of qudits.

Pure states and density operators carry an explicit :class:`SiteSpace`
listing the local dimension of every site. The computational basis is
ordered lexicographically with site 0 as the slowest index, so a state
vector reshaped to ``space.dims`` exposes one tensor axis per site.
Partial trace, partial transposition and observable embedding all rely
on this ordering.

Pauli matrices follow the convention ``sigma_z = |1><1| - |0><0|``
(so ``|0>`` is the -1 eigenstate of ``sigma_z``), and
``sigma_y = i(|0><1| - |1><0|)``. All operations here are pure
functions of their inputs; arrays are frozen after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ZeroProbabilityBranchError

DEFAULT_DIM_CAP = 2**20

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, 1.0j], [-1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[-1.0, 0.0], [0.0, 1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

_NORM_TOL = 1e-12
_HERM_TOL = 1e-12
_EIG_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def pauli_direction(direction) -> np.ndarray:
    """Pauli operator along a unit vector (n_x, n_z) in the xz-plane."""
    nx, nz = float(direction[0]), float(direction[1])
    if abs(math.hypot(nx, nz) - 1.0) > 1e-10:
        raise ValueError(f"direction {direction!r} is not a unit vector")
    return nx * SIGMA_X + nz * SIGMA_Z


@dataclass(frozen=True)
class SiteSpace:
    """Ordered list of local dimensions for a lattice of qudits."""

    dims: tuple[int, ...]
    cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims:
            raise ValueError("a SiteSpace needs at least one site")
        if any(d < 2 for d in dims):
            raise ValueError("every local dimension must be >= 2")
        total = 1
        for d in dims:
            total *= d
            if total > self.cap:
                raise CapacityError(
                    f"total dimension exceeds cap {self.cap} for dims {dims}"
                )

    @classmethod
    def qubits(cls, n: int, cap: int = DEFAULT_DIM_CAP) -> "SiteSpace":
        return cls((2,) * int(n), cap)

    @property
    def n_sites(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=object))


@dataclass(frozen=True)
class PureState:
    """Normalized complex amplitude vector over the product basis."""

    space: SiteSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if vec.size != self.space.total_dim:
            raise ValueError(
                f"amplitude length {vec.size} does not match space dimension "
                f"{self.space.total_dim}"
            )
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"state norm {norm!r} is not 1 within {_NORM_TOL}")
        object.__setattr__(self, "amplitudes", _frozen(vec))

    @classmethod
    def from_vector(cls, space: SiteSpace, vec, normalize: bool = False) -> "PureState":
        vec = np.asarray(vec, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(vec)
            if norm < 1e-150:
                raise ValueError("cannot normalize a zero vector")
            vec = vec / norm
        return cls(space, vec)

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.dims)

    def to_density(self) -> "DensityOperator":
        v = self.amplitudes
        return DensityOperator(self.space, np.outer(v, v.conj()))


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix on a SiteSpace."""

    space: SiteSpace
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match dimension {d}")
        if np.max(np.abs(m - m.conj().T)) > _HERM_TOL:
            raise ValueError("matrix is not Hermitian within 1e-12")
        tr = np.trace(m).real
        if abs(tr - 1.0) > _NORM_TOL:
            raise ValueError(f"trace {tr!r} is not 1 within {_NORM_TOL}")
        _check_positive(m)
        object.__setattr__(self, "matrix", _frozen(m))

    def as_tensor(self) -> np.ndarray:
        return self.matrix.reshape(self.space.dims + self.space.dims)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.matrix, self.matrix).real)


def _check_positive(m: np.ndarray) -> None:
    # Full spectrum for small matrices; a shifted Cholesky probe is much
    # cheaper for large ones and certifies eigenvalues >= -1e-10.
    if m.shape[0] <= 1024:
        w = np.linalg.eigvalsh(m)
        if w[0] < -_EIG_TOL:
            raise ValueError(f"matrix has negative eigenvalue {w[0]}")
    else:
        shifted = m + (_EIG_TOL * 1.0001) * np.eye(m.shape[0])
        try:
            np.linalg.cholesky(shifted)
        except np.linalg.LinAlgError:
            raise ValueError("matrix is not positive semidefinite within 1e-10")


@dataclass(frozen=True)
class RegionPartition:
    """A region A, its complement B, and the border site count of A.

    ``adjacency`` lists the lattice links as (i, j) pairs; it defaults to
    an open chain. The boundary count is the number of sites in A that
    have a neighbor in B.
    """

    n_sites: int
    region_a: tuple[int, ...]
    adjacency: tuple[tuple[int, int], ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        n = int(self.n_sites)
        region = tuple(sorted(int(s) for s in self.region_a))
        if len(set(region)) != len(region):
            raise ValueError("region_a has repeated sites")
        if not region:
            raise ValueError("region_a must be nonempty")
        if any(s < 0 or s >= n for s in region):
            raise ValueError("region_a has sites outside the lattice")
        if len(region) == n:
            raise ValueError("region_a must be a strict subset")
        adj = self.adjacency
        if adj is None:
            adj = tuple((i, i + 1) for i in range(n - 1))
        adj = tuple(tuple(sorted((int(i), int(j)))) for i, j in adj)
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "region_a", region)
        object.__setattr__(self, "adjacency", adj)

    @classmethod
    def chain(cls, n_sites: int, region_a, periodic: bool = False) -> "RegionPartition":
        links = [(i, i + 1) for i in range(n_sites - 1)]
        if periodic and n_sites > 2:
            links.append((0, n_sites - 1))
        return cls(n_sites, tuple(region_a), tuple(links))

    @property
    def region_b(self) -> tuple[int, ...]:
        a = set(self.region_a)
        return tuple(s for s in range(self.n_sites) if s not in a)

    @property
    def boundary_count(self) -> int:
        a = set(self.region_a)
        border = set()
        for i, j in self.adjacency:
            if (i in a) != (j in a):
                border.add(i if i in a else j)
        return len(border)


# ---------------------------------------------------------------------------
# Common states


def basis_state(space: SiteSpace, occupations) -> PureState:
    occ = tuple(int(o) for o in occupations)
    idx = int(np.ravel_multi_index(occ, space.dims))
    vec = np.zeros(space.total_dim, dtype=complex)
    vec[idx] = 1.0
    return PureState(space, vec)


def bell_state(kind: str = "phi+") -> PureState:
    space = SiteSpace.qubits(2)
    s = 1.0 / math.sqrt(2.0)
    table = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    if kind not in table:
        raise ValueError(f"unknown Bell state {kind!r}")
    return PureState(space, np.array(table[kind], dtype=complex))


def theta_state(theta: float) -> PureState:
    """cos(theta)|0,0> + sin(theta)|1,1> on two qubits."""
    vec = np.zeros(4, dtype=complex)
    vec[0] = math.cos(theta)
    vec[3] = math.sin(theta)
    return PureState(SiteSpace.qubits(2), vec)


def ghz_state(n: int) -> PureState:
    space = SiteSpace.qubits(n)
    vec = np.zeros(space.total_dim, dtype=complex)
    vec[0] = vec[-1] = 1.0 / math.sqrt(2.0)
    return PureState(space, vec)


def w_state(n: int = 3) -> PureState:
    space = SiteSpace.qubits(n)
    vec = np.zeros(space.total_dim, dtype=complex)
    for k in range(n):
        vec[2 ** (n - 1 - k)] = 1.0 / math.sqrt(n)
    return PureState(space, vec)


def plus_state(n: int = 1) -> PureState:
    space = SiteSpace.qubits(n)
    vec = np.full(space.total_dim, 2.0 ** (-n / 2.0), dtype=complex)
    return PureState(space, vec)


def random_pure_state(space: SiteSpace, seed: int = 0) -> PureState:
    rng = np.random.default_rng(seed)
    d = space.total_dim
    vec = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return PureState.from_vector(space, vec, normalize=True)


def random_density_operator(space: SiteSpace, seed: int = 0, rank: int | None = None) -> DensityOperator:
    """Hilbert-Schmidt random density operator (rho = GG^dag / tr)."""
    rng = np.random.default_rng(seed)
    d = space.total_dim
    k = d if rank is None else int(rank)
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    m = g @ g.conj().T
    return DensityOperator(space, m / np.trace(m).real)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via phase-fixed QR."""
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


# ---------------------------------------------------------------------------
# Composition, reduction, transposition


def compose(states, cap: int = DEFAULT_DIM_CAP) -> PureState:
    """Tensor product of pure states, in site order."""
    states = list(states)
    if not states:
        raise ValueError("compose needs at least one state")
    dims: tuple[int, ...] = ()
    for s in states:
        dims = dims + s.space.dims
    space = SiteSpace(dims, cap)  # raises CapacityError beyond the cap
    vec = states[0].amplitudes
    for s in states[1:]:
        vec = np.kron(vec, s.amplitudes)
    return PureState(space, vec)


def _reduced_matrix(state: PureState | DensityOperator, sites: tuple[int, ...]) -> np.ndarray:
    dims = state.space.dims
    n = len(dims)
    keep = list(sites)
    rest = [s for s in range(n) if s not in set(keep)]
    dk = int(np.prod([dims[s] for s in keep], dtype=object)) if keep else 1
    dr = int(np.prod([dims[s] for s in rest], dtype=object)) if rest else 1
    if isinstance(state, PureState):
        t = state.as_tensor().transpose(keep + rest).reshape(dk, dr)
        return t @ t.conj().T
    t = state.as_tensor()
    perm = keep + rest + [n + s for s in keep] + [n + s for s in rest]
    t = t.transpose(perm).reshape(dk, dr, dk, dr)
    return np.einsum("irjr->ij", t)


def reduce_to_sites(state: PureState | DensityOperator, sites) -> DensityOperator:
    """Reduced density operator on the given sites (ascending order)."""
    sites = tuple(int(s) for s in sites)
    if sites != tuple(sorted(set(sites))):
        raise ValueError("sites must be strictly ascending")
    dims = state.space.dims
    sub = SiteSpace(tuple(dims[s] for s in sites), cap=state.space.cap)
    return DensityOperator(sub, _reduced_matrix(state, sites))


def partial_trace(state: PureState | DensityOperator, part: RegionPartition, keep: str = "a") -> DensityOperator:
    """Trace out everything except region A (keep='a') or region B."""
    if part.n_sites != state.space.n_sites:
        raise ValueError("partition does not match the state's site count")
    if keep not in ("a", "b"):
        raise ValueError("keep must be 'a' or 'b'")
    sites = part.region_a if keep == "a" else part.region_b
    return reduce_to_sites(state, sites)


def partial_transpose(rho: DensityOperator | np.ndarray, part: RegionPartition) -> np.ndarray:
    """Matrix with the region-A indices transposed; positivity not implied.

    Accepts a raw matrix as well, so the map can be applied to its own
    (possibly non-positive) output.
    """
    if isinstance(rho, DensityOperator):
        if part.n_sites != rho.space.n_sites:
            raise ValueError("partition does not match the state's site count")
        dims = rho.space.dims
        mat = rho.matrix
    else:
        mat = np.asarray(rho, dtype=complex)
        dims = None
    if dims is None:
        # infer a qubit layout when handed a bare matrix of a 2^n space
        n_ = part.n_sites
        if mat.shape[0] != 2**n_:
            raise ValueError("bare matrices are supported for qubit lattices only")
        dims = (2,) * n_
    n = len(dims)
    t = mat.reshape(dims + dims)
    perm = list(range(2 * n))
    for s in part.region_a:
        perm[s], perm[n + s] = perm[n + s], perm[s]
    d = mat.shape[0]
    return t.transpose(perm).reshape(d, d)


# ---------------------------------------------------------------------------
# Observables


def _require_hermitian(obs: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    obs = np.asarray(obs, dtype=complex)
    if obs.ndim != 2 or obs.shape[0] != obs.shape[1]:
        raise ValueError("observable must be a square matrix")
    if np.max(np.abs(obs - obs.conj().T)) > tol:
        raise ValueError("observable is not Hermitian within 1e-10")
    return obs


def expectation(state: PureState | DensityOperator, observable, sites=None) -> float:
    """<O> with the observable embedded as identity outside ``sites``."""
    obs = _require_hermitian(observable)
    if sites is None:
        d = state.space.total_dim
        if obs.shape[0] != d:
            raise ValueError("observable dimension does not match the state")
        if isinstance(state, PureState):
            v = state.amplitudes
            return float(np.vdot(v, obs @ v).real)
        return float(np.einsum("ij,ji->", state.matrix, obs).real)
    sites = tuple(int(s) for s in sites)
    sub = reduce_to_sites(state, sites)
    if obs.shape[0] != sub.space.total_dim:
        raise ValueError("observable dimension does not match the named sites")
    return float(np.einsum("ij,ji->", sub.matrix, obs).real)


def embed_operator(op: np.ndarray, sites, dims) -> np.ndarray:
    """Dense embedding of an operator acting on a site subset."""
    dims = tuple(int(d) for d in dims)
    sites = [int(s) for s in sites]
    n = len(dims)
    rest = [s for s in range(n) if s not in set(sites)]
    d_rest = int(np.prod([dims[s] for s in rest], dtype=object)) if rest else 1
    full = np.kron(np.asarray(op, dtype=complex), np.eye(d_rest))
    order = sites + rest
    sub_dims = [dims[s] for s in order]
    t = full.reshape(tuple(sub_dims) * 2)
    inv = np.argsort(order)
    perm = list(inv) + [n + p for p in inv]
    d = int(np.prod(dims, dtype=object))
    return t.transpose(perm).reshape(d, d)


# ---------------------------------------------------------------------------
# Generalized measurements


@dataclass(frozen=True)
class KrausSet:
    """Operators of a generalized measurement, one per outcome.

    Completeness (sum of A^dag A = identity) is checked where the set is
    consumed, so that incomplete candidates can still be inspected with
    :func:`validate_kraus`.
    """

    operators: tuple[np.ndarray, ...]
    labels: tuple = ()

    def __post_init__(self):
        ops = tuple(_frozen(np.asarray(a, dtype=complex)) for a in self.operators)
        if not ops:
            raise ValueError("a KrausSet needs at least one operator")
        shape = ops[0].shape
        if len(shape) != 2:
            raise ValueError("Kraus operators must be matrices")
        if any(a.shape != shape for a in ops):
            raise ValueError("Kraus operators must share one shape")
        labels = self.labels or tuple(range(len(ops)))
        if len(labels) != len(ops):
            raise ValueError("labels must match the number of operators")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "labels", tuple(labels))

    @classmethod
    def projective(cls, observable: np.ndarray, tol: float = 1e-10) -> "KrausSet":
        """Eigenprojectors of a Hermitian observable, labeled by eigenvalue."""
        obs = _require_hermitian(observable, tol)
        w, v = np.linalg.eigh(obs)
        groups: list[tuple[float, np.ndarray]] = []
        for val, vec in zip(w, v.T):
            proj = np.outer(vec, vec.conj())
            if groups and abs(groups[-1][0] - val) < tol:
                groups[-1] = (groups[-1][0], groups[-1][1] + proj)
            else:
                groups.append((float(val), proj))
        return cls(tuple(p for _, p in groups), tuple(val for val, _ in groups))


@dataclass(frozen=True)
class KrausValidation:
    passed: bool
    residual: float


def validate_kraus(kraus: KrausSet) -> KrausValidation:
    """Report the largest entry of |sum A^dag A - 1| and pass iff <= 1e-10."""
    d_in = kraus.operators[0].shape[1]
    total = sum(a.conj().T @ a for a in kraus.operators)
    residual = float(np.max(np.abs(total - np.eye(d_in))))
    return KrausValidation(residual <= 1e-10, residual)


@dataclass(frozen=True)
class MeasurementOutcome:
    label: object
    probability: float
    post_state: PureState | DensityOperator


def _apply_sites_vec(vec_t: np.ndarray, op: np.ndarray, sites, dims) -> np.ndarray:
    sub_dims = tuple(dims[s] for s in sites)
    op_t = op.reshape(sub_dims + sub_dims)
    k = len(sites)
    out = np.tensordot(op_t, vec_t, axes=(tuple(range(k, 2 * k)), tuple(sites)))
    return np.moveaxis(out, tuple(range(k)), tuple(sites))


def _branch(state, op: np.ndarray, sites, dims):
    """Apply one Kraus operator; return (probability, unnormalized result)."""
    if isinstance(state, PureState):
        if sites is None:
            out = op @ state.amplitudes
        else:
            out = _apply_sites_vec(state.as_tensor(), op, sites, dims).reshape(-1)
        p = float(np.linalg.norm(out) ** 2)
        return p, out
    if sites is None:
        m = op @ state.matrix @ op.conj().T
    else:
        n = len(dims)
        t = _apply_sites_vec(state.as_tensor(), op, sites, dims)
        t = _apply_sites_vec(t, op.conj(), [n + s for s in sites], dims + dims)
        d = state.space.total_dim
        m = t.reshape(d, d)
    return float(np.trace(m).real), m


def apply_measurement(
    state: PureState | DensityOperator,
    kraus: KrausSet,
    sites=None,
    rng_seed: int | None = None,
    forced_outcome=None,
) -> MeasurementOutcome:
    """Perform a generalized measurement, sampling or forcing one branch.

    ``sites`` embeds square Kraus operators on a site subset (identity
    elsewhere); with ``sites=None`` the operators act on the full space.
    Exactly one of ``rng_seed`` / ``forced_outcome`` selects the branch.
    """
    check = validate_kraus(kraus)
    if not check.passed:
        raise ValueError(f"Kraus set incomplete, residual {check.residual:.3e}")
    dims = state.space.dims
    shape = kraus.operators[0].shape
    if sites is not None:
        sites = tuple(int(s) for s in sites)
        d_sub = int(np.prod([dims[s] for s in sites], dtype=object))
        if shape != (d_sub, d_sub):
            raise ValueError("site-embedded Kraus operators must be square on the subset")
    else:
        if shape[1] != state.space.total_dim:
            raise ValueError("Kraus input dimension does not match the state")
    if (rng_seed is None) == (forced_outcome is None):
        raise ValueError("provide exactly one of rng_seed or forced_outcome")

    branches = [_branch(state, a, sites, dims) for a in kraus.operators]
    probs = np.array([max(p, 0.0) for p, _ in branches])
    if abs(probs.sum() - 1.0) > 1e-10:
        raise ValueError(f"branch probabilities sum to {probs.sum()!r}, not 1")

    if forced_outcome is not None:
        try:
            idx = kraus.labels.index(forced_outcome)
        except ValueError:
            raise ValueError(f"unknown outcome label {forced_outcome!r}")
    else:
        rng = np.random.default_rng(rng_seed)
        idx = int(rng.choice(len(probs), p=probs / probs.sum()))

    p, raw = branches[idx]
    if p < 1e-14:
        raise ZeroProbabilityBranchError(
            f"outcome {kraus.labels[idx]!r} has probability {p:.3e}"
        )
    if isinstance(state, PureState):
        if sites is None and shape[0] != shape[1]:
            out_space = SiteSpace((shape[0],), cap=state.space.cap)
        else:
            out_space = state.space
        post = PureState(out_space, raw / math.sqrt(p))
    else:
        if sites is None and shape[0] != shape[1]:
            out_space = SiteSpace((shape[0],), cap=state.space.cap)
        else:
            out_space = state.space
        post = DensityOperator(out_space, raw / p)
    return MeasurementOutcome(kraus.labels[idx], p, post)


# ---------------------------------------------------------------------------
# Plain-text serialization


def _write_entries(fh, array: np.ndarray, index_fmt) -> None:
    flat = array.reshape(-1) if array.ndim == 1 else array
    if array.ndim == 1:
        for i, z in enumerate(flat):
            if z != 0:
                fh.write(f"{index_fmt(i)} {z.real:.17g} {z.imag:.17g}\n")
    else:
        rows, cols = array.shape
        for r in range(rows):
            for c in range(cols):
                z = array[r, c]
                if z != 0:
                    fh.write(f"{r} {c} {z.real:.17g} {z.imag:.17g}\n")


def save_pure_state(path, state: PureState) -> None:
    with open(path, "w") as fh:
        fh.write("dims: " + " ".join(str(d) for d in state.space.dims) + "\n")
        _write_entries(fh, state.amplitudes, lambda i: str(i))


def load_pure_state(path) -> PureState:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("dims:"):
            raise ValueError("missing 'dims:' header line")
        dims = tuple(int(x) for x in header.split()[1:])
        space = SiteSpace(dims)
        vec = np.zeros(space.total_dim, dtype=complex)
        for line in fh:
            if not line.strip():
                continue
            idx, re_s, im_s = line.split()
            vec[int(idx)] = float(re_s) + 1j * float(im_s)
    return PureState(space, vec)


def save_density_operator(path, rho: DensityOperator) -> None:
    with open(path, "w") as fh:
        fh.write("dims: " + " ".join(str(d) for d in rho.space.dims) + "\n")
        _write_entries(fh, rho.matrix, None)


def load_density_operator(path) -> DensityOperator:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("dims:"):
            raise ValueError("missing 'dims:' header line")
        dims = tuple(int(x) for x in header.split()[1:])
        space = SiteSpace(dims)
        m = np.zeros((space.total_dim, space.total_dim), dtype=complex)
        for line in fh:
            if not line.strip():
                continue
            r, c, re_s, im_s = line.split()
            m[int(r), int(c)] = float(re_s) + 1j * float(im_s)
    return DensityOperator(space, m)
