"""Matrix product states on a chain: construction from local maps,
amplitudes, canonical form, compression from dense vectors, expectation
values and correlation functions.

A state is a list of rank-3 tensors A[m] with axes (physical n, left
bond, right bond). Amplitudes are the trace (periodic) or the scalar
(open, boundary bonds of size 1) of the ordered matrix product
A[0][n0] A[1][n1] ... A[N-1][n_{N-1}].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError
from .states import PureState, SiteSpace


@dataclass(frozen=True)
class MpsState:
    tensors: tuple[np.ndarray, ...]
    boundary: str = "open"  # "open" | "periodic"
    gauge: str = "none"  # "none" | "left-canonical"

    def __post_init__(self):
        if self.boundary not in ("open", "periodic"):
            raise ValueError("boundary must be 'open' or 'periodic'")
        if self.gauge not in ("none", "left-canonical"):
            raise ValueError("gauge must be 'none' or 'left-canonical'")
        tensors = tuple(np.asarray(t, dtype=complex) for t in self.tensors)
        if not tensors:
            raise ValueError("an MPS needs at least one site")
        for m, t in enumerate(tensors):
            if t.ndim != 3:
                raise ValueError(f"site {m} tensor must have 3 axes (n, left, right)")
            right = tensors[(m + 1) % len(tensors)]
            if m + 1 < len(tensors) and t.shape[2] != right.shape[1]:
                raise ValueError(f"bond mismatch between sites {m} and {m + 1}")
        if self.boundary == "open":
            if tensors[0].shape[1] != 1 or tensors[-1].shape[2] != 1:
                raise ValueError("open boundary needs outer bond dimension 1")
        else:
            if tensors[0].shape[1] != tensors[-1].shape[2]:
                raise ValueError("periodic boundary needs matching closure bonds")
        frozen = []
        for t in tensors:
            t = np.ascontiguousarray(t)
            t.setflags(write=False)
            frozen.append(t)
        object.__setattr__(self, "tensors", tuple(frozen))

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> tuple[int, ...]:
        return tuple(t.shape[0] for t in self.tensors)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        return tuple(t.shape[2] for t in self.tensors)

    @property
    def parameter_count(self) -> int:
        return int(sum(t.size for t in self.tensors))

    def site_space(self) -> SiteSpace:
        return SiteSpace(self.phys_dims)


def random_mps(
    n_sites: int,
    phys_dim: int = 2,
    bond_dim: int = 2,
    boundary: str = "open",
    seed: int = 0,
) -> MpsState:
    rng = np.random.default_rng(seed)
    tensors = []
    for m in range(n_sites):
        dl = bond_dim if (boundary == "periodic" or m > 0) else 1
        dr = bond_dim if (boundary == "periodic" or m < n_sites - 1) else 1
        t = rng.standard_normal((phys_dim, dl, dr)) + 1j * rng.standard_normal((phys_dim, dl, dr))
        tensors.append(t / math.sqrt(phys_dim * dl * dr))
    return MpsState(tuple(tensors), boundary)


# ---------------------------------------------------------------------------
# Construction from local maps applied to entangled auxiliary pairs


@dataclass(frozen=True)
class SiteMap:
    """Map from two auxiliary bond systems to one physical site.

    ``matrix`` has shape (d, left_dim * right_dim); entry (i, a*right+b)
    is the coefficient taking the auxiliary pair state |a, b> to |i>.
    """

    matrix: np.ndarray
    left_dim: int
    right_dim: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[1] != self.left_dim * self.right_dim:
            raise ValueError("matrix shape must be (d, left_dim * right_dim)")
        if not np.all(np.isfinite(m)):
            raise ValueError("map entries must be finite")
        m = np.ascontiguousarray(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def square(cls, matrix, bond_dim: int) -> "SiteMap":
        return cls(np.asarray(matrix), bond_dim, bond_dim)

    def tensor(self) -> np.ndarray:
        d = self.matrix.shape[0]
        return self.matrix.reshape(d, self.left_dim, self.right_dim)


def ghz_site_map(bond_dim: int = 2) -> SiteMap:
    """|i><i,i| for i < bond_dim; a chain of these yields a GHZ-type state."""
    d = bond_dim
    m = np.zeros((d, d * d), dtype=complex)
    for i in range(d):
        m[i, i * d + i] = 1.0
    return SiteMap(m, d, d)


def mps_from_maps(maps, boundary: str = "periodic") -> MpsState:
    """Read the site tensors directly off the maps' coefficients.

    The realized state is the projection of (unnormalized) maximally
    entangled auxiliary pairs shared between neighbors.
    """
    maps = list(maps)
    tensors = []
    for k, site_map in enumerate(maps):
        nxt = maps[(k + 1) % len(maps)]
        if k + 1 < len(maps) or boundary == "periodic":
            if site_map.right_dim != nxt.left_dim:
                raise ValueError(f"bond mismatch between maps {k} and {(k + 1) % len(maps)}")
        tensors.append(site_map.tensor())
    return MpsState(tuple(tensors), boundary)


def pair_construction_dense(maps, boundary: str = "periodic") -> np.ndarray:
    """Dense oracle: build the auxiliary pairs explicitly and apply the maps.

    Exponential in the site count; intended for small cross-checks.
    """
    maps = list(maps)
    n = len(maps)
    if boundary != "periodic":
        raise ValueError("the explicit pair construction is periodic")
    bond_dims = [m.right_dim for m in maps]
    # auxiliary register ordering: (right of site 0, left of site 1,
    # right of site 1, left of site 2, ..., right of N-1, left of 0)
    aux = np.array([1.0], dtype=complex)
    for d in bond_dims:
        pair = np.zeros(d * d, dtype=complex)
        for i in range(d):
            pair[i * d + i] = 1.0
        aux = np.kron(aux, pair)
    dims = []
    for k in range(n):
        dims.extend([bond_dims[k], bond_dims[k]])
    t = aux.reshape(dims)
    # move "left of site 0" (the last axis) to the front
    t = np.moveaxis(t, 2 * n - 1, 0)
    # now axes are (left_0, right_0, left_1, right_1, ...)
    out = t
    phys_dims = []
    for k in range(n):
        pm = maps[k].tensor()  # (d, left, right)
        out = np.tensordot(out, pm, axes=((0, 1), (1, 2)))
        phys_dims.append(pm.shape[0])
    return out.reshape(-1)  # physical axes in site order


def mps_amplitude(mps: MpsState, configuration) -> complex:
    """Amplitude of one computational-basis configuration."""
    config = [int(c) for c in configuration]
    if len(config) != mps.n_sites:
        raise ValueError("configuration length must equal the site count")
    mat = None
    for t, c in zip(mps.tensors, config):
        if not 0 <= c < t.shape[0]:
            raise ValueError(f"configuration entry {c} outside the local dimension")
        mat = t[c] if mat is None else mat @ t[c]
    if mps.boundary == "periodic":
        return complex(np.trace(mat))
    return complex(mat[0, 0])


def mps_dense_vector(mps: MpsState) -> np.ndarray:
    """Raw (unnormalized) amplitude vector; exponential in the site count."""
    if mps.boundary == "open":
        acc = mps.tensors[0][:, 0, :]  # (d0, D1)
        for t in mps.tensors[1:]:
            acc = np.tensordot(acc, t, axes=(acc.ndim - 1, 1))
            acc = acc.reshape(-1, t.shape[2])
        return acc[:, 0]
    d0 = mps.tensors[0].shape[1]
    acc = mps.tensors[0].reshape(-1, d0, mps.tensors[0].shape[2])  # (prefix, D0, Dk)
    for t in mps.tensors[1:]:
        acc = np.tensordot(acc, t, axes=(2, 1))  # (prefix, D0, d, Dk)
        acc = acc.transpose(0, 2, 1, 3).reshape(-1, d0, t.shape[2])
    return np.trace(acc, axis1=1, axis2=2)


def mps_to_state(mps: MpsState) -> PureState:
    vec = mps_dense_vector(mps)
    return PureState.from_vector(mps.site_space(), vec, normalize=True)


def mps_fidelity(a: MpsState | PureState, b: MpsState | PureState) -> float:
    va = mps_dense_vector(a) if isinstance(a, MpsState) else a.amplitudes
    vb = mps_dense_vector(b) if isinstance(b, MpsState) else b.amplitudes
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na < 1e-150 or nb < 1e-150:
        raise DegenerateInputError("zero-norm state in fidelity")
    return float(abs(np.vdot(va, vb)) ** 2 / (na**2 * nb**2))


# ---------------------------------------------------------------------------
# Canonical form


def _phase_fixed_qr(m: np.ndarray):
    """QR with the R diagonal rotated real nonnegative (unique for full rank)."""
    q, r = np.linalg.qr(m)
    diag = np.diagonal(r)
    phases = np.ones(diag.shape[0], dtype=complex)
    nz = np.abs(diag) > 1e-300
    phases[nz] = diag[nz] / np.abs(diag[nz])
    return q * phases, phases.conj()[:, None] * r


def left_canonicalize(mps: MpsState) -> MpsState:
    """Left-to-right orthogonal sweep; open boundaries only.

    The output satisfies sum_n A[n]^dag A[n] = identity at every site and
    represents the same physical ray, normalized.
    """
    if mps.boundary != "open":
        raise ValueError("canonical form is implemented for open boundaries")
    tensors = [np.array(t) for t in mps.tensors]
    carry = np.eye(1, dtype=complex)
    out = []
    for m, t in enumerate(tensors):
        t = np.tensordot(carry, t, axes=(1, 1)).transpose(1, 0, 2)  # (d, Dl', Dr)
        d, dl, dr = t.shape
        mat = t.transpose(1, 0, 2).reshape(dl * d, dr)
        q, r = _phase_fixed_qr(mat)
        rank = q.shape[1]
        out.append(q.reshape(dl, d, rank).transpose(1, 0, 2))
        carry = r
    norm = abs(carry[0, 0])
    if norm < 1e-150:
        raise DegenerateInputError("cannot canonicalize a zero-norm state")
    phase = carry[0, 0] / norm
    out[-1] = out[-1] * phase
    return MpsState(tuple(out), "open", "left-canonical")


def gauge_residual(mps: MpsState) -> float:
    """Largest deviation from the per-site identity condition."""
    worst = 0.0
    for t in mps.tensors:
        d, dl, dr = t.shape
        mat = t.transpose(1, 0, 2).reshape(dl * d, dr)
        worst = max(worst, float(np.max(np.abs(mat.conj().T @ mat - np.eye(dr)))))
    return worst


def gauge_transform(mps: MpsState, transforms) -> MpsState:
    """A[m] -> X[m] A[m] X[m+1]^{-1}; leaves the physical state unchanged.

    X[m] is attached to the left bond of site m. For open boundaries,
    ``transforms`` lists one nonsingular matrix per interior bond (the
    outer X's are fixed to 1); for periodic boundaries it lists one per
    site, with X[0] also closing the ring.
    """
    n = mps.n_sites
    ts = [np.asarray(x, dtype=complex) for x in transforms]
    if mps.boundary == "open":
        if len(ts) != n - 1:
            raise ValueError("open transforms need one matrix per interior bond")
        xs = [np.eye(1, dtype=complex)] + ts + [np.eye(1, dtype=complex)]
    else:
        if len(ts) != n:
            raise ValueError("periodic transforms need one matrix per site")
        xs = ts + [ts[0]]
    out = []
    for m in range(n):
        inv = np.linalg.inv(xs[m + 1])
        out.append(np.einsum("ab,nbc,cd->nad", xs[m], mps.tensors[m], inv))
    return MpsState(tuple(out), mps.boundary)


# ---------------------------------------------------------------------------
# Compression from a dense state


def dense_to_mps(
    psi: PureState,
    max_bond: int | None = None,
    tol: float = 0.0,
) -> tuple[MpsState, float]:
    """Sequential singular-value factorization of a dense chain state.

    At every cut at most ``max_bond`` singular vectors are kept and
    weights below ``tol`` (as squared singular values) are dropped; the
    summed dropped weight is returned. The kept projections nest, so the
    round-trip fidelity equals 1 - discarded weight up to rounding.
    """
    dims = psi.space.dims
    n = len(dims)
    tensors = []
    discarded = 0.0
    mat = psi.amplitudes.reshape(1, -1)
    dl = 1
    for m in range(n - 1):
        d = dims[m]
        mat = mat.reshape(dl * d, -1)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        weights = s**2
        keep = weights > max(tol, 1e-28)
        if max_bond is not None:
            cut = np.zeros_like(keep)
            cut[:max_bond] = True
            keep &= cut
        discarded += float(weights[~keep].sum())
        u, s, vh = u[:, keep], s[keep], vh[keep]
        tensors.append(u.reshape(dl, d, -1).transpose(1, 0, 2))
        mat = (s[:, None] * vh)
        dl = mat.shape[0]
    last = mat.reshape(dl, dims[-1], 1).transpose(1, 0, 2)
    norm = np.linalg.norm(last)
    if norm < 1e-150:
        raise DegenerateInputError("state vanished during factorization")
    tensors.append(last / norm)
    return MpsState(tuple(tensors), "open", "left-canonical"), discarded


# ---------------------------------------------------------------------------
# Expectation values and correlations


def _site_transfer(t: np.ndarray, op: np.ndarray | None) -> np.ndarray:
    """Doubled-bond transfer matrix for one site, optionally with an operator."""
    if op is None:
        mixed = np.tensordot(t.conj(), t, axes=(0, 0))  # (l', r', l, r)
    else:
        # op[p, q] = <p|O|q>, p contracted with the bra tensor
        mixed = np.einsum("pq,pab,qcd->abcd", np.asarray(op, dtype=complex), t.conj(), t)
    d_l = t.shape[1]
    d_r = t.shape[2]
    return mixed.transpose(0, 2, 1, 3).reshape(d_l * d_l, d_r * d_r)


def mps_expectation(mps: MpsState, site_operators, schedule: str = "left") -> complex:
    """<psi| prod O_site |psi> / <psi|psi> by transfer contraction.

    ``site_operators`` is a sequence of (site, matrix) pairs; sites not
    named carry the identity. ``schedule`` picks the contraction order
    (left-to-right or right-to-left); both give the same value.
    """
    ops = {}
    for site, op in site_operators:
        site = int(site)
        if site in ops:
            ops[site] = np.asarray(op, dtype=complex) @ ops[site]
        else:
            ops[site] = np.asarray(op, dtype=complex)
    transfers = [_site_transfer(t, ops.get(m)) for m, t in enumerate(mps.tensors)]
    plain = [_site_transfer(t, None) for t in mps.tensors]

    def chain(mats):
        if schedule == "left":
            acc = mats[0]
            for m in mats[1:]:
                acc = acc @ m
            return acc
        if schedule != "right":
            raise ValueError("schedule must be 'left' or 'right'")
        acc = mats[-1]
        for m in reversed(mats[:-1]):
            acc = m @ acc
        return acc

    numer = np.trace(chain(transfers))
    denom = np.trace(chain(plain))
    if abs(denom) < 1e-300:
        raise DegenerateInputError("zero-norm state in expectation")
    return complex(numer / denom)


@dataclass(frozen=True)
class CorrelationTable:
    separations: tuple[int, ...]
    connected: tuple[float, ...]
    fitted_rate: float | None  # decay per site of |C(r)| ~ exp(-rate * r)
    fit_residual: float | None
    transfer_ratio: float  # |second/first| transfer eigenvalue magnitude
    decaying: bool


def transfer_spectrum_ratio(mps: MpsState) -> float:
    ratios = []
    for t in mps.tensors:
        e = _site_transfer(t, None)
        w = np.sort(np.abs(np.linalg.eigvals(e)))[::-1]
        if len(w) < 2 or w[0] < 1e-300:
            return 0.0
        ratios.append(w[1] / w[0])
    return float(np.mean(ratios))


def mps_correlation(mps: MpsState, op1, op2, separations) -> CorrelationTable:
    """Connected correlations C(r) = <O1_0 O2_r> - <O1_0><O2_r>.

    Fits log|C| against r when the signal decays; constant long-range
    order (as in a GHZ state) is flagged as non-decaying.
    """
    seps = sorted(int(r) for r in separations)
    if seps[0] < 1:
        raise ValueError("separations must be >= 1")
    if seps[-1] >= mps.n_sites:
        raise ValueError("separation exceeds the chain")
    o1 = np.asarray(op1, dtype=complex)
    o2 = np.asarray(op2, dtype=complex)
    mean1 = mps_expectation(mps, [(0, o1)]).real
    values = []
    for r in seps:
        joint = mps_expectation(mps, [(0, o1), (r, o2)]).real
        mean2 = mps_expectation(mps, [(r, o2)]).real
        values.append(joint - mean1 * mean2)
    values = np.array(values)
    mags = np.abs(values)
    decaying = bool(mags[-1] < 0.5 * max(mags[0], 1e-300)) and mags[0] > 1e-12
    fitted_rate = None
    residual = None
    if decaying and np.all(mags > 1e-300):
        coeffs = np.polyfit(seps, np.log(mags), 1)
        fitted_rate = float(-coeffs[0])
        fit = np.exp(np.polyval(coeffs, seps))
        residual = float(np.max(np.abs(fit - mags) / mags.max()))
    return CorrelationTable(
        tuple(seps),
        tuple(float(v) for v in values),
        fitted_rate,
        residual,
        transfer_spectrum_ratio(mps),
        decaying,
    )


# ---------------------------------------------------------------------------
# Serialization


def save_mps(path, mps: MpsState) -> None:
    """Write `N d D boundary gauge` then nonzero `site n alpha beta re im` rows.

    Tensors are zero-padded to a uniform interior bond dimension; padding
    can void an exact left-canonical gauge, in which case the stored
    gauge is 'none'.
    """
    n = mps.n_sites
    d = mps.phys_dims[0]
    if any(p != d for p in mps.phys_dims):
        raise ValueError("serialization expects a uniform physical dimension")
    bonds = [t.shape[1] for t in mps.tensors] + [mps.tensors[-1].shape[2]]
    big = max(bonds)
    padded = []
    for m, t in enumerate(mps.tensors):
        dl = 1 if (mps.boundary == "open" and m == 0) else big
        dr = 1 if (mps.boundary == "open" and m == n - 1) else big
        block = np.zeros((d, dl, dr), dtype=complex)
        block[:, : t.shape[1], : t.shape[2]] = t
        padded.append(block)
    gauge = mps.gauge
    if gauge == "left-canonical":
        check = MpsState(tuple(padded), mps.boundary)
        if gauge_residual(check) > 1e-10:
            gauge = "none"
    with open(path, "w") as fh:
        fh.write(f"{n} {d} {big} {mps.boundary} {gauge}\n")
        for m, t in enumerate(padded):
            for idx in np.ndindex(t.shape):
                z = t[idx]
                if z != 0:
                    fh.write(
                        f"{m} {idx[0]} {idx[1]} {idx[2]} {z.real:.17g} {z.imag:.17g}\n"
                    )


def load_mps(path) -> MpsState:
    with open(path) as fh:
        n_s, d_s, big_s, boundary, gauge = fh.readline().split()
        n, d, big = int(n_s), int(d_s), int(big_s)
        tensors = []
        for m in range(n):
            dl = 1 if (boundary == "open" and m == 0) else big
            dr = 1 if (boundary == "open" and m == n - 1) else big
            tensors.append(np.zeros((d, dl, dr), dtype=complex))
        for line in fh:
            if not line.strip():
                continue
            m_s, i_s, a_s, b_s, re_s, im_s = line.split()
            tensors[int(m_s)][int(i_s), int(a_s), int(b_s)] = float(re_s) + 1j * float(im_s)
    return MpsState(tuple(tensors), boundary, gauge)
