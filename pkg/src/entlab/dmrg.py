"""Variational ground-state search over matrix product states.

Single-site sweeps on an open chain: with the rest of the chain held in
mixed-canonical gauge, the energy is an ordinary Hermitian eigenproblem
in one site tensor, so every update lowers (never raises) the energy.
Next-nearest-neighbor chains are handled by blocking site pairs first.
"""

from __future__ import annotations

import numpy as np

from .errors import CapacityError
from .models import LocalHamiltonian, _reorder_term
from .mps import MpsState, random_mps
from .states import SiteSpace


def block_pair_sites(h: LocalHamiltonian) -> LocalHamiltonian:
    """Merge site pairs (2k, 2k+1) so ranges up to 2 become nearest-neighbor."""
    if h.periodic:
        raise ValueError("pair blocking is implemented for open chains")
    n = h.space.n_sites
    if n % 2:
        raise ValueError("pair blocking needs an even site count")
    dims = h.space.dims
    if any(d != dims[0] for d in dims):
        raise ValueError("pair blocking expects a uniform local dimension")
    d = dims[0]
    n_blocks = n // 2
    eye = np.eye(d, dtype=complex)
    onsite = {k: np.zeros((d * d, d * d), dtype=complex) for k in range(n_blocks)}
    bonds = {k: np.zeros((d**4, d**4), dtype=complex) for k in range(n_blocks - 1)}

    def lift_single(mat, pos):  # operator on one leg of a block
        return np.kron(mat, eye) if pos == 0 else np.kron(eye, mat)

    for sites, mat in h.terms:
        order = tuple(sorted(sites))
        if order != sites:
            mat = _reorder_term(mat, sites, dims)
        blocks = sorted({s // 2 for s in order})
        if len(order) == 1:
            (s,) = order
            onsite[blocks[0]] += lift_single(mat, s % 2)
        elif len(order) == 2:
            i, j = order
            if j - i > 2:
                raise ValueError("pair blocking covers ranges up to 2 sites")
            if len(blocks) == 1:
                onsite[blocks[0]] += mat  # intra-block (i, i+1) term
            else:
                t = mat.reshape(d, d, d, d)  # (i_out, j_out, i_in, j_in)
                bonds[blocks[0]] += _embed_pair(t, i % 2, j % 2, d)
        else:
            raise ValueError("pair blocking covers at most two-site terms")

    space = SiteSpace((d * d,) * n_blocks)
    terms = []
    for k in range(n_blocks):
        if np.any(onsite[k]):
            terms.append(((k,), onsite[k]))
    for k in range(n_blocks - 1):
        if np.any(bonds[k]):
            terms.append(((k, k + 1), bonds[k]))
    return LocalHamiltonian(space, tuple(terms), periodic=False)


def _embed_pair(t: np.ndarray, pos_i: int, pos_j: int, d: int) -> np.ndarray:
    """Two-site operator tensor t[(i,j),(i,j)] placed on legs of two blocks.

    The combined space carries legs (a0, a1, b0, b1); the operator acts
    on leg pos_i of the first block and leg pos_j of the second.
    """
    axes_op = (pos_i, 2 + pos_j)
    full = np.eye(d**4, dtype=complex).reshape((d,) * 8)
    full = np.tensordot(t, full, axes=((2, 3), axes_op))
    full = np.moveaxis(full, (0, 1), axes_op)
    return full.reshape(d**4, d**4)


# ---------------------------------------------------------------------------
# MPO assembly


def _split_bond_term(mat: np.ndarray, d: int):
    """Decompose a two-site term into sum_k L_k x R_k by singular values."""
    t = mat.reshape(d, d, d, d)  # (i_out, j_out, i_in, j_in)
    m = t.transpose(0, 2, 1, 3).reshape(d * d, d * d)  # (i_out,i_in) x (j_out,j_in)
    u, s, vh = np.linalg.svd(m)
    keep = s > 1e-12
    lefts = [(u[:, k] * np.sqrt(s[k])).reshape(d, d) for k in np.nonzero(keep)[0]]
    rights = [(vh[k] * np.sqrt(s[k])).reshape(d, d) for k in np.nonzero(keep)[0]]
    return lefts, rights


def mpo_tensors(h: LocalHamiltonian) -> list[np.ndarray]:
    """Finite-automaton MPO for an open chain of 1- and 2-site terms."""
    if h.periodic:
        raise ValueError("the MPO builder expects an open chain")
    n = h.space.n_sites
    dims = h.space.dims
    if any(d != dims[0] for d in dims):
        raise ValueError("the MPO builder expects a uniform local dimension")
    d = dims[0]
    onsite = [np.zeros((d, d), dtype=complex) for _ in range(n)]
    bond_parts: list[tuple[list, list]] = [([], []) for _ in range(n - 1)]
    for sites, mat in h.terms:
        order = tuple(sorted(sites))
        if order != sites:
            mat = _reorder_term(mat, sites, dims)
        if len(order) == 1:
            onsite[order[0]] += mat
        elif len(order) == 2 and order[1] == order[0] + 1:
            lefts, rights = _split_bond_term(mat, d)
            bond_parts[order[0]][0].extend(lefts)
            bond_parts[order[0]][1].extend(rights)
        else:
            raise ValueError(
                "the variational solver handles nearest-neighbor chains; "
                "block longer-range terms first"
            )
    eye = np.eye(d, dtype=complex)
    ws = []
    for m in range(n):
        left_rank = len(bond_parts[m - 1][0]) if m > 0 else 0
        right_rank = len(bond_parts[m][0]) if m < n - 1 else 0
        chi_l = 2 + left_rank
        chi_r = 2 + right_rank
        w = np.zeros((chi_l, chi_r, d, d), dtype=complex)
        w[0, 0] = eye
        w[chi_l - 1, chi_r - 1] = eye
        w[0, chi_r - 1] = onsite[m]
        if m < n - 1:
            for k, lk in enumerate(bond_parts[m][0]):
                w[0, 1 + k] = lk
        if m > 0:
            for k, rk in enumerate(bond_parts[m - 1][1]):
                w[1 + k, chi_r - 1] = rk
        ws.append(w)
    ws[0] = ws[0][:1]  # only the 'ready' row enters from the left
    ws[-1] = ws[-1][:, -1:]  # only the 'done' column exits to the right
    return ws


# ---------------------------------------------------------------------------
# Sweeping


def _right_canonicalize_tensors(tensors: list[np.ndarray]) -> list[np.ndarray]:
    out = [None] * len(tensors)
    carry = np.eye(1, dtype=complex)
    for m in range(len(tensors) - 1, -1, -1):
        t = np.tensordot(tensors[m], carry, axes=(2, 0))
        d, dl, dr = t.shape
        mat = t.transpose(1, 0, 2).reshape(dl, d * dr)
        q, r = np.linalg.qr(mat.conj().T)
        rank = q.shape[1]
        out[m] = q.conj().T.reshape(rank, d, dr).transpose(1, 0, 2)
        carry = r.conj().T
    norm = abs(carry[0, 0])
    out[0] = out[0] * (carry[0, 0] / norm)
    return out


def _contract_left(env, a, w):
    # env: (wl, bl, kl); a: (d, kl->...) ket tensor; returns next env
    tmp = np.tensordot(env, a, axes=(2, 1))  # (wl, bl, d, kr)
    tmp = np.tensordot(tmp, w, axes=((0, 2), (0, 3)))  # (bl, kr, wr, d_bra)
    nxt = np.tensordot(tmp, a.conj(), axes=((0, 3), (1, 0)))  # (kr, wr, br)
    return nxt.transpose(1, 2, 0)  # (wr, br, kr)


def _contract_right(env, a, w):
    # env: (wr, br, kr)
    tmp = np.tensordot(a, env, axes=(2, 2))  # (d, kl, wr, br)
    tmp = np.tensordot(w, tmp, axes=((1, 3), (2, 0)))  # (wl, d_bra, kl, br)
    nxt = np.tensordot(tmp, a.conj(), axes=((1, 3), (0, 2)))  # (wl, kl, bl)
    return nxt.transpose(0, 2, 1)  # (wl, bl, kl)


def _effective_matrix(lenv, w, renv, shape):
    d, dl, dr = shape
    # H_eff[(i,a,b),(j,a',b')] = L[wl,a,a'] W[wl,wr,i,j] R[wr,b,b']
    tmp = np.tensordot(lenv, w, axes=(0, 0))  # (a, a', wr, i, j)
    tmp = np.tensordot(tmp, renv, axes=(2, 0))  # (a, a', i, j, b, b')
    mat = tmp.transpose(2, 0, 4, 3, 1, 5).reshape(d * dl * dr, d * dl * dr)
    return 0.5 * (mat + mat.conj().T)


_EFFECTIVE_DIM_CAP = 4096


def variational_ground_search(
    h: LocalHamiltonian,
    bond_dim: int,
    sweeps: int = 30,
    tol: float = 1e-10,
    seed: int = 0,
    initial: MpsState | None = None,
) -> tuple[MpsState, list[float]]:
    """Minimize the energy site by site at fixed bond dimension.

    Returns the optimized open-boundary state and the energy after every
    site update; the trace is monotone nonincreasing (each update solves
    the site eigenproblem exactly). Iteration stops when a full sweep
    changes the energy by less than ``tol``.
    """
    if h.periodic:
        raise ValueError("the variational sweep expects an open chain")
    n = h.space.n_sites
    d = h.space.dims[0]
    ws = mpo_tensors(h)
    if initial is None:
        initial = random_mps(n, d, bond_dim, "open", seed)
    tensors = _right_canonicalize_tensors([np.array(t) for t in initial.tensors])
    dim_worst = d * min(bond_dim, d ** (n // 2)) ** 2
    if dim_worst > _EFFECTIVE_DIM_CAP:
        raise CapacityError(
            f"site problem dimension {dim_worst} exceeds {_EFFECTIVE_DIM_CAP}"
        )

    lenvs = [None] * (n + 1)
    renvs = [None] * (n + 1)
    lenvs[0] = np.ones((1, 1, 1), dtype=complex)
    renvs[n] = np.ones((1, 1, 1), dtype=complex)
    for m in range(n - 1, 0, -1):
        renvs[m] = _contract_right(renvs[m + 1], tensors[m], ws[m])

    energies: list[float] = []

    def update_site(m: int) -> float:
        mat = _effective_matrix(lenvs[m], ws[m], renvs[m + 1], tensors[m].shape)
        w, v = np.linalg.eigh(mat)
        vec = v[:, 0]
        dm, dl, dr = tensors[m].shape
        tensors[m] = vec.reshape(dm, dl, dr)
        return float(w[0])

    def move_right(m: int):
        t = tensors[m]
        dm, dl, dr = t.shape
        q, r = np.linalg.qr(t.transpose(1, 0, 2).reshape(dl * dm, dr))
        rank = q.shape[1]
        tensors[m] = q.reshape(dl, dm, rank).transpose(1, 0, 2)
        tensors[m + 1] = np.tensordot(r, tensors[m + 1], axes=(1, 1)).transpose(1, 0, 2)
        lenvs[m + 1] = _contract_left(lenvs[m], tensors[m], ws[m])

    def move_left(m: int):
        t = tensors[m]
        dm, dl, dr = t.shape
        mmat = t.transpose(1, 0, 2).reshape(dl, dm * dr)
        qdag, rdag = np.linalg.qr(mmat.conj().T)  # LQ of mmat
        rank = qdag.shape[1]
        tensors[m] = qdag.conj().T.reshape(rank, dm, dr).transpose(1, 0, 2)
        tensors[m - 1] = np.tensordot(tensors[m - 1], rdag.conj().T, axes=(2, 0))
        renvs[m] = _contract_right(renvs[m + 1], tensors[m], ws[m])

    last = np.inf
    for _ in range(int(sweeps)):
        for m in range(n - 1):
            energies.append(update_site(m))
            move_right(m)
        for m in range(n - 1, 0, -1):
            energies.append(update_site(m))
            move_left(m)
        if abs(last - energies[-1]) < tol:
            last = energies[-1]
            break
        last = energies[-1]
    energies.append(update_site(0))
    final = MpsState(tuple(tensors), "open")
    return final, energies
