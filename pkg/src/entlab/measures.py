"""Entanglement and correlation quantifiers for small dense states.

Covers Schmidt data, entropies (von Neumann and Renyi, base 2
throughout), negativity, two-qubit concurrence, fidelity with a
maximally entangled state, quantum mutual information, two entanglement
witnesses (a CHSH-type one for qubit pairs and an EPR-quadrature one
for truncated oscillator modes), spin squeezing, and localizable
entanglement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, TruncationError, UndefinedParameterError
from .states import (
    DensityOperator,
    PureState,
    RegionPartition,
    SiteSpace,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    compose,
    expectation,
    partial_trace,
    partial_transpose,
    pauli_direction,
    random_unitary,
    reduce_to_sites,
)

LOG2E = math.log2(math.e)

# Measurement directions (n0, n1, m0, m1) that realize the optimal
# CHSH strategy on a Bell pair: Alice's settings are the z and x axes,
# Bob's the two diagonals. With outcome +1 mapped to bit 0 these give
# the game value (1+sqrt(2))/(2 sqrt(2)) and witness expectation
# 2 sqrt(2) on the Bell state.
_S2 = 1.0 / math.sqrt(2.0)
GAME_DIRECTIONS = ((0.0, 1.0), (1.0, 0.0), (_S2, _S2), (-_S2, _S2))


def entropy_bits(probabilities) -> float:
    """Shannon entropy in bits with 0 log 0 = 0."""
    p = np.asarray(probabilities, dtype=float)
    p = p[p > 1e-300]
    return float(-(p * np.log2(p)).sum())


def binary_entropy(p: float) -> float:
    return entropy_bits([p, 1.0 - p])


def vn_entropy_bits(rho: DensityOperator | np.ndarray) -> float:
    """Von Neumann entropy in bits."""
    m = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    w = np.linalg.eigvalsh(m)
    return entropy_bits(np.clip(w, 0.0, None))


def trace_norm(m: np.ndarray, hermitian: bool = True) -> float:
    if hermitian:
        return float(np.abs(np.linalg.eigvalsh(m)).sum())
    return float(np.linalg.svd(m, compute_uv=False).sum())


# ---------------------------------------------------------------------------
# Schmidt decomposition and the measures that follow from it


@dataclass(frozen=True)
class SchmidtData:
    """Singular data of a bipartite pure state.

    ``coefficients`` are nonincreasing and strictly positive; the columns
    of ``basis_a`` / ``basis_b`` are the matching orthonormal vectors in
    the (region-A sites first) ordering of the cut.
    """

    coefficients: np.ndarray
    basis_a: np.ndarray
    basis_b: np.ndarray


def _bipartite_matrix(vec: np.ndarray, space: SiteSpace, part: RegionPartition):
    dims = space.dims
    a = list(part.region_a)
    b = list(part.region_b)
    da = int(np.prod([dims[s] for s in a], dtype=object))
    db = int(np.prod([dims[s] for s in b], dtype=object))
    c = vec.reshape(dims).transpose(a + b).reshape(da, db)
    return c, da, db


def schmidt_decompose(psi: PureState, part: RegionPartition, tol: float = 1e-14) -> SchmidtData:
    if part.n_sites != psi.space.n_sites:
        raise ValueError("partition does not match the state's site count")
    c, _, _ = _bipartite_matrix(psi.amplitudes, psi.space, part)
    u, s, vh = np.linalg.svd(c, full_matrices=False)
    keep = s > tol
    return SchmidtData(s[keep], u[:, keep], vh[keep, :].T)


def schmidt_reconstruct(data: SchmidtData, space: SiteSpace, part: RegionPartition) -> np.ndarray:
    """Rebuild the amplitude vector (original site order) from Schmidt data."""
    dims = space.dims
    a = list(part.region_a)
    b = list(part.region_b)
    c = (data.basis_a * data.coefficients) @ data.basis_b.T
    sub = [dims[s] for s in a] + [dims[s] for s in b]
    inv = np.argsort(a + b)
    return c.reshape(sub).transpose(inv).reshape(-1)


def entanglement_entropy(psi: PureState, part: RegionPartition) -> float:
    """Entropy of entanglement across the partition, in bits."""
    data = schmidt_decompose(psi, part)
    return entropy_bits(data.coefficients**2)


def renyi_entropy(rho: DensityOperator, alpha: float) -> float:
    """Renyi entropy log2(tr rho^alpha)/(1-alpha); alpha near 1 falls back
    to the von Neumann entropy."""
    alpha = float(alpha)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if abs(alpha - 1.0) < 1e-6:
        return vn_entropy_bits(rho)
    w = np.clip(rho.eigenvalues(), 0.0, None)
    return float(math.log2((w**alpha).sum()) / (1.0 - alpha))


def negativity(rho: DensityOperator, part: RegionPartition) -> float:
    """max(||rho^{T_A}||_1 - 1, 0); positive only for entangled states.

    Values below the eigenvalue-sum rounding floor (1e-12) report as 0,
    so separable states never flag as entangled.
    """
    pt = partial_transpose(rho, part)
    value = trace_norm(pt) - 1.0
    return value if value > 1e-12 else 0.0


def concurrence_2q(psi: PureState) -> float:
    """2 |det c| for a two-qubit pure state with amplitude matrix c."""
    if psi.space.dims != (2, 2):
        raise ValueError("concurrence_2q needs exactly two qubit sites")
    c = psi.amplitudes.reshape(2, 2)
    return float(2.0 * abs(np.linalg.det(c)))


# ---------------------------------------------------------------------------
# Fidelity with a maximally entangled state


def _align_unitary(g: np.ndarray) -> np.ndarray:
    # argmax over unitaries U of Re tr(g U)
    w, _, xh = np.linalg.svd(g)
    return xh.conj().T @ w.conj().T


def mes_fidelity(
    state: PureState | DensityOperator,
    part: RegionPartition,
    restarts: int = 16,
    seed: int = 0,
    tol: float = 1e-10,
    max_iter: int = 2000,
) -> float:
    """max over local unitaries of <Phi+|(U x V) rho (U x V)^dag|Phi+>.

    Alternating exact alignment steps (monotone in the fidelity), with
    an identity start plus ``restarts`` random restarts. For a pure
    input the result equals (sum of Schmidt coefficients)^2 / d.
    """
    if isinstance(state, PureState):
        lams = np.array([1.0])
        c0, da, db = _bipartite_matrix(state.amplitudes, state.space, part)
        cs = [c0]
    else:
        w, v = np.linalg.eigh(state.matrix)
        keep = w > 1e-14
        lams = w[keep]
        cs = []
        da = db = None
        for vec in v[:, keep].T:
            c, da, db = _bipartite_matrix(vec, state.space, part)
            cs.append(c)
    if da != db:
        raise ValueError("mes_fidelity needs equal local dimensions")
    d = da
    cs = np.array(cs)

    rng = np.random.default_rng(seed)
    best = 0.0
    for attempt in range(restarts + 1):
        if attempt == 0:
            u = np.eye(d, dtype=complex)
            v_ = np.eye(d, dtype=complex)
        else:
            u = random_unitary(d, rng)
            v_ = random_unitary(d, rng)
        f_prev = -1.0
        for _ in range(max_iter):
            m = cs @ v_.T  # stack of C_i V^T
            t = np.einsum("ab,kba->k", u, m)
            g = np.tensordot(lams * t.conj(), m, axes=(0, 0))
            u = _align_unitary(g)
            um = u @ cs  # stack of U C_i
            t = np.einsum("kab,ab->k", um, v_)
            k_mat = np.tensordot(lams * t.conj(), um, axes=(0, 0))
            v_ = _align_unitary(k_mat.T)
            t = np.einsum("kab,ab->k", u @ cs, v_)
            f = float((lams * np.abs(t) ** 2).sum() / d)
            if f - f_prev < tol:
                break
            f_prev = f
        best = max(best, f)
    return min(best, 1.0)


def mes_fidelity_closed_form(psi: PureState, part: RegionPartition) -> float:
    """(sum d_k)^2 / d for a pure state; the optimizer's pure-state target."""
    data = schmidt_decompose(psi, part)
    da = data.basis_a.shape[0]
    db = data.basis_b.shape[0]
    if da != db:
        raise ValueError("closed form needs equal local dimensions")
    return float(data.coefficients.sum() ** 2 / da)


# ---------------------------------------------------------------------------
# Mutual information


def mutual_information(rho: DensityOperator, part: RegionPartition) -> float:
    """I(A:B) = S_A + S_B - S_AB in bits, clamped at 0."""
    s_a = vn_entropy_bits(partial_trace(rho, part, "a"))
    s_b = vn_entropy_bits(partial_trace(rho, part, "b"))
    s_ab = vn_entropy_bits(rho)
    return max(s_a + s_b - s_ab, 0.0)


def product_of_marginals(rho: DensityOperator, part: RegionPartition) -> np.ndarray:
    """rho_A x rho_B re-embedded in the original site order."""
    dims = rho.space.dims
    a = list(part.region_a)
    b = list(part.region_b)
    m = np.kron(partial_trace(rho, part, "a").matrix, partial_trace(rho, part, "b").matrix)
    n = rho.space.n_sites
    order = a + b
    sub = [dims[s] for s in order]
    inv = list(np.argsort(order))
    t = m.reshape(tuple(sub) * 2).transpose(inv + [n + p for p in inv])
    d = rho.space.total_dim
    return t.reshape(d, d)


# ---------------------------------------------------------------------------
# Witnesses


@dataclass(frozen=True)
class WitnessReport:
    expectation: float
    detected: bool
    witness_id: str
    diagnostics: dict = field(default_factory=dict)


def chsh_witness(rho: DensityOperator, n1, n2, m1, m2) -> WitnessReport:
    """Witness W = 2 - S for the CHSH combination of xz-plane Paulis.

    S = s(n1) x [s(m1)+s(m2)] + s(n2) x [s(m1)-s(m2)]; every product state
    has <W> >= 0, so a negative expectation certifies entanglement.
    """
    if rho.space.dims != (2, 2):
        raise ValueError("chsh_witness needs a two-qubit density operator")
    a1, a2 = pauli_direction(n1), pauli_direction(n2)
    b1, b2 = pauli_direction(m1), pauli_direction(m2)
    s_op = np.kron(a1, b1 + b2) + np.kron(a2, b1 - b2)
    value = _snap(2.0 - expectation(rho, s_op))
    return WitnessReport(value, value < 0.0, "chsh")


def _snap(value: float, floor: float = 1e-12) -> float:
    # keep rounding noise from tripping a detector
    return value if abs(value) > floor else 0.0


def chsh_witness_game(rho: DensityOperator) -> WitnessReport:
    return chsh_witness(rho, *GAME_DIRECTIONS)


def werner_phi_state(p: float) -> DensityOperator:
    """(1-p)/4 * identity + p |Phi+><Phi+| on two qubits."""
    from .states import bell_state

    phi = bell_state("phi+").amplitudes
    m = (1.0 - p) * np.eye(4) / 4.0 + p * np.outer(phi, phi.conj())
    return DensityOperator(SiteSpace.qubits(2), m)


# -- truncated oscillator modes ---------------------------------------------


def ladder_operator(n_max: int) -> np.ndarray:
    a = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    for n in range(1, n_max + 1):
        a[n - 1, n] = math.sqrt(n)
    return a


def quadratures(n_max: int):
    """(X, P) built from the truncated ladder operator, [X, P] ~ i."""
    a = ladder_operator(n_max)
    x = (a + a.conj().T) / math.sqrt(2.0)
    p = (a - a.conj().T) / (1j * math.sqrt(2.0))
    return x, p


def vacuum_state(n_max: int) -> PureState:
    vec = np.zeros(n_max + 1, dtype=complex)
    vec[0] = 1.0
    return PureState(SiteSpace((n_max + 1,)), vec)


def coherent_state(alpha: complex, n_max: int) -> PureState:
    n = np.arange(n_max + 1)
    from scipy.special import gammaln

    log_fact = gammaln(n + 1.0)
    amp = np.exp(-abs(alpha) ** 2 / 2.0) * np.power(complex(alpha), n) / np.exp(0.5 * log_fact)
    return PureState.from_vector(SiteSpace((n_max + 1,)), amp, normalize=True)


def two_mode_squeezed_state(r: float, n_max: int) -> PureState:
    lam = math.tanh(r)
    space = SiteSpace((n_max + 1, n_max + 1))
    vec = np.zeros(space.total_dim, dtype=complex)
    for n in range(n_max + 1):
        vec[n * (n_max + 1) + n] = lam**n
    return PureState.from_vector(space, vec, normalize=True)


def cv_witness(rho: PureState | DensityOperator, n_max: int) -> WitnessReport:
    """EPR-quadrature witness W = (X-Y)^2 + (P+Q)^2 - 2 on two truncated modes.

    Product states obey <W> >= 0 by the uncertainty relation; two-mode
    squeezed states are detected. Raises TruncationError when either
    mode holds more than 1e-8 population above level n_max/2.
    """
    space = rho.space
    if space.dims != (n_max + 1, n_max + 1):
        raise ValueError("state must live on two modes truncated at n_max")
    leak = 0.0
    cutoff = n_max // 2
    for mode in (0, 1):
        pops = np.diag(reduce_to_sites(rho, (mode,)).matrix).real
        leak = max(leak, float(pops[cutoff + 1 :].sum()))
    if leak >= 1e-8:
        raise TruncationError(
            f"population {leak:.3e} above level n_max/2; increase n_max"
        )
    x, p = quadratures(n_max)
    eye = np.eye(n_max + 1)
    x_minus_y = np.kron(x, eye) - np.kron(eye, x)
    p_plus_q = np.kron(p, eye) + np.kron(eye, p)
    s_op = x_minus_y @ x_minus_y + p_plus_q @ p_plus_q
    value = _snap(expectation(rho, s_op) - 2.0)
    return WitnessReport(value, value < 0.0, "cv-epr", {"truncation_leak": leak})


# ---------------------------------------------------------------------------
# Spin squeezing


@dataclass(frozen=True)
class SqueezingReport:
    xi: float
    mean_spin: tuple[float, float, float]
    variance_z: float


def spin_squeezing(state: PureState | DensityOperator) -> SqueezingReport:
    """Squeezing parameter xi = N Var(S_z) / (<S_x>^2 + <S_y>^2).

    xi < 1 certifies entanglement; a vanishing transverse mean spin
    leaves xi undefined and raises UndefinedParameterError.
    """
    dims = state.space.dims
    if any(d != 2 for d in dims):
        raise ValueError("spin squeezing is defined for qubit sites")
    n = len(dims)
    singles = [reduce_to_sites(state, (i,)) for i in range(n)]
    means = {}
    for label, op in (("x", SIGMA_X), ("y", SIGMA_Y), ("z", SIGMA_Z)):
        means[label] = 0.5 * sum(expectation(r, op) for r in singles)
    zz = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            pair = reduce_to_sites(state, (i, j))
            zz += 2.0 * expectation(pair, np.kron(SIGMA_Z, SIGMA_Z))
    sz2 = 0.25 * (n + zz)
    var_z = sz2 - means["z"] ** 2
    denom = means["x"] ** 2 + means["y"] ** 2
    if denom <= 1e-12:
        raise UndefinedParameterError(
            "transverse mean spin vanishes; squeezing parameter undefined"
        )
    xi = n * var_z / denom
    return SqueezingReport(float(xi), (means["x"], means["y"], means["z"]), float(var_z))


# ---------------------------------------------------------------------------
# Localizable entanglement


def _measured_basis_matrix(theta: float, phi: float) -> np.ndarray:
    # rows are the bras of an orthonormal qubit basis at Bloch angles
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    e = np.exp(1j * phi)
    return np.array([[c, e * s], [-s, e * c]], dtype=complex).conj()


def _le_value(psi_t: np.ndarray, measured: list[int], keep: list[int], angles) -> float:
    t = psi_t
    for s, (theta, phi) in zip(measured, angles):
        m = _measured_basis_matrix(theta, phi)
        t = np.moveaxis(np.tensordot(m, t, axes=(1, s)), 0, s)
    n = t.ndim
    order = measured + keep
    t = t.transpose(order).reshape(-1, 2, 2)
    sv = np.linalg.svd(t, compute_uv=False)
    p = (sv**2).sum(axis=1)
    total = 0.0
    for k in range(t.shape[0]):
        if p[k] > 1e-15:
            q = sv[k, 0] ** 2 / p[k]
            total += p[k] * binary_entropy(min(max(q, 0.0), 1.0))
    return float(total)


def localizable_entanglement(
    psi: PureState,
    keep,
    grid: tuple[int, int] = (12, 24),
    refinements: int = 3,
    random_starts: int = 4,
    seed: int = 0,
) -> float:
    """Best average pair entanglement over measured bases on the other sites.

    Every site outside ``keep`` is measured in a rank-1 projective basis
    parameterized by two Bloch angles; bases are optimized by coordinate
    ascent on a theta x phi grid with local halving refinements, from an
    all-z start, an all-x start and seeded random starts. The result is
    a lower bound on the true maximum by construction.
    """
    dims = psi.space.dims
    n = len(dims)
    if any(d != 2 for d in dims):
        raise ValueError("localizable entanglement is implemented for qubits")
    if n > 8:
        raise CapacityError("brute-force search is limited to 8 sites")
    keep = sorted(int(s) for s in keep)
    if len(keep) != 2 or len(set(keep)) != 2:
        raise ValueError("keep must name two distinct sites")
    measured = [s for s in range(n) if s not in keep]
    psi_t = psi.as_tensor()
    if not measured:
        part = RegionPartition(n, (keep[0],))
        return entanglement_entropy(psi, part)

    g_theta, g_phi = grid
    thetas = [k * math.pi / g_theta for k in range(g_theta)]
    phis = [j * 2.0 * math.pi / g_phi for j in range(g_phi)]

    def evaluate(angles):
        return _le_value(psi_t, measured, keep, angles)

    def ascend(angles, candidates_for):
        value = evaluate(angles)
        improved = True
        while improved:
            improved = False
            for i in range(len(measured)):
                best_local = angles[i]
                best_val = value
                for cand in candidates_for(angles[i]):
                    trial = list(angles)
                    trial[i] = cand
                    v = evaluate(trial)
                    if v > best_val + 1e-12:
                        best_val = v
                        best_local = cand
                if best_local != angles[i]:
                    angles = list(angles)
                    angles[i] = best_local
                    value = best_val
                    improved = True
        return angles, value

    coarse = [(t, p) for t in thetas for p in phis]
    rng = np.random.default_rng(seed)
    starts = [[(0.0, 0.0)] * len(measured), [(math.pi / 2.0, 0.0)] * len(measured)]
    for _ in range(random_starts):
        starts.append(
            [(thetas[rng.integers(g_theta)], phis[rng.integers(g_phi)]) for _ in measured]
        )

    best_val = -1.0
    best_angles = None
    for start in starts:
        angles, value = ascend(start, lambda _cur: coarse)
        if value > best_val:
            best_val, best_angles = value, angles

    d_theta = math.pi / g_theta
    d_phi = 2.0 * math.pi / g_phi
    angles = best_angles
    for _ in range(refinements):
        d_theta /= 2.0
        d_phi /= 2.0

        def local(cur, dt=d_theta, dp=d_phi):
            t0, p0 = cur
            return [
                (t0 + i * dt, p0 + j * dp)
                for i in (-1, 0, 1)
                for j in (-1, 0, 1)
                if (i, j) != (0, 0)
            ]

        angles, value = ascend(angles, local)
        best_val = max(best_val, value)
    return float(best_val)


# ---------------------------------------------------------------------------
# Report objects


@dataclass(frozen=True)
class MeasureReport:
    """JSON-friendly record of one measure evaluation."""

    measure: str
    value: float
    partition: list | None = None
    parameters: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "measure": self.measure,
            "value": self.value,
            "partition": self.partition,
            "parameters": self.parameters,
            "diagnostics": self.diagnostics,
        }
