"""Executable two-party protocols: the CHSH nonlocal game and
single-copy filtering distillation, plus distillation yield bookkeeping.

In the game, Alice and Bob receive uniform bits (x, y) and win when
their output bits satisfy a xor b = x*y. Quantum strategies measure
xz-plane Pauli observables on a shared two-qubit state; the outcome
+1 of an observable maps to output bit 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import DegenerateInputError, ZeroProbabilityBranchError
from .measures import GAME_DIRECTIONS, entanglement_entropy, mes_fidelity_closed_form
from .states import (
    KrausSet,
    PureState,
    RegionPartition,
    apply_measurement,
    bell_state,
    expectation,
    pauli_direction,
    theta_state,
)


@dataclass(frozen=True)
class GameStrategy:
    """Either deterministic output tables or a shared state with directions."""

    kind: str  # "classical" | "quantum"
    alice_outputs: tuple[int, int] | None = None
    bob_outputs: tuple[int, int] | None = None
    state: PureState | None = None
    alice_directions: tuple = ()
    bob_directions: tuple = ()

    def __post_init__(self):
        if self.kind == "classical":
            if self.alice_outputs is None or self.bob_outputs is None:
                raise ValueError("classical strategies need output tables")
        elif self.kind == "quantum":
            if self.state is None or self.state.space.dims != (2, 2):
                raise ValueError("quantum strategies need a shared two-qubit state")
            for d in tuple(self.alice_directions) + tuple(self.bob_directions):
                pauli_direction(d)  # unit-vector check
        else:
            raise ValueError(f"unknown strategy kind {self.kind!r}")


def classical_strategy(a0: int, a1: int, b0: int, b1: int) -> GameStrategy:
    return GameStrategy("classical", alice_outputs=(a0, a1), bob_outputs=(b0, b1))


def quantum_game_strategy(state: PureState | None = None) -> GameStrategy:
    """The optimal Bell-state strategy with the canonical directions."""
    n0, n1, m0, m1 = GAME_DIRECTIONS
    return GameStrategy(
        "quantum",
        state=state or bell_state("phi+"),
        alice_directions=(n0, n1),
        bob_directions=(m0, m1),
    )


@dataclass(frozen=True)
class GameResult:
    win_probability: float
    mode: str
    rounds: int | None = None
    seed: int | None = None
    std_error: float | None = None

    def to_record(self) -> dict:
        return {
            "win_probability": self.win_probability,
            "mode": self.mode,
            "rounds": self.rounds,
            "seed": self.seed,
            "std_error": self.std_error,
        }


def _joint_distribution(strategy: GameStrategy, x: int, y: int) -> np.ndarray:
    """p(a, b | x, y) as a 2x2 table, built from measurement branches."""
    obs_a = pauli_direction(strategy.alice_directions[x])
    obs_b = pauli_direction(strategy.bob_directions[y])
    kraus_a = KrausSet.projective(obs_a)
    kraus_b = KrausSet.projective(obs_b)
    table = np.zeros((2, 2))
    for label_a in kraus_a.labels:
        try:
            branch_a = apply_measurement(strategy.state, kraus_a, sites=(0,), forced_outcome=label_a)
        except ZeroProbabilityBranchError:
            continue
        a_bit = 0 if label_a > 0 else 1
        for label_b in kraus_b.labels:
            try:
                branch_b = apply_measurement(branch_a.post_state, kraus_b, sites=(1,), forced_outcome=label_b)
            except ZeroProbabilityBranchError:
                continue
            b_bit = 0 if label_b > 0 else 1
            table[a_bit, b_bit] += branch_a.probability * branch_b.probability
    return table


def chsh_play(
    strategy: GameStrategy,
    rounds: int | None = None,
    seed: int | None = None,
) -> GameResult:
    """Game value, exactly (rounds=None) or from seeded sampled rounds."""
    if strategy.kind == "classical":
        wins = sum(
            (strategy.alice_outputs[x] ^ strategy.bob_outputs[y]) == x * y
            for x, y in product((0, 1), repeat=2)
        )
        exact = wins / 4.0
        if rounds is None:
            return GameResult(exact, "analytic")
        if seed is None or rounds < 1:
            raise ValueError("sampled mode needs rounds >= 1 and a seed")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        xy = rng.integers(0, 2, size=(rounds, 2))
        won = np.fromiter(
            (
                (strategy.alice_outputs[x] ^ strategy.bob_outputs[y]) == x * y
                for x, y in xy
            ),
            dtype=float,
            count=rounds,
        )
        p_hat = float(won.mean())
        return GameResult(p_hat, "sampled", rounds, seed, _std_error(p_hat, rounds))

    if rounds is None:
        # P = 1/4 sum_{x,y} (1 + (-1)^{xy} <s_n x s_m>)/2
        total = 0.0
        for x, y in product((0, 1), repeat=2):
            corr = expectation(
                strategy.state,
                np.kron(
                    pauli_direction(strategy.alice_directions[x]),
                    pauli_direction(strategy.bob_directions[y]),
                ),
            )
            sign = -1.0 if x * y else 1.0
            total += (1.0 + sign * corr) / 2.0
        return GameResult(total / 4.0, "analytic")

    if seed is None or rounds < 1:
        raise ValueError("sampled mode needs rounds >= 1 and a seed")
    master = np.random.SeedSequence(seed)
    input_seed, *branch_seeds = master.spawn(5)
    xy = np.random.default_rng(input_seed).integers(0, 2, size=(rounds, 2))
    wins = 0
    for (x, y), sub_seed in zip(product((0, 1), repeat=2), branch_seeds):
        mask = (xy[:, 0] == x) & (xy[:, 1] == y)
        n_xy = int(mask.sum())
        if n_xy == 0:
            continue
        table = _joint_distribution(strategy, x, y).reshape(-1)
        draws = np.random.default_rng(sub_seed).choice(4, size=n_xy, p=table / table.sum())
        a_bits, b_bits = draws // 2, draws % 2
        wins += int(((a_bits ^ b_bits) == x * y).sum())
    p_hat = wins / rounds
    return GameResult(p_hat, "sampled", rounds, seed, _std_error(p_hat, rounds))


def _std_error(p: float, rounds: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / rounds)


def best_classical_value() -> tuple[GameStrategy, float]:
    """Exhaustive maximum over the 16 deterministic strategies."""
    best = None
    best_p = -1.0
    for a0, a1, b0, b1 in product((0, 1), repeat=4):
        s = classical_strategy(a0, a1, b0, b1)
        p = chsh_play(s).win_probability
        if p > best_p:
            best, best_p = s, p
    return best, best_p


# ---------------------------------------------------------------------------
# Filtering distillation


@dataclass(frozen=True)
class BranchRecord:
    label: int
    probability: float
    post_state: PureState | None
    mes_fidelity: float | None
    residual_entanglement: float | None


@dataclass(frozen=True)
class DistillationResult:
    theta: float
    branches: tuple[BranchRecord, ...]
    sampled_outcome: int | None = None

    @property
    def success(self) -> BranchRecord:
        return self.branches[0]

    def to_record(self) -> dict:
        return {
            "theta": self.theta,
            "sampled_outcome": self.sampled_outcome,
            "branches": [
                {
                    "label": b.label,
                    "probability": b.probability,
                    "mes_fidelity": b.mes_fidelity,
                    "residual_entanglement": b.residual_entanglement,
                }
                for b in self.branches
            ],
        }


def distillation_kraus(theta: float) -> KrausSet:
    """Local filter tan(theta)|0><0| + |1><1| and its completing partner."""
    a0 = np.array([[math.tan(theta), 0.0], [0.0, 1.0]], dtype=complex)
    a1 = np.array([[math.sqrt(max(1.0 - math.tan(theta) ** 2, 0.0)), 0.0], [0.0, 0.0]], dtype=complex)
    return KrausSet((a0, a1), (0, 1))


def filter_distill(theta: float, seed: int | None = None) -> DistillationResult:
    """Run the single-copy filter on cos(theta)|00> + sin(theta)|11>.

    The success branch (label 0) reaches a Bell state with probability
    2 sin(theta)^2; the failure branch is a product state. With a seed,
    one branch is additionally sampled and reported.
    """
    if theta == 0.0:
        raise DegenerateInputError("theta = 0 gives success probability 0")
    if not (0.0 < theta <= math.pi / 4.0 + 1e-12):
        raise ValueError("theta must lie in (0, pi/4]")
    state = theta_state(theta)
    kraus = distillation_kraus(theta)
    part = RegionPartition(2, (0,))
    branches = []
    for label in (0, 1):
        try:
            out = apply_measurement(state, kraus, sites=(0,), forced_outcome=label)
        except ZeroProbabilityBranchError:
            branches.append(BranchRecord(label, 0.0, None, None, None))
            continue
        post = out.post_state
        fid = mes_fidelity_closed_form(post, part)
        ent = entanglement_entropy(post, part)
        branches.append(BranchRecord(label, out.probability, post, fid, ent))
    sampled = None
    if seed is not None:
        probs = np.array([max(b.probability, 0.0) for b in branches])
        rng = np.random.default_rng(seed)
        sampled = int(rng.choice(len(probs), p=probs / probs.sum()))
    return DistillationResult(theta, tuple(branches), sampled)


# ---------------------------------------------------------------------------
# Yield bookkeeping


def average_yield(outcome_distribution) -> float:
    """(1/n) sum p_d log2(d) for a supplied outcome distribution.

    n is inferred as log2 of the largest outcome dimension; an all-product
    distribution (every d = 1) yields 0.
    """
    dist = [(float(p), int(d)) for p, d in outcome_distribution]
    if not dist:
        raise ValueError("empty distribution")
    if any(p < -1e-12 or d < 1 for p, d in dist):
        raise ValueError("probabilities must be >= 0 and dimensions >= 1")
    total = sum(p for p, _ in dist)
    if abs(total - 1.0) > 1e-10:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    d_max = max(d for _, d in dist)
    if d_max == 1:
        return 0.0
    n = math.log2(d_max)
    return sum(p * math.log2(d) for p, d in dist) / n
