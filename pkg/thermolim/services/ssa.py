"""Strongly subadditive set functions on finite ground sets.

A set function s maps finite subsets of a ground set to reals. The entropy
defect of the Gaussian free energy is the working example; two fixtures (one
pairwise additive, one designed to violate strong subadditivity) check that
the audits discriminate.

Sums over mu != nu always run over ordered pairs.
"""

import itertools
import logging
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .audits import AuditReport, AuditRow
from .models import gaussian_entropy
from .sampling import STREAM_SSA, generator

logger = logging.getLogger(__name__)

# Inequalities are violated when off by more than this
SSA_TOL = 1e-9

# Smallest ground set holding a disjoint triple
SSA_MIN_GROUND = 3

# Largest ground set enumerated exhaustively
EXHAUSTIVE_MAX_GROUND = 8

Block = frozenset[int]


@dataclass(frozen=True)
class SetFunction:
    """A real-valued oracle on finite subsets of ground."""

    ground: tuple[int, ...]
    value: Callable[[Block], float]
    name: str = "set-function"

    def __call__(self, subset: Sequence[int] | Block) -> float:
        block = frozenset(subset)
        if not block <= set(self.ground):
            raise ValueError(f"{sorted(block - set(self.ground))} not in the ground set")
        return self.value(block)

    def __len__(self) -> int:
        return len(self.ground)


@dataclass(frozen=True)
class SSAWitness:
    """Disjoint triple with lhs = s(P1 ∪ P2 ∪ P3) + s(P2) and rhs = s(P1 ∪ P2) + s(P2 ∪ P3)."""

    first: tuple[int, ...]
    middle: tuple[int, ...]
    last: tuple[int, ...]
    lhs: float
    rhs: float

    def __post_init__(self) -> None:
        a, b, c = set(self.first), set(self.middle), set(self.last)
        if a & b or b & c or a & c:
            raise ValueError(f"witness blocks must be disjoint: {self.first}, {self.middle}, {self.last}")

    @property
    def violation(self) -> float:
        return self.lhs - self.rhs

    @property
    def triple(self) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        return self.first, self.middle, self.last

    def __str__(self) -> str:
        return f"P1={self.first} P2={self.middle} P3={self.last} violation={self.violation:.3e}"


def evaluate_triple(fn: SetFunction, first: Block, middle: Block, last: Block) -> SSAWitness:
    lhs = fn(first | middle | last) + fn(middle)
    rhs = fn(first | middle) + fn(middle | last)
    return SSAWitness(
        first=tuple(sorted(first)),
        middle=tuple(sorted(middle)),
        last=tuple(sorted(last)),
        lhs=lhs,
        rhs=rhs,
    )


def _worse(candidate: SSAWitness, current: SSAWitness | None) -> bool:
    """Larger violation wins; ties go to the lexicographically smaller triple."""
    if current is None:
        return True
    if candidate.violation != current.violation:
        return candidate.violation > current.violation
    return candidate.triple < current.triple


def _random_triples(
    fn: SetFunction, trials: int, max_block: int, seed: int, empty_middle: bool
) -> Iterator[tuple[Block, Block, Block]]:
    ground = np.array(fn.ground)
    n = len(ground)
    for trial in range(trials):
        rng = generator(seed, STREAM_SSA, trial)
        order = rng.permutation(ground)
        size1 = int(rng.integers(1, min(max_block, n - 1) + 1))
        size3 = int(rng.integers(1, min(max_block, n - size1) + 1))
        room = min(max_block, n - size1 - size3)
        size2 = 0 if empty_middle or room == 0 else int(rng.integers(0, room + 1))
        first = frozenset(int(x) for x in order[:size1])
        middle = frozenset(int(x) for x in order[size1 : size1 + size2])
        last = frozenset(int(x) for x in order[size1 + size2 : size1 + size2 + size3])
        yield first, middle, last


def _all_triples(fn: SetFunction, empty_middle: bool) -> Iterator[tuple[Block, Block, Block]]:
    """Every assignment of ground elements to (none, P1, P2, P3) with P1, P3 nonempty."""
    for labels in itertools.product(range(4), repeat=len(fn.ground)):
        blocks: list[set[int]] = [set(), set(), set(), set()]
        for element, label in zip(fn.ground, labels, strict=True):
            blocks[label].add(element)
        if not blocks[1] or not blocks[3] or (empty_middle and blocks[2]):
            continue
        yield frozenset(blocks[1]), frozenset(blocks[2]), frozenset(blocks[3])


def audit_ssa(
    fn: SetFunction,
    trials: int,
    max_block: int,
    seed: int,
    exhaustive: bool = False,
    empty_middle: bool = False,
) -> AuditReport:
    """
    Test s(P1 ∪ P2 ∪ P3) + s(P2) <= s(P1 ∪ P2) + s(P2 ∪ P3) on disjoint triples.

    Args:
        fn: Set function over a ground set of at least three elements
        trials: Number of random triples
        max_block: Largest block size drawn
        seed: Seed of the triple sampler
        exhaustive: Enumerate every disjoint triple instead (ground set <= 8)
        empty_middle: Force P2 = ∅, which reduces the test to subadditivity

    Returns:
        AuditReport whose witness is the worst triple; passes iff the worst
        violation is at most SSA_TOL
    """
    if len(fn) < SSA_MIN_GROUND:
        raise ValueError(
            f"strong subadditivity needs a ground set of at least {SSA_MIN_GROUND}, got {len(fn)}"
        )
    if exhaustive and len(fn) > EXHAUSTIVE_MAX_GROUND:
        raise ValueError(f"exhaustive search is limited to {EXHAUSTIVE_MAX_GROUND} elements")

    triples = _all_triples(fn, empty_middle) if exhaustive else _random_triples(
        fn, trials, max_block, seed, empty_middle
    )
    worst: SSAWitness | None = None
    tested = violations = 0
    for first, middle, last in triples:
        witness = evaluate_triple(fn, first, middle, last)
        tested += 1
        violations += witness.violation > SSA_TOL
        if _worse(witness, worst):
            worst = witness

    check = "subadditivity" if empty_middle else "SSA"
    report = AuditReport(check=check, domain_class=fn.name, witness=worst)
    if worst is not None:
        report.rows.append(
            AuditRow(
                label=f"{tested} triples",
                margin=-worst.violation,
                stderr=0.0,
                passed=worst.violation <= SSA_TOL,
                lhs=worst.lhs,
                rhs=worst.rhs,
                detail=f"{violations} violations",
            )
        )
    if violations:
        logger.warning(f"{fn.name}: {violations} of {tested} triples violate {check}")
    return report


def check_normalization(fn: SetFunction) -> AuditReport:
    """s(∅) = 0 and s({mu}) = 0 for every mu."""
    report = AuditReport(check="normalization", domain_class=fn.name)
    for block in [(), *((mu,) for mu in fn.ground)]:
        value = fn(block)
        report.rows.append(
            AuditRow(
                label=f"s({set(block) or '{}'})",
                margin=-abs(value),
                stderr=0.0,
                passed=abs(value) <= SSA_TOL,
                lhs=value,
            )
        )
    return report


def derived_chain_audit(fn: SetFunction, trials: int, seed: int) -> AuditReport:
    """
    Consequences of normalization and strong subadditivity: s is monotone
    non-increasing under inclusion and nonpositive.
    """
    report = AuditReport(check="derived-chain", domain_class=fn.name)
    ground = np.array(fn.ground)
    worst_monotone = worst_sign = -np.inf
    witness = None
    for trial in range(trials):
        rng = generator(seed, STREAM_SSA, 1, trial)
        order = [int(x) for x in rng.permutation(ground)]
        outer = int(rng.integers(1, len(order) + 1))
        inner = int(rng.integers(0, outer + 1))
        small, large = order[:inner], order[:outer]
        gap = fn(large) - fn(small)
        if gap > worst_monotone:
            worst_monotone = gap
            witness = (tuple(sorted(small)), tuple(sorted(large)))
        worst_sign = max(worst_sign, fn(large))

    report.rows.append(
        AuditRow(
            label="monotone",
            margin=-float(worst_monotone),
            stderr=0.0,
            passed=worst_monotone <= SSA_TOL,
            detail=f"worst nested pair {witness}",
        )
    )
    report.rows.append(
        AuditRow(label="nonpositive", margin=-float(worst_sign), stderr=0.0, passed=worst_sign <= SSA_TOL)
    )
    report.witness = witness
    return report


@dataclass(frozen=True)
class PairBound:
    lhs: float
    rhs: float
    passed: bool


def lemmaT_check(fn: SetFunction, P: Sequence[int]) -> PairBound:  # noqa: N802, N803
    """
    Pairwise averaging bound s(P) <= (1 / #P) * sum over ordered mu != nu of s({mu, nu}).

    Raises:
        ValueError: P has fewer than two elements
    """
    members = sorted(set(P))
    if len(members) < 2:
        raise ValueError(f"pairwise bound needs at least two elements, got {members}")
    lhs = fn(members)
    pair_sum = sum(2.0 * fn((a, b)) for a, b in itertools.combinations(members, 2))
    rhs = pair_sum / len(members)
    return PairBound(lhs=lhs, rhs=rhs, passed=lhs <= rhs + SSA_TOL)


def exhaustive_pair_bound(fn: SetFunction, max_size: int = 6) -> AuditReport:
    """lemmaT_check on every subset of size 2..max_size."""
    report = AuditReport(check="pair-bound", domain_class=fn.name)
    worst: tuple[float, tuple[int, ...]] | None = None
    checked = failures = 0
    for size in range(2, min(max_size, len(fn)) + 1):
        for subset in itertools.combinations(fn.ground, size):
            bound = lemmaT_check(fn, subset)
            checked += 1
            failures += not bound.passed
            excess = bound.lhs - bound.rhs
            if worst is None or excess > worst[0]:
                worst = (excess, subset)
    if worst is not None:
        report.rows.append(
            AuditRow(
                label=f"{checked} subsets",
                margin=-worst[0],
                stderr=0.0,
                passed=failures == 0,
                detail=f"{failures} failures",
            )
        )
        report.witness = worst[1]
    return report


# ============== Fixtures ==============


@dataclass
class _GaussianBlocks:
    """Ground elements are blocks of distinct lattice sites."""

    blocks: list[np.ndarray]
    sigma: float
    rho: float
    cache: dict[Block, float] = field(default_factory=dict)

    def entropy(self, block: Block) -> float:
        if block not in self.cache:
            points = np.concatenate([self.blocks[k] for k in sorted(block)]) if block else np.zeros((0, 3))
            self.cache[block] = gaussian_entropy(points, self.sigma, self.rho)
        return self.cache[block]

    def defect(self, block: Block) -> float:
        if len(block) <= 1:
            return 0.0
        return self.entropy(block) - sum(self.entropy(frozenset([k])) for k in sorted(block))


def gaussian_entropy_defect(
    ground_size: int,
    seed: int,
    sites_per_block: int = 2,
    sigma: float = 1.0,
    rho: float = 1e-6,
) -> SetFunction:
    """
    s(P) = H(union of blocks in P) - sum of H(block) for Gaussian field blocks.

    Blocks are disjoint sets of lattice sites drawn without replacement from a
    cube large enough to hold them.
    """
    count = ground_size * sites_per_block
    side = max(3, int(np.ceil(2.0 * count ** (1.0 / 3.0))))
    rng = generator(seed, STREAM_SSA, 2)
    grid = np.stack(
        [g.reshape(-1) for g in np.meshgrid(*[np.arange(side)] * 3, indexing="ij")], axis=1
    ).astype(float)
    chosen = grid[rng.choice(len(grid), size=count, replace=False)]
    blocks = [chosen[k * sites_per_block : (k + 1) * sites_per_block] for k in range(ground_size)]
    state = _GaussianBlocks(blocks=blocks, sigma=sigma, rho=rho)
    return SetFunction(ground=tuple(range(ground_size)), value=state.defect, name="gaussian")


def pairwise_additive(weights: np.ndarray) -> SetFunction:
    """s(P) = sum over ordered mu != nu in P of w(mu, nu) for a symmetric w."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or not np.allclose(w, w.T):
        raise ValueError("pair weights must form a symmetric square matrix")

    def value(block: Block) -> float:
        idx = sorted(block)
        sub = w[np.ix_(idx, idx)]
        return float(sub.sum() - np.trace(sub))

    return SetFunction(ground=tuple(range(len(w))), value=value, name="pairwise")


def random_pairwise_additive(ground_size: int, seed: int) -> SetFunction:
    """Pairwise additive fixture with nonpositive random weights."""
    rng = generator(seed, STREAM_SSA, 3)
    w = -rng.random((ground_size, ground_size))
    return pairwise_additive((w + w.T) / 2.0)


def quadratic_violation(ground_size: int) -> SetFunction:
    """s(P) = #P^2 for #P >= 2: normalized but not strongly subadditive."""

    def value(block: Block) -> float:
        return float(len(block) ** 2) if len(block) >= 2 else 0.0

    return SetFunction(ground=tuple(range(ground_size)), value=value, name="broken-fixture")


@lru_cache
def fixture_names() -> tuple[str, ...]:
    return ("gaussian", "pairwise", "broken-fixture")


def build_fixture(name: str, ground_size: int, seed: int) -> SetFunction:
    """Set function fixture by CLI name."""
    if name == "gaussian":
        return gaussian_entropy_defect(ground_size, seed)
    if name == "pairwise":
        return random_pairwise_additive(ground_size, seed)
    if name == "broken-fixture":
        return quadratic_violation(ground_size)
    raise ValueError(f"unknown set function {name!r}; choose from {', '.join(fixture_names())}")
