"""Simulated-user experiment harness.

Reproduces the evaluation protocol with synthetic users: a 2x2 matrix of
updater (LE/OP) x selector (EE/RS) strategies, training lengths T in
{5, 10, 15}, a ten-pair testing phase scored as prediction accuracy, entropy
trajectories, and per-iteration engine timings.  Also hosts the
acceptance-rate metrics used for recommender A/B comparison.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .catalog import EmbeddingSet, NeighborIndex
from .elicitation import (
    Elicitor,
    Phase,
    Presentation,
    Selector,
    StrategyConfig,
    Updater,
    bottom_fraction,
    entropy,
    top_fraction,
)
from .errors import EmptyRecommendation, LengthMismatch

ALL_STRATEGIES = ("LE+EE", "LE+RS", "OP+EE", "OP+RS")
REPORT_VERSION = 1


def strategy_config(name: str, beta: float | None = None, seed: int = 0) -> StrategyConfig:
    updater, selector = name.split("+")
    return StrategyConfig(
        updater=Updater(updater), selector=Selector(selector), beta=beta, rng_seed=seed
    )


@dataclass
class SimulatedUser:
    prototype: np.ndarray       # unit vector in embedding space
    temperature: float = 0.1
    rng_seed: int = 0
    yuck_quantile: float = 0.10

    def utilities(self, embeddings: EmbeddingSet) -> np.ndarray:
        X = embeddings.vectors.astype(np.float64)
        return -np.linalg.norm(X - self.prototype, axis=1)


def make_user(
    embeddings: EmbeddingSet,
    rng: np.random.Generator,
    temperature: float = 0.1,
) -> SimulatedUser:
    """Prototype = random convex combination of three item embeddings."""
    X = embeddings.vectors.astype(np.float64)
    picks = rng.choice(X.shape[0], size=3, replace=False)
    weights = rng.dirichlet(np.ones(3))
    proto = weights @ X[picks]
    proto /= np.linalg.norm(proto)
    return SimulatedUser(
        prototype=proto,
        temperature=temperature,
        rng_seed=int(rng.integers(2**31)),
    )


def simulate_choice(
    user: SimulatedUser,
    presentation: Presentation,
    utilities: np.ndarray,
    rng: np.random.Generator,
    yuck_threshold: float | None = None,
) -> tuple[int, ...]:
    items = presentation.items
    utils = utilities[list(items)]
    if presentation.phase is Phase.GRID10:
        median = float(np.median(utils))
        noisy = utils + user.temperature * rng.gumbel(size=len(items))
        return tuple(i for i, v in zip(items, noisy) if v > median)

    a, b = items
    ua, ub = float(utilities[a]), float(utilities[b])
    if yuck_threshold is not None and ua < yuck_threshold and ub < yuck_threshold:
        return ()
    if user.temperature == 0:
        if ua == ub:
            return (min(a, b),)
        return (a,) if ua > ub else (b,)
    p_a = 1.0 / (1.0 + np.exp(-(ua - ub) / user.temperature))
    return (a,) if rng.random() < p_a else (b,)


@dataclass
class SessionResult:
    accuracy: float
    entropies: list[float]        # index 0 = before any interaction
    timings_ms: list[float]       # engine time per iteration (select + update)
    explored_count: int


def run_session(
    user: SimulatedUser,
    config: StrategyConfig,
    T: int,
    embeddings: EmbeddingSet,
    index: NeighborIndex,
    session_seed: int = 0,
    test_pairs: int = 10,
    fraction: float = 0.01,
) -> SessionResult:
    elicitor = Elicitor(embeddings, index, config)
    state = elicitor.new_state()
    rng = np.random.default_rng(session_seed)
    user_rng = np.random.default_rng(user.rng_seed)
    utilities = user.utilities(embeddings)
    yuck = float(np.quantile(utilities, user.yuck_quantile))

    entropies = [entropy(state.p)]
    timings = []
    for t in range(1, T + 1):
        t0 = time.perf_counter()
        presentation = elicitor.next_presentation(state, t, rng)
        t1 = time.perf_counter()
        selected = simulate_choice(user, presentation, utilities, user_rng, yuck_threshold=yuck)
        t2 = time.perf_counter()
        elicitor.apply_choices(state, presentation.items, selected)
        t3 = time.perf_counter()
        timings.append(((t1 - t0) + (t3 - t2)) * 1000.0)
        entropies.append(entropy(state.p))

    accuracy = _testing_phase(
        elicitor, state, utilities, user, user_rng, test_pairs, fraction
    )
    return SessionResult(
        accuracy=accuracy,
        entropies=entropies,
        timings_ms=timings,
        explored_count=int(state.explored.sum()),
    )


def _testing_phase(elicitor, state, utilities, user, rng, test_pairs, fraction) -> float:
    scores = elicitor.scores(state)
    top = top_fraction(scores, fraction)
    bottom = bottom_fraction(scores, fraction)
    unexplored = np.nonzero(~state.explored)[0]
    top_pool = np.intersect1d(top, unexplored)
    if top_pool.size == 0:
        top_pool = top
    bottom_pool = np.intersect1d(bottom, unexplored)
    if bottom_pool.size == 0:
        bottom_pool = bottom

    correct = 0
    for _ in range(test_pairs):
        a = int(rng.choice(top_pool))
        b = int(rng.choice(bottom_pool))
        if a == b and bottom_pool.size > 1:
            while b == a:
                b = int(rng.choice(bottom_pool))
        presentation = Presentation(items=(a, b), phase=Phase.PAIR) if a != b else None
        if presentation is None:
            correct += 0  # degenerate overlap: cannot distinguish
            continue
        picked = simulate_choice(user, presentation, utilities, rng)
        if picked == (a,):
            correct += 1
    return correct / test_pairs


@dataclass
class ExperimentConfig:
    strategies: tuple[str, ...] = ALL_STRATEGIES
    T_values: tuple[int, ...] = (5, 10, 15)
    users_per_cell: int = 50
    test_pairs: int = 10
    fraction: float = 0.01
    temperature: float = 0.1
    beta: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.users_per_cell < 1:
            raise ValueError("users_per_cell must be >= 1")
        if self.test_pairs < 1:
            raise ValueError("test_pairs must be >= 1")
        for s in self.strategies:
            if s not in ALL_STRATEGIES:
                raise ValueError(f"unknown strategy {s!r}")


@dataclass
class CellResult:
    strategy: str
    T: int
    accuracies: list[float]
    entropy_trajectories: list[list[float]]
    timings_ms: list[float]
    explored_counts: list[int]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def sem_accuracy(self) -> float:
        if len(self.accuracies) < 2:
            return 0.0
        return float(np.std(self.accuracies, ddof=1) / np.sqrt(len(self.accuracies)))

    def mean_entropy_trajectory(self) -> list[float]:
        return [float(v) for v in np.mean(self.entropy_trajectories, axis=0)]


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: dict[tuple[str, int], CellResult] = field(default_factory=dict)

    def cell(self, strategy: str, T: int) -> CellResult:
        return self.cells[(strategy, T)]

    def to_dict(self) -> dict:
        return {
            "version": REPORT_VERSION,
            "config": {
                "strategies": list(self.config.strategies),
                "T_values": list(self.config.T_values),
                "users_per_cell": self.config.users_per_cell,
                "test_pairs": self.config.test_pairs,
                "fraction": self.config.fraction,
                "temperature": self.config.temperature,
                "beta": self.config.beta,
                "seed": self.config.seed,
            },
            "cells": [
                {
                    "strategy": c.strategy,
                    "T": c.T,
                    "accuracies": c.accuracies,
                    "mean_accuracy": c.mean_accuracy,
                    "sem_accuracy": c.sem_accuracy,
                    "entropy_trajectories": c.entropy_trajectories,
                    "timings_ms": c.timings_ms,
                    "explored_counts": c.explored_counts,
                }
                for c in self.cells.values()
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentReport":
        cfg = doc["config"]
        config = ExperimentConfig(
            strategies=tuple(cfg["strategies"]),
            T_values=tuple(cfg["T_values"]),
            users_per_cell=cfg["users_per_cell"],
            test_pairs=cfg["test_pairs"],
            fraction=cfg["fraction"],
            temperature=cfg["temperature"],
            beta=cfg["beta"],
            seed=cfg["seed"],
        )
        report = cls(config=config)
        for c in doc["cells"]:
            report.cells[(c["strategy"], c["T"])] = CellResult(
                strategy=c["strategy"],
                T=c["T"],
                accuracies=c["accuracies"],
                entropy_trajectories=c["entropy_trajectories"],
                timings_ms=c["timings_ms"],
                explored_counts=c["explored_counts"],
            )
        return report


def _session_seed(base: int, strategy: str, T: int, user_idx: int) -> int:
    seq = np.random.SeedSequence([base, 1, ALL_STRATEGIES.index(strategy), T, user_idx])
    return int(seq.generate_state(1)[0])


def run_experiment(
    config: ExperimentConfig,
    embeddings: EmbeddingSet,
    index: NeighborIndex,
) -> ExperimentReport:
    """Users are shared across cells (same prototypes) so cell comparisons can
    be paired; each session owns an independent RNG stream."""
    users = []
    for u in range(config.users_per_cell):
        user_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0, u]))
        users.append(make_user(embeddings, user_rng, temperature=config.temperature))

    report = ExperimentReport(config=config)
    for strategy in config.strategies:
        for T in config.T_values:
            cell = CellResult(
                strategy=strategy, T=T, accuracies=[], entropy_trajectories=[],
                timings_ms=[], explored_counts=[],
            )
            cfg = strategy_config(strategy, beta=config.beta)
            for u, user in enumerate(users):
                result = run_session(
                    user, cfg, T, embeddings, index,
                    session_seed=_session_seed(config.seed, strategy, T, u),
                    test_pairs=config.test_pairs,
                    fraction=config.fraction,
                )
                cell.accuracies.append(result.accuracy)
                cell.entropy_trajectories.append(result.entropies)
                cell.timings_ms.extend(result.timings_ms)
                cell.explored_counts.append(result.explored_count)
            report.cells[(strategy, T)] = cell
    return report


def acceptance_metrics(accepted, recommended: int) -> tuple[float, float, float]:
    """(acceptance rate, MAE, RMSE) treating acceptance as a binary prediction."""
    if recommended < 1:
        raise EmptyRecommendation("at least one recommendation is required")
    accepted = [bool(a) for a in accepted]
    if len(accepted) != recommended:
        raise LengthMismatch(
            f"{len(accepted)} verdicts for {recommended} recommendations"
        )
    rate = sum(accepted) / recommended
    return rate, 1.0 - rate, float(np.sqrt(1.0 - rate))


@dataclass(frozen=True)
class PairedComparison:
    mean_difference: float
    statistic: float
    p_value: float
    relative_improvement: float
    degenerate_variance: bool


def paired_comparison(rates_a, rates_b) -> PairedComparison:
    a = np.asarray(rates_a, dtype=np.float64)
    b = np.asarray(rates_b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"length mismatch: {a.shape} vs {b.shape}")
    diffs = a - b
    mean_diff = float(diffs.mean())
    mean_b = float(b.mean())
    rel = mean_diff / mean_b if mean_b != 0 else float("nan")
    if np.allclose(diffs.std(ddof=0), 0.0):
        # zero-variance differences: t statistic is undefined
        if mean_diff == 0.0:
            return PairedComparison(0.0, 0.0, 1.0, rel, True)
        return PairedComparison(mean_diff, float("inf"), 0.0, rel, True)
    t_stat, p_value = stats.ttest_rel(a, b)
    return PairedComparison(mean_diff, float(t_stat), float(p_value), rel, False)
