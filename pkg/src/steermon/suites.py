"""Randomised checks of the monogamy inequalities over sampled states.

Each suite draws states from a seeded generator, evaluates a fixed set of
reports per state and aggregates the smallest slack per inequality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .discrete import random_pure_state
from .gaussian import random_gaussian_state
from .monogamy import (
    MonogamyReport,
    check_cross_uncertainty,
    check_qubit_group_sums,
    check_R1,
    check_R2,
    check_R3,
    check_R5_R6,
    check_spin_cross_sums,
    max_bell_sum,
)


def _gaussian_cross(seed: int) -> list[MonogamyReport]:
    state = random_gaussian_state(3, seed, max_squeeze=1.5)
    return [check_R1(state, "B", "A", "C"), *check_cross_uncertainty(state, "B", "A", "C")]


def _gaussian_group(seed: int) -> list[MonogamyReport]:
    return check_R5_R6(random_gaussian_state(3, seed, max_squeeze=1.5), "B", "A", "C")


def _qubit3(seed: int) -> list[MonogamyReport]:
    state = random_pure_state(3, seed=seed)
    return [check_R2(state, "B", "A", "C"), *check_qubit_group_sums(state, "B", "A", "C")]


def _qubit4(seed: int) -> list[MonogamyReport]:
    state = random_pure_state(4, seed=seed)
    return [check_R3(state, "B", "A", "C", "D"), *check_spin_cross_sums(state, "B", "A", "C", "D")]


def _bell_grid(seed: int) -> list[MonogamyReport]:
    state = random_pure_state(3, seed=seed)
    value, angles = max_bell_sum(state, "B", "A", "C", grid=8)
    return [MonogamyReport("Bell_sum", value, 4.0, "<=", {f"angle{k}": a for k, a in enumerate(angles)})]


SUITES: dict[str, Callable[[int], list[MonogamyReport]]] = {
    "gaussian_cross": _gaussian_cross,
    "gaussian_group": _gaussian_group,
    "qubit3_pure": _qubit3,
    "qubit4_pure": _qubit4,
    "qubit3_bell_grid": _bell_grid,
}


@dataclass
class SuiteSummary:
    suite: str
    samples: int
    seed: int
    min_slack: dict[str, float] = field(default_factory=dict)
    count: dict[str, int] = field(default_factory=dict)
    violations: dict[str, int] = field(default_factory=dict)
    worst_sample: dict[str, int] = field(default_factory=dict)

    @property
    def all_satisfied(self) -> bool:
        return not any(self.violations.values())

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "samples": self.samples,
            "seed": self.seed,
            "all_satisfied": self.all_satisfied,
            "inequalities": {
                k: {
                    "count": self.count[k],
                    "min_slack": self.min_slack[k],
                    "violations": self.violations[k],
                    "worst_sample": self.worst_sample[k],
                }
                for k in sorted(self.count)
            },
        }


def sample_seeds(seed: int, samples: int) -> list[int]:
    """Per-sample seeds derived from one master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(samples)]


def run_suite(name: str, samples: int, seed: int) -> SuiteSummary:
    """Evaluate suite ``name`` on ``samples`` states drawn from ``seed``."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES)}")
    if samples < 1:
        raise ValueError("samples must be positive")
    fn = SUITES[name]
    out = SuiteSummary(name, int(samples), int(seed))
    for k, s in enumerate(sample_seeds(seed, samples)):
        for rep in fn(s):
            key = rep.inequality_id
            if key not in out.count or rep.slack < out.min_slack[key]:
                out.min_slack[key] = float(rep.slack)
                out.worst_sample[key] = k
            out.count[key] = out.count.get(key, 0) + 1
            out.violations[key] = out.violations.get(key, 0) + (not rep.satisfied)
    return out
