"""Steering monogamy inequalities evaluated on concrete states.

Every report carries a signed ``slack`` that is positive when the
inequality holds with margin, whichever direction the inequality points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .discrete import MultipartyDensityState, resolve_parties, spin_of_dim
from .gaussian import GaussianState, P, X
from .inference import cross_conditioned_variance_sum, group_inference_product
from .witnesses import (
    SQRT2,
    WitnessValue,
    _pair_values,
    bell_value,
    correlation_tensor,
    epr_E,
    maximize_angles,
    s2,
    s3,
    s_tilde_m,
)

SATISFIED_TOL = 1e-9
TIGHT_TOL = 1e-6

INEQUALITY_IDS = (
    "R1_product",
    "R2_sum2",
    "R3_sum3",
    "R4_msum",
    "CHSH_moment_pair",
    "Bell_sum",
    "R5_product_group",
    "R6_sum_group",
    "R6_square_sum",
    "combined_max_CV",
    "combined_max_S2",
    "combined_max_S3",
    "S3_group_sum",
    "cross_uncertainty_XP",
    "cross_uncertainty_PX",
    "spin_cross_sum",
)


@dataclass(frozen=True)
class MonogamyReport:
    """One evaluated inequality ``lhs >= rhs`` (``direction=">="``) or ``lhs <= rhs``."""

    inequality_id: str
    lhs: float
    rhs: float
    direction: str
    inputs: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.inequality_id not in INEQUALITY_IDS:
            raise ValueError(f"unknown inequality id {self.inequality_id!r}")
        if self.direction not in (">=", "<="):
            raise ValueError(f"direction must be '>=' or '<=', got {self.direction!r}")

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs if self.direction == ">=" else self.rhs - self.lhs

    @property
    def satisfied(self) -> bool:
        return self.slack >= -SATISFIED_TOL

    @property
    def tight(self) -> bool:
        return abs(self.slack) < TIGHT_TOL

    def to_dict(self) -> dict:
        return {
            "inequality_id": self.inequality_id,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "direction": self.direction,
            "slack": self.slack,
            "satisfied": self.satisfied,
            "tight": self.tight,
            "inputs": {k: float(v) for k, v in self.inputs.items()},
        }


def _disjoint_modes(state: GaussianState, *groups) -> list[tuple[int, ...]]:
    idx = [state.modes(g) for g in groups]
    flat = [k for g in idx for k in g]
    if len(flat) != len(set(flat)):
        raise ValueError("mode groups must be pairwise disjoint")
    return idx


def _disjoint_parties(state: MultipartyDensityState, *groups) -> list[tuple[int, ...]]:
    idx = [resolve_parties(state, g) for g in groups]
    flat = [k for g in idx for k in g]
    if len(flat) != len(set(flat)):
        raise ValueError("party groups must be pairwise disjoint")
    return idx


def _key(kind: str, steered, group) -> str:
    return f"{kind}[{''.join(steered)}|{''.join(group)}]"


def _wkey(w: WitnessValue) -> str:
    return _key(w.kind, w.steered, w.steering_group)


# --------------------------------------------------------------------------- #
# CV inequalities
# --------------------------------------------------------------------------- #


def check_R1(state: GaussianState, B, A, C) -> MonogamyReport:
    """``E_{B|A} E_{B|C} >= 1``."""
    _disjoint_modes(state, B, A, C)
    e_a, e_c = epr_E(state, B, A), epr_E(state, B, C)
    return MonogamyReport("R1_product", e_a.value * e_c.value, 1.0, ">=", {_wkey(e_a): e_a.value, _wkey(e_c): e_c.value})


def check_cross_uncertainty(state: GaussianState, B, A, C) -> list[MonogamyReport]:
    """Products of inference deviations with the two quadratures inferred from different modes.

    Both ``D_inf(X_B|A) D_inf(P_B|C)`` and ``D_inf(P_B|A) D_inf(X_B|C)`` are
    bounded below by 1; multiplying them gives the R1 product bound.
    Requires a single steered mode.
    """
    b, _, _ = _disjoint_modes(state, B, A, C)
    if len(b) != 1:
        raise ValueError("cross uncertainty relations need exactly one steered mode")
    n = state.n_modes
    xb, pb = X(b[0], n), P(b[0], n)
    xp = group_inference_product(state, b, (xb, A), (pb, C))
    px = group_inference_product(state, b, (pb, A), (xb, C))
    return [
        MonogamyReport("cross_uncertainty_XP", xp, 1.0, ">="),
        MonogamyReport("cross_uncertainty_PX", px, 1.0, ">="),
    ]


def check_R5_R6(state: GaussianState, B, A, C) -> list[MonogamyReport]:
    """Group-dominance relations between ``E_{B|A}``, ``E_{B|C}`` and ``E_{B|AC}``."""
    b, a, c = _disjoint_modes(state, B, A, C)
    e_a, e_c = epr_E(state, b, a), epr_E(state, b, c)
    e_g = epr_E(state, b, tuple(sorted(a + c)))
    ea, ec, eg = e_a.value, e_c.value, e_g.value
    inputs = {_wkey(e_a): ea, _wkey(e_c): ec, _wkey(e_g): eg}
    return [
        MonogamyReport("R5_product_group", ea * ec, eg**2, ">=", inputs),
        MonogamyReport("R6_sum_group", ea + ec, 2 * eg, ">=", inputs),
        MonogamyReport("R6_square_sum", ea**2 + ec**2, 2 * eg**2, ">=", inputs),
        MonogamyReport("combined_max_CV", ea * ec, max(1.0, eg**2), ">=", inputs),
    ]


# --------------------------------------------------------------------------- #
# spin variance inequalities
# --------------------------------------------------------------------------- #


def check_R2(state: MultipartyDensityState, B, A, C, witness_mode: str = "optimized") -> MonogamyReport:
    """``S2_{B|A} + S2_{B|C} >= 2``."""
    _disjoint_parties(state, B, A, C)
    w1, w2 = s2(state, B, A, witness_mode), s2(state, B, C, witness_mode)
    return MonogamyReport("R2_sum2", w1.value + w2.value, 2.0, ">=", {_wkey(w1): w1.value, _wkey(w2): w2.value})


def check_R3(state: MultipartyDensityState, B, A, C, D, witness_mode: str = "optimized") -> MonogamyReport:
    """``S3_{B|A} + S3_{B|C} + S3_{B|D} >= 3``."""
    _disjoint_parties(state, B, A, C, D)
    ws = [s3(state, B, g, witness_mode) for g in (A, C, D)]
    return MonogamyReport("R3_sum3", sum(w.value for w in ws), 3.0, ">=", {_wkey(w): w.value for w in ws})


def check_spin_cross_sums(state: MultipartyDensityState, B, A, C, D, mode: str = "optimized") -> list[MonogamyReport]:
    """Cyclic sums of three spin inference variances, each inferred from a different party.

    Each of the three cyclic assignments of ``(x, y, z)`` to ``(A, C, D)`` is
    bounded below by the spin ``J`` of ``B``; adding them gives the R3 bound.
    """
    b, _, _, _ = _disjoint_parties(state, B, A, C, D)
    if len(b) != 1:
        raise ValueError("spin cross sums need exactly one steered party")
    J = spin_of_dim(state.party_dims[b[0]])
    reports = []
    for axes in (("x", "y", "z"), ("y", "z", "x"), ("z", "x", "y")):
        assign = list(zip(axes, (A, C, D)))
        total = cross_conditioned_variance_sum(state, B, assign, mode)
        key = ",".join(f"{t}|{g}" for t, g in assign)
        reports.append(MonogamyReport("spin_cross_sum", total, J, ">=", {key: total}))
    return reports


def check_qubit_group_sums(state: MultipartyDensityState, B, A, C, D=None, pair_mode: str = "optimized") -> list[MonogamyReport]:
    """Sharing relations between pairwise and group spin steering parameters.

    Pairwise witnesses use ``pair_mode``; group witnesses always use the
    optimised joint measurement on the group.
    """
    groups = (B, A, C) if D is None else (B, A, C, D)
    _disjoint_parties(state, *groups)
    ac = resolve_parties(state, A) + resolve_parties(state, C)
    s2a, s2c = s2(state, B, A, pair_mode), s2(state, B, C, pair_mode)
    s2g = s2(state, B, ac, "optimized")
    s3a, s3c = s3(state, B, A, pair_mode), s3(state, B, C, pair_mode)
    s3g = s3(state, B, ac, "optimized")
    reports = [
        MonogamyReport("combined_max_S2", s2a.value + s2c.value, max(2.0, 2 * s2g.value), ">=",
                       {_wkey(w): w.value for w in (s2a, s2c, s2g)}),
        MonogamyReport("S3_group_sum", s3a.value + s3c.value, 2 * s3g.value, ">=",
                       {_wkey(w): w.value for w in (s3a, s3c, s3g)}),
    ]
    if D is not None:
        s3d = s3(state, B, D, pair_mode)
        acd = ac + resolve_parties(state, D)
        s3gg = s3(state, B, acd, "optimized")
        reports.append(MonogamyReport("combined_max_S3", s3a.value + s3c.value + s3d.value, max(3.0, 3 * s3gg.value), ">=",
                                      {_wkey(w): w.value for w in (s3a, s3c, s3d, s3gg)}))
    return reports


# --------------------------------------------------------------------------- #
# correlation inequalities
# --------------------------------------------------------------------------- #


def check_R4(state: MultipartyDensityState, B, groups: Sequence, settings, C_m: float = SQRT2) -> MonogamyReport:
    """``sum_k S_tilde^(m)_{B|A_k} <= m`` for ``m = len(groups)`` steering parties.

    ``settings`` is either one list of ``(c_j, theta_j, theta_pj)`` used for
    every group, or a list of such lists, one per group.
    """
    m = len(groups)
    if m < 1:
        raise ValueError("need at least one steering group")
    _disjoint_parties(state, B, *groups)
    per_group = settings if settings and isinstance(settings[0][0], (list, tuple)) else [settings] * m
    if len(per_group) != m:
        raise ValueError("one settings list per group is required")
    ws = [s_tilde_m(state, B, g, st, C_m) for g, st in zip(groups, per_group)]
    return MonogamyReport("R4_msum", sum(w.value for w in ws), float(m), "<=", {_wkey(w): w.value for w in ws})


def check_chsh_moment_pair(state: MultipartyDensityState, B, A, C, primed_A=(0.0, np.pi / 2), primed_C=None,
                           unprimed=(0.0, np.pi / 2), which: int = 1) -> MonogamyReport:
    """Sum of one two-setting correlation witness over two steering parties, ``<= 2 sqrt(2)``."""
    _disjoint_parties(state, B, A, C)
    primed_C = primed_A if primed_C is None else primed_C
    va = float(_pair_values(correlation_tensor(state, B, A)[:2, :2], unprimed, primed_A)[which - 1])
    vc = float(_pair_values(correlation_tensor(state, B, C)[:2, :2], unprimed, primed_C)[which - 1])
    inputs = {f"CHSH_pair{which}[{B}|{A}]": va, f"CHSH_pair{which}[{B}|{C}]": vc}
    return MonogamyReport("CHSH_moment_pair", va + vc, 2 * SQRT2, "<=", inputs)


def check_bell_sum(state: MultipartyDensityState, B, A, C, angles=(0.0, np.pi / 2, np.pi / 4, -np.pi / 4),
                   angles_C=None) -> MonogamyReport:
    """``S_Bell_{B|A} + S_Bell_{B|C} <= 4`` at one fixed assignment of settings.

    ``angles`` are ``(X, Y, X', Y')`` with ``X, Y`` on ``B``; ``angles_C``
    optionally gives different primed angles ``(X', Y')`` for ``C``.
    """
    _disjoint_parties(state, B, A, C)
    angles = [float(a) for a in angles]
    ang_c = angles if angles_C is None else angles[:2] + [float(a) for a in angles_C]
    va = float(bell_value(correlation_tensor(state, B, A)[:2, :2], angles))
    vc = float(bell_value(correlation_tensor(state, B, C)[:2, :2], ang_c))
    return MonogamyReport("Bell_sum", va + vc, 4.0, "<=", {f"Bell_CHSH[{B}|{A}]": va, f"Bell_CHSH[{B}|{C}]": vc})


def max_bell_sum(state: MultipartyDensityState, B, A, C, grid: int = 8, refine: bool = False) -> tuple[float, np.ndarray]:
    """Largest Bell sum over a shared four-angle grid (optionally refined); returns ``(value, angles)``."""
    ta = correlation_tensor(state, B, A)[:2, :2]
    tc = correlation_tensor(state, B, C)[:2, :2]

    def fn(x):
        return bell_value(ta, x) + bell_value(tc, x)

    if refine:
        return maximize_angles(fn, 4, grid=grid)
    axis = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    pts = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 4)
    vals = fn(pts)
    k = int(np.argmax(vals))
    return float(vals[k]), pts[k]
