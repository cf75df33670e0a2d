"""Steering and Bell witnesses with thresholds and detection verdicts.

Variance-type witnesses (``E``, ``S2``, ``S3``) detect steering below their
threshold; correlation-type witnesses (``S_tilde_m``, ``CHSH_pair``,
``Bell_CHSH``) detect above it. A measurement direction written as an angle
``theta`` means ``cos(theta) sigma_x + sin(theta) sigma_y`` in the party's
local frame.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .discrete import (
    MultipartyDensityState,
    embed_operator,
    partial_trace,
    pauli,
    resolve_parties,
    spin_of_dim,
    uncertainty_bound,
)
from .gaussian import GaussianState, P, QuadratureObservable, X
from .inference import inf_variance_discrete, inf_variance_gaussian

VARIANCE_KINDS = frozenset({"E", "S2", "S3"})
CORRELATION_KINDS = frozenset({"S_tilde_m", "CHSH_pair", "Bell_CHSH"})
KINDS = VARIANCE_KINDS | CORRELATION_KINDS

# Values within this margin of the threshold do not count as detection, so
# saturating states (E = 1 analytically) are not flagged through rounding.
DETECTION_MARGIN = 1e-9

SQRT2 = float(np.sqrt(2.0))


def detects(kind: str, value: float, threshold: float) -> bool:
    if kind in VARIANCE_KINDS:
        return value < threshold - DETECTION_MARGIN
    if kind in CORRELATION_KINDS:
        return value > threshold + DETECTION_MARGIN
    raise ValueError(f"unknown witness kind {kind!r}")


@dataclass(frozen=True)
class WitnessValue:
    kind: str
    value: float
    threshold: float
    detects_steering: bool
    steered: tuple[str, ...]
    steering_group: tuple[str, ...]
    settings: tuple[Mapping[str, Any], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown witness kind {self.kind!r}")
        if self.kind in VARIANCE_KINDS and self.value < 0:
            raise ValueError(f"variance-type witness must be nonnegative, got {self.value!r}")
        if self.detects_steering != detects(self.kind, self.value, self.threshold):
            raise ValueError("detects_steering flag disagrees with value and threshold")

    @classmethod
    def make(cls, kind, value, threshold, steered, group, settings=()) -> "WitnessValue":
        value, threshold = float(value), float(threshold)
        return cls(kind, value, threshold, detects(kind, value, threshold), tuple(steered), tuple(group), tuple(settings))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "threshold": self.threshold,
            "detects_steering": self.detects_steering,
            "steered": "".join(self.steered),
            "steering_group": "".join(self.steering_group),
            "settings": [dict(s) for s in self.settings],
        }


# --------------------------------------------------------------------------- #
# CV witness
# --------------------------------------------------------------------------- #


def collective_quadratures(state: GaussianState, steered) -> tuple[QuadratureObservable, QuadratureObservable]:
    """Default noncommuting pair for a steered group: ``X`` of its first mode and the sum of its ``P``.

    ``[X_B, P_B + P_C] = 2i``, so the product bound is 1.
    """
    idx = state.modes(steered)
    n = state.n_modes
    u = X(idx[0], n)
    v = np.zeros(2 * n)
    for k in idx:
        v[2 * k + 1] = 1.0
    return u, QuadratureObservable(v)


def epr_E(state: GaussianState, steered, group, quadratures=None) -> WitnessValue:
    """EPR steering parameter ``D_inf u * D_inf v`` with optimal Gaussian inference.

    For a single steered mode ``(u, v) = (X, P)`` and the threshold is 1. For
    a steered group pass ``quadratures=(u, v)``; the threshold is the
    commutator bound ``|u^T Omega v|``.
    """
    s_idx = state.modes(steered)
    g_idx = state.modes(group)
    if set(s_idx) & set(g_idx):
        raise ValueError("steered and steering modes overlap")
    if quadratures is None:
        if len(s_idx) != 1:
            raise ValueError("a steered group needs an explicit quadrature pair")
        u, v = X(s_idx[0], state.n_modes), P(s_idx[0], state.n_modes)
    else:
        u, v = quadratures
    bound = abs(u.commutator(v))
    if bound < 1e-12:
        raise ValueError("quadrature pair commutes; no uncertainty bound")
    du = inf_variance_gaussian(state, s_idx, u, g_idx)
    dv = inf_variance_gaussian(state, s_idx, v, g_idx)
    settings = (
        {"target": u.weights.tolist(), "estimator": du.conditioning.tolist(), "variance": du.variance},
        {"target": v.weights.tolist(), "estimator": dv.conditioning.tolist(), "variance": dv.variance},
    )
    return WitnessValue.make("E", np.sqrt(du.variance * dv.variance), bound, du.steered, du.steering_group, settings)


# --------------------------------------------------------------------------- #
# spin variance witnesses
# --------------------------------------------------------------------------- #


def _spin_witness(kind, state, steered, group, axes, bound, mode, conditioning, method):
    s_idx = resolve_parties(state, steered)
    g_idx = resolve_parties(state, group)
    if len(s_idx) != 1:
        raise ValueError("spin witnesses need a single steered party")
    if set(s_idx) & set(g_idx):
        raise ValueError("steered and steering parties overlap")
    total = 0.0
    settings = []
    for axis in axes:
        cond = None
        if mode == "specified":
            if isinstance(conditioning, Mapping):
                cond = conditioning[axis]
            elif conditioning is not None:
                raise ValueError("conditioning must map each axis to a group observable")
            elif len(g_idx) == 1:
                cond = axis
            else:
                raise ValueError("specified mode on a group needs explicit conditioning observables")
        res = inf_variance_discrete(state, s_idx, axis, g_idx, mode, cond, method=method)
        total += res.variance
        settings.append({"axis": axis, "mode": mode, "variance": res.variance})
    steered_l = tuple(state.labels[k] for k in s_idx)
    group_l = tuple(state.labels[k] for k in g_idx)
    return WitnessValue.make(kind, total / bound, 1.0, steered_l, group_l, settings)


def s2(state: MultipartyDensityState, steered, group, mode: str = "specified", axes=("x", "y"),
       conditioning=None, method: str = "sld") -> WitnessValue:
    """Two-setting spin steering parameter ``[var_inf J^a + var_inf J^b] / C_J``.

    In specified mode a single-party group measures the same spin axis as
    the target; a multi-party group needs ``conditioning={axis: observable}``.
    """
    if len(axes) != 2:
        raise ValueError("S2 needs exactly two axes")
    J = spin_of_dim(state.party_dims[resolve_parties(state, steered)[0]])
    return _spin_witness("S2", state, steered, group, axes, uncertainty_bound(J, 2), mode, conditioning, method)


def s3(state: MultipartyDensityState, steered, group, mode: str = "specified",
       conditioning=None, method: str = "sld") -> WitnessValue:
    """Three-setting spin steering parameter ``[var_inf J^x + var_inf J^y + var_inf J^z] / J``."""
    J = spin_of_dim(state.party_dims[resolve_parties(state, steered)[0]])
    return _spin_witness("S3", state, steered, group, ("x", "y", "z"), uncertainty_bound(J, 3), mode, conditioning, method)


# --------------------------------------------------------------------------- #
# correlation witnesses
# --------------------------------------------------------------------------- #


def correlation_tensor(state: MultipartyDensityState, party_b, party_a) -> np.ndarray:
    """``T[i, j] = <sigma_i^B sigma_j^A>`` for ``i, j`` in ``x, y, z``."""
    b = resolve_parties(state, party_b)
    a = resolve_parties(state, party_a)
    if len(a) != 1 or len(b) != 1:
        raise ValueError("correlation witnesses need single parties")
    if b == a:
        raise ValueError("correlation needs two distinct parties")
    for k in a + b:
        if state.party_dims[k] != 2:
            raise ValueError("correlation witnesses need qubit parties")
    pair = partial_trace(state, sorted(a + b))
    lb, la = state.labels[b[0]], state.labels[a[0]]
    sig = [pauli(ax) for ax in "xyz"]
    t = np.empty((3, 3))
    for i in range(3):
        ob = embed_operator(pair, sig[i], [lb])
        for j in range(3):
            t[i, j] = pair.expectation(ob @ embed_operator(pair, sig[j], [la]))
    return t


def _plane(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def moment(state, party_b, theta_b: float, party_a, theta_a: float) -> float:
    """``<sigma_B(theta_b) sigma_A(theta_a)>``."""
    t = correlation_tensor(state, party_b, party_a)[:2, :2]
    return float(_plane(theta_b) @ t @ _plane(theta_a))


def _plane_moments(t2: np.ndarray, tb, ta) -> np.ndarray:
    """Vectorised in-plane moments for broadcastable angle arrays."""
    return np.einsum("...i,ij,...j->...", _plane(tb), t2, _plane(ta))


def chsh_moment_settings(primed=(0.0, np.pi / 2), unprimed=(0.0, np.pi / 2), which: int = 1):
    """Settings ``(c_j, theta_j, theta_pj)`` of the two built-in two-setting correlation inequalities.

    ``which=1``: ``<B^X A^X'> - <B^Y A^Y'>``; ``which=2``: ``<B^X A^Y'> + <B^Y A^X'>``.
    Both have ``C_2 = sqrt(2)``.
    """
    (tx, ty), (px, py) = unprimed, primed
    if which == 1:
        return [(1.0, tx, px), (-1.0, ty, py)]
    if which == 2:
        return [(1.0, tx, py), (1.0, ty, px)]
    raise ValueError("which must be 1 or 2")


def s_tilde_m(state: MultipartyDensityState, steered, group, settings: Sequence[tuple[float, float, float]],
              C_m: float = SQRT2) -> WitnessValue:
    """``(1/C_m) sum_j c_j <sigma_B(theta_j) sigma_A(theta_pj)>``; detects when above 1."""
    if C_m <= 0:
        raise ValueError(f"C_m must be positive, got {C_m!r}")
    settings = [tuple(s) for s in settings]
    if not settings or any(len(s) != 3 or abs(abs(s[0]) - 1) > 1e-12 for s in settings):
        raise ValueError("settings must be (c_j, theta_j, theta_pj) triples with |c_j| = 1")
    t2 = correlation_tensor(state, steered, group)[:2, :2]
    total = sum(c * float(_plane_moments(t2, tb, ta)) for c, tb, ta in settings)
    spec = [{"c": float(c), "theta": float(tb), "theta_p": float(ta)} for c, tb, ta in settings]
    spec.append({"C_m": float(C_m)})
    return WitnessValue.make("S_tilde_m", total / C_m, 1.0, _label(state, steered), _label(state, group), spec)


def _label(state, party) -> tuple[str, ...]:
    return tuple(state.labels[k] for k in resolve_parties(state, party))


def _pair_values(t2, unprimed, primed):
    (tx, ty), (px, py) = unprimed, primed
    v1 = _plane_moments(t2, tx, px) - _plane_moments(t2, ty, py)
    v2 = _plane_moments(t2, tx, py) + _plane_moments(t2, ty, px)
    return v1, v2


def maximize_angles(fn: Callable[[np.ndarray], np.ndarray], n_angles: int, grid: int = 12, n_refine: int = 3):
    """Maximise a vectorised function of ``n_angles`` angles: full grid, then Nelder-Mead refinement.

    ``fn`` receives an array of shape ``(..., n_angles)``. Returns
    ``(best_value, best_angles)``; ties resolve to the lowest grid index.
    """
    axis = np.linspace(0, 2 * np.pi, grid, endpoint=False)
    pts = np.stack(np.meshgrid(*([axis] * n_angles), indexing="ij"), axis=-1).reshape(-1, n_angles)
    vals = fn(pts)
    order = np.argsort(-vals, kind="stable")
    best_i = int(order[0])
    best, best_x = float(vals[best_i]), pts[best_i]
    for k in order[:n_refine]:
        res = minimize(lambda x: -float(fn(x[None, :])[0]), pts[k], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 5000})
        if -res.fun > best:
            best, best_x = float(-res.fun), res.x
    return best, np.mod(best_x, 2 * np.pi)


def chsh_pair_steering(state: MultipartyDensityState, steered, group, primed_angles=(0.0, np.pi / 2),
                       unprimed_angles=(0.0, np.pi / 2), optimize: bool = False) -> tuple[WitnessValue, WitnessValue]:
    """The two two-setting correlation steering witnesses, each with threshold ``sqrt(2)``.

    With ``optimize=True`` the primed (steering-side) angles are chosen
    separately for each witness to maximise it.
    """
    t2 = correlation_tensor(state, steered, group)[:2, :2]
    s, g = _label(state, steered), _label(state, group)
    out = []
    for which in (1, 2):
        primed = tuple(primed_angles)
        if optimize:
            _, primed = maximize_angles(lambda x: _pair_values(t2, unprimed_angles, (x[..., 0], x[..., 1]))[which - 1], 2)
            primed = tuple(float(a) for a in primed)
        value = float(_pair_values(t2, unprimed_angles, primed)[which - 1])
        spec = [{"which": which, "unprimed": [float(a) for a in unprimed_angles], "primed": [float(a) for a in primed]}]
        out.append(WitnessValue.make("CHSH_pair", value, SQRT2, s, g, spec))
    return out[0], out[1]


def bell_value(t2: np.ndarray, angles) -> np.ndarray:
    """CHSH combination for angle arrays ``(..., 4)`` = ``(X, Y, X', Y')``."""
    a = np.asarray(angles, dtype=float)
    tx, ty, px, py = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    return (_plane_moments(t2, tx, px) - _plane_moments(t2, ty, py)
            + _plane_moments(t2, tx, py) + _plane_moments(t2, ty, px))


def bell_chsh(state: MultipartyDensityState, steered, group, angles=(0.0, np.pi / 2, np.pi / 4, -np.pi / 4),
              optimize: bool = False, grid: int = 12) -> WitnessValue:
    """Bell-CHSH value ``<XX'> - <YY'> + <XY'> + <YX'>`` with threshold 2.

    ``angles`` are ``(theta_X, theta_Y)`` on the steered party followed by
    ``(theta_X', theta_Y')`` on the other. ``optimize=True`` maximises over
    all four angles.
    """
    t2 = correlation_tensor(state, steered, group)[:2, :2]
    if optimize:
        _, angles = maximize_angles(lambda x: bell_value(t2, x), 4, grid=grid)
    angles = [float(a) for a in angles]
    if len(angles) != 4:
        raise ValueError("Bell-CHSH needs four angles")
    value = float(bell_value(t2, angles))
    return WitnessValue.make("Bell_CHSH", value, 2.0, _label(state, steered), _label(state, group),
                             [{"angles": angles}])


def angle_grid(n: int, n_angles: int) -> np.ndarray:
    axis = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.array(list(itertools.product(axis, repeat=n_angles)))
