"""Inference (average conditional) variances of a steered observable.

For a measurement with outcomes ``a_i`` on the steering group ``G``::

    var_inf(T | G) = sum_i P(a_i) Var(T | a_i)

Discrete states support a user-specified projective measurement or an
optimised one. The default optimiser is exact: the measurement maximising
``sum_i Tr(Pi_i M)^2 / Tr(Pi_i rho_G)`` with ``M = Tr_B[(1 x T) rho_GB]``
projects onto the eigenbasis of the symmetric logarithmic derivative ``L``
solving ``(rho_G L + L rho_G) / 2 = M``, which gives
``var_inf = <T^2> - Tr(rho_G L^2)``. A derivative-free search over
projective measurements is also available (``method="search"``).

Gaussian states use the Schur complement of the covariance matrix, the
residual variance of the best linear estimator built from the group's
quadratures.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Any, Sequence

import numpy as np
from scipy.optimize import minimize

from .discrete import (
    ARITH_TOL,
    MultipartyDensityState,
    SpinObservable,
    _as_group_matrix,
    _hermitize,
    measure_projective,
    partial_trace,
    pauli,
    resolve_parties,
    spin_matrices,
    spin_of_dim,
)
from .gaussian import GaussianState, QuadratureObservable, quadrature_indices

MODES = ("specified", "optimized")


@dataclass(frozen=True)
class InferenceResult:
    """An inference variance with the measurement that produced it.

    ``conditioning`` is the Hermitian observable measured on the group for
    discrete states, or the linear-estimator weights (length ``2n``) for
    Gaussian states.
    """

    variance: float
    steered: tuple[str, ...]
    steering_group: tuple[str, ...]
    target: Any
    conditioning: Any
    mode: str

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"inference variance must be nonnegative, got {self.variance!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


# --------------------------------------------------------------------------- #
# discrete
# --------------------------------------------------------------------------- #


def _target_matrix(state: MultipartyDensityState, steered: tuple[int, ...], target) -> np.ndarray:
    if isinstance(target, str):
        if len(steered) != 1:
            raise ValueError("axis shorthand needs a single steered party")
        return spin_matrices(spin_of_dim(state.party_dims[steered[0]]), target)
    return _as_group_matrix(state, steered, target)


def _group_steered_block(state: MultipartyDensityState, group: tuple[int, ...], steered: tuple[int, ...]):
    """Reduced state on ``group + steered`` reshaped as ``(dG, dB, dG, dB)``."""
    joint = partial_trace(state, sorted(group + steered))
    order = [joint.labels.index(state.labels[k]) for k in group + steered]
    n = joint.n_parties
    t = joint.matrix.reshape(joint.party_dims * 2).transpose(order + [n + k for k in order])
    dg = prod(state.party_dims[k] for k in group)
    db = prod(state.party_dims[k] for k in steered)
    return t.reshape(dg, db, dg, db)


def _conditional_variance(state, group, steered, target_m, cond_m) -> float:
    joint = partial_trace(state, sorted(group + steered))
    ens = measure_projective(joint, [state.labels[k] for k in group], cond_m)
    t2 = target_m @ target_m
    total = 0.0
    for e in ens:
        rho = e.state.matrix
        mean = np.einsum("ij,ji->", rho, target_m).real
        sq = np.einsum("ij,ji->", rho, t2).real
        total += e.probability * (sq - mean**2)
    return max(float(total), 0.0)


def symmetric_log_derivative(rho: np.ndarray, m: np.ndarray, cutoff: float = 1e-12) -> np.ndarray:
    """Solve ``(rho L + L rho) / 2 = m`` on the support of ``rho``."""
    w, v = np.linalg.eigh(_hermitize(rho))
    mt = v.conj().T @ m @ v
    denom = w[:, None] + w[None, :]
    lt = np.where(denom > cutoff, 2 * mt / np.where(denom > cutoff, denom, 1.0), 0.0)
    return _hermitize(v @ lt @ v.conj().T)


def _moments(block: np.ndarray, target_m: np.ndarray):
    """``rho_G``, ``M = Tr_B[(1 x T) rho_GB]`` and ``<T^2>``."""
    rho_g = np.einsum("ajbj->ab", block)
    m = _hermitize(np.einsum("ajbk,kj->ab", block, target_m))
    rho_b = np.einsum("ajak->jk", block)
    t2 = np.einsum("jk,kj->", rho_b, target_m @ target_m).real
    return _hermitize(rho_g), m, float(t2)


def _gain(vecs: np.ndarray, rho_g: np.ndarray, m: np.ndarray) -> float:
    p = np.einsum("ik,ij,jk->k", vecs.conj(), rho_g, vecs).real
    mu = np.einsum("ik,ij,jk->k", vecs.conj(), m, vecs).real
    keep = p > 1e-14
    return float(np.sum(mu[keep] ** 2 / p[keep]))


def fibonacci_sphere(n: int) -> np.ndarray:
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    rho = np.sqrt(1 - z**2)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def _bloch(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def _search_qubit(rho_g, m, n_grid: int = 10_000, n_refine: int = 4):
    sig = [pauli(a) for a in "xyz"]
    a = np.array([np.trace(rho_g @ s).real for s in sig])
    mv = np.array([np.trace(m @ s).real for s in sig])
    m0 = np.trace(m).real

    def gains(ns: np.ndarray) -> np.ndarray:
        total = np.zeros(len(ns))
        for sign in (1, -1):
            p = (1 + sign * ns @ a) / 2
            mu = (m0 + sign * ns @ mv) / 2
            safe = p > 1e-14
            total += np.where(safe, mu**2 / np.where(safe, p, 1.0), 0.0)
        return total

    grid = fibonacci_sphere(n_grid)
    g = gains(grid)
    best_n, best = grid[int(np.argmax(g))], float(g.max())
    for k in np.argsort(-g, kind="stable")[:n_refine]:
        n0 = grid[k]
        x0 = [np.arccos(np.clip(n0[2], -1, 1)), np.arctan2(n0[1], n0[0])]
        res = minimize(lambda x: -gains(_bloch(*x)[None, :])[0], x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
        if -res.fun > best:
            best, best_n = float(-res.fun), _bloch(*res.x)
    generator = sum(c * s for c, s in zip(best_n, sig))
    return best, generator


def _hermitian_from_params(x: np.ndarray, d: int) -> np.ndarray:
    h = np.zeros((d, d), dtype=complex)
    iu = np.triu_indices(d, 1)
    n_off = len(iu[0])
    h[np.diag_indices(d)] = x[:d]
    h[iu] = x[d : d + n_off] + 1j * x[d + n_off :]
    return h + np.triu(h, 1).conj().T


def _search_group(rho_g, m, seed, n_starts: int = 8):
    d = rho_g.shape[0]
    rng = np.random.default_rng(seed)

    def neg_gain(x):
        _, v = np.linalg.eigh(_hermitian_from_params(x, d))
        return -_gain(v, rho_g, m)

    best, best_x = -np.inf, None
    for _ in range(n_starts):
        x0 = rng.normal(size=d * d)
        res = minimize(neg_gain, x0, method="Powell", options={"xtol": 1e-8, "ftol": 1e-12, "maxfev": 20000})
        if -res.fun > best + 1e-15:
            best, best_x = float(-res.fun), res.x
    return best, _hermitian_from_params(best_x, d)


def inf_variance_discrete(
    state: MultipartyDensityState,
    steered,
    target,
    group,
    mode: str = "specified",
    conditioning=None,
    *,
    method: str = "sld",
    seed: int = 0,
) -> InferenceResult:
    """Inference variance of ``target`` on ``steered`` given a measurement on ``group``.

    Parameters
    ----------
    state : MultipartyDensityState
    steered : party label(s)
    target : SpinObservable, Hermitian matrix or axis name
        Observable on the steered party. An axis name (``"x"``, ``"y"``,
        ``"z"``) means the spin component in J units.
    group : party label(s)
        Steering party or group, disjoint from ``steered``.
    mode : {"specified", "optimized"}
    conditioning : SpinObservable, Hermitian matrix or axis name, optional
        Measurement on ``group``; required in specified mode. Matrices act
        on the group's joint space in slot order.
    method : {"sld", "search"}
        Optimiser for optimized mode. ``"sld"`` is exact; ``"search"``
        returns the best measurement found by grid/multi-start refinement.
    seed : int
        Seed for the multi-start search.
    """
    s_idx = resolve_parties(state, steered)
    g_idx = resolve_parties(state, group)
    if set(s_idx) & set(g_idx):
        raise ValueError("steered and steering parties overlap")
    t_m = _target_matrix(state, s_idx, target)
    labels_s = tuple(state.labels[k] for k in s_idx)
    labels_g = tuple(state.labels[k] for k in g_idx)

    if mode == "specified":
        if conditioning is None:
            raise ValueError("specified mode requires a conditioning measurement")
        if isinstance(conditioning, str):
            if len(g_idx) != 1:
                raise ValueError("axis shorthand for conditioning needs a single-party group")
            conditioning = spin_matrices(spin_of_dim(state.party_dims[g_idx[0]]), conditioning)
        cond_m = _as_group_matrix(state, g_idx, conditioning)
        var = _conditional_variance(state, g_idx, s_idx, t_m, cond_m)
        return InferenceResult(var, labels_s, labels_g, target, cond_m, mode)
    if mode != "optimized":
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")

    block = _group_steered_block(state, g_idx, s_idx)
    rho_g, m, t2 = _moments(block, t_m)
    if method == "sld":
        generator = symmetric_log_derivative(rho_g, m)
        var = _conditional_variance(state, g_idx, s_idx, t_m, generator)
    elif method == "search":
        if rho_g.shape[0] == 2:
            gain, generator = _search_qubit(rho_g, m)
        else:
            gain, generator = _search_group(rho_g, m, seed)
        var = max(t2 - gain, 0.0)
    else:
        raise ValueError(f"unknown method {method!r}")
    return InferenceResult(var, labels_s, labels_g, target, generator, mode)


def cross_conditioned_variance_sum(
    state: MultipartyDensityState,
    steered,
    assignments: Sequence[tuple[Any, Any]],
    mode: str = "optimized",
    **kwargs,
) -> float:
    """Sum of inference variances where each target is inferred by a different group.

    ``assignments`` is a list of ``(target, group)`` pairs with pairwise
    disjoint groups, e.g. ``[("x", "A"), ("y", "C"), ("z", "D")]``. Because
    the groups can measure simultaneously the sum is bounded below by the
    local uncertainty bound of the steered party.
    """
    seen: set[int] = set(resolve_parties(state, steered))
    for _, g in assignments:
        gi = set(resolve_parties(state, g))
        if gi & seen:
            raise ValueError("groups must be pairwise disjoint and exclude the steered party")
        seen |= gi
    return float(sum(inf_variance_discrete(state, steered, t, g, mode, **kwargs).variance for t, g in assignments))


# --------------------------------------------------------------------------- #
# Gaussian
# --------------------------------------------------------------------------- #


def inf_variance_gaussian(state: GaussianState, steered, target: QuadratureObservable, group) -> InferenceResult:
    """Optimal Gaussian inference variance (Schur complement).

    ``Var(t) - C V_G^+ C^T`` where ``V_G`` is the group's covariance block and
    ``C`` the cross covariance of ``t`` with the group quadratures. The
    returned ``conditioning`` holds the estimator weights over all ``2n``
    quadratures (zero outside the group).
    """
    s_idx = state.modes(steered)
    g_idx = state.modes(group)
    if set(s_idx) & set(g_idx):
        raise ValueError("steered and steering modes overlap")
    w = target.weights
    if w.size != state.cov.shape[0]:
        raise ValueError(f"target has {target.n_modes} modes, state has {state.n_modes}")
    if not set(target.support()) <= set(s_idx):
        raise ValueError("target must be supported on the steered modes")
    q = quadrature_indices(g_idx)
    v_g = state.cov[np.ix_(q, q)]
    c = w @ state.cov[:, q]
    beta = c @ np.linalg.pinv(v_g, hermitian=True)
    var = float(w @ state.cov @ w - beta @ c)
    weights = np.zeros_like(w)
    weights[q] = beta
    labels = state.labels
    return InferenceResult(
        max(var, 0.0),
        tuple(labels[k] for k in s_idx),
        tuple(labels[k] for k in g_idx),
        target,
        weights,
        "optimized",
    )


def group_inference_product(state: GaussianState, steered, pair_a, pair_b) -> float:
    """``D_inf(t1 | G1) * D_inf(t2 | G2)`` for pairwise disjoint ``steered``, ``G1``, ``G2``.

    Each pair is ``(target, group)``; e.g. ``((X_B, "A"), (P_B, "C"))``.
    """
    (t1, g1), (t2, g2) = pair_a, pair_b
    s, a, b = set(state.modes(steered)), set(state.modes(g1)), set(state.modes(g2))
    if s & a or s & b or a & b:
        raise ValueError("steered modes and the two groups must be pairwise disjoint")
    v1 = inf_variance_gaussian(state, steered, t1, g1).variance
    v2 = inf_variance_gaussian(state, steered, t2, g2).variance
    return float(np.sqrt(v1 * v2))
