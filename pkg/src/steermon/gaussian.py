"""Gaussian states in the covariance-matrix formalism.

Quadratures are ordered ``(X1, P1, ..., Xn, Pn)`` and scaled so that the
vacuum has unit variance, i.e. ``[X, P] = 2i`` and ``dX dP >= 1``. Modes may
be addressed by index or by the letters ``A, B, C, ...``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import block_diag
from scipy.stats import unitary_group

from .discrete import LABELS, InvalidStateError

SYMMETRY_TOL = 1e-10
PHYSICAL_TOL = 1e-9


def symplectic_form(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic spectrum of a covariance matrix, sorted ascending (one value per mode)."""
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ cov))
    return np.sort(ev)[::2]


def physicality_margin(cov: np.ndarray) -> float:
    """Smallest eigenvalue of ``cov + i Omega``; nonnegative for physical states."""
    n = cov.shape[0] // 2
    return float(np.linalg.eigvalsh(cov + 1j * symplectic_form(n)).min())


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of an ``n``-mode Gaussian state.

    Raises
    ------
    InvalidStateError
        If the covariance is not symmetric (``1e-10``) or violates
        ``cov + i Omega >= 0`` by more than ``1e-9``.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = np.array(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2 or cov.shape[0] == 0:
            raise InvalidStateError(f"covariance must be 2n x 2n, got shape {cov.shape}")
        mean = np.zeros(cov.shape[0]) if self.mean is None else np.array(self.mean, dtype=float).ravel()
        if mean.shape != (cov.shape[0],):
            raise InvalidStateError(f"mean has length {mean.size}, expected {cov.shape[0]}")
        asym = np.max(np.abs(cov - cov.T))
        if asym > SYMMETRY_TOL:
            raise InvalidStateError(f"covariance is not symmetric (max deviation {asym:.3e})")
        cov = (cov + cov.T) / 2
        margin = physicality_margin(cov)
        if margin < -PHYSICAL_TOL:
            raise InvalidStateError(f"covariance violates the uncertainty principle (cov + i Omega min eigenvalue {margin:.3e})")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(LABELS[: self.n_modes])

    def mode_index(self, mode) -> int:
        if isinstance(mode, (int, np.integer)):
            k = int(mode)
        elif isinstance(mode, str) and len(mode) == 1 and mode in LABELS:
            k = LABELS.index(mode)
        else:
            raise ValueError(f"invalid mode {mode!r}")
        if not 0 <= k < self.n_modes:
            raise ValueError(f"mode {mode!r} out of range for {self.n_modes} modes")
        return k

    def modes(self, modes) -> tuple[int, ...]:
        """Resolve a mode or group of modes (``"AC"``, ``[0, 2]``...) to sorted unique indices."""
        if isinstance(modes, (int, np.integer)):
            items = [modes]
        elif isinstance(modes, str):
            items = list(modes)
        else:
            items = list(modes)
        if not items:
            raise ValueError("mode group is empty")
        idx = sorted({self.mode_index(m) for m in items})
        if len(idx) != len(items):
            raise ValueError(f"duplicate modes in {modes!r}")
        return tuple(idx)

    def symplectic_eigenvalues(self) -> np.ndarray:
        return symplectic_eigenvalues(self.cov)


def quadrature_indices(modes: Iterable[int]) -> list[int]:
    return [q for k in modes for q in (2 * k, 2 * k + 1)]


@dataclass(frozen=True, eq=False)
class QuadratureObservable:
    """Linear combination ``sum_k w_k R_k`` of the quadratures ``R = (X1, P1, ...)``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size == 0 or w.size % 2:
            raise ValueError(f"weights must have even, nonzero length, got {w.size}")
        if not np.any(w):
            raise ValueError("quadrature observable has all-zero weights")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_modes(self) -> int:
        return self.weights.size // 2

    def support(self) -> tuple[int, ...]:
        return tuple(k for k in range(self.n_modes) if np.any(self.weights[2 * k : 2 * k + 2]))

    def commutator(self, other: "QuadratureObservable") -> float:
        """Coefficient ``c`` in ``[u, v] = 2 i c``; the product bound is ``du dv >= |c|``."""
        return float(self.weights @ symplectic_form(self.n_modes) @ other.weights)

    @classmethod
    def from_terms(cls, n_modes: int, terms: Mapping[str, float]) -> "QuadratureObservable":
        """Build from a mapping like ``{"X_A": 1, "P_B": -1}``."""
        w = np.zeros(2 * n_modes)
        for key, coef in terms.items():
            name = key.replace("_", "").strip()
            if len(name) != 2 or name[0].upper() not in "XP" or name[1] not in LABELS[:n_modes]:
                raise ValueError(f"invalid quadrature term {key!r} for {n_modes} modes")
            w[2 * LABELS.index(name[1]) + (name[0].upper() == "P")] += float(coef)
        return cls(w)


def X(mode: int | str, n_modes: int) -> QuadratureObservable:
    k = mode if isinstance(mode, int) else LABELS.index(mode)
    w = np.zeros(2 * n_modes)
    w[2 * k] = 1.0
    return QuadratureObservable(w)


def P(mode: int | str, n_modes: int) -> QuadratureObservable:
    k = mode if isinstance(mode, int) else LABELS.index(mode)
    w = np.zeros(2 * n_modes)
    w[2 * k + 1] = 1.0
    return QuadratureObservable(w)


def variance_of(state: GaussianState, obs: QuadratureObservable) -> float:
    """``w^T cov w``."""
    if obs.weights.size != state.cov.shape[0]:
        raise ValueError(f"observable has {obs.n_modes} modes, state has {state.n_modes}")
    return float(obs.weights @ state.cov @ obs.weights)


# --------------------------------------------------------------------------- #
# states and channels
# --------------------------------------------------------------------------- #


def vacuum(n: int = 1) -> GaussianState:
    if n < 1:
        raise ValueError(f"need at least one mode, got {n}")
    return GaussianState(np.zeros(2 * n), np.eye(2 * n))


def thermal(nus: Sequence[float]) -> GaussianState:
    """Product of thermal modes with symplectic eigenvalues ``nus`` (each >= 1)."""
    nus = np.asarray(nus, dtype=float)
    return GaussianState(np.zeros(2 * nus.size), np.diag(np.repeat(nus, 2)))


def squeezed_vacuum(r: float, axis: str = "x") -> GaussianState:
    """Single-mode squeezed vacuum with the ``axis`` quadrature variance ``exp(-2r)``."""
    if axis not in ("x", "p"):
        raise ValueError("axis must be 'x' or 'p'")
    sq, anti = np.exp(-2 * r), np.exp(2 * r)
    return GaussianState(np.zeros(2), np.diag([sq, anti] if axis == "x" else [anti, sq]))


def two_mode_squeezed(r: float) -> GaussianState:
    """Two-mode squeezed vacuum: ``X_A X_B`` correlated, ``P_A P_B`` anticorrelated."""
    if r < 0:
        raise ValueError(f"squeezing must be nonnegative, got {r!r}")
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    cov = np.array([
        [c, 0, s, 0],
        [0, c, 0, -s],
        [s, 0, c, 0],
        [0, -s, 0, c],
    ])
    return GaussianState(np.zeros(4), cov)


def direct_sum(*states: GaussianState) -> GaussianState:
    """Join independent states; modes are relabelled in order."""
    return GaussianState(np.concatenate([s.mean for s in states]), block_diag(*[s.cov for s in states]))


def reduce(state: GaussianState, modes) -> GaussianState:
    """Marginal state on the given modes (partial trace)."""
    q = quadrature_indices(state.modes(modes))
    return GaussianState(state.mean[q], state.cov[np.ix_(q, q)])


def apply_symplectic(state: GaussianState, S: np.ndarray, modes) -> GaussianState:
    """Apply a symplectic matrix acting on the quadratures of ``modes`` (in the given order)."""
    if isinstance(modes, (int, np.integer)):
        modes = [modes]
    idx = [state.mode_index(m) for m in modes]
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate modes in {modes!r}")
    q = quadrature_indices(idx)
    S = np.asarray(S, dtype=float)
    if S.shape != (len(q), len(q)):
        raise ValueError(f"symplectic matrix shape {S.shape} does not match {len(idx)} modes")
    full = np.eye(state.cov.shape[0])
    full[np.ix_(q, q)] = S
    return GaussianState(full @ state.mean, full @ state.cov @ full.T)


def beam_splitter_matrix(eta: float) -> np.ndarray:
    """Beam splitter on ``(X_i, P_i, X_j, P_j)`` with ``cos(theta) = sqrt(eta)``."""
    if not 0 <= eta <= 1:
        raise ValueError(f"transmissivity must lie in [0, 1], got {eta!r}")
    c, s = np.sqrt(eta), np.sqrt(1 - eta)
    return np.kron(np.array([[c, s], [-s, c]]), np.eye(2))


def squeezer_matrix(r: float) -> np.ndarray:
    """Single-mode squeezer that scales ``X`` by ``exp(-r)`` and ``P`` by ``exp(r)``."""
    return np.diag([np.exp(-r), np.exp(r)])


def rotation_matrix(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [-s, c]])


def apply_beam_splitter(state: GaussianState, mode_i, mode_j, eta: float) -> GaussianState:
    """Mix two modes: ``X_i -> c X_i + s X_j``, ``X_j -> -s X_i + c X_j`` (same for ``P``)."""
    i, j = state.mode_index(mode_i), state.mode_index(mode_j)
    if i == j:
        raise ValueError("beam splitter needs two distinct modes")
    return apply_symplectic(state, beam_splitter_matrix(eta), [i, j])


def apply_squeezing(state: GaussianState, mode, r: float) -> GaussianState:
    return apply_symplectic(state, squeezer_matrix(r), [state.mode_index(mode)])


def apply_loss(state: GaussianState, mode, eta: float) -> GaussianState:
    """Pure-loss channel of efficiency ``eta`` on one mode.

    Equivalent to a beam splitter with a vacuum ancilla that is then traced
    out: the mode's block becomes ``eta cov + (1 - eta) I`` and its cross
    covariances and mean scale by ``sqrt(eta)``.
    """
    if not 0 <= eta <= 1:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta!r}")
    k = state.mode_index(mode)
    g = np.ones(state.cov.shape[0])
    g[2 * k : 2 * k + 2] = np.sqrt(eta)
    cov = g[:, None] * state.cov * g[None, :]
    cov[2 * k, 2 * k] += 1 - eta
    cov[2 * k + 1, 2 * k + 1] += 1 - eta
    return GaussianState(g * state.mean, cov)


def cv_ghz(r: float) -> GaussianState:
    """Three-mode CV GHZ state from one ``P``-squeezed and two ``X``-squeezed vacua.

    The inputs pass through a 1:2 and then a 1:1 beam splitter so that the
    anti-squeezed ``X`` of the first input enters every output with weight
    ``1/sqrt(3)``. Hence ``Var(X_i - X_j) = 2 exp(-2r)`` and
    ``Var(P_A + P_B + P_C) = 3 exp(-2r)``.
    """
    if r < 0:
        raise ValueError(f"squeezing must be nonnegative, got {r!r}")
    s = direct_sum(squeezed_vacuum(r, "p"), squeezed_vacuum(r, "x"), squeezed_vacuum(r, "x"))
    s = apply_beam_splitter(s, 1, 0, 1 / 3)
    return apply_beam_splitter(s, 2, 1, 1 / 2)


def dual_steering_network(r: float) -> GaussianState:
    """TMSV on ``(A, B')``; ``B'`` is split with a vacuum on a 50:50 beam splitter into ``B`` and ``C``."""
    if r < 0:
        raise ValueError(f"squeezing must be nonnegative, got {r!r}")
    s = direct_sum(two_mode_squeezed(r), vacuum(1))
    # vacuum port first so both outputs receive +B'/sqrt(2)
    return apply_beam_splitter(s, 2, 1, 0.5)


def passive_symplectic(unitary: np.ndarray) -> np.ndarray:
    """Orthogonal symplectic matrix of the passive interferometer ``a -> U a``."""
    n = unitary.shape[0]
    S = np.zeros((2 * n, 2 * n))
    for i in range(n):
        for j in range(n):
            u = unitary[i, j]
            S[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = [[u.real, -u.imag], [u.imag, u.real]]
    return S


def random_gaussian_state(
    n: int,
    seed=None,
    *,
    max_squeeze: float = 1.0,
    max_thermal: float = 1.0,
    displace: bool = True,
) -> GaussianState:
    """Random physical state: thermal input, interferometer, squeezers, interferometer.

    Symplectic eigenvalues are drawn from ``[1, 1 + max_thermal]`` and
    squeezing parameters from ``[0, max_squeeze]``.
    """
    rng = np.random.default_rng(seed)
    nus = 1 + max_thermal * rng.random(n)
    rs = max_squeeze * rng.random(n)
    o1 = passive_symplectic(unitary_group.rvs(n, random_state=rng)) if n > 1 else rotation_matrix(2 * np.pi * rng.random())
    o2 = passive_symplectic(unitary_group.rvs(n, random_state=rng)) if n > 1 else rotation_matrix(2 * np.pi * rng.random())
    z = np.diag(np.concatenate([[np.exp(-r), np.exp(r)] for r in rs]))
    S = o2 @ z @ o1
    cov = S @ np.diag(np.repeat(nus, 2)) @ S.T
    mean = rng.normal(size=2 * n) if displace else np.zeros(2 * n)
    return GaussianState(mean, (cov + cov.T) / 2)
