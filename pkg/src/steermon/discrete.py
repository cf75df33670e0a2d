"""Finite-dimensional multiparty states, spin operators and projective measurement.

Parties are labelled ``A, B, C, ...`` and occupy tensor slots ``0, 1, 2, ...``
in that order. Spin basis vectors are ordered by decreasing magnetic quantum
number, so for a qubit index 0 is spin up (sigma_z = +1) and index 1 is spin down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import prod
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.optimize import minimize
from scipy.stats import unitary_group

LABELS = "ABCDEFGHIJKL"

STRUCT_TOL = 1e-10
ARITH_TOL = 1e-9
OPTIM_TOL = 1e-6

Parties = Union[str, int, Iterable[Union[str, int]]]


class InvalidStateError(ValueError):
    """Raised when a matrix fails the density-operator invariants."""


def default_labels(n: int) -> tuple[str, ...]:
    if n > len(LABELS):
        raise ValueError(f"at most {len(LABELS)} parties are supported, got {n}")
    return tuple(LABELS[:n])


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MultipartyDensityState:
    """Density matrix over a tensor product of labelled finite-dimensional parties.

    Parameters
    ----------
    party_dims : sequence of int
        Local Hilbert-space dimensions in tensor-slot order.
    matrix : array_like
        Square complex matrix of side ``prod(party_dims)``.
    labels : sequence of str, optional
        Party labels, one per slot. Defaults to ``A, B, C, ...``.

    Raises
    ------
    InvalidStateError
        If the matrix is not Hermitian, not unit trace or not positive
        semidefinite within ``1e-10``.
    """

    party_dims: tuple[int, ...]
    matrix: np.ndarray
    labels: tuple[str, ...] = field(default=None)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.party_dims)
        if not dims or any(d < 1 for d in dims):
            raise InvalidStateError(f"party dimensions must be positive, got {dims}")
        labels = default_labels(len(dims)) if self.labels is None else tuple(self.labels)
        if len(labels) != len(dims) or len(set(labels)) != len(labels):
            raise InvalidStateError(f"labels {labels} do not match {len(dims)} parties")
        m = np.asarray(self.matrix, dtype=complex)
        n = prod(dims)
        if m.shape != (n, n):
            raise InvalidStateError(f"matrix shape {m.shape} does not match dims {dims}")
        herm = np.max(np.abs(m - m.conj().T)) if n else 0.0
        if herm > STRUCT_TOL:
            raise InvalidStateError(f"matrix is not Hermitian (max deviation {herm:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STRUCT_TOL:
            raise InvalidStateError(f"trace is {tr!r}, expected 1")
        lam_min = np.linalg.eigvalsh((m + m.conj().T) / 2).min()
        if lam_min < -STRUCT_TOL:
            raise InvalidStateError(f"matrix is not positive semidefinite (min eigenvalue {lam_min:.3e})")
        object.__setattr__(self, "party_dims", dims)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", _readonly(m))

    @classmethod
    def from_ket(cls, psi, party_dims: Sequence[int], labels=None) -> "MultipartyDensityState":
        psi = np.asarray(psi, dtype=complex).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(tuple(party_dims), np.outer(psi, psi.conj()), labels)

    @property
    def n_parties(self) -> int:
        return len(self.party_dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def index_of(self, label) -> int:
        if isinstance(label, (int, np.integer)):
            if not 0 <= label < self.n_parties:
                raise ValueError(f"party index {label} out of range")
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"unknown party label {label!r}; state has {self.labels}") from None

    def expectation(self, op: np.ndarray) -> float:
        """Real part of ``Tr(rho op)`` for a full-space operator."""
        return float(np.einsum("ij,ji->", self.matrix, op).real)

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.matrix, self.matrix).real)


def resolve_parties(state: MultipartyDensityState, parties: Parties) -> tuple[int, ...]:
    """Map labels (``"AC"``, ``["A", "C"]``, ``0``...) to sorted, unique slot indices."""
    if isinstance(parties, (int, np.integer)):
        items = [parties]
    elif isinstance(parties, str):
        items = list(parties) if parties not in state.labels else [parties]
    else:
        items = list(parties)
    if not items:
        raise ValueError("party list is empty")
    idx = sorted({state.index_of(p) for p in items})
    if len(idx) != len(items):
        raise ValueError(f"duplicate parties in {parties!r}")
    return tuple(idx)


def _permute(mat: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    n = len(dims)
    t = mat.reshape(tuple(dims) * 2)
    t = t.transpose(list(order) + [n + k for k in order])
    d = prod(dims)
    return t.reshape(d, d)


def _split(state: MultipartyDensityState, group: Sequence[int]):
    """Return rho reshaped as ``(dG, dR, dG, dR)`` with the group first, and the rest indices."""
    rest = [k for k in range(state.n_parties) if k not in group]
    order = list(group) + rest
    dg = prod(state.party_dims[k] for k in group)
    dr = prod(state.party_dims[k] for k in rest) if rest else 1
    mat = _permute(state.matrix, state.party_dims, order)
    return mat.reshape(dg, dr, dg, dr), rest


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def partial_trace(state: MultipartyDensityState, keep: Parties) -> MultipartyDensityState:
    """Reduced state on the kept parties, in the original slot order.

    >>> rho = partial_trace(make_w(), "AB")
    >>> rho.labels
    ('A', 'B')
    """
    idx = resolve_parties(state, keep)
    t, _ = _split(state, idx)
    red = np.einsum("ajbj->ab", t)
    return MultipartyDensityState(
        tuple(state.party_dims[k] for k in idx),
        _hermitize(red),
        tuple(state.labels[k] for k in idx),
    )


def embed_operator(state: MultipartyDensityState, op: np.ndarray, parties: Parties) -> np.ndarray:
    """Lift an operator on the joint space of ``parties`` (slot order) to the full space."""
    idx = resolve_parties(state, parties)
    rest = [k for k in range(state.n_parties) if k not in idx]
    dr = prod(state.party_dims[k] for k in rest) if rest else 1
    big = np.kron(op, np.eye(dr))
    order = list(idx) + rest
    dims = [state.party_dims[k] for k in order]
    inverse = np.argsort(order)
    return _permute(big, dims, inverse)


def tensor(*states: MultipartyDensityState) -> MultipartyDensityState:
    """Product state; labels are reassigned ``A, B, ...`` across the factors."""
    mat = np.array([[1.0 + 0j]])
    dims: list[int] = []
    for s in states:
        mat = np.kron(mat, s.matrix)
        dims.extend(s.party_dims)
    return MultipartyDensityState(tuple(dims), mat)


def maximally_mixed(n_parties: int, dim: int = 2) -> MultipartyDensityState:
    d = dim**n_parties
    return MultipartyDensityState((dim,) * n_parties, np.eye(d) / d)


def apply_local_unitary(state: MultipartyDensityState, party, unitary: np.ndarray) -> MultipartyDensityState:
    u = embed_operator(state, unitary, [party])
    return MultipartyDensityState(state.party_dims, _hermitize(u @ state.matrix @ u.conj().T), state.labels)


# --------------------------------------------------------------------------- #
# spin operators
# --------------------------------------------------------------------------- #

AXES = {
    "x": (1.0, 0.0, 0.0),
    "y": (0.0, 1.0, 0.0),
    "z": (0.0, 0.0, 1.0),
}


def _check_spin(J: float) -> float:
    two_j = 2 * float(J)
    if two_j < 1 - 1e-12 or abs(two_j - round(two_j)) > 1e-12:
        raise ValueError(f"J must be a positive half-integer, got {J!r}")
    return round(two_j) / 2


def spin_of_dim(d: int) -> float:
    return (d - 1) / 2


@lru_cache(maxsize=None)
def _spin_components(J: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = J - np.arange(int(round(2 * J)) + 1)
    jz = np.diag(m).astype(complex)
    # <m+1|J+|m> in the decreasing-m basis sits one row above the diagonal
    up = np.sqrt(J * (J + 1) - m[1:] * (m[1:] + 1))
    jp = np.diag(up, k=1).astype(complex)
    jx = (jp + jp.conj().T) / 2
    jy = (jp - jp.conj().T) / 2j
    for a in (jx, jy, jz):
        a.setflags(write=False)
    return jx, jy, jz


def _direction(direction) -> np.ndarray:
    if isinstance(direction, str):
        key = direction.lower()
        if key not in AXES:
            raise ValueError(f"unknown axis {direction!r}")
        return np.array(AXES[key])
    n = np.asarray(direction, dtype=float).ravel()
    if n.shape != (3,):
        raise ValueError(f"direction must be a 3-vector, got shape {n.shape}")
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        raise ValueError("direction vector is zero")
    return n / norm


def spin_matrices(J: float, direction, units: str = "J") -> np.ndarray:
    """Spin component ``n . J`` for spin ``J`` along ``direction``.

    Parameters
    ----------
    J : float
        Spin magnitude, a positive half-integer.
    direction : str or array_like
        ``"x"``, ``"y"``, ``"z"`` or a nonzero 3-vector (normalised here).
    units : {"J", "pauli"}
        Pauli units (eigenvalues +-1) are only defined for ``J = 1/2``.

    Returns
    -------
    ndarray
        Hermitian matrix of side ``2J + 1``.
    """
    J = _check_spin(J)
    n = _direction(direction)
    jx, jy, jz = _spin_components(J)
    op = n[0] * jx + n[1] * jy + n[2] * jz
    if units == "pauli":
        if J != 0.5:
            raise ValueError("Pauli units are only defined for J = 1/2")
        return 2 * op
    if units != "J":
        raise ValueError(f"units must be 'J' or 'pauli', got {units!r}")
    return op


def pauli(direction) -> np.ndarray:
    return spin_matrices(0.5, direction, units="pauli")


@dataclass(frozen=True)
class SpinObservable:
    """A spin component measured on one party, or the collective spin of a group."""

    parties: tuple[str, ...]
    J: float
    direction: tuple[float, float, float]
    units: str = "J"

    def __post_init__(self):
        parties = (self.parties,) if isinstance(self.parties, str) else tuple(self.parties)
        if not parties:
            raise ValueError("SpinObservable needs at least one party")
        J = _check_spin(self.J)
        n = np.asarray(_direction(self.direction) if isinstance(self.direction, str) else self.direction, float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit 3-vector, got {self.direction!r}")
        if self.units == "pauli" and J != 0.5:
            raise ValueError("Pauli units are only permitted for J = 1/2")
        if self.units not in ("J", "pauli"):
            raise ValueError(f"units must be 'J' or 'pauli', got {self.units!r}")
        object.__setattr__(self, "parties", parties)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "direction", tuple(float(x) for x in n))

    @property
    def local_dim(self) -> int:
        return int(round(2 * self.J)) + 1

    def operator(self) -> np.ndarray:
        """Matrix on the joint space of ``parties`` (collective sum for groups)."""
        single = spin_matrices(self.J, self.direction, self.units)
        k = len(self.parties)
        d = self.local_dim
        total = np.zeros((d**k, d**k), dtype=complex)
        for slot in range(k):
            factors = [np.eye(d)] * k
            factors[slot] = single
            term = factors[0]
            for f in factors[1:]:
                term = np.kron(term, f)
            total += term
        return total


def spin(party: str, axis, J: float = 0.5, units: str = "J") -> SpinObservable:
    """Shorthand for a single-party :class:`SpinObservable`."""
    return SpinObservable((party,), J, tuple(_direction(axis)), units)


def _variance_sum(psi: np.ndarray, ops: Sequence[np.ndarray]) -> np.ndarray:
    """Sum of variances of ``ops`` for a batch of kets (rows of ``psi``)."""
    total = np.zeros(psi.shape[0])
    for op in ops:
        mean = np.einsum("ki,ij,kj->k", psi.conj(), op, psi).real
        sq = np.einsum("ki,ij,kj->k", psi.conj(), op @ op, psi).real
        total += sq - mean**2
    return total


@lru_cache(maxsize=None)
def _two_axis_bound(J: float, n_samples: int = 20000, n_refine: int = 8) -> float:
    jx, jy, _ = _spin_components(J)
    d = jx.shape[0]
    rng = np.random.default_rng(12345)
    z = rng.normal(size=(n_samples, d)) + 1j * rng.normal(size=(n_samples, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    vals = _variance_sum(z, (jx, jy))

    def objective(x):
        v = x[:d] + 1j * x[d:]
        v = v / np.linalg.norm(v)
        return float(_variance_sum(v[None, :], (jx, jy))[0])

    best = float(vals.min())
    for k in np.argsort(vals)[:n_refine]:
        x0 = np.concatenate([z[k].real, z[k].imag])
        res = minimize(objective, x0, method="BFGS", options={"gtol": 1e-12})
        best = min(best, float(res.fun))
    return best


def uncertainty_bound(J: float, num_axes: int) -> float:
    """Lower bound on the summed spin variances, in J units.

    For three axes the bound is ``J``. For two axes (``C_J``) it is found
    numerically as the minimum of ``Var(Jx) + Var(Jy)`` over pure states of
    dimension ``2J + 1``; results are cached per ``J``.
    """
    J = _check_spin(J)
    if num_axes == 3:
        return J
    if num_axes == 2:
        return _two_axis_bound(J)
    raise ValueError(f"num_axes must be 2 or 3, got {num_axes!r}")


# --------------------------------------------------------------------------- #
# canonical states
# --------------------------------------------------------------------------- #


def make_ghz(n_parties: int = 3) -> MultipartyDensityState:
    """``(|up...up> - |down...down>)/sqrt(2)`` on ``n_parties`` qubits."""
    if n_parties < 2:
        raise ValueError(f"GHZ state needs at least 2 parties, got {n_parties}")
    psi = np.zeros(2**n_parties, dtype=complex)
    psi[0] = 1
    psi[-1] = -1
    return MultipartyDensityState.from_ket(psi, (2,) * n_parties)


def make_w() -> MultipartyDensityState:
    """Three-qubit W state with a single spin up shared symmetrically."""
    psi = np.zeros(8, dtype=complex)
    psi[[0b011, 0b101, 0b110]] = 1
    return MultipartyDensityState.from_ket(psi, (2, 2, 2))


_BELL = {
    "phi+": ([0, 3], [1, 1]),
    "phi-": ([0, 3], [1, -1]),
    "psi+": ([1, 2], [1, 1]),
    "psi-": ([1, 2], [1, -1]),
}


def make_bell(kind: str) -> MultipartyDensityState:
    try:
        idx, amp = _BELL[kind]
    except KeyError:
        raise ValueError(f"unknown Bell state {kind!r}; choose from {sorted(_BELL)}") from None
    psi = np.zeros(4, dtype=complex)
    psi[idx] = amp
    return MultipartyDensityState.from_ket(psi, (2, 2))


def _dims(n_parties: int, dims) -> tuple[int, ...]:
    if isinstance(dims, (int, np.integer)):
        dims = (int(dims),) * n_parties
    dims = tuple(int(d) for d in dims)
    if len(dims) != n_parties or any(d < 1 for d in dims):
        raise ValueError(f"invalid dims {dims} for {n_parties} parties")
    return dims


def random_pure_state(n_parties: int, dims=2, seed=None) -> MultipartyDensityState:
    """Haar-random pure state from a normalised complex Gaussian vector."""
    dims = _dims(n_parties, dims)
    rng = np.random.default_rng(seed)
    d = prod(dims)
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return MultipartyDensityState.from_ket(psi, dims)


def random_mixed_state(n_parties: int, dims=2, seed=None, env_dim: int | None = None) -> MultipartyDensityState:
    """Partial trace of a Haar-random pure state on system x environment.

    The environment defaults to the system dimension, giving full-rank
    (Hilbert-Schmidt distributed) mixed states.
    """
    dims = _dims(n_parties, dims)
    rng = np.random.default_rng(seed)
    d = prod(dims)
    e = d if env_dim is None else int(env_dim)
    g = rng.normal(size=(d, e)) + 1j * rng.normal(size=(d, e))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return MultipartyDensityState(dims, _hermitize(rho))


def random_unitary(d: int, seed=None) -> np.ndarray:
    return unitary_group.rvs(d, random_state=np.random.default_rng(seed))


# --------------------------------------------------------------------------- #
# measurement and entanglement
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class OutcomeEntry:
    probability: float
    outcome: float
    state: MultipartyDensityState


@dataclass(frozen=True)
class MeasurementOutcomeEnsemble:
    """Outcomes of a projective measurement with the post-measurement states of the other parties."""

    entries: tuple[OutcomeEntry, ...]

    def __post_init__(self):
        total = sum(e.probability for e in self.entries)
        if any(e.probability < 0 for e in self.entries) or abs(total - 1.0) > STRUCT_TOL:
            raise InvalidStateError(f"outcome probabilities must be nonnegative and sum to 1 (sum {total!r})")

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.entries])

    @property
    def outcomes(self) -> np.ndarray:
        return np.array([e.outcome for e in self.entries])

    def mean(self) -> float:
        return float(self.probabilities @ self.outcomes)


def spectral_projectors(obs: np.ndarray, atol: float = ARITH_TOL) -> list[tuple[float, np.ndarray]]:
    """Distinct eigenvalues of a Hermitian matrix with their eigenspace projectors."""
    w, v = np.linalg.eigh(obs)
    groups: list[list[int]] = []
    for k in range(len(w)):
        if groups and abs(w[k] - w[groups[-1][0]]) <= atol:
            groups[-1].append(k)
        else:
            groups.append([k])
    out = []
    for g in groups:
        vecs = v[:, g]
        out.append((float(np.mean(w[g])), vecs @ vecs.conj().T))
    return out


def _as_group_matrix(state: MultipartyDensityState, group: tuple[int, ...], observable) -> np.ndarray:
    if isinstance(observable, SpinObservable):
        obs_idx = resolve_parties(state, observable.parties)
        if obs_idx != group:
            raise ValueError(f"observable acts on {observable.parties}, measurement group is "
                             f"{tuple(state.labels[k] for k in group)}")
        if any(state.party_dims[k] != observable.local_dim for k in group):
            raise ValueError("observable spin does not match the party dimension")
        return observable.operator()
    m = np.asarray(observable, dtype=complex)
    dg = prod(state.party_dims[k] for k in group)
    if m.shape != (dg, dg):
        raise ValueError(f"observable shape {m.shape} does not match group dimension {dg}")
    if np.max(np.abs(m - m.conj().T)) > STRUCT_TOL:
        raise ValueError("observable is not Hermitian")
    return m


def measure_projective(state: MultipartyDensityState, group: Parties, observable) -> MeasurementOutcomeEnsemble:
    """Measure ``observable`` on ``group`` and return the outcome ensemble.

    Degenerate eigenvalues are merged into a single outcome with the full
    eigenspace projector. Outcomes of zero probability are dropped.
    """
    idx = resolve_parties(state, group)
    rest_labels = [state.labels[k] for k in range(state.n_parties) if k not in idx]
    if not rest_labels:
        raise ValueError("measurement group covers every party; nothing left to condition")
    obs = _as_group_matrix(state, idx, observable)
    t, rest = _split(state, idx)
    rest_dims = tuple(state.party_dims[k] for k in rest)
    raw = []
    for value, proj in spectral_projectors(obs):
        block = np.einsum("ba,ajbk->jk", proj, t)
        p = np.trace(block).real
        if p > 1e-14:
            raw.append((p, value, block))
    total = sum(p for p, _, _ in raw)
    entries = tuple(
        OutcomeEntry(p / total, value, MultipartyDensityState(rest_dims, _hermitize(block / p), tuple(rest_labels)))
        for p, value, block in raw
    )
    return MeasurementOutcomeEnsemble(entries)


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(_hermitize(m))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def concurrence(state: MultipartyDensityState) -> float:
    """Wootters concurrence of a two-qubit state."""
    if state.party_dims != (2, 2):
        raise ValueError(f"concurrence needs exactly two qubits, got dims {state.party_dims}")
    yy = np.kron(pauli("y"), pauli("y"))
    rho = state.matrix
    rho_tilde = yy @ rho.conj() @ yy
    s = _sqrtm_psd(rho)
    lam = np.sqrt(np.clip(np.linalg.eigvalsh(_hermitize(s @ rho_tilde @ s)), 0, None))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))
