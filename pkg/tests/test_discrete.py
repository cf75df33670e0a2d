from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from steermon.discrete import (
    InvalidStateError,
    MultipartyDensityState,
    SpinObservable,
    apply_local_unitary,
    concurrence,
    embed_operator,
    make_bell,
    make_ghz,
    make_w,
    maximally_mixed,
    measure_projective,
    partial_trace,
    random_mixed_state,
    random_pure_state,
    random_unitary,
    resolve_parties,
    spectral_projectors,
    spin,
    spin_matrices,
    tensor,
    uncertainty_bound,
)

from oracles import C_HALF, C_ONE, W_PAIR_CONCURRENCE, ghz_ket, reduce_qubits, w_ket, wootters


class TestValidation:
    def test_rejects_non_hermitian(self):
        with pytest.raises(InvalidStateError, match="Hermitian"):
            MultipartyDensityState((2,), np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_rejects_bad_trace(self):
        with pytest.raises(InvalidStateError, match="trace"):
            MultipartyDensityState((2,), np.eye(2))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(InvalidStateError, match="positive"):
            MultipartyDensityState((2,), np.diag([1.2, -0.2]))

    def test_rejects_dim_mismatch(self):
        with pytest.raises(InvalidStateError):
            MultipartyDensityState((2, 2), np.eye(2) / 2)

    def test_matrix_is_read_only(self):
        s = make_w()
        with pytest.raises(ValueError):
            s.matrix[0, 0] = 1

    def test_labels_default(self):
        assert make_ghz(4).labels == ("A", "B", "C", "D")


def test_resolve_parties_forms():
    s = make_ghz(3)
    assert resolve_parties(s, "AC") == (0, 2)
    assert resolve_parties(s, ["C", "A"]) == (0, 2)
    assert resolve_parties(s, 1) == (1,)
    with pytest.raises(ValueError):
        resolve_parties(s, "AA")
    with pytest.raises(ValueError):
        resolve_parties(s, "Z")


@pytest.mark.parametrize("keep", [[0], [1], [2], [0, 1], [0, 2], [1, 2]])
def test_partial_trace_matches_index_contraction(keep):
    psi = w_ket()
    rho = np.outer(psi, psi.conj())
    got = partial_trace(make_w(), keep).matrix
    np.testing.assert_allclose(got, reduce_qubits(rho, keep, 3), atol=1e-14)


def test_partial_trace_keeps_labels():
    r = partial_trace(make_ghz(4), "BD")
    assert r.labels == ("B", "D")


def test_ghz_and_w_kets():
    np.testing.assert_allclose(make_ghz(3).matrix, np.outer(ghz_ket(), ghz_ket().conj()), atol=1e-15)
    np.testing.assert_allclose(make_w().matrix, np.outer(w_ket(), w_ket().conj()), atol=1e-15)


@pytest.mark.parametrize("J", [0.5, 1.0, 1.5, 2.0])
def test_spin_commutators(J):
    jx, jy, jz = (spin_matrices(J, a) for a in "xyz")
    np.testing.assert_allclose(jx @ jy - jy @ jx, 1j * jz, atol=1e-12)
    casimir = jx @ jx + jy @ jy + jz @ jz
    np.testing.assert_allclose(casimir, J * (J + 1) * np.eye(int(2 * J + 1)), atol=1e-12)
    assert np.allclose(np.diag(jz).real, J - np.arange(2 * J + 1))


def test_pauli_units_only_for_half():
    np.testing.assert_allclose(spin_matrices(0.5, "x", "pauli"), [[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        spin_matrices(1, "x", "pauli")


@pytest.mark.parametrize("bad", [0, 0.3, -1])
def test_spin_rejects_bad_J(bad):
    with pytest.raises(ValueError):
        spin_matrices(bad, "z")


def test_zero_direction_rejected():
    with pytest.raises(ValueError):
        spin_matrices(0.5, [0, 0, 0])


def test_collective_spin_operator():
    op = SpinObservable(("A", "C"), 0.5, "z").operator()
    np.testing.assert_allclose(np.diag(op).real, [1, 0, 0, -1])


def test_spin_shorthand():
    s = spin("B", "y", J=1)
    assert s.parties == ("B",) and s.local_dim == 3


class TestUncertaintyBound:
    def test_three_axes_is_J(self):
        assert uncertainty_bound(1.5, 3) == 1.5

    def test_qubit(self):
        assert uncertainty_bound(0.5, 2) == pytest.approx(C_HALF, abs=1e-9)

    def test_spin_one(self):
        assert uncertainty_bound(1.0, 2) == pytest.approx(C_ONE, abs=1e-7)

    def test_spin_three_halves_below_J(self):
        assert 0.5 < uncertainty_bound(1.5, 2) < 1.5


class TestMeasurement:
    def test_degenerate_projectors_merge(self):
        proj = spectral_projectors(np.diag([1.0, 1.0, -1.0]))
        assert [round(v) for v, _ in proj] == [-1, 1]
        assert np.trace(proj[1][1]).real == pytest.approx(2)

    def test_ensemble_probabilities(self):
        ens = measure_projective(make_w(), "A", spin_matrices(0.5, "z"))
        assert sorted(ens.probabilities) == pytest.approx([1 / 3, 2 / 3])
        assert sum(ens.probabilities) == pytest.approx(1)

    def test_cannot_measure_everything(self):
        with pytest.raises(ValueError):
            measure_projective(make_bell("phi+"), "AB", np.kron(np.eye(2), np.eye(2)))


class TestConcurrence:
    @pytest.mark.parametrize("kind", ["phi+", "phi-", "psi+", "psi-"])
    def test_bell_states(self, kind):
        assert concurrence(make_bell(kind)) == pytest.approx(1, abs=1e-9)

    def test_w_pairs(self):
        assert concurrence(partial_trace(make_w(), "AB")) == pytest.approx(W_PAIR_CONCURRENCE, abs=1e-9)

    def test_ghz_pairs(self):
        assert concurrence(partial_trace(make_ghz(3), "AC")) == pytest.approx(0, abs=1e-9)

    def test_maximally_mixed(self):
        assert concurrence(maximally_mixed(2)) == pytest.approx(0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_wootters_formula(self, seed):
        # full rank keeps the oracle's non-Hermitian eigensolver well conditioned
        s = random_mixed_state(2, seed=seed)
        assert concurrence(s) == pytest.approx(wootters(s.matrix), abs=1e-8)


def test_tensor_relabels():
    s = tensor(make_bell("phi+"), maximally_mixed(1))
    assert s.labels == ("A", "B", "C") and s.party_dims == (2, 2, 2)


def test_embed_operator_order():
    s = make_ghz(3)
    sz = spin_matrices(0.5, "z", "pauli")
    op = embed_operator(s, np.kron(sz, np.eye(2)), "AC")
    expected = np.kron(np.kron(sz, np.eye(2)), np.eye(2))
    np.testing.assert_allclose(op, expected)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 4))
def test_random_states_are_valid(seed, n):
    s = random_pure_state(n, seed=seed)
    assert s.purity() == pytest.approx(1, abs=1e-12)
    m = random_mixed_state(n, seed=seed)
    assert 0 < m.purity() <= 1 + 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_concurrence_local_unitary_invariance(seed):
    s = random_mixed_state(2, seed=seed, env_dim=2)
    u = apply_local_unitary(apply_local_unitary(s, "A", random_unitary(2, seed)), "B", random_unitary(2, seed + 1))
    assert concurrence(u) == pytest.approx(concurrence(s), abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_partial_trace_composes(seed):
    s = random_mixed_state(4, seed=seed, env_dim=3)
    a = partial_trace(partial_trace(s, "ABD"), "BD").matrix
    b = partial_trace(s, "BD").matrix
    np.testing.assert_allclose(a, b, atol=1e-13)


def test_random_is_seeded():
    assert np.array_equal(random_pure_state(3, seed=5).matrix, random_pure_state(3, seed=5).matrix)
