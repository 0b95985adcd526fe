import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qmpemba.states import (
    TiltedStateSpec,
    charge_sector_decompose,
    equal_up_to_phase,
    prepare_tilted_ferromagnet,
    prepare_tilted_neel,
    reassemble,
    sector_indices,
    sector_weights,
)

angles = st.floats(0, math.pi)


@given(angles, st.integers(1, 7))
def test_tilted_states_match_kron_oracle(theta, n):
    np.testing.assert_allclose(prepare_tilted_neel(theta, n), oracles.tilted(theta, n, True), atol=1e-15)
    np.testing.assert_allclose(prepare_tilted_ferromagnet(theta, n), oracles.tilted(theta, n, False), atol=1e-15)


def test_untilted_neel_is_classical():
    psi = prepare_tilted_neel(0.0, 4)
    # qubits 2 and 4 (bits 1 and 3) excited
    assert psi[0b1010] == pytest.approx(1.0)
    assert prepare_tilted_ferromagnet(math.pi, 3)[0b111] == pytest.approx(1.0)


@given(angles, st.integers(1, 8))
def test_sector_weights_binomial(theta, n):
    w = sector_weights(prepare_tilted_ferromagnet(theta, n))
    p = math.sin(theta / 2) ** 2
    ref = [math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)]
    np.testing.assert_allclose(w, ref, atol=1e-12)


def test_sector_indices_partition():
    idx = sector_indices(6)
    allidx = np.sort(np.concatenate(idx))
    np.testing.assert_array_equal(allidx, np.arange(64))
    assert [len(i) for i in idx] == [math.comb(6, k) for k in range(7)]


@given(st.integers(0, 1000))
def test_decompose_reassemble_roundtrip(seed):
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=32) + 1j * rng.normal(size=32)
    np.testing.assert_array_equal(reassemble(charge_sector_decompose(psi), 5), psi)


def test_spec_validation_and_prepare():
    s = TiltedStateSpec("neel", math.pi / 2, 4)
    np.testing.assert_allclose(s.prepare(), prepare_tilted_neel(math.pi / 2, 4))
    with pytest.raises(ValueError, match="theta"):
        TiltedStateSpec("neel", 4 * math.pi, 4)
    with pytest.raises(ValueError):
        TiltedStateSpec("domain_wall", 1.0, 4)


def test_equal_up_to_phase():
    a = prepare_tilted_neel(1.0, 3)
    assert equal_up_to_phase(a, np.exp(0.7j) * a)
    assert not equal_up_to_phase(a, prepare_tilted_neel(1.1, 3))
