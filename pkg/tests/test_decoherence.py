import math

import numpy as np
import pytest

from qmpemba.decoherence import (
    DEVICE_T1,
    LINDBLAD_MAX_QUBITS,
    NoiseSpec,
    TrajectoryConfig,
    lindblad_oracle,
    natural_to_ns,
    norm_drift_estimate,
    sse_trajectory,
    trace_distance,
    trajectory_average,
    wiener_increments,
)
from qmpemba.evolution import evolve, evolve_dense_oracle
from qmpemba.model import HamiltonianSpec, preset_intermediate
from qmpemba.observables import entanglement_asymmetry, partial_trace, partial_trace_dm
from qmpemba.states import prepare_tilted_ferromagnet, prepare_tilted_neel

PLUS = np.array([1, 1], dtype=complex) / math.sqrt(2)


def qubit(h_mhz=0.0):
    return HamiltonianSpec(np.zeros((1, 1)), np.array([h_mhz]))


def random_spec(seed, n):
    rng = np.random.default_rng(seed)
    g = np.triu(rng.normal(-2, 1, (n, n)), 1)
    return HamiltonianSpec(g + g.T, rng.uniform(-3, 3, n))


def test_rates_from_t1_t2():
    noise = NoiseSpec((20.0,), (1.0,))
    assert noise.gamma_phi[0] == pytest.approx((1.0 - 1 / 40) * 1e-3)
    assert noise.gamma_1[0] == pytest.approx(1 / 20 * 1e-3)
    assert noise.kappa[0] == pytest.approx(noise.gamma_phi[0] / 4)
    assert NoiseSpec((20.0,), (1.0,), relaxation=False).gamma_1[0] == 0
    assert len(NoiseSpec.device().t1) == len(DEVICE_T1) == 14


def test_noise_validation():
    with pytest.raises(ValueError, match="negative pure dephasing"):
        NoiseSpec((1.0,), (3.0,))
    with pytest.raises(ValueError):
        NoiseSpec((1.0, 2.0), (1.0,))
    with pytest.raises(ValueError):
        NoiseSpec((0.0,), (1.0,))
    with pytest.raises(ValueError):
        TrajectoryConfig(dt=0)
    with pytest.raises(ValueError):
        TrajectoryConfig(M=0)


def test_natural_units():
    assert natural_to_ns(0.15) == pytest.approx(0.15 / (2 * math.pi * 2e-3))


def test_lindblad_single_qubit_dephasing_analytic():
    noise = NoiseSpec.dephasing(5.0, 1)
    t = np.linspace(0, 400, 9)
    rho = lindblad_oracle(PLUS, qubit(), noise, t)
    np.testing.assert_allclose(np.abs(rho[:, 0, 1]), 0.5 * np.exp(-5e-3 * t), atol=1e-12)
    np.testing.assert_allclose(rho[:, 0, 0].real, 0.5, atol=1e-12)


def test_lindblad_single_qubit_relaxation_analytic():
    noise = NoiseSpec((0.3,), (0.6,))
    t = np.linspace(0, 900, 7)
    excited = np.array([0, 1], dtype=complex)
    rho = lindblad_oracle(excited, qubit(3.0), noise, t)
    np.testing.assert_allclose(rho[:, 1, 1].real, np.exp(-t / 300), atol=1e-12)


def test_lindblad_closed_limit_and_physicality():
    spec = random_spec(0, 4)
    psi0 = prepare_tilted_neel(1.0, 4)
    t = [0.0, 50.0, 120.0]
    free = lindblad_oracle(psi0, spec, NoiseSpec.dephasing(0.0, 4), t)
    ref = evolve_dense_oracle(psi0, spec, t)
    np.testing.assert_allclose(free, np.einsum("ti,tj->tij", ref, ref.conj()), atol=1e-9)
    noisy = lindblad_oracle(psi0, spec, NoiseSpec.device(4), t)
    for r in noisy:
        assert abs(np.trace(r) - 1) < 1e-8
        assert np.linalg.eigvalsh(r).min() > -1e-8


def test_lindblad_size_limit():
    n = LINDBLAD_MAX_QUBITS + 1
    with pytest.raises(ValueError, match="N <="):
        lindblad_oracle(prepare_tilted_neel(1.0, n), preset_intermediate(-2, n), NoiseSpec.device(n), [0.0])


def test_wiener_increment_contract():
    dt = 0.15
    dw = wiener_increments(np.random.default_rng(0), dt, 10_000)
    assert abs(dw.mean()) < 3 * math.sqrt(dt / dw.size)
    assert dw.var() == pytest.approx(dt, rel=0.05)


def test_dt_too_large_rejected():
    noise = NoiseSpec.dephasing(50.0, 4)
    assert norm_drift_estimate(noise, 0.15) > 1e-3
    with pytest.raises(ValueError, match="norm drift"):
        sse_trajectory(prepare_tilted_neel(1.0, 4), random_spec(0, 4), noise, TrajectoryConfig(), [0.0, 1.0])
    assert norm_drift_estimate(NoiseSpec.device(14), 0.15) < 1e-3


def test_noiseless_trajectory_is_unitary_path():
    spec = random_spec(1, 5)
    psi0 = prepare_tilted_neel(0.7, 5)
    t = np.linspace(0, 30, 7)
    path = sse_trajectory(psi0, spec, NoiseSpec.dephasing(0.0, 5), TrajectoryConfig(dt=0.15, M=1), t)
    np.testing.assert_allclose(path, evolve(psi0, spec, t), atol=1e-12)


def test_single_noiseless_trajectory_average_is_exact():
    spec = random_spec(2, 4)
    psi0 = prepare_tilted_neel(1.2, 4)
    t = np.linspace(0, 20, 5)

    def ea(path):
        return entanglement_asymmetry(partial_trace(path, [0, 1, 2]))

    avg = trajectory_average(psi0, spec, NoiseSpec.dephasing(0.0, 4), TrajectoryConfig(M=1), t, ea)
    np.testing.assert_allclose(avg.mean, ea(evolve(psi0, spec, t)), atol=1e-12)
    assert avg.M == 1 and np.all(avg.stderr == 0)


def test_trajectories_deterministic_and_worker_independent():
    spec = random_spec(3, 4)
    psi0 = prepare_tilted_neel(1.0, 4)
    noise = NoiseSpec.device(4)
    cfg = TrajectoryConfig(dt=0.5, M=40, seed=7)
    t = np.linspace(0, 50, 6)
    a = sse_trajectory(psi0, spec, noise, cfg, t, traj_index=3)
    np.testing.assert_array_equal(a, sse_trajectory(psi0, spec, noise, cfg, t, traj_index=3))
    assert not np.array_equal(a, sse_trajectory(psi0, spec, noise, cfg, t, traj_index=4))
    ext = lambda p: partial_trace(p, [0, 1])  # noqa: E731
    one = trajectory_average(psi0, spec, noise, cfg, t, ext, workers=1)
    three = trajectory_average(psi0, spec, noise, cfg, t, ext, workers=3)
    np.testing.assert_array_equal(one.mean, three.mean)
    np.testing.assert_array_equal(one.stderr, three.stderr)


def test_dephasing_trajectories_match_lindblad_coherence():
    noise = NoiseSpec.dephasing(5.0, 1)
    t = np.linspace(0, 300, 7)
    cfg = TrajectoryConfig(dt=0.2, M=200, seed=0)
    avg = trajectory_average(PLUS, qubit(2.0), noise, cfg, t, lambda p: p[:, 0] * p[:, 1].conj())
    exact = lindblad_oracle(PLUS, qubit(2.0), noise, t)[:, 0, 1]
    err = np.abs(avg.mean - exact)
    assert np.all(err <= 4 * avg.stderr + 1e-3)


def test_relaxation_jumps_match_t1_decay():
    noise = NoiseSpec((0.2,), (0.4,))
    t = np.linspace(0, 200, 5)
    cfg = TrajectoryConfig(dt=0.5, M=400, seed=1)
    excited = np.array([0, 1], dtype=complex)
    avg = trajectory_average(excited, qubit(), noise, cfg, t, lambda p: np.abs(p[:, 1]) ** 2)
    p = np.exp(-t / 200)
    assert np.all(np.abs(avg.mean - p) <= 4 * np.sqrt(p * (1 - p) / cfg.M) + 1e-9)


def test_noise_lowers_late_time_asymmetry():
    spec = preset_intermediate(-2.0, 6)
    psi0 = prepare_tilted_ferromagnet(math.pi / 2, 6)
    t = np.linspace(300, 600, 7)
    noisy = [entanglement_asymmetry(partial_trace_dm(r, [0, 1, 2])) for r in lindblad_oracle(psi0, spec, NoiseSpec.device(6), t)]
    clean = entanglement_asymmetry(partial_trace(evolve(psi0, spec, t), [0, 1, 2]))
    assert np.all(np.array(noisy) < clean)


def test_trace_distance():
    a = np.diag([1.0, 0.0])
    b = np.diag([0.0, 1.0])
    assert trace_distance(a, b) == pytest.approx(1.0)
    assert trace_distance(a, a) == pytest.approx(0.0)
    assert trace_distance(np.outer(PLUS, PLUS.conj()), a) == pytest.approx(math.sqrt(0.5))
