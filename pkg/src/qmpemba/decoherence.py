"""Open-system dynamics: exact Lindblad propagation and quantum trajectories.

Dephasing of qubit ``j`` is the double commutator ``-kappa_j [Z_j, [Z_j, rho]]``
with ``Z = sigma_z``.  That term damps coherences as ``exp(-4 kappa t)``, so
matching the Ramsey pure-dephasing rate ``gamma_phi`` requires
``kappa = gamma_phi / 4``.  Relaxation is ``sqrt(1/T1) sigma^-``.

The trajectory integrator unravels dephasing diffusively,

    d|psi> = [-iH dt - kappa (Z - <Z>)^2 dt + sqrt(2 kappa) (Z - <Z>) dW] |psi>,

and relaxation with quantum jumps.  Each step applies the exact unitary for
``dt`` followed by the (diagonal) stochastic factor and a renormalization.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .evolution import EIG_MAX_DIM, Propagator, _as_times, chebyshev_evolve
from .model import HamiltonianSpec, _basis_bits, build_hamiltonian, mhz_to_angular

LINDBLAD_MAX_QUBITS = 8
MAX_NORM_DRIFT = 1e-3
# E|chi^2_1 - 1|: mean absolute deviation of dW^2 / dt from one
_CHI2_MAD = 4.0 / math.sqrt(2.0 * math.pi * math.e)
CHUNK = 16
FULL_UNITARY_MAX_DIM = 256

# per-qubit T1 and Ramsey T2* (us) measured at the interaction frequency
DEVICE_T1 = (20.7, 21.2, 13.5, 12.9, 23.5, 15.1, 15.6, 26.3, 20.7, 18.1, 14.3, 23.2, 17.7, 21.2)
DEVICE_T2STAR = (1.61, 1.41, 1.16, 1.26, 1.01, 1.79, 1.01, 0.90, 2.07, 0.94, 1.45, 1.91, 2.07, 0.91)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-qubit ``T1`` and ``T2*`` in microseconds.

    ``relaxation=False`` keeps the pure-dephasing rate derived from both
    times but drops the amplitude-damping channel.  ``np.inf`` disables a
    channel for that qubit.
    """

    t1: tuple
    t2star: tuple
    relaxation: bool = True

    def __post_init__(self):
        t1 = np.atleast_1d(np.asarray(self.t1, dtype=float))
        t2 = np.atleast_1d(np.asarray(self.t2star, dtype=float))
        if t1.shape != t2.shape:
            raise ValueError(f"t1 {t1.shape} and t2star {t2.shape} must have the same length")
        if np.any(t1 <= 0) or np.any(t2 <= 0):
            raise ValueError("T1 and T2* must be positive")
        gphi = 1.0 / t2 - 1.0 / (2.0 * t1)
        if np.any(gphi < -1e-12):
            j = int(np.argmin(gphi))
            raise ValueError(
                f"qubit {j}: T2*={t2[j]} us exceeds 2*T1={2 * t1[j]} us, negative pure dephasing"
            )
        object.__setattr__(self, "t1", tuple(t1.tolist()))
        object.__setattr__(self, "t2star", tuple(t2.tolist()))

    @classmethod
    def device(cls, n_qubits: int = 14, relaxation: bool = True) -> "NoiseSpec":
        if n_qubits > len(DEVICE_T1):
            raise ValueError(f"device table covers {len(DEVICE_T1)} qubits")
        return cls(DEVICE_T1[:n_qubits], DEVICE_T2STAR[:n_qubits], relaxation)

    @classmethod
    def dephasing(cls, gamma_phi_per_us, n_qubits: int) -> "NoiseSpec":
        """Pure dephasing at rate ``gamma_phi`` (1/us) on every qubit, no relaxation."""
        g = np.broadcast_to(np.asarray(gamma_phi_per_us, dtype=float), (n_qubits,))
        with np.errstate(divide="ignore"):
            t2 = np.where(g > 0, 1.0 / g, np.inf)
        return cls(np.full(n_qubits, np.inf), t2, relaxation=False)

    @property
    def n_qubits(self) -> int:
        return len(self.t1)

    @property
    def gamma_phi(self) -> np.ndarray:
        """Pure-dephasing rates in 1/ns."""
        t1 = np.asarray(self.t1)
        t2 = np.asarray(self.t2star)
        return np.clip(1.0 / t2 - 1.0 / (2.0 * t1), 0.0, None) * 1e-3

    @property
    def gamma_1(self) -> np.ndarray:
        """Relaxation rates in 1/ns (zero when relaxation is disabled)."""
        if not self.relaxation:
            return np.zeros(self.n_qubits)
        return 1e-3 / np.asarray(self.t1)

    @property
    def kappa(self) -> np.ndarray:
        """Diffusive measurement strength per qubit, ``gamma_phi / 4`` (1/ns)."""
        return self.gamma_phi / 4.0


@dataclass(frozen=True)
class TrajectoryConfig:
    """Trajectory integration settings; ``dt`` is in ns."""

    dt: float = 0.15
    M: int = 100
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")


def natural_to_ns(dt_natural: float, g_bar_mhz: float = -2.0) -> float:
    """Convert a step in units of ``1/|g_bar|`` (angular) to ns."""
    return dt_natural / abs(float(mhz_to_angular(g_bar_mhz)))


def _check_noise(spec: HamiltonianSpec, noise: NoiseSpec):
    if noise.n_qubits != spec.n_qubits:
        raise ValueError(f"noise covers {noise.n_qubits} qubits, model has {spec.n_qubits}")


def _lowering(n: int, j: int) -> sp.csr_matrix:
    dim = 1 << n
    b = np.arange(dim)
    src = b[(b >> j) & 1 == 1]
    return sp.csr_matrix((np.ones(src.size), (src ^ (1 << j), src)), shape=(dim, dim))


def liouvillian(spec: HamiltonianSpec, noise: NoiseSpec) -> sp.csr_matrix:
    """Sparse generator acting on column-stacked ``vec(rho)``."""
    _check_noise(spec, noise)
    n = spec.n_qubits
    H = build_hamiltonian(spec).astype(complex)
    eye = sp.identity(1 << n, format="csr", dtype=complex)
    # vec(A rho B) = (B^T kron A) vec(rho)
    L = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
    z = (2 * _basis_bits(n) - 1).astype(float)
    for j, k in enumerate(noise.kappa):
        if k > 0:
            # -k [Z,[Z,rho]] is diagonal in this basis: -k (z_a - z_b)^2 rho_ab
            dz = (z[None, :, j] - z[:, None, j]).ravel()
            L = L - k * sp.diags(dz**2)
    for j, g1 in enumerate(noise.gamma_1):
        if g1 > 0:
            a = _lowering(n, j)
            ad_a = (a.T @ a).tocsr()
            L = L + g1 * (sp.kron(a.conj(), a) - 0.5 * sp.kron(eye, ad_a) - 0.5 * sp.kron(ad_a.T, eye))
    return L.tocsr()


def lindblad_oracle(psi0, spec: HamiltonianSpec, noise: NoiseSpec, grid) -> np.ndarray:
    """Exact density matrices ``(n_times, 2^N, 2^N)`` for ``N <= 8``.

    ``psi0`` may be a state vector or a density matrix.
    """
    n = spec.n_qubits
    if n > LINDBLAD_MAX_QUBITS:
        raise ValueError(f"Lindblad oracle limited to N <= {LINDBLAD_MAX_QUBITS}, got N={n}")
    psi0 = np.asarray(psi0, dtype=complex)
    rho0 = np.outer(psi0, psi0.conj()) if psi0.ndim == 1 else psi0
    dim = 1 << n
    if rho0.shape != (dim, dim):
        raise ValueError(f"initial state shape {psi0.shape} does not match {n} qubits")
    t = _as_times(grid)
    L = liouvillian(spec, noise)
    v0 = rho0.reshape(-1, order="F")
    if t.size == 1:
        vs = expm_multiply(L * t[0], v0)[None]
    else:
        start = expm_multiply(L * t[0], v0) if t[0] != 0 else v0
        steps = np.diff(t)
        if np.allclose(steps, steps[0]):
            vs = expm_multiply(L, start, start=0.0, stop=t[-1] - t[0], num=t.size, endpoint=True)
        else:
            vs = [start]
            for h in steps:
                vs.append(expm_multiply(L * h, vs[-1]))
            vs = np.array(vs)
    rho = vs.reshape(t.size, dim, dim).transpose(0, 2, 1)
    return 0.5 * (rho + rho.conj().transpose(0, 2, 1))


class _Stepper:
    """Exact unitary propagation over a fixed step ``h``, cached per step size."""

    def __init__(self, spec: HamiltonianSpec):
        self.prop = Propagator(spec, method="auto")
        self.dense = max(len(i) for i in self.prop.indices) <= EIG_MAX_DIM
        # one full matrix beats a loop over sectors for small systems
        self.full = self.prop.dim <= FULL_UNITARY_MAX_DIM
        self._cache = {}

    def __call__(self, psi, h):
        if not self.dense:
            return chebyshev_evolve(self.prop.H, psi, [0.0, h])[1]
        mats = self._cache.get(h)
        if mats is None:
            mats = self.prop.step_unitaries(h)
            if self.full:
                U = np.zeros((self.prop.dim, self.prop.dim), dtype=complex)
                for idx, block in zip(self.prop.indices, mats):
                    U[np.ix_(idx, idx)] = block
                mats = U
            self._cache[h] = mats
        if self.full:
            return mats @ psi
        out = np.empty_like(psi)
        for idx, U in zip(self.prop.indices, mats):
            out[idx] = U @ psi[idx]
        return out


def _substeps(t, dt):
    """Split each output interval into equal steps no longer than ``dt``."""
    out = []
    for a, b in zip(t[:-1], t[1:]):
        k = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        out.append((k, (b - a) / k))
    return out


def norm_drift_estimate(noise: NoiseSpec, dt: float) -> float:
    """Expected per-step change of ``<psi|psi>`` before renormalization (worst case Var Z = 1)."""
    return float(2.0 * _CHI2_MAD * np.sum(noise.kappa) * dt)


def _check_dt(noise, dt):
    drift = norm_drift_estimate(noise, dt)
    if drift > MAX_NORM_DRIFT:
        dt_max = dt * MAX_NORM_DRIFT / drift
        raise ValueError(
            f"dt={dt} ns gives an expected norm drift {drift:.2e} per step "
            f"(limit {MAX_NORM_DRIFT:.0e}); use dt <= {dt_max:.3g} ns"
        )


def wiener_increments(rng: np.random.Generator, dt: float, size) -> np.ndarray:
    """Independent Wiener increments with mean 0 and variance ``dt``."""
    return rng.normal(0.0, math.sqrt(dt), size=size)


def _trajectory(psi0, stepper, noise, t, dt, rng, z, bits):
    kappa = noise.kappa
    g1 = noise.gamma_1
    active = np.flatnonzero(kappa > 0)
    amp = np.sqrt(2.0 * kappa[active])
    zs = z[:, active]
    n = bits.shape[1]
    psi = psi0.astype(complex).copy()
    out = np.empty((t.size, psi.size), dtype=complex)
    out[0] = psi
    if t[0] > 0:
        # evolve to the first output time
        out[0] = psi = _advance(psi, stepper, t[0], dt, rng, kappa, g1, active, amp, zs, bits, n)
    for i, (k, h) in enumerate(_substeps(t, dt), start=1):
        for _ in range(k):
            psi = _step(psi, stepper, h, rng, kappa, g1, active, amp, zs, bits, n)
        out[i] = psi
    return out


def _advance(psi, stepper, span, dt, rng, kappa, g1, active, amp, zs, bits, n):
    k = max(1, int(math.ceil(span / dt - 1e-9)))
    for _ in range(k):
        psi = _step(psi, stepper, span / k, rng, kappa, g1, active, amp, zs, bits, n)
    return psi


def _step(psi, stepper, h, rng, kappa, g1, active, amp, zs, bits, n):
    psi = stepper(psi, h)
    if active.size:
        p = np.abs(psi) ** 2
        d = zs - p @ zs
        dw = wiener_increments(rng, h, active.size)
        factor = 1.0 - h * (d**2 @ kappa[active]) + d @ (amp * dw)
        psi = psi * factor
        psi /= np.linalg.norm(psi)
    if np.any(g1 > 0):
        p = np.abs(psi) ** 2
        occ = p @ bits
        jump_p = h * g1 * occ
        r = rng.random()
        if r < jump_p.sum():
            j = int(np.searchsorted(np.cumsum(jump_p), r, side="right"))
            j = min(j, n - 1)
            src = np.flatnonzero(bits[:, j])
            new = np.zeros_like(psi)
            new[src ^ (1 << j)] = psi[src]
            psi = new
        else:
            psi = psi * np.exp(-0.5 * h * (bits @ g1))
        psi /= np.linalg.norm(psi)
    return psi


def sse_trajectory(psi0, spec, noise, traj_config, grid, traj_index: int = 0) -> np.ndarray:
    """One stochastic pure-state path sampled at ``grid``; shape ``(n_times, 2^N)``.

    The random stream is ``default_rng([seed, traj_index])``, so a path is
    fixed by the config and its index.
    """
    _check_noise(spec, noise)
    _check_dt(noise, traj_config.dt)
    t = _as_times(grid)
    psi0 = np.asarray(psi0, dtype=complex)
    n = spec.n_qubits
    bits = _basis_bits(n).astype(float)
    rng = np.random.default_rng([int(traj_config.seed), int(traj_index)])
    return _trajectory(psi0, _Stepper(spec), noise, t, traj_config.dt, rng, 2 * bits - 1, bits)


@dataclass
class TrajectoryAverage:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    M: int


def trajectory_average(
    psi0, spec, noise, traj_config, grid, observable_extractor, workers: int = 1
) -> TrajectoryAverage:
    """Mean and standard error of ``observable_extractor(path)`` over ``M`` trajectories.

    ``observable_extractor`` maps a path of shape ``(n_times, 2^N)`` to an
    array with a leading time axis.  Trajectories run in fixed chunks and are
    accumulated in index order, so the result does not depend on ``workers``.
    """
    _check_noise(spec, noise)
    _check_dt(noise, traj_config.dt)
    t = _as_times(grid)
    psi0 = np.asarray(psi0, dtype=complex)
    n = spec.n_qubits
    bits = _basis_bits(n).astype(float)
    z = 2 * bits - 1
    stepper = _Stepper(spec)
    if stepper.dense:
        # populate the unitary cache up front so worker threads only read it
        for _, h in set(_substeps(t, traj_config.dt)):
            stepper(psi0, h)

    def run_chunk(start):
        res = []
        for i in range(start, min(start + CHUNK, traj_config.M)):
            rng = np.random.default_rng([int(traj_config.seed), i])
            path = _trajectory(psi0, stepper, noise, t, traj_config.dt, rng, z, bits)
            res.append(np.asarray(observable_extractor(path)))
        return res

    starts = range(0, traj_config.M, CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_chunk, starts))
    else:
        chunks = [run_chunk(s) for s in starts]

    total = None
    total_sq = None
    for chunk in chunks:
        for val in chunk:
            if total is None:
                total = np.zeros_like(val, dtype=np.result_type(val, float))
                total_sq = np.zeros(val.shape)
            total = total + val
            total_sq = total_sq + np.abs(val) ** 2
    M = traj_config.M
    mean = total / M
    if M > 1:
        var = np.clip(total_sq / M - np.abs(mean) ** 2, 0.0, None) * M / (M - 1)
        err = np.sqrt(var / M)
    else:
        err = np.zeros(mean.shape)
    return TrajectoryAverage(t, mean, err, M)


def trace_distance(rho, sigma) -> float:
    """``(1/2) ||rho - sigma||_1`` for Hermitian matrices."""
    w = np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma))
    return float(0.5 * np.sum(np.abs(w)))
