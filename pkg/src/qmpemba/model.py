"""XX-type spin Hamiltonians with tunable short- and long-range couplings.

Configuration values are frequencies f/2pi in MHz, exactly as quoted for the
device.  Everything that touches dynamics works in angular units, rad/ns.

Basis convention: global basis index ``b`` stores qubit ``Q_j`` (1-based) in
bit ``j - 1``.  ``|0>`` is the ground state, ``|1>`` the excited state and
``sigma^+ = |1><0|``, so ``sigma^+ sigma^-`` counts excitations.  We take
``sigma_z = |1><1| - |0><0|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

#: rad/ns per MHz of f/2pi
ANGULAR_FACTOR = 2.0 * math.pi * 1e-3


def mhz_to_angular(f_mhz):
    """Convert f/2pi in MHz to angular frequency in rad/ns."""
    return np.asarray(f_mhz, dtype=float) * ANGULAR_FACTOR


def swap_period_ns(g_mhz: float) -> float:
    """Time for a resonant pair to swap an excitation there and back."""
    return 1.0 / (2.0 * abs(g_mhz)) * 1e3


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """Coupling matrix and on-site potentials, both f/2pi in MHz.

    ``ratio`` is only bookkeeping (``|g_N / g_L|`` for the presets); it never
    enters the numerics.
    """

    coupling: np.ndarray
    onsite: np.ndarray
    name: str = "custom"
    ratio: float | None = None

    def __post_init__(self):
        g = np.array(self.coupling, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"coupling must be a square matrix, got shape {g.shape}")
        n = g.shape[0]
        if n < 1:
            raise ValueError("need at least one qubit")
        h = np.zeros(n) if self.onsite is None else np.array(self.onsite, dtype=float)
        if h.shape != (n,):
            raise ValueError(f"onsite must have length {n}, got shape {h.shape}")
        asym = np.max(np.abs(g - g.T)) if n > 1 else 0.0
        if asym > 0:
            i, j = np.unravel_index(np.argmax(np.abs(g - g.T)), g.shape)
            raise ValueError(
                f"coupling matrix is not symmetric: g[{i},{j}]={g[i, j]} vs g[{j},{i}]={g[j, i]}"
            )
        diag = np.abs(np.diag(g))
        if np.any(diag > 0):
            i = int(np.argmax(diag))
            raise ValueError(f"coupling matrix diagonal must be zero: g[{i},{i}]={g[i, i]}")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
            raise ValueError("coupling and onsite values must be finite")
        g.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "coupling", g)
        object.__setattr__(self, "onsite", h)

    @property
    def n_qubits(self) -> int:
        return self.coupling.shape[0]

    @property
    def is_integrable_limit(self) -> bool:
        """True for a preset with vanishing long-range coupling (pure open XX chain)."""
        return self.ratio is not None and math.isinf(self.ratio)

    def with_onsite(self, onsite) -> "HamiltonianSpec":
        return HamiltonianSpec(self.coupling, onsite, name=self.name, ratio=self.ratio)

    def __eq__(self, other):
        if not isinstance(other, HamiltonianSpec):
            return NotImplemented
        return (
            self.n_qubits == other.n_qubits
            and np.array_equal(self.coupling, other.coupling)
            and np.array_equal(self.onsite, other.onsite)
        )

    __hash__ = None


def _basis_bits(n_qubits: int) -> np.ndarray:
    b = np.arange(1 << n_qubits, dtype=np.int64)
    return (b[:, None] >> np.arange(n_qubits)) & 1


def excitation_numbers(n_qubits: int) -> np.ndarray:
    """Excitation count (popcount) of every global basis index."""
    return _basis_bits(n_qubits).sum(axis=1)


def build_hamiltonian(spec: HamiltonianSpec) -> sp.csr_matrix:
    """Sparse Hamiltonian in rad/ns over the full ``2^N`` space.

    ``H = sum_{i<j} g_ij (s+_i s-_j + h.c.) + sum_i h_i s+_i s-_i``.
    """
    n = spec.n_qubits
    dim = 1 << n
    g = mhz_to_angular(spec.coupling)
    h = mhz_to_angular(spec.onsite)
    bits = _basis_bits(n)
    b = np.arange(dim, dtype=np.int64)

    rows = [b]
    cols = [b]
    vals = [bits @ h]
    for i in range(n):
        for j in range(i + 1, n):
            if g[i, j] == 0.0:
                continue
            # flip-flop connects states where the two bits differ
            mask = bits[:, i] != bits[:, j]
            src = b[mask]
            rows.append(src ^ ((1 << i) | (1 << j)))
            cols.append(src)
            vals.append(np.full(src.size, g[i, j]))
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    ).tocsr()
    H.sum_duplicates()
    H.eliminate_zeros()
    return H


def nearest_neighbor_mask(n_qubits: int) -> np.ndarray:
    idx = np.arange(n_qubits)
    return np.abs(idx[:, None] - idx[None, :]) == 1


def preset_strong_short_range(g_n: float, g_l: float, n_qubits: int = 14) -> HamiltonianSpec:
    """Open chain with nearest-neighbour ``g_n`` and uniform long-range ``g_l`` (MHz).

    The device's r~10 regime is ``(-5, -0.5)``; ``g_l = 0`` is the pure XX
    chain, recorded with an infinite ratio.
    """
    if g_n == 0:
        raise ValueError("nearest-neighbour coupling g_n must be nonzero")
    g = np.full((n_qubits, n_qubits), float(g_l))
    g[nearest_neighbor_mask(n_qubits)] = g_n
    np.fill_diagonal(g, 0.0)
    ratio = math.inf if g_l == 0 else abs(g_n / g_l)
    name = "xx_chain" if g_l == 0 else "strong_short_range"
    return HamiltonianSpec(g, np.zeros(n_qubits), name=name, ratio=ratio)


def preset_intermediate(g_bar: float, n_qubits: int = 14) -> HamiltonianSpec:
    """Uniform all-to-all coupling ``g_bar`` (MHz), the r~1 regime."""
    g = np.full((n_qubits, n_qubits), float(g_bar))
    np.fill_diagonal(g, 0.0)
    return HamiltonianSpec(g, np.zeros(n_qubits), name="intermediate", ratio=1.0)


def preset_device_like(
    g_bar: float = -2.0, n_qubits: int = 14, spread: float = 0.4, seed: int = 0
) -> HamiltonianSpec:
    """All-to-all coupling ``g_bar`` with seeded Gaussian pair-to-pair scatter (MHz).

    Stands in for a measured r~1 coupling matrix, whose couplings scatter
    around the target value.  The scatter removes the exact permutation
    symmetry of :func:`preset_intermediate`, which otherwise leaves the model
    integrable under any on-site field.
    """
    rng = np.random.default_rng([int(seed), n_qubits])
    g = np.triu(g_bar + spread * rng.standard_normal((n_qubits, n_qubits)), 1)
    g = g + g.T
    return HamiltonianSpec(g, np.zeros(n_qubits), name="device_like", ratio=1.0)


def integrability_sweep_spec(g: float, g_n: float = -5.0, n_qubits: int = 14) -> HamiltonianSpec:
    """Chain with long-range strength ``g = 1/r`` relative to the nearest-neighbour coupling."""
    return preset_strong_short_range(g_n, g * g_n, n_qubits)


POTENTIAL_KINDS = ("resonant", "linear", "disorder")


@dataclass(frozen=True)
class PotentialProfile:
    """On-site potential generator.

    kind
        ``"resonant"`` (all zero), ``"linear"`` (``h_j = W((N+1)/2 - j)`` MHz,
        so ``W(7.5 - j)`` at N=14) or ``"disorder"`` (uniform in
        ``[-delta_z |g_bar|, +delta_z |g_bar|]``).
    """

    kind: str = "resonant"
    W: float = 0.0
    delta_z: float = 0.0
    g_bar: float = -2.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}; expected one of {POTENTIAL_KINDS}")
        if self.delta_z < 0:
            raise ValueError("delta_z must be nonnegative")

    def onsite(self, n_qubits: int, realization: int = 0) -> np.ndarray:
        if self.kind == "resonant":
            return np.zeros(n_qubits)
        if self.kind == "linear":
            return linear_potential(self.W, n_qubits)
        return sample_disorder(self, n_qubits, realization)


def linear_potential(W: float, n_qubits: int = 14) -> np.ndarray:
    j = np.arange(1, n_qubits + 1)
    return W * ((n_qubits + 1) / 2 - j)


def sample_disorder(profile: PotentialProfile, n_qubits: int, realization: int = 0) -> np.ndarray:
    """Uniform on-site disorder, deterministic in ``(profile.seed, realization)``."""
    if profile.kind != "disorder":
        raise ValueError(f"sample_disorder needs a disorder profile, got kind={profile.kind!r}")
    half_width = profile.delta_z * abs(profile.g_bar)
    rng = np.random.default_rng([int(profile.seed), int(realization)])
    return rng.uniform(-half_width, half_width, size=n_qubits)


def save_matrix(path, matrix) -> None:
    """Write a coupling matrix or on-site vector as whitespace-separated text (MHz)."""
    arr = np.atleast_2d(np.asarray(matrix, dtype=float))
    np.savetxt(path, arr, fmt="%.12g")


def load_matrix(path) -> np.ndarray:
    return np.loadtxt(Path(path), dtype=float, ndmin=2)


def load_spec(coupling_path, onsite_path=None, name: str | None = None) -> HamiltonianSpec:
    g = load_matrix(coupling_path)
    h = np.zeros(g.shape[0]) if onsite_path is None else load_matrix(onsite_path).ravel()
    return HamiltonianSpec(g, h, name=name or Path(coupling_path).stem)
