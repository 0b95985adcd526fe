"""Closed-form dynamics of the uniform all-to-all quench from tilted ferromagnets.

With uniform coupling ``g_bar`` the flip-flop Hamiltonian equals
``g_bar (S^2 - S_z^2 - N/2)``.  A tilted ferromagnet lives in the maximal-spin
sector, so only the ``-g_bar S_z^2`` term acts nontrivially: the collective
(Lipkin-Meshkov-Glick) model.  Splitting the chain into ``A`` (``N_A`` qubits)
and its complement, every amplitude acquires the phase
``exp(i g_bar t (m_1 + m_2)^2)``.

Conventions
-----------
``m = N/2 - n`` where ``n`` is the excitation number, so ``m = N/2`` is the
all-``|0>`` state.  Magnetic quantum numbers are stored internally as the
integer ``2m``.  ``g_bar`` is in rad/ns and times in ns; the default is the
device value ``-2 MHz``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import mhz_to_angular

DEFAULT_G_BAR = float(mhz_to_angular(-2.0))


def _two_m(n: int, m) -> int:
    two_m = 2 * m
    k = int(round(two_m))
    if abs(two_m - k) > 1e-9 or abs(k) > n or (n - k) % 2:
        raise ValueError(f"m={m} is not a magnetic quantum number for N={n}")
    return k


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def lmg_coefficient(n: int, m, theta: float) -> float:
    """``C^N_m(theta) = cos^(N/2+m)(theta/2) sin^(N/2-m)(theta/2) sqrt(binom(N, N/2-m))``."""
    k = _two_m(n, m)
    up = (n + k) // 2
    down = (n - k) // 2
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if (up and c == 0.0) or (down and s == 0.0):
        return 0.0
    # sign carried separately so the magnitude can be formed in log space
    sign = (1 if c >= 0 or up % 2 == 0 else -1) * (1 if s >= 0 or down % 2 == 0 else -1)
    log_mag = 0.5 * _log_binom(n, down)
    if up:
        log_mag += up * math.log(abs(c))
    if down:
        log_mag += down * math.log(abs(s))
    return sign * math.exp(log_mag)


def lmg_coefficients(n: int, theta: float) -> np.ndarray:
    """Coefficient vector ordered by excitation number ``n_exc = 0..N`` (``m = N/2 - n_exc``)."""
    return np.array([lmg_coefficient(n, (n - 2 * j) / 2, theta) for j in range(n + 1)])


def magnetizations(n: int) -> np.ndarray:
    """``m`` values matching the ordering of :func:`lmg_coefficients`."""
    return (n - 2 * np.arange(n + 1)) / 2


@dataclass(frozen=True)
class CollectiveState:
    """State in ``|N_A/2, m_1> (x) |(N-N_A)/2, m_2>``.

    ``amplitudes[j1, j2]`` belongs to ``m_1 = N_A/2 - j1`` and
    ``m_2 = (N-N_A)/2 - j2``.
    """

    n: int
    n_a: int
    amplitudes: np.ndarray
    g_bar: float

    @property
    def coefficients(self) -> dict:
        """Map ``(m_1, m_2) -> amplitude``."""
        m1 = magnetizations(self.n_a)
        m2 = magnetizations(self.n - self.n_a)
        return {
            (float(a), float(b)): complex(self.amplitudes[i, j])
            for i, a in enumerate(m1)
            for j, b in enumerate(m2)
        }

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def to_qubits(self) -> np.ndarray:
        """Full ``2^N`` state vector, subsystem ``A`` on the first ``N_A`` qubits."""
        da = dicke_embedding(self.n_a)
        db = dicke_embedding(self.n - self.n_a)
        # A occupies the low bits, so it is the fast index
        return (db @ self.amplitudes.T @ da.T).ravel()

    def reduced(self) -> np.ndarray:
        """``rho^A`` in the collective basis, ordered like ``amplitudes`` rows."""
        return self.amplitudes @ self.amplitudes.conj().T


def _check_sizes(n: int, n_a: int):
    if n < 1 or not 1 <= n_a <= n:
        raise ValueError(f"need 1 <= N_A <= N, got N_A={n_a}, N={n}")


def lmg_evolve_state(theta: float, n: int, n_a: int, t: float, g_bar: float = DEFAULT_G_BAR) -> CollectiveState:
    """Evolve ``|theta>_F`` for time ``t`` (ns) under the LMG Hamiltonian."""
    _check_sizes(n, n_a)
    ca = lmg_coefficients(n_a, theta)
    cb = lmg_coefficients(n - n_a, theta)
    m = magnetizations(n_a)[:, None] + magnetizations(n - n_a)[None, :]
    amp = np.outer(ca, cb) * np.exp(1j * g_bar * t * m**2)
    return CollectiveState(n, n_a, amp, g_bar)


def revival_period(g_bar: float = DEFAULT_G_BAR) -> float:
    """Full-state revival time ``2 pi / |g_bar|`` for even ``N``."""
    return 2 * math.pi / abs(g_bar)


def ea_period(g_bar: float = DEFAULT_G_BAR) -> float:
    """Oscillation period ``pi / |g_bar|`` of the subsystem asymmetry."""
    return math.pi / abs(g_bar)


def lmg_c_constant(theta: float, n_a: int) -> float:
    """``C(theta) = -ln sum_n cos^(4(N_A-n)) sin^(4n) binom(N_A, n)^2`` (nats)."""
    if n_a < 1:
        raise ValueError("N_A must be >= 1")
    p = lmg_coefficients(n_a, theta) ** 2
    # + 0.0 turns -0.0 into 0.0 at theta = 0
    return float(-math.log(np.sum(p**2))) + 0.0


def lmg_reduced_offdiagonal(theta, n, n_a, t, m1, m1p, g_bar: float = DEFAULT_G_BAR) -> complex:
    """Matrix element ``rho^A_{m_1, m_1'}`` from the closed-form sum over ``m_2``."""
    _check_sizes(n, n_a)
    k1, k1p = _two_m(n_a, m1), _two_m(n_a, m1p)
    m1, m1p = k1 / 2, k1p / 2
    w2 = lmg_coefficients(n - n_a, theta) ** 2
    m2 = magnetizations(n - n_a)
    pref = lmg_coefficient(n_a, m1, theta) * lmg_coefficient(n_a, m1p, theta)
    phase = np.exp(1j * g_bar * t * (m1**2 - m1p**2))
    return complex(pref * phase * np.sum(w2 * np.exp(2j * g_bar * t * m2 * (m1 - m1p))))


def lmg_reduced_matrix(theta, n, n_a, t, g_bar: float = DEFAULT_G_BAR) -> np.ndarray:
    """Full ``rho^A`` in the collective basis (rows ordered by excitation number)."""
    m = magnetizations(n_a)
    return np.array(
        [[lmg_reduced_offdiagonal(theta, n, n_a, t, a, b, g_bar) for b in m] for a in m]
    )


def dicke_embedding(n_a: int) -> np.ndarray:
    """Isometry ``(2^N_A, N_A+1)`` mapping collective states to qubit states."""
    pop = np.array([bin(a).count("1") for a in range(1 << n_a)])
    emb = np.zeros((1 << n_a, n_a + 1))
    for j in range(n_a + 1):
        emb[pop == j, j] = math.exp(-0.5 * _log_binom(n_a, j))
    return emb


def lmg_reduced_qubit_matrix(theta, n, n_a, t, g_bar: float = DEFAULT_G_BAR) -> np.ndarray:
    """``rho_A`` in the ``2^N_A`` qubit basis, first qubit in the lowest bit."""
    e = dicke_embedding(n_a)
    return e @ lmg_reduced_matrix(theta, n, n_a, t, g_bar) @ e.T


def lmg_renyi2_ea(theta, n, n_a, t, g_bar: float = DEFAULT_G_BAR):
    """Renyi-2 asymmetry ``ln(Tr rho_A^2 / Tr rho_{A,Q}^2)`` from the coherence factors.

    ``t`` may be an array.  Uses
    ``Tr rho_A^2 = sum |C_1 C_1'|^2 |C_2 C_2'|^2 cos[2 g t (m_1-m_1')(m_2-m_2')]``
    rather than building ``rho_A``.
    """
    _check_sizes(n, n_a)
    t = np.asarray(t, dtype=float)
    p1 = lmg_coefficients(n_a, theta) ** 2
    p2 = lmg_coefficients(n - n_a, theta) ** 2
    d1 = np.subtract.outer(magnetizations(n_a), magnetizations(n_a)).ravel()
    d2 = np.subtract.outer(magnetizations(n - n_a), magnetizations(n - n_a)).ravel()
    w1 = np.outer(p1, p1).ravel()
    w2 = np.outer(p2, p2).ravel()
    # keep only distinct products (m_1-m_1')(m_2-m_2') to shorten the sum
    prod = np.multiply.outer(d1, d2).ravel()
    weight = np.multiply.outer(w1, w2).ravel()
    keys, inv = np.unique(prod, return_inverse=True)
    wsum = np.bincount(inv.ravel(), weights=weight)
    purity = np.cos(2 * g_bar * np.multiply.outer(t, keys)) @ wsum
    purity_q = np.sum(p1**2)
    return np.log(purity / purity_q)


def lmg_ea_identity_check(theta, n, n_a, grid, kind: str = "renyi2", g_bar: float = DEFAULT_G_BAR) -> float:
    """Max deviation of ``EA(t) - (C(theta) - S_A(t))`` along ``grid``.

    ``EA`` and ``S_A`` come from exact state-vector evolution of the uniform
    model (so ``N`` must be small enough for the evolution module).
    ``C`` is the closed form for ``kind="renyi2"`` and ``S(rho_{A,Q}(0))``
    for ``kind="von_neumann"``.
    """
    from .evolution import Propagator, _as_times
    from .model import ANGULAR_FACTOR, preset_intermediate
    from .observables import charge_mask, entanglement_asymmetry, entropy, partial_trace
    from .states import prepare_tilted_ferromagnet

    spec = preset_intermediate(g_bar / ANGULAR_FACTOR, n)
    psi0 = prepare_tilted_ferromagnet(theta, n)
    psi = Propagator(spec).evolve(psi0, _as_times(grid))
    rho = partial_trace(psi, range(n_a))
    ea = entanglement_asymmetry(rho, kind)
    s_a = entropy(rho, kind)
    if kind == "renyi2":
        c = lmg_c_constant(theta, n_a)
    else:
        rho0 = partial_trace(psi0, range(n_a))
        c = float(entropy(rho0 * charge_mask(n_a), kind))
    return float(np.max(np.abs(ea - (c - s_a))))
