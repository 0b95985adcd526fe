"""Tilted product initial states and U(1) charge-sector bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import excitation_numbers

FAMILIES = ("neel", "ferromagnetic")


def ry(theta: float) -> np.ndarray:
    """Single-qubit rotation exp(-i theta sigma_y / 2) in the (|0>, |1>) basis."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def product_state(site_states) -> np.ndarray:
    """Tensor product with the first site in the least significant bit."""
    psi = np.ones(1, dtype=complex)
    for v in site_states:
        psi = np.kron(np.asarray(v, dtype=complex), psi)
    return psi


def prepare_tilted_neel(theta: float, n_qubits: int) -> np.ndarray:
    """``R_y(theta)`` applied to ``|0101...>`` (odd sites ``|0>``, even sites ``|1>``)."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    r = ry(theta)
    return product_state(r[:, (j - 1) % 2] for j in range(1, n_qubits + 1))


def prepare_tilted_ferromagnet(theta: float, n_qubits: int) -> np.ndarray:
    """``(cos(theta/2)|0> + sin(theta/2)|1>)`` on every site."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    r = ry(theta)
    return product_state(r[:, 0] for _ in range(n_qubits))


@dataclass(frozen=True)
class TiltedStateSpec:
    family: str
    theta: float
    n_qubits: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown state family {self.family!r}; expected one of {FAMILIES}")
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")

    def prepare(self) -> np.ndarray:
        if self.family == "neel":
            return prepare_tilted_neel(self.theta, self.n_qubits)
        return prepare_tilted_ferromagnet(self.theta, self.n_qubits)


@lru_cache(maxsize=32)
def sector_indices(n_qubits: int) -> tuple[np.ndarray, ...]:
    """Global basis indices of each excitation-number sector, ascending."""
    counts = excitation_numbers(n_qubits)
    out = []
    for n in range(n_qubits + 1):
        idx = np.flatnonzero(counts == n)
        idx.setflags(write=False)
        out.append(idx)
    return tuple(out)


def charge_sector_decompose(psi: np.ndarray) -> dict[int, np.ndarray]:
    """Split a state into its excitation-number components.

    Returns ``{n: amplitudes}`` with amplitudes ordered as ``sector_indices(N)[n]``.
    """
    psi = np.asarray(psi)
    n_qubits = int(round(np.log2(psi.size)))
    if 1 << n_qubits != psi.size:
        raise ValueError(f"state length {psi.size} is not a power of two")
    return {n: psi[idx].copy() for n, idx in enumerate(sector_indices(n_qubits))}


def sector_weights(psi: np.ndarray) -> np.ndarray:
    return np.array([np.vdot(c, c).real for c in charge_sector_decompose(psi).values()])


def reassemble(components: dict[int, np.ndarray], n_qubits: int) -> np.ndarray:
    psi = np.zeros(1 << n_qubits, dtype=complex)
    idx = sector_indices(n_qubits)
    for n, c in components.items():
        psi[idx[n]] = c
    return psi


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-10) -> bool:
    """Compare two states after removing the phase of ``a``'s largest amplitude."""
    a = np.asarray(a)
    b = np.asarray(b)
    k = int(np.argmax(np.abs(a)))
    if abs(b[k]) == 0:
        return False
    phase = b[k] / a[k]
    phase /= abs(phase)
    return bool(np.max(np.abs(a * phase - b)) <= atol)
