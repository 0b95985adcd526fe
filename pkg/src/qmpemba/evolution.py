"""Exact unitary evolution blocked by excitation number.

The XX Hamiltonian conserves the total excitation number, so it splits into
``N + 1`` independent blocks of dimension ``binom(N, n)``.  Each block is
propagated through a cached eigendecomposition (small blocks), a Chebyshev
expansion of the propagator (large blocks) or, on request, scipy's
``expm_multiply``.  No Trotterization is used anywhere.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import jv

from .model import HamiltonianSpec, build_hamiltonian
from .states import sector_indices

# sectors up to this dimension are diagonalized once; larger ones use polynomial stepping
EIG_MAX_DIM = 1000
DENSE_ORACLE_MAX_QUBITS = 10
METHODS = ("auto", "eig", "chebyshev", "krylov")
# Chebyshev window length in units of the inverse spectral half-width
CHEB_WINDOW = 40.0
CHEB_TAIL = 1e-16


def gershgorin_bounds(H) -> tuple[float, float]:
    """Cheap enclosing interval for the spectrum of a real symmetric sparse matrix."""
    H = sp.csr_matrix(H)
    diag = H.diagonal()
    radius = np.asarray(abs(H).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - radius)), float(np.max(diag + radius))


def chebyshev_evolve(H, psi0, times) -> np.ndarray:
    """``exp(-iHt) psi0`` at every ``t`` in ``times`` (ascending, from t=0).

    Chebyshev expansion of the propagator with Bessel coefficients.  The
    polynomial vectors of one window are reused for every output time that
    falls inside it, so dense output grids cost almost nothing extra.  ``H``
    must be real symmetric; the real and imaginary parts of the state are
    propagated as separate real columns.
    """
    H = sp.csr_matrix(H, dtype=float)
    psi0 = np.asarray(psi0, dtype=complex)
    vec = psi0.ndim == 1
    X = psi0.reshape(psi0.shape[0], -1)
    k = X.shape[1]
    t = np.asarray(times, dtype=float)
    out = np.empty((t.size,) + X.shape, dtype=complex)

    lo, hi = gershgorin_bounds(H)
    half = 0.5 * (hi - lo)
    center = 0.5 * (hi + lo)
    if half <= 1e-300:
        # H is a multiple of the identity
        out[:] = np.exp(-1j * center * t)[:, None, None] * X
        return out[:, :, 0] if vec else out
    half *= 1.0 + 1e-9
    Hs = (H - center * sp.identity(H.shape[0], format="csr")) / half
    window = CHEB_WINDOW / half

    cur = X.astype(complex)
    t_cur = 0.0
    j = 0
    while j < t.size:
        stop = j
        while stop + 1 < t.size and t[stop + 1] - t_cur <= window:
            stop += 1
        tau = t[j : stop + 1] - t_cur
        x_max = half * tau.max()
        n_terms = int(x_max + 12.0 * x_max ** (1 / 3) + 24)
        while np.max(np.abs(jv(n_terms, half * tau))) > CHEB_TAIL:
            n_terms += 8
        orders = np.arange(n_terms + 1)
        coef = jv(orders[None, :], half * tau[:, None]) * (-1j) ** orders[None, :]
        coef[:, 1:] *= 2.0
        coef *= np.exp(-1j * center * tau)[:, None]

        R = np.hstack([cur.real, cur.imag])
        acc = np.zeros((tau.size,) + cur.shape, dtype=complex)
        t_prev, t_k = None, R
        for order in range(n_terms + 1):
            if order == 1:
                t_prev, t_k = t_k, Hs @ t_k
            elif order > 1:
                t_prev, t_k = t_k, 2.0 * (Hs @ t_k) - t_prev
            zk = t_k[:, :k] + 1j * t_k[:, k:]
            acc += coef[:, order, None, None] * zk[None]
        out[j : stop + 1] = acc
        cur = acc[-1]
        t_cur = t[stop]
        j = stop + 1
    return out[:, :, 0] if vec else out


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_points`` times from ``t_start`` to ``t_end`` (ns, inclusive)."""

    t_start: float
    t_end: float
    n_points: int

    def __post_init__(self):
        if self.t_start < 0:
            raise ValueError(f"t_start must be >= 0, got {self.t_start}")
        if self.n_points < 1:
            raise ValueError("n_points must be >= 1")
        if self.n_points > 1 and not self.t_end > self.t_start:
            raise ValueError("time grid must be strictly increasing (t_end > t_start)")

    @classmethod
    def from_step(cls, t_end: float, step: float = 1.0, t_start: float = 0.0) -> "TimeGrid":
        n = int(round((t_end - t_start) / step)) + 1
        return cls(t_start, t_start + (n - 1) * step, n)

    @property
    def times(self) -> np.ndarray:
        if self.n_points == 1:
            return np.array([float(self.t_start)])
        return np.linspace(self.t_start, self.t_end, self.n_points)

    @property
    def step(self) -> float:
        return 0.0 if self.n_points == 1 else (self.t_end - self.t_start) / (self.n_points - 1)


def _as_times(grid) -> np.ndarray:
    if isinstance(grid, TimeGrid):
        return grid.times
    t = np.atleast_1d(np.asarray(grid, dtype=float))
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    return t


def _is_uniform(t: np.ndarray) -> bool:
    if t.size < 3:
        return True
    d = np.diff(t)
    return bool(np.allclose(d, d[0], rtol=1e-12, atol=1e-12 * max(1.0, abs(t[-1]))))


class Propagator:
    """Sector-blocked propagator for one Hamiltonian.

    Immutable after construction; eigensystems (``method="eig"``) are computed
    eagerly so instances can be shared between threads.
    """

    def __init__(self, spec: HamiltonianSpec, method: str = "auto", hamiltonian=None):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
        self.spec = spec
        self.n_qubits = spec.n_qubits
        self.H = build_hamiltonian(spec) if hamiltonian is None else sp.csr_matrix(hamiltonian)
        self.indices = sector_indices(self.n_qubits)
        self.blocks = tuple(self.H[idx][:, idx].tocsr() for idx in self.indices)
        max_dim = max(len(idx) for idx in self.indices)
        if method == "auto":
            method = "eig" if max_dim <= EIG_MAX_DIM else "chebyshev"
        self.method = method
        self._eig = None
        if method == "eig":
            self._eig = tuple(la.eigh(b.toarray()) for b in self.blocks)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def block_eigh(self, n: int):
        if self._eig is not None:
            return self._eig[n]
        return la.eigh(self.blocks[n].toarray())

    def _evolve_sector(self, n: int, c0: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Return amplitudes of shape ``(len(t),) + c0.shape`` for sector ``n``."""
        if not np.any(c0):
            return np.zeros((t.size,) + c0.shape, dtype=complex)
        if self.method == "eig":
            E, V = self._eig[n]
            coeff = V.conj().T @ c0
            phases = np.exp(-1j * np.outer(t, E))
            if c0.ndim == 1:
                return (phases * coeff) @ V.T
            return np.einsum("ij,tj,jk->tik", V, phases, coeff)
        if self.method == "chebyshev":
            if t[0] != 0.0:
                return chebyshev_evolve(self.blocks[n], c0, np.concatenate([[0.0], t]))[1:]
            return chebyshev_evolve(self.blocks[n], c0, t)
        A = -1j * self.blocks[n]
        if A.shape[0] == 1:
            return np.exp(np.multiply.outer(t, A.toarray()[0, 0])).reshape((t.size,) + (1,) * c0.ndim) * c0
        out = np.empty((t.size,) + c0.shape, dtype=complex)
        if _is_uniform(t) and t.size > 1:
            start = expm_multiply(A * t[0], c0) if t[0] != 0 else c0
            out[:] = expm_multiply(A, start, start=0.0, stop=t[-1] - t[0], num=t.size, endpoint=True)
            return out
        cur = expm_multiply(A * t[0], c0) if t[0] != 0 else c0.astype(complex)
        out[0] = cur
        for k in range(1, t.size):
            cur = expm_multiply(A * (t[k] - t[k - 1]), cur)
            out[k] = cur
        return out

    def evolve(self, psi0, grid, workers: int = 1) -> np.ndarray:
        """Snapshots ``exp(-iHt)|psi0>``; shape ``(n_times, 2^N)`` or ``(n_times, 2^N, k)``.

        ``psi0`` may hold ``k`` states as columns.  The result does not depend
        on ``workers``: every sector is computed independently and written to
        its own slice.
        """
        psi0 = np.asarray(psi0, dtype=complex)
        if psi0.shape[0] != self.dim:
            raise ValueError(f"state dimension {psi0.shape[0]} does not match 2^{self.n_qubits}")
        t = _as_times(grid)
        out = np.zeros((t.size,) + psi0.shape, dtype=complex)

        def run(n):
            idx = self.indices[n]
            return n, self._evolve_sector(n, psi0[idx], t)

        sectors = range(self.n_qubits + 1)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, sectors))
        else:
            results = [run(n) for n in sectors]
        for n, amp in results:
            out[:, self.indices[n]] = amp
        return out

    def step_unitaries(self, dt: float) -> tuple[np.ndarray, ...]:
        """Dense per-sector ``exp(-iH dt)`` blocks, for repeated short steps."""
        mats = []
        for n in range(self.n_qubits + 1):
            E, V = self.block_eigh(n)
            mats.append((V * np.exp(-1j * E * dt)) @ V.conj().T)
        return tuple(mats)


def _check_state(psi0, n_qubits):
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.ndim != 1 or psi0.size != 1 << n_qubits:
        raise ValueError(f"state of shape {psi0.shape} does not match {n_qubits} qubits")
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"initial state must be normalized, |psi| = {norm}")
    return psi0


def evolve(psi0, spec: HamiltonianSpec, grid, method: str = "auto", workers: int = 1) -> np.ndarray:
    """Exact evolution of ``psi0`` under ``spec``; returns ``(n_times, 2^N)`` snapshots."""
    psi0 = _check_state(psi0, spec.n_qubits)
    return Propagator(spec, method).evolve(psi0, grid, workers=workers)


def evolve_dense_oracle(psi0, spec: HamiltonianSpec, grid) -> np.ndarray:
    """Reference evolution with a full dense matrix exponential at every time."""
    if spec.n_qubits > DENSE_ORACLE_MAX_QUBITS:
        raise ValueError(
            f"dense oracle limited to N <= {DENSE_ORACLE_MAX_QUBITS}, got N={spec.n_qubits}"
        )
    psi0 = _check_state(psi0, spec.n_qubits)
    H = build_hamiltonian(spec).toarray()
    return np.array([la.expm(-1j * H * t) @ psi0 for t in _as_times(grid)])
