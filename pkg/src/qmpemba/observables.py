"""Reduced density matrices, entropies, entanglement asymmetry and diagnostics.

Subsystems are given as 0-based qubit indices.  In a reduced density matrix
the first listed qubit occupies the least significant bit.  All entropies are
in nats.  Functions taking ``psi`` or ``rho`` accept a leading batch (time)
axis.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .model import HamiltonianSpec, build_hamiltonian
from .states import sector_indices

log = logging.getLogger(__name__)

ENTROPY_KINDS = ("von_neumann", "renyi2")
NEG_EIG_TOL = 1e-10

POISSON_R = 2 * math.log(2) - 1  # 0.3863
GOE_R = 0.5307


def _n_qubits_of(size: int) -> int:
    n = int(round(math.log2(size)))
    if 1 << n != size:
        raise ValueError(f"dimension {size} is not a power of two")
    return n


def _check_subsystem(subsystem, n_qubits):
    sub = [int(q) for q in subsystem]
    if len(set(sub)) != len(sub):
        raise ValueError(f"subsystem indices must be distinct: {sub}")
    bad = [q for q in sub if not 0 <= q < n_qubits]
    if bad:
        raise ValueError(f"subsystem indices {bad} out of range for {n_qubits} qubits")
    return sub


def partial_trace(psi, subsystem) -> np.ndarray:
    """Reduced density matrix of ``subsystem`` for a pure state (or a batch of them)."""
    psi = np.asarray(psi)
    batched = psi.ndim == 2
    if not batched:
        psi = psi[None]
    n = _n_qubits_of(psi.shape[1])
    sub = _check_subsystem(subsystem, n)
    # tensor axis 1 + k holds qubit n - 1 - k
    tens = psi.reshape((psi.shape[0],) + (2,) * n)
    keep = [1 + (n - 1 - q) for q in reversed(sub)]
    rest = [1 + (n - 1 - q) for q in reversed(range(n)) if q not in sub]
    m = tens.transpose([0] + rest + keep).reshape(psi.shape[0], 1 << (n - len(sub)), 1 << len(sub))
    rho = np.einsum("tra,trb->tab", m, m.conj())
    return rho if batched else rho[0]


def partial_trace_dm(rho, subsystem) -> np.ndarray:
    """Reduced density matrix of ``subsystem`` from a full density matrix."""
    rho = np.asarray(rho)
    n = _n_qubits_of(rho.shape[-1])
    sub = _check_subsystem(subsystem, n)
    tens = rho.reshape((2,) * (2 * n))
    keep = [n - 1 - q for q in reversed(sub)]
    rest = [n - 1 - q for q in reversed(range(n)) if q not in sub]
    perm = rest + keep + [n + a for a in rest] + [n + a for a in keep]
    d_r, d_a = 1 << (n - len(sub)), 1 << len(sub)
    m = tens.transpose(perm).reshape(d_r, d_a, d_r, d_a)
    return np.einsum("rarb->ab", m)


def _eigenvalues(rho) -> np.ndarray:
    w = np.linalg.eigvalsh(rho)
    worst = w.min()
    if worst < -NEG_EIG_TOL:
        raise ValueError(f"density matrix is not positive semidefinite: min eigenvalue {worst:.3e}")
    return np.clip(w, 0.0, None)


def von_neumann_entropy(rho):
    """``-Tr rho ln rho``; eigenvalues in ``[-1e-10, 0)`` are clipped to zero."""
    w = _eigenvalues(rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, -w * np.log(w), 0.0)
    return terms.sum(axis=-1)


def renyi2_entropy(rho):
    """``-ln Tr rho^2``."""
    _eigenvalues(rho)
    rho = np.asarray(rho)
    purity = np.einsum("...ab,...ba->...", rho, rho).real
    return -np.log(purity)


def entropy(rho, kind: str = "von_neumann"):
    if kind == "von_neumann":
        return von_neumann_entropy(rho)
    if kind == "renyi2":
        return renyi2_entropy(rho)
    raise ValueError(f"unknown entropy kind {kind!r}; expected one of {ENTROPY_KINDS}")


def charges(n_a: int, sign: int = 1) -> np.ndarray:
    """Eigenvalue of ``Q_A = sum sigma_z`` for every local basis index."""
    pop = np.array([bin(a).count("1") for a in range(1 << n_a)])
    return sign * (2 * pop - n_a)


def charge_mask(n_a: int, sign: int = 1) -> np.ndarray:
    q = charges(n_a, sign)
    return q[:, None] == q[None, :]


@dataclass
class ChargeProjection:
    """Block-diagonal part of ``rho`` in the eigenspaces of ``Q_A``."""

    matrix: np.ndarray
    blocks: dict = field(default_factory=dict)

    @property
    def weights(self) -> dict:
        return {q: float(np.trace(b).real) for q, b in self.blocks.items()}


def charge_project(rho, sign: int = 1) -> ChargeProjection:
    rho = np.asarray(rho)
    n_a = _n_qubits_of(rho.shape[-1])
    q = charges(n_a, sign)
    proj = rho * (q[:, None] == q[None, :])
    blocks = {}
    for value in sorted(set(q.tolist())):
        idx = np.flatnonzero(q == value)
        blocks[int(value)] = proj[..., idx[:, None], idx[None, :]]
    return ChargeProjection(proj, blocks)


def entanglement_asymmetry(rho, kind: str = "von_neumann", sign: int = 1):
    """``S(rho_{A,Q}) - S(rho_A)`` for a reduced density matrix (batch allowed)."""
    rho = np.asarray(rho)
    n_a = _n_qubits_of(rho.shape[-1])
    projected = rho * charge_mask(n_a, sign)
    return entropy(projected, kind) - entropy(rho, kind)


def page_value(n_a: int, n: int) -> float:
    """Leading-order Page estimate ``ln d_A - d_A / (2 d_B)`` of random-state entanglement."""
    if n_a == 0:
        return 0.0
    if not 1 <= n_a <= n / 2:
        raise ValueError(f"need 1 <= N_A <= N/2, got N_A={n_a}, N={n}")
    d_a = 2.0**n_a
    d_b = 2.0 ** (n - n_a)
    return math.log(d_a) - d_a / (2 * d_b)


def sigma_z_expectations(psi) -> np.ndarray:
    """``<sigma_z^j>`` for every qubit (``sigma_z = |1><1| - |0><0|``)."""
    psi = np.asarray(psi)
    n = _n_qubits_of(psi.shape[-1])
    probs = np.abs(psi) ** 2
    bits = (np.arange(1 << n)[:, None] >> np.arange(n)) & 1
    return probs @ (2 * bits - 1)


def imbalance(psi):
    """Staggered magnetization normalized to 1 for the untilted Neel state.

    ``I = sum_j (-1)^(j+1) <sz_j> / sum_j (-1)^(j+1) <sz_j>_Neel`` with 1-based ``j``.
    This normalization is a reconstruction; the source gives no formula.
    """
    sz = sigma_z_expectations(psi)
    n = sz.shape[-1]
    stagger = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    reference = stagger @ np.where(np.arange(n) % 2 == 0, -1.0, 1.0)
    return (sz @ stagger) / reference


@dataclass(frozen=True)
class SpacingStats:
    mean: float
    n_ratios: int
    n_dropped: int


def spacing_ratio_stats(energies, tol: float = 1e-12) -> SpacingStats:
    """Mean of ``min(d_n, d_n+1) / max(d_n, d_n+1)`` over consecutive level spacings.

    Spacings below ``tol`` (exact degeneracies) are dropped and counted.
    """
    e = np.sort(np.asarray(energies, dtype=float))
    d = np.diff(e)
    keep = d > tol
    dropped = int(np.count_nonzero(~keep))
    d = d[keep]
    if d.size < 2:
        raise ValueError("need at least three non-degenerate levels")
    r = np.minimum(d[:-1], d[1:]) / np.maximum(d[:-1], d[1:])
    if dropped:
        log.info("dropped %d degenerate spacings (< %g)", dropped, tol)
    return SpacingStats(float(r.mean()), int(r.size), dropped)


def sector_spectrum(spec: HamiltonianSpec, sector: int | None = None) -> np.ndarray:
    """Eigenvalues (rad/ns) in one excitation sector; default is ``S_z = 0`` (n = N/2)."""
    n = spec.n_qubits
    if sector is None:
        sector = n // 2
    idx = sector_indices(n)[sector]
    if idx.size < 3:
        raise ValueError(f"sector {sector} has dimension {idx.size} < 3")
    H = build_hamiltonian(spec)
    return la.eigvalsh(H[idx][:, idx].toarray())


def level_spacing_ratio(spec: HamiltonianSpec, sector: int | None = None) -> float:
    return spacing_ratio_stats(sector_spectrum(spec, sector)).mean


def coherent_state_amplitudes(theta, phi, n_a: int) -> np.ndarray:
    """Spin-coherent state ``exp(-i phi Sz') exp(-i theta Sy')|0...0>`` on ``n_a`` qubits.

    ``Sz'`` and ``Sy'`` are sums of Pauli matrices over 2; amplitudes are
    returned with shape ``theta.shape + (2**n_a,)``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    k = np.array([bin(a).count("1") for a in range(1 << n_a)])
    c = np.cos(theta / 2)[..., None]
    s = np.sin(theta / 2)[..., None]
    # sigma_z|0> = -|0>, so the phase of |0> is exp(+i phi/2)
    phase = np.exp(0.5j * phi[..., None] * (n_a - 2 * k))
    return c ** (n_a - k) * s**k * phase


def q_function_at(rho, theta, phi) -> np.ndarray:
    rho = np.asarray(rho)
    n_a = _n_qubits_of(rho.shape[-1])
    v = coherent_state_amplitudes(theta, phi, n_a)
    return np.einsum("...a,ab,...b->...", v.conj(), rho, v).real


def q_function_grid(n_theta: int = 64, n_phi: int = 128):
    theta = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phi = (np.arange(n_phi) + 0.5) * 2 * np.pi / n_phi
    return theta, phi


def q_function(rho, n_theta: int = 64, n_phi: int = 128) -> np.ndarray:
    """Husimi function ``<theta,phi|rho|theta,phi>`` on a midpoint grid, shape ``(n_theta, n_phi)``."""
    theta, phi = q_function_grid(n_theta, n_phi)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    return q_function_at(rho, tt, pp)


def azimuthal_variance(Q, theta=None) -> float:
    """Variance of ``Q`` along phi, averaged over theta rows with weight ``sin(theta)``."""
    Q = np.asarray(Q)
    if theta is None:
        theta = q_function_grid(Q.shape[0], Q.shape[1])[0]
    w = np.sin(theta)
    return float(np.sum(w * Q.var(axis=1)) / np.sum(w))


def azimuthal_peaks(Q, rel_height: float = 0.5) -> np.ndarray:
    """Indices of local maxima along phi in the theta row holding the global maximum."""
    Q = np.asarray(Q)
    row = Q[np.unravel_index(np.argmax(Q), Q.shape)[0]]
    left = np.roll(row, 1)
    right = np.roll(row, -1)
    is_peak = (row > left) & (row >= right) & (row >= rel_height * row.max())
    return np.flatnonzero(is_peak)


@dataclass
class EACurve:
    """Time series of an entanglement-asymmetry (or any scalar) observable.

    ``stderr`` is filled for ensemble or trajectory averages.
    """

    times: np.ndarray
    values: np.ndarray
    entropy_kind: str = "von_neumann"
    metadata: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None

    def __post_init__(self):
        # accept a TimeGrid as well as an array of times
        self.times = np.asarray(getattr(self.times, "times", self.times), dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ValueError(
                f"times {self.times.shape} and values {self.values.shape} must be equal-length 1D arrays"
            )
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.values.shape:
                raise ValueError("stderr must match values")

    def to_csv(self, path) -> None:
        err = np.zeros_like(self.values) if self.stderr is None else self.stderr
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t_ns,value,stderr\n")
            for row in zip(self.times, self.values, err):
                fh.write(",".join(repr(float(x)) for x in row) + "\n")

    def to_dict(self) -> dict:
        return {
            "times": self.times.tolist(),
            "values": self.values.tolist(),
            "stderr": None if self.stderr is None else self.stderr.tolist(),
            "entropy_kind": self.entropy_kind,
            "metadata": self.metadata,
        }


def ea_curve(psi_t, times, subsystem, kind: str = "von_neumann", metadata=None) -> EACurve:
    """EA of ``subsystem`` along a batch of snapshots ``psi_t`` (shape ``(T, 2^N)``)."""
    rho = partial_trace(psi_t, subsystem)
    return EACurve(times, entanglement_asymmetry(rho, kind), kind, dict(metadata or {}))
