"""Effective qubit-qubit coupling through a bus resonator, a coupler and direct capacitance.

Capacitances are in fF and mode frequencies are f/2pi in GHz.  Bare couplings
come out in GHz and the effective coupling in MHz.

``k_sign`` is the relative sign of the resonator mode profile at the two
qubits (+1 for qubits on the same side of the resonator, -1 for opposite
sides); only its sign and ``|k| = sqrt(cr1 / cr2)`` enter the couplings.

Second-order (Schrieffer-Wolff) expressions are checked against
:func:`normal_modes`, an exact diagonalization of the quadratic (harmonic)
circuit Hamiltonian that keeps the counter-rotating terms.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize_scalar

DISPERSIVE_THRESHOLD = 0.3
HIERARCHY_FACTOR = 5.0


@dataclass(frozen=True)
class CouplerParams:
    c1c: float
    c2c: float
    cc: float
    omega_c: float


@dataclass(frozen=True)
class CircuitParams:
    c1: float
    c2: float
    c1r: float
    c2r: float
    c12: float
    cr1: float
    cr2: float
    k_sign: int
    omega1: float
    omega2: float
    omega_r: float
    coupler: CouplerParams | None = None
    k: float | None = None

    def __post_init__(self):
        caps = dict(c1=self.c1, c2=self.c2, c1r=self.c1r, c2r=self.c2r, c12=self.c12, cr1=self.cr1, cr2=self.cr2)
        freqs = dict(omega1=self.omega1, omega2=self.omega2, omega_r=self.omega_r)
        if self.coupler is not None:
            c = self.coupler
            caps.update(c1c=c.c1c, c2c=c.c2c, cc=c.cc)
            freqs.update(omega_c=c.omega_c)
        for name, v in {**caps, **freqs}.items():
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")
        if self.k_sign not in (1, -1):
            raise ValueError(f"k_sign must be +1 or -1, got {self.k_sign}")
        if self.k is not None:
            expected = math.sqrt(self.cr1 / self.cr2)
            if np.sign(self.k) != self.k_sign or not math.isclose(abs(self.k), expected, rel_tol=1e-6):
                raise ValueError(
                    f"k={self.k} inconsistent with k_sign={self.k_sign} and |k|=sqrt(cr1/cr2)={expected:.6g}"
                )
        big = min(self.c1, self.c2, self.cr1, self.cr2)
        mid = (self.c1r, self.c2r)
        if big < HIERARCHY_FACTOR * max(mid) or min(mid) < HIERARCHY_FACTOR * self.c12:
            warnings.warn(
                "capacitance hierarchy C_j, C_r >> C_jr >> C_12 is violated; "
                "the coupling formulas assume it",
                stacklevel=3,
            )

    def with_omega_r(self, omega_r: float) -> "CircuitParams":
        return replace(self, omega_r=omega_r)


@dataclass(frozen=True)
class BareCouplings:
    g1r: float
    g2r: float
    g12: float
    eta: float
    g1c: float = 0.0
    g2c: float = 0.0


def bare_couplings(params: CircuitParams) -> BareCouplings:
    """Mode-mode couplings in GHz and the resonator correction ``eta``."""
    p = params
    g1r = 0.5 * p.c1r / math.sqrt(p.c1 * p.cr1) * math.sqrt(p.omega1 * p.omega_r)
    g2r = 0.5 * p.k_sign * p.c2r / math.sqrt(p.c2 * p.cr2) * math.sqrt(p.omega2 * p.omega_r)
    res_cap = p.k_sign * p.c1r * p.c2r / math.sqrt(p.cr1 * p.cr2)
    eta = res_cap / p.c12
    total = p.c12 + res_cap
    g1c = g2c = 0.0
    if p.coupler is not None:
        c = p.coupler
        total += c.c1c * c.c2c / c.cc
        g1c = 0.5 * c.c1c / math.sqrt(p.c1 * c.cc) * math.sqrt(p.omega1 * c.omega_c)
        g2c = 0.5 * c.c2c / math.sqrt(p.c2 * c.cc) * math.sqrt(p.omega2 * c.omega_c)
    g12 = 0.5 * total / math.sqrt(p.c1 * p.c2) * math.sqrt(p.omega1 * p.omega2)
    return BareCouplings(g1r, g2r, g12, eta, g1c, g2c)


def _detunings(wq, wm, g, label):
    delta = wq - wm
    if delta == 0:
        raise ValueError(f"{label}: zero detuning, dispersive expressions diverge")
    if abs(g / delta) > DISPERSIVE_THRESHOLD:
        warnings.warn(
            f"{label}: |g/Delta| = {abs(g / delta):.2f} > {DISPERSIVE_THRESHOLD}, "
            "dispersive approximation unreliable",
            stacklevel=4,
        )
    return delta, wq + wm


def _mediated(ga, gb, wa, wb, wm, label):
    da, sa = _detunings(wa, wm, ga, f"{label}1")
    db, sb = _detunings(wb, wm, gb, f"{label}2")
    return 0.5 * ga * gb * (1 / da + 1 / db - 1 / sa - 1 / sb)


@dataclass(frozen=True)
class EffectiveCoupling:
    """Contributions to the effective coupling, MHz."""

    resonator: float
    coupler: float
    direct: float

    @property
    def total(self) -> float:
        return self.resonator + self.coupler + self.direct


def coupling_terms(params: CircuitParams) -> EffectiveCoupling:
    b = bare_couplings(params)
    p = params
    res = _mediated(b.g1r, b.g2r, p.omega1, p.omega2, p.omega_r, "resonator-qubit")
    cpl = 0.0
    if p.coupler is not None:
        cpl = _mediated(b.g1c, b.g2c, p.omega1, p.omega2, p.coupler.omega_c, "coupler-qubit")
    return EffectiveCoupling(1e3 * res, 1e3 * cpl, 1e3 * b.g12)


def effective_coupling(params: CircuitParams) -> float:
    """Second-order effective coupling ``g~12`` in MHz."""
    return coupling_terms(params).total


def dressed_frequencies(params: CircuitParams) -> tuple[float, float]:
    """Dispersively shifted qubit frequencies in GHz."""
    b = bare_couplings(params)
    p = params
    out = []
    for w, gr, gc, label in ((p.omega1, b.g1r, b.g1c, "1"), (p.omega2, b.g2r, b.g2c, "2")):
        d, s = _detunings(w, p.omega_r, gr, f"resonator-qubit{label}")
        shift = gr**2 * (1 / d - 1 / s)
        if p.coupler is not None:
            d, s = _detunings(w, p.coupler.omega_c, gc, f"coupler-qubit{label}")
            shift += gc**2 * (1 / d - 1 / s)
        out.append(w + shift)
    return out[0], out[1]


def _mode_matrix(params: CircuitParams):
    """Frequencies and coupling matrix of (qubit1, qubit2, resonator[, coupler])."""
    b = bare_couplings(params)
    p = params
    w = [p.omega1, p.omega2, p.omega_r]
    g = np.zeros((4, 4))
    g[0, 1] = b.g12
    g[0, 2] = b.g1r
    g[1, 2] = b.g2r
    if p.coupler is not None:
        w.append(p.coupler.omega_c)
        g[0, 3] = b.g1c
        g[1, 3] = b.g2c
    n = len(w)
    g = g[:n, :n]
    return np.array(w), g + g.T


def normal_modes(omegas, g) -> np.ndarray:
    """Exact normal-mode frequencies of coupled harmonic modes (ascending).

    ``H = sum w_i b_i^+ b_i + sum_{i<j} g_ij (b_i^+ b_j + b_i b_j^+ - b_i^+ b_j^+ - b_i b_j)``,
    diagonalized as a bosonic quadratic form (Bogoliubov).
    """
    w = np.asarray(omegas, dtype=float)
    g = np.asarray(g, dtype=float)
    A = np.diag(w) + g
    B = -g
    n = w.size
    dyn = np.block([[A, B], [-B, -A]])
    ev = la.eigvals(dyn)
    if np.max(np.abs(ev.imag)) > 1e-9 * np.max(np.abs(ev)):
        raise ValueError("quadratic form is not positive: dynamically unstable modes")
    return np.sort(ev.real)[n:]


def brute_force_coupling(params: CircuitParams, span: float = 0.05) -> float:
    """Half the minimum splitting of the two qubit-like normal modes, in MHz.

    ``omega1`` is scanned around ``omega2`` (within ``span`` GHz) to find the
    anticrossing; the two modes nearest ``omega2`` are taken as qubit-like.
    The sign is not resolved.
    """
    w0, g = _mode_matrix(params)

    def gap(w1):
        w = w0.copy()
        w[0] = w1
        modes = normal_modes(w, g)
        near = np.sort(modes[np.argsort(np.abs(modes - params.omega2))[:2]])
        return near[1] - near[0]

    res = minimize_scalar(
        gap,
        bounds=(params.omega2 - span, params.omega2 + span),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return 0.5 * 1e3 * float(res.fun)


def exact_qubit_frequency(params: CircuitParams, qubit: int = 1) -> float:
    """Qubit-like normal mode of one qubit with its mediators (other qubit decoupled), GHz."""
    w, g = _mode_matrix(params)
    keep = [0 if qubit == 1 else 1] + list(range(2, w.size))
    w = w[keep]
    g = g[np.ix_(keep, keep)]
    modes = normal_modes(w, g)
    return float(modes[np.argmin(np.abs(modes - w[0]))])


def sweep_omega_r(params: CircuitParams, omega_r_values) -> np.ndarray:
    """Rows ``(omega_r, g1r, g2r, g12, eta, g~12 [MHz], w~1, w~2)`` for each resonator frequency."""
    rows = []
    for wr in omega_r_values:
        p = params.with_omega_r(float(wr))
        b = bare_couplings(p)
        rows.append((wr, b.g1r, b.g2r, b.g12, b.eta, effective_coupling(p), *dressed_frequencies(p)))
    return np.array(rows)


SWEEP_COLUMNS = ("omega_r_ghz", "g1r_ghz", "g2r_ghz", "g12_ghz", "eta", "g_eff_mhz", "omega1_dressed_ghz", "omega2_dressed_ghz")
