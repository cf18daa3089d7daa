"""Parameter containers, derived rates and Hamiltonian builders.

Every rate is stored in angular units (rad/s).  Three frames are covered:

* the rotating-frame two-phonon Jaynes-Cummings model (``build_two_phonon_jc``),
* the lab-frame spin-1 model with microwave and RF drives (``build_lab_frame``),
* the frame that diagonalizes the driven qubit (``build_dressed_frame``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

from .hilbert import (
    DTYPE,
    HilbertConfig,
    LinearOperator,
    annihilation,
    qubit_lowering,
    spin1_ops,
)

MU_B = 9.274009994e-24  # J/T
G_S = 2.0
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J/K
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SystemParams:
    """Rotating-frame parameters of the driven two-phonon JC model (rad/s)."""

    g2: float
    Omega: float = 0.0
    delta_sigma: float = 0.0
    delta_m: float = 0.0
    gamma_m: float = 0.0
    n_th: float = 0.0
    gamma_z: float = 0.0

    def __post_init__(self):
        for name in ("g2", "Omega", "gamma_m", "gamma_z", "n_th"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        for name in ("delta_sigma", "delta_m"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def loss_rate(self) -> float:
        """Effective single-phonon loss rate ``gamma_m * n_th``."""
        return self.gamma_m * self.n_th

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DeviceParams:
    z_zpf: float
    omega_m: float
    Q: float
    T: float
    gamma_z: float
    G2: float
    G1: float = 0.0

    def __post_init__(self):
        for name in ("z_zpf", "omega_m", "Q", "T"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.G2 < 0:
            raise ValueError("G2 must be >= 0")
        if self.gamma_z < 0:
            raise ValueError("gamma_z must be >= 0")

    @property
    def gamma_m(self) -> float:
        return self.omega_m / self.Q

    def with_(self, **changes) -> "DeviceParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class EffectiveModelParams:
    """Lab-frame NV parameters: zero-field splitting and the two drives."""

    D: float = TWO_PI * 2.88e9
    omega_x: float = 0.0
    Omega_x: float = 0.0
    omega_z_drive: float = 0.0
    Omega_z: float = 0.0

    @property
    def Delta(self) -> float:
        """Microwave detuning ``D - omega_x``."""
        return self.D - self.omega_x

    def hierarchy_violations(self, factor: float = 10.0, lab_amplitude: bool = False) -> list[str]:
        """Regime conditions of the effective-qubit reduction that fail at ``factor``."""
        out = []
        if self.Omega_x * factor > abs(self.Delta) * (1 + 1e-12):
            out.append(f"Omega_x not << Delta (ratio {abs(self.Delta) / self.Omega_x:.3g})")
        if self.Omega_x * factor > self.omega_x * (1 + 1e-12):
            out.append(f"Omega_x not << omega_x (ratio {self.omega_x / self.Omega_x:.3g})")
        if self.Omega_x > 0 or self.Delta != 0:
            w_sigma = dressed_tls(self, lab_amplitude=lab_amplitude)["omega_de"]
            if self.Omega_z * factor > w_sigma * (1 + 1e-12):
                out.append(f"Omega_z not << omega_sigma (ratio {w_sigma / max(self.Omega_z, 1e-300):.3g})")
        return out

    def validate(self, factor: float = 10.0, lab_amplitude: bool = False) -> "EffectiveModelParams":
        bad = self.hierarchy_violations(factor, lab_amplitude)
        if bad:
            raise ValueError("parameter hierarchy violated: " + "; ".join(bad))
        return self


def g2_from_device(dev: DeviceParams) -> float:
    """Two-phonon coupling ``mu_B g_s z_zpf^2 G2 / (2 hbar)`` in rad/s."""
    return 0.5 * MU_B * G_S * dev.z_zpf**2 * dev.G2 / HBAR


def g1_from_device(dev: DeviceParams) -> float:
    """Linear coupling ``mu_B g_s z_zpf G1 / hbar`` from a residual first gradient."""
    return MU_B * G_S * dev.z_zpf * dev.G1 / HBAR


def thermal_occupation(omega_m: float, T: float) -> float:
    if T <= 0:
        raise ValueError("T must be > 0")
    x = HBAR * omega_m / (K_B * T)
    return float(1.0 / math.expm1(x))


def cooperativity(g2: float, gamma_z: float, gamma_m: float, n_th: float) -> float:
    """``4 g2^2 / (gamma_z gamma_m (n_th + 1))``; all rates in the same units."""
    den = gamma_z * gamma_m * (n_th + 1.0)
    if den <= 0:
        raise ZeroDivisionError("cooperativity needs gamma_z, gamma_m > 0")
    return 4.0 * g2**2 / den


def dephasing_threshold(g2: float, gamma_m: float, n_th: float) -> float:
    """Dephasing rate at which the cooperativity drops to one."""
    return 4.0 * g2**2 / (gamma_m * (n_th + 1.0))


def system_from_device(dev: DeviceParams, Omega: float = 0.0, delta_sigma: float = 0.0,
                       delta_m: float = 0.0) -> SystemParams:
    return SystemParams(
        g2=g2_from_device(dev),
        Omega=Omega,
        delta_sigma=delta_sigma,
        delta_m=delta_m,
        gamma_m=dev.gamma_m,
        n_th=thermal_occupation(dev.omega_m, dev.T),
        gamma_z=dev.gamma_z,
    )


def device_cooperativity(dev: DeviceParams) -> float:
    return cooperativity(g2_from_device(dev), dev.gamma_z, dev.gamma_m,
                         thermal_occupation(dev.omega_m, dev.T))


def build_two_phonon_jc(params: SystemParams, config: HilbertConfig) -> LinearOperator:
    a = annihilation(config).matrix
    s = qubit_lowering(config).matrix
    ad, sd = a.conj().T, s.conj().T
    H = (
        params.delta_sigma * (sd @ s)
        + params.delta_m * (ad @ a)
        + params.Omega * (s + sd)
        + params.g2 * (ad @ ad @ s + a @ a @ sd)
    )
    return LinearOperator(H, config)


def build_dressed_frame(params: SystemParams, config: HilbertConfig) -> LinearOperator:
    """Same model written in the eigenbasis of the driven qubit.

    Qubit index 0 is ``|->`` and index 1 is ``|+>`` with
    ``|+-> = (|d> +- |e>)/sqrt(2)``, so ``sigma = (sz + sm - sm^dag)/2`` with
    ``sm = |-><+|`` and ``sz = |+><+| - |-><-|``.
    """
    if params.delta_sigma != 0:
        raise ValueError("dressed frame is defined for the resonant case delta_sigma = 0")
    a = annihilation(config).matrix
    sm = qubit_lowering(config).matrix
    ad, sp_ = a.conj().T, sm.conj().T
    sz = sp_ @ sm - sm @ sp_
    coup = ad @ ad @ (sm - sp_ + sz)
    H = params.Omega * sz + params.delta_m * (ad @ a) + 0.5 * params.g2 * (coup + coup.conj().T)
    return LinearOperator(H, config)


def dressed_basis_change(config: HilbertConfig) -> LinearOperator:
    """Unitary ``U`` with ``H_dressed = U^dag H_jc U`` (columns are ``|->, |+>``)."""
    r = 1.0 / math.sqrt(2.0)
    u = np.array([[r, r], [-r, r]], dtype=DTYPE)
    return LinearOperator(sp.kron(sp.identity(config.n_max), sp.csr_matrix(u), format="csr"), config)


def dressed_tls(params: EffectiveModelParams, lab_amplitude: bool = False) -> dict:
    """Dressed-state quantities of the microwave-driven spin.

    ``Omega_x`` is taken as the rotating-frame coupling between ``|0>`` and the
    bright state.  With ``lab_amplitude=True`` it is the amplitude of the
    ``Omega_x cos(omega_x t) S_x`` term instead, whose rotating-wave coupling is
    half as large.
    """
    Ox = params.Omega_x / 2.0 if lab_amplitude else params.Omega_x
    half = params.Delta / 2.0
    if Ox == 0 and half == 0:
        raise ValueError("Delta and Omega_x cannot both vanish")
    R = math.hypot(Ox, half)
    if Ox == 0:
        # bare limit: |e> is the bright state
        return dict(theta=math.pi / 2, xi=0.0, R=R, omega_gd=R + half, omega_de=R - half,
                    cos_theta=0.0, sin_theta=1.0)
    xi = Ox / (half + R)
    cos_t = 1.0 / math.sqrt(1.0 + xi**-2)
    sin_t = 1.0 / math.sqrt(1.0 + xi**2)
    return dict(
        theta=math.atan2(sin_t, cos_t),
        xi=xi,
        R=R,
        omega_gd=R + half,
        omega_de=R - half,
        cos_theta=cos_t,
        sin_theta=sin_t,
    )


def dressed_states(params: EffectiveModelParams, lab_amplitude: bool = False) -> dict[str, np.ndarray]:
    """Spin-1 vectors (basis ``|-1>, |0>, |+1>``) of the dressed states ``g, d, e``."""
    q = dressed_tls(params, lab_amplitude)
    r = 1.0 / math.sqrt(2.0)
    zero = np.array([0, 1, 0], dtype=DTYPE)
    bright = np.array([r, 0, r], dtype=DTYPE)
    dark = np.array([r, 0, -r], dtype=DTYPE)
    e = q["cos_theta"] * zero + q["sin_theta"] * bright
    g = q["sin_theta"] * zero - q["cos_theta"] * bright
    return {"g": g, "d": dark, "e": e}


def effective_from_lab(params: EffectiveModelParams, g2: float, omega_m: float,
                       lab_amplitude: bool = True) -> SystemParams:
    """Effective JC parameters implied by the lab-frame model (closed system).

    Uses ``g2_eff = g2 sin(theta)`` and ``Omega_eff = Omega_z sin(theta)/2``.
    """
    q = dressed_tls(params, lab_amplitude)
    w_sigma = q["omega_de"]
    return SystemParams(
        g2=g2 * q["sin_theta"],
        Omega=0.5 * params.Omega_z * q["sin_theta"],
        delta_sigma=w_sigma - params.omega_z_drive,
        delta_m=omega_m - params.omega_z_drive / 2.0,
    )


@dataclass(frozen=True)
class LabFrameHamiltonian:
    """``H(t) = H0 + Omega_x cos(omega_x t) Hx + Omega_z cos(omega_z t) Hz``."""

    H0: sp.csr_matrix
    Hx: sp.csr_matrix
    Hz: sp.csr_matrix
    params: EffectiveModelParams
    config: HilbertConfig
    omega_m: float
    g2: float

    def coefficients(self, t: float) -> tuple[float, float]:
        p = self.params
        return p.Omega_x * math.cos(p.omega_x * t), p.Omega_z * math.cos(p.omega_z_drive * t)

    def matrix(self, t: float) -> sp.csr_matrix:
        cx, cz = self.coefficients(t)
        return (self.H0 + cx * self.Hx + cz * self.Hz).tocsr()

    def __call__(self, t: float) -> LinearOperator:
        return LinearOperator(self.matrix(t), self.config)

    @property
    def period(self) -> float | None:
        """Common drive period when only the microwave drive is on."""
        if self.params.Omega_z == 0 and self.params.omega_x > 0:
            return TWO_PI / self.params.omega_x
        return None


def build_lab_frame(params: EffectiveModelParams, g2: float, config: HilbertConfig,
                    omega_m: float = 0.0) -> LabFrameHamiltonian:
    """Lab-frame spin-1 Hamiltonian as a callable of time.

    ``H(t) = D Sz^2 + Omega_x cos(omega_x t) Sx + Omega_z cos(omega_z t) Sz
    + omega_m a^dag a + g2 (a + a^dag)^2 Sz``.
    """
    if config.qubit_dim != 3:
        raise ValueError("lab frame requires qubit_dim == 3")
    Sx, _, Sz = (o.matrix for o in spin1_ops(config))
    a = annihilation(config).matrix
    X = a + a.conj().T
    H0 = params.D * (Sz @ Sz) + omega_m * (a.conj().T @ a) + g2 * (X @ X @ Sz)
    return LabFrameHamiltonian(H0.tocsr(), Sx.tocsr(), Sz.tocsr(), params, config, omega_m, g2)


def one_period_propagator(H: Callable[[float], np.ndarray], dim: int, period: float,
                          rtol: float = 1e-12, atol: float = 1e-13) -> np.ndarray:
    """Propagator over ``[0, period]`` by direct integration of the Schrodinger equation."""

    def rhs(t, y):
        return (-1j * (H(t) @ y.reshape(dim, dim))).ravel()

    sol = solve_ivp(rhs, (0.0, period), np.eye(dim, dtype=DTYPE).ravel(), method="DOP853",
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"propagator integration failed: {sol.message}")
    return sol.y[:, -1].reshape(dim, dim)


def floquet_tls_splitting(params: EffectiveModelParams) -> float:
    """Exact ``e``-``d`` quasienergy splitting of the microwave-driven spin (rad/s).

    Includes the counter-rotating (Bloch-Siegert) shift that the rotating-wave
    value ``R - Delta/2`` omits.  ``Omega_x`` is the lab amplitude.
    """
    if params.omega_x <= 0:
        raise ValueError("need a positive microwave frequency")
    cfg = HilbertConfig(2, 3)
    Sx, _, Sz = (o.toarray()[:3, :3] for o in spin1_ops(cfg))
    H0 = params.D * Sz @ Sz
    T = TWO_PI / params.omega_x
    U = one_period_propagator(lambda t: H0 + params.Omega_x * math.cos(params.omega_x * t) * Sx, 3, T)
    lam, V = np.linalg.eig(U)
    eps = -np.angle(lam) / T
    st = dressed_states(params, lab_amplitude=True)
    ie = int(np.argmax(np.abs(V.conj().T @ st["e"])))
    idk = int(np.argmax(np.abs(V.conj().T @ st["d"])))
    w = eps[ie] - eps[idk]
    # fold into the first Floquet zone
    w = (w + params.omega_x / 2) % params.omega_x - params.omega_x / 2
    return abs(w)


def _shift_hamiltonian(n_max: int, omega_m: float, omega_sigma: float, g2: float, g1: float) -> np.ndarray:
    cfg = HilbertConfig(n_max, 2)
    a = annihilation(cfg).toarray()
    s = qubit_lowering(cfg).toarray()
    ad, sd = a.conj().T, s.conj().T
    return (omega_sigma * sd @ s + omega_m * ad @ a + g2 * (ad @ ad @ s + a @ a @ sd)
            + g1 * (a + ad) @ (s + sd))


def two_phonon_rabi_contrast(detuning, g1: float, omega_m: float, g2: float,
                             n_max: int = 14):
    """Peak transfer probability ``|0,e> -> |2,d>`` at ``omega_sigma = 2 omega_m - detuning``.

    The closed system is solved exactly by diagonalization; the transfer
    amplitude is dominated by the two hybridized doublet eigenstates, whose
    maximal constructive interference gives the Rabi contrast.  Accepts an
    array of detunings.
    """
    det = np.atleast_1d(np.asarray(detuning, dtype=float))
    H0 = _shift_hamiltonian(n_max, omega_m, 2 * omega_m, g2, g1)
    proj = np.diag(np.tile([0.0, 1.0], n_max))
    out = np.empty(det.size)
    for lo in range(0, det.size, 512):
        chunk = det[lo:lo + 512]
        _, V = np.linalg.eigh(H0[None] - chunk[:, None, None] * proj[None])
        i0e, i2d = 1, 4  # n*2 + q
        amp = np.abs(V[:, i2d, :] * V[:, i0e, :].conj())
        top = np.sort(amp, axis=1)[:, -2:]
        out[lo:lo + 512] = top.sum(axis=1) ** 2
    return out if np.ndim(detuning) else float(out[0])


def two_phonon_resonance_shift(g1: float, omega_m: float, g2: float, n_max: int = 14,
                               window: float | None = None) -> float:
    """Qubit detuning ``lambda`` maximizing two-phonon Rabi contrast with a linear coupling.

    A coarse scan on a grid of spacing ``g2`` brackets the optimum, which is then
    refined by bounded scalar minimization.  ``window`` is the scan half-width;
    the default covers twice the second-order estimate ``4 g1^2 / omega_m``.
    """
    if g1 < 0:
        raise ValueError("g1 must be >= 0")
    if g1 == 0:
        return 0.0
    guess = 4.0 * g1**2 / omega_m
    if window is None:
        window = 2.0 * guess + 50.0 * g2
    step = max(g2, window / 20000)
    grid = np.arange(-window, window + step, step)
    vals = two_phonon_rabi_contrast(grid, g1, omega_m, g2, n_max)
    k = int(np.argmax(vals))
    if k in (0, len(grid) - 1) or vals[k] < 0.5:
        raise RuntimeError("resonance scan failed to bracket a contrast maximum")
    res = minimize_scalar(lambda d: -two_phonon_rabi_contrast(d, g1, omega_m, g2, n_max),
                          bounds=(grid[k - 1], grid[k + 1]), method="bounded",
                          options={"xatol": 1e-6 * step})
    return float(res.x)
