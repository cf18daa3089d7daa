"""Lindblad master-equation evolution and steady states.

Convention: ``drho/dt = -i[H, rho] + sum_i (g_i/2) (2 O rho O^dag - O^dag O rho - rho O^dag O)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .hilbert import (
    DTYPE,
    DensityOperator,
    HilbertConfig,
    LinearOperator,
    annihilation,
    check_truncation,
    partial_trace,
    qubit_lowering,
)
from .model import SystemParams, build_two_phonon_jc

log = logging.getLogger(__name__)


class SteadyStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class MasterEquationSpec:
    hamiltonian: LinearOperator
    collapse_channels: tuple[tuple[LinearOperator, float], ...] = ()

    def __post_init__(self):
        chans = tuple((O, float(g)) for O, g in self.collapse_channels)
        for O, g in chans:
            if g < 0 or not np.isfinite(g):
                raise ValueError(f"collapse rate must be finite and >= 0, got {g}")
            if O.config != self.hamiltonian.config:
                raise ValueError("collapse operator dimension does not match the Hamiltonian")
        object.__setattr__(self, "collapse_channels", chans)

    @property
    def config(self) -> HilbertConfig:
        return self.hamiltonian.config

    @classmethod
    def from_params(cls, params: SystemParams, config: HilbertConfig) -> "MasterEquationSpec":
        """Two-phonon JC model with loss ``(a, gamma_m n_th)`` and dephasing ``(s^dag s, gamma_z)``."""
        a = annihilation(config)
        s = qubit_lowering(config)
        return cls(
            build_two_phonon_jc(params, config),
            ((a, params.gamma_m * params.n_th), (s.dag() @ s, params.gamma_z)),
        )

    def effective_generator(self) -> sp.csr_matrix:
        """``K = -i H - (1/2) sum g O^dag O`` so that ``H_eff = i K``."""
        K = -1j * self.hamiltonian.matrix
        for O, g in self.collapse_channels:
            if g:
                K = K - 0.5 * g * (O.matrix.conj().T @ O.matrix)
        return sp.csr_matrix(K)

    def is_dissipative(self) -> bool:
        return any(g > 0 and O.matrix.nnz for O, g in self.collapse_channels)


class _RHS:
    """Cached sparse pieces of the Lindblad right-hand side for dense rho."""

    def __init__(self, spec: MasterEquationSpec):
        self.dim = spec.config.dim
        self.K = spec.effective_generator()
        self.jumps = [(O.matrix.tocsr(), O.matrix.conj().T.tocsr(), g)
                      for O, g in spec.collapse_channels if g]

    def __call__(self, r: np.ndarray) -> np.ndarray:
        # K r + r K^dag; computed without assuming r is exactly Hermitian so
        # that round-off in the anti-Hermitian part is not amplified.
        Kr = self.K @ r
        out = Kr + (self.K @ r.conj().T).conj().T
        for O, Od, g in self.jumps:
            # O r O^dag = O (O r^dag)^dag
            out += g * (O @ (O @ r.conj().T).conj().T)
        return out


def lindblad_rhs(rho: DensityOperator, spec: MasterEquationSpec) -> np.ndarray:
    """Time derivative of ``rho`` as a dense matrix."""
    if rho.config != spec.config:
        raise ValueError(f"dimension mismatch: {rho.config} vs {spec.config}")
    return _RHS(spec)(rho.matrix)


def liouvillian(spec: MasterEquationSpec) -> sp.csr_matrix:
    """Superoperator acting on row-major ``vec(rho)``."""
    d = spec.config.dim
    eye = sp.identity(d, dtype=DTYPE, format="csr")
    K = spec.effective_generator()
    L = sp.kron(K, eye) + sp.kron(eye, K.conj())
    for O, g in spec.collapse_channels:
        if g:
            L = L + g * sp.kron(O.matrix, O.matrix.conj())
    return L.tocsr()


def position_variance(rho: DensityOperator) -> float:
    """``Var(a + a^dag)`` of the oscillator; equals 1 for the vacuum."""
    osc = partial_trace(rho) if rho.config.qubit_dim > 1 else rho
    return quadrature_variance(osc, 0.0)


def quadrature_variance(rho_osc: DensityOperator, theta: float) -> float:
    """``Var(a e^{-i theta} + a^dag e^{i theta})`` of an oscillator state."""
    m = rho_osc.matrix
    n = m.shape[0]
    sq = np.sqrt(np.arange(1, n))
    # <a> = sum_n sqrt(n) rho[n, n-1] ; <a^2> = sum sqrt(n(n-1)) rho[n, n-2]
    ea = np.sum(sq * np.diagonal(m, -1))
    ea2 = np.sum(sq[1:] * sq[:-1] * np.diagonal(m, -2))
    en = np.sum(np.arange(n) * np.real(np.diagonal(m)))
    ph = np.exp(-1j * theta)
    x2 = 2 * np.real(ea2 * ph**2) + 2 * en + 1
    x1 = 2 * np.real(ea * ph)
    return float(x2 - x1**2)


def branch_quadrature_variances(rho: DensityOperator) -> tuple[float, float]:
    """Rotated-quadrature variances of the oscillator conditioned on the dressed qubit states.

    Returns ``Var Q_{pi/4}`` given ``|+>`` and ``Var Q_{-pi/4}`` given ``|->``
    with ``|+-> = (|d> +- |e>)/sqrt(2)``.  Both dip below 1 while the drive
    squeezes the two branches along crossed axes.
    """
    cfg = rho.config
    if cfg.qubit_dim != 2:
        raise ValueError("branch variances need a two-level qubit")
    m = rho.matrix.reshape(cfg.n_max, 2, cfg.n_max, 2)
    out = []
    for sign, theta in ((1.0, np.pi / 4), (-1.0, -np.pi / 4)):
        v = np.array([1.0, sign]) / np.sqrt(2.0)
        b = np.einsum("q,iqjp,p->ij", v, m, v)
        w = np.real(np.trace(b))
        if w <= 0:
            out.append(float("nan"))
            continue
        out.append(quadrature_variance(DensityOperator(b / w, cfg.oscillator()), theta))
    return out[0], out[1]


def observables(rho: DensityOperator) -> dict[str, complex | float]:
    """Phonon number, ``<a>``, quadrature variances and excited population."""
    cfg = rho.config
    osc = partial_trace(rho) if cfg.qubit_dim > 1 else rho
    m = osc.matrix
    nn = np.arange(cfg.n_max)
    out = {
        "n": float(np.real(np.sum(nn * np.diagonal(m)))),
        "a": complex(np.sum(np.sqrt(nn[1:]) * np.diagonal(m, -1))),
        "var_x": quadrature_variance(osc, 0.0),
        "var_q45": quadrature_variance(osc, np.pi / 4),
        "var_qm45": quadrature_variance(osc, -np.pi / 4),
    }
    if cfg.qubit_dim == 2:
        diag = np.real(np.diagonal(rho.matrix)).reshape(cfg.n_max, 2)
        out["excited"] = float(diag[:, 1].sum())
    return out


@dataclass
class EvolutionResult:
    times: np.ndarray
    observables: dict[str, np.ndarray]
    snapshots: dict[float, DensityOperator] = field(default_factory=dict)
    max_trace_drift: float = 0.0
    stats: dict = field(default_factory=dict)
    errors: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for k, v in self.observables.items():
            if len(v) != len(self.times):
                raise ValueError(f"series {k!r} has length {len(v)}, expected {len(self.times)}")


def evolve(rho0: DensityOperator, spec: MasterEquationSpec, t_final: float,
           output_times: Sequence[float] | None = None, *, rtol: float = 1e-8,
           atol: float = 1e-10, snapshot_times: Sequence[float] = (),
           trunc_threshold: float = 1e-8, method: str = "DOP853") -> EvolutionResult:
    """Integrate the master equation with an adaptive embedded Runge-Kutta pair.

    Observables are recorded at ``output_times`` (default: 101 points).  The
    trace is never renormalized; its drift is logged and returned.
    """
    if rho0.config != spec.config:
        raise ValueError("initial state does not match the model dimension")
    rho0.validate(herm_tol=1e-8, trace_tol=1e-8, pos_tol=1e-7)
    if output_times is None:
        output_times = np.linspace(0.0, t_final, 101)
    ts = np.asarray(sorted(set(float(t) for t in output_times) | {float(t) for t in snapshot_times}))
    if ts[0] < 0 or ts[-1] > t_final * (1 + 1e-12):
        raise ValueError("output times must lie in [0, t_final]")
    out_set = np.asarray(sorted(set(float(t) for t in output_times)))
    snap_set = {float(t) for t in snapshot_times}
    out_lookup = set(out_set.tolist())
    d = spec.config.dim
    f = _RHS(spec)

    def rhs(t, y):
        return f(y.reshape(d, d)).ravel()

    if ts.size == 1 and ts[0] == 0.0:
        ys = rho0.matrix.ravel()[:, None]
        nfev = 0
    else:
        sol = solve_ivp(rhs, (0.0, t_final), rho0.matrix.ravel(), method=method, t_eval=ts,
                        rtol=rtol, atol=atol)
        if not sol.success:
            raise FloatingPointError(f"integration failed: {sol.message}")
        ys = sol.y
        nfev = sol.nfev
    series: dict[str, list] = {"n": [], "a": [], "var_x": [], "var_q45": [], "var_qm45": []}
    if spec.config.qubit_dim == 2:
        series["excited"] = []
    snaps: dict[float, DensityOperator] = {}
    drift = 0.0
    warned = False
    for i, t in enumerate(ts):
        rho = DensityOperator(ys[:, i].reshape(d, d), spec.config)
        drift = max(drift, abs(rho.trace() - 1.0))
        if not warned:
            warned = not check_truncation(rho, trunc_threshold, stacklevel=2)
        if t in snap_set:
            snaps[float(t)] = rho
        if t in out_lookup:
            for k, v in observables(rho).items():
                series[k].append(v)
    if drift > 1e-8:
        log.warning("trace drift %.3e exceeds 1e-8", drift)
    else:
        log.debug("max trace drift %.3e", drift)
    obs = {k: np.asarray(v) for k, v in series.items()}
    return EvolutionResult(out_set, obs, snaps, drift, {"nfev": nfev})


def residual(spec: MasterEquationSpec, rho: DensityOperator) -> float:
    """Frobenius norm of ``L[rho]``."""
    return float(np.linalg.norm(_RHS(spec)(rho.matrix)))


def _direct_steady_state(spec: MasterEquationSpec) -> np.ndarray:
    d = spec.config.dim
    L = liouvillian(spec).tolil()
    # replace one equation by the trace constraint
    L[0, :] = 0
    L[0, np.arange(d) * (d + 1)] = 1.0
    b = np.zeros(d * d, dtype=DTYPE)
    b[0] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        x = spla.spsolve(L.tocsc(), b)
    if not np.all(np.isfinite(x)):
        raise SteadyStateError("direct solve returned non-finite values")
    r = x.reshape(d, d)
    return 0.5 * (r + r.conj().T)


def _longtime_steady_state(spec: MasterEquationSpec, rho0: DensityOperator | None,
                           tol: float, t_chunk: float | None, max_chunks: int) -> np.ndarray:
    d = spec.config.dim
    f = _RHS(spec)
    if rho0 is None:
        r = np.zeros((d, d), dtype=DTYPE)
        r[0, 0] = 1.0
    else:
        r = rho0.matrix.copy()
    if t_chunk is None:
        rates = [g for _, g in spec.collapse_channels if g]
        t_chunk = 10.0 / min(rates)
    for _ in range(max_chunks):
        if np.linalg.norm(f(r)) < tol:
            return r
        sol = solve_ivp(lambda t, y: f(y.reshape(d, d)).ravel(), (0.0, t_chunk), r.ravel(),
                        method="DOP853", rtol=1e-10, atol=1e-13)
        if not sol.success:
            raise SteadyStateError(f"long-time integration failed: {sol.message}")
        r = sol.y[:, -1].reshape(d, d)
    raise SteadyStateError(f"long-time evolution did not reach |L rho| < {tol}")


def steady_state(spec: MasterEquationSpec, method: str = "auto", *, tol: float = 1e-10,
                 rho0: DensityOperator | None = None, t_chunk: float | None = None,
                 max_chunks: int = 200, direct_max_dim: int = 200) -> DensityOperator:
    """Stationary state of the master equation.

    ``method`` is ``"direct"`` (sparse solve of the vectorized Liouvillian with
    the trace constraint in place of one row), ``"longtime"`` (integrate until
    ``|L rho| < tol``) or ``"auto"`` (direct up to ``direct_max_dim``, with the
    long-time path as fallback on a singular solve).
    """
    if not spec.is_dissipative():
        raise SteadyStateError("steady state needs at least one dissipative channel")
    d = spec.config.dim
    if method not in ("auto", "direct", "longtime"):
        raise ValueError(f"unknown method {method!r}")
    r = None
    if method == "direct" or (method == "auto" and d <= direct_max_dim):
        try:
            r = _direct_steady_state(spec)
        except (SteadyStateError, spla.MatrixRankWarning, RuntimeError) as exc:
            if method == "direct":
                raise SteadyStateError(f"direct solve failed: {exc}") from exc
            log.warning("direct steady-state solve failed (%s); falling back to long-time evolution", exc)
    if r is None:
        r = _longtime_steady_state(spec, rho0, tol, t_chunk, max_chunks)
    rho = DensityOperator(r, spec.config)
    check_truncation(rho, stacklevel=2)
    return rho
