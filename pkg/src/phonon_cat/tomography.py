"""Simulated readout by displacement followed by phonon counting.

Sign convention: displacing by ``alpha`` maps ``rho -> D(alpha)^dag rho D(alpha)``,
so a coherent state ``|gamma>`` is counted as ``|gamma - alpha>`` and the
counted operator is ``(a - alpha)^dag (a - alpha)`` in the Heisenberg picture.
Displaced-parity averages then give ``W(alpha)`` directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .hilbert import DTYPE, HilbertConfig, LinearOperator, TruncationError
from .phase_space import GridSpec, WignerGrid, _as_oscillator, _effective_size, default_grid

TAIL_TOL = 1e-10


def _norm_laguerre_table(x: np.ndarray, n_low: int, n_k: int) -> np.ndarray:
    """``LL_i^k(x)`` for ``i < n_low``, ``k < n_k`` and every ``x`` (shape ``(P, n_low, n_k)``)."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    k = np.arange(n_k, dtype=float)[None, :]
    out = np.empty((x.shape[0], n_low, n_k))
    out[:, 0] = 1.0
    if n_low > 1:
        out[:, 1] = -(1.0 + k - x) / np.sqrt(k + 1.0)
    for i in range(1, n_low - 1):
        out[:, i + 1] = -((2 * i + 1 + k - x) * out[:, i]
                          + np.sqrt(i * (i + k)) * out[:, i - 1]) / np.sqrt((i + 1) * (i + k + 1))
    return out


def displacement_block(alpha, rows: int, cols: int) -> np.ndarray:
    """``<j|D(alpha)|n>`` for ``j < rows``, ``n < cols``; ``alpha`` may be an array.

    Closed form through normalized Laguerre functions of ``|alpha|^2``; the
    power and factorial prefactors are combined in log space.
    """
    a = np.atleast_1d(np.asarray(alpha, dtype=DTYPE))
    x = np.abs(a) ** 2
    n_low = min(rows, cols)
    kmax = max(rows, cols)
    LL = _norm_laguerre_table(x, n_low, kmax)
    j = np.arange(rows)[:, None]
    n = np.arange(cols)[None, :]
    k = np.abs(j - n)
    low = np.minimum(j, n)
    r = np.abs(a)
    with np.errstate(divide="ignore"):
        logr = np.where(r > 0, np.log(np.where(r > 0, r, 1.0)), -1e5)
    # log |alpha^k / sqrt(k!)| - x/2, with 0^0 = 1
    kk = k[None, :, :]
    logmag = np.where(kk > 0, kk * logr[:, None, None], 0.0) - 0.5 * gammaln(kk + 1) - 0.5 * x[:, None, None]
    mag = np.exp(logmag)
    phase_lower = np.exp(1j * np.angle(a))[:, None, None] ** kk            # alpha^k / |alpha|^k
    phase_upper = (-np.exp(-1j * np.angle(a)))[:, None, None] ** kk        # (-alpha*)^k / |alpha|^k
    sgn = (-1.0) ** low
    vals = LL[:, low, k] * sgn[None] * mag
    out = np.where((j >= n)[None], vals * phase_lower, vals * phase_upper)
    return out if np.ndim(alpha) else out[0]


def _required_n_max(amplitude: float, mean_n: float, tol: float = TAIL_TOL) -> int:
    mu = (amplitude + math.sqrt(max(mean_n, 0.0))) ** 2
    return int(poisson.isf(tol, mu)) + 2 if mu > 0 else 2


def _check(amplitude: float, mean_n: float, n_max: int):
    mu = (amplitude + math.sqrt(max(mean_n, 0.0))) ** 2
    if mu > 0 and poisson.sf(n_max - 1, mu) >= TAIL_TOL:
        need = _required_n_max(amplitude, mean_n)
        raise TruncationError(
            f"n_max = {n_max} too small for displacement {amplitude:.3g}; need n_max >= {need}",
            required_n_max=need,
        )


def displacement_operator(alpha: complex, config: HilbertConfig, state_mean_n: float = 0.0) -> LinearOperator:
    """Truncated ``D(alpha)`` on the oscillator of ``config``."""
    cfg = config if config.qubit_dim == 1 else config.oscillator()
    _check(abs(alpha), state_mean_n, cfg.n_max)
    return LinearOperator(displacement_block(complex(alpha), cfg.n_max, cfg.n_max), cfg)


def _mean_n(m: np.ndarray) -> float:
    return float(np.real(np.sum(np.arange(m.shape[0]) * np.diagonal(m))))


def _prepare(rho_osc, amplitude: float, pad: bool) -> tuple[np.ndarray, int]:
    rho = _as_oscillator(rho_osc)
    m = rho.matrix
    need = _required_n_max(amplitude, _mean_n(m))
    if need > m.shape[0]:
        if not pad:
            _check(amplitude, _mean_n(m), m.shape[0])
        n_out = need
    else:
        n_out = m.shape[0]
    size = _effective_size(m)
    return m[:size, :size], n_out


def _displaced_populations(m: np.ndarray, alphas: np.ndarray, n_out: int, chunk: int = 256) -> np.ndarray:
    size = m.shape[0]
    out = np.empty((alphas.size, n_out))
    for lo in range(0, alphas.size, chunk):
        D = displacement_block(alphas[lo:lo + chunk], size, n_out)  # (P, size, n_out)
        M = np.einsum("jk,pkn->pjn", m, D)
        out[lo:lo + chunk] = np.real(np.einsum("pjn,pjn->pn", D.conj(), M))
    return out


def displaced_number_distribution(rho_osc, alpha: complex, pad: bool = True) -> np.ndarray:
    """``p(n) = <n| D(alpha)^dag rho D(alpha) |n>``.

    With ``pad`` the state is embedded (exactly, by zero padding) in a Fock space
    large enough for the displaced distribution; otherwise a too-small
    truncation raises :class:`TruncationError`.
    """
    m, n_out = _prepare(rho_osc, abs(alpha), pad)
    return _displaced_populations(m, np.array([complex(alpha)]), n_out)[0]


@dataclass(frozen=True)
class MeasurementPlan:
    amplitude: float
    angles: tuple[float, ...]
    shots: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(t) for t in self.angles))
        if self.shots <= 0:
            raise ValueError("shots must be > 0")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if any(not (0.0 <= t < 2 * math.pi) for t in self.angles):
            raise ValueError("angles must lie in [0, 2 pi)")

    @classmethod
    def uniform(cls, amplitude: float, n_angles: int, shots: int, seed: int = 0) -> "MeasurementPlan":
        return cls(amplitude, tuple(2 * math.pi * np.arange(n_angles) / n_angles), shots, seed)

    def alphas(self) -> np.ndarray:
        return self.amplitude * np.exp(1j * np.asarray(self.angles))

    def to_json(self) -> dict:
        return {"amplitude": self.amplitude, "angles": list(self.angles), "shots": self.shots,
                "seed": int(self.seed)}


@dataclass
class MeasurementData:
    plan: MeasurementPlan
    counts: np.ndarray  # (n_angles, n_levels), integer
    exact: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(self.counts.sum(axis=1) != self.plan.shots):
            raise ValueError("histogram rows must sum to the shot count")

    @property
    def histograms(self) -> np.ndarray:
        return self.counts / self.plan.shots

    def rows(self):
        """Long-format ``(angle, n, count)`` rows with nonzero counts."""
        out = []
        for a, th in enumerate(self.plan.angles):
            for n in np.nonzero(self.counts[a])[0]:
                out.append((th, int(n), int(self.counts[a, n])))
        return out


def angle_rng(seed: int, angle_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(angle_index,))))


def sample_measurements(rho_osc, plan: MeasurementPlan, pad: bool = True) -> MeasurementData:
    """Multinomial phonon counts per displacement angle; deterministic in ``plan.seed``."""
    m, n_out = _prepare(rho_osc, plan.amplitude, pad)
    P = _displaced_populations(m, plan.alphas(), n_out)
    P = np.clip(P, 0.0, None)
    counts = np.empty(P.shape, dtype=np.int64)
    for i in range(P.shape[0]):
        counts[i] = angle_rng(plan.seed, i).multinomial(plan.shots, P[i] / P[i].sum())
    return MeasurementData(plan, counts, P)


def quadrature_estimate(data_or_rho, alpha: complex | None = None) -> np.ndarray | float:
    """``(<n>_displaced - |alpha|^2) / (sqrt(2) |alpha|)``.

    For a state and displacement ``alpha`` this estimates ``<Q_theta>`` with
    ``Q_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt(2)`` and
    ``theta = arg(-alpha)``.  For :class:`MeasurementData` the estimate is
    returned per angle from the empirical histograms.
    """
    if isinstance(data_or_rho, MeasurementData):
        amp = data_or_rho.plan.amplitude
        if amp == 0:
            raise ValueError("estimator needs a nonzero displacement")
        n = np.arange(data_or_rho.counts.shape[1])
        mean = data_or_rho.histograms @ n
        return (mean - amp**2) / (math.sqrt(2) * amp)
    if alpha is None or alpha == 0:
        raise ValueError("estimator needs a nonzero displacement")
    rho = _as_oscillator(data_or_rho)
    ratio = abs(alpha) ** 2 / max(_mean_n(rho.matrix), 1e-300)
    if ratio < 10:
        warnings.warn(f"|alpha|^2 / <n> = {ratio:.3g} < 10; estimator bias is not small", RuntimeWarning,
                      stacklevel=2)
    p = displaced_number_distribution(rho, alpha)
    return float((np.arange(p.size) @ p - abs(alpha) ** 2) / (math.sqrt(2) * abs(alpha)))


def estimator_variance(data: MeasurementData) -> np.ndarray:
    """Sample variance of the single-shot estimator at each angle."""
    amp = data.plan.amplitude
    q = (np.arange(data.counts.shape[1]) - amp**2) / (math.sqrt(2) * amp)
    h = data.histograms
    mu = h @ q
    return h @ q**2 - mu**2


def parity_scan(rho_osc, grid_spec: GridSpec | None = None, pad: bool = True) -> WignerGrid:
    """Wigner function from displaced parities ``(2/pi) sum_n (-1)^n p_alpha(n)``."""
    rho = _as_oscillator(rho_osc)
    spec = grid_spec or GridSpec()
    half = spec.half_width if spec.half_width is not None else default_grid(rho, spec.points)[0]
    axis = np.linspace(-half, half, spec.points)
    R, I = np.meshgrid(axis, axis)
    alphas = (R + 1j * I).ravel()
    m, n_out = _prepare(rho, math.sqrt(2) * half, pad)
    P = _displaced_populations(m, alphas, n_out)
    parity = P @ ((-1.0) ** np.arange(n_out))
    return WignerGrid(axis, axis.copy(), (2 / math.pi * parity).reshape(R.shape))


def fringe_contrast(p: np.ndarray, cutoff: float = 3.0) -> float:
    """Largest characteristic-function modulus of ``p(n)`` above the smooth band.

    A displaced coherent state (or a mixture of them) has
    ``|chi(w)| = exp(-<n>(1 - cos w))`` and is negligible once
    ``w > cutoff / sqrt(<n>)``; interference between superposed components
    shows up as an oscillation of ``p(n)`` in ``n`` and a peak in ``|chi|``.
    """
    p = np.asarray(p, dtype=float)
    p = p / p.sum()
    n = np.arange(p.size)
    mean = float(n @ p)
    w0 = min(cutoff / math.sqrt(max(mean, 1.0)), math.pi)
    w = np.linspace(w0, math.pi, 512)
    chi = np.abs(np.exp(1j * np.outer(w, n)) @ p)
    return float(chi.max())
