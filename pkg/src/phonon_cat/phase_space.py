"""Wigner functions, negativity, cattiness and reference states.

``W(alpha) = (2/pi) Tr[D(alpha)^dag rho D(alpha) P]`` with ``P = (-1)^{a^dag a}``,
normalized so that the integral over ``d^2 alpha = d Re(alpha) d Im(alpha)`` is one.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln
from scipy.stats import poisson

from .hilbert import (
    DTYPE,
    DensityOperator,
    HilbertConfig,
    Ket,
    TruncationError,
    partial_trace,
)

__all__ = [
    "GridSpec",
    "WignerGrid",
    "CatSpec",
    "SupportError",
    "coherent_state",
    "cat_state",
    "wigner",
    "wigner_values",
    "negativity",
    "cattiness",
    "fidelity",
    "matched_cat_amplitude",
    "default_grid",
]

BOUNDARY_TOL = 1e-6


class SupportError(ValueError):
    """The grid does not cover the support of the Wigner function."""


@dataclass(frozen=True)
class GridSpec:
    """Square grid ``[-half_width, half_width]^2`` with ``points`` samples per axis.

    ``half_width=None`` selects ``1.5 (sqrt(<n>) + 3)`` from the state.  With
    ``auto_expand`` the half-width grows by 25% (step kept fixed) until the
    boundary values fall below ``BOUNDARY_TOL``.
    """

    half_width: float | None = None
    points: int = 201
    auto_expand: bool = True
    max_expansions: int = 8

    def __post_init__(self):
        if self.points < 3:
            raise ValueError("need at least 3 points per axis")

    def axis(self, half_width: float) -> np.ndarray:
        return np.linspace(-half_width, half_width, self.points)


@dataclass(frozen=True)
class WignerGrid:
    alpha_re: np.ndarray
    alpha_im: np.ndarray
    values: np.ndarray  # indexed [i_im, i_re]

    @property
    def h(self) -> float:
        return float(self.alpha_re[1] - self.alpha_re[0])

    @property
    def cell_area(self) -> float:
        return float((self.alpha_re[1] - self.alpha_re[0]) * (self.alpha_im[1] - self.alpha_im[0]))

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def boundary_max(self) -> float:
        v = np.abs(self.values)
        return float(max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max()))

    def argmax(self) -> complex:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return complex(self.alpha_re[j], self.alpha_im[i])

    def value_at(self, alpha: complex) -> float:
        j = int(np.argmin(np.abs(self.alpha_re - alpha.real)))
        i = int(np.argmin(np.abs(self.alpha_im - alpha.imag)))
        return float(self.values[i, j])

    def rows(self):
        """Long-format ``(re, im, W)`` triples."""
        R, I = np.meshgrid(self.alpha_re, self.alpha_im)
        return np.column_stack([R.ravel(), I.ravel(), self.values.ravel()])


@dataclass(frozen=True)
class CatSpec:
    beta: complex
    parity: Literal["even", "odd"] = "even"

    def __post_init__(self):
        if self.parity not in ("even", "odd"):
            raise ValueError("parity must be 'even' or 'odd'")


def _osc_config(config: HilbertConfig) -> HilbertConfig:
    return config if config.qubit_dim == 1 else config.oscillator()


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max)
    r = abs(alpha)
    if r == 0:
        c = np.zeros(n_max, dtype=DTYPE)
        c[0] = 1.0
        return c
    logmag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * np.angle(alpha) * n)


def _check_tail(mean_n: float, n_max: int, tol: float = 1e-10):
    tail = float(poisson.sf(n_max - 1, mean_n))
    if tail >= tol:
        need = int(poisson.isf(tol, mean_n)) + 2
        raise TruncationError(
            f"coherent tail p(n >= {n_max}) = {tail:.2e} for |alpha|^2 = {mean_n:.3g}; "
            f"need n_max >= {need}",
            required_n_max=need,
        )


def coherent_state(alpha: complex, config: HilbertConfig) -> Ket:
    """Oscillator coherent state; raises :class:`TruncationError` if it does not fit."""
    cfg = _osc_config(config)
    _check_tail(abs(alpha) ** 2, cfg.n_max)
    return Ket(coherent_amplitudes(alpha, cfg.n_max), cfg, normalize=False)


def cat_state(spec: CatSpec, config: HilbertConfig) -> Ket:
    """``N (|beta> +- |-beta>)`` on the oscillator."""
    cfg = _osc_config(config)
    beta = complex(spec.beta)
    _check_tail(abs(beta) ** 2, cfg.n_max)
    if beta == 0:
        v = np.zeros(cfg.n_max, dtype=DTYPE)
        v[0 if spec.parity == "even" else 1] = 1.0
        return Ket(v, cfg)
    c = coherent_amplitudes(beta, cfg.n_max)
    sign = (-1.0) ** np.arange(cfg.n_max)
    v = c * (1 + sign) if spec.parity == "even" else c * (1 - sign)
    return Ket(v, cfg)


def matched_cat_amplitude(mean_n: float, rule: str = "amplitude") -> float:
    """``|beta|`` of the reference cat for a state with mean occupation ``mean_n``.

    ``rule="amplitude"`` uses ``|beta|^2 = <n>``; ``rule="occupation"`` matches the
    even cat's own mean occupation, ``|beta|^2 tanh|beta|^2 = <n>``.
    """
    if mean_n <= 0:
        raise ValueError("reference cat needs <n> > 0")
    if rule == "amplitude":
        return math.sqrt(mean_n)
    if rule == "occupation":
        b2 = brentq(lambda x: x * math.tanh(x) - mean_n, 1e-300, mean_n + 10.0, xtol=1e-15)
        return math.sqrt(b2)
    raise ValueError(f"unknown matching rule {rule!r}")


def _laguerre_sum(k: int, x: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Clenshaw sum ``sum_n coef[n] LL_n^k(x)`` of normalized Laguerre functions.

    ``LL_n^k = (-1)^n sqrt(k! n! / (n+k)!) L_n^k(x)`` obeys
    ``LL_{n+1} = -[(2n+1+k-x) LL_n + sqrt(n(n+k)) LL_{n-1}] / sqrt((n+1)(n+k+1))``.
    """
    N = len(coef)
    b1 = np.zeros_like(x, dtype=DTYPE)
    b2 = np.zeros_like(x, dtype=DTYPE)
    for n in range(N - 1, -1, -1):
        a_n = -(2 * n + 1 + k - x) / math.sqrt((n + 1) * (n + k + 1))
        b_next = math.sqrt((n + 1) * (n + k + 1) / ((n + 2) * (n + k + 2)))
        b0 = coef[n] + a_n * b1 - b_next * b2
        b2, b1 = b1, b0
    return b1


def _effective_size(m: np.ndarray, tol: float = 1e-32) -> int:
    # coherences scale as sqrt(p_i p_j), so the population cut sits far below double precision
    pops = np.abs(np.real(np.diagonal(m)))
    nz = np.nonzero(pops > tol * pops.max())[0]
    return int(min(len(pops), nz[-1] + 2)) if nz.size else 1


def wigner_values(rho: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Wigner function of a dense oscillator matrix at the points ``alpha``."""
    size = _effective_size(rho)
    m = np.asarray(rho, dtype=DTYPE)[:size, :size]
    beta = 2.0 * np.asarray(alpha, dtype=DTYPE)
    x = np.abs(beta) ** 2
    w = np.zeros_like(beta)
    for k in range(size - 1, -1, -1):
        diag = np.diagonal(m, k).copy()
        if k:
            diag *= 2.0
        w = _laguerre_sum(k, x, diag) + w * beta / math.sqrt(k + 1)
    out = (2.0 / math.pi) * np.exp(-0.5 * x) * np.real(w)
    if not np.all(np.isfinite(out)):
        raise TruncationError("Wigner evaluation overflowed; reduce the grid extent")
    return out


def _as_oscillator(rho) -> DensityOperator:
    if isinstance(rho, Ket):
        rho = rho.to_density()
    if rho.config.qubit_dim != 1:
        rho = partial_trace(rho)
    return rho


def _mean_n(rho: DensityOperator) -> float:
    return float(np.real(np.sum(np.arange(rho.matrix.shape[0]) * np.diagonal(rho.matrix))))


def default_grid(rho: DensityOperator, points: int = 201) -> tuple[float, int]:
    return 1.5 * (math.sqrt(max(_mean_n(rho), 0.0)) + 3.0), points


def _evaluate(m: np.ndarray, re: np.ndarray, im: np.ndarray, workers: int) -> np.ndarray:
    R, I = np.meshgrid(re, im)
    A = R + 1j * I
    if workers <= 1 or len(im) < 2 * workers:
        return wigner_values(m, A)
    blocks = np.array_split(np.arange(len(im)), workers)
    with ThreadPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(lambda b: wigner_values(m, A[b]), blocks))
    return np.vstack(parts)


def wigner(rho_osc, grid_spec: GridSpec | None = None, workers: int = 1) -> WignerGrid:
    """Sample the Wigner function on a square grid.

    Accepts a reduced oscillator state (a joint state is traced over the
    qubit first).  The output does not depend on ``workers``.
    """
    rho = _as_oscillator(rho_osc)
    spec = grid_spec or GridSpec()
    half = spec.half_width if spec.half_width is not None else default_grid(rho, spec.points)[0]
    step = 2 * half / (spec.points - 1)
    for attempt in range(spec.max_expansions + 1):
        k = int(math.ceil(half / step - 1e-9))
        axis = step * np.arange(-k, k + 1)
        grid = WignerGrid(axis, axis.copy(), _evaluate(rho.matrix, axis, axis, workers))
        if not spec.auto_expand or grid.boundary_max() < BOUNDARY_TOL:
            return grid
        half *= 1.25
    return grid


def negativity(w: WignerGrid, check_support: bool = True) -> float:
    """Integrated negative part ``int max(-W, 0) d^2 alpha`` by grid quadrature."""
    if check_support and w.boundary_max() >= BOUNDARY_TOL:
        raise SupportError(
            f"Wigner function reaches {w.boundary_max():.2e} on the grid boundary"
        )
    return float(np.clip(-w.values, 0.0, None).sum() * w.cell_area)


def cattiness(rho_osc, grid_spec: GridSpec | None = None, rule: str = "occupation",
              return_details: bool = False):
    """Negativity of ``rho`` relative to an even cat of matched size on the same grid."""
    rho = _as_oscillator(rho_osc)
    n = _mean_n(rho)
    if n <= 1e-12:
        raise ValueError(f"cattiness undefined for <n> = {n:.3g}")
    w = wigner(rho, grid_spec)
    beta = 1j * matched_cat_amplitude(n, rule)
    cat = cat_state(CatSpec(beta, "even"), rho.config)
    ref_spec = GridSpec(half_width=float(w.alpha_re[-1]), points=len(w.alpha_re), auto_expand=False)
    wc = wigner(cat.to_density(), ref_spec)
    n_ref = negativity(wc, check_support=False)
    if n_ref <= 1e-12:
        raise ValueError(f"reference cat has no resolvable negativity at <n> = {n:.3g}")
    value = negativity(w) / n_ref
    if return_details:
        return value, {"mean_n": n, "negativity": negativity(w), "reference": n_ref,
                       "beta": beta, "grid": w}
    return value


def fidelity(rho, target: Ket) -> float:
    """``sqrt(<target|rho|target>)``; a joint ``rho`` is reduced if ``target`` is oscillator-only."""
    if isinstance(rho, Ket):
        rho = rho.to_density()
    if rho.config != target.config:
        if target.config.qubit_dim == 1 and rho.config.oscillator() == target.config:
            rho = partial_trace(rho)
        else:
            raise ValueError("dimension mismatch between state and target")
    v = target.amplitudes / np.linalg.norm(target.amplitudes)
    p = float(np.real(np.vdot(v, rho.matrix @ v)))
    return math.sqrt(min(max(p, 0.0), 1.0))
