"""Truncated Fock (x) qubit Hilbert space and sparse operator algebra.

Basis ordering: the oscillator index varies slowest, so the flat index of
``|n> (x) |q>`` is ``n * qubit_dim + q``.  Qubit conventions:

* ``qubit_dim == 2``: index 0 is the ground state ``|d>``, index 1 the
  excited state ``|e>``; the lowering operator maps ``|e> -> |d>``.
* ``qubit_dim == 3``: spin-1 basis ``{|-1>, |0>, |+1>}``.
* ``qubit_dim == 1``: bare oscillator, used for reduced states after the
  qubit has been traced out.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "HilbertConfig",
    "Ket",
    "DensityOperator",
    "LinearOperator",
    "TruncationWarning",
    "TruncationError",
    "annihilation",
    "number_operator",
    "identity",
    "qubit_lowering",
    "spin1_ops",
    "compose",
    "expectation",
    "basis_ket",
    "partial_trace",
    "top_level_population",
    "check_truncation",
]

DTYPE = np.complex128


class TruncationWarning(RuntimeWarning):
    """Population leaks into the highest retained Fock level."""


class TruncationError(ValueError):
    """The Fock truncation cannot represent the requested state."""

    def __init__(self, message: str, required_n_max: int | None = None):
        super().__init__(message)
        self.required_n_max = required_n_max


@dataclass(frozen=True)
class HilbertConfig:
    n_max: int = 100
    qubit_dim: int = 2

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValueError(f"n_max must be an integer >= 2, got {self.n_max}")
        if self.qubit_dim not in (1, 2, 3):
            raise ValueError(f"qubit_dim must be 1, 2 or 3, got {self.qubit_dim}")

    @property
    def dim(self) -> int:
        return self.n_max * self.qubit_dim

    def index(self, n: int, q: int = 0) -> int:
        return n * self.qubit_dim + q

    def oscillator(self) -> "HilbertConfig":
        return HilbertConfig(self.n_max, 1)


def _freeze(m: sp.csr_matrix) -> sp.csr_matrix:
    for arr in (m.data, m.indices, m.indptr):
        arr.flags.writeable = False
    return m


class LinearOperator:
    """Immutable sparse complex operator bound to a :class:`HilbertConfig`."""

    __slots__ = ("_matrix", "config")

    def __init__(self, matrix, config: HilbertConfig):
        m = sp.csr_matrix(matrix, dtype=DTYPE)
        if m.shape != (config.dim, config.dim):
            raise ValueError(
                f"operator shape {m.shape} does not match config dimension {config.dim}"
            )
        m.sum_duplicates()
        m.eliminate_zeros()
        self._matrix = _freeze(m)
        self.config = config

    @property
    def matrix(self) -> sp.csr_matrix:
        return self._matrix

    @property
    def dim(self) -> int:
        return self.config.dim

    def toarray(self) -> np.ndarray:
        return self._matrix.toarray()

    def dag(self) -> "LinearOperator":
        return LinearOperator(self._matrix.conj().T, self.config)

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        diff = abs(self._matrix - self._matrix.conj().T)
        scale = max(abs(self._matrix).max(), 1.0) if self._matrix.nnz else 1.0
        return (diff.max() if diff.nnz else 0.0) <= rtol * scale

    def _check(self, other: "LinearOperator"):
        if not isinstance(other, LinearOperator):
            return NotImplemented
        if other.config != self.config:
            raise ValueError(f"dimension mismatch: {self.config} vs {other.config}")

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return LinearOperator(self._matrix + other._matrix, self.config)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return LinearOperator(self._matrix - other._matrix, self.config)

    def __neg__(self):
        return LinearOperator(-self._matrix, self.config)

    def __mul__(self, scalar):
        if isinstance(scalar, LinearOperator):
            return NotImplemented
        return LinearOperator(self._matrix * complex(scalar), self.config)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            self._check(other)
            return LinearOperator(self._matrix @ other._matrix, self.config)
        if isinstance(other, Ket):
            if other.config != self.config:
                raise ValueError("dimension mismatch between operator and ket")
            return Ket(self._matrix @ other.amplitudes, self.config, normalize=False)
        return NotImplemented

    def __repr__(self):
        return f"LinearOperator(dim={self.dim}, nnz={self._matrix.nnz})"


class Ket:
    """State vector.  Normalized on construction unless ``normalize=False``."""

    __slots__ = ("amplitudes", "config")

    def __init__(self, amplitudes, config: HilbertConfig, normalize: bool = True):
        v = np.array(amplitudes, dtype=DTYPE).reshape(-1)
        if v.shape[0] != config.dim:
            raise ValueError(f"ket length {v.shape[0]} does not match dimension {config.dim}")
        if normalize:
            nrm = np.linalg.norm(v)
            if nrm == 0.0:
                raise ValueError("cannot normalize the zero vector")
            v = v / nrm
        self.amplitudes = v
        self.config = config

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "Ket":
        return Ket(self.amplitudes, self.config, normalize=True)

    def overlap(self, other: "Ket") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def tensor(self, qubit) -> "Ket":
        """``|self> (x) qubit`` for an oscillator-only ket and a 2- or 3-vector."""
        if self.config.qubit_dim != 1:
            raise ValueError("left factor must be an oscillator-only ket")
        q = np.asarray(qubit, dtype=DTYPE).reshape(-1)
        if q.shape[0] not in (2, 3):
            raise ValueError("right factor must be a qubit (2) or spin-1 (3) vector")
        cfg = HilbertConfig(self.config.n_max, q.shape[0])
        return Ket(np.kron(self.amplitudes, q), cfg, normalize=False)

    def to_density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.config)


class DensityOperator:
    """Dense density matrix bound to a :class:`HilbertConfig`."""

    __slots__ = ("matrix", "config")

    def __init__(self, matrix, config: HilbertConfig):
        m = np.array(matrix, dtype=DTYPE)
        if m.shape != (config.dim, config.dim):
            raise ValueError(f"density matrix shape {m.shape} does not match dimension {config.dim}")
        self.matrix = m
        self.config = config

    @classmethod
    def from_ket(cls, ket: Ket) -> "DensityOperator":
        return ket.to_density()

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def validate(self, herm_tol=1e-10, trace_tol=1e-10, pos_tol=1e-8):
        """Raise ``ValueError`` unless the matrix is a physical state."""
        if self.hermiticity_error() > herm_tol:
            raise ValueError(f"not Hermitian (error {self.hermiticity_error():.3e})")
        if abs(self.trace() - 1.0) > trace_tol:
            raise ValueError(f"trace {self.trace()} differs from 1")
        if self.min_eigenvalue() < -pos_tol:
            raise ValueError(f"negative eigenvalue {self.min_eigenvalue():.3e}")
        return self

    def reduced_oscillator(self) -> "DensityOperator":
        return partial_trace(self, keep="oscillator")

    def fock_populations(self) -> np.ndarray:
        osc = self if self.config.qubit_dim == 1 else self.reduced_oscillator()
        return np.real(np.diag(osc.matrix)).copy()


State = Union[Ket, DensityOperator]


def _osc_lowering(n_max: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n_max, dtype=float)), 1, format="csr", dtype=DTYPE)


def identity(config: HilbertConfig) -> LinearOperator:
    return LinearOperator(sp.identity(config.dim, dtype=DTYPE, format="csr"), config)


def annihilation(config: HilbertConfig) -> LinearOperator:
    """``a (x) I_qubit`` with ``<n-1|a|n> = sqrt(n)``."""
    a = _osc_lowering(config.n_max)
    return LinearOperator(sp.kron(a, sp.identity(config.qubit_dim), format="csr"), config)


def number_operator(config: HilbertConfig) -> LinearOperator:
    n = np.repeat(np.arange(config.n_max, dtype=float), config.qubit_dim)
    return LinearOperator(sp.diags(n, format="csr", dtype=DTYPE), config)


def qubit_lowering(config: HilbertConfig) -> LinearOperator:
    """``I_osc (x) sigma`` with ``sigma|e> = |d>``."""
    if config.qubit_dim != 2:
        raise ValueError("qubit_lowering requires qubit_dim == 2")
    s = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=DTYPE))
    return LinearOperator(sp.kron(sp.identity(config.n_max), s, format="csr"), config)


def spin1_ops(config: HilbertConfig) -> tuple[LinearOperator, LinearOperator, LinearOperator]:
    """Spin-1 ``(S_x, S_y, S_z)`` in the basis ``{|-1>, |0>, |+1>}`` (hbar = 1)."""
    if config.qubit_dim != 3:
        raise ValueError("spin1_ops requires qubit_dim == 3")
    r = 1.0 / np.sqrt(2.0)
    sx = np.array([[0, r, 0], [r, 0, r], [0, r, 0]], dtype=DTYPE)
    sy = np.array([[0, 1j * r, 0], [-1j * r, 0, 1j * r], [0, -1j * r, 0]], dtype=DTYPE)
    sz = np.diag([-1.0, 0.0, 1.0]).astype(DTYPE)
    eye = sp.identity(config.n_max)
    return tuple(
        LinearOperator(sp.kron(eye, sp.csr_matrix(m), format="csr"), config) for m in (sx, sy, sz)
    )


def compose(A: LinearOperator, B=None, op: str = "multiply") -> LinearOperator:
    """Combine operators: ``add``, ``multiply``, ``dagger``, ``scale`` or ``tensor``.

    ``scale`` takes a scalar as ``B``.  ``tensor`` builds ``A (x) B`` where ``A``
    is oscillator-only (``qubit_dim == 1``) and ``B`` is either a bare 2x2/3x3
    array or another oscillator-only operator (in which case the result is a
    plain sparse matrix wrapped on a bare oscillator of dimension ``n_A * n_B``).
    """
    if op == "add":
        return A + B
    if op == "multiply":
        return A @ B
    if op == "dagger":
        return A.dag()
    if op == "scale":
        return A * B
    if op == "tensor":
        if A.config.qubit_dim != 1:
            raise ValueError("tensor: left factor must be oscillator-only")
        right = B.matrix if isinstance(B, LinearOperator) else sp.csr_matrix(np.asarray(B, dtype=DTYPE))
        if right.shape[0] in (2, 3) and not isinstance(B, LinearOperator):
            cfg = HilbertConfig(A.config.n_max, right.shape[0])
        else:
            cfg = HilbertConfig(A.config.n_max * right.shape[0], 1)
        return LinearOperator(sp.kron(A.matrix, right, format="csr"), cfg)
    raise ValueError(f"unknown compose operation {op!r}")


def expectation(state: State, O: LinearOperator) -> complex:
    """``<psi|O|psi>`` for kets, ``Tr(rho O)`` for density operators."""
    if state.config != O.config:
        raise ValueError(f"dimension mismatch: {state.config} vs {O.config}")
    if isinstance(state, Ket):
        v = state.amplitudes
        return complex(np.vdot(v, O.matrix @ v))
    # Tr(rho O) = sum_ij rho_ij O_ji
    Ot = O.matrix.T.tocsr()
    return complex((Ot.multiply(state.matrix)).sum())


def basis_ket(config: HilbertConfig, n: int, q: int = 0) -> Ket:
    v = np.zeros(config.dim, dtype=DTYPE)
    v[config.index(n, q)] = 1.0
    return Ket(v, config)


def partial_trace(rho: DensityOperator, keep: str = "oscillator") -> DensityOperator:
    """Trace out the qubit (``keep='oscillator'``) or the oscillator."""
    cfg = rho.config
    if cfg.qubit_dim == 1:
        if keep == "oscillator":
            return rho
        raise ValueError("state has no qubit factor")
    t = rho.matrix.reshape(cfg.n_max, cfg.qubit_dim, cfg.n_max, cfg.qubit_dim)
    if keep == "oscillator":
        return DensityOperator(np.einsum("iqjq->ij", t), cfg.oscillator())
    if keep == "qubit":
        return DensityOperator(np.einsum("ninj->ij", t), _QubitOnly(cfg.qubit_dim))
    raise ValueError(f"keep must be 'oscillator' or 'qubit', got {keep!r}")


@dataclass(frozen=True)
class _QubitOnly:
    qubit_dim: int

    @property
    def dim(self) -> int:
        return self.qubit_dim


def top_level_population(state: State) -> float:
    """Population of the highest retained Fock level ``n_max - 1``."""
    cfg = state.config
    if isinstance(state, Ket):
        amps = state.amplitudes.reshape(cfg.n_max, cfg.qubit_dim)
        return float(np.sum(np.abs(amps[-1]) ** 2))
    diag = np.real(np.diag(state.matrix)).reshape(cfg.n_max, cfg.qubit_dim)
    return float(diag[-1].sum())


def check_truncation(state: State, threshold: float = 1e-8, stacklevel: int = 2) -> bool:
    """Warn with :class:`TruncationWarning` if ``p(n_max - 1) >= threshold``."""
    p = top_level_population(state)
    if p >= threshold:
        warnings.warn(
            f"top Fock level population {p:.3e} >= {threshold:.0e}; increase n_max "
            f"(currently {state.config.n_max})",
            TruncationWarning,
            stacklevel=stacklevel + 1,
        )
        return False
    return True
