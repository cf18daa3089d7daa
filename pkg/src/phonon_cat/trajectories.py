"""Monte-Carlo wavefunction unfolding of the master equation.

Fixed-step first-order scheme: in each step of length ``dt`` every channel
``i`` draws one uniform number ``r_i`` and jumps if ``r_i < g_i dt |O_i psi|^2``.
Without a jump the state is propagated with ``exp(-i H_eff dt)`` and
renormalized.  A step whose largest jump probability reaches ``P_MAX`` is
split in halves (recursively) before drawing.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import EvolutionResult, MasterEquationSpec
from .hilbert import DTYPE, Ket

P_MAX = 0.01
MAX_SPLIT = 20


class NormUnderflowError(FloatingPointError):
    pass


@dataclass(frozen=True)
class JumpRecord:
    time: float
    channel_index: int


@dataclass
class TrajectoryRecord:
    seed: int
    times: np.ndarray
    observables: dict[str, np.ndarray]
    jumps: list[JumpRecord] = field(default_factory=list)
    snapshots: dict[float, Ket] = field(default_factory=dict)
    splits: int = 0

    def jump_times(self, channel: int | None = None) -> np.ndarray:
        return np.array([j.time for j in self.jumps if channel is None or j.channel_index == channel])

    def to_json(self) -> dict:
        return {
            "seed": int(self.seed),
            "jumps": [{"time": j.time, "channel_index": j.channel_index} for j in self.jumps],
            "splits": self.splits,
        }


def expm_taylor(A: np.ndarray, tol: float = 1e-16, max_terms: int = 60) -> np.ndarray:
    """``exp(A)`` by scaling and squaring with a truncated Taylor series.

    The matrix is scaled so that its 1-norm is at most 1/2; terms are added
    until the last one falls below ``tol`` relative to the partial sum.
    """
    A = np.asarray(A, dtype=DTYPE)
    nrm = np.abs(A).sum(axis=0).max() if A.size else 0.0
    s = max(0, int(math.ceil(math.log2(nrm / 0.5)))) if nrm > 0.5 else 0
    B = A / (2.0**s)
    out = np.eye(A.shape[0], dtype=DTYPE)
    term = np.eye(A.shape[0], dtype=DTYPE)
    for k in range(1, max_terms + 1):
        term = term @ B / k
        out += term
        if np.abs(term).sum(axis=0).max() <= tol * max(1.0, np.abs(out).sum(axis=0).max()):
            break
    else:
        raise FloatingPointError("Taylor series did not converge")
    for _ in range(s):
        out = out @ out
    return out


def propagator(spec: MasterEquationSpec, dt: float) -> np.ndarray:
    """Dense ``exp(-i H_eff dt)`` with ``H_eff = H - (i/2) sum g O^dag O``."""
    K = spec.effective_generator().toarray()  # K = -i H_eff
    return expm_taylor(K * dt)


def default_dt(spec: MasterEquationSpec, target: float = 0.05) -> float:
    """Step with ``|H_eff| dt = target`` (1-norm)."""
    K = spec.effective_generator()
    nrm = float(abs(K).sum(axis=0).max())
    return target / nrm if nrm > 0 else 1.0


def _observe(psi: np.ndarray, n_max: int, qd: int) -> tuple[float, complex, float, float]:
    amps = psi.reshape(n_max, qd)
    pn = np.sum(np.abs(amps) ** 2, axis=1)
    nn = np.arange(n_max)
    n = float(np.dot(nn, pn))
    sq = np.sqrt(nn[1:])
    # <a> = sum_n sqrt(n) <n-1|..|n>, same for a^2
    ea = complex(np.sum(sq[:, None] * amps[:-1].conj() * amps[1:]))
    ea2 = complex(np.sum((sq[1:] * sq[:-1])[:, None] * amps[:-2].conj() * amps[2:]))
    var_x = 2 * ea2.real + 2 * n + 1 - (2 * ea.real) ** 2
    exc = float(np.sum(np.abs(amps[:, 1]) ** 2)) if qd == 2 else float("nan")
    return n, ea, var_x, exc


class _Stepper:
    """Holds propagators for ``dt / 2^level`` and the jump operators."""

    def __init__(self, spec: MasterEquationSpec, dt: float):
        self.spec = spec
        self.dt = dt
        self.ops = [(i, O.matrix.tocsr(), g) for i, (O, g) in enumerate(spec.collapse_channels)]
        self._U: dict[int, np.ndarray] = {}

    def U(self, level: int) -> np.ndarray:
        if level not in self._U:
            self._U[level] = propagator(self.spec, self.dt / 2**level)
        return self._U[level]


def mcwf_run(psi0: Ket, spec: MasterEquationSpec, t_final: float, dt: float | None = None,
             seed: int = 0, *, record_every: int = 1, snapshot_times: Sequence[float] = (),
             stepper: _Stepper | None = None) -> TrajectoryRecord:
    """One quantum-jump trajectory on the time grid ``k * dt``.

    Observables (``n``, ``a``, ``var_x``, ``excited``) are recorded every
    ``record_every`` steps.  Reproducible bit for bit from ``(seed, inputs, dt)``.
    """
    if psi0.config != spec.config:
        raise ValueError("initial state does not match the model dimension")
    if dt is None:
        dt = default_dt(spec)
    n_steps = int(round(t_final / dt))
    if not math.isclose(n_steps * dt, t_final, rel_tol=1e-9):
        raise ValueError("t_final must be an integer multiple of dt")
    st = stepper if stepper is not None and stepper.dt == dt else _Stepper(spec, dt)
    rng = np.random.Generator(np.random.PCG64(seed))
    cfg = spec.config
    psi = psi0.amplitudes / np.linalg.norm(psi0.amplitudes)
    snap_steps = {int(round(t / dt)): float(t) for t in snapshot_times}
    rec_t, rec = [], []
    jumps: list[JumpRecord] = []
    snaps: dict[float, Ket] = {}
    splits = 0

    def advance(psi, t0, level):
        nonlocal splits
        h = dt / 2**level
        probs = []
        for i, O, g in st.ops:
            if g:
                v = O @ psi
                probs.append((i, v, g * h * float(np.vdot(v, v).real)))
        if probs and max(p for _, _, p in probs) >= P_MAX:
            if level >= MAX_SPLIT:
                raise FloatingPointError("step rejection cascade: jump probability stays above limit")
            splits += 1
            psi = advance(psi, t0, level + 1)
            return advance(psi, t0 + h, level + 1)
        r = rng.random(len(st.ops))
        fired = [(i, v) for i, v, p in probs if r[i] < p]
        if fired:
            # every channel that fired is applied, in channel order
            for j, (i, v) in enumerate(fired):
                psi = v if j == 0 else st.ops[i][1] @ psi
                nrm = np.linalg.norm(psi)
                if nrm < 1e-150:
                    raise NormUnderflowError("state norm underflow after jump")
                psi = psi / nrm
                jumps.append(JumpRecord(t0 + h, i))
            return psi
        psi = st.U(level) @ psi
        nrm = np.linalg.norm(psi)
        if nrm < 1e-150:
            raise NormUnderflowError("state norm underflow during no-jump evolution")
        return psi / nrm

    for k in range(n_steps + 1):
        if k % record_every == 0 or k == n_steps:
            rec_t.append(k * dt)
            rec.append(_observe(psi, cfg.n_max, cfg.qubit_dim))
        if k in snap_steps:
            snaps[snap_steps[k]] = Ket(psi.copy(), cfg, normalize=False)
        if k < n_steps:
            psi = advance(psi, k * dt, 0)
    obs = {
        "n": np.array([r[0] for r in rec], dtype=float),
        "a": np.array([r[1] for r in rec], dtype=complex),
        "var_x": np.array([r[2] for r in rec], dtype=float),
    }
    if cfg.qubit_dim == 2:
        obs["excited"] = np.array([r[3] for r in rec], dtype=float)
    return TrajectoryRecord(int(seed), np.array(rec_t), obs, jumps, snaps, splits)


def trajectory_seed(master_seed: int, run_index: int) -> int:
    """64-bit seed of run ``run_index``, independent of scheduling order."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(run_index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _worker(args):
    psi0, spec, t_final, dt, seed, record_every = args
    return mcwf_run(psi0, spec, t_final, dt, seed, record_every=record_every)


def _threads(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("PHONONCAT_THREADS", os.cpu_count() or 1))
    return max(1, int(workers))


def run_ensemble(psi0: Ket, spec: MasterEquationSpec, t_final: float, dt: float | None,
                 master_seed: int, n_runs: int, *, record_every: int = 1,
                 workers: int | None = None) -> list[TrajectoryRecord]:
    """``n_runs`` independent trajectories, returned in run-index order."""
    if dt is None:
        dt = default_dt(spec)
    seeds = [trajectory_seed(master_seed, i) for i in range(n_runs)]
    nw = _threads(workers)
    if nw == 1:
        st = _Stepper(spec, dt)
        return [mcwf_run(psi0, spec, t_final, dt, s, record_every=record_every, stepper=st)
                for s in seeds]
    tasks = [(psi0, spec, t_final, dt, s, record_every) for s in seeds]
    with ProcessPoolExecutor(max_workers=nw) as ex:
        return list(ex.map(_worker, tasks, chunksize=max(1, n_runs // (4 * nw))))


def ensemble_average(runs: list[TrajectoryRecord]) -> EvolutionResult:
    """Mean and standard error per observable; ``errors`` holds the standard errors."""
    if not runs:
        raise ValueError("empty ensemble")
    t0 = runs[0].times
    for r in runs[1:]:
        if r.times.shape != t0.shape or np.any(r.times != t0):
            raise ValueError("trajectories have different time grids")
    M = len(runs)
    means, errs = {}, {}
    for key in runs[0].observables:
        stack = np.stack([r.observables[key] for r in runs])
        mu = np.sum(stack, axis=0) / M
        means[key] = mu
        if M > 1:
            dev = stack - mu
            var = np.sum(np.abs(dev) ** 2, axis=0) / (M - 1)
            errs[key] = np.sqrt(var / M)
        else:
            errs[key] = np.zeros_like(np.abs(mu))
    return EvolutionResult(t0.copy(), means, errors=errs, stats={"runs": M})
