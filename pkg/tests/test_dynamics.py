import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from phonon_cat.dynamics import (
    EvolutionResult,
    MasterEquationSpec,
    SteadyStateError,
    branch_quadrature_variances,
    evolve,
    lindblad_rhs,
    liouvillian,
    observables,
    position_variance,
    quadrature_variance,
    residual,
    steady_state,
)
from phonon_cat.hilbert import DensityOperator, HilbertConfig, annihilation, basis_ket
from phonon_cat.model import SystemParams, build_two_phonon_jc

from conftest import random_density, small_params


def ground(cfg):
    return basis_ket(cfg, 0, 0).to_density()


def dissipator_reference(rho, O, g):
    Od = O.conj().T
    return g * (O @ rho @ Od - 0.5 * (Od @ O @ rho + rho @ Od @ O))


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 7), st.integers(0, 2**31))
def test_rhs_matches_textbook_form(n, seed):
    rng = np.random.default_rng(seed)
    cfg = HilbertConfig(n, 2)
    p = small_params()
    spec = MasterEquationSpec.from_params(p, cfg)
    rho = random_density(cfg, rng)
    H = spec.hamiltonian.toarray()
    ref = -1j * (H @ rho.matrix - rho.matrix @ H)
    for O, g in spec.collapse_channels:
        ref = ref + dissipator_reference(rho.matrix, O.toarray(), g)
    out = lindblad_rhs(rho, spec)
    assert np.allclose(out, ref, atol=1e-12)
    # trace preserving, Hermiticity preserving
    assert abs(np.trace(out)) < 1e-10
    assert np.allclose(out, out.conj().T, atol=1e-12)


def test_liouvillian_matches_rhs(rng):
    cfg = HilbertConfig(5, 2)
    spec = MasterEquationSpec.from_params(small_params(), cfg)
    rho = random_density(cfg, rng)
    L = liouvillian(spec)
    assert np.allclose((L @ rho.matrix.ravel()).reshape(cfg.dim, cfg.dim), lindblad_rhs(rho, spec), atol=1e-12)


def test_spec_validation():
    cfg = HilbertConfig(4, 2)
    H = build_two_phonon_jc(small_params(), cfg)
    with pytest.raises(ValueError):
        MasterEquationSpec(H, ((annihilation(cfg), -1.0),))
    with pytest.raises(ValueError):
        MasterEquationSpec(H, ((annihilation(HilbertConfig(5, 2)), 1.0),))


def test_vacuum_quadratures():
    rho = ground(HilbertConfig(6, 2))
    assert position_variance(rho) == pytest.approx(1.0)
    obs = observables(rho)
    assert obs["n"] == 0 and obs["a"] == 0 and obs["excited"] == 0
    assert obs["var_q45"] == pytest.approx(1.0)


def test_quadrature_variance_coherent_state():
    from phonon_cat.phase_space import coherent_state

    k = coherent_state(1.2 - 0.5j, HilbertConfig(40, 1))
    for th in (0.0, 0.4, -1.3):
        assert quadrature_variance(k.to_density(), th) == pytest.approx(1.0, abs=1e-9)


def test_closed_evolution_matches_expm():
    cfg = HilbertConfig(8, 2)
    p = SystemParams(g2=0.9, Omega=1.3, delta_m=0.2)
    spec = MasterEquationSpec.from_params(p, cfg)
    rho0 = ground(cfg)
    t = 2.0
    res = evolve(rho0, spec, t, [0.0, t], snapshot_times=[t], rtol=1e-11, atol=1e-13)
    U = expm(-1j * spec.hamiltonian.toarray() * t)
    ref = U @ rho0.matrix @ U.conj().T
    assert np.allclose(res.snapshots[t].matrix, ref, atol=1e-8)


def test_evolution_preserves_state_properties():
    cfg = HilbertConfig(18, 2)
    spec = MasterEquationSpec.from_params(small_params(), cfg)
    ts = np.linspace(0, 2.0, 9)
    res = evolve(ground(cfg), spec, 2.0, ts, snapshot_times=ts, rtol=1e-10, atol=1e-12)
    assert res.max_trace_drift < 1e-8
    for rho in res.snapshots.values():
        assert rho.hermiticity_error() < 1e-10
        assert rho.min_eigenvalue() > -1e-8


def test_zero_drive_stays_in_vacuum():
    cfg = HilbertConfig(6, 2)
    spec = MasterEquationSpec.from_params(small_params(Omega=0.0), cfg)
    res = evolve(ground(cfg), spec, 3.0)
    assert np.max(np.abs(res.observables["n"])) < 1e-12


def test_evolve_validates_input():
    cfg = HilbertConfig(4, 2)
    spec = MasterEquationSpec.from_params(small_params(), cfg)
    bad = DensityOperator(np.eye(cfg.dim) / 2, cfg)
    with pytest.raises(ValueError):
        evolve(bad, spec, 1.0)
    with pytest.raises(ValueError):
        evolve(ground(cfg), spec, 1.0, [0.0, 2.0])
    with pytest.raises(ValueError):
        evolve(ground(HilbertConfig(5, 2)), spec, 1.0)


def test_evolution_result_checks_lengths():
    with pytest.raises(ValueError):
        EvolutionResult(np.array([0.0, 1.0]), {"n": np.zeros(3)})
    with pytest.raises(ValueError):
        EvolutionResult(np.array([1.0, 0.0]), {})


def test_steady_state_direct_vs_longtime():
    cfg = HilbertConfig(12, 2)
    spec = MasterEquationSpec.from_params(small_params(), cfg)
    a = steady_state(spec, "direct")
    b = steady_state(spec, "longtime", tol=1e-11)
    assert np.abs(np.linalg.eigvalsh(a.matrix - b.matrix)).sum() < 1e-6
    assert residual(spec, a) < 1e-10
    a.validate()


def test_long_evolution_reaches_steady_state():
    cfg = HilbertConfig(16, 2)
    p = small_params()
    spec = MasterEquationSpec.from_params(p, cfg)
    ss = observables(steady_state(spec))["n"]
    t = 40.0 / min(p.gamma_m * p.n_th, p.gamma_z)
    res = evolve(ground(cfg), spec, t, [0.0, t])
    assert res.observables["n"][-1] == pytest.approx(ss, rel=0.01)


def test_steady_state_undriven_is_ground():
    cfg = HilbertConfig(6, 2)
    rho = steady_state(MasterEquationSpec.from_params(small_params(Omega=0.0), cfg))
    assert rho.matrix[0, 0].real == pytest.approx(1.0, abs=1e-10)


def test_steady_state_phase_symmetry():
    cfg = HilbertConfig(40, 2)
    obs = observables(steady_state(MasterEquationSpec.from_params(small_params(Omega=4.0 * 2 * math.pi), cfg)))
    assert obs["n"] > 2
    assert abs(obs["a"]) < 1e-8


def test_steady_state_requires_dissipation():
    cfg = HilbertConfig(4, 2)
    spec = MasterEquationSpec.from_params(SystemParams(g2=1.0, Omega=1.0), cfg)
    with pytest.raises(SteadyStateError):
        steady_state(spec)
    with pytest.raises(ValueError):
        steady_state(MasterEquationSpec.from_params(small_params(), cfg), method="magic")


def test_branch_variances_cross_pattern():
    # early transient at large drive: each dressed branch is squeezed along its own diagonal
    cfg = HilbertConfig(40, 2)
    p = SystemParams(g2=1.0, Omega=8.0, gamma_m=0.01, n_th=1.0, gamma_z=0.01)
    spec = MasterEquationSpec.from_params(p, cfg)
    t = 0.15
    res = evolve(ground(cfg), spec, t, [0.0, t], snapshot_times=[t])
    vp, vm = branch_quadrature_variances(res.snapshots[t])
    assert vp < 0.95 and vm < 0.95
    # the unconditioned state is a mixture of the two and is not squeezed
    obs = observables(res.snapshots[t])
    assert obs["var_q45"] > 1.0 and obs["var_qm45"] > 1.0
    with pytest.raises(ValueError):
        branch_quadrature_variances(ground(HilbertConfig(4, 1)))
