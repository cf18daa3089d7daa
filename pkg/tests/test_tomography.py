import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.stats import chisquare, poisson

from phonon_cat.dynamics import MasterEquationSpec, evolve, quadrature_variance
from phonon_cat.hilbert import HilbertConfig, Ket, TruncationError, annihilation, basis_ket, partial_trace
from phonon_cat.model import SystemParams
from phonon_cat.phase_space import CatSpec, GridSpec, cat_state, coherent_state, negativity, wigner
from phonon_cat.tomography import (
    MeasurementData,
    MeasurementPlan,
    displaced_number_distribution,
    displacement_block,
    displacement_operator,
    estimator_variance,
    fringe_contrast,
    parity_scan,
    quadrature_estimate,
    sample_measurements,
)

OSC = HilbertConfig(40, 1)


def tv(p, q):
    n = max(len(p), len(q))
    p = np.pad(p, (0, n - len(p)))
    q = np.pad(q, (0, n - len(q)))
    return 0.5 * np.abs(p - q).sum()


def test_displacement_block_matches_expm():
    N = 90
    a = annihilation(HilbertConfig(N, 1)).toarray()
    for alpha in (0.3 + 0.4j, -1.7 + 0.2j, 2.5j):
        ref = expm(alpha * a.conj().T - np.conj(alpha) * a)[:30, :30]
        assert np.allclose(displacement_block(alpha, 30, 30), ref, atol=1e-12)


def test_displacement_of_vacuum_is_coherent():
    alpha = 1.2 - 0.7j
    D = displacement_operator(alpha, OSC)
    k = Ket(D.matrix @ basis_ket(OSC, 0).amplitudes, OSC, normalize=False)
    assert abs(k.overlap(coherent_state(alpha, OSC))) > 1 - 1e-10


def test_displacement_group_and_covariance(rng):
    alpha = 0.9 + 0.5j
    big = 80
    Dp = displacement_block(alpha, 20, big)
    Dm = displacement_block(-alpha, big, 20)
    assert np.allclose(Dp @ Dm, np.eye(20), atol=1e-8)
    # D^dag a D = a + alpha on random low-lying kets
    a = annihilation(HilbertConfig(big, 1)).toarray()
    D = displacement_block(alpha, big, big)
    v = np.zeros(big, complex)
    v[:6] = rng.normal(size=6) + 1j * rng.normal(size=6)
    lhs = D.conj().T @ a @ D @ v
    assert np.allclose(lhs[:30], (a @ v + alpha * v)[:30], atol=1e-8)


def test_displacement_operator_truncation_check():
    with pytest.raises(TruncationError) as exc:
        displacement_operator(6.0, HilbertConfig(60, 1))
    assert exc.value.required_n_max > 60


@pytest.mark.parametrize("alpha", [0.5, 2.0 - 1.0j, 6.0j])
def test_displaced_vacuum_is_poisson(alpha):
    p = displaced_number_distribution(basis_ket(OSC, 0).to_density(), alpha)
    assert p.sum() == pytest.approx(1.0, abs=1e-8)
    assert tv(p, poisson.pmf(np.arange(p.size), abs(alpha) ** 2)) < 1e-8


def test_fock_one_undisplaced():
    p = displaced_number_distribution(basis_ket(OSC, 1).to_density(), 0.0)
    assert p[1] == pytest.approx(1.0)


@settings(max_examples=25, deadline=None)
@given(st.complex_numbers(max_magnitude=2.0), st.complex_numbers(max_magnitude=3.0))
def test_coherent_displacement_covariance(gamma, alpha):
    # rho -> D(alpha)^dag rho D(alpha) sends |gamma> to |gamma - alpha>
    p = displaced_number_distribution(coherent_state(gamma, OSC), alpha)
    assert tv(p, poisson.pmf(np.arange(p.size), abs(gamma - alpha) ** 2)) < 1e-8


def test_padding_versus_strict_mode():
    cat = cat_state(CatSpec(2.0j), OSC)
    p = displaced_number_distribution(cat, 6.0)
    assert p.size > OSC.n_max and p.sum() == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(TruncationError):
        displaced_number_distribution(cat, 6.0, pad=False)


def test_plan_validation():
    with pytest.raises(ValueError):
        MeasurementPlan(1.0, (0.0,), 0)
    with pytest.raises(ValueError):
        MeasurementPlan(1.0, (7.0,), 10)
    p = MeasurementPlan.uniform(2.0, 4, 10, seed=3)
    assert np.allclose(p.alphas(), 2.0 * np.array([1, 1j, -1, -1j]))
    assert p.to_json()["seed"] == 3


def test_sampling_determinism_and_smoke():
    cat = cat_state(CatSpec(1.5j), OSC)
    plan = MeasurementPlan.uniform(3.0, 6, 500, seed=17)
    a = sample_measurements(cat, plan)
    b = sample_measurements(cat, plan)
    assert np.array_equal(a.counts, b.counts)
    one = sample_measurements(cat, MeasurementPlan.uniform(3.0, 6, 1, seed=1))
    assert np.all(one.counts.sum(axis=1) == 1)
    zero = sample_measurements(basis_ket(OSC, 0), MeasurementPlan(0.0, (0.0, 1.0), 50))
    assert np.all(zero.counts[:, 0] == 50)
    with pytest.raises(ValueError):
        MeasurementData(plan, a.counts[:, :-1] * 0)


def test_empirical_histogram_converges():
    cat = cat_state(CatSpec(1.5j), OSC)
    data = sample_measurements(cat, MeasurementPlan.uniform(3.0, 3, 100_000, seed=5))
    for h, p in zip(data.histograms, data.exact):
        assert tv(h, p) < 0.02


def test_vacuum_counts_chi_square():
    plan = MeasurementPlan(2.0, (0.3,), 10_000, seed=21)
    data = sample_measurements(basis_ket(OSC, 0), plan)
    p = data.exact[0]
    keep = p * plan.shots > 5
    obs = np.append(data.counts[0][keep], data.counts[0][~keep].sum())
    exp = np.append(p[keep], p[~keep].sum()) * plan.shots
    assert chisquare(obs, exp).pvalue > 0.01


def test_quadrature_estimate_coherent_and_vacuum():
    gamma = 0.6 - 0.8j
    for amp, phase in ((12.0, 0.3), (12.0, 2.0), (15.0, -1.0)):
        alpha = amp * np.exp(1j * phase)
        theta = np.angle(-alpha)
        est = quadrature_estimate(coherent_state(gamma, OSC), alpha)
        exact = math.sqrt(2) * np.real(gamma * np.exp(-1j * theta))
        assert abs(est - exact) <= (1 + abs(gamma) ** 2) / (math.sqrt(2) * amp)
        assert abs(quadrature_estimate(basis_ket(OSC, 0), alpha)) <= 1 / (math.sqrt(2) * amp)


def test_quadrature_estimate_guards():
    with pytest.raises(ValueError):
        quadrature_estimate(basis_ket(OSC, 0), 0.0)
    with pytest.warns(RuntimeWarning):
        quadrature_estimate(coherent_state(1.0, OSC), 2.0)


def test_estimator_variance_tracks_squeezing():
    # dressed |+> branch of the driven model squeezes the vacuum along pi/4
    cfg = HilbertConfig(30, 2)
    spec = MasterEquationSpec.from_params(SystemParams(g2=1.0, Omega=8.0), cfg)
    psi0 = basis_ket(HilbertConfig(30, 1), 0).tensor(np.array([1.0, 1.0]) / math.sqrt(2))
    t = 0.15
    res = evolve(psi0.to_density(), spec, t, [0.0, t], snapshot_times=[t], rtol=1e-10, atol=1e-12)
    rho = partial_trace(res.snapshots[t])
    amp = 20.0
    angles = np.array([0.25, 0.75, 1.25, 1.75]) * math.pi
    data = sample_measurements(rho, MeasurementPlan(amp, tuple(angles), 100_000, seed=8))
    est = estimator_variance(data)
    exact = np.array([quadrature_variance(rho, np.angle(-amp * np.exp(1j * th))) / 2 for th in angles])
    assert exact.min() < 0.45  # genuinely squeezed along one diagonal
    assert np.allclose(est, exact, rtol=0.05)


def test_parity_scan_matches_wigner():
    spec = GridSpec(half_width=3.0, points=31, auto_expand=False)
    for rho in (basis_ket(OSC, 0), cat_state(CatSpec(1.2j), OSC), basis_ket(OSC, 3)):
        a = parity_scan(rho, spec)
        b = wigner(rho, spec)
        assert np.max(np.abs(a.values - b.values)) < 1e-10
    f1 = parity_scan(basis_ket(OSC, 1), GridSpec(half_width=1.0, points=3, auto_expand=False))
    assert f1.values[1, 1] == pytest.approx(-2 / math.pi)


def test_parity_scan_negativity_of_transient_cat():
    cfg = HilbertConfig(30, 2)
    p = SystemParams(g2=1.0, Omega=4.0, gamma_m=0.01, n_th=5.0, gamma_z=0.05)
    spec = MasterEquationSpec.from_params(p, cfg)
    t = 0.9
    res = evolve(basis_ket(cfg, 0).to_density(), spec, t, [0.0, t], snapshot_times=[t])
    spec_g = GridSpec(half_width=4.5, points=61, auto_expand=False)
    a = negativity(parity_scan(res.snapshots[t], spec_g))
    b = negativity(wigner(res.snapshots[t], spec_g))
    assert b > 0.01
    assert a == pytest.approx(b, rel=0.01)


def test_fringe_contrast_separates_cat_from_coherent():
    n = 4.0
    beta = 2.0
    cat = cat_state(CatSpec(1j * beta), OSC)
    coh = coherent_state(1j * math.sqrt(n), OSC)
    plan = MeasurementPlan.uniform(6.0, 12, 10, seed=0)
    fc = [fringe_contrast(p) for p in sample_measurements(cat, plan).exact]
    fh = [fringe_contrast(p) for p in sample_measurements(coh, plan).exact]
    assert max(fc) > 0.2
    assert max(fh) < 0.05
    # cat fringes depend on theta: strongest where the displacement is along the cat axis
    assert max(fc) - min(fc) > 0.1
