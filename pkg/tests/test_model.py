import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from phonon_cat.hilbert import HilbertConfig, basis_ket
from phonon_cat.model import (
    HBAR,
    K_B,
    TWO_PI,
    DeviceParams,
    EffectiveModelParams,
    SystemParams,
    build_dressed_frame,
    build_lab_frame,
    build_two_phonon_jc,
    cooperativity,
    dephasing_threshold,
    dressed_basis_change,
    dressed_states,
    dressed_tls,
    effective_from_lab,
    floquet_tls_splitting,
    g1_from_device,
    g2_from_device,
    system_from_device,
    thermal_occupation,
    two_phonon_rabi_contrast,
    two_phonon_resonance_shift,
)


def device(**kw):
    base = dict(z_zpf=200e-15, omega_m=TWO_PI * 1.8e6, Q=4.2e8, T=0.01, gamma_z=TWO_PI * 10, G2=9e15)
    base.update(kw)
    return DeviceParams(**base)


def test_g2_examples():
    assert g2_from_device(device()) / TWO_PI == pytest.approx(5.0, rel=0.02)
    assert g2_from_device(device(z_zpf=43e-15)) / TWO_PI == pytest.approx(0.23, rel=0.02)
    assert g2_from_device(device(G2=0.0)) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-15, 1e-12), st.floats(1e12, 1e17), st.floats(0.1, 10.0))
def test_g2_scaling(z, G2, k):
    g = g2_from_device(device(z_zpf=z, G2=G2))
    assert g2_from_device(device(z_zpf=k * z, G2=G2)) == pytest.approx(k**2 * g, rel=1e-12)
    assert g2_from_device(device(z_zpf=z, G2=k * G2)) == pytest.approx(k * g, rel=1e-12)


def test_g1_formula():
    # mu_B g_s z_zpf G1 / hbar with the same constants
    dev = device(G1=1e6)
    assert g1_from_device(dev) == pytest.approx(9.274009994e-24 * 2 * 200e-15 * 1e6 / HBAR, rel=1e-12)


def test_thermal_occupation():
    assert thermal_occupation(TWO_PI * 1.8e6, 0.01) == pytest.approx(115, abs=1)
    w = 1.0e6
    T = HBAR * w / (K_B * math.log(2))
    assert thermal_occupation(w, T) == pytest.approx(1.0, rel=1e-12)
    T = HBAR * w / (K_B * 1e-3)
    assert thermal_occupation(w, T) == pytest.approx(K_B * T / (HBAR * w), rel=0.01)
    with pytest.raises(ValueError):
        thermal_occupation(w, 0.0)


def test_cooperativity_examples():
    dev = device()
    s = system_from_device(dev)
    assert cooperativity(s.g2, s.gamma_z, s.gamma_m, s.n_th) == pytest.approx(20, rel=0.05)
    a = system_from_device(device(z_zpf=43e-15, Q=4.2e9))
    assert cooperativity(a.g2, a.gamma_z, a.gamma_m, a.n_th) == pytest.approx(0.4, rel=0.1)
    thr = dephasing_threshold(a.g2, a.gamma_m, a.n_th)
    assert thr / TWO_PI == pytest.approx(4.3, rel=0.1)
    assert cooperativity(a.g2, thr, a.gamma_m, a.n_th) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ZeroDivisionError):
        cooperativity(1.0, 0.0, 1.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(1e-4, 10), st.floats(0, 1e3),
       st.floats(0.1, 10))
def test_cooperativity_rate_rescaling(g, gz, gm, n, k):
    # dimensionless: rescaling every rate leaves C unchanged
    assert cooperativity(k * g, k * gz, k * gm, n) == pytest.approx(cooperativity(g, gz, gm, n), rel=1e-12)


def test_parameter_validation():
    with pytest.raises(ValueError):
        SystemParams(g2=-1.0)
    with pytest.raises(ValueError):
        SystemParams(g2=1.0, gamma_m=float("nan"))
    with pytest.raises(ValueError):
        device(Q=0.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 10), st.floats(0, 10), st.floats(-5, 5), st.floats(-5, 5), st.integers(3, 8))
def test_jc_hermitian(g2, Om, ds, dm, n):
    H = build_two_phonon_jc(SystemParams(g2=g2, Omega=Om, delta_sigma=ds, delta_m=dm), HilbertConfig(n, 2))
    assert H.is_hermitian()


def test_jc_undriven_conserves_excitations():
    cfg = HilbertConfig(8, 2)
    H = build_two_phonon_jc(SystemParams(g2=1.0), cfg).toarray()
    N = np.diag([n + 2 * q for n in range(8) for q in range(2)])
    assert np.allclose(H @ N, N @ H)


def test_two_phonon_rabi_doublet():
    g2 = 0.7
    cfg = HilbertConfig(10, 2)
    H = build_two_phonon_jc(SystemParams(g2=g2), cfg).toarray()
    i0e, i2d = cfg.index(0, 1), cfg.index(2, 0)
    sub = H[np.ix_([i0e, i2d], [i0e, i2d])]
    ev = np.linalg.eigvalsh(sub)
    assert ev[1] - ev[0] == pytest.approx(2 * math.sqrt(2) * g2, rel=1e-12)
    # full propagation: P(|2,d>) = sin^2(sqrt(2) g2 t)
    psi0 = basis_ket(cfg, 0, 1).amplitudes
    for t in (0.3, 0.9, 1.7):
        p = abs(expm(-1j * H * t) @ psi0)[i2d] ** 2
        assert p == pytest.approx(math.sin(math.sqrt(2) * g2 * t) ** 2, abs=1e-12)


def test_dressed_frame_equivalent():
    p = SystemParams(g2=0.8, Omega=2.3, delta_m=0.4)
    cfg = HilbertConfig(9, 2)
    H = build_two_phonon_jc(p, cfg)
    Hd = build_dressed_frame(p, cfg)
    U = dressed_basis_change(cfg)
    assert np.allclose((U.dag() @ H @ U).toarray(), Hd.toarray(), atol=1e-12)
    assert np.allclose(np.linalg.eigvalsh(H.toarray()), np.linalg.eigvalsh(Hd.toarray()))
    with pytest.raises(ValueError):
        build_dressed_frame(p.with_(delta_sigma=1.0), cfg)


def test_dressed_frame_ground_state_is_bare_ground():
    # |d> = (|+> + |->)/sqrt(2) in the dressed basis
    cfg = HilbertConfig(2, 2)
    U = dressed_basis_change(cfg).toarray()[:2, :2]
    assert np.allclose(U @ (np.array([1, 1]) / math.sqrt(2)), [1, 0])


@settings(max_examples=40, deadline=None)
@given(st.floats(1e3, 1e10), st.floats(-1e10, 1e10))
def test_dressed_angles_unit_circle(Ox, Delta):
    p = EffectiveModelParams(D=1e10, omega_x=1e10 - Delta, Omega_x=Ox)
    q = dressed_tls(p)
    assert q["cos_theta"] ** 2 + q["sin_theta"] ** 2 == pytest.approx(1.0, abs=1e-12)
    assert q["omega_gd"] - q["omega_de"] == pytest.approx(p.Delta, rel=1e-9, abs=1e-6 * abs(q["R"]))


def test_dressed_limits():
    p = EffectiveModelParams(D=TWO_PI * 2.88e9, omega_x=TWO_PI * 1e9, Omega_x=TWO_PI * 82e6)
    q = dressed_tls(p)
    assert q["sin_theta"] > 0.99
    assert q["omega_de"] == pytest.approx(p.Omega_x**2 / p.Delta, rel=0.01)
    # omega_de close to 2 omega_m for these choices
    assert q["omega_de"] / TWO_PI == pytest.approx(3.6e6, rel=0.05)
    sym = dressed_tls(EffectiveModelParams(D=1.0, omega_x=1.0, Omega_x=0.3))
    assert sym["omega_gd"] == pytest.approx(0.3) and sym["omega_de"] == pytest.approx(0.3)


def test_dressed_states_diagonalize_rotating_frame():
    p = EffectiveModelParams(D=10.0, omega_x=7.0, Omega_x=1.3)
    st_ = dressed_states(p)
    r = 1 / math.sqrt(2)
    zero, bright, dark = np.array([0, 1, 0]), np.array([r, 0, r]), np.array([r, 0, -r])
    H = p.Delta * (np.outer(bright, bright) + np.outer(dark, dark)) + p.Omega_x * (
        np.outer(zero, bright) + np.outer(bright, zero))
    q = dressed_tls(p)
    E = {k: float(np.real(v.conj() @ H @ v)) for k, v in st_.items()}
    for v in st_.values():
        Hv = H @ v
        assert np.allclose(Hv, (v.conj() @ Hv) * v, atol=1e-12)
    assert E["d"] - E["g"] == pytest.approx(q["omega_gd"])
    assert E["e"] - E["d"] == pytest.approx(q["omega_de"])


def test_hierarchy_violations():
    good = EffectiveModelParams(D=TWO_PI * 2.88e9, omega_x=TWO_PI * 1e9, Omega_x=TWO_PI * 82e6,
                                Omega_z=TWO_PI * 10)
    assert good.hierarchy_violations() == []
    good.validate()
    bad = EffectiveModelParams(D=TWO_PI * 2.88e9, omega_x=TWO_PI * 2.8e9, Omega_x=TWO_PI * 82e6)
    assert bad.hierarchy_violations()
    with pytest.raises(ValueError):
        bad.validate()


def test_effective_from_lab_mapping():
    p = EffectiveModelParams(D=TWO_PI * 2.88e9, omega_x=TWO_PI * 1e9, Omega_x=TWO_PI * 164e6,
                             omega_z_drive=TWO_PI * 3.6e6, Omega_z=TWO_PI * 20.0)
    s = effective_from_lab(p, g2=TWO_PI * 5.0, omega_m=TWO_PI * 1.8e6, lab_amplitude=True)
    q = dressed_tls(p, lab_amplitude=True)
    assert s.g2 == pytest.approx(TWO_PI * 5.0 * q["sin_theta"])
    assert s.Omega == pytest.approx(TWO_PI * 10.0 * q["sin_theta"])
    assert s.delta_m == pytest.approx(0.0)


def test_lab_frame_hermitian_and_periodic():
    p = EffectiveModelParams(D=10.0, omega_x=8.0, Omega_x=0.5)
    H = build_lab_frame(p, 0.01, HilbertConfig(4, 3), omega_m=0.3)
    for t in (0.0, 0.37, 1.1):
        assert H(t).is_hermitian()
    assert np.allclose(H.matrix(0.2).toarray(), H.matrix(0.2 + H.period).toarray())
    with pytest.raises(ValueError):
        build_lab_frame(p, 0.01, HilbertConfig(4, 2))


def test_floquet_splitting_matches_second_order():
    # weak drive: rotating-wave value plus the counter-rotating shift Ox^2 / (D + omega_x)
    p = EffectiveModelParams(D=TWO_PI * 1e4, omega_x=TWO_PI * 8e3, Omega_x=TWO_PI * 20)
    exact = floquet_tls_splitting(p)
    ox = p.Omega_x / 2
    rwa = dressed_tls(p, lab_amplitude=True)["omega_de"]
    assert exact == pytest.approx(rwa + ox**2 / (p.D + p.omega_x), rel=2e-3)
    assert abs(exact - rwa) > 0.05 * rwa


def test_resonance_contrast_unshifted_without_g1():
    det = np.array([-1.0, 0.0, 1.0])
    c = two_phonon_rabi_contrast(det, 0.0, TWO_PI * 100.0, 0.5)
    assert c[1] == pytest.approx(1.0, abs=1e-9)
    assert c[0] < c[1] and c[2] < c[1]
    assert two_phonon_resonance_shift(0.0, 1.0, 1.0) == 0.0


def test_resonance_shift_perturbative():
    wm, g2 = TWO_PI * 1.8e6, TWO_PI * 5
    g1 = TWO_PI * 25e3
    lam = two_phonon_resonance_shift(g1, wm, g2)
    assert lam == pytest.approx(4 * g1**2 / wm, rel=0.02)
