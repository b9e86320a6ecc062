import math

import numpy as np
import pytest

from leoris.channels import FadingParams
from leoris.geometry import SceneConfig, unit, vec3
from leoris.link import (LinkConstants, LinkParams, RisState, SolutionBundle,
                         average_rate, db_to_amp, db_to_pow, dbm_to_w,
                         instantaneous_rate, link_constants, passive_constants,
                         snr, total_energy)
from leoris.scenario import build_scenario, make_bundle


@pytest.fixture(scope="module")
def scene():
    return SceneConfig()


@pytest.fixture(scope="module")
def lc(scene):
    return link_constants(scene, LinkParams())


def test_db_conversions(lc):
    assert db_to_pow(10.0) == pytest.approx(10.0)
    assert dbm_to_w(-10.0) == pytest.approx(1e-4)
    assert db_to_amp(10.0) == pytest.approx(3.1623, abs=1e-4)
    assert lc.g_u == pytest.approx(10.0)
    assert lc.p_c_w == pytest.approx(1e-4)
    assert lc.a_max == pytest.approx(10 ** 0.5)
    assert lc.sigma1_sq == pytest.approx(1e-11)
    assert lc.sigma2_sq == pytest.approx(10 ** (-12.9))


def test_amplitude_db_switch(scene):
    lc = link_constants(scene, LinkParams(a_max_is_amplitude_db=True))
    assert lc.a_max == pytest.approx(10.0)


def test_c1_c2_formulas(scene, lc):
    g_r, g_u, g_s, p_s = 10 ** 0.5, 10.0, 10 ** 2.45, 10 ** 1.5
    assert lc.c1 == pytest.approx(math.sqrt(math.pi * g_r * g_u * g_s * p_s))
    lam = scene.wavelength_m
    assert lc.c2 == pytest.approx(math.sqrt(4 * math.pi / lam ** 2 * g_r * g_u))


def test_missing_parameter_rejected(scene):
    with pytest.raises(ValueError):
        link_constants(scene, LinkParams(eta=None))


def test_snr_zero_cases(lc):
    h_sr = np.ones((4, 2), dtype=complex)
    h_ru = np.ones(4, dtype=complex)
    w = np.array([1.0, 0.0], dtype=complex)
    r = unit(vec3(0.0, -0.9, 0.3))
    l_sr = unit(vec3(0.0, -0.3, 0.95))
    l_ru = unit(vec3(0.0, -0.77, -0.63))
    assert snr(w, RisState.zeros(4), r, h_sr, h_ru, l_sr, l_ru, lc) == 0.0
    # facing away from the user link
    assert snr(w, RisState(np.ones(4)), r, h_sr, h_ru, l_sr, -l_ru, lc) == 0.0


def test_snr_scalar_oracle(lc):
    # MN = 1, L = 1: hand-evaluated fraction
    rng = np.random.default_rng(3)
    for _ in range(25):
        h_sr = (rng.normal() + 1j * rng.normal()) * 1e-8
        h_ru = (rng.normal() + 1j * rng.normal()) * 1e-4
        theta = (rng.normal() + 1j * rng.normal())
        r = unit(rng.standard_normal(3))
        l_sr = unit(rng.standard_normal(3))
        l_ru = unit(rng.standard_normal(3))
        f_sr, f_ru = float(r @ l_sr), float(r @ l_ru)
        got = snr(np.array([1.0 + 0j]), RisState([theta]), r,
                  np.array([[h_sr]]), np.array([h_ru]), l_sr, l_ru, lc)
        if f_sr < 0 or f_ru < 0:
            assert got == 0.0
            continue
        num = abs(lc.c1 * math.sqrt(f_sr * f_ru) * np.conj(h_ru) * theta * h_sr) ** 2
        den = lc.c2 ** 2 * f_ru * abs(h_ru) ** 2 * abs(theta) ** 2 * lc.sigma1_sq \
            + lc.sigma2_sq
        assert got == pytest.approx(num / den, rel=1e-12)


def test_snr_dimension_mismatch(lc):
    with pytest.raises(ValueError):
        snr(np.ones(3), RisState(np.ones(4)), vec3(0, 0, 1.0),
            np.ones((4, 2)), np.ones(4), vec3(0, 0, 1.0), vec3(0, 0, 1.0), lc)


def test_snr_global_phase_invariance(lc):
    rng = np.random.default_rng(11)
    h_sr = (rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))) * 1e-8
    h_ru = (rng.standard_normal(6) + 1j * rng.standard_normal(6)) * 1e-4
    w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    w = w / np.linalg.norm(w)
    theta = RisState(rng.standard_normal(6) + 1j * rng.standard_normal(6))
    r = unit(vec3(0.0, -0.9, 0.44))
    l_sr = unit(vec3(0.0, -0.4, 0.9))
    l_ru = unit(vec3(0.0, -0.8, -0.6))
    base = snr(w, theta, r, h_sr, h_ru, l_sr, l_ru, lc)
    for alpha in (0.3, 1.7, 4.4):
        rot_w = snr(w * np.exp(1j * alpha), theta, r, h_sr, h_ru, l_sr, l_ru, lc)
        rot_t = snr(w, RisState(theta.theta_diag * np.exp(1j * alpha)), r,
                    h_sr, h_ru, l_sr, l_ru, lc)
        assert rot_w == pytest.approx(base, rel=1e-9)
        assert rot_t == pytest.approx(base, rel=1e-9)


def test_snr_monotone_in_c1(lc):
    rng = np.random.default_rng(5)
    h_sr = (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))) * 1e-8
    h_ru = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) * 1e-4
    w = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
    theta = RisState(np.full(4, 2.0 + 0j))
    r = unit(vec3(0.0, -0.9, 0.44))
    l_sr = unit(vec3(0.0, -0.4, 0.9))
    l_ru = unit(vec3(0.0, -0.8, -0.6))
    vals = []
    for scale in (0.5, 1.0, 2.0, 4.0):
        lc2 = LinkConstants(**{**lc.__dict__, "c1": lc.c1 * scale})
        vals.append(snr(w, theta, r, h_sr, h_ru, l_sr, l_ru, lc2))
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_rates():
    assert instantaneous_rate(0.0) == 0.0
    assert instantaneous_rate(1.0) == 1.0
    assert instantaneous_rate(3.0) == 2.0
    with pytest.raises(ValueError):
        instantaneous_rate(-0.1)
    assert average_rate([1.0, 2.0, 3.0, 4.0], 2, 2) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        average_rate([1.0, 2.0], 2, 2)


def test_zero_state_energy_is_switching_only():
    scene = SceneConfig(period_s=10.0)
    fading = FadingParams(ris_rows=6, ris_cols=6)
    lc = link_constants(scene, LinkParams())
    scn = build_scenario(scene, fading, seed=0)
    B, K = 10, 1
    w = np.zeros((B, K, 4), dtype=complex)
    w[..., 0] = 1.0
    thetas = [RisState.zeros(36) for _ in range(B)]
    bundle = SolutionBundle(K=K, B=B, w=w, theta=thetas,
                            r=scn.bisector(), avg_rate=0.0, energy=0.0)
    e = total_energy(bundle, scn.chans, scn.geoms, lc)
    assert e == pytest.approx(10 * 36 * 1e-4, rel=1e-15)
    assert e == pytest.approx(0.036)


def test_energy_quadratic_in_amplitude():
    scene = SceneConfig(period_s=4.0)
    fading = FadingParams(ris_rows=2, ris_cols=2)
    lc = link_constants(scene, LinkParams())
    scn = build_scenario(scene, fading, seed=1)
    B, K = 2, 2
    rng = np.random.default_rng(0)
    w = rng.standard_normal((B, K, 4)) + 1j * rng.standard_normal((B, K, 4))
    w /= np.linalg.norm(w, axis=-1, keepdims=True)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, (B, 4)))
    r = scn.bisector()

    def amp_energy(scale):
        thetas = [RisState(scale * phases[b]) for b in range(B)]
        bundle = SolutionBundle(K=K, B=B, w=w, theta=thetas, r=r,
                                avg_rate=0.0, energy=0.0)
        return total_energy(bundle, scn.chans, scn.geoms, lc) - B * 4 * lc.p_c_w

    assert amp_energy(2.0) == pytest.approx(4.0 * amp_energy(1.0), rel=1e-12)


def test_energy_strictly_increasing_per_amplitude():
    scene = SceneConfig(period_s=2.0)
    fading = FadingParams(ris_rows=2, ris_cols=2)
    lc = link_constants(scene, LinkParams())
    scn = build_scenario(scene, fading, seed=4)
    B, K = 1, 2
    w = np.zeros((B, K, 4), dtype=complex)
    w[..., 0] = 1.0
    r = scn.bisector()
    base = np.ones(4, dtype=complex)
    e0 = total_energy(SolutionBundle(K=K, B=B, w=w, theta=[RisState(base)], r=r,
                                     avg_rate=0.0, energy=0.0),
                      scn.chans, scn.geoms, lc)
    for i in range(4):
        bumped = base.copy()
        bumped[i] = 1.5
        e1 = total_energy(SolutionBundle(K=K, B=B, w=w, theta=[RisState(bumped)],
                                         r=r, avg_rate=0.0, energy=0.0),
                          scn.chans, scn.geoms, lc)
        assert e1 > e0


def test_bundle_validation():
    scene = SceneConfig(period_s=2.0)
    fading = FadingParams(ris_rows=2, ris_cols=2)
    lc = link_constants(scene, LinkParams(e_max_j=1.0))
    scn = build_scenario(scene, fading, seed=2)
    B, K = 1, 2
    w = np.zeros((B, K, 4), dtype=complex)
    w[..., 0] = 1.0
    bundle = make_bundle(scn, K, w, [RisState(np.full(4, 0.5 + 0j))],
                         scn.bisector(), lc)
    bundle.validate(lc, n_slots=2)
    bad_w = bundle.w.copy()
    bad_w[0, 0] *= 2.0
    with pytest.raises(ValueError):
        SolutionBundle(K=K, B=B, w=bad_w, theta=bundle.theta, r=bundle.r,
                       avg_rate=0.0, energy=bundle.energy).validate(lc)
    with pytest.raises(ValueError):
        RisState(np.full(4, 100.0 + 0j)).validate(lc.a_max)


def test_average_rate_matches_bundle():
    scene = SceneConfig(period_s=4.0)
    fading = FadingParams(ris_rows=2, ris_cols=2)
    lc = link_constants(scene, LinkParams())
    scn = build_scenario(scene, fading, seed=5)
    w = np.zeros((2, 2, 4), dtype=complex)
    w[..., 0] = 1.0
    thetas = [RisState(np.full(4, 1.0 + 0j)) for _ in range(2)]
    bundle = make_bundle(scn, 2, w, thetas, scn.bisector(), lc)
    from leoris.scenario import slot_rates
    rates = slot_rates(scn, 2, w, thetas, bundle.r, lc)
    assert bundle.avg_rate == pytest.approx(average_rate(rates, 2, 2), rel=0, abs=0)


def test_passive_constants(lc):
    p = passive_constants(lc)
    assert p.a_max == 1.0 and p.sigma1_sq == 0.0 and p.eta == 0.0
    assert p.c1 == lc.c1 and p.p_c_w == lc.p_c_w
