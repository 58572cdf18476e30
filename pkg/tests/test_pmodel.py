import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpphybrid.errors import DegenerateEnvironmentError, DomainError, InvalidInputError
from gpphybrid.pmodel import (
    PhotoEnv,
    PModelParams,
    eta_star,
    gamma_star,
    gpp,
    kmm,
    lue,
    optimal_chi,
    phi0_temp,
    soil_beta,
)

# Expected values below were produced by a stand-alone script using only the
# math module and the written-out formulas (Arrhenius with (T_K - 298.15),
# Vogel viscosity ratio, chi/xi closed forms); they are frozen here.
GSTAR_35 = 7.1084545777249994
KMM_15 = 30.042770690744405
ETA_0 = 1.9687567382577764
ETA_40 = 0.7315805999175328
CHI_REF = 0.753221013880734
XI_REF = 82.82300680594817
LUE_REF = 0.3648585619283237


def env(**kw):
    base = dict(tc=25.0, vpd=1000.0, patm=101325.0, co2_ppm=400.0, theta=1.0, par=40.0, fapar=0.6)
    base.update(kw)
    return PhotoEnv(**base)


class TestGammaStar:
    def test_reference_point(self):
        assert gamma_star(25.0, 101325.0) == 4.332

    def test_half_pressure(self):
        assert gamma_star(25.0, 50662.5) == pytest.approx(2.166, rel=1e-15)

    def test_35c_oracle(self):
        assert gamma_star(35.0, 101325.0) == pytest.approx(GSTAR_35, rel=1e-12)

    def test_increasing_in_temperature(self):
        tc = np.linspace(-50, 60, 500)
        assert np.all(np.diff(gamma_star(tc, 101325.0)) > 0)

    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            gamma_star(np.nan, 101325.0)


class TestKmm:
    def test_reference_hand_arithmetic(self):
        expected = 39.97 * (1 + 0.209476 * 101325 / 27480)
        assert kmm(25.0, 101325.0) == pytest.approx(expected, rel=1e-12)
        assert kmm(25.0, 101325.0) == pytest.approx(70.84, abs=0.005)

    def test_zero_pressure_limit(self):
        assert kmm(25.0, 0.0) == pytest.approx(39.97, rel=1e-15)

    def test_15c_oracle(self):
        assert kmm(15.0, 101325.0) == pytest.approx(KMM_15, rel=1e-12)

    def test_non_finite(self):
        with pytest.raises(InvalidInputError):
            kmm(np.inf, 101325.0)


class TestEtaStar:
    def test_reference_is_one(self):
        assert eta_star(25.0) == 1.0

    def test_oracle(self):
        assert eta_star(0.0) == pytest.approx(ETA_0, rel=1e-12)
        assert eta_star(40.0) == pytest.approx(ETA_40, rel=1e-12)
        assert eta_star(40.0) < 1

    def test_strictly_decreasing(self):
        tc = np.linspace(-19.9, 99.9, 1000)
        assert np.all(np.diff(eta_star(tc)) < 0)

    def test_domain(self):
        with pytest.raises(DomainError):
            eta_star(-133.15)


class TestOptimalChi:
    def test_zero_vpd(self):
        assert optimal_chi(env(vpd=0.0)).chi == 1.0

    def test_huge_vpd_limit(self):
        # the gap above the floor is (1 - floor) * xi / (xi + sqrt(D)) and vanishes as D grows
        gaps = []
        for d in (1e9, 1e11, 1e13, 1e15):
            res = optimal_chi(env(vpd=d))
            floor = res.gstar / res.ca_pa
            expected = (1 - floor) * res.xi / (res.xi + np.sqrt(d))
            assert res.chi - floor == pytest.approx(expected, rel=1e-9)
            gaps.append((res.chi - floor) / floor)
        assert np.all(np.diff(gaps) < 0)
        assert gaps[-1] < 1e-4

    def test_reference_oracle(self):
        res = optimal_chi(env())
        assert res.chi == pytest.approx(CHI_REF, rel=1e-12)
        assert res.xi == pytest.approx(XI_REF, rel=1e-12)
        assert res.ca_pa == pytest.approx(400e-6 * 101325, rel=1e-15)

    def test_degenerate(self):
        with pytest.raises(DegenerateEnvironmentError):
            optimal_chi(env(co2_ppm=40.0))

    def test_bounds_random_grid(self):
        rng = np.random.default_rng(0)
        n = 10_000
        e = PhotoEnv(tc=rng.uniform(-10, 45, n), vpd=rng.uniform(0, 5000, n), patm=101325.0,
                     co2_ppm=rng.uniform(300, 900, n), theta=rng.uniform(0, 1, n))
        res = optimal_chi(e)
        assert np.all(res.chi > res.gstar / res.ca_pa)
        assert np.all(res.chi <= 1.0)

    def test_decreasing_in_vpd(self):
        rng = np.random.default_rng(1)
        d = np.linspace(10, 5000, 20)
        for _ in range(200):
            tc, co2 = rng.uniform(-10, 45), rng.uniform(300, 900)
            chi = optimal_chi(PhotoEnv(tc=tc, vpd=d, patm=101325.0, co2_ppm=co2)).chi
            assert np.all(np.diff(chi) < 0)


class TestPhi0:
    def test_25c(self):
        assert phi0_temp(25.0) == pytest.approx((0.352 + 0.55 - 0.2125) / 8, abs=1e-15)
        assert phi0_temp(25.0) == pytest.approx(0.08619, abs=1e-5)

    def test_cold_clamp(self):
        poly = (0.352 + 0.022 * -20 - 3.4e-4 * 400) / 8
        assert poly < 0
        assert phi0_temp(-20.0) == 0.0

    def test_vertex(self):
        v = phi0_temp(32.35)
        assert v >= phi0_temp(31.35) and v >= phi0_temp(33.35)
        grid = np.linspace(20, 45, 2501)
        assert grid[np.argmax(phi0_temp(grid))] == pytest.approx(32.35, abs=0.01)


class TestSoilBeta:
    @pytest.mark.parametrize("theta, expected", [(0.8, 1.0), (0.6, 1.0), (0.0, 0.0), (0.3, 0.75)])
    def test_branches(self, theta, expected):
        assert soil_beta(theta) == pytest.approx(expected, abs=1e-15)

    def test_out_of_range(self):
        with pytest.raises(InvalidInputError):
            soil_beta(1.2)

    def test_continuous_nondecreasing(self):
        params = PModelParams(soil_theta_0=0.1, soil_theta_star=0.5, soil_beta_0=0.2)
        th = np.linspace(0, 1, 10_001)
        b = soil_beta(th, params)
        assert np.all(np.diff(b) >= 0)
        assert np.max(np.abs(np.diff(b))) < 1e-3
        assert soil_beta(0.05, params) == 0.2


class TestLueGpp:
    def test_zero_stress(self):
        assert lue(env(theta=0.0)) == 0.0

    def test_colimitation_clamp(self):
        # very high Gamma*/c_a pushes m below c*
        params = PModelParams(gamma_star_25=30.0)
        assert lue(env(co2_ppm=400.0), params) == 0.0

    def test_reference_oracle(self):
        assert lue(env()) == pytest.approx(LUE_REF, rel=1e-12)

    def test_gpp_zero_par(self):
        assert gpp(env(par=0.0)) == 0.0
        assert gpp(env(fapar=0.0)) == 0.0

    def test_gpp_seam(self):
        assert gpp(env(par=30.0, fapar=0.5), lue_value=0.25) == 3.75

    def test_gpp_chain(self):
        assert gpp(env(par=40.0, fapar=0.6)) == pytest.approx(24 * LUE_REF, rel=1e-12)

    def test_pure(self):
        a = gpp(env())
        b = gpp(env())
        assert np.float64(a).tobytes() == np.float64(b).tobytes()


env_strategy = st.builds(
    dict,
    tc=st.floats(-10, 45),
    vpd=st.floats(0, 5000),
    co2_ppm=st.floats(300, 900),
    theta=st.floats(0, 1),
    par=st.floats(0, 80, allow_subnormal=False),
    fapar=st.floats(0, 1, allow_subnormal=False),
    patm=st.floats(60000, 105000),
)


@settings(max_examples=300, deadline=None)
@given(env_strategy)
def test_gpp_nonnegative_and_linear(kw):
    e = PhotoEnv(**kw)
    g = gpp(e)
    assert g >= 0
    assert lue(e) >= 0
    doubled = gpp(PhotoEnv(**{**kw, "par": 2 * kw["par"]}))
    assert doubled == pytest.approx(2 * g, rel=1e-12, abs=0)
    half_fapar = gpp(PhotoEnv(**{**kw, "fapar": kw["fapar"] / 2}))
    assert half_fapar == pytest.approx(g / 2, rel=1e-12, abs=0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 60), st.floats(1000, 120000), st.floats(0.1, 10))
def test_gamma_star_linear_in_pressure(tc, patm, factor):
    assert gamma_star(tc, patm * factor) == pytest.approx(factor * gamma_star(tc, patm), rel=1e-13)


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 45), st.floats(50000, 110000))
def test_positive_terms(tc, patm):
    assert gamma_star(tc, patm) > 0
    assert kmm(tc, patm) > 0
    assert eta_star(tc) > 0


def test_params_invariants():
    with pytest.raises(InvalidInputError):
        PModelParams(c_star=1.2)
    with pytest.raises(InvalidInputError):
        PModelParams(soil_theta_0=0.7)
    with pytest.raises(InvalidInputError):
        PModelParams(beta_cost=-1)
    with pytest.raises(InvalidInputError):
        PModelParams.from_dict({"nope": 1})


def test_env_invariants():
    with pytest.raises(InvalidInputError):
        env(vpd=-1.0)
    with pytest.raises(InvalidInputError):
        env(fapar=1.5)
    with pytest.raises(InvalidInputError):
        env(tc=np.nan)
