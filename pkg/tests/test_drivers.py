import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpphybrid import drivers
from gpphybrid.drivers import (
    fapar_from_nirv,
    impute_missing,
    ndvi,
    nirv,
    par_from_swin,
    vpd_from_dewpoint,
)
from gpphybrid.errors import (
    InconsistentInputError,
    InvalidInputError,
    SchemaError,
    UndefinedIndexError,
    UnimputableError,
)


@pytest.mark.parametrize("nir, red, expected", [(0.4, 0.1, 0.6), (0.3, 0.3, 0.0), (0.0, 0.2, -1.0)])
def test_ndvi(nir, red, expected):
    assert ndvi(nir, red) == pytest.approx(expected, abs=1e-15)


def test_ndvi_undefined():
    with pytest.raises(UndefinedIndexError):
        ndvi(0.0, 0.0)


@pytest.mark.parametrize("nir, red, expected, tol", [(0.4, 0.1, 0.24, 1e-15), (0.3, 0.3, 0.0, 0), (0.5, 0.05, 0.4091, 1e-4)])
def test_nirv(nir, red, expected, tol):
    assert nirv(nir, red) == pytest.approx(expected, abs=tol)


def test_vpd():
    assert vpd_from_dewpoint(20.0, 20.0) == 0.0
    # Magnus oracle: 610.8*exp(17.27*25/262.3) - 610.8*exp(17.27*20/257.3)
    assert vpd_from_dewpoint(25.0, 20.0) == pytest.approx(829.496446579401, rel=1e-12)
    assert vpd_from_dewpoint(25.0, 20.0) == pytest.approx(829, abs=1)
    assert vpd_from_dewpoint(30.0, 30.4) == 0.0


def test_vpd_inconsistent():
    with pytest.raises(InconsistentInputError):
        vpd_from_dewpoint(30.0, 30.6)


def test_par():
    assert par_from_swin(0.0) == 0.0
    assert par_from_swin(100.0) == pytest.approx(17.8848, rel=1e-12)
    assert par_from_swin(350.0) == pytest.approx(62.5968, rel=1e-12)
    with pytest.raises(InvalidInputError):
        par_from_swin(-1.0)


def test_fapar():
    assert fapar_from_nirv(0.24) == 0.24
    assert fapar_from_nirv(1.5) == 1.0
    assert fapar_from_nirv(-0.1) == 0.0
    assert fapar_from_nirv(0.2, scale=2.0, offset=0.1) == pytest.approx(0.5)
    with pytest.raises(InvalidInputError):
        fapar_from_nirv(0.2, scale=0.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(-20, 45), st.floats(0, 30), st.floats(0, 500))
def test_derived_properties(nir, red, tc, dep, sw):
    if nir + red == 0:
        return
    n = ndvi(nir, red)
    assert -1 <= n <= 1
    assert nirv(nir, red) == n * nir
    assert vpd_from_dewpoint(tc, tc - dep) >= 0
    assert par_from_swin(sw) >= 0
    assert 0 <= fapar_from_nirv(nirv(nir, red)) <= 1


def frame(**overrides):
    base = {
        "site_id": ["A", "A", "B"], "date": ["2010-01-01", "2010-01-02", "2010-01-01"],
        "pft": ["ENF", "ENF", "CRO"], "tc": [10.0, 14.0, 20.0], "tmin": [5.0, 8.0, 15.0],
        "tmax": [15.0, 18.0, 25.0], "tdew": [5.0, 6.0, 12.0], "sw_in": [150.0, 200.0, 250.0],
        "precip": [0.0, 2.0, 0.0], "theta": [0.3, 0.3, 0.4], "patm": [100000.0] * 3,
        "red_ref": [0.05, 0.06, 0.08], "nir_ref": [0.4, 0.35, 0.3], "co2_ppm": [390.0] * 3,
        "gpp_obs": [3.0, np.nan, 5.0],
    }
    base.update(overrides)
    return pd.DataFrame(base)


class TestImpute:
    def test_no_gaps_identity(self):
        df = frame()
        out = impute_missing(df, "site-median")
        pd.testing.assert_frame_equal(out.drop(columns="imputed"), df)
        assert not out["imputed"].any()
        pd.testing.assert_frame_equal(impute_missing(df, "reject"), df)

    def test_fill_with_site_median(self):
        df = frame(tc=[np.nan, 12.0, 20.0], tmin=[5.0, 8.0, 15.0])
        out = impute_missing(df, "site-median")
        assert out["tc"].tolist() == [12.0, 12.0, 20.0]
        assert out["imputed"].tolist() == [True, False, False]
        assert np.isnan(df["tc"].iloc[0])  # input untouched

    def test_unimputable(self):
        df = frame(tc=[np.nan, np.nan, 20.0])
        with pytest.raises(UnimputableError):
            impute_missing(df, "site-median")

    def test_reject(self):
        with pytest.raises(SchemaError) as exc:
            impute_missing(frame(theta=[0.3, np.nan, 0.4]), "reject")
        assert exc.value.rows == [2]

    def test_unknown_policy(self):
        with pytest.raises(InvalidInputError):
            impute_missing(frame(), "mean")

    def test_gpp_obs_not_required(self):
        out = impute_missing(frame(), "reject")
        assert np.isnan(out["gpp_obs"].iloc[1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), min_size=6, max_size=6))
def test_impute_never_changes_present_values(holes):
    df = pd.concat([frame(), frame(site_id=["C", "C", "D"])], ignore_index=True)
    df["tc"] = df["tc"].astype(float)
    mask = np.array(holes)
    # keep at least one tc value per site
    for site in df["site_id"].unique():
        idx = np.flatnonzero(df["site_id"].to_numpy() == site)
        if mask[idx].all():
            mask[idx[0]] = False
    df.loc[mask, "tc"] = np.nan
    out = impute_missing(df, "site-median")
    present = ~mask
    assert (out.loc[present, "tc"] == df.loc[present, "tc"]).all()
    assert not out[list(drivers.REQUIRED_NUMERIC)].isna().any().any()


class TestDerive:
    def test_columns_and_values(self):
        df = frame()
        out = drivers.derive(df)
        for c in drivers.DERIVED_COLUMNS:
            assert c in out.columns
        assert list(df.columns) == list(frame().columns)
        np.testing.assert_array_equal(out["nirv"], out["ndvi"] * out["nir_ref"])
        assert out["ndvi"].iloc[0] == ndvi(0.4, 0.05)
        assert out["vpd"].iloc[2] == vpd_from_dewpoint(20.0, 12.0)
        assert out["par"].iloc[1] == par_from_swin(200.0)

    def test_deterministic(self):
        a = drivers.derive(frame())
        b = drivers.derive(frame())
        pd.testing.assert_frame_equal(a, b)

    def test_rejects_gaps(self):
        with pytest.raises(SchemaError):
            drivers.derive(frame(tc=[np.nan, 1.0, 2.0]))

    def test_bad_dewpoint_row_reported(self):
        with pytest.raises(SchemaError) as exc:
            drivers.derive(frame(tdew=[5.0, 6.0, 25.0]))
        assert exc.value.rows == [3]


class TestSchema:
    def test_ok(self):
        drivers.check_schema(frame())

    def test_bad_pft(self):
        with pytest.raises(SchemaError) as exc:
            drivers.check_schema(frame(pft=["ENF", "XXX", "CRO"]))
        assert exc.value.rows == [2]

    def test_missing_column(self):
        with pytest.raises(SchemaError):
            drivers.check_schema(frame().drop(columns="co2_ppm"))

    def test_reflectance_range(self):
        with pytest.raises(SchemaError) as exc:
            drivers.check_schema(frame(red_ref=[0.05, 1.2, 0.08]))
        assert exc.value.rows == [2]

    def test_temperature_order(self):
        with pytest.raises(SchemaError):
            drivers.check_schema(frame(tmin=[11.0, 8.0, 15.0]))

    def test_bad_date(self):
        with pytest.raises(SchemaError):
            drivers.check_schema(frame(date=["2010-01-01", "01/02/2010", "2010-01-01"]))

    def test_twelve_pfts(self):
        assert len(drivers.PFT_CODES) == 12
        assert len(set(drivers.PFT_CODES)) == 12


def test_csv_roundtrip(tmp_path):
    df = frame(tc=[0.1 + 0.2, 1 / 3, 2.0 ** -30])
    path = tmp_path / "s.csv"
    drivers.write_csv(df, path)
    back = drivers.read_sites_csv(path)
    pd.testing.assert_frame_equal(back, df, check_exact=True)
    text = path.read_text()
    assert text.splitlines()[0] == ",".join(drivers.SITE_COLUMNS)
    assert ",," in text or text.splitlines()[2].split(",")[-1] == ""
