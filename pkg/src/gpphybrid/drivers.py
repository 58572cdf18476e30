"""Driver derivation: reflectance indices, VPD, PAR and fAPAR from raw site-day data.

Site-day records live in a :class:`pandas.DataFrame` with the columns of
:data:`SITE_COLUMNS`. :func:`derive` appends the derived driver columns
``vpd, ndvi, nirv, fapar, par``.
"""

import logging

import numpy as np
import pandas as pd

from gpphybrid.errors import (
    InconsistentInputError,
    InvalidInputError,
    SchemaError,
    UndefinedIndexError,
    UnimputableError,
)
from gpphybrid.pmodel import PhotoEnv

log = logging.getLogger(__name__)

PFT_CODES = ("CRO", "CSH", "DBF", "DNF", "EBF", "ENF", "GRA", "MF", "OSH", "SAV", "WET", "WSA")

SITE_COLUMNS = (
    "site_id", "date", "pft", "tc", "tmin", "tmax", "tdew", "sw_in", "precip",
    "theta", "patm", "red_ref", "nir_ref", "co2_ppm", "gpp_obs",
)
#: Numeric drivers that must be present for every record (gpp_obs is optional).
REQUIRED_NUMERIC = (
    "tc", "tmin", "tmax", "tdew", "sw_in", "precip", "theta", "patm",
    "red_ref", "nir_ref", "co2_ppm",
)
DERIVED_COLUMNS = ("vpd", "ndvi", "nirv", "fapar", "par")

# Magnus saturation vapour pressure constants
MAGNUS_A = 610.8
MAGNUS_B = 17.27
MAGNUS_C = 237.3

PAR_FRACTION = 0.45
PHOTON_PER_JOULE = 4.6  # umol J-1
SECONDS_PER_DAY = 86400.0

DEWPOINT_TOLERANCE = 0.5


def ndvi(nir_ref, red_ref):
    """Normalized difference vegetation index."""
    nir = np.asarray(nir_ref, dtype=float)
    red = np.asarray(red_ref, dtype=float)
    denom = nir + red
    if np.any(denom == 0):
        raise UndefinedIndexError("ndvi: nir_ref + red_ref is zero")
    out = (nir - red) / denom
    return float(out) if out.ndim == 0 else out


def nirv(nir_ref, red_ref):
    """Near-infrared reflectance of vegetation, ``NDVI * NIR``."""
    out = np.asarray(ndvi(nir_ref, red_ref)) * np.asarray(nir_ref, dtype=float)
    return float(out) if out.ndim == 0 else out


def saturation_vapour_pressure(t):
    """Magnus saturation vapour pressure over water, Pa, for ``t`` in degC."""
    t = np.asarray(t, dtype=float)
    return MAGNUS_A * np.exp(MAGNUS_B * t / (t + MAGNUS_C))


def vpd_from_dewpoint(tc, tdew):
    """Vapour pressure deficit in Pa from air and dewpoint temperature.

    Dewpoints up to 0.5 degC above air temperature are tolerated (reanalysis
    noise) and give a VPD of zero; anything beyond that is rejected.
    """
    tc = np.asarray(tc, dtype=float)
    tdew = np.asarray(tdew, dtype=float)
    if np.any(tdew > tc + DEWPOINT_TOLERANCE):
        raise InconsistentInputError("vpd_from_dewpoint: dewpoint exceeds air temperature by > 0.5 degC")
    out = np.maximum(0.0, saturation_vapour_pressure(tc) - saturation_vapour_pressure(tdew))
    return float(out) if out.ndim == 0 else out


def par_from_swin(sw_in, par_fraction=PAR_FRACTION, photon_per_joule=PHOTON_PER_JOULE):
    """Daily PAR (mol photons m-2 d-1) from daily-mean shortwave (W m-2)."""
    sw = np.asarray(sw_in, dtype=float)
    if np.any(sw < 0):
        raise InvalidInputError("par_from_swin: sw_in must be >= 0")
    out = sw * par_fraction * photon_per_joule * SECONDS_PER_DAY / 1e6
    return float(out) if out.ndim == 0 else out


def fapar_from_nirv(nirv_value, scale=1.0, offset=0.0):
    """Linear NIRv -> fAPAR mapping clamped to [0, 1]."""
    if not scale > 0:
        raise InvalidInputError("fapar_from_nirv: scale must be > 0")
    out = np.clip(scale * np.asarray(nirv_value, dtype=float) + offset, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def check_schema(records: pd.DataFrame, extra=()) -> None:
    """Raise :class:`SchemaError` unless ``records`` follows the site schema.

    Checks column presence, PFT codes, value ranges and numeric types.
    Reported row numbers are 1-based data rows (the header is row 0).
    """
    missing = [c for c in (*SITE_COLUMNS, *extra) if c not in records.columns]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}")
    bad_pft = ~records["pft"].isin(PFT_CODES)
    if bad_pft.any():
        raise SchemaError("unknown PFT code", rows=_rows(bad_pft))
    bad_site = records["site_id"].isna() | (records["site_id"].astype(str).str.len() == 0)
    if bad_site.any():
        raise SchemaError("empty site_id", rows=_rows(bad_site))
    dates = pd.to_datetime(records["date"], format="%Y-%m-%d", errors="coerce")
    if dates.isna().any():
        raise SchemaError("date must be YYYY-MM-DD", rows=_rows(dates.isna()))
    for col in (*REQUIRED_NUMERIC, "gpp_obs", *extra):
        if not pd.api.types.is_numeric_dtype(records[col]):
            raise SchemaError(f"column {col} is not numeric")
        vals = records[col].to_numpy(dtype=float)
        inf = np.isinf(vals)
        if inf.any():
            raise SchemaError(f"column {col} has infinite values", rows=_rows(inf))
    ranges = {
        "red_ref": (0.0, 1.0), "nir_ref": (0.0, 1.0), "theta": (0.0, 1.0),
        "sw_in": (0.0, np.inf), "precip": (0.0, np.inf), "patm": (0.0, np.inf),
        "co2_ppm": (0.0, np.inf),
    }
    for col, (lo, hi) in ranges.items():
        v = records[col].to_numpy(dtype=float)
        bad = ~np.isnan(v) & ((v < lo) | (v > hi))
        if col in ("patm", "co2_ppm"):
            bad |= ~np.isnan(v) & (v <= 0)
        if bad.any():
            raise SchemaError(f"column {col} out of range", rows=_rows(bad))
    tc, tmin, tmax = (records[c].to_numpy(dtype=float) for c in ("tc", "tmin", "tmax"))
    with np.errstate(invalid="ignore"):
        bad = (tmin > tc) | (tc > tmax)
    if bad.any():
        raise SchemaError("require tmin <= tc <= tmax", rows=_rows(bad))


def _rows(mask) -> list:
    return [int(i) + 1 for i in np.flatnonzero(np.asarray(mask))]


def impute_missing(records: pd.DataFrame, policy: str = "reject") -> pd.DataFrame:
    """Fill or reject missing required numeric drivers.

    ``reject`` raises on any gap. ``site-median`` fills each gap with the
    median of that field at the same site and adds a boolean ``imputed``
    column. Present values are never modified; the input is not mutated.
    """
    if policy not in ("reject", "site-median"):
        raise InvalidInputError(f"unknown imputation policy {policy!r}")
    out = records.copy()
    gaps = out[list(REQUIRED_NUMERIC)].isna()
    if policy == "reject":
        if gaps.to_numpy().any():
            rows = _rows(gaps.any(axis=1))
            cols = [c for c in REQUIRED_NUMERIC if gaps[c].any()]
            raise SchemaError(f"missing values in {', '.join(cols)}", rows=rows)
        return out

    imputed = np.zeros(len(out), dtype=bool)
    for col in REQUIRED_NUMERIC:
        col_gaps = gaps[col].to_numpy()
        if not col_gaps.any():
            continue
        medians = out.groupby("site_id", sort=True)[col].median()
        empty = medians[medians.isna()]
        if len(empty):
            raise UnimputableError(f"site(s) {', '.join(map(str, empty.index))} have no {col} values")
        fill = out["site_id"].map(medians).to_numpy(dtype=float)
        vals = out[col].to_numpy(dtype=float).copy()
        vals[col_gaps] = fill[col_gaps]
        out[col] = vals
        imputed |= col_gaps
    out["imputed"] = imputed
    if imputed.any():
        log.info("imputed %d record(s) with site medians", int(imputed.sum()))
    return out


def derive(records: pd.DataFrame, fapar_scale=1.0, fapar_offset=0.0,
           par_fraction=PAR_FRACTION, photon_per_joule=PHOTON_PER_JOULE) -> pd.DataFrame:
    """Return a copy of ``records`` with ``vpd, ndvi, nirv, fapar, par`` appended."""
    missing = [c for c in ("tc", "tdew", "sw_in", "red_ref", "nir_ref") if c not in records.columns]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}")
    raw = records[list(REQUIRED_NUMERIC)]
    if raw.isna().to_numpy().any():
        raise SchemaError("derive needs complete drivers; impute first", rows=_rows(raw.isna().any(axis=1)))
    out = records.copy()
    nir = out["nir_ref"].to_numpy(dtype=float)
    red = out["red_ref"].to_numpy(dtype=float)
    if np.any(nir + red == 0):
        raise SchemaError("nir_ref + red_ref is zero", rows=_rows(nir + red == 0))
    tc = out["tc"].to_numpy(dtype=float)
    tdew = out["tdew"].to_numpy(dtype=float)
    bad = tdew > tc + DEWPOINT_TOLERANCE
    if bad.any():
        raise SchemaError("dewpoint exceeds air temperature by > 0.5 degC", rows=_rows(bad))
    out["vpd"] = vpd_from_dewpoint(tc, tdew)
    out["ndvi"] = ndvi(nir, red)
    out["nirv"] = np.asarray(out["ndvi"].to_numpy() * nir)
    out["fapar"] = fapar_from_nirv(out["nirv"].to_numpy(), fapar_scale, fapar_offset)
    out["par"] = par_from_swin(out["sw_in"].to_numpy(dtype=float), par_fraction, photon_per_joule)
    return out


def photo_env(records: pd.DataFrame) -> PhotoEnv:
    """Build the process-model environment from derived records."""
    missing = [c for c in ("tc", "vpd", "patm", "co2_ppm", "theta", "par", "fapar") if c not in records.columns]
    if missing:
        raise SchemaError(f"missing derived columns: {', '.join(missing)}")
    col = lambda c: records[c].to_numpy(dtype=float)  # noqa: E731
    return PhotoEnv(
        tc=col("tc"), vpd=col("vpd"), patm=col("patm"), co2_ppm=col("co2_ppm"),
        theta=col("theta"), par=col("par"), fapar=col("fapar"),
    )


def read_sites_csv(path, extra_numeric=()) -> pd.DataFrame:
    """Read a site-day CSV. Empty cells become NaN; floats round-trip exactly."""
    dtypes = {"site_id": str, "date": str, "pft": str}
    try:
        df = pd.read_csv(path, dtype=dtypes, keep_default_na=False,
                         na_values={c: [""] for c in (*REQUIRED_NUMERIC, "gpp_obs", *extra_numeric)},
                         float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot parse {path}: {exc}") from exc
    for col in (*REQUIRED_NUMERIC, "gpp_obs", *extra_numeric):
        if col in df.columns and not pd.api.types.is_numeric_dtype(df[col]):
            coerced = pd.to_numeric(df[col], errors="coerce")
            bad = coerced.isna() & df[col].notna() & (df[col].astype(str) != "")
            raise SchemaError(f"column {col} is not numeric", rows=_rows(bad))
    return df


def write_csv(df: pd.DataFrame, path) -> None:
    """Write a table deterministically: ``\\n`` line ends, shortest round-trip floats, empty NaN."""
    df.to_csv(path, index=False, lineterminator="\n", na_rep="")
