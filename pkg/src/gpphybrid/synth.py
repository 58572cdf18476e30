"""Seeded synthetic site-day corpus with a known, injectable process-model bias.

Each site gets a plant functional type (round-robin over the 12 codes), a
climate and a greenness cycle. Drivers follow a seasonal sine with daily
noise. ``gpp_obs`` is the process-model GPP of those very drivers with the
per-PFT bias applied::

    gpp_obs = mul[pft] * gpp_process + add[pft] + N(0, noise_sigma)

The bias spec is a mapping ``{pft: {"add": float, "mul": float}, "noise_sigma": float}``.
"""

import datetime as dt
import json
from pathlib import Path

import numpy as np
import pandas as pd

from gpphybrid.drivers import PFT_CODES, SITE_COLUMNS, derive
from gpphybrid.errors import InvalidInputError
from gpphybrid.hybrid import process_gpp
from gpphybrid.pmodel import PModelParams

START_DATE = dt.date(2010, 1, 1)


def parse_bias_spec(spec: dict):
    """Validate a bias spec; return ``(add, mul, noise_sigma)`` with add/mul keyed by PFT."""
    if not isinstance(spec, dict):
        raise InvalidInputError("bias spec must be a JSON object")
    sigma = float(spec.get("noise_sigma", 0.0))
    if not np.isfinite(sigma) or sigma < 0:
        raise InvalidInputError("noise_sigma must be a finite number >= 0")
    add = {p: 0.0 for p in PFT_CODES}
    mul = {p: 1.0 for p in PFT_CODES}
    for key, terms in spec.items():
        if key == "noise_sigma":
            continue
        if key not in PFT_CODES:
            raise InvalidInputError(f"bias spec: unknown PFT {key!r}")
        if not isinstance(terms, dict) or set(terms) - {"add", "mul"}:
            raise InvalidInputError(f"bias spec for {key} must be an object with 'add' and/or 'mul'")
        add[key] = float(terms.get("add", 0.0))
        mul[key] = float(terms.get("mul", 1.0))
        if not (np.isfinite(add[key]) and np.isfinite(mul[key])):
            raise InvalidInputError(f"bias spec for {key} must be finite")
    return add, mul, sigma


def load_bias_spec(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read bias spec {path}: {exc}") from exc


def synth_drivers(n_sites: int = 20, n_days: int = 200, seed: int = 7) -> pd.DataFrame:
    """Raw drivers in the site CSV schema (``gpp_obs`` left empty)."""
    if n_sites < 1 or n_days < 1:
        raise InvalidInputError("need at least one site and one day")
    rng = np.random.default_rng(seed)
    dates = [START_DATE + dt.timedelta(days=d) for d in range(n_days)]
    doy = np.array([d.timetuple().tm_yday for d in dates], dtype=float)
    frames = []
    for i in range(n_sites):
        hemi = 1.0 if rng.random() < 0.8 else -1.0
        t_mean = rng.uniform(2.0, 24.0)
        t_amp = rng.uniform(3.0, 14.0)
        dtr = rng.uniform(6.0, 14.0)
        dew_dep = rng.uniform(1.5, 8.0)
        elev = rng.uniform(0.0, 1500.0)
        theta_mean = rng.uniform(0.15, 0.45)
        nir_max = rng.uniform(0.35, 0.55)
        green_amp = rng.uniform(0.2, 0.5)
        sw_mean = rng.uniform(150.0, 230.0)

        season = hemi * np.sin(2 * np.pi * (doy - 105.0) / 365.0)
        tc = t_mean + t_amp * season + rng.normal(0, 2.0, n_days)
        tmin = tc - 0.5 * dtr - np.abs(rng.normal(0, 0.5, n_days))
        tmax = tc + 0.5 * dtr + np.abs(rng.normal(0, 0.5, n_days))
        tdew = tc - np.maximum(0.0, dew_dep * (1 + 0.4 * season) + rng.normal(0, 1.0, n_days))
        sw_in = np.maximum(5.0, sw_mean + 90.0 * season + rng.normal(0, 40.0, n_days))
        wet = rng.random(n_days) < 0.4
        precip = np.where(wet, rng.gamma(0.8, 5.0, n_days), 0.0)
        theta = np.clip(theta_mean - 0.08 * season + rng.normal(0, 0.03, n_days), 0.02, 0.7)
        green = np.clip(0.55 + green_amp * season + rng.normal(0, 0.05, n_days), 0.0, 1.0)
        nir = 0.15 + (nir_max - 0.15) * green
        red = np.clip(0.14 - 0.10 * green + rng.normal(0, 0.005, n_days), 0.01, 1.0)
        patm = 101325.0 * np.exp(-elev / 8434.0) + rng.normal(0, 150.0, n_days)
        co2 = 389.0 + 2.0 * (doy / 365.0) + rng.normal(0, 0.5, n_days)

        frames.append(pd.DataFrame({
            "site_id": f"S{i:03d}",
            "date": [d.isoformat() for d in dates],
            "pft": PFT_CODES[i % len(PFT_CODES)],
            "tc": tc, "tmin": tmin, "tmax": tmax, "tdew": tdew, "sw_in": sw_in,
            "precip": precip, "theta": theta, "patm": patm,
            "red_ref": red, "nir_ref": nir, "co2_ppm": co2,
        }))
    df = pd.concat(frames, ignore_index=True)
    num = [c for c in SITE_COLUMNS[3:-1]]
    df[num] = df[num].round(4)
    df["patm"] = df["patm"].round(1)
    # rounding may break tmin <= tc <= tmax or tdew <= tc only at the 1e-4 level; restore order
    df["tmin"] = np.minimum(df["tmin"], df["tc"])
    df["tmax"] = np.maximum(df["tmax"], df["tc"])
    df["tdew"] = np.minimum(df["tdew"], df["tc"])
    df["gpp_obs"] = np.nan
    return df[list(SITE_COLUMNS)]


def synth_corpus(n_sites: int = 20, n_days: int = 200, bias_spec: dict = None, seed: int = 7,
                 params: PModelParams = PModelParams()) -> pd.DataFrame:
    """Site-day corpus whose ``gpp_obs`` carries the requested bias and noise."""
    add, mul, sigma = parse_bias_spec(bias_spec or {})
    df = synth_drivers(n_sites, n_days, seed)
    proc = process_gpp(derive(df), params)
    pft = df["pft"].to_numpy()
    a = np.array([add[p] for p in pft])
    m = np.array([mul[p] for p in pft])
    noise = np.random.default_rng([seed, 1]).normal(0.0, 1.0, len(df)) * sigma
    df["gpp_obs"] = m * proc + a + noise
    return df


def synth_driver_grids(d_deg: float = 10.0, day_of_year: int = 196, seed: int = 7,
                       land_fraction: float = 0.35) -> dict:
    """One day of plausible global driver grids for mapping demos and tests.

    Climate follows latitude (warm, bright tropics; northern-summer season
    by default) with seeded noise. Roughly ``land_fraction`` of the cells are
    land; the rest are missing in every grid. Includes a ``pft`` index grid.
    """
    from gpphybrid.spatial import PFT_UNITS, GeoGrid, global_grid

    rng = np.random.default_rng(seed)
    base = global_grid(d_deg)
    lat = np.repeat(base.lat_centers()[:, None], base.n_lon, axis=1)
    shape = lat.shape
    season = np.sin(2 * np.pi * (day_of_year - 105.0) / 365.0) * np.sign(lat)
    polar = np.abs(lat) / 90.0
    land = rng.random(shape) < land_fraction

    tc = 28.0 - 40.0 * polar ** 2 + 12.0 * season * polar + rng.normal(0, 1.5, shape)
    dtr = rng.uniform(6.0, 14.0, shape)
    elev = rng.uniform(0.0, 1500.0, shape)
    green = np.clip(0.7 - 0.5 * polar + 0.25 * season * polar + rng.normal(0, 0.05, shape), 0.05, 1.0)
    grids = {
        "tc": tc,
        "tmin": tc - 0.5 * dtr,
        "tmax": tc + 0.5 * dtr,
        "tdew": tc - rng.uniform(1.5, 9.0, shape),
        "sw_in": np.maximum(5.0, 260.0 - 150.0 * polar + 80.0 * season * polar + rng.normal(0, 20.0, shape)),
        "precip": np.where(rng.random(shape) < 0.4, rng.gamma(0.8, 5.0, shape), 0.0),
        "theta": np.clip(rng.uniform(0.1, 0.5, shape), 0.02, 0.7),
        "patm": 101325.0 * np.exp(-elev / 8434.0),
        "red_ref": np.clip(0.14 - 0.10 * green, 0.01, 1.0),
        "nir_ref": 0.15 + 0.3 * green,
        "co2_ppm": np.full(shape, 390.0),
        "pft": rng.integers(0, len(PFT_CODES), shape).astype(float),
    }
    out = {}
    for name, values in grids.items():
        values = np.round(values, 4)
        values[~land] = np.nan
        out[name] = GeoGrid.filled(base, values, PFT_UNITS if name == "pft" else "driver")
    return out
