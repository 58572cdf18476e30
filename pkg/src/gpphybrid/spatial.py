"""Regular latitude-longitude grids: model mapping, Pg C totals, zonal/meridional profiles.

Row 0 of a grid is the northernmost band. ``lat0``/``lon0`` are the north
and west edges of cell (0, 0); rows run south in steps of ``d_lat`` and
columns east in steps of ``d_lon``. Missing cells are NaN in memory and the
``missing`` token (``NA``) on disk.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from gpphybrid.drivers import DEWPOINT_TOLERANCE, PFT_CODES, REQUIRED_NUMERIC, derive
from gpphybrid.errors import GeometryError, InvalidInputError, SchemaError, UnitError
from gpphybrid.hybrid import HybridModel, predict_hybrid, process_gpp
from gpphybrid.pmodel import PModelParams, gamma_star

EARTH_RADIUS = 6_371_000.0  # m
GPP_UNITS = "g C m-2 d-1"
PERCENT_UNITS = "%"
PFT_UNITS = "pft_index"
#: |a| below this makes a percent-difference cell missing.
PERCENT_DIFF_GUARD = 1e-9
_EPS_DEG = 1e-9


@dataclass
class GeoGrid:
    n_lat: int
    n_lon: int
    lat0: float
    lon0: float
    d_lat: float
    d_lon: float
    values: np.ndarray
    units: str = GPP_UNITS
    missing: str = "NA"

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float).reshape(self.n_lat, self.n_lon)
        if self.n_lat < 1 or self.n_lon < 1:
            raise GeometryError("grid needs at least one row and one column")
        if not (self.d_lat > 0 and self.d_lon > 0):
            raise GeometryError("cell sizes must be positive")
        if self.n_lat * self.d_lat > 180 + _EPS_DEG or self.n_lon * self.d_lon > 360 + _EPS_DEG:
            raise GeometryError("grid extent exceeds the globe")
        if self.lat0 > 90 + _EPS_DEG or self.lat0 - self.n_lat * self.d_lat < -90 - _EPS_DEG:
            raise GeometryError("latitude bands fall outside [-90, 90]")
        if np.isinf(self.values).any():
            raise InvalidInputError("grid values must be finite or missing")

    @classmethod
    def filled(cls, like: "GeoGrid", values, units: str) -> "GeoGrid":
        return cls(like.n_lat, like.n_lon, like.lat0, like.lon0, like.d_lat, like.d_lon,
                   values, units, like.missing)

    @property
    def geometry(self) -> tuple:
        return (self.n_lat, self.n_lon, self.lat0, self.lon0, self.d_lat, self.d_lon)

    def lat_edges(self) -> np.ndarray:
        """Band edges from north to south, length ``n_lat + 1``."""
        edges = self.lat0 - self.d_lat * np.arange(self.n_lat + 1)
        return np.clip(edges, -90.0, 90.0)

    def lat_centers(self) -> np.ndarray:
        e = self.lat_edges()
        return 0.5 * (e[:-1] + e[1:])

    def lon_centers(self) -> np.ndarray:
        return self.lon0 + self.d_lon * (np.arange(self.n_lon) + 0.5)


def global_grid(d_deg: float = 1.0, fill: float = np.nan, units: str = GPP_UNITS) -> GeoGrid:
    """Whole-globe grid of ``d_deg`` cells starting at 90N, 180W."""
    n_lat = int(round(180.0 / d_deg))
    n_lon = int(round(360.0 / d_deg))
    return GeoGrid(n_lat, n_lon, 90.0, -180.0, d_deg, d_deg, np.full((n_lat, n_lon), fill), units)


def cell_areas(grid: GeoGrid, radius: float = EARTH_RADIUS) -> np.ndarray:
    """Exact spherical cell area (m2) for each latitude row."""
    edges = np.deg2rad(grid.lat_edges())
    return radius ** 2 * np.deg2rad(grid.d_lon) * (np.sin(edges[:-1]) - np.sin(edges[1:]))


def _require_gpp(grid: GeoGrid) -> None:
    if grid.units != GPP_UNITS:
        raise UnitError(f"expected units {GPP_UNITS!r}, got {grid.units!r}")


def _mass(grid: GeoGrid, n_days: float) -> np.ndarray:
    """Pg C per cell (NaN where missing)."""
    _require_gpp(grid)
    if not n_days > 0:
        raise InvalidInputError("n_days must be > 0")
    return grid.values * cell_areas(grid)[:, None] * n_days * 1e-15


def global_total(grid: GeoGrid, n_days: float) -> float:
    """Total over all non-missing cells, Pg C, summed row-major with exact rounding."""
    m = _mass(grid, n_days).ravel()
    return math.fsum(m[~np.isnan(m)])


def lat_profile(grid: GeoGrid, n_days: float) -> np.ndarray:
    """Pg C per latitude row (north to south); all-missing rows give 0."""
    m = _mass(grid, n_days)
    return np.array([math.fsum(row[~np.isnan(row)]) for row in m])


def lon_profile(grid: GeoGrid, n_days: float) -> np.ndarray:
    """Pg C per longitude column (west to east); all-missing columns give 0."""
    m = _mass(grid, n_days)
    return np.array([math.fsum(col[~np.isnan(col)]) for col in m.T])


def percent_diff(a: GeoGrid, b: GeoGrid) -> GeoGrid:
    """Cell-wise ``(a - b) / a * 100``; missing where either is missing or ``|a| < 1e-9``."""
    if a.geometry != b.geometry:
        raise GeometryError(f"grid geometries differ: {a.geometry} vs {b.geometry}")
    if a.units != b.units:
        raise UnitError(f"cannot compare {a.units!r} with {b.units!r}")
    av, bv = a.values, b.values
    ok = ~np.isnan(av) & ~np.isnan(bv) & (np.abs(av) >= PERCENT_DIFF_GUARD)
    out = np.full(av.shape, np.nan)
    out[ok] = (av[ok] - bv[ok]) / av[ok] * 100.0
    return GeoGrid.filled(a, out, PERCENT_UNITS)


# ---------------------------------------------------------------------------
# mapping models over driver grids

@dataclass(frozen=True)
class CellError:
    row: int
    col: int
    reason: str


def _check_cells(d: Dict[str, np.ndarray], need_pft: bool, params: PModelParams) -> Dict[str, np.ndarray]:
    """Per-cell validity masks keyed by failure reason (only over complete cells)."""
    with np.errstate(invalid="ignore"):
        checks = {
            "reflectance outside [0, 1]": (d["red_ref"] < 0) | (d["red_ref"] > 1) | (d["nir_ref"] < 0) | (d["nir_ref"] > 1),
            "nir_ref + red_ref is zero": (d["nir_ref"] + d["red_ref"]) == 0,
            "dewpoint above air temperature": d["tdew"] > d["tc"] + DEWPOINT_TOLERANCE,
            "theta outside [0, 1]": (d["theta"] < 0) | (d["theta"] > 1),
            "non-positive patm or co2": (d["patm"] <= 0) | (d["co2_ppm"] <= 0),
            "negative sw_in or precip": (d["sw_in"] < 0) | (d["precip"] < 0),
            "tmin <= tc <= tmax violated": (d["tmin"] > d["tc"]) | (d["tc"] > d["tmax"]),
        }
        if need_pft:
            p = d["pft"]
            checks["invalid pft index"] = (p != np.round(p)) | (p < 0) | (p >= len(PFT_CODES))
        tk_ok = d["tc"] > -133.0
        checks["air temperature below viscosity domain"] = ~tk_ok
        patm_ok = d["patm"] > 0
        ca = d["co2_ppm"] * 1e-6 * d["patm"]
        gs = np.full(ca.shape, np.nan)
        fin = patm_ok & np.isfinite(d["tc"]) & np.isfinite(d["patm"])
        gs[fin] = gamma_star(d["tc"][fin], d["patm"][fin], params)
        checks["ambient CO2 below compensation point"] = fin & (ca <= gs)
    return checks


def map_model(drivers: Dict[str, GeoGrid], model: Union[PModelParams, HybridModel],
              fapar_scale: float = None, fapar_offset: float = None) -> Tuple[GeoGrid, List[CellError]]:
    """Apply the process model (``PModelParams``) or a hybrid model cell by cell.

    ``drivers`` maps every name in :data:`REQUIRED_NUMERIC` (plus ``pft``,
    integer index into :data:`PFT_CODES`, for hybrid models) to a grid of
    identical geometry. Cells with any missing driver stay missing; cells
    with invalid drivers are reported and left missing.

    Returns the GPP grid and the list of per-cell errors.
    """
    hybrid = isinstance(model, HybridModel)
    params = model.params if hybrid else model
    if fapar_scale is None:
        fapar_scale = model.fapar_scale if hybrid else 1.0
    if fapar_offset is None:
        fapar_offset = model.fapar_offset if hybrid else 0.0
    names = list(REQUIRED_NUMERIC) + (["pft"] if hybrid else [])
    absent = [n for n in names if n not in drivers]
    if absent:
        raise SchemaError(f"missing driver grids: {', '.join(absent)}")
    ref = drivers[names[0]]
    for n in names:
        if drivers[n].geometry != ref.geometry:
            raise GeometryError(f"driver grid {n} geometry differs from {names[0]}")

    d = {n: drivers[n].values for n in names}
    complete = np.ones(ref.values.shape, dtype=bool)
    for n in names:
        complete &= ~np.isnan(d[n])
    errors = []
    bad = np.zeros_like(complete)
    for reason, mask in _check_cells(d, hybrid, params).items():
        mask = mask & complete & ~bad
        for i, j in zip(*np.nonzero(mask)):
            errors.append(CellError(int(i), int(j), reason))
        bad |= mask
    good = complete & ~bad
    out = np.full(ref.values.shape, np.nan)
    if good.any():
        ii, jj = np.nonzero(good)
        recs = pd.DataFrame({n: d[n][good] for n in REQUIRED_NUMERIC})
        recs.insert(0, "site_id", [f"cell_{i}_{j}" for i, j in zip(ii, jj)])
        if hybrid:
            recs.insert(1, "pft", np.array(PFT_CODES)[d["pft"][good].astype(int)])
        recs = derive(recs, fapar_scale, fapar_offset)
        if hybrid:
            out[good] = predict_hybrid(model, recs)
        else:
            out[good] = process_gpp(recs, params)
    errors.sort(key=lambda e: (e.row, e.col))
    return GeoGrid.filled(ref, out, GPP_UNITS), errors


# ---------------------------------------------------------------------------
# fluxgrid v1 text format

_HEADER_KEYS = ("nlat", "nlon", "lat0", "lon0", "dlat", "dlon", "units", "missing")


def _fmt(v: float) -> str:
    return repr(float(v))


def format_fluxgrid(grid: GeoGrid) -> str:
    lines = [
        "#fluxgrid 1",
        f"#nlat {grid.n_lat}",
        f"#nlon {grid.n_lon}",
        f"#lat0 {_fmt(grid.lat0)}",
        f"#lon0 {_fmt(grid.lon0)}",
        f"#dlat {_fmt(grid.d_lat)}",
        f"#dlon {_fmt(grid.d_lon)}",
        f"#units {grid.units}",
        f"#missing {grid.missing}",
    ]
    for row in grid.values:
        lines.append(",".join(grid.missing if np.isnan(v) else _fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_fluxgrid(grid: GeoGrid, path) -> None:
    Path(path).write_text(format_fluxgrid(grid), encoding="utf-8")


def parse_fluxgrid(text: str, source: str = "<string>") -> GeoGrid:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "#fluxgrid 1":
        raise SchemaError(f"{source}: first line must be '#fluxgrid 1'")
    header = {}
    pos = 1
    while pos < len(lines) and lines[pos].startswith("#"):
        key, _, val = lines[pos][1:].partition(" ")
        header[key.strip()] = val.strip()
        pos += 1
    absent = [k for k in _HEADER_KEYS if k not in header]
    if absent:
        raise SchemaError(f"{source}: missing header keys {absent}")
    try:
        n_lat, n_lon = int(header["nlat"]), int(header["nlon"])
        geo = [float(header[k]) for k in ("lat0", "lon0", "dlat", "dlon")]
    except ValueError as exc:
        raise SchemaError(f"{source}: bad header value: {exc}") from exc
    token = header["missing"]
    body = [ln for ln in lines[pos:] if ln.strip()]
    if len(body) != n_lat:
        raise SchemaError(f"{source}: expected {n_lat} data rows, found {len(body)}")
    values = np.empty((n_lat, n_lon))
    for i, ln in enumerate(body):
        cells = ln.split(",")
        if len(cells) != n_lon:
            raise SchemaError(f"{source}: data row {i} has {len(cells)} values, expected {n_lon}",
                              rows=[i + 1])
        for j, c in enumerate(cells):
            c = c.strip()
            if c == token:
                values[i, j] = np.nan
                continue
            try:
                values[i, j] = float(c)
            except ValueError:
                raise SchemaError(f"{source}: bad value {c!r} at row {i} column {j}", rows=[i + 1]) from None
            if not math.isfinite(values[i, j]):
                raise SchemaError(f"{source}: non-finite value at row {i} column {j}", rows=[i + 1])
    return GeoGrid(n_lat, n_lon, *geo, values=values, units=header["units"], missing=token)


def read_fluxgrid(path) -> GeoGrid:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    return parse_fluxgrid(text, str(path))


def read_driver_dir(directory) -> Dict[str, GeoGrid]:
    """Load every ``<driver>.fluxgrid`` file in ``directory`` keyed by driver name."""
    d = Path(directory)
    if not d.is_dir():
        raise SchemaError(f"driver directory {d} does not exist")
    return {p.stem: read_fluxgrid(p) for p in sorted(d.glob("*.fluxgrid"))}
