"""Optimality-based light-use-efficiency model of gross primary productivity.

GPP is computed as ``PAR * fAPAR * LUE`` where the light-use efficiency comes
from the least-cost ratio of leaf-internal to ambient CO2 (chi), a quantum
yield that depends on temperature, a soil-moisture stress factor and a
co-limitation term for electron transport.

All functions accept scalars or numpy arrays (broadcast against each other)
and return ``float`` for scalar input, ``numpy.ndarray`` otherwise.
"""

from dataclasses import dataclass, fields
from typing import NamedTuple, Union

import numpy as np

from gpphybrid.errors import (
    DegenerateEnvironmentError,
    DomainError,
    InvalidInputError,
)

ArrayLike = Union[float, np.ndarray]

#: Universal gas constant, J mol-1 K-1.
R_GAS = 8.314
#: Absolute zero offset, K.
KELVIN = 273.15
#: Reference temperature for all 25 degC parameter values, K.
T_REF_K = 298.15


@dataclass(frozen=True)
class PModelParams:
    """Photosynthesis constants used by the process model.

    Pressures are in Pa, activation energies in J mol-1. Defaults are the
    usual values for C3 vegetation; every field can be overridden.
    """

    gamma_star_25: float = 4.332
    dH_gamma: float = 37830.0
    kc_25: float = 39.97
    dH_kc: float = 79430.0
    ko_25: float = 27480.0
    dH_ko: float = 36380.0
    beta_cost: float = 146.0
    c_star: float = 0.41
    o2_fraction: float = 0.209476
    p0: float = 101325.0
    molar_mass_c: float = 12.0107
    soil_theta_star: float = 0.6
    soil_theta_0: float = 0.0
    soil_beta_0: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise InvalidInputError(f"PModelParams.{f.name} must be finite, got {value}")
        positive = (
            "gamma_star_25", "dH_gamma", "kc_25", "dH_kc", "ko_25", "dH_ko",
            "beta_cost", "o2_fraction", "p0", "molar_mass_c",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise InvalidInputError(f"PModelParams.{name} must be > 0")
        if not 0.0 < self.c_star < 1.0:
            raise InvalidInputError("PModelParams.c_star must lie in (0, 1)")
        if not 0.0 <= self.soil_beta_0 <= 1.0:
            raise InvalidInputError("PModelParams.soil_beta_0 must lie in [0, 1]")
        if not self.soil_theta_0 < self.soil_theta_star:
            raise InvalidInputError("PModelParams requires soil_theta_0 < soil_theta_star")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "PModelParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown PModelParams keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class PhotoEnv:
    """Daily photosynthetic environment of one or many sites/cells.

    Attributes:
        tc: air temperature, degC
        vpd: vapour pressure deficit, Pa
        patm: surface pressure, Pa
        co2_ppm: ambient CO2 mole fraction, umol mol-1
        theta: volumetric soil water content, m3 m-3
        par: incident PAR, mol photons m-2 d-1
        fapar: absorbed fraction of PAR
    """

    tc: ArrayLike
    vpd: ArrayLike
    patm: ArrayLike
    co2_ppm: ArrayLike
    theta: ArrayLike = 1.0
    par: ArrayLike = 0.0
    fapar: ArrayLike = 0.0

    def __post_init__(self):
        for f in fields(self):
            arr = np.asarray(getattr(self, f.name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"PhotoEnv.{f.name} contains non-finite values")
        checks = (
            ("vpd", lambda a: a >= 0, ">= 0"),
            ("par", lambda a: a >= 0, ">= 0"),
            ("fapar", lambda a: (a >= 0) & (a <= 1), "in [0, 1]"),
            ("theta", lambda a: (a >= 0) & (a <= 1), "in [0, 1]"),
            ("patm", lambda a: a > 0, "> 0"),
            ("co2_ppm", lambda a: a > 0, "> 0"),
        )
        for name, ok, text in checks:
            if not np.all(ok(np.asarray(getattr(self, name), dtype=float))):
                raise InvalidInputError(f"PhotoEnv.{name} must be {text}")


class OptimalChi(NamedTuple):
    chi: ArrayLike
    xi: ArrayLike
    ca_pa: ArrayLike
    gstar: ArrayLike


def _finite(name: str, *values) -> list:
    out = []
    for v in values:
        arr = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(f"{name}: non-finite input")
        out.append(arr)
    return out


def _ret(value):
    value = np.asarray(value, dtype=float)
    return float(value) if value.ndim == 0 else value


def _arrhenius(tc: np.ndarray, dh: float) -> np.ndarray:
    # (T_K - 298.15) is written as (tc - 25) so the factor is exactly 1 at 25 degC
    tk = tc + KELVIN
    return np.exp(dh * (tc - 25.0) / (T_REF_K * R_GAS * tk))


def gamma_star(tc: ArrayLike, patm: ArrayLike, params: PModelParams = PModelParams()) -> ArrayLike:
    """Photorespiratory CO2 compensation point, Pa.

    Arrhenius temperature response around the 25 degC value, scaled
    linearly with surface pressure relative to ``params.p0``.
    """
    tc, patm = _finite("gamma_star", tc, patm)
    if np.any(patm <= 0):
        raise InvalidInputError("gamma_star: patm must be > 0")
    return _ret(params.gamma_star_25 * (patm / params.p0) * _arrhenius(tc, params.dH_gamma))


def kmm(tc: ArrayLike, patm: ArrayLike, params: PModelParams = PModelParams()) -> ArrayLike:
    """Effective Michaelis-Menten coefficient of Rubisco, Pa.

    ``K = Kc * (1 + pO2 / Ko)`` with the O2 partial pressure taken from
    ``params.o2_fraction * patm``.
    """
    tc, patm = _finite("kmm", tc, patm)
    if np.any(patm < 0):
        raise InvalidInputError("kmm: patm must be >= 0")
    kc = params.kc_25 * _arrhenius(tc, params.dH_kc)
    ko = params.ko_25 * _arrhenius(tc, params.dH_ko)
    po2 = params.o2_fraction * patm
    return _ret(kc * (1.0 + po2 / ko))


def _vogel_exponent(tk):
    return 247.8 / (tk - 140.0)


def eta_star(tc: ArrayLike) -> ArrayLike:
    """Viscosity of water relative to its value at 25 degC (Vogel equation)."""
    (tc,) = _finite("eta_star", tc)
    tk = tc + KELVIN
    if np.any(tk <= 140.0):
        raise DomainError("eta_star: Vogel equation undefined for T <= 140 K")
    tk25 = 25.0 + KELVIN
    return _ret(np.power(10.0, _vogel_exponent(tk) - _vogel_exponent(tk25)))


def optimal_chi(env: PhotoEnv, params: PModelParams = PModelParams()) -> OptimalChi:
    """Least-cost ratio of leaf-internal to ambient CO2 partial pressure.

    Returns chi together with the intermediate sensitivity ``xi`` (Pa^0.5),
    ambient CO2 partial pressure ``ca_pa`` and ``gstar`` (both Pa).

    Raises:
        DegenerateEnvironmentError: if ambient CO2 does not exceed Gamma*.
    """
    tc = np.asarray(env.tc, dtype=float)
    patm = np.asarray(env.patm, dtype=float)
    vpd = np.asarray(env.vpd, dtype=float)
    ca = np.asarray(env.co2_ppm, dtype=float) * 1e-6 * patm
    gs = np.asarray(gamma_star(tc, patm, params))
    if np.any(ca <= gs):
        raise DegenerateEnvironmentError("optimal_chi: ambient CO2 must exceed Gamma*")
    k = np.asarray(kmm(tc, patm, params))
    ns = np.asarray(eta_star(tc))

    xi = np.sqrt(params.beta_cost * (k + gs) / (1.6 * ns))
    gs_ca = gs / ca
    sqrt_d = np.sqrt(vpd)
    frac = xi / (xi + sqrt_d)
    chi = gs_ca + (1.0 - gs_ca) * frac
    chi = np.where(vpd == 0.0, 1.0, chi)
    return OptimalChi(_ret(chi), _ret(xi), _ret(ca), _ret(gs))


def phi0_temp(tc: ArrayLike) -> ArrayLike:
    """Intrinsic quantum yield of photosynthesis, mol C per mol photons.

    Quadratic in temperature, clamped at zero in the cold.
    """
    (tc,) = _finite("phi0_temp", tc)
    return _ret(np.maximum(0.0, (0.352 + 0.022 * tc - 3.4e-4 * tc ** 2) / 8.0))


def soil_beta(theta: ArrayLike, params: PModelParams = PModelParams()) -> ArrayLike:
    """Soil-moisture stress factor in [soil_beta_0, 1].

    Flat at 1 above ``soil_theta_star``, flat at ``soil_beta_0`` below
    ``soil_theta_0`` and a quadratic ramp between the two knees.
    """
    (theta,) = _finite("soil_beta", theta)
    if np.any((theta < 0) | (theta > 1)):
        raise InvalidInputError("soil_beta: theta must lie in [0, 1]")
    t_hi, t_lo, b0 = params.soil_theta_star, params.soil_theta_0, params.soil_beta_0
    ramp = 1.0 - (1.0 - b0) * ((t_hi - theta) / (t_hi - t_lo)) ** 2
    out = np.where(theta >= t_hi, 1.0, np.where(theta <= t_lo, b0, ramp))
    return _ret(out)


def colimitation(m: ArrayLike, c_star: float) -> ArrayLike:
    """Electron-transport co-limitation ``m' = m * sqrt(1 - (c*/m)^(2/3))``.

    Zero wherever ``m <= c_star`` (the root would be complex).
    """
    m = np.asarray(m, dtype=float)
    ok = m > c_star
    safe_m = np.where(ok, m, 1.0)
    inner = 1.0 - np.power(c_star / safe_m, 2.0 / 3.0)
    return _ret(np.where(ok, m * np.sqrt(np.where(ok, inner, 0.0)), 0.0))


def lue(env: PhotoEnv, params: PModelParams = PModelParams()) -> ArrayLike:
    """Light-use efficiency, g C per mol absorbed photons. Never negative."""
    opt = optimal_chi(env, params)
    ci = np.asarray(opt.ca_pa) * np.asarray(opt.chi)
    gs = np.asarray(opt.gstar)
    m = (ci - gs) / (ci + 2.0 * gs)
    mprime = np.asarray(colimitation(m, params.c_star))
    out = (
        np.asarray(phi0_temp(env.tc))
        * np.asarray(soil_beta(env.theta, params))
        * mprime
        * params.molar_mass_c
    )
    return _ret(out)


def gpp(env: PhotoEnv, params: PModelParams = PModelParams(), *, lue_value: ArrayLike = None) -> ArrayLike:
    """Gross primary productivity, g C m-2 d-1.

    Args:
        env: drivers; ``par`` in mol photons m-2 d-1.
        params: model constants.
        lue_value: use this light-use efficiency instead of computing it
            (mainly a test seam).
    """
    if lue_value is None:
        lue_value = lue(env, params)
    out = np.asarray(env.par, dtype=float) * np.asarray(env.fapar, dtype=float) * np.asarray(lue_value)
    return _ret(out)
