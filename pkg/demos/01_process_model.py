"""Walk through the process model for one site-day, then sweep the drivers.

Run: python3 demos/01_process_model.py
"""

import numpy as np

from gpphybrid.drivers import fapar_from_nirv, nirv, par_from_swin, vpd_from_dewpoint
from gpphybrid.pmodel import PhotoEnv, eta_star, gamma_star, gpp, kmm, lue, optimal_chi, phi0_temp, soil_beta

# A warm, moderately dry summer day at sea level.
tc, tdew, sw_in = 25.0, 15.0, 250.0
red, nir = 0.05, 0.40
vpd = vpd_from_dewpoint(tc, tdew)           # Pa
par = par_from_swin(sw_in)                  # mol photons m-2 d-1
fapar = fapar_from_nirv(nirv(nir, red))
print(f"VPD {vpd:.1f} Pa, PAR {par:.2f} mol m-2 d-1, fAPAR {fapar:.3f}")

# The pieces of the light-use efficiency.
print(f"Gamma* {gamma_star(tc, 101325.0):.3f} Pa   K {kmm(tc, 101325.0):.2f} Pa   eta* {eta_star(tc):.3f}")
env = PhotoEnv(tc=tc, vpd=vpd, patm=101325.0, co2_ppm=400.0, theta=0.35, par=par, fapar=fapar)
opt = optimal_chi(env)
print(f"chi {opt.chi:.3f}  (floor Gamma*/ca = {opt.gstar / opt.ca_pa:.3f})")
print(f"phi0 {phi0_temp(tc):.4f}  soil beta {soil_beta(0.35):.3f}")
print(f"LUE {lue(env):.4f} g C mol-1  ->  GPP {gpp(env):.2f} g C m-2 d-1")

# Drier air closes stomata: chi and GPP fall monotonically with VPD.
d = np.array([0.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0])
sweep = PhotoEnv(tc=tc, vpd=d, patm=101325.0, co2_ppm=400.0, theta=0.35, par=par, fapar=fapar)
for v, c, g in zip(d, optimal_chi(sweep).chi, gpp(sweep)):
    print(f"  VPD {v:6.0f} Pa   chi {c:.3f}   GPP {g:6.2f}")

# Temperature: quantum yield peaks near 32 degC and hits zero in the cold.
for t in (-15.0, 0.0, 15.0, 32.35, 45.0):
    print(f"  T {t:6.2f} degC   phi0 {phi0_temp(t):.4f}")

# Soil drying ramps stress quadratically below theta* = 0.6.
theta = np.linspace(0.0, 0.8, 9)
print("  theta", np.round(theta, 2))
print("  beta ", np.round(soil_beta(theta), 3))
