"""Map process and hybrid GPP on a synthetic global grid and aggregate to Pg C.

Run: python3 demos/03_global_maps.py   (about 15 s; trains a model first)
"""

import math

import numpy as np

from gpphybrid import spatial
from gpphybrid.drivers import derive
from gpphybrid.hybrid import train_cv
from gpphybrid.synth import synth_corpus, synth_driver_grids

spec = {"CRO": {"add": 3.0}, "ENF": {"mul": 0.7}, "noise_sigma": 0.5}
model, _ = train_cv(derive(synth_corpus(20, 200, spec, seed=7)))

# One mid-July day of drivers on 5 degree cells; ocean cells are missing.
drivers = synth_driver_grids(d_deg=5.0, day_of_year=196, seed=7)
proc, errors = spatial.map_model(drivers, model.params)
hyb, _ = spatial.map_model(drivers, model)
print(f"{np.isfinite(proc.values).sum()} land cells mapped, {len(errors)} rejected")

# Treat that day as a year-round mean for the totals.
for name, g in (("process", proc), ("hybrid", hyb)):
    print(f"{name:8s} global total {spatial.global_total(g, 365):8.2f} Pg C yr-1")

# Zonal profile: where the carbon is fixed.
lat = spatial.lat_profile(hyb, 365)
for c, v in zip(hyb.lat_centers(), lat):
    if v > 0:
        print(f"  {c:6.1f}  {'#' * int(round(40 * v / lat.max())):40s} {v:6.2f}")
print(f"profile sum {math.fsum(lat):.4f} == total {spatial.global_total(hyb, 365):.4f}")

# Where does the correction matter? Percent difference relative to the hybrid map.
diff = spatial.percent_diff(hyb, proc)
v = diff.values[np.isfinite(diff.values)]
print(f"percent difference: median {np.median(v):.1f}%, 5-95% range {np.percentile(v, 5):.1f}..{np.percentile(v, 95):.1f}%")

# Grids serialize to the plain-text fluxgrid format.
text = spatial.format_fluxgrid(diff)
print("\n".join(text.splitlines()[:9]))
