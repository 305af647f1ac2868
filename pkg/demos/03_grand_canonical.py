"""Grand canonical ensembles with image charges as Fredholm determinants."""

from dysontau import TimeVector
from dysontau.grand import (
    DiskEnsembleSpec,
    HalfPlaneEnsembleSpec,
    circle_nystrom_matrix,
    fredholm_det_circle,
    fredholm_det_halfplane,
    fredholm_series_bound,
    grand_expansion_circle,
)

spec = DiskEnsembleSpec(0.5, times=TimeVector.locked([0.1]), fugacity=0.002)
det = fredholm_det_circle(spec, 256)
bound = fredholm_series_bound(circle_nystrom_matrix(spec, 256), 4)
terms = grand_expansion_circle(spec, 4, 48)
series = sum(complex(v) for v in terms)
print(f"circle: det {complex(det.value).real:.15f}  series {series.real:.15f}  "
      f"remainder bound {bound:.1e}  M-doubling {det.error:.1e}")

for fug in (0.1, 1.0, 10.0):
    r = fredholm_det_circle(DiskEnsembleSpec(0.5, fugacity=fug), 256)
    print(f"circle, fugacity {fug:5.1f}: log det = {r.value.log_magnitude:.10f}")

hp = HalfPlaneEnsembleSpec(0.5, [0.2j, -0.1j], imaginary_times=True)
r = fredholm_det_halfplane(hp, 128)
print(f"half-plane: log det = {r.value.log_magnitude:.10f}, tail {r.error:.1e}, flagged {r.flagged}")
