"""Droplet data: harmonic moments, the energy F0, and the large-N check."""

import numpy as np

from dysontau.dispersionless import (
    DomainSpec,
    F0_disk_closed_form,
    F0_energy,
    F0_tilde_fatslit,
    asymptotic_check_gaussian,
    fatslit_moments,
    harmonic_moments,
)

D = DomainSpec.disk(1.0, 0.3 - 0.2j)
m = harmonic_moments(D, k_max=3, h=0.01)
print("off-centre disk: T0", round(m.T0, 12), "T1..T3", np.round(m.T, 8))

for r in (0.5, 1.0, 2.0):
    e = F0_energy(DomainSpec.disk(r), h=r / 200)
    print(f"disk r={r}: F0 {e.value:.8f} +- {e.error:.1e}, closed form {F0_disk_closed_form(r * r):.8f}")

B = DomainSpec.half_disk(1.0)
print("half-disk fat slit: T1..T5", np.round(fatslit_moments(B, k_max=5, h=0.005).T, 8))
print("half-disk F0~", F0_tilde_fatslit(B, h=0.005))

for row in asymptotic_check_gaussian([10, 100, 1000]):
    print(f"N={row.N:5d}  (log tau - N log pi - F0)/N^2 = {row.deviation:.3e}")
