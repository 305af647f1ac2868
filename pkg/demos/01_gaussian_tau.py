"""Three routes to the Gaussian-measure tau function.

At zero times the Schur series has a single term, the closed form. With
t1 switched on, the Schur series is compared with a Monte Carlo estimate.
"""

import numpy as np
from scipy.special import gammaln

from dysontau import MeasureSpec, TimeVector, tau_gaussian_schur, tau_integral_mc

for N in (1, 5, 20):
    v = tau_gaussian_schur(N, 1.0, TimeVector.zero(), 0).value
    closed = N * np.log(np.pi) + gammaln(np.arange(1, N + 1)).sum()
    print(f"N={N:2d}  log tau = {v.log_magnitude:.12f}  closed form {closed:.12f}")

t = TimeVector.locked([0.1])
for N in (2, 3):
    s = tau_gaussian_schur(N, 1.0, t, 8)
    mc = tau_integral_mc(N, MeasureSpec.radial_gaussian(1.0), t, 200_000, seed=1)
    print(f"N={N}  Schur {float(s.value):.6f} (top shell {s.last_shell:.1e})  "
          f"MC {float(mc.value):.6f} +- {mc.rel_stderr * float(mc.value):.1e}")
