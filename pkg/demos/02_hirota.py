"""The bilinear identity as a numerical certificate.

Gaussian, circle (Toeplitz) and grand canonical disk families satisfy it.
A family multiplied by exp(a n^2) does not.
"""

import numpy as np

from dysontau import LogValue, TimeVector, hirota_residual
from dysontau.canonical import gaussian_tau_family, toeplitz_tau_family
from dysontau.grand import disk_tau_family

rng = np.random.default_rng(0)
t = TimeVector.locked(0.2 * (rng.normal(size=2) + 1j * rng.normal(size=2)))
families = {
    "gaussian": gaussian_tau_family(),
    "toeplitz": toeplitz_tau_family(),
    "disk (grand)": disk_tau_family(0.5, 1.0),
}
toep = families["toeplitz"]
families["toeplitz * e^{0.3 n^2}"] = lambda n, tt: toep(n, tt) * LogValue(0.3 * n * n)

for name, fam in families.items():
    res = max(hirota_residual(fam, n, t) for n in (1, 2, 3))
    print(f"{name:24s} max residual {res:.2e}")
