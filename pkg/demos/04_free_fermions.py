"""Free fermions on a finite window of modes.

Runs the operator identity suite, checks Wick's theorem against explicit
matrices, and matches the fermionic expectation value with the Coulomb sum
for a three-point measure.
"""

from dysontau import TimeVector
from dysontau.fock import FockWindow, build_mode_operators, fock_vev, identity_suite, psi, psi_star, wick_vev
from dysontau.fock import tau_operator_vs_integral

for c in identity_suite():
    print(f"{'ok ' if c.passed else 'BAD'} {c.name:55s} {c.error:.1e}")

ops = build_mode_operators(FockWindow(-3, 4))
ws = [psi(-1) + psi_star(1, 0.5), psi(1) + psi(-2), psi_star(1, 2.0) + psi_star(-2), psi_star(-1) + psi(2)]
print(f"Wick {wick_vev(ws):.6f}  explicit {fock_vev(ops, ws):.6f}")

t = TimeVector.locked([0.1, 0.05j])
pts, wts = [0.3 + 0.2j, -0.5, 0.1 - 0.7j], [0.7, 1.1, 0.5]
for N in (0, 1, 2, 3):
    r = tau_operator_vs_integral(N, t, pts, wts)
    nonzero = [m for m, v in r.terms.items() if v != 0]
    print(f"N={N}  operator {float(r.operator) if not r.operator.is_zero else 0:.12f}  "
          f"integral {float(r.integral) if not r.integral.is_zero else 0:.12f}  non-zero terms m={nonzero}")
