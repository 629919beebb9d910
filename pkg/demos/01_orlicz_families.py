"""Orlicz families and their conjugates.

Every family in phimax carries an N-function phi together with the pieces
derived from it: the density p, its generalized inverse q, the conjugate
psi and the inverses of phi and psi. This script builds a few families,
checks the conjugate numerically, and shows what the two Weibull phi
constants do.

Run: python demos/01_orlicz_families.py
"""
import numpy as np

from phimax.orlicz import (
    family_from_dict,
    make_gaussian_family,
    make_power_family,
    make_weibull_conjugate_family,
    young_fenchel_numeric,
)

# The Gaussian family phi(x) = x^2/2 is its own conjugate.
gauss = make_gaussian_family()
print("gaussian: phi(1.5) =", float(gauss.phi(1.5)), " psi(1.5) =", float(gauss.psi(1.5)))

# Power families phi(x) = |x|^r / r have the conjugate |x|^q / q with 1/r + 1/q = 1.
# The numeric transform (a sup over y of xy - phi(y)) agrees with it.
for r in (1.5, 3.0):
    fam = make_power_family(r)
    q = r / (r - 1)
    x = 2.0
    print(f"power r={r}: numeric psi(2) = {young_fenchel_numeric(fam.phi, x):.12f}, closed form = {x**q / q:.12f}")

# The Weibull family is built from its conjugate psi(x) = (x/b)^theta.
# With the default phi constant, phi and psi really are a conjugate pair.
weib = make_weibull_conjugate_family(9.0, 1.25)
xs = np.array([0.5, 1.0, 1.25, 2.0])
numeric = np.array([young_fenchel_numeric(weib.phi, x) for x in xs])
print("weibull conjugate check:", np.max(np.abs(numeric / weib.psi(xs) - 1)))

# The "published" constant reproduces the norm reported in the literature for this
# example but breaks exact duality. The gap shows up directly.
pub = make_weibull_conjugate_family(9.0, 1.25, "published")
print("phi(1) with both constants:", float(weib.phi(1.0)), float(pub.phi(1.0)))
print("published pair, numeric psi(1.25) =", young_fenchel_numeric(pub.phi, 1.25), "vs psi(1.25) = 1")

# Inverses are available on every family. The normalizer later uses psi^{-1}(ln mj).
print("psi^{-1}(ln 1e6):", float(weib.psi_inverse(np.log(1e6))), float(gauss.psi_inverse(np.log(1e6))))

# Families can also come from a JSON-style description, which is what the CLI uses.
fam = family_from_dict({"kind": "power", "r": 2.5})
print("from dict:", fam.to_dict(), "q(1) =", float(fam.q_inverse(1.0)))
