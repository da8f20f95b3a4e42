"""Spectral measure of the linearized operator around the sphere soliton.

At high frequency the density approaches xi/(8 A0^2): the free law xi/8,
rescaled because phi starts like phi0 = A0 r^(3/2) instead of r^(3/2).  At low
frequency the zero-energy resonance phi0 makes it collapse like
1/(xi log^2 xi).  Both regimes are printed side by side.
"""
import numpy as np

from blowup_lab.harmonic_map import solve_harmonic_map
from blowup_lab.spectral import Potential
from blowup_lab.spectral.measure import build_spectral_data
from blowup_lab.surface import make_sphere

hm = solve_harmonic_map(make_sphere())
pot = Potential(hm)
xi = np.geomspace(1e-8, 1e3, 12)
data = build_spectral_data(pot, xi)

print("       xi          rho       rho/(xi/8)   xi rho log^2 xi")
for x, rho in zip(xi, data.rho):
    # the last column only means something for small xi
    low = f"{x * rho * np.log(x) ** 2:10.5f}" if x < 0.1 else ""
    print(f"  {x:10.3g}  {rho:12.5g}  {rho / (x / 8):12.5g}  {low}")

# high-frequency slope
hi = build_spectral_data(pot, np.geomspace(10, 1e3, 9))
slope = np.polyfit(np.log(hi.xi), np.log(hi.rho), 1)[0]
print(f"\n1/A0^2 = {1 / hm.A0 ** 2:.5f}, rho/(xi/8) at xi = 1e3: {hi.rho[-1] / (1e3 / 8):.5f}")
print(f"log-log slope of rho on [10, 1e3]: {slope:.4f}")
