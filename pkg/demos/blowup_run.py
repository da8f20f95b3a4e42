"""Concentrating wave map on the sphere, next to a control run.

The profile data at t = 0.2 are evolved backwards in the self-similar
time variable down to t = 0.05 (the rescaled soliton shrinks like
t^(1 + nu)).  The energy inside the light cone r <= t stays pinned near
E(Q) = 2, while small data of the same shape radiate away.
"""
from blowup_lab.evolution import run_blowup_experiment
from blowup_lab.harmonic_map import solve_harmonic_map
from blowup_lab.surface import make_sphere

hm = solve_harmonic_map(make_sphere())
for label, kw in (("profile data", {}), ("control data", {"control": True})):
    res = run_blowup_experiment(hm, nu=1.0, t_start=0.2, t_end=0.05, **kw)
    print(f"{label}: E(Q) = {res.E_Q:.6f}, complete = {res.complete}")
    print("      t      E_total    E_loc(cone)   sup u")
    for row in res.rows:
        print(f"  {row.t:6.3f}  {row.E_total:10.6f}  {row.Eloc_cone:11.6f}  {row.sup_u:7.4f}")
    print()
