#!/usr/bin/env python3
# The three Newtonian potential solvers against closed forms.
#
# Usage:
#   python demos/potential_checks.py
#
# Radial shell sums reproduce the unit-ball potential (3 - r^2)/6 inside and
# 1/(3r) outside. The zero-padded spectral convolution gives u(0) = 1/2 for
# exp(-|x|^2). The conservative DST solve of the 7-point Laplacian is second
# order; its RMS error against the ball falls by about 4 per halving of h.
from vpil.oracles import verify_potentials

rep = verify_potentials(cartesian_points=48, refinement_points=(16, 32, 64))

ball = rep["radial_ball"]
for r, u, e in zip(ball["r"], ball["u"], ball["exact"]):
    print(f"radial ball  u({r:.0f}) = {u:.9f}   exact {e:.9f}")

g = rep["spectral_gaussian"]
print(f"spectral     u(0) = {g['u0']:.6f}   exact 0.5   rel err {g['relative_error']:.1e}")

c = rep["conservative_ball"]
for n, err in zip(c["points"], c["rms_errors"]):
    print(f"conservative n = {n:3d}   RMS error {err:.3e}")
print("observed orders", [round(o, 3) for o in c["orders"]])
