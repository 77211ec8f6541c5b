#!/usr/bin/env python3
# Free transport and the collisionless virial identity.
#
# Usage:
#   python demos/free_streaming_virial.py
#
# With field and collisions off, I(t) = I(0) + I'(0) t + KE t^2 exactly, which
# for the unit Gaussian is 3/4 + 3/4 t^2. Unlimited sweeps move the first three
# x-moments exactly, so the discrete I follows the discrete quadratic up to
# the dispersive ripple that leaves the box. At 12 points per axis that costs
# about 1% of I mid-run; the gap closes under refinement. The Cauchy-Schwarz bound
# I'^2 <= 2 I I'' holds at every sample.
from vpil.diagnostics import cauchy_schwarz_check
from vpil.grids import Grid3, PhaseGrid
from vpil.simulation import SimConfig, gaussian_phase, run

grid = PhaseGrid(Grid3(6.0, 12), Grid3(4.5, 12))
f = gaussian_phase(grid, drift=(0.3, 0.0, 0.0))
cfg = SimConfig("vpil", 1 / 9, 1.0, sign="gravitational", phase=grid, field=False, collisions=False, limiter="none",
                abort_negative_fraction=1.0)
res = run(cfg, f)

r0 = res.series[0]
print(f"I(0) = {r0.inertia:.6f}, I'(0) = {r0.mixed_moment:.6f}, KE = {r0.ke:.6f}")
print("     t          I  quadratic         I'   C-S")
for r in res.series:
    quad = r0.inertia + r0.mixed_moment * r.t + r0.ke * r.t**2
    print(f"{r.t:6.3f} {r.inertia:10.6f} {quad:10.6f} {r.mixed_moment:10.6f} {cauchy_schwarz_check(r)!s:>5}")
