#!/usr/bin/env python3
# Fixed-point bound of the iteration scheme and the cubic virial bound.
#
# Usage:
#   python demos/blowup_criterion.py
#
# Phi(s) = c exp(A (s + 1)) has two fixed points N1 < 1/A < N2 below the
# threshold c = exp(-A)/(e A), touches the diagonal at 1/A on it and has none
# above it. Iterates started below N2 settle on N1, which is what bounds the
# sequence of linearised solutions.
#
# The cubic g(t) = C1/6 t^3 + (k C1 + I''(0))/2 t^2 + I'(0) t + I(0) bounds the
# moment of inertia. When it goes negative at its critical point t2 while I
# must stay positive, the solution cannot stay non-negative past t2.
import math

from vpil.criterion import CriterionInput, PhiParams, cubic_bound, phi_iterate, phi_threshold_and_roots

A = 1.0
threshold, _ = phi_threshold_and_roots(PhiParams(1.0, A))
print(f"A = {A}: threshold exp(-A)/(eA) = {threshold:.6f}")
for scale in (0.5, 1.0, 1.5):
    p = PhiParams(scale * threshold, A)
    _, roots = phi_threshold_and_roots(p)
    seq, label = phi_iterate(p, 0.0, 40)
    print(f"  c = {scale:.1f} x threshold: roots {[round(r, 6) for r in roots]}, iterates from 0 {label}, Phi^40(0) = {seq[-1]:.4g}")

# g(t) = t^3 - 6 t^2 - t + 0.01
rep = cubic_bound(CriterionInput(I0=0.01, Ip0=-1.0, KE0=1.0, EE0=20.0, C1=6.0, k=1.0))
print(f"\ncubic t^3 - 6 t^2 - t + 0.01: discriminant {rep.discriminant:g}")
print(f"  t2 = {rep.t2:.6f} (closed form {(12 + math.sqrt(156)) / 6:.6f}), g(t2) = {rep.g_at_t2:.4f}")
print(f"  verdict: {rep.verdict}")
