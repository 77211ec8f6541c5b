"""Fixed-point bounds for the iteration scheme and the cubic virial blow-up test.

The iteration bound is driven by ``Phi(s) = c exp(A (s + 1))``.  Writing
``t = A s`` the fixed-point equation becomes ``t exp(-t) = c A exp(A)``, so
two positive roots exist exactly when ``c < exp(-A) / (e A)``.

The blow-up test bounds the moment of inertia by the cubic::

    g(t) = C1/6 t^3 + (k C1 + I''(0)) t^2 / 2 + I'(0) t + I(0)

and reports whether it turns negative at the critical point ``t2`` of ``g``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize

__all__ = [
    "PhiParams",
    "CriterionInput",
    "CriterionReport",
    "CollapseReport",
    "LAMBERT_C0",
    "phi_threshold_and_roots",
    "phi_iterate",
    "picard_phi_params",
    "smallness_threshold",
    "s_large_bound",
    "larger_root",
    "calibrate_c0",
    "psi_max",
    "existence_time_bound",
    "k_of_m",
    "c_star",
    "c1_from_norms",
    "cubic_bound",
    "collapse_monitor",
]

# sup_{t > 1} t^2 exp(-t), attained at t = 2: the sharp constant in s_large <= c0 / (a b^2)
LAMBERT_C0 = 4.0 * math.exp(-2.0)


@dataclass(frozen=True)
class PhiParams:
    c: float
    A: float

    def __post_init__(self):
        if not (self.c > 0 and self.A > 0):
            raise ValueError(f"c and A must be positive, got c={self.c}, A={self.A}")

    def __call__(self, s):
        return self.c * math.exp(self.A * (s + 1.0))


def _root_t(y, lo, hi):
    # root of log t - t = log y on a bracket where it changes sign
    ly = math.log(y)
    return optimize.bisect(lambda t: math.log(t) - t - ly, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=2000)


def phi_threshold_and_roots(p: PhiParams):
    """Threshold ``exp(-A)/(e A)`` and the fixed points of ``Phi``.

    Returns ``(threshold, roots)`` with ``roots`` an empty tuple, the
    tangency root ``(1/A,)``, or ``(N1, N2)`` with ``N1 < 1/A < N2``.
    """
    threshold = math.exp(-p.A) / (math.e * p.A)
    if abs(p.c - threshold) <= 1e-14 * threshold:
        return threshold, (1.0 / p.A,)
    if p.c > threshold:
        return threshold, ()
    y = p.c * p.A * math.exp(p.A)  # in (0, 1/e)
    t1 = _root_t(y, y, 1.0)  # log y - y - log y < 0
    hi = 2.0
    while math.log(hi) - hi > math.log(y):
        hi *= 2.0
    t2 = _root_t(y, 1.0, hi)
    return threshold, (t1 / p.A, t2 / p.A)


def phi_iterate(p: PhiParams, s0: float, n: int):
    """The iterates ``Phi(s0), ..., Phi^n(s0)`` and their long-run behaviour.

    Classification is one of ``converges_to_N1`` (increasing from below the
    small root), ``decreases_to_N1`` (between the roots), ``constant`` (at a
    root) or ``diverges``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _, roots = phi_threshold_and_roots(p)
    seq = []
    s = float(s0)
    for _ in range(n):
        try:
            s = p(s) if math.isfinite(s) else math.inf
        except OverflowError:
            s = math.inf
        seq.append(s)
    seq = np.array(seq)

    def at(r):
        return abs(s0 - r) <= 1e-12 * r

    if not roots:
        label = "diverges"
    elif len(roots) == 1:
        r = roots[0]
        label = "constant" if at(r) else ("converges_to_N1" if s0 < r else "diverges")
    else:
        n1, n2 = roots
        if at(n1) or at(n2):
            label = "constant"
        elif s0 < n1:
            label = "converges_to_N1"
        elif s0 < n2:
            label = "decreases_to_N1"
        else:
            label = "diverges"
    if label != "diverges" and roots and np.any(seq > 1e3 * roots[-1]):
        label = "diverges"
    return seq, label


def picard_phi_params(norm_c2: float, M: float, m: float, T: float) -> PhiParams:
    """``c = ||f_in|| (2 <T>)^m`` and ``A = M (T + 1)^3`` for the iteration chain."""
    return PhiParams(c=norm_c2 * (2.0 * math.sqrt(1.0 + T * T)) ** m, A=M * (T + 1.0) ** 3)


def smallness_threshold(M: float, m: float, T: float, prefactor: float = math.e) -> float:
    """Largest ``||f_in||`` with ``prefactor M (2<T>)^m (T+1)^3 exp(M (T+1)^3) ||f_in|| <= 1``.

    With the default ``prefactor = e`` this is exactly the condition that
    :func:`picard_phi_params` lies below the two-root threshold.
    """
    b = M * (T + 1.0) ** 3
    return 1.0 / (prefactor * (2.0 * math.sqrt(1.0 + T * T)) ** m * b * math.exp(b))


def s_large_bound(a: float, b: float, c0: float = LAMBERT_C0) -> float:
    """Upper bound ``c0 / (a b^2)`` on the larger root of ``a exp(b s) = s``."""
    if not (a > 0 and b > 0 and c0 > 0):
        raise ValueError("a, b and c0 must be positive")
    return c0 / (a * b * b)


def larger_root(a: float, b: float) -> float | None:
    """Larger root of ``a exp(b s) = s`` by bisection, or None if there is none."""
    y = a * b
    if y >= 1.0 / math.e:
        return None
    hi = 2.0
    while math.log(hi) - hi > math.log(y):
        hi *= 2.0
    return _root_t(y, 1.0, hi) / b


def calibrate_c0(a, b) -> float:
    """Smallest ``c0`` making ``s_large <= c0 / (a b^2)`` hold on the given samples."""
    worst = 0.0
    for ai, bi in zip(np.atleast_1d(a), np.atleast_1d(b)):
        s = larger_root(float(ai), float(bi))
        if s is not None:
            worst = max(worst, s * ai * bi * bi)
    return worst


def _psi(t, M, m):
    return (2.0 * np.sqrt(1.0 + t * t)) ** m * (t + 1.0) ** 3 * np.exp(-M * (t + 1.0) ** 3)


def psi_max(M: float, m: float) -> float:
    """``max_{t >= 0} (2<t>)^m (t+1)^3 exp(-M (t+1)^3)`` by scan plus golden section."""
    hi = 1.0
    while M * (hi + 1.0) ** 3 < m * math.log(2.0 * math.sqrt(1.0 + hi * hi)) + 3.0 * math.log(hi + 1.0) + 60.0:
        hi *= 2.0
    t = np.linspace(0.0, hi, 4001)
    vals = _psi(t, M, m)
    i = int(np.argmax(vals))
    best = float(vals[i])
    neg = lambda s: -_psi(s, M, m)  # noqa: E731
    if 0 < i < len(t) - 1:
        res = optimize.minimize_scalar(neg, bracket=(t[i - 1], t[i], t[i + 1]), method="golden", tol=1e-10)
        best = max(best, -float(res.fun))
    else:
        res = optimize.minimize_scalar(neg, bounds=(t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]), method="bounded", options={"xatol": 1e-10})
        best = max(best, -float(res.fun))
    return best


def existence_time_bound(norm_c2: float, M: float, m: float, prefactor: float = math.exp(-math.e)):
    """Sufficient existence time ``{(1/M) log(1 / (prefactor M ||f_in|| C(m)))}^(1/3) - 1``.

    ``C(m)`` is the maximum of ``psi``.  Returns ``(T, C(m))`` with ``T``
    None when the braced quantity does not exceed 1.
    """
    if not (norm_c2 > 0 and M > 0):
        raise ValueError("norm_c2 and M must be positive")
    if not m > 3:
        raise ValueError("m must exceed 3")
    c_m = psi_max(M, m)
    braced = math.log(1.0 / (prefactor * M * norm_c2 * c_m)) / M
    if braced <= 1.0:
        return None, c_m
    return braced ** (1.0 / 3.0) - 1.0, c_m


def k_of_m(m: float) -> float:
    """``m pi / (3 (m - 3))``: ratio of the field-energy bound to ``C1``."""
    if not m > 3:
        raise ValueError("m must exceed 3")
    return m * math.pi / (3.0 * (m - 3.0))


def c_star(beta: float = 1.0, p: float = 1.2, newton_factor: bool = True) -> float:
    """Constant in ``||f * |.|^-beta||_inf <= C (||f||_p + ||f||_inf)``.

    ``C = max(4 pi / (3 - beta), (4 pi / (beta p' - 3))^(1/p'))`` from splitting
    the kernel at ``|z| = 1``; requires ``1 < p < 3 / (3 - beta)``.  With
    ``newton_factor`` the result is divided by ``4 pi`` (kernel ``1/(4 pi |z|)``).
    """
    if not 0 < beta < 3:
        raise ValueError("beta must lie in (0, 3)")
    if not 1 < p < 3.0 / (3.0 - beta):
        raise ValueError("p must lie in (1, 3/(3 - beta))")
    q = p / (p - 1.0)
    near = 4.0 * math.pi / (3.0 - beta)
    far = (4.0 * math.pi / (beta * q - 3.0)) ** (1.0 / q)
    c = max(near, far)
    return c / (4.0 * math.pi) if newton_factor else c


def c1_from_norms(l1: float, norm_c2: float, M: float = 1.0, c0: float = LAMBERT_C0, cstar: float | None = None) -> float:
    """``C1 = 4 C* C** ||f_in||_1 / ||f_in||_C2`` with ``C** = c0 / (M^2 ||f_in||_C2)``."""
    cstar = c_star() if cstar is None else cstar
    c2star = c0 / (M * M * norm_c2)
    return 4.0 * cstar * c2star * l1 / norm_c2


@dataclass(frozen=True)
class CriterionInput:
    I0: float
    Ip0: float
    KE0: float
    EE0: float
    C1: float
    k: float
    m: float = 7.0

    def __post_init__(self):
        if self.I0 < 0 or self.EE0 < 0 or self.KE0 < 0:
            raise ValueError("I0, KE0 and EE0 must be non-negative")
        if not (self.C1 > 0 and self.k > 0):
            raise ValueError("C1 and k must be positive")
        if not self.m > 6:
            raise ValueError("m must exceed 6")


@dataclass(frozen=True)
class CriterionReport:
    a3: float
    a2: float
    a1: float
    a0: float
    discriminant: float
    t2: float | None
    g_at_t2: float | None
    M2: float | None
    M3: float
    m3_nonpositive: bool
    condition_23_satisfied: bool | None
    verdict: str

    def g(self, t):
        return ((self.a3 * t + self.a2) * t + self.a1) * t + self.a0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def cubic_bound(inp: CriterionInput, C: float | None = None, ratio: float | None = None) -> CriterionReport:
    """Evaluate the cubic virial bound and its sign at the critical point ``t2``.

    ``I''(0) = 2 KE0 - EE0``.  ``C`` and ``ratio = ||f_in||_1 / ||f_in||_C2``
    enable the sufficient condition ``EE0 - 2 KE0 >= C (3 I0 / |I'(0)| + k) ratio``,
    reported as None when either is missing or ``I'(0) = 0``.
    """
    c1 = inp.C1
    ipp0 = 2.0 * inp.KE0 - inp.EE0
    b = inp.k * c1 + ipp0
    disc = b * b - 2.0 * c1 * inp.Ip0
    m3 = inp.I0 - b * inp.Ip0 / (3.0 * c1)
    t2 = g2 = m2 = None
    if disc > 0:
        sq = math.sqrt(disc)
        root = (-b + sq) / c1 if b <= 0 else -2.0 * inp.Ip0 / (b + sq)
        if root > 0:
            t2 = root
            m2 = (2.0 / 3.0 * inp.Ip0 - b * b / (3.0 * c1)) * t2
            g2 = ((c1 / 6.0 * t2 + b / 2.0) * t2 + inp.Ip0) * t2 + inp.I0
    cond = None
    if C is not None and ratio is not None and inp.Ip0 != 0:
        cond = bool(inp.EE0 - 2.0 * inp.KE0 >= C * (3.0 * inp.I0 / abs(inp.Ip0) + inp.k) * ratio)
    blowup = inp.Ip0 < 0 and g2 is not None and g2 < 0
    return CriterionReport(
        a3=c1 / 6.0, a2=b / 2.0, a1=inp.Ip0, a0=inp.I0, discriminant=disc, t2=t2,
        g_at_t2=g2, M2=m2, M3=m3, m3_nonpositive=bool(m3 <= 0),
        condition_23_satisfied=cond,
        verdict="blowup_predicted" if blowup else "inconclusive",
    )  # fmt: skip


@dataclass(frozen=True)
class CollapseReport:
    t: tuple
    bound: tuple
    trend: bool
    inertia_decreasing: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def collapse_monitor(series, epsilon_radius: float) -> CollapseReport:
    """Bound ``mass(|x| >= eps) <= 2 I(t) / eps^2`` along a run.

    ``trend`` is true when the bound strictly decreases over the final third
    of the samples.
    """
    series = list(series)
    if len(series) < 3:
        raise ValueError("collapse_monitor needs at least 3 samples")
    if not epsilon_radius > 0:
        raise ValueError("epsilon_radius must be positive")
    t = np.array([r.t for r in series])
    inertia = np.array([r.inertia for r in series])
    bound = 2.0 * inertia / epsilon_radius**2
    tail = bound[len(bound) - max(2, len(bound) // 3) :]
    return CollapseReport(
        t=tuple(map(float, t)), bound=tuple(map(float, bound)),
        trend=bool(np.all(np.diff(tail) < 0)),
        inertia_decreasing=bool(np.all(np.diff(inertia) < 0)),
    )  # fmt: skip
