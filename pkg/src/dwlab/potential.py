"""Double-well potentials and their numerically certified landmark constants.

A potential W is admissible when W(0) = W'(0) = 0 with W''(0) > 0, W attains
a strictly negative global minimum -m at some s0 > 0, and W' stays positive
on a right neighborhood of s0.  Everything downstream (radial ground states,
constrained flows, multiplier bounds) is expressed in terms of the landmark
constants certified here: s0, m, the first positive zero of W', the plateau
edge of {W' >= 0}, and the minimum of W' on [0, s0].
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import CertificationError

__all__ = [
    "Potential",
    "PotentialCertificate",
    "AxiomCheck",
    "quartic",
    "tilt",
    "from_table",
    "from_callables",
    "certify",
]

#: number of uniform samples used before root polishing
CERTIFY_SAMPLES = 100_000

#: relative tolerance for bisection refinement of W' roots
ROOT_RTOL = 1e-12

#: right-neighborhood fraction of s0 on which W' > 0 is checked
BARRIER_FRACTION = 0.05


@dataclass(frozen=True)
class Potential:
    """A scalar energy density with two derivatives.

    ``eval``, ``deriv`` and ``deriv2`` accept floats or numpy arrays.
    ``sample_range`` is the closed interval on which numerical certification
    samples the functions; it must contain [0, 2*s0] for ``certify`` to be
    meaningful.  ``growth`` optionally records polynomial growth metadata
    (exponent and constants); it is bookkeeping only and never checked
    beyond sampling.
    """

    eval: Callable
    deriv: Callable
    deriv2: Callable
    sample_range: tuple[float, float]
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    growth: dict = field(default_factory=dict)

    def __call__(self, s):
        return self.eval(s)


@dataclass(frozen=True)
class AxiomCheck:
    passed: bool
    detail: str = ""
    location: float | None = None


@dataclass(frozen=True)
class PotentialCertificate:
    """Landmark constants of a certified double well.

    s0        location of the (smallest positive) global minimum
    m         well depth, m = -W(s0) > 0
    s1crit    first positive zero of W'
    a_plateau sup{t : W' >= 0 on [0, t]}
    w_minus   min of W' on [0, s0] (<= 0)
    """

    s0: float
    m: float
    s1crit: float
    a_plateau: float
    w_minus: float
    axiom_flags: dict[str, AxiomCheck]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.axiom_flags.values())


def quartic(a1: float, a2: float) -> Potential:
    """Asymmetric quartic well W(s) = s^2 (s - a1)(s - a2), 0 < a1 < a2.

    Roots at 0 (double), a1 and a2; the global minimum sits between a1
    and a2 and is strictly negative.  Derivatives are analytic.
    """
    if not (0 < a1 < a2):
        raise ValueError(f"quartic requires 0 < a1 < a2, got a1={a1}, a2={a2}")
    b = a1 + a2
    c = a1 * a2

    def w(s):
        s = np.asarray(s, dtype=float)
        out = s * s * (s - a1) * (s - a2)
        return out if out.ndim else float(out)

    def dw(s):
        s = np.asarray(s, dtype=float)
        out = s * (4.0 * s * s - 3.0 * b * s + 2.0 * c)
        return out if out.ndim else float(out)

    def d2w(s):
        s = np.asarray(s, dtype=float)
        out = 12.0 * s * s - 6.0 * b * s + 2.0 * c
        return out if out.ndim else float(out)

    return Potential(
        eval=w,
        deriv=dw,
        deriv2=d2w,
        sample_range=(-a2, 2.5 * a2),
        kind="quartic",
        params={"a1": a1, "a2": a2},
        growth={"p": 4.0},
    )


def tilt(p: Potential, A: float) -> Potential:
    """Linear perturbation s -> W(s) + A*s.

    Adding A*s shifts W' by A and leaves W'' unchanged; a constrained
    critical point (u, lam) of the original energy corresponds to
    (u, lam + A) for the tilted one.
    """
    base_w, base_dw = p.eval, p.deriv

    def w(s):
        return base_w(s) + A * np.asarray(s, dtype=float)

    def dw(s):
        return base_dw(s) + A

    return replace(
        p,
        eval=w,
        deriv=dw,
        kind=f"tilt({p.kind})" if A != 0.0 else p.kind,
        params={**p.params, "tilt": p.params.get("tilt", 0.0) + A},
    )


def from_callables(w, dw, d2w, sample_range, kind="custom", **params) -> Potential:
    """Wrap user-supplied callables as a Potential (no certification)."""
    return Potential(eval=w, deriv=dw, deriv2=d2w,
                     sample_range=tuple(sample_range), kind=kind, params=dict(params))


def from_table(s, w, kind="table") -> Potential:
    """Cubic-spline potential through sampled points (s_i, W(s_i)).

    The sample must cover 0; derivatives come from the spline.  Intended for
    potentials specified in config files as a CSV table.
    """
    from scipy.interpolate import CubicSpline

    s = np.asarray(s, dtype=float)
    w = np.asarray(w, dtype=float)
    if s.ndim != 1 or s.size < 4 or np.any(np.diff(s) <= 0):
        raise ValueError("table potential needs >= 4 strictly increasing samples")
    if not (s[0] <= 0.0 <= s[-1]):
        raise ValueError("table potential must bracket s = 0")
    spline = CubicSpline(s, w)
    d1 = spline.derivative(1)
    d2 = spline.derivative(2)
    return Potential(
        eval=lambda x: spline(x),
        deriv=lambda x: d1(x),
        deriv2=lambda x: d2(x),
        sample_range=(float(s[0]), float(s[-1])),
        kind=kind,
        params={"n_samples": int(s.size)},
    )


def _bisect(f, lo, hi, rtol=ROOT_RTOL, max_iter=200):
    """Plain bisection for a sign change of f on [lo, hi]."""
    flo = f(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rtol * max(1.0, abs(mid)):
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (flo < 0) == (fm < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def certify(p: Potential, n_samples: int = CERTIFY_SAMPLES) -> PotentialCertificate:
    """Certify the double-well axioms by dense sampling plus bisection.

    Raises CertificationError if W has no strictly negative global minimum
    on the positive part of the sample range.  Individual axiom outcomes,
    including the failed ones, are recorded in ``axiom_flags``.
    """
    lo, hi = p.sample_range
    if hi <= 0:
        raise CertificationError(f"sample_range {p.sample_range} has no positive part")
    flags: dict[str, AxiomCheck] = {}

    w0 = float(p.eval(0.0))
    dw0 = float(p.deriv(0.0))
    d2w0 = float(p.deriv2(0.0))
    origin_ok = abs(w0) <= 1e-12 and abs(dw0) <= 1e-12 and d2w0 > 0
    flags["origin_double_zero"] = AxiomCheck(
        passed=origin_ok,
        detail=f"W(0)={w0:.3e}, W'(0)={dw0:.3e}, W''(0)={d2w0:.6g}",
        location=0.0 if not origin_ok else None,
    )

    # dense positive-side sampling
    s = np.linspace(0.0, hi, n_samples)
    ws = np.asarray(p.eval(s), dtype=float)
    dws = np.asarray(p.deriv(s), dtype=float)

    i_min = int(np.argmin(ws))
    if ws[i_min] >= 0.0 or i_min == 0:
        flags["negative_global_minimum"] = AxiomCheck(
            passed=False,
            detail=f"min W on [0,{hi:.3g}] is {ws[i_min]:.3e} at s={s[i_min]:.6g}",
            location=float(s[i_min]),
        )
        raise CertificationError(
            "potential has no strictly negative global minimum on "
            f"[0, {hi:.4g}]: min W = {ws[i_min]:.4e} at s = {s[i_min]:.6g}"
        )

    # s0: smallest positive minimizer attaining the global minimum value.
    # Refine every sampled local minimum near the global level and take the
    # smallest location whose refined value matches the global minimum.
    w_min_sampled = ws[i_min]
    tol_level = 1e-12 * max(1.0, abs(w_min_sampled))
    candidates = []
    interior = np.arange(1, n_samples - 1)
    is_loc_min = (ws[interior] <= ws[interior - 1]) & (ws[interior] <= ws[interior + 1])
    for i in interior[is_loc_min]:
        if ws[i] > w_min_sampled + 1e-6 * max(1.0, abs(w_min_sampled)):
            continue
        root = _bisect(p.deriv, s[i - 1], s[i + 1])
        candidates.append((root, float(p.eval(root))))
    w_star = min(v for _, v in candidates)
    s0 = min(r for r, v in candidates if v <= w_star + tol_level)
    m = -float(p.eval(s0))

    flags["negative_global_minimum"] = AxiomCheck(
        passed=True, detail=f"s0={s0:.12g}, W(s0)={-m:.12g}"
    )

    # barrier: W' > 0 on ]s0, s0*(1 + BARRIER_FRACTION)]
    right = np.linspace(s0, s0 * (1.0 + BARRIER_FRACTION), 2000)[1:]
    dwr = np.asarray(p.deriv(right), dtype=float)
    bad = np.nonzero(dwr <= 0.0)[0]
    flags["right_barrier"] = AxiomCheck(
        passed=bad.size == 0,
        detail="W' > 0 on right neighborhood of s0" if bad.size == 0
        else f"W'({right[bad[0]]:.6g}) = {dwr[bad[0]]:.3e} <= 0",
        location=float(right[bad[0]]) if bad.size else None,
    )

    # s1crit: first positive zero of W' (W' > 0 near 0+ since W''(0) > 0)
    pos = s[1:]
    dpos = dws[1:]
    sign_change = np.nonzero((dpos[:-1] > 0) & (dpos[1:] <= 0))[0]
    if sign_change.size == 0:
        raise CertificationError("W' has no positive zero below the global minimum")
    j = sign_change[0]
    s1crit = _bisect(p.deriv, pos[j], pos[j + 1])

    # plateau edge: W' >= 0 on [0, a_plateau], first strict violation after it.
    # For generic wells W' turns negative immediately past s1crit and the two
    # coincide; a_plateau can exceed s1crit only if W' touches zero and
    # recovers.
    neg = np.nonzero(dpos < 0.0)[0]
    if neg.size == 0:
        a_plateau = s0
    else:
        k = neg[0]
        a_plateau = _bisect(p.deriv, pos[k - 1], pos[k]) if k > 0 else 0.0

    # w_minus: min of W' on [0, s0], polished by golden-section on the
    # bracketing samples
    from scipy.optimize import minimize_scalar

    in_range = pos <= s0
    i_wm = int(np.argmin(dpos[in_range]))
    s_wm = pos[in_range][i_wm]
    bracket_lo = max(0.0, s_wm - (pos[1] - pos[0]) * 2)
    bracket_hi = min(s0, s_wm + (pos[1] - pos[0]) * 2)
    res = minimize_scalar(p.deriv, bounds=(bracket_lo, bracket_hi), method="bounded",
                          options={"xatol": 1e-14})
    w_minus = float(min(res.fun, dpos[in_range][i_wm]))

    flags["landmark_ordering"] = AxiomCheck(
        passed=bool(0 < s1crit <= a_plateau < s0),
        detail=f"s1crit={s1crit:.9g}, a_plateau={a_plateau:.9g}, s0={s0:.9g}",
    )

    return PotentialCertificate(
        s0=float(s0),
        m=float(m),
        s1crit=float(s1crit),
        a_plateau=float(a_plateau),
        w_minus=w_minus,
        axiom_flags=flags,
    )
