"""Extremal zeros of scalar functions that may jump downward.

For h with h(a) <= 0 <= h(b) and

    liminf_{z -> x-} h(z) >= h(x) >= limsup_{z -> x+} h(z)

the zero set in [a, b] has a least and a greatest element.  Such an h can
oscillate between them, so plain bisection on [a, b] may land on an
interior zero.  Both routines therefore scan a uniform grid first and
bisect only inside the extremal sign-change cell; zeros narrower than one
scan cell can be missed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BracketError
from .trajectory import sample

DEFAULT_SCAN = 4096


@dataclass
class ZeroBracket:
    lo: float
    hi: float
    h_lo: float
    h_hi: float
    refinements: int = 0


def default_tol(a: float, b: float) -> float:
    return 1e-12 * (1.0 + abs(a) + abs(b))


def _scan_values(h: Callable, xs: np.ndarray) -> np.ndarray:
    return sample(h, xs)


def _validate(h, a, b, scan_n):
    if a > b:
        raise ValueError(f"need a <= b, got a={a}, b={b}")
    if scan_n < 1:
        raise ValueError("scan_n must be >= 1")
    ha, hb = float(h(a)), float(h(b))
    if not (ha <= 0.0 <= hb):
        raise BracketError(f"need h(a) <= 0 <= h(b), got h({a}) = {ha}, h({b}) = {hb}", ha, hb)
    return ha, hb


def _bisect(h, br: ZeroBracket, tol: float, keep_lo_nonpositive: bool) -> ZeroBracket:
    # invariant: h(lo) <= 0 < h(hi)  (greatest)  or  h(lo) < 0 <= h(hi)  (least)
    while br.hi - br.lo > tol:
        mid = br.lo + 0.5 * (br.hi - br.lo)
        if mid <= br.lo or mid >= br.hi:
            break
        hm = float(h(mid))
        left = hm <= 0.0 if keep_lo_nonpositive else hm < 0.0
        if left:
            br.lo, br.h_lo = mid, hm
        else:
            br.hi, br.h_hi = mid, hm
        br.refinements += 1
    return br


def greatest_zero(h: Callable, a: float, b: float, scan_n: int = DEFAULT_SCAN,
                  tol: float | None = None) -> float:
    """Greatest zero of h on [a, b], i.e. sup{x : h(x) <= 0}, to within ``tol``."""
    _, hb = _validate(h, a, b, scan_n)
    if hb == 0.0 or a == b:
        return float(b)
    tol = default_tol(a, b) if tol is None else tol
    xs = np.linspace(a, b, scan_n + 1)
    xs[0], xs[-1] = a, b
    hv = _scan_values(h, xs)
    hv[-1] = hb
    k = int(np.flatnonzero(hv <= 0.0)[-1])
    br = _bisect(h, ZeroBracket(xs[k], xs[k + 1], hv[k], hv[k + 1]), tol, keep_lo_nonpositive=True)
    return float(br.lo)


def least_zero(h: Callable, a: float, b: float, scan_n: int = DEFAULT_SCAN,
               tol: float | None = None) -> float:
    """Least zero of h on [a, b], i.e. inf{x : h(x) >= 0}, to within ``tol``."""
    ha, _ = _validate(h, a, b, scan_n)
    if ha == 0.0 or a == b:
        return float(a)
    tol = default_tol(a, b) if tol is None else tol
    xs = np.linspace(a, b, scan_n + 1)
    xs[0], xs[-1] = a, b
    hv = _scan_values(h, xs)
    hv[0] = ha
    k = int(np.flatnonzero(hv >= 0.0)[0])
    br = _bisect(h, ZeroBracket(xs[k - 1], xs[k], hv[k - 1], hv[k]), tol, keep_lo_nonpositive=False)
    return float(br.hi)
