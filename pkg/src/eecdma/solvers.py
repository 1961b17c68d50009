"""Bracketed scalar root finding used throughout the package.

Every scalar equation in this codebase (target-SINR roots, receive-power
balances, capped-user SINR fixed points, CDF inversion) is monotone on the
branch of interest, so plain bisection with bracket expansion is both
sufficient and the most robust choice.
"""

from __future__ import annotations

from typing import Callable


class BracketError(RuntimeError):
    """No sign change could be established for the requested root."""


def expand_upper(f: Callable[[float], float], lo: float, hi: float,
                 max_doublings: int = 200) -> float:
    """Double ``hi`` until ``f`` changes sign relative to ``f(lo)``.

    ``f(lo)`` and ``f(hi)`` must end up with opposite (or zero) signs.
    """
    flo = f(lo)
    if flo == 0.0:
        return lo
    for _ in range(max_doublings):
        if flo * f(hi) <= 0.0:
            return hi
        hi *= 2.0
    raise BracketError("no sign change found while expanding the bracket")


def bisect_root(f: Callable[[float], float], lo: float, hi: float,
                rtol: float = 1e-12, max_iter: int = 300) -> float:
    """Bisection for the root of ``f`` inside [lo, hi].

    Stops when the bracket width falls below ``rtol`` relative to the
    midpoint (with an absolute floor of ``rtol``), or on an exact zero.
    """
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise BracketError("f(lo) and f(hi) have the same sign")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
        if hi - lo <= rtol * max(abs(lo), abs(hi), 1e-300):
            break
    return 0.5 * (lo + hi)
