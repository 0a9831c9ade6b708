"""Scalar special-function kernels behind the closed-form engine.

Everything here is a pure function with an explicit accuracy contract.  The
test suite checks each routine against an independent oracle (arbitrary
precision series, quadrature of an integral representation, or a recurrence),
so the implementations stay deliberately simple: plain power series with
rigorous tail bounds, plus two escape hatches for the regimes where a series
is hopeless in double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy import special as sp

__all__ = [
    "ConvergenceError",
    "ConditioningError",
    "ParameterPatternError",
    "EvalResult",
    "log_gamma",
    "reg_lower_gamma",
    "reg_upper_gamma",
    "pochhammer",
    "hyp2f2",
    "hyp2f1",
    "bessel_i",
    "meijer_g_3123",
]

# Alternating 2F2 series lose roughly 0.87*|z| decimal digits to cancellation,
# so the series is only trusted on a short leash; beyond it the host-integral
# reduction below takes over.
_SERIES_NEG_LIMIT = 8.0
_CANCEL_GUARD = 1e6


class ConvergenceError(RuntimeError):
    """Series or quadrature failed to reach the requested tolerance."""


class ConditioningError(RuntimeError):
    """Two independent evaluation paths disagree beyond tolerance."""


class ParameterPatternError(ValueError):
    """Meijer-G parameters outside the two supported patterns."""


@dataclass(frozen=True)
class EvalResult:
    """Value of a kernel evaluation plus an error estimate.

    ``abs_error_bound`` is a bound on the truncation / quadrature error,
    ``terms_used`` counts series terms (0 for non-series paths) and
    ``method`` records which path produced the value.
    """

    value: float
    abs_error_bound: float
    terms_used: int
    method: str = "series"

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ConvergenceError(f"non-finite kernel value: {self.value!r}")
        if self.abs_error_bound < 0.0:
            raise ValueError("abs_error_bound must be nonnegative")


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if x <= 0.0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def reg_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a)."""
    if a <= 0.0:
        raise ValueError(f"reg_lower_gamma requires a > 0, got a={a}")
    if x < 0.0:
        raise ValueError(f"reg_lower_gamma requires x >= 0, got x={x}")
    return float(sp.gammainc(a, x))


def reg_upper_gamma(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0.0:
        raise ValueError(f"reg_upper_gamma requires a > 0, got a={a}")
    if x < 0.0:
        raise ValueError(f"reg_upper_gamma requires x >= 0, got x={x}")
    return float(sp.gammaincc(a, x))


def pochhammer(x: float, n: int) -> float:
    """Rising factorial (x)_n = x (x+1) ... (x+n-1).

    Large n with x > 0 goes through the log domain; otherwise the direct
    product is exact enough and handles negative x.
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"pochhammer requires integer n >= 0, got {n}")
    n = int(n)
    if n == 0:
        return 1.0
    factors = x + np.arange(n, dtype=float)
    if np.any(factors == 0.0):
        raise ValueError(f"pochhammer({x}, {n}) hits a zero factor (pole crossing)")
    if x > 0.0 and n > 30:
        return math.exp(math.lgamma(x + n) - math.lgamma(x))
    return float(np.prod(factors))


def _hyp_series(num, den, z, rtol, max_terms):
    """Generalized hypergeometric power series with compensated summation.

    Returns (sum, tail_bound, terms, max_partial).  The tail bound comes from
    a geometric majorant of the term ratio once the ratio is provably < 3/4
    and shrinking, so it is rigorous rather than heuristic.
    """
    total = 1.0
    comp = 0.0
    term = 1.0
    max_partial = 1.0
    k_safe = 2.0 * abs(z) + sum(abs(p) for p in num) + sum(abs(p) for p in den) + 10.0
    for k in range(max_terms):
        ratio = z / (k + 1.0)
        for p in num:
            ratio *= p + k
        for q in den:
            ratio /= q + k
        term *= ratio
        if term == 0.0:  # terminating series (nonpositive-integer numerator)
            return total, 0.0, k + 1, max_partial
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        max_partial = max(max_partial, abs(total))
        if k >= k_safe:
            nxt = abs(z) / (k + 2.0)
            for p in num:
                nxt *= abs(p + k + 1.0)
            for q in den:
                nxt /= abs(q + k + 1.0)
            # Ratio limit: |z|/k for balanced series, |z| for the Gauss case;
            # the (1 + 6/k) slack covers the approach from above.
            limit = abs(z) if len(num) == len(den) + 1 else 0.0
            rhat = max(nxt, limit) * (1.0 + 6.0 / (k + 1.0))
            if rhat < 1.0 - 1e-6:
                tail = abs(term) * rhat / (1.0 - rhat)
                if tail <= rtol * max(abs(total), 1e-300):
                    return total, tail, k + 1, max_partial
    raise ConvergenceError(
        f"hypergeometric series exceeded {max_terms} terms (z={z})"
    )


def _gamma_product_pattern(a1, a2, b1, b2):
    """Detect the 2F2(p, q; p+1, q+1; z) offset pattern, return (p, q) or None."""
    tol = 1e-12
    if abs(b1 - a1 - 1.0) < tol and abs(b2 - a2 - 1.0) < tol:
        p, q = a1, a2
    elif abs(b1 - a2 - 1.0) < tol and abs(b2 - a1 - 1.0) < tol:
        p, q = a2, a1
    else:
        return None
    if p <= 0.0 or q <= 0.0 or abs(q - p) < 1e-9:
        return None
    return (min(p, q), max(p, q))


def _hyp2f2_gamma_repr(p: float, q: float, z: float) -> EvalResult:
    """2F2(p, q; p+1, q+1; z) for z < 0 via incomplete-gamma reduction.

    Partial fractions give pq/((p+n)(q+n)) = pq/(q-p) * (1/(p+n) - 1/(q+n)),
    and each sub-series is gamma(s, y)/y**s with y = -z.  Exact, stable for
    any y, and immune to the alternating-series cancellation.
    """
    y = -z
    lp = math.lgamma(p) + math.log(sp.gammainc(p, y)) - p * math.log(y)
    lq = math.lgamma(q) + math.log(sp.gammainc(q, y)) - q * math.log(y)
    # gamma(s,y)/y^s is strictly decreasing in s, so lq < lp and the log1p
    # form keeps full precision even when the two terms nearly cancel.
    value = (p * q / (q - p)) * math.exp(lp) * (-math.expm1(lq - lp))
    return EvalResult(value, abs(value) * 1e-12, 0, method="gamma_repr")


def hyp2f2(a1: float, a2: float, b1: float, b2: float, z: float,
           rtol: float = 1e-12, max_terms: int = 10 ** 6) -> EvalResult:
    """Generalized hypergeometric 2F2(a1, a2; b1, b2; z).

    Power series with a rigorous tail bound.  For strongly negative z the
    alternating series is abandoned: when the parameters match the
    (p, q; p+1, q+1) family that all the outage expressions use, the exact
    incomplete-gamma representation of the host integral is evaluated
    instead and flagged in ``method``.
    """
    for b in (b1, b2):
        if b <= 0.0 and float(b).is_integer():
            raise ValueError(f"denominator parameter {b} is a nonpositive integer")
    if z == 0.0:
        return EvalResult(1.0, 0.0, 0)
    pattern = _gamma_product_pattern(a1, a2, b1, b2)
    if z < -_SERIES_NEG_LIMIT and pattern is not None:
        return _hyp2f2_gamma_repr(*pattern, z)
    total, tail, terms, max_partial = _hyp_series((a1, a2), (b1, b2), z, rtol, max_terms)
    if abs(total) * _CANCEL_GUARD < max_partial:
        if z < 0.0 and pattern is not None:
            return _hyp2f2_gamma_repr(*pattern, z)
        raise ConvergenceError(
            f"2F2 series cancellation: partial sums reached {max_partial:.3e} "
            f"against result {total:.3e}"
        )
    return EvalResult(total, tail, terms)


def hyp2f1(a: float, b: float, c: float, z: float,
           rtol: float = 1e-12, max_terms: int = 10 ** 6) -> EvalResult:
    """Gauss hypergeometric 2F1(a, b; c; z) for |z| < 1 by direct series."""
    if c <= 0.0 and float(c).is_integer():
        raise ValueError(f"denominator parameter {c} is a nonpositive integer")
    if abs(z) >= 1.0:
        raise ValueError(f"hyp2f1 series requires |z| < 1, got z={z}")
    if z == 0.0:
        return EvalResult(1.0, 0.0, 0)
    total, tail, terms, max_partial = _hyp_series((a, b), (c,), z, rtol, max_terms)
    if abs(total) * _CANCEL_GUARD < max_partial:
        raise ConvergenceError("2F1 series cancellation")
    return EvalResult(total, tail, terms)


def bessel_i(nu: float, x: float, rtol: float = 1e-11, max_terms: int = 20000) -> float:
    """Modified Bessel function of the first kind I_nu(x), ascending series.

    Valid for x in [0, ~50]; negative integer orders use I_{-n} = I_n and
    negative non-integer orders go through the reciprocal gamma, which is
    finite there.
    """
    if x < 0.0:
        raise ValueError(f"bessel_i requires x >= 0, got {x}")
    if float(nu).is_integer():
        nu = abs(float(nu))
    if x == 0.0:
        if nu == 0.0:
            return 1.0
        if nu > 0.0:
            return 0.0
        raise ValueError(f"I_nu(0) diverges for negative non-integer nu={nu}")
    half = 0.5 * x
    term = math.exp(nu * math.log(half)) * float(sp.rgamma(nu + 1.0))
    total = term
    for k in range(max_terms):
        term *= half * half / ((k + 1.0) * (k + nu + 1.0))
        total += term
        if k + 1 >= half and abs(term) <= rtol * abs(total):
            return total
    raise ConvergenceError(f"bessel_i series exceeded {max_terms} terms (x={x})")


# ---------------------------------------------------------------------------
# Meijer-G, restricted to the two instances the ergodic-rate expression needs:
#   G^{3,1}_{2,3}( z | a1, 1 ; a1, 0, b3 )  with  a1 in {0, delta2}, b3 > a1.
# ---------------------------------------------------------------------------

def _meijer_check_pattern(b_top, b2, b3, a1, a2):
    if abs(a2 - 1.0) > 1e-12 or abs(b2) > 1e-12 or abs(b_top - a1) > 1e-12:
        raise ParameterPatternError(
            f"unsupported Meijer-G parameters: a=({a1},{a2}) b=({b_top},{b2},{b3})"
        )
    if a1 < 0.0 or a1 >= 1.0 or b3 <= a1:
        raise ParameterPatternError(
            f"unsupported Meijer-G parameters: a1={a1}, b3={b3}"
        )


def _meijer_contour(bs, a1, a2, z, rtol=1e-12):
    """Mellin-Barnes integral along a vertical line, evaluated by quadrature.

    The integrand decays like exp(-3*pi*|t|/2), so a finite window loses
    nothing, and conjugate symmetry halves the work.
    """
    c0 = 0.5 * ((a1 - 1.0) + min(bs))
    lnz = math.log(z)

    def f(t):
        s = complex(c0, t)
        w = (sp.loggamma(bs[0] - s) + sp.loggamma(bs[1] - s) + sp.loggamma(bs[2] - s)
             + sp.loggamma(1.0 - a1 + s) - sp.loggamma(a2 - s) + s * lnz)
        return np.exp(w).real

    scale = abs(f(0.0)) + 1e-300
    val, err = integrate.quad(f, 0.0, 48.0, limit=4000,
                              epsabs=scale * 1e-14, epsrel=rtol)
    return val / math.pi, abs(err) / math.pi


def _meijer_slater(bs, a1, a2, z):
    """Slater expansion over simple poles: three 2F2 terms.

    Only valid when the b parameters are pairwise separated by non-integers;
    callers check that first.
    """
    total = 0.0
    max_term = 0.0
    terms_used = 0
    for h in range(3):
        bh = bs[h]
        others = [bs[j] for j in range(3) if j != h]
        coeff = (sp.gamma(others[0] - bh) * sp.gamma(others[1] - bh)
                 * sp.gamma(1.0 + bh - a1) / sp.gamma(a2 - bh))
        f = hyp2f2(1.0 + bh - a1, 1.0 + bh - a2,
                   1.0 + bh - others[0], 1.0 + bh - others[1], z)
        term = coeff * z ** bh * f.value
        terms_used += f.terms_used
        total += term
        max_term = max(max_term, abs(term))
    if abs(total) * 1e8 < max_term:
        raise ConditioningError("Slater expansion lost too many digits")
    return total, max_term * 1e-13, terms_used


def _slater_applicable(bs, z):
    if z > 30.0:  # positive-argument 2F2 growth would start cancelling
        return False
    for i in range(3):
        for j in range(i + 1, 3):
            d = abs(bs[i] - bs[j])
            if abs(d - round(d)) < 1e-6:
                return False
    return True


def meijer_g_3123(b_top: float, b2: float, b3: float, a1: float, a2: float,
                  z: float, method: str = "auto") -> EvalResult:
    """G^{3,1}_{2,3}( z | a1, a2 ; b_top, b2, b3 ) for the rate-integral family.

    ``method``:
      * ``auto``    - Slater expansion when the poles are simple, otherwise
                      Mellin-Barnes contour quadrature,
      * ``slater``  / ``contour`` - force one path,
      * ``dual``    - evaluate both and raise ConditioningError if they
                      disagree by more than 1e-5 relative.
    """
    _meijer_check_pattern(b_top, b2, b3, a1, a2)
    if z <= 0.0:
        raise ValueError(f"meijer_g_3123 requires z > 0, got {z}")
    bs = (b_top, b2, b3)
    can_slater = _slater_applicable(bs, z)
    if method == "slater" or (method in ("auto", "dual") and can_slater):
        if not can_slater:
            raise ParameterPatternError("coinciding poles: Slater expansion invalid")
        try:
            value, bound, terms = _meijer_slater(bs, a1, a2, z)
        except ConditioningError:
            if method == "slater":
                raise
            value, err = _meijer_contour(bs, a1, a2, z)
            return EvalResult(value, err, 0, method="contour")
        if method == "dual":
            ref, ref_err = _meijer_contour(bs, a1, a2, z)
            rel = abs(value - ref) / max(abs(ref), 1e-300)
            if rel > 1e-5:
                raise ConditioningError(
                    f"Slater/contour disagree by {rel:.2e} at z={z}"
                )
            bound = max(bound, abs(value - ref))
        return EvalResult(value, bound, terms, method="slater")
    value, err = _meijer_contour(bs, a1, a2, z)
    return EvalResult(value, err, 0, method="contour")
