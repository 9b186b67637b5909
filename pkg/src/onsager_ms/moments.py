"""Exponential moments of the polar measure.

The moments

    A_l(eta) = integral of exp(eta sin^2 theta) sin^l(theta)
               against sin^(k-1)(theta) cos^(n-k-1)(theta) dtheta

for even l are the atoms from which the intensity curve, the sign
quantities and the spectral blocks are all built.  Large positive eta is
handled by factoring out exp(eta), so the quadrature only ever sees
non-positive exponents; consumers that form products of moments should
work with the rescaled values to stay inside double-precision range.

At eta = 0 the moments reduce to Beta values,
A_l(0) = (1/2) B((k+l)/2, (n-k)/2), which the Gauss rule reproduces
exactly because the integrand is then a polynomial in sin^2(theta).
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np

from .quadrature import DEFAULT_ORDER, SphereParams, theta_rule

#: Largest |eta| for which unscaled moments stay inside double range.
ETA_MAX = 700.0


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not np.isfinite(eta):
        raise ValueError("eta must be finite")
    if abs(eta) > ETA_MAX:
        raise ValueError(f"|eta| must be <= {ETA_MAX}, got {eta}")
    return eta


def _check_l(l: int) -> int:
    if l < 0 or l % 2 != 0:
        raise ValueError(f"moment index l must be even and >= 0, got {l}")
    return l


def scaled_moments(
    params: SphereParams, eta: float, l_max: int = 8, order: int = DEFAULT_ORDER
) -> tuple[np.ndarray, float]:
    """Rescaled moments exp(-shift) * A_l for l = 0, 2, ..., l_max.

    Returns ``(values, shift)`` with shift = max(eta, 0) and
    A_l = exp(shift) * values[l // 2].  The rescaled values never
    overflow, so ratios and products of moments should be formed from
    them.  Unlike :func:`moment`, this accepts any finite eta.
    """
    eta = float(eta)
    if not np.isfinite(eta):
        raise ValueError("eta must be finite")
    _check_l(l_max)
    rule = theta_rule(params.n, params.k, order)
    t = rule.sin2
    shift = max(eta, 0.0)
    base = rule.weights * np.exp(eta * t - shift)
    powers = t[None, :] ** np.arange(l_max // 2 + 1)[:, None]
    return powers @ base, shift


def moment(
    params: SphereParams, eta: float, l: int, order: int = DEFAULT_ORDER
) -> float:
    """The moment A_l(eta) for even l, via the cached Gauss rule."""
    eta = _check_eta(eta)
    _check_l(l)
    vals, shift = scaled_moments(params, eta, l, order)
    return float(np.exp(shift) * vals[l // 2])


@dataclass(frozen=True)
class MomentVector:
    """Moments A_0, A_2, ..., A_{l_max} at a fixed eta.

    ``values`` maps the even index l to A_l(eta).  Entries are strictly
    positive and strictly decreasing in l (sin^2 < 1 on the open
    interval).
    """

    params: SphereParams
    eta: float
    values: Mapping[int, float]

    def value(self, l: int) -> float:
        try:
            return self.values[l]
        except KeyError:
            raise ValueError(f"moment A_{l} not present (have l <= {max(self.values)})")


def moment_vector(
    params: SphereParams, eta: float, l_max: int = 8, order: int = DEFAULT_ORDER
) -> MomentVector:
    """Compute A_0 .. A_{l_max} at once from a single exponential pass.

    ``l_max`` must be even and at least 8 so downstream consumers always
    find the moments they need.  Positivity and strict decrease in l are
    checked; violation signals a broken quadrature rule.
    """
    if l_max < 8:
        raise ValueError(f"need l_max >= 8, got {l_max}")
    eta = _check_eta(eta)
    _check_l(l_max)
    vals, shift = scaled_moments(params, eta, l_max, order)
    scale = np.exp(shift)
    if not np.all(vals > 0):
        raise RuntimeError("non-positive moment; quadrature rule is unusable here")
    if not np.all(np.diff(vals) < 0):
        raise RuntimeError("moments not decreasing in l; quadrature failure")
    values = {2 * i: float(scale * v) for i, v in enumerate(vals)}
    return MomentVector(params, eta, MappingProxyType(values))


def recurrence_residual(mv: MomentVector, l: int) -> float:
    """Residual of the moment recurrence at index l.

    The moments satisfy
        A_{l+2} - A_{l+4} = ((n+l) A_{l+2} - (k+l) A_l) / (2 eta),
    obtained by integrating the eta-derivative identity by parts.  The
    returned residual is the difference of the two sides; away from
    eta = 0 it should vanish to quadrature accuracy relative to A_l.

    The identity divides by eta, so eta = 0 is a domain error (use the
    Beta closed forms there) and tiny |eta| amplifies roundoff; callers
    should treat |eta| below about 1e-4 as ill-conditioned.
    """
    if mv.eta == 0.0:
        raise ValueError("recurrence divides by eta; use Beta closed forms at eta=0")
    _check_l(l)
    al = mv.value(l)
    al2 = mv.value(l + 2)
    al4 = mv.value(l + 4)
    n, k = mv.params.n, mv.params.k
    return float(al2 - al4 - ((n + l) * al2 - (k + l) * al) / (2.0 * mv.eta))


#: |eta| below this makes the recurrence check numerically meaningless.
RECURRENCE_ETA_FLOOR = 1e-4


@dataclass(frozen=True)
class MomentCheck:
    """Outcome of validating a moment vector against the recurrence."""

    max_rel_residual: float
    checked: tuple[int, ...]
    skipped_small_eta: bool


def validate_moment_vector(mv: MomentVector, l_values=(0, 2, 4)) -> MomentCheck:
    """Relative recurrence residuals max'd over the given l values.

    For |eta| < RECURRENCE_ETA_FLOOR the check is skipped (flagged), since
    the recurrence divides by eta and the residual is dominated by
    cancellation noise there.
    """
    if abs(mv.eta) < RECURRENCE_ETA_FLOOR:
        return MomentCheck(0.0, (), True)
    worst = 0.0
    checked = []
    for l in l_values:
        res = abs(recurrence_residual(mv, l)) / mv.value(l)
        worst = max(worst, res)
        checked.append(l)
    return MomentCheck(worst, tuple(checked), False)
