"""Panel quadrature for radial integrals with power-law endpoint singularities.

All spectral/kernel integrals in this package reduce to one of two shapes:

* ``int_0^inf r^alpha h(r) dr`` with ``alpha > -1``, ``h`` smooth and bounded
  near 0, decaying either like a Gaussian or like a pure power at infinity;
* 1-d line integrals of piecewise-smooth integrands with an integrable
  ``|z|^-beta`` weight and a finite set of known kink points.

Strategy: a single Gauss-Jacobi panel absorbs the ``r^alpha`` endpoint weight
exactly (no head truncation error), log-spaced Gauss-Legendre panels cover the
bulk, tails are cut where an analytic bound certifies the remainder, and the
whole rule is re-run at doubled resolution until the relative change is below
the requested tolerance.  Oscillatory factors (Bessel-type) are handled by
capping panel widths at a fraction of the oscillation period.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


class QuadratureError(RuntimeError):
    """Raised when a panel rule fails to converge; carries diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@lru_cache(maxsize=64)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


@lru_cache(maxsize=256)
def _jacgauss(order: int, alpha: float):
    # weight (1-x)^0 (1+x)^alpha on [-1, 1]; alpha sits at the left endpoint
    nodes, weights = roots_jacobi(order, 0.0, alpha)
    return nodes, weights


def gauss_panels(f, edges, order=12):
    """Composite Gauss-Legendre over consecutive ``edges``; one vector call."""
    edges = np.asarray(edges, dtype=float)
    x, w = _leggauss(order)
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    nodes = 0.5 * (b - a) * (x[None, :] + 1.0) + a
    weights = 0.5 * (b - a) * w[None, :]
    vals = f(nodes.ravel()).reshape(nodes.shape)
    return float(np.sum(vals * weights))


def power_panel(h, upper, alpha, order=16):
    """``int_0^upper r^alpha h(r) dr`` by Gauss-Jacobi; exact head handling."""
    nodes, weights = _jacgauss(order, float(alpha))
    r = 0.5 * upper * (nodes + 1.0)
    scale = (0.5 * upper) ** (alpha + 1.0)
    return scale * float(np.dot(weights, h(r)))


def _log_edges(lo, hi, per_decade):
    n = max(2, int(np.ceil(np.log10(hi / lo) * per_decade)))
    return np.geomspace(lo, hi, n + 1)


def _cap_widths(edges, max_width):
    """Split panels wider than ``max_width`` (linear subdivision)."""
    out = [edges[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a > max_width:
            k = int(np.ceil((b - a) / max_width))
            out.extend(np.linspace(a, b, k + 1)[1:])
        else:
            out.append(b)
    return np.asarray(out)


def radial_integral(h, alpha, *, scale, tail, tol=1e-6, osc_period=None,
                    name="radial"):
    """Evaluate ``int_0^inf r^alpha h(r) dr``.

    Parameters
    ----------
    h : callable
        Vectorized, smooth on (0, inf) with a finite limit at 0.  Must be
        evaluable without cancellation for arguments down to ~1e-300.
    alpha : float
        Endpoint exponent, > -1.  Absorbed exactly by a Jacobi panel.
    scale : float
        Radius below which ``h`` is effectively constant; sets the Jacobi
        panel and the start of the log-panel ladder.
    tail : tuple
        ``("gauss", s)``   -- ``|h(r)|`` <= const * exp(-(r/s)^2 / 2) factors
        beyond ``~s``; the rule integrates to ``13 s`` where the factor is
        below 1e-36.
        ``("power", p, A)`` -- ``|r^alpha h(r)| <= A r^p`` with ``p < -1`` for
        large r; the cut is placed where the analytic remainder
        ``A hi^(p+1)/|p+1|`` is below ``0.05 tol`` of the running estimate.
    osc_period : float, optional
        Period of an oscillatory factor in ``h``; panel widths are capped at
        a third of it so the rule resolves every oscillation.
    """
    if alpha <= -1:
        raise ValueError(f"endpoint exponent must exceed -1, got {alpha}")
    scale = float(scale)
    if osc_period is not None:
        x1 = min(scale, osc_period / 4.0)
    else:
        x1 = scale

    kind = tail[0]
    if kind == "gauss":
        hi = max(13.0 * tail[1], 4.0 * x1)
    elif kind == "power":
        hi = max(1e3 * x1, 1e2 * scale)
    else:
        raise ValueError(f"unknown tail kind {kind!r}")

    def assemble(per_decade, order_j, order_l, hi_cur):
        total = power_panel(h, x1, alpha, order=order_j)
        edges = _log_edges(x1, hi_cur, per_decade)
        if osc_period is not None:
            edges = _cap_widths(edges, osc_period / 3.0)
        if edges.size > 60000:
            raise QuadratureError(
                f"{name}: oscillation forces {edges.size} panels",
                {"edges": int(edges.size), "hi": hi_cur, "period": osc_period})
        total += gauss_panels(lambda r: r ** alpha * h(r), edges, order=order_l)
        return total

    est = assemble(3, 16, 12, hi)
    if kind == "power":
        p, amp = tail[1], tail[2]
        floor = 0.05 * tol * max(abs(est), 1e-300)
        hi_needed = (floor * abs(p + 1.0) / amp) ** (1.0 / (p + 1.0))
        if hi_needed > hi:
            hi = hi_needed
            est = assemble(3, 16, 12, hi)

    prev = est
    for per_decade, oj, ol in ((6, 24, 16), (12, 32, 24), (24, 48, 32)):
        cur = assemble(per_decade, oj, ol, hi)
        denom = max(abs(cur), abs(prev), 1e-300)
        if abs(cur - prev) <= tol * denom:
            return cur
        prev = cur
    raise QuadratureError(
        f"{name}: no convergence to rel tol {tol}",
        {"last": prev, "current": cur, "rel_change": abs(cur - prev) / denom,
         "hi": hi, "tol": tol})


def refine_until(value_fn, levels, tol, name="sequence"):
    """Run ``value_fn(level)`` over ``levels`` until successive values agree.

    Generic Richardson-style convergence loop for bespoke multi-dimensional
    rules that do not fit :func:`radial_integral`.
    """
    prev = value_fn(levels[0])
    for lev in levels[1:]:
        cur = value_fn(lev)
        denom = max(abs(cur), abs(prev), 1e-300)
        if abs(cur - prev) <= tol * denom:
            return cur
        prev = cur
    raise QuadratureError(
        f"{name}: no convergence to rel tol {tol}",
        {"last": prev, "levels": list(levels), "tol": tol})
