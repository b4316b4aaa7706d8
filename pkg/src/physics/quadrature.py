"""
Quadrature helpers shared by the kernel oracles and the pre-limit evaluator.

scipy.integrate.quad works on real integrands, so complex integrals are split
into real and imaginary parts. Non-convergence is reported through
QuadratureError only when the error estimate is far outside the requested
tolerance; milder warnings are logged and counted.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from src.algebra.errors import QuadratureError
from src.app import metrics

logger = logging.getLogger(__name__)

SUBDIV_LIMIT = 500
# an error estimate this many times above tolerance is a failure, not a warning
FAILURE_FACTOR = 100.0


def _quad_part(func, a, b, epsrel, epsabs, points, limit):
    kwargs = dict(epsrel=epsrel, epsabs=epsabs, limit=limit, full_output=1)
    if points is not None and len(points) and np.isfinite(a) and np.isfinite(b):
        kwargs["points"] = points
    out = integrate.quad(func, a, b, **kwargs)
    message = out[3] if len(out) > 3 else None
    return out[0], out[1], message


def complex_quad(
    func: Callable[[float], complex],
    a: float,
    b: float,
    routine: str,
    epsrel: float = 1e-8,
    epsabs: float = 1e-14,
    points: Optional[Sequence[float]] = None,
    limit: int = SUBDIV_LIMIT,
) -> complex:
    """
    Adaptive quadrature of a complex scalar function on [a, b].

    Args:
        func: Integrand returning a complex number
        a, b: Limits (may be infinite; ``points`` is then ignored)
        routine: Name used in logs, metrics and errors
        epsrel, epsabs: Tolerances handed to scipy for each part
        points: Interior break points (peaks, kinks)

    Returns:
        The integral

    Raises:
        QuadratureError: if an error estimate exceeds FAILURE_FACTOR times the
                         requested tolerance
    """
    metrics.quadrature_calls_total.labels(routine=routine).inc()
    if points is not None:
        points = sorted(float(x) for x in points if a < x < b)

    re_val, re_err, re_msg = _quad_part(lambda x: np.real(func(x)), a, b, epsrel, epsabs, points, limit)
    im_val, im_err, im_msg = _quad_part(lambda x: np.imag(func(x)), a, b, epsrel, epsabs, points, limit)
    value = complex(re_val, im_val)
    error = float(np.hypot(re_err, im_err))

    if re_msg or im_msg:
        metrics.quadrature_failures_total.labels(routine=routine).inc()
        allowed = FAILURE_FACTOR * max(epsrel * abs(value), epsabs)
        context = {"routine": routine, "estimate": repr(value), "abserr": error}
        if error > allowed:
            logger.error("Quadrature failed", extra=context)
            raise QuadratureError(
                f"{routine}: error estimate {error:.3e} exceeds {allowed:.3e} ({re_msg or im_msg})",
                routine=routine,
                estimate=value,
                error=error,
            )
        logger.warning("Quadrature reported non-convergence within tolerance", extra=context)
    return value


def panel_nodes(a: float, b: float, n_panels: int, order: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of a composite Gauss-Legendre rule with ``n_panels`` equal panels."""
    if n_panels < 1:
        raise ValueError(f"need at least one panel, got {n_panels}")
    x, w = leggauss(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def gauss_panels(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    n_panels: int,
    order: int = 16,
) -> np.ndarray:
    """
    Composite Gauss-Legendre integral of a vectorized integrand.

    ``func`` is called once with every node and may return an array of shape
    (n_nodes, ...) so several integrals share nodes.
    """
    nodes, weights = panel_nodes(a, b, n_panels, order)
    values = np.asarray(func(nodes))
    return np.tensordot(weights, values, axes=([0], [0]))


def richardson(values: Sequence[complex], ratio: float = 2.0) -> Tuple[complex, List[List[complex]]]:
    """
    Richardson table for estimates taken at h, h/ratio, h/ratio^2, ...

    The error is assumed to be a power series in h starting at h^1, so column
    j removes the h^j term: T[i][j] = T[i][j-1] + (T[i][j-1] - T[i-1][j-1]) / (ratio^j - 1).

    Returns:
        (extrapolated value, the full lower-triangular table)
    """
    if not values:
        raise ValueError("richardson needs at least one estimate")
    table: List[List[complex]] = []
    for i, value in enumerate(values):
        row = [complex(value)]
        for j in range(1, i + 1):
            row.append(row[j - 1] + (row[j - 1] - table[i - 1][j - 1]) / (ratio ** j - 1.0))
        table.append(row)
    return table[-1][-1], table


def log_richardson(values: Sequence[complex], eta0: float, ratio: float = 2.0) -> complex:
    """
    Extrapolate estimates at eta0, eta0/ratio, ... when the error starts with eta log(eta).

    The error model is a eta log(eta) + b eta + c eta^2 + ..., with as many
    terms as there are estimates; the limit is the constant of the exact fit.
    A Lorentzian of width eta across a kink of the rate (different slopes on
    either side of the root) converges this way.
    """
    n = len(values)
    if n < 3:
        raise ValueError(f"log_richardson needs at least three estimates, got {n}")
    etas = eta0 / ratio ** np.arange(n)
    basis = np.column_stack([np.ones(n), etas * np.log(etas)] + [etas ** j for j in range(1, n - 1)])
    coefficients = np.linalg.solve(basis, np.asarray(values, dtype=complex))
    return complex(coefficients[0])


def regulated_limit(
    evaluate: Callable[[float], complex], eta0: float, levels: int = 3, log_term: bool = False
) -> Tuple[complex, List[List[complex]]]:
    """
    Evaluate a damped integral at eta0, eta0/2, ... and extrapolate eta -> 0.

    With ``log_term`` the error is fitted by log_richardson instead of the
    power-series table; the returned table then holds the raw estimates only.
    """
    if eta0 <= 0:
        raise ValueError(f"eta0 must be positive, got {eta0}")
    estimates = [evaluate(eta0 / 2 ** i) for i in range(levels)]
    if log_term:
        value, table = log_richardson(estimates, eta0), [list(estimates)]
    else:
        value, table = richardson(estimates)
    logger.debug("Richardson extrapolation", extra={"eta0": eta0, "estimate": repr(value), "log_term": log_term})
    return value, table


def lorentzian(delta, eta: float):
    """Damped version of 2 pi delta(Delta): int dtau e^{i Delta tau - eta |tau|} = 2 eta / (Delta^2 + eta^2)."""
    return 2.0 * eta / (np.square(delta) + eta * eta)
