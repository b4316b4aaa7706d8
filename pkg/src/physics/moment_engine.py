"""
Vacuum correlators of the collective field operators and of their limit.

limit_moment evaluates the limit correlator as nested energy-shell sums over
the non-crossing pairing, outermost pairs first. Every pair h sees the
particle momentum l_h = p - hbar * (sum of momenta of the pairs enclosing it).

limit_moment_oscillatory integrates the same object in its explicit phase
form, with every tau-integral damped by e^{-eta|tau|} and eta -> 0 by
Richardson extrapolation.

prelimit_moment works at finite coupling lambda. The collective creator is
    lambda int_0^{T/lambda^2} dtau int dk g(k) e^{i omega(k) tau} a+(k) W(-(tau/m) k, -k)
and its adjoint the annihilator; every Wick contraction of the reservoir
contributes, crossing ones included.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.algebra.errors import DimensionMismatch, UnsupportedModel
from src.algebra.partitions import (
    EpsilonSeq,
    Pair,
    Pairing,
    Role,
    children,
    enclosing_pairs,
    enumerate_pairings,
    is_noncrossing,
    momentum_balance,
    wigner_pairing,
)
from src.algebra.weyl import field_vertex, momentum_phase
from src.app import metrics
from src.physics.quadrature import complex_quad, gauss_panels, lorentzian, panel_nodes, regulated_limit
from src.physics.spectral_model import (
    Dispersion,
    FormFactor,
    LinearDispersion,
    PhysParams,
    ShellRoot,
    bose_kernel,
    characteristic_eta,
    delta_energy,
    shell_points,
    shell_roots,
    time_kernel,
)

logger = logging.getLogger(__name__)

MAX_PRELIMIT_PAIRS = 2
MAX_OSCILLATORY_PAIRS = 2
# half-width, in widths of conj(g_mbar) g_m, of the k-window used at finite coupling
PRELIMIT_WIDTHS = 6.0
GAUSS_ORDER = 16
OUTER_CHUNK = 32


@dataclass(frozen=True, eq=False)
class CorrelatorSpec:
    """
    <Psi, prod_j C^{eps_j}(g_j, T_j) Psi> evaluated on the particle momentum eigenstate |p>.

    Attributes:
        eps: Creator/annihilator pattern, position 1 rightmost
        times: T_j >= 0, one per position
        factors: Form factor g_j, one per position
        probe_p: Particle momentum p
    """

    eps: EpsilonSeq
    times: Tuple[float, ...]
    factors: Tuple[FormFactor, ...]
    probe_p: np.ndarray

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        factors = tuple(self.factors)
        if not len(self.eps) == len(times) == len(factors):
            raise DimensionMismatch(
                f"epsilon of length {len(self.eps)} with {len(times)} times and {len(factors)} form factors"
            )
        if any(t < 0 for t in times):
            raise ValueError(f"times must be non-negative, got {times}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "probe_p", np.atleast_1d(np.asarray(self.probe_p, dtype=float)))

    @property
    def p(self) -> float:
        return float(self.probe_p[0])

    def time(self, position: int) -> float:
        return self.times[position - 1]

    def factor(self, position: int) -> FormFactor:
        return self.factors[position - 1]

    def pair_factor(self, pair: Pair) -> FormFactor:
        """conj(g_mbar) g_m."""
        mbar, m = pair
        return self.factor(mbar).conj() * self.factor(m)

    def time_factor(self, pairing: Pairing) -> float:
        """prod over pairs of T_mbar ^ T_m."""
        return float(np.prod([min(self.time(mbar), self.time(m)) for mbar, m in pairing.pairs]))

    def with_probe(self, p) -> "CorrelatorSpec":
        return replace(self, probe_p=p)


def scale_times(spec: CorrelatorSpec, s: float) -> CorrelatorSpec:
    if s < 0:
        raise ValueError(f"time scale must be non-negative, got {s}")
    return replace(spec, times=tuple(s * t for t in spec.times))


@dataclass(frozen=True)
class ShellRecord:
    """Roots used for one pair at one particle momentum."""

    pair: Pair
    l: float
    roots: Tuple[ShellRoot, ...]


@dataclass(frozen=True)
class MomentResult:
    value: complex
    time_factor: float
    pairing: Optional[Pairing] = None
    shell_data: Tuple[ShellRecord, ...] = ()


def _require_1d(pp: PhysParams, what: str) -> None:
    if pp.dim != 1:
        raise UnsupportedModel(f"{what} is implemented for d=1, configured d={pp.dim}")


def limit_moment(spec: CorrelatorSpec, pp: PhysParams, disp: Dispersion) -> MomentResult:
    """
    Limit correlator: (prod T_mbar ^ T_m) x nested sum over shell roots of
    prod_h 2 pi conj(g_mbar_h)(k_h) g_m_h(k_h) / |dDelta/dk|(l_h, k_h).
    """
    _require_1d(pp, "limit_moment")
    metrics.moment_evaluations_total.labels(route="theorem1").inc()
    pairing = wigner_pairing(spec.eps)
    if pairing is None:
        return MomentResult(0j, 0.0)

    records: List[ShellRecord] = []

    def level(h: Optional[Pair], l: float) -> complex:
        value = 1.0 + 0j
        for child in children(pairing, h):
            roots = shell_roots(pp, disp, l)
            records.append(ShellRecord(child, l, tuple(roots)))
            F = spec.pair_factor(child)
            branch_sum = 0j
            for root in roots:
                weight = 2.0 * np.pi * F(root.k) / root.jacobian
                branch_sum += weight * level(child, l - pp.hbar * root.k)
            value *= branch_sum
        return value

    time_factor = spec.time_factor(pairing)
    value = time_factor * level(None, spec.p)
    logger.debug("Limit moment", extra={"p": spec.p, "value": repr(value)})
    return MomentResult(complex(value), time_factor, pairing, tuple(records))


def _explicit_rate(pp: PhysParams, disp: Dispersion, p: float, k, enclosing_ks: Sequence[float]):
    """omega(k) + (hbar/2m) k^2 - p k / m + (hbar/m) k sum_r k_r over the enclosing pairs."""
    k = np.asarray(k, dtype=float)
    shift = sum(enclosing_ks) if enclosing_ks else 0.0
    return disp.omega(np.abs(k)) + pp.recoil * k * k - p * k / pp.mass + pp.hbar * k * shift / pp.mass


def limit_moment_oscillatory(spec: CorrelatorSpec, pp: PhysParams, disp: Dispersion,
                             eta: Optional[float] = None, levels: int = 3) -> complex:
    """
    The limit correlator from its phase form, each tau-integral damped:
    int dtau e^{i rate tau - eta|tau|} = 2 eta / (rate^2 + eta^2), then eta -> 0.
    For omega = c|k| the extrapolation also fits the eta log(eta) term of the kink root.
    """
    _require_1d(pp, "limit_moment_oscillatory")
    pairing = wigner_pairing(spec.eps)
    if pairing is None:
        return 0j
    if pairing.n > MAX_OSCILLATORY_PAIRS:
        raise UnsupportedModel(f"oscillatory evaluation supports n <= {MAX_OSCILLATORY_PAIRS}, got {pairing.n}")
    p = spec.p
    enclosing = {h: enclosing_pairs(pairing, h) for h in pairing.pairs}
    epsrel = max(pp.quad_tol, 1e-9)

    def damped(eta_value: float) -> complex:
        def level(h: Optional[Pair], ks: Dict[Pair, float]) -> complex:
            value = 1.0 + 0j
            for child in children(pairing, h):
                F = spec.pair_factor(child)
                outer = [ks[r] for r in enclosing[child]]
                l_child = p - pp.hbar * sum(outer)
                a, b = F.window()

                def integrand(k, child=child, F=F, outer=outer):
                    rate = _explicit_rate(pp, disp, p, k, outer)
                    return F(k) * lorentzian(rate, eta_value) * level(child, {**ks, child: float(k)})

                value *= complex_quad(
                    integrand, a, b,
                    routine="limit_moment_oscillatory",
                    epsrel=epsrel,
                    points=shell_points(pp, disp, l_child),
                )
            return value

        return level(None, {})

    if eta is None:
        eta = min(characteristic_eta(pp, disp, spec.pair_factor(h), p) for h in children(pairing, None))
    value, _ = regulated_limit(damped, eta, levels, log_term=isinstance(disp, LinearDispersion))
    return complex(spec.time_factor(pairing) * value)


def bose_moment(eps: EpsilonSeq, times: Sequence[float], factors: Sequence[FormFactor], omega_probe: float,
                pp: PhysParams, disp: Dispersion) -> complex:
    """Responseless limit: Wick sum over all pairings of prod (T_mbar ^ T_m) (g_mbar|g_m)_omega."""
    if not len(eps) == len(times) == len(factors):
        raise DimensionMismatch("epsilon, times and form factors must have equal length")
    metrics.moment_evaluations_total.labels(route="bose").inc()
    kernels: Dict[Pair, complex] = {}
    total = 0j
    for pairing in enumerate_pairings(eps):
        term = 1.0 + 0j
        for mbar, m in pairing.pairs:
            if (mbar, m) not in kernels:
                kernels[(mbar, m)] = bose_kernel(pp, disp, omega_probe, factors[mbar - 1], factors[m - 1])
            term *= min(times[mbar - 1], times[m - 1]) * kernels[(mbar, m)]
        total += term
    return total


def box_integral(rate, span):
    """int_0^span e^{i rate tau} dtau = span e^{i rate span/2} sinc(rate span / 2 pi)."""
    rate = np.asarray(rate, dtype=float)
    return span * np.exp(0.5j * rate * span) * np.sinc(rate * span / (2.0 * np.pi))


def _panel_count(width: float, frequency: float) -> int:
    """Panels of GAUSS_ORDER nodes, one per wavelength of the fastest oscillation, at least 8."""
    return int(np.ceil(width * frequency / (2.0 * np.pi))) + 8


def _window(F: FormFactor) -> Tuple[float, float]:
    c, s = F.center[0], F.width
    return c - PRELIMIT_WIDTHS * s, c + PRELIMIT_WIDTHS * s


def bose_prelimit_moment(eps: EpsilonSeq, times: Sequence[float], factors: Sequence[FormFactor],
                         omega_probe: float, pp: PhysParams, disp: Dispersion, lam: float) -> complex:
    """
    Finite-coupling responseless correlator: every Wick pair contributes
    lam^2 int dk conj(g_mbar) g_m E(R, T_m/lam^2) conj(E(R, T_mbar/lam^2)),
    R = omega(k) - omega_probe, E(R, S) = int_0^S e^{iR tau} dtau.
    """
    _require_1d(pp, "bose_prelimit_moment")
    if lam <= 0:
        raise ValueError(f"coupling must be positive, got {lam}")
    if not len(eps) == len(times) == len(factors):
        raise DimensionMismatch("epsilon, times and form factors must have equal length")
    metrics.moment_evaluations_total.labels(route="bose_prelimit").inc()
    cache: Dict[Pair, complex] = {}

    def pair_value(mbar: int, m: int) -> complex:
        F = factors[mbar - 1].conj() * factors[m - 1]
        s_a, s_c = times[mbar - 1] / lam ** 2, times[m - 1] / lam ** 2
        if s_a == 0 or s_c == 0:
            return 0j
        a, b = _window(F)
        grid = np.linspace(a, b, 257)
        slope = np.max(np.abs(np.gradient(disp.omega(np.abs(grid)), grid)))
        panels = _panel_count(b - a, slope * (s_a + s_c))

        def integrand(k):
            rate = disp.omega(np.abs(k)) - omega_probe
            return F(k) * box_integral(rate, s_c) * np.conj(box_integral(rate, s_a))

        return complex(lam ** 2 * gauss_panels(integrand, a, b, panels, GAUSS_ORDER))

    total = 0j
    for pairing in enumerate_pairings(eps):
        term = 1.0 + 0j
        for pair in pairing.pairs:
            if pair not in cache:
                cache[pair] = pair_value(*pair)
            term *= cache[pair]
        total += term
    return total


def _vertex_rates(spec: CorrelatorSpec, pp: PhysParams, disp: Dispersion, pairing: Pairing,
                  ks: Dict[Pair, np.ndarray]) -> List[np.ndarray]:
    """
    Frequencies R_j of the tau_j-integrands, position 1 first.

    Vertex j is the unit-time Weyl factor of its field operator; its angle on
    the running momentum is linear in tau_j, plus +-omega(k) from the field.
    """
    owner = {}
    for pair in pairing.pairs:
        owner[pair[0]] = pair
        owner[pair[1]] = pair
    l = spec.probe_p
    rates = []
    for position in range(1, len(spec.eps) + 1):
        k = ks[owner[position]]
        creating = spec.eps[position] == Role.CREATOR
        angle, l = momentum_phase(field_vertex(k[..., None], 1.0, creating, pp.mass), l, pp.hbar)
        omega = disp.omega(np.abs(k))
        rates.append(angle + (omega if creating else -omega))
    return rates


def prelimit_pairing(spec: CorrelatorSpec, pp: PhysParams, disp: Dispersion, lam: float,
                     pairing: Pairing) -> complex:
    """
    One Wick term of the finite-coupling correlator:
    lam^{2n} int d^n k prod_pairs conj(g_mbar) g_m prod_j E(R_j, T_j / lam^2).

    The outer momentum (pair holding position 1) and the inner one are both
    integrated with panel Gauss-Legendre rules sized to the oscillation of the
    box integrals; n <= 2.
    """
    _require_1d(pp, "prelimit_pairing")
    if lam <= 0:
        raise ValueError(f"coupling must be positive, got {lam}")
    if pairing.n > MAX_PRELIMIT_PAIRS:
        raise UnsupportedModel(f"finite-coupling quadrature supports n <= {MAX_PRELIMIT_PAIRS}, got {pairing.n}")
    if not momentum_balance(spec.eps, pairing):
        raise ValueError(f"pairing {pairing.label()} does not match epsilon")

    spans = [t / lam ** 2 for t in spec.times]
    if min(spans) == 0:
        return 0j
    pairs = sorted(pairing.pairs, key=lambda pair: pair[1])
    factors = {pair: spec.pair_factor(pair) for pair in pairs}
    windows = {pair: _window(factors[pair]) for pair in pairs}

    # fastest phase variation per momentum: every vertex carrying k contributes
    # |dR/dk| * span; |dR/dk| <= |l|/m + hbar |k|/m + hbar |k'|/m + |omega'|
    reach = max(max(abs(a), abs(b)) for a, b in windows.values())
    grid = np.linspace(-reach, reach, 513)
    omega_slope = np.max(np.abs(np.gradient(disp.omega(np.abs(grid)), grid)))
    slope = abs(spec.p) / pp.mass + 2.0 * pp.hbar * reach / pp.mass + omega_slope
    frequency = {
        pair: slope * (spans[pair[0] - 1] + spans[pair[1] - 1]) for pair in pairs
    }

    def nodes(pair):
        a, b = windows[pair]
        return panel_nodes(a, b, _panel_count(b - a, frequency[pair]), GAUSS_ORDER)

    def weight_of(rates):
        product = 1.0 + 0j
        for position, rate in enumerate(rates, start=1):
            product = product * box_integral(rate, spans[position - 1])
        return product

    outer = pairs[0]
    k_out, w_out = nodes(outer)
    if pairing.n == 1:
        rates = _vertex_rates(spec, pp, disp, pairing, {outer: k_out})
        total = np.sum(w_out * factors[outer](k_out) * weight_of(rates))
    else:
        inner = pairs[1]
        k_in, w_in = nodes(inner)
        f_in = factors[inner](k_in) * w_in
        total = 0j
        for start in range(0, k_out.size, OUTER_CHUNK):
            chunk = slice(start, start + OUTER_CHUNK)
            ko = k_out[chunk][:, None]
            ks = {outer: np.broadcast_to(ko, (ko.shape[0], k_in.size)),
                  inner: np.broadcast_to(k_in[None, :], (ko.shape[0], k_in.size))}
            rates = _vertex_rates(spec, pp, disp, pairing, ks)
            inner_sums = weight_of(rates) @ f_in
            total += np.sum(w_out[chunk] * factors[outer](k_out[chunk]) * inner_sums)
    return complex(lam ** (2 * pairing.n) * total)


def _prelimit_two_point(spec: CorrelatorSpec, pp: PhysParams, disp: Dispersion, lam: float) -> complex:
    """
    n = 1 in relative time x = tau_c - tau_a:
    lam^2 int dx w(x) K(x), K(x) = int dk conj(g_a) g_c e^{i Delta(p,k) x},
    w(x) = |{(tau_a, tau_c) in box : tau_c - tau_a = x}|.
    """
    s_c, s_a = spec.time(1) / lam ** 2, spec.time(2) / lam ** 2
    if s_a == 0 or s_c == 0:
        return 0j
    f_a, g_c = spec.factor(2), spec.factor(1)
    F = f_a.conj() * g_c
    a, b = _window(F)
    max_rate = float(np.max(np.abs(delta_energy(pp, disp, spec.p, np.linspace(a, b, 513)))))

    def integrand(x):
        overlap = np.clip(np.minimum(s_c, s_a + x) - np.maximum(0.0, x), 0.0, None)
        return overlap * time_kernel(pp, disp, f_a, g_c, spec.p, x)

    # w(x) has kinks at 0 and s_c - s_a
    breaks = sorted({-s_a, 0.0, s_c - s_a, s_c})
    total = 0j
    for lo, hi in zip(breaks, breaks[1:]):
        if hi > lo:
            total += gauss_panels(integrand, lo, hi, _panel_count(hi - lo, max_rate), GAUSS_ORDER)
    return complex(lam ** 2 * total)


def prelimit_moment(spec: CorrelatorSpec, pp: PhysParams, disp: Dispersion,
                    lam: float) -> Tuple[complex, Dict[Pairing, complex]]:
    """
    Finite-coupling correlator and its decomposition over Wick pairings.

    n = 1 uses the relative-time route when the dispersion has a closed-form
    time kernel; everything else goes through prelimit_pairing.
    """
    _require_1d(pp, "prelimit_moment")
    if lam <= 0:
        raise ValueError(f"coupling must be positive, got {lam}")
    if spec.eps.n > MAX_PRELIMIT_PAIRS:
        raise UnsupportedModel(f"finite-coupling quadrature supports n <= {MAX_PRELIMIT_PAIRS}, got {spec.eps.n}")
    metrics.moment_evaluations_total.labels(route="prelimit").inc()
    per_pairing: Dict[Pairing, complex] = {}
    for pairing in enumerate_pairings(spec.eps):
        if pairing.n == 1 and disp.extra_curvature() is not None:
            per_pairing[pairing] = _prelimit_two_point(spec, pp, disp, lam)
        else:
            per_pairing[pairing] = prelimit_pairing(spec, pp, disp, lam, pairing)
        logger.debug(
            "Pre-limit pairing",
            extra={"lambda": lam, "pairing": pairing.label(), "crossing": not is_noncrossing(pairing)},
        )
    total = sum(per_pairing.values(), 0j)
    return total, per_pairing


@dataclass(frozen=True)
class ConvergenceRow:
    lam: float
    total: complex
    per_pairing: Dict[Pairing, complex] = field(default_factory=dict)
    limit: complex = 0j

    @property
    def error(self) -> float:
        return abs(self.total - self.limit)


def convergence_study(spec: CorrelatorSpec, pp: PhysParams, disp: Dispersion,
                      lambdas: Sequence[float]) -> List[ConvergenceRow]:
    """prelimit_moment along a coupling sequence, compared with limit_moment."""
    limit = limit_moment(spec, pp, disp).value
    rows = []
    for lam in lambdas:
        total, per_pairing = prelimit_moment(spec, pp, disp, lam)
        rows.append(ConvergenceRow(float(lam), total, per_pairing, limit))
        logger.info("Convergence step", extra={"lambda": lam, "error": abs(total - limit)})
    return rows
