"""
Words in the limit noise operators A#(alpha (x) f) and their vacuum reduction.

A(alpha (x) f)  = int dtau dk <alpha| conj(f(k)) e^{-i omega(k) tau} alpha(tau, k)  W((tau/m) k, k)
A+(alpha (x) f) = int dtau dk |alpha> f(k) e^{i omega(k) tau} alpha+(tau, k) W(-(tau/m) k, -k)

with the scaled free relation alpha(tau, k) alpha+(tau', k') = delta(2 tau - tau') delta(k - k').
Each annihilator is a bra and each creator a ket, so the vacuum reduction is the
bra-ket rule: an annihilator immediately left of a creator contracts, leaving
<alpha, beta> times a merged Weyl factor W(-(tau/m) k, 0) e^{i hbar tau |k|^2 / 2m}.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.algebra.errors import DegenerateShell, DimensionMismatch, UnsupportedModel
from src.algebra.free_fock import Bra, BraKetReduction, BraKetWord, Ket, braket_reduce
from src.algebra.partitions import (
    EpsilonSeq,
    Pair,
    Pairing,
    Role,
    children,
    is_noncrossing,
    momentum_balance,
)
from src.algebra.weyl import WeylOp, field_vertex, momentum_phase, multiply
from src.app import metrics
from src.physics.interacting_fock import TimeFactor
from src.physics.spectral_model import Dispersion, FormFactor, PhysParams, ShellRoot

logger = logging.getLogger(__name__)

# tau' = 2 tau for the creator of a contracted pair
CREATOR_TIME_RATIO = 2.0

# |rate(root)| allowed, relative to the sampled rates, before a piece is called non-quadratic
RATE_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class NoiseSymbol:
    creator: bool
    time: TimeFactor
    factor: FormFactor

    def __repr__(self) -> str:
        return ("A+" if self.creator else "A") + f"({self.time.intervals}, {self.factor!r})"


@dataclass(frozen=True, eq=False)
class NoiseWord:
    """Symbols in index order: symbols[0] is position 1, the rightmost factor."""

    symbols: Tuple[NoiseSymbol, ...]

    @property
    def eps(self) -> EpsilonSeq:
        return EpsilonSeq(tuple(Role.CREATOR if s.creator else Role.ANNIHILATOR for s in self.symbols))

    def __getitem__(self, position: int) -> NoiseSymbol:
        return self.symbols[position - 1]

    def __len__(self) -> int:
        return len(self.symbols)


def word_from_symbols(eps: EpsilonSeq, times: Sequence[float], factors: Sequence[FormFactor]) -> NoiseWord:
    """The word prod_j A^{eps_j}(chi_[0,T_j] (x) g_j), i.e. the collective correlator in the limit."""
    if not len(eps) == len(times) == len(factors):
        raise DimensionMismatch(
            f"epsilon of length {len(eps)} with {len(times)} times and {len(factors)} form factors"
        )
    return NoiseWord(tuple(
        NoiseSymbol(eps[j] == Role.CREATOR, TimeFactor.indicator(times[j - 1]), factors[j - 1])
        for j in range(1, len(eps) + 1)
    ))


@dataclass(frozen=True, eq=False)
class PairContraction:
    """
    One contraction alpha(tau, k) alpha+(2 tau, k).

    Attributes:
        pair: (mbar, m) positions of annihilator and creator
        time_scalar: <alpha_mbar, alpha_m>
        kernel_factor: conj(f_mbar) f_m, integrated over the shell
    """

    pair: Pair
    time_scalar: complex
    kernel_factor: FormFactor


@dataclass(frozen=True, eq=False)
class ContractionPlan:
    """
    Result of the vacuum reduction of a non-trivial word.

    Attributes:
        word: The reduced word
        pairing: Its (necessarily non-crossing) pairing
        contractions: One record per pair, keyed by pair
        reduction: Bra-ket reduction the plan was read off
    """

    word: NoiseWord
    pairing: Pairing
    contractions: Dict[Pair, PairContraction]
    reduction: BraKetReduction

    @property
    def time_scalar(self) -> complex:
        """prod <alpha_mbar, alpha_m> over the contracted pairs."""
        return self.reduction.value(lambda a, c: self.word[a].time.inner(self.word[c].time))

    def merged_vertex(self, h: Pair, k, pp: PhysParams) -> WeylOp:
        """
        W((tau/m) k, k) W(-(2 tau/m) k, -k) for unit tau: W(-k/m, 0) with phase hbar |k|^2 / 2m.
        """
        if h not in self.contractions:
            raise ValueError(f"{h} is not a contracted pair of this plan")
        absorb = field_vertex(k, 1.0, creator=False, m=pp.mass)
        emit = field_vertex(k, CREATOR_TIME_RATIO, creator=True, m=pp.mass)
        merged = multiply(absorb, emit, pp.hbar)
        if np.any(merged.b != 0):
            raise AssertionError(f"momentum transfer of pair {h} does not cancel")
        return merged

    def vertex_rate(self, h: Pair, k: float, l, pp: PhysParams, disp: Dispersion) -> float:
        """Frequency of the tau-integrand of pair h at particle momentum l: omega(k) plus the Weyl angle."""
        angle, _ = momentum_phase(self.merged_vertex(h, k, pp), l, pp.hbar)
        return float(disp.omega(abs(k)) + angle)


def reduce_word(w: NoiseWord) -> Optional[ContractionPlan]:
    """
    Contract adjacent A . A+ pairs until none remain.

    Returns:
        The contraction plan, or None when the word's vacuum expectation vanishes
    """
    tokens = tuple(
        Ket(j) if w[j].creator else Bra(j)
        for j in range(len(w), 0, -1)
    )
    reduction = braket_reduce(BraKetWord(tokens))
    if reduction.residual:
        logger.debug("Word reduces to zero", extra={"residual": len(reduction.residual)})
        return None
    pairing = Pairing(reduction.pairs)
    if not is_noncrossing(pairing) or not momentum_balance(w.eps, pairing):
        raise AssertionError(f"free reduction produced an inadmissible pairing {pairing.label()}")
    contractions = {
        (mbar, m): PairContraction(
            (mbar, m),
            w[mbar].time.inner(w[m].time),
            w[mbar].factor.conj() * w[m].factor,
        )
        for mbar, m in pairing.pairs
    }
    return ContractionPlan(w, pairing, contractions, reduction)


def _sample_anchor(lo: float, hi: float) -> Tuple[float, float]:
    if np.isfinite(lo):
        return lo, 1.0
    if np.isfinite(hi):
        return hi, -1.0
    return 0.0, 1.0


def vertex_roots(plan: ContractionPlan, h: Pair, l: float, pp: PhysParams, disp: Dispersion) -> List[ShellRoot]:
    """
    Zeros of the tau-frequency of pair h at particle momentum l, with |d rate/dk|.

    On every smooth piece of omega the rate is a quadratic in k. Its coefficients
    are read off three evaluations of vertex_rate, so the shell and its density
    come from the merged Weyl vertex and the dispersion alone. A root on the
    edge of a half-line piece gets a doubled jacobian, as in shell_roots.

    Raises:
        DegenerateShell: if a root inside the piece has |d rate/dk| < root_tol
        UnsupportedModel: if d != 1
    """
    if pp.dim != 1:
        raise UnsupportedModel(f"the noise route is implemented for d=1, configured d={pp.dim}")
    metrics.shell_evaluations_total.labels(dispersion=disp.kind).inc()
    roots: List[ShellRoot] = []
    for branch in disp.branches():
        anchor, step = _sample_anchor(branch.lo, branch.hi)
        r0, r1, r2 = (plan.vertex_rate(h, anchor + i * step, l, pp, disp) for i in range(3))
        # rate = c0 + c1 u + c2 u^2 with k = anchor + step u and |step| = 1
        c2 = 0.5 * (r2 - 2.0 * r1 + r0)
        c1 = r1 - r0 - c2
        c0 = r0
        if c2 == 0:
            raise AssertionError(f"vertex rate of pair {h} has no recoil term")
        disc = c1 * c1 - 4.0 * c2 * c0
        if abs(disc) < pp.root_tol ** 2:
            k = anchor - step * c1 / (2.0 * c2)
            if branch.lo <= k <= branch.hi:
                metrics.degenerate_shells_total.inc()
                logger.debug("Tangent vertex rate", extra={"pair": h, "l": l, "k": k})
                raise DegenerateShell(
                    f"vertex rate of pair {h} at l={l:.17g} is tangent near k={k:.17g}",
                    l=[l],
                    k=float(k),
                    jacobian=float(np.sqrt(abs(disc))),
                )
        if disc < 0:
            continue
        root = np.sqrt(disc)
        scale = max(abs(r0), abs(r1), abs(r2), 1.0)
        for u in sorted({(-c1 - root) / (2.0 * c2), (-c1 + root) / (2.0 * c2)}):
            k = anchor + step * u
            if not branch.lo <= k <= branch.hi:
                continue
            residual = plan.vertex_rate(h, k, l, pp, disp)
            if abs(residual) > RATE_RESIDUAL_TOL * scale:
                raise AssertionError(f"vertex rate of pair {h} is {residual:.3e} at its root k={k:.17g}")
            on_edge = k == branch.lo or k == branch.hi
            roots.append(ShellRoot(float(k), float(root) * (2.0 if on_edge else 1.0)))
    return sorted(roots, key=lambda r: r.k)


def evaluate_plan(plan: Optional[ContractionPlan], pp: PhysParams, disp: Dispersion, probe_p) -> complex:
    """
    Value of the reduced word at particle momentum probe_p.

    Each pair's tau-integral runs over e^{i rate tau}, rate = omega(k) + Weyl
    angle of the merged vertex, giving 2 pi delta(rate) over the zeros found by
    vertex_roots; the creator of an outer pair shifts the momentum seen by the
    pairs it encloses by -hbar k.
    """
    if plan is None:
        return 0j
    metrics.moment_evaluations_total.labels(route="noise").inc()

    def level(h: Optional[Pair], l: float) -> complex:
        value = 1.0 + 0j
        for child in children(plan.pairing, h):
            contraction = plan.contractions[child]
            branch_sum = 0j
            for root in vertex_roots(plan, child, l, pp, disp):
                _, inner_l = momentum_phase(field_vertex(root.k, 0.0, creator=True, m=pp.mass), [l], pp.hbar)
                weight = 2.0 * np.pi * contraction.kernel_factor(root.k) / root.jacobian
                branch_sum += weight * level(child, float(inner_l[0]))
            value *= branch_sum
            if value == 0:
                break
        return value

    probe = float(np.ravel(np.asarray(probe_p, dtype=float))[0])
    return complex(plan.time_scalar * level(None, probe))
