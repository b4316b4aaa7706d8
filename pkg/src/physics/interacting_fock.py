"""
Interacting Fock space over the commutative algebra P of functions of the
particle momentum p.

P elements are lazy expression trees evaluated pointwise in p. Two leaves
carry the physics:

    transform(F):      F~(p)      = 2 pi sum_r F(k_r) / |dDelta/dk|(k_r)
    convolve(G~, F):   (G~ * F)(p) = 2 pi sum_r G~(p - hbar k_r) F(k_r) / |dDelta/dk|(k_r)

with k_r running over the shell Delta(p, k) = 0. The convolution is not
associative. A P element in the right slot of ``convolve`` enters through
its values as a function of k.

n-particle vectors are sums of products psi_1 . psi_2 ... psi_n of module
vectors, each optionally annotated with a P element c acting through the
underlined product c *_ psi, which obeys (f | c *_ g) = c * (f|g).
"""

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.algebra.errors import CapacityError, DimensionMismatch
from src.algebra.partitions import EpsilonSeq, Role, is_nontrivial
from src.physics.spectral_model import Dispersion, FormFactor, PhysParams, shell_roots

logger = logging.getLogger(__name__)

# per node; a long scan keeps only the most recent momenta
MAX_CACHED_MOMENTA = 4096


class PElement:
    """
    Element of P, evaluated lazily and memoized per momentum.

    Subclasses implement ``_compute(p)``; the cache is shared by every
    thread evaluating the same node and keeps the MAX_CACHED_MOMENTA most
    recently used momenta.
    """

    def __init__(self):
        self._cache: "OrderedDict[float, complex]" = OrderedDict()
        self._lock = threading.Lock()

    def _compute(self, p: float) -> complex:
        raise NotImplementedError

    def evaluate(self, p) -> complex:
        key = float(np.ravel(np.asarray(p, dtype=float))[0])
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        value = complex(self._compute(key))
        with self._lock:
            self._cache[key] = value
            while len(self._cache) > MAX_CACHED_MOMENTA:
                self._cache.popitem(last=False)
        return value

    __call__ = evaluate

    def evaluate_many(self, ps: Iterable[float]) -> np.ndarray:
        return np.array([self.evaluate(p) for p in ps], dtype=complex)

    def agrees_with(self, other: "PElement", grid: Sequence[float], tol: float) -> bool:
        """Pointwise agreement on a probe grid, relative to the larger magnitude."""
        mine, theirs = self.evaluate_many(grid), other.evaluate_many(grid)
        scale = np.maximum(np.maximum(np.abs(mine), np.abs(theirs)), 1.0)
        return bool(np.all(np.abs(mine - theirs) <= tol * scale))

    @property
    def is_zero(self) -> bool:
        return False

    def conj(self) -> "PElement":
        if self.is_zero:
            return self
        return Conjugate(self)

    def __add__(self, other):
        other = as_element(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return Sum((self, other))

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_element(other))

    def __rsub__(self, other):
        return as_element(other) - self

    def __mul__(self, other):
        if isinstance(other, PElement):
            if self.is_zero or other.is_zero:
                return zero()
            return Product((self, other))
        if np.isscalar(other):
            if other == 0 or self.is_zero:
                return zero()
            return Scaled(complex(other), self)
        return NotImplemented

    __rmul__ = __mul__


class Constant(PElement):
    def __init__(self, value: complex):
        super().__init__()
        self.value = complex(value)

    def _compute(self, p: float) -> complex:
        return self.value

    @property
    def is_zero(self) -> bool:
        return self.value == 0

    def __repr__(self) -> str:
        return f"Constant({self.value!r})"


class Sum(PElement):
    def __init__(self, terms: Sequence[PElement]):
        super().__init__()
        self.terms = tuple(terms)

    def _compute(self, p: float) -> complex:
        return sum((t.evaluate(p) for t in self.terms), 0j)


class Scaled(PElement):
    def __init__(self, scalar: complex, inner: PElement):
        super().__init__()
        self.scalar = complex(scalar)
        self.inner = inner

    def _compute(self, p: float) -> complex:
        return self.scalar * self.inner.evaluate(p)


class Product(PElement):
    """Ordinary pointwise product in P."""

    def __init__(self, factors: Sequence[PElement]):
        super().__init__()
        self.factors = tuple(factors)

    def _compute(self, p: float) -> complex:
        value = 1.0 + 0j
        for f in self.factors:
            value *= f.evaluate(p)
        return value


class Conjugate(PElement):
    def __init__(self, inner: PElement):
        super().__init__()
        self.inner = inner

    def _compute(self, p: float) -> complex:
        return np.conj(self.inner.evaluate(p))


class Transform(PElement):
    def __init__(self, F: FormFactor, pp: PhysParams, disp: Dispersion):
        super().__init__()
        self.F, self.pp, self.disp = F, pp, disp

    def _compute(self, p: float) -> complex:
        total = 0j
        for root in shell_roots(self.pp, self.disp, p):
            total += self.F(root.k) / root.jacobian
        return 2.0 * np.pi * total

    def __repr__(self) -> str:
        return f"Transform({self.F!r})"


class Convolution(PElement):
    def __init__(self, left: PElement, right: Union[FormFactor, PElement], pp: PhysParams, disp: Dispersion):
        super().__init__()
        self.left, self.right, self.pp, self.disp = left, right, pp, disp

    def _right_value(self, k: float) -> complex:
        if isinstance(self.right, PElement):
            return self.right.evaluate(k)
        return complex(self.right(k))

    def _compute(self, p: float) -> complex:
        total = 0j
        for root in shell_roots(self.pp, self.disp, p):
            inner = self.left.evaluate(p - self.pp.hbar * root.k)
            total += inner * self._right_value(root.k) / root.jacobian
        return 2.0 * np.pi * total


def constant(value: complex) -> PElement:
    return Constant(value)


def one() -> PElement:
    return Constant(1.0)


def zero() -> PElement:
    return Constant(0.0)


def as_element(x) -> PElement:
    if isinstance(x, PElement):
        return x
    if np.isscalar(x):
        return Constant(x)
    raise TypeError(f"cannot interpret {x!r} as an element of P")


def transform(F: FormFactor, pp: PhysParams, disp: Dispersion) -> PElement:
    if F.amplitude == 0:
        return zero()
    return Transform(F, pp, disp)


def convolve(G: PElement, F: Union[FormFactor, PElement], pp: PhysParams, disp: Dispersion) -> PElement:
    """(G * F)(p) = 2 pi sum_r G(p - hbar k_r) F(k_r) / jacobian_r."""
    if G.is_zero or (isinstance(F, FormFactor) and F.amplitude == 0):
        return zero()
    if isinstance(F, PElement) and F.is_zero:
        return zero()
    return Convolution(G, F, pp, disp)


@dataclass(frozen=True)
class TimeFactor:
    """
    Step function sum_i w_i chi_[s_i, t_i) on the time axis.

    Attributes:
        intervals: (start, end, weight) with disjoint [start, end)
    """

    intervals: Tuple[Tuple[float, float, complex], ...]

    def __post_init__(self):
        cleaned = tuple(sorted((float(s), float(t), complex(w)) for s, t, w in self.intervals))
        for s, t, _ in cleaned:
            if t < s:
                raise ValueError(f"interval [{s}, {t}) has end before start")
        for (_, t1, _), (s2, _, _) in zip(cleaned, cleaned[1:]):
            if s2 < t1:
                raise ValueError("intervals of a time factor must be disjoint")
        object.__setattr__(self, "intervals", cleaned)

    @classmethod
    def indicator(cls, t: float, start: float = 0.0) -> "TimeFactor":
        """chi_[start, t)."""
        return cls(((start, t, 1.0),))

    def inner(self, other: "TimeFactor") -> complex:
        """<alpha, beta> = int conj(alpha) beta."""
        total = 0j
        for s1, t1, w1 in self.intervals:
            for s2, t2, w2 in other.intervals:
                overlap = min(t1, t2) - max(s1, s2)
                if overlap > 0:
                    total += np.conj(w1) * w2 * overlap
        return total


@dataclass(frozen=True, eq=False)
class ModuleTerm:
    time: TimeFactor
    factor: FormFactor
    coeff: complex = 1.0
    action: Optional[PElement] = None

    def merge_key(self):
        f = self.factor
        return (self.time.intervals, f.amplitude, tuple(f.center.tolist()), f.width, id(self.action))


@dataclass(frozen=True, eq=False)
class ModuleVector:
    """Finite sum of coeff * (c *_ (alpha (x) f)) terms; c is absent for plain vectors."""

    terms: Tuple[ModuleTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        merged: Dict[tuple, ModuleTerm] = {}
        for term in self.terms:
            key = term.merge_key()
            if key in merged:
                merged[key] = replace(merged[key], coeff=merged[key].coeff + term.coeff)
            else:
                merged[key] = term
        object.__setattr__(self, "terms", tuple(t for t in merged.values() if t.coeff != 0))

    @classmethod
    def elementary(cls, alpha: TimeFactor, f: FormFactor, coeff: complex = 1.0) -> "ModuleVector":
        return cls((ModuleTerm(alpha, f, complex(coeff)),))

    @classmethod
    def chi(cls, t: float, g: FormFactor) -> "ModuleVector":
        """chi_[0,t] (x) g, the vector behind C#(g, t)."""
        return cls.elementary(TimeFactor.indicator(t), g)

    def __add__(self, other: "ModuleVector") -> "ModuleVector":
        return ModuleVector(self.terms + other.terms)

    def scaled(self, c: complex) -> "ModuleVector":
        return ModuleVector(tuple(replace(t, coeff=c * t.coeff) for t in self.terms))

    @property
    def annotated(self) -> bool:
        return any(t.action is not None for t in self.terms)


def with_action(psi: ModuleVector, c: PElement) -> ModuleVector:
    """c *_ psi; an existing annotation b becomes c b, so (cb) *_ g = c *_ (b *_ g)."""
    terms = []
    for t in psi.terms:
        action = c if t.action is None else c * t.action
        terms.append(replace(t, action=action))
    return ModuleVector(tuple(terms))


def module_inner(phi: ModuleVector, psi: ModuleVector, pp: PhysParams, disp: Dispersion) -> PElement:
    """
    (alpha (x) f | c *_ (beta (x) g)) = <alpha, beta> c * (f|g), extended sesquilinearly.

    Raises:
        ValueError: if phi carries an annotation (bras are plain vectors)
    """
    if phi.annotated:
        raise ValueError("the left argument of the module inner product must be unannotated")
    result = zero()
    for a in phi.terms:
        for b in psi.terms:
            weight = np.conj(a.coeff) * b.coeff * a.time.inner(b.time)
            if weight == 0:
                continue
            F = a.factor.conj() * b.factor
            kernel = transform(F, pp, disp) if b.action is None else convolve(b.action, F, pp, disp)
            result = result + kernel * weight
    return result


def nested_inner(phis: Sequence[ModuleVector], psis: Sequence[ModuleVector], pp: PhysParams,
                 disp: Dispersion) -> PElement:
    """
    (phi_1 ... phi_n | psi_1 ... psi_n) = (phi_n|(phi_{n-1}|...(phi_1|psi_1) *_ psi_2)... *_ psi_n),
    i.e. the left-nested convolution (phi_1|psi_1) * (phi_2|psi_2) * ... * (phi_n|psi_n).
    """
    if len(phis) != len(psis):
        raise DimensionMismatch(f"{len(phis)} bra factors against {len(psis)} ket factors")
    if not phis:
        return one()
    acc = module_inner(phis[0], psis[0], pp, disp)
    for phi, psi in zip(phis[1:], psis[1:]):
        if acc.is_zero:
            return acc
        acc = module_inner(phi, with_action(psi, acc), pp, disp)
    return acc


@dataclass(frozen=True, eq=False)
class LevelTerm:
    """coeff . (psi_1 . psi_2 ... psi_n); coeff multiplies as an ordinary element of P."""

    coeff: PElement
    factors: Tuple[ModuleVector, ...] = ()

    @property
    def level(self) -> int:
        return len(self.factors)


@dataclass(frozen=True, eq=False)
class InteractingVector:
    """
    Vector of the interacting Fock space truncated at ``capacity`` particles.

    Attributes:
        terms: Level terms; level 0 terms carry only their P coefficient
        capacity: Largest level a creator may reach
        pp, disp: Spectral data used by annihilators
    """

    terms: Tuple[LevelTerm, ...]
    capacity: int
    pp: PhysParams
    disp: Dispersion

    def level(self, n: int) -> List[LevelTerm]:
        return [t for t in self.terms if t.level == n]

    def vacuum_component(self) -> PElement:
        total = zero()
        for t in self.level(0):
            total = total + t.coeff
        return total


def vacuum(capacity: int, pp: PhysParams, disp: Dispersion) -> InteractingVector:
    """Phi = 1_P (+) 0 (+) 0 ..."""
    if capacity < 0:
        raise ValueError(f"capacity must be non-negative, got {capacity}")
    return InteractingVector((LevelTerm(one()),), capacity, pp, disp)


def creator(phi: ModuleVector, v: InteractingVector) -> InteractingVector:
    """A+(phi): psi_1 ... psi_n -> phi . psi_1 ... psi_n."""
    terms = []
    for t in v.terms:
        if t.level + 1 > v.capacity:
            raise CapacityError(f"creator would raise a level-{t.level} term above capacity {v.capacity}")
        terms.append(LevelTerm(t.coeff, (phi,) + t.factors))
    return replace(v, terms=tuple(terms))


def annihilator(phi: ModuleVector, v: InteractingVector) -> InteractingVector:
    """A(phi): psi_1 . psi_2 ... -> (phi|psi_1) *_ psi_2 ...; A(phi) Phi = 0."""
    terms = []
    for t in v.terms:
        if t.level == 0:
            continue
        contracted = module_inner(phi, t.factors[0], v.pp, v.disp)
        if contracted.is_zero:
            continue
        if t.level == 1:
            terms.append(LevelTerm(t.coeff * contracted))
        else:
            head = with_action(t.factors[1], contracted)
            terms.append(LevelTerm(t.coeff, (head,) + t.factors[2:]))
    return replace(v, terms=tuple(terms))


def apply_word(eps: EpsilonSeq, phis: Sequence[ModuleVector], v: InteractingVector) -> InteractingVector:
    """prod_j A^{eps_j}(phi_j) v, position 1 acting first."""
    if len(phis) != len(eps):
        raise DimensionMismatch(f"{len(phis)} module vectors for a word of length {len(eps)}")
    for position in range(1, len(eps) + 1):
        phi = phis[position - 1]
        v = creator(phi, v) if eps[position] == Role.CREATOR else annihilator(phi, v)
    return v


def vacuum_moment(eps: EpsilonSeq, phis: Sequence[ModuleVector], pp: PhysParams, disp: Dispersion,
                  capacity: Optional[int] = None) -> PElement:
    """(Phi | prod_j A^{eps_j}(phi_j) Phi) as an element of P."""
    if not is_nontrivial(eps):
        return zero()
    state = apply_word(eps, phis, vacuum(eps.n if capacity is None else capacity, pp, disp))
    logger.debug("Vacuum moment assembled", extra={"terms": len(state.terms)})
    return state.vacuum_component()


def fock_inner(theta: InteractingVector, psi: InteractingVector) -> PElement:
    """(Theta | Psi) summed level by level through nested_inner."""
    total = zero()
    for a in theta.terms:
        for b in psi.terms:
            if a.level != b.level:
                continue
            inner = nested_inner(a.factors, b.factors, psi.pp, psi.disp)
            if inner.is_zero:
                continue
            total = total + a.coeff.conj() * b.coeff * inner
    return total
