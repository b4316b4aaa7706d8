"""
Free statistics on a truncated full Fock space.

The dense representation (level n stored as a D^n coordinate tensor) exists
to serve as a brute-force oracle for the combinatorial moment formula, so it
favours clarity over speed and is meant for D <= 4, n <= 4.

Also home of the bra-ket reduction rule: a bra immediately to the left of a
ket collapses to their scalar product.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Hashable, List, Sequence, Tuple

import numpy as np

from src.algebra.errors import DimensionMismatch, TruncationError
from src.algebra.partitions import EpsilonSeq, Role, wigner_pairing

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TestSpace:
    """
    Finite-dimensional test space T = C^D with inner product <x,y> = x^H G y.

    Attributes:
        dim: Dimension D
        gram: Hermitian positive definite Gram matrix (identity by default)
    """

    __test__ = False  # not a pytest class

    dim: int
    gram: np.ndarray = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"test space dimension must be positive, got {self.dim}")
        gram = np.eye(self.dim, dtype=complex) if self.gram is None else np.asarray(self.gram, dtype=complex)
        if gram.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"Gram matrix shape {gram.shape} != ({self.dim}, {self.dim})")
        if not np.allclose(gram, gram.conj().T):
            raise ValueError("Gram matrix must be Hermitian")
        if np.linalg.eigvalsh(gram).min() <= 0:
            raise ValueError("Gram matrix must be positive definite")
        object.__setattr__(self, "gram", gram)

    def inner(self, x: np.ndarray, y: np.ndarray) -> complex:
        """Conjugate-linear in the left argument."""
        x = self._check(x)
        y = self._check(y)
        return complex(x.conj() @ self.gram @ y)

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        if v.shape != (self.dim,):
            raise DimensionMismatch(f"vector shape {v.shape} does not match dimension {self.dim}")
        return v


@dataclass(frozen=True, eq=False)
class FockVector:
    """
    Truncated vector in Gamma(T) = C + T + T(x)T + ... up to level N.

    Attributes:
        space: The underlying test space
        levels: Level n holds an array of shape (D,)*n; level 0 is a 0-d array
        truncation_loss: Norm discarded so far by creators acting on level N
    """

    space: TestSpace
    levels: Tuple[np.ndarray, ...]
    truncation_loss: float = 0.0

    @property
    def truncation(self) -> int:
        return len(self.levels) - 1

    def vacuum_component(self) -> complex:
        return complex(self.levels[0])


def vacuum(space: TestSpace, truncation: int) -> FockVector:
    levels = [np.ones((), dtype=complex)]
    for n in range(1, truncation + 1):
        levels.append(np.zeros((space.dim,) * n, dtype=complex))
    return FockVector(space, tuple(levels))


def _level_inner(space: TestSpace, x: np.ndarray, y: np.ndarray) -> complex:
    """Tensor-power inner product on one level."""
    if x.ndim == 0:
        return complex(np.conj(x) * y)
    result = y
    for axis in range(x.ndim):
        result = np.tensordot(space.gram, result, axes=([1], [axis]))
        result = np.moveaxis(result, 0, axis)
    return complex(np.sum(x.conj() * result))


def fock_inner(u: FockVector, v: FockVector) -> complex:
    if u.truncation != v.truncation or u.space.dim != v.space.dim:
        raise DimensionMismatch("Fock vectors live on different truncated spaces")
    return sum(_level_inner(u.space, x, y) for x, y in zip(u.levels, v.levels))


def fock_norm(v: FockVector) -> float:
    return float(np.sqrt(max(fock_inner(v, v).real, 0.0)))


def apply_creator(g: np.ndarray, v: FockVector) -> FockVector:
    """
    b+(g): phi_1 (x) ... (x) phi_n -> g (x) phi_1 (x) ... (x) phi_n.

    The top level cannot be raised any further; its norm is added to
    ``truncation_loss`` of the result.
    """
    if v.truncation < 1:
        raise ValueError("creator needs a truncation of at least 1")
    g = v.space._check(g)
    new_levels = [np.zeros((), dtype=complex)]
    for n in range(1, v.truncation + 1):
        new_levels.append(np.multiply.outer(g, v.levels[n - 1]))
    lost = _level_inner(v.space, np.multiply.outer(g, v.levels[-1]),
                        np.multiply.outer(g, v.levels[-1])).real
    loss = v.truncation_loss + float(np.sqrt(max(lost, 0.0)))
    return FockVector(v.space, tuple(new_levels), loss)


def apply_annihilator(g: np.ndarray, v: FockVector) -> FockVector:
    """b(g): phi_1 (x) ... (x) phi_n -> <g, phi_1> phi_2 (x) ... (x) phi_n; b(g) vacuum = 0."""
    g = v.space._check(g)
    bra = g.conj() @ v.space.gram
    new_levels = []
    for n in range(0, v.truncation):
        new_levels.append(np.tensordot(bra, v.levels[n + 1], axes=([0], [0])))
    new_levels.append(np.zeros((v.space.dim,) * v.truncation, dtype=complex))
    return FockVector(v.space, tuple(new_levels), v.truncation_loss)


def free_moment_oracle(
    eps: EpsilonSeq, gs: Sequence[np.ndarray], truncation: int, space: TestSpace = None
) -> complex:
    """
    <Psi, prod_j b^{eps_j}(g_j) Psi> by direct action on the truncated space.

    Args:
        eps: Creator/annihilator pattern (position 1 acts first)
        gs: One test vector per position
        truncation: Top level N; must be at least n so nothing is dropped
        space: Test space (standard inner product on C^D if omitted)

    Returns:
        The vacuum expectation value

    Raises:
        TruncationError: if N < n, or if weight pushed above level N could
                         still be brought back to the vacuum

    Weight above level N sits at level N + 1 or higher and needs at least
    N + 1 further annihilators to reach the vacuum. With N >= n a word of
    length 2n never has that many left after its (N + 1)-th creator, so any
    weight dropped is weight the exact moment never sees.
    """
    if len(gs) != len(eps):
        raise DimensionMismatch(f"{len(gs)} test vectors for a word of length {len(eps)}")
    if truncation < eps.n:
        raise TruncationError(
            f"truncation {truncation} < n = {eps.n}: the result would depend on the cut-off"
        )
    if space is None:
        space = TestSpace(len(np.asarray(gs[0])))
    state = vacuum(space, truncation)
    remaining = sum(1 for role in eps.roles if role == Role.ANNIHILATOR)
    for position in range(1, len(eps) + 1):
        g = gs[position - 1]
        if eps[position] == Role.CREATOR:
            state = apply_creator(g, state)
        else:
            state = apply_annihilator(g, state)
            remaining -= 1
        # dropped weight above level N only matters if enough annihilators
        # remain to bring it back down to the vacuum
        if state.truncation_loss > 0.0 and remaining > truncation:
            raise TruncationError(
                f"creator at position {position} pushed norm {state.truncation_loss:.3e} "
                f"beyond level {truncation}"
            )
    return state.vacuum_component()


def free_moment_combinatorial(
    eps: EpsilonSeq, gs: Sequence[np.ndarray], space: TestSpace = None
) -> complex:
    """Product of <g_mbar, g_m> over the Wigner pairs; zero for trivial eps."""
    if len(gs) != len(eps):
        raise DimensionMismatch(f"{len(gs)} test vectors for a word of length {len(eps)}")
    pairing = wigner_pairing(eps)
    if pairing is None:
        return 0j
    if space is None:
        space = TestSpace(len(np.asarray(gs[0])))
    value = 1.0 + 0j
    for mbar, m in pairing.pairs:
        value *= space.inner(gs[mbar - 1], gs[m - 1])
    return value


@dataclass(frozen=True)
class Bra:
    label: Hashable


@dataclass(frozen=True)
class Ket:
    label: Hashable


@dataclass(frozen=True)
class BraKetWord:
    """Ordered tokens, written left to right as they appear in the product."""

    tokens: Tuple[object, ...]

    def __post_init__(self):
        for token in self.tokens:
            if not isinstance(token, (Bra, Ket)):
                raise TypeError(f"bra-ket words hold Bra/Ket tokens, got {token!r}")


@dataclass(frozen=True)
class BraKetReduction:
    """
    Result of bra-ket reduction.

    Attributes:
        pairs: (bra label, ket label) for every scalar product taken out
        residual: Tokens left once no bra sits immediately left of a ket
    """

    pairs: Tuple[Tuple[Hashable, Hashable], ...]
    residual: Tuple[object, ...] = field(default_factory=tuple)

    def value(self, inner: Callable[[Hashable, Hashable], complex]) -> complex:
        result = 1.0 + 0j
        for bra, ket in self.pairs:
            result *= inner(bra, ket)
        return result


def braket_reduce(w: BraKetWord, order: Sequence[int] = None) -> BraKetReduction:
    """
    Repeatedly contract an adjacent (bra, ket) into <bra, ket>.

    Args:
        w: The word
        order: Optional preference list used to pick which adjacency to
               contract first (indices into the current word, wrapped);
               the scalar does not depend on it

    Returns:
        Collected scalar products and the irreducible remainder
    """
    tokens: List[object] = list(w.tokens)
    pairs: List[Tuple[Hashable, Hashable]] = []
    step = 0
    while True:
        sites = [
            i for i in range(len(tokens) - 1)
            if isinstance(tokens[i], Bra) and isinstance(tokens[i + 1], Ket)
        ]
        if not sites:
            break
        pick = sites[0] if order is None else sites[order[step % len(order)] % len(sites)]
        step += 1
        pairs.append((tokens[pick].label, tokens[pick + 1].label))
        del tokens[pick:pick + 2]
    return BraKetReduction(tuple(sorted(pairs, key=repr)), tuple(tokens))
