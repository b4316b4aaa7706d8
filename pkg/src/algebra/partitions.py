"""
Creator/annihilator sequences and their pair partitions.

Index convention: position 1 is the RIGHTMOST factor of an operator product,
i.e. the one that acts first on the vacuum. A sequence is stored as a tuple
``roles`` with ``roles[0]`` holding epsilon_1. Getting this backwards silently
flips every result, so all public helpers take and return 1-based positions.
"""

import itertools
from dataclasses import dataclass
from enum import IntEnum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from src.algebra.errors import (
    CrossingPairingError,
    PairingLimitError,
    TrivialSequenceError,
)

MAX_ENUMERATION_LENGTH = 16

Pair = Tuple[int, int]


class Role(IntEnum):
    ANNIHILATOR = 0
    CREATOR = 1


@dataclass(frozen=True)
class EpsilonSeq:
    """
    A creator/annihilator pattern epsilon in {0,1}^{2n}.

    Attributes:
        roles: Role of each position; roles[0] is position 1 (rightmost factor)
    """

    roles: Tuple[Role, ...]

    def __post_init__(self):
        roles = tuple(Role(int(r)) for r in self.roles)
        object.__setattr__(self, "roles", roles)
        if len(roles) < 2 or len(roles) % 2:
            raise ValueError(
                f"epsilon sequence must have even length >= 2, got {len(roles)}"
            )

    @classmethod
    def of(cls, *values: int) -> "EpsilonSeq":
        return cls(tuple(Role(v) for v in values))

    def __len__(self) -> int:
        return len(self.roles)

    def __getitem__(self, position: int) -> Role:
        """Role at 1-based position."""
        if not 1 <= position <= len(self.roles):
            raise IndexError(f"position {position} outside 1..{len(self.roles)}")
        return self.roles[position - 1]

    @property
    def n(self) -> int:
        return len(self.roles) // 2

    def values(self) -> Tuple[int, ...]:
        return tuple(int(r) for r in self.roles)


@dataclass(frozen=True)
class Pairing:
    """
    A complete pairing of annihilator positions with earlier creator positions.

    Attributes:
        pairs: (mbar, m) tuples with mbar > m, sorted by creator position m
    """

    pairs: Tuple[Pair, ...]

    def __post_init__(self):
        pairs = tuple(sorted(((int(a), int(c)) for a, c in self.pairs),
                             key=lambda pair: pair[1]))
        object.__setattr__(self, "pairs", pairs)
        for mbar, m in pairs:
            if mbar <= m:
                raise ValueError(f"pair ({mbar}, {m}) must have mbar > m")
        positions = [i for pair in pairs for i in pair]
        if sorted(positions) != list(range(1, len(positions) + 1)):
            raise ValueError(f"pairs {pairs} do not cover 1..{len(positions)} exactly once")

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def emitters(self) -> Tuple[int, ...]:
        """Creator positions M = (m_n, ..., m_1), largest first."""
        return tuple(sorted((m for _, m in self.pairs), reverse=True))

    def partner(self) -> Dict[int, int]:
        """Map every position to the position it is paired with."""
        mapping = {}
        for mbar, m in self.pairs:
            mapping[mbar] = m
            mapping[m] = mbar
        return mapping

    def matches(self, eps: EpsilonSeq) -> bool:
        """True if each pair joins a creator (m) to an annihilator (mbar) of eps."""
        if 2 * self.n != len(eps):
            return False
        return all(
            eps[m] == Role.CREATOR and eps[mbar] == Role.ANNIHILATOR
            for mbar, m in self.pairs
        )

    def label(self) -> str:
        return " ".join(f"({mbar},{m})" for mbar, m in self.pairs)


def parse_epsilon(text: Union[str, Sequence[int]]) -> EpsilonSeq:
    """
    Parse an epsilon sequence.

    Args:
        text: Either a comma list in index order ("1,1,0,0" is eps_1=1,
              eps_2=1, eps_3=0, eps_4=0) or a bare digit string read
              right-to-left ("0011" is the same sequence), or a sequence of ints

    Returns:
        The parsed EpsilonSeq
    """
    if not isinstance(text, str):
        return EpsilonSeq(tuple(Role(int(v)) for v in text))
    cleaned = text.strip()
    if "," in cleaned:
        values = [int(tok) for tok in cleaned.split(",") if tok.strip()]
    else:
        values = [int(ch) for ch in reversed(cleaned)]
    for v in values:
        if v not in (0, 1):
            raise ValueError(f"epsilon entries must be 0 or 1, got {v!r} in {text!r}")
    return EpsilonSeq(tuple(Role(v) for v in values))


def format_epsilon(eps: EpsilonSeq) -> str:
    return ",".join(str(v) for v in eps.values())


def emitters(eps: EpsilonSeq) -> List[int]:
    """Creator positions in increasing order."""
    return [j for j in range(1, len(eps) + 1) if eps[j] == Role.CREATOR]


def absorbers(eps: EpsilonSeq) -> List[int]:
    """Annihilator positions in increasing order."""
    return [j for j in range(1, len(eps) + 1) if eps[j] == Role.ANNIHILATOR]


def is_nontrivial(eps: EpsilonSeq) -> bool:
    """Ballot condition: no prefix (from position 1) has more annihilators than creators."""
    balance = 0
    for role in eps.roles:
        balance += 1 if role == Role.CREATOR else -1
        if balance < 0:
            return False
    return balance == 0


def enumerate_pairings(
    eps: EpsilonSeq, max_length: int = MAX_ENUMERATION_LENGTH
) -> List[Pairing]:
    """
    All pairings of each annihilator with an earlier (lower-position) creator.

    This is the set of contractions that arise while normal ordering, so it
    is exhaustive for the Gaussian (Wick) expansion. The count grows
    factorially; it is an oracle, capped at ``max_length`` positions.

    Args:
        eps: Creator/annihilator pattern
        max_length: Largest 2n accepted

    Returns:
        Pairings in a deterministic order; empty if eps is trivial
    """
    if len(eps) > max_length:
        raise PairingLimitError(
            f"pairing enumeration is capped at 2n <= {max_length}, got {len(eps)}"
        )
    if not is_nontrivial(eps):
        return []

    results: List[Pairing] = []
    open_creators: List[int] = []
    chosen: List[Pair] = []

    def walk(position: int) -> None:
        if position > len(eps):
            results.append(Pairing(tuple(chosen)))
            return
        if eps[position] == Role.CREATOR:
            open_creators.append(position)
            walk(position + 1)
            open_creators.pop()
            return
        for idx in range(len(open_creators)):
            m = open_creators.pop(idx)
            chosen.append((position, m))
            walk(position + 1)
            chosen.pop()
            open_creators.insert(idx, m)

    walk(1)
    return results


def _crosses(first: Pair, second: Pair) -> bool:
    (a1, c1), (a2, c2) = first, second
    return c1 < c2 < a1 < a2 or c2 < c1 < a2 < a1


def is_noncrossing(p: Pairing) -> bool:
    return not any(_crosses(x, y) for x, y in itertools.combinations(p.pairs, 2))


def wigner_pairing(eps: EpsilonSeq) -> Optional[Pairing]:
    """
    The unique non-crossing pairing of eps, or None if eps is trivial.

    Stack scan from position 1: creators are pushed, each annihilator closes
    the most recently opened creator.
    """
    stack: List[int] = []
    pairs: List[Pair] = []
    for position in range(1, len(eps) + 1):
        if eps[position] == Role.CREATOR:
            stack.append(position)
        elif not stack:
            return None
        else:
            pairs.append((position, stack.pop()))
    if stack:
        return None
    return Pairing(tuple(pairs))


def enclosing_pairs(p: Pairing, h: Pair) -> List[Pair]:
    """
    Pairs whose interval strictly contains the interval of pair h.

    These are the quanta emitted before vertex m_h and not yet reabsorbed, so
    the particle momentum at the vertex is p minus hbar times their momenta.

    Args:
        p: A non-crossing pairing
        h: One of its pairs, as (mbar, m)

    Returns:
        Enclosing pairs, outermost first
    """
    h = (int(h[0]), int(h[1]))
    if h not in p.pairs:
        raise ValueError(f"pair {h} is not part of pairing {p.label()}")
    if not is_noncrossing(p):
        raise CrossingPairingError(
            f"pairing {p.label()} is crossing; its nesting forest is undefined"
        )
    mbar_h, m_h = h
    found = [(mbar, m) for mbar, m in p.pairs if m < m_h and mbar_h < mbar]
    return sorted(found, key=lambda pair: pair[1])


def nesting_depth(p: Pairing, h: Pair) -> int:
    return len(enclosing_pairs(p, h))


def outermost_first(p: Pairing) -> List[Pair]:
    """Pairs ordered so that every pair comes after all pairs enclosing it."""
    return sorted(p.pairs, key=lambda pair: (pair[0] - pair[1]), reverse=True)


def children(p: Pairing, h: Optional[Pair]) -> List[Pair]:
    """
    Direct children of h in the nesting forest (top-level pairs when h is None).
    """
    depth_of = {pair: nesting_depth(p, pair) for pair in p.pairs}
    if h is None:
        return [pair for pair in p.pairs if depth_of[pair] == 0]
    target = depth_of[h] + 1
    mbar_h, m_h = h
    return [
        (mbar, m)
        for mbar, m in p.pairs
        if depth_of[(mbar, m)] == target and m_h < m and mbar < mbar_h
    ]


def momentum_balance(eps: EpsilonSeq, pairing: Pairing) -> bool:
    """
    Structural check that sum_l (-1)^{eps_l} k_l vanishes under the pairing.

    Each position contributes +1 (annihilator) or -1 (creator) times the
    momentum label of its pair; the coefficients must cancel label by label.
    """
    if not pairing.matches(eps):
        return False
    coefficients: Dict[int, int] = {}
    for label, (mbar, m) in enumerate(pairing.pairs):
        for position in (mbar, m):
            sign = -1 if eps[position] == Role.CREATOR else 1
            coefficients[label] = coefficients.get(label, 0) + sign
    return all(c == 0 for c in coefficients.values())


def iter_sequences(length: int) -> Iterator[EpsilonSeq]:
    """Every epsilon sequence of the given even length."""
    for values in itertools.product((1, 0), repeat=length):
        yield EpsilonSeq(tuple(Role(v) for v in values))


def require_nontrivial(eps: EpsilonSeq) -> Pairing:
    pairing = wigner_pairing(eps)
    if pairing is None:
        raise TrivialSequenceError(f"epsilon {format_epsilon(eps)} is trivial")
    return pairing
