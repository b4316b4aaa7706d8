"""
Exact algebra of Weyl operators W(a,b) = exp(i(a.p + b.q)), [q_j, p_l] = i hbar delta_jl.

A WeylOp carries a real phase angle theta and stands for e^{i theta} W(a,b).
Phases are accumulated as angles, never as complex numbers, and compared
modulo 2 pi. Vectors are numpy arrays of shape (..., d) so that every
operation also works on batches of momenta.
"""

from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Tuple

import numpy as np

from src.algebra.errors import DimensionMismatch

PHASE_TOL = 1e-12


def _vec(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    return arr.reshape(1) if arr.ndim == 0 else arr


def _dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sum(x * y, axis=-1)


@dataclass(frozen=True, eq=False)
class WeylOp:
    """
    e^{i phase} W(a, b).

    Attributes:
        a: Coefficient of p, shape (..., d)
        b: Coefficient of q, shape (..., d)
        phase: Real angle, accumulated exactly (not reduced mod 2 pi)
    """

    a: np.ndarray
    b: np.ndarray
    phase: float = 0.0

    def __post_init__(self):
        a, b = _vec(self.a), _vec(self.b)
        if a.shape[-1] != b.shape[-1]:
            raise DimensionMismatch(f"a has dimension {a.shape[-1]}, b has {b.shape[-1]}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "phase", np.asarray(self.phase, dtype=float)
                           if np.ndim(self.phase) else float(self.phase))

    @property
    def dim(self) -> int:
        return self.a.shape[-1]

    def __repr__(self) -> str:
        return f"WeylOp(a={self.a.tolist()}, b={self.b.tolist()}, phase={self.phase!r})"


def identity(dim: int) -> WeylOp:
    return WeylOp(np.zeros(dim), np.zeros(dim), 0.0)


def adjoint(w: WeylOp) -> WeylOp:
    """(e^{i theta} W(a,b))^dagger = e^{-i theta} W(-a,-b)."""
    return WeylOp(-w.a, -w.b, -w.phase)


def _check_same_dim(w1: WeylOp, w2: WeylOp) -> None:
    if w1.dim != w2.dim:
        raise DimensionMismatch(f"cannot multiply Weyl operators of dimension {w1.dim} and {w2.dim}")


def multiply(w1: WeylOp, w2: WeylOp, hbar: float) -> WeylOp:
    """
    Group law with w1 as the LEFT factor:
    W(a1,b1) W(a2,b2) = W(a1+a2, b1+b2) exp{(i hbar/2)(a1.b2 - a2.b1)}.
    """
    _check_same_dim(w1, w2)
    cocycle = 0.5 * hbar * (_dot(w1.a, w2.b) - _dot(w2.a, w1.b))
    return WeylOp(w1.a + w2.a, w1.b + w2.b, w1.phase + w2.phase + cocycle)


def multiply_chain(ws: Sequence[WeylOp], hbar: float) -> WeylOp:
    """
    Product of a chain listed with index 1 as the RIGHTMOST factor.

    The operator is ws[-1] ... ws[1] ws[0]; its phase is
    (hbar/2) sum_{j<l} (a_l.b_j - a_j.b_l) plus the individual phases, which
    is the left fold of ``multiply`` in display order.
    """
    if not ws:
        raise ValueError("cannot multiply an empty chain of Weyl operators")
    return reduce(lambda left, right: multiply(left, right, hbar), reversed(list(ws)))


def evolve_free(w: WeylOp, t: float, m: float) -> WeylOp:
    """Free evolution p_t = p, q_t = q + (t/m) p: W(a,b) -> W(a + (t/m) b, b)."""
    if m <= 0:
        raise ValueError(f"mass must be positive, got {m}")
    return WeylOp(w.a + (t / m) * w.b, w.b.copy(), w.phase)


def momentum_phase(w: WeylOp, p, hbar: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Angle and shifted momentum of e^{i theta} W(a,b) acting on |p>.

    W(a,b)|p> = exp{i(a.p + hbar a.b/2)} |p + hbar b>.

    Returns:
        (angle, p + hbar b); broadcasting over leading axes
    """
    p = _vec(p)
    if p.shape[-1] != w.dim:
        raise DimensionMismatch(f"momentum has dimension {p.shape[-1]}, operator {w.dim}")
    angle = w.phase + _dot(w.a, p) + 0.5 * hbar * _dot(w.a, w.b)
    return angle, p + hbar * w.b


def momentum_action(w: WeylOp, p, hbar: float) -> Tuple[complex, np.ndarray]:
    """Phase factor and shifted momentum: W(a,b)|p> = factor |p'>."""
    angle, shifted = momentum_phase(w, p, hbar)
    return np.exp(1j * angle), shifted


def field_vertex(k, tau: float, creator: bool, m: float) -> WeylOp:
    """
    Weyl factor attached to a reservoir creator/annihilator of momentum k at
    interaction-picture time tau: W(-(tau/m) k, -k) for a creator,
    W((tau/m) k, k) for an annihilator.
    """
    k = _vec(k)
    sign = -1.0 if creator else 1.0
    return WeylOp(sign * (tau / m) * k, sign * k, 0.0)


def wrap_angle(theta):
    return (np.asarray(theta) + np.pi) % (2.0 * np.pi) - np.pi


def phases_equal(w1: WeylOp, w2: WeylOp, tol: float = PHASE_TOL) -> bool:
    """Equality of (a, b) and of the phase modulo 2 pi."""
    if w1.dim != w2.dim:
        return False
    same_ab = np.allclose(w1.a, w2.a, rtol=0.0, atol=tol) and np.allclose(w1.b, w2.b, rtol=0.0, atol=tol)
    return bool(same_ab and np.all(np.abs(wrap_angle(w1.phase - w2.phase)) <= tol))
