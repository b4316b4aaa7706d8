"""
Physical data of the particle-plus-reservoir model and its two-point kernels.

Conventions:
    Delta(l, k) = -(1/m) l.k + omega(k) + (hbar/2m)|k|^2 is the energy violation
    of an emission vertex at particle momentum l.
    int dtau e^{i Delta tau} is normalized to 2 pi delta(Delta) throughout, so
    (f|g)_l = 2 pi sum_r conj(f(k_r)) g(k_r) / |dDelta/dk|(k_r) over the shell.

Energy shells are solved in closed form in d=1: every supported dispersion
makes Delta(l, .) a quadratic polynomial on each of at most two half-lines.
"""

import logging
from dataclasses import dataclass
from typing import Annotated, Any, ClassVar, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, TypeAdapter, ValidationError

from src.algebra.errors import ConfigError, DegenerateShell, UnsupportedModel
from src.app import metrics
from src.physics.quadrature import complex_quad, lorentzian, regulated_limit

logger = logging.getLogger(__name__)

# half-width of the integration window around a Gaussian, in widths
WINDOW_WIDTHS = 12.0
ETA_FRACTION = 1e-2


class PhysParams(BaseModel):
    """
    Attributes:
        hbar: Planck constant
        mass: Particle mass m
        dim: Space dimension, 1 or 3
        root_tol: Shells with |dDelta/dk| below this at a root are degenerate
        quad_tol: Relative tolerance for adaptive quadrature
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    hbar: PositiveFloat = 1.0
    mass: PositiveFloat = 1.0
    dim: Literal[1, 3] = 1
    root_tol: PositiveFloat = 1e-6
    quad_tol: PositiveFloat = 1e-8

    @property
    def recoil(self) -> float:
        """Coefficient hbar/2m of |k|^2 in Delta."""
        return self.hbar / (2.0 * self.mass)


@dataclass(frozen=True)
class ShellBranch:
    """Delta restricted to k in [lo, hi] equals (recoil + c2) k^2 + (c1 - l/m) k + c0."""

    c2: float
    c1: float
    c0: float
    lo: float = -np.inf
    hi: float = np.inf


class ConstantDispersion(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")
    kind: ClassVar[str] = "constant"

    type: Literal["constant"] = "constant"
    omega0: NonNegativeFloat

    def __init__(self, omega0: Optional[float] = None, **data: Any):
        if omega0 is not None:
            data["omega0"] = omega0
        super().__init__(**data)

    def omega(self, kabs):
        return np.full_like(np.asarray(kabs, dtype=float), self.omega0)

    def branches(self) -> List[ShellBranch]:
        return [ShellBranch(0.0, 0.0, self.omega0)]

    def extra_curvature(self) -> Optional[float]:
        return 0.0


class QuadraticDispersion(BaseModel):
    """omega(k) = omega0 + |k|^2 / (2 mu)."""

    model_config = ConfigDict(frozen=True, extra="forbid")
    kind: ClassVar[str] = "quadratic"

    type: Literal["quadratic"] = "quadratic"
    omega0: NonNegativeFloat
    mu: PositiveFloat

    def __init__(self, omega0: Optional[float] = None, mu: Optional[float] = None, **data: Any):
        if omega0 is not None:
            data["omega0"] = omega0
        if mu is not None:
            data["mu"] = mu
        super().__init__(**data)

    def omega(self, kabs):
        kabs = np.asarray(kabs, dtype=float)
        return self.omega0 + kabs * kabs / (2.0 * self.mu)

    def branches(self) -> List[ShellBranch]:
        return [ShellBranch(1.0 / (2.0 * self.mu), 0.0, self.omega0)]

    def extra_curvature(self) -> Optional[float]:
        return 1.0 / (2.0 * self.mu)


class LinearDispersion(BaseModel):
    """omega(k) = c |k|; in d=1 the shell is solved separately on k >= 0 and k <= 0."""

    model_config = ConfigDict(frozen=True, extra="forbid")
    kind: ClassVar[str] = "linear"

    type: Literal["linear"] = "linear"
    c: PositiveFloat

    def __init__(self, c: Optional[float] = None, **data: Any):
        if c is not None:
            data["c"] = c
        super().__init__(**data)

    def omega(self, kabs):
        return self.c * np.abs(np.asarray(kabs, dtype=float))

    def branches(self) -> List[ShellBranch]:
        return [
            ShellBranch(0.0, self.c, 0.0, 0.0, np.inf),
            ShellBranch(0.0, -self.c, 0.0, -np.inf, 0.0),
        ]

    def extra_curvature(self) -> Optional[float]:
        # not a polynomial in k: no closed-form Gaussian transform
        return None


Dispersion = Union[ConstantDispersion, QuadraticDispersion, LinearDispersion]
# JSON form: the "type" field selects the model
DispersionSpec = Annotated[Dispersion, Field(discriminator="type")]


@dataclass(frozen=True, eq=False)
class FormFactor:
    """
    Gaussian form factor g(k) = amplitude * exp(-|k - center|^2 / (2 width^2)).

    Closed under conj() and pointwise products, so f-bar g is again a FormFactor.
    """

    amplitude: complex
    center: np.ndarray
    width: float

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if center.ndim != 1:
            raise ValueError(f"center must be a vector, got shape {center.shape}")
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        object.__setattr__(self, "width", float(self.width))

    @classmethod
    def gaussian(cls, amplitude: complex = 1.0, center=0.0, width: float = 1.0) -> "FormFactor":
        return cls(amplitude, center, width)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def _sq_dist(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if self.dim == 1:
            if k.ndim and k.shape[-1] == 1:
                k = k[..., 0]
            return np.square(k - self.center[0])
        return np.sum(np.square(k - self.center), axis=-1)

    def __call__(self, k):
        return self.amplitude * np.exp(-self._sq_dist(k) / (2.0 * self.width ** 2))

    def conj(self) -> "FormFactor":
        return FormFactor(np.conj(self.amplitude), self.center.copy(), self.width)

    def scaled(self, c: complex) -> "FormFactor":
        return FormFactor(c * self.amplitude, self.center.copy(), self.width)

    def __mul__(self, other: "FormFactor") -> "FormFactor":
        if not isinstance(other, FormFactor):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError(f"cannot multiply form factors of dimension {self.dim} and {other.dim}")
        sa, sb = self.width ** 2, other.width ** 2
        var = 1.0 / (1.0 / sa + 1.0 / sb)
        center = var * (self.center / sa + other.center / sb)
        gap = float(np.sum(np.square(self.center - other.center)))
        amplitude = self.amplitude * other.amplitude * np.exp(-gap / (2.0 * (sa + sb)))
        return FormFactor(amplitude, center, np.sqrt(var))

    def integral(self) -> complex:
        return self.amplitude * (2.0 * np.pi * self.width ** 2) ** (self.dim / 2.0)

    def window(self) -> Tuple[float, float]:
        """Interval (d=1) outside which the Gaussian is numerically zero."""
        half = WINDOW_WIDTHS * self.width
        return self.center[0] - half, self.center[0] + half

    def __repr__(self) -> str:
        return f"FormFactor(amplitude={self.amplitude!r}, center={self.center.tolist()}, width={self.width!r})"


def _scalar(l) -> float:
    arr = np.ravel(np.asarray(l, dtype=float))
    if arr.size != 1:
        raise UnsupportedModel(f"energy shells are solved in d=1 only, got momentum of size {arr.size}")
    return float(arr[0])


def _require_1d(pp: PhysParams, what: str) -> None:
    if pp.dim != 1:
        raise UnsupportedModel(f"{what} is implemented for d=1, configured d={pp.dim}")


def delta_energy(pp: PhysParams, disp: Dispersion, l, k):
    """Delta(l,k) = -(1/m) l.k + omega(k) + (hbar/2m)|k|^2; vectorized over k (last axis d when d > 1)."""
    k = np.asarray(k, dtype=float)
    l = np.asarray(l, dtype=float)
    if pp.dim == 1:
        k1 = k[..., 0] if (k.ndim and k.shape[-1] == 1) else k
        l1 = _scalar(l)
        return -l1 * k1 / pp.mass + disp.omega(np.abs(k1)) + pp.recoil * k1 * k1
    ksq = np.sum(k * k, axis=-1)
    return -np.sum(l * k, axis=-1) / pp.mass + disp.omega(np.sqrt(ksq)) + pp.recoil * ksq


@dataclass(frozen=True)
class ShellRoot:
    """
    A zero of Delta(l, .) with its Golden-rule weight.

    Attributes:
        k: Root position
        jacobian: |dDelta/dk| at the root, doubled for a root sitting on the
                  boundary of a half-line branch (it is shared with the
                  neighbouring branch)
    """

    k: float
    jacobian: float


def _branch_roots(pp: PhysParams, branch: ShellBranch, l: float, strict: bool) -> List[ShellRoot]:
    a = pp.recoil + branch.c2
    b = branch.c1 - l / pp.mass
    c = branch.c0
    disc = b * b - 4.0 * a * c
    if strict and abs(disc) < pp.root_tol ** 2:
        k = -b / (2.0 * a)
        if branch.lo <= k <= branch.hi:
            metrics.degenerate_shells_total.inc()
            logger.debug("Tangent energy shell", extra={"l": l, "k": k})
            raise DegenerateShell(
                f"energy shell at l={l:.17g} is tangent near k={k:.17g} (|dDelta/dk| ~ {np.sqrt(abs(disc)):.3e})",
                l=[l],
                k=k,
                jacobian=float(np.sqrt(abs(disc))),
            )
    if disc < 0:
        return []
    root = np.sqrt(disc)
    found = []
    for k in sorted({(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)}):
        if not branch.lo <= k <= branch.hi:
            continue
        on_edge = k == branch.lo or k == branch.hi
        found.append(ShellRoot(float(k), float(root) * (2.0 if on_edge else 1.0)))
    return found


def shell_roots(pp: PhysParams, disp: Dispersion, l) -> List[ShellRoot]:
    """
    All real roots of Delta(l, .) = 0 in d=1 with their jacobians.

    Raises:
        DegenerateShell: if some root has |dDelta/dk| < root_tol
        UnsupportedModel: if d != 1
    """
    _require_1d(pp, "shell_roots")
    l = _scalar(l)
    metrics.shell_evaluations_total.labels(dispersion=disp.kind).inc()
    roots: List[ShellRoot] = []
    for branch in disp.branches():
        roots.extend(_branch_roots(pp, branch, l, strict=True))
    return sorted(roots, key=lambda r: r.k)


def shell_points(pp: PhysParams, disp: Dispersion, l) -> List[float]:
    """Roots of Delta(l, .) without the degeneracy check, plus the kink of |k|; break points for quadrature."""
    l = _scalar(l)
    points = [r.k for branch in disp.branches() for r in _branch_roots(pp, branch, l, strict=False)]
    if isinstance(disp, LinearDispersion):
        points.append(0.0)
    return sorted(set(points))


def shell_integral(pp: PhysParams, disp: Dispersion, F: FormFactor, l) -> complex:
    """2 pi sum_r F(k_r) / jacobian_r over the shell Delta(l, k) = 0."""
    total = 0j
    for root in shell_roots(pp, disp, l):
        total += F(root.k) / root.jacobian
    return complex(2.0 * np.pi * total)


def pairing_kernel(pp: PhysParams, disp: Dispersion, f: FormFactor, g: FormFactor, l) -> complex:
    """(f|g)_l = 2 pi sum_r conj(f(k_r)) g(k_r) / |dDelta/dk|(k_r)."""
    return shell_integral(pp, disp, f.conj() * g, l)


def characteristic_eta(pp: PhysParams, disp: Dispersion, F: FormFactor, l) -> float:
    """
    First regulator of the eta -> 0 extrapolation: a small fraction of the
    spread of Delta(l, .) across one width of F around its center.
    """
    c, s = F.center[0], F.width
    sample = delta_energy(pp, disp, l, np.linspace(c - s, c + s, 33))
    spread = float(np.max(sample) - np.min(sample))
    return ETA_FRACTION * (spread if spread > 0 else 1.0)


def lorentzian_integral(pp: PhysParams, disp: Dispersion, F: FormFactor, l, eta: float) -> complex:
    """int dk F(k) 2 eta / (Delta(l,k)^2 + eta^2)."""
    _require_1d(pp, "lorentzian_integral")
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    a, b = F.window()
    return complex_quad(
        lambda k: F(k) * lorentzian(delta_energy(pp, disp, l, k), eta),
        a, b,
        routine="pairing_kernel_regulated",
        epsrel=max(pp.quad_tol, 1e-10),
        points=shell_points(pp, disp, l),
    )


def pairing_kernel_regulated(pp: PhysParams, disp: Dispersion, f: FormFactor, g: FormFactor, l,
                             eta: float) -> complex:
    """The kernel with int dtau damped by e^{-eta|tau|}: 2 pi delta(Delta) -> 2 eta/(Delta^2 + eta^2)."""
    return lorentzian_integral(pp, disp, f.conj() * g, l, eta)


def regulated_pairing_kernel_limit(pp: PhysParams, disp: Dispersion, f: FormFactor, g: FormFactor, l,
                                   levels: int = 3) -> complex:
    """
    Extrapolation of pairing_kernel_regulated over eta0, eta0/2, eta0/4 to eta -> 0.

    For omega = c|k| the shell always has a root at the kink k = 0, where the
    slopes of Delta on the two sides differ. Each half-line then contributes an
    eta log(1/eta) term with slope-dependent weight that does not cancel, so
    the limit is taken with log_richardson rather than the power-series table.
    """
    F = f.conj() * g
    eta0 = characteristic_eta(pp, disp, F, l)
    value, _ = regulated_limit(
        lambda eta: lorentzian_integral(pp, disp, F, l, eta), eta0, levels,
        log_term=isinstance(disp, LinearDispersion),
    )
    return value


def bose_roots(pp: PhysParams, disp: Dispersion, omega_probe: float) -> List[ShellRoot]:
    """Roots of omega(k) = omega_probe in d=1 with |omega'(k)|."""
    _require_1d(pp, "bose_kernel")
    metrics.shell_evaluations_total.labels(dispersion=disp.kind).inc()
    if isinstance(disp, ConstantDispersion):
        raise UnsupportedModel("a constant dispersion has no simple probing-frequency shell")
    if isinstance(disp, LinearDispersion):
        if omega_probe < 0:
            return []
        if omega_probe == 0:
            # kink of c|k|: both half-lines contribute 1/(2c)
            return [ShellRoot(0.0, disp.c)]
        k = omega_probe / disp.c
        return [ShellRoot(-k, disp.c), ShellRoot(k, disp.c)]
    excess = omega_probe - disp.omega0
    if excess < 0:
        return []
    k = np.sqrt(2.0 * disp.mu * excess)
    slope = k / disp.mu
    if slope < pp.root_tol:
        metrics.degenerate_shells_total.inc()
        raise DegenerateShell(
            f"probing frequency {omega_probe} sits at the bottom of the band", k=0.0, jacobian=slope
        )
    return [ShellRoot(float(-k), float(slope)), ShellRoot(float(k), float(slope))]


def bose_kernel(pp: PhysParams, disp: Dispersion, omega_probe: float, f: FormFactor, g: FormFactor) -> complex:
    """2 pi sum_r conj(f(k_r)) g(k_r) / |omega'(k_r)| over omega(k) = omega_probe."""
    F = f.conj() * g
    total = sum(F(r.k) / r.jacobian for r in bose_roots(pp, disp, omega_probe))
    return complex(2.0 * np.pi * total)


def bose_kernel_regulated(pp: PhysParams, disp: Dispersion, omega_probe: float, f: FormFactor,
                          g: FormFactor, eta: float) -> complex:
    """int dk conj(f) g 2 eta / ((omega(k) - omega_probe)^2 + eta^2)."""
    _require_1d(pp, "bose_kernel_regulated")
    if eta <= 0:
        raise ValueError(f"eta must be positive, got {eta}")
    F = f.conj() * g
    a, b = F.window()
    points = [0.0]
    if not isinstance(disp, ConstantDispersion):
        try:
            points += [r.k for r in bose_roots(pp, disp, omega_probe)]
        except DegenerateShell:
            pass
    return complex_quad(
        lambda k: F(k) * lorentzian(disp.omega(np.abs(k)) - omega_probe, eta),
        a, b,
        routine="bose_kernel_regulated",
        epsrel=max(pp.quad_tol, 1e-10),
        points=points,
    )


def time_kernel(pp: PhysParams, disp: Dispersion, f: FormFactor, g: FormFactor, l, v):
    """
    K(v) = int dk conj(f(k)) g(k) e^{i Delta(l,k) v}; v may be an array.

    Constant and Quadratic dispersions make the exponent a complex quadratic
    form, integrated in closed form in any dimension:
        int exp(-a|k|^2 + b.k + e0) dk = (pi/a)^{d/2} exp(b.b/(4a) + e0), Re a > 0.
    Linear dispersion is integrated numerically in d=1.
    """
    F = f.conj() * g
    v = np.asarray(v, dtype=float)
    curvature = disp.extra_curvature()
    if curvature is not None:
        alpha = pp.recoil + curvature
        var = F.width ** 2
        lv = np.broadcast_to(np.atleast_1d(np.asarray(l, dtype=float)), F.center.shape)
        a = 1.0 / (2.0 * var) - 1j * alpha * v
        b = F.center / var - 1j * v[..., None] * lv / pp.mass
        e0 = -float(np.sum(F.center ** 2)) / (2.0 * var) + 1j * disp.omega0 * v
        prefactor = np.sqrt(np.pi / a) ** F.dim
        value = F.amplitude * prefactor * np.exp(np.sum(b * b, axis=-1) / (4.0 * a) + e0)
        return complex(value) if value.ndim == 0 else value

    if pp.dim != 1:
        raise UnsupportedModel(f"time_kernel for {disp.kind} dispersion needs d=1, configured d={pp.dim}")
    if v.ndim:
        flat = [time_kernel(pp, disp, f, g, l, float(x)) for x in v.ravel()]
        return np.array(flat, dtype=complex).reshape(v.shape)
    v = float(v)
    lo, hi = F.window()
    return complex_quad(
        lambda k: F(k) * np.exp(1j * v * delta_energy(pp, disp, l, k)),
        lo, hi,
        routine="time_kernel",
        epsrel=max(pp.quad_tol, 1e-10),
        points=[0.0],
    )


class GaussianSpec(BaseModel):
    """JSON record of a Gaussian form factor: {"type": "gaussian", "re_amp", "im_amp", "center", "width"}."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    type: Literal["gaussian"]
    re_amp: float
    im_amp: float
    center: Tuple[float, ...] = Field(min_length=1)
    width: PositiveFloat

    def build(self) -> FormFactor:
        return FormFactor(complex(self.re_amp, self.im_amp), list(self.center), self.width)


_DISPERSION_ADAPTER = TypeAdapter(DispersionSpec)


def parse_dispersion(data: Dict[str, Any]) -> Dispersion:
    """Build a dispersion from its JSON object ({"type": "quadratic", "omega0": .., "mu": ..} etc.)."""
    try:
        return _DISPERSION_ADAPTER.validate_python(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid dispersion: {exc}") from exc


def parse_form_factor(data: Dict[str, Any]) -> FormFactor:
    try:
        return GaussianSpec.model_validate(data).build()
    except ValidationError as exc:
        raise ConfigError(f"invalid gaussian form factor: {exc}") from exc
