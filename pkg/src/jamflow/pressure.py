"""Congestion pressure laws and their energy potentials.

A law maps the congestion ratio r = density / local maximal density to a
scalar pressure.  Besides the pressure and its derivative each law exposes
two potentials that enter the energy balance of the flow:

* ``enthalpy``: the potential whose derivative is pressure'(r) / r,
  normalized to vanish at r = 0.  The congestion force equals density times
  the gradient of (fluid enthalpy + law enthalpy), which is what makes a
  discrete energy estimate possible even when the maximal density varies
  in space.
* ``energy_potential``: the antiderivative of pressure(r) / r**2, also
  vanishing at r = 0.  Density times this potential is the stored
  compression energy density of the congestion pressure.

The two are linked by

    enthalpy(r) = pressure(r) / r + energy_potential(r)

(integration by parts; the boundary term at 0 vanishes whenever the
pressure grows faster than linearly there), and equivalently by
``energy_potential + r * energy_potential' = enthalpy``, which the test
suite checks with finite differences.

Closed forms are used whenever the exponents allow them (integer numerator
exponent for the steep laws); otherwise the potentials fall back to
adaptive quadrature at relative tolerance 1e-10, cached per law and
argument.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import BarrierViolation, ParameterError, QuadratureFailure

QUAD_REL_TOL = 1e-10
# exponents below this make the stored energy too weak for the sharpest
# a-priori bounds; the laws still evaluate fine, so only warn
RECOMMENDED_MIN_EXPONENT = 3.0


class SteepnessWarning(UserWarning):
    """Exponent below the recommended range for the steep laws."""


def _as_ratio_array(r):
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0.0):
        raise ParameterError("law argument must be nonnegative")
    return arr


def _match_shape(values, template):
    if np.ndim(template) == 0:
        return float(values)
    return values


def _require_positive(kind, **fields):
    for name, value in fields.items():
        if not (value > 0.0):
            raise ParameterError(f"{kind} law: {name} must be positive, got {value}")


def _warn_if_shallow(kind, alpha, beta):
    if alpha < RECOMMENDED_MIN_EXPONENT or beta < RECOMMENDED_MIN_EXPONENT:
        warnings.warn(
            f"{kind} law with alpha={alpha}, beta={beta}: exponents below "
            f"{RECOMMENDED_MIN_EXPONENT} weaken the stored-energy bounds",
            SteepnessWarning,
            # 4 = past _warn_if_shallow, __post_init__, and the generated
            # dataclass __init__, landing on the constructing caller
            stacklevel=4,
        )


@dataclass(frozen=True)
class FluidParams:
    """Viscosities and the internal (gas) pressure exponent.

    The internal pressure is density**gamma; ``enthalpy`` is the potential
    with density * grad(enthalpy) = grad(internal pressure).
    """

    mu: float
    lam: float
    gamma: float

    def __post_init__(self):
        if not (self.mu > 0.0):
            raise ParameterError(f"mu must be positive, got {self.mu}")
        if not (2.0 * self.mu + self.lam > 0.0):
            raise ParameterError(
                f"2*mu + lambda must be positive, got {2.0 * self.mu + self.lam}"
            )
        if not (self.gamma > 1.0):
            raise ParameterError(f"gamma must exceed 1, got {self.gamma}")

    def pressure(self, rho):
        arr = np.asarray(rho, dtype=float)
        return _match_shape(arr**self.gamma, rho)

    def enthalpy(self, rho):
        arr = np.asarray(rho, dtype=float)
        g = self.gamma
        return _match_shape(g / (g - 1.0) * arr ** (g - 1.0), rho)


class PressureLawBase:
    """Common argument checking and the shared enthalpy identity."""

    kind = "base"
    # argument value where the law blows up; None when the law is finite
    # on the whole half line
    singular_at: float | None = None

    def _checked(self, r):
        arr = _as_ratio_array(r)
        if self.singular_at is not None and np.any(arr >= self.singular_at):
            raise BarrierViolation(
                f"{self.kind} law undefined at argument >= {self.singular_at}"
            )
        return arr

    def pressure(self, r):
        arr = self._checked(r)
        return _match_shape(self._pi(arr), r)

    def pressure_deriv(self, r):
        arr = self._checked(r)
        return _match_shape(self._dpi(arr), r)

    def energy_potential(self, r):
        arr = self._checked(r)
        return _match_shape(self._energy(arr), r)

    def enthalpy(self, r):
        arr = self._checked(r)
        safe = np.where(arr > 0.0, arr, 1.0)
        over_r = np.where(arr > 0.0, self._pi(arr) / safe, 0.0)
        return _match_shape(over_r + self._energy(arr), r)


@dataclass(frozen=True)
class SingularLaw(PressureLawBase):
    """Steep law eps * r**alpha / (1 - r)**beta on r in [0, 1)."""

    eps: float
    alpha: float
    beta: float

    kind = "singular"
    singular_at = 1.0

    def __post_init__(self):
        _require_positive(self.kind, eps=self.eps, alpha=self.alpha, beta=self.beta)
        _warn_if_shallow(self.kind, self.alpha, self.beta)

    def _pi(self, r):
        return self.eps * r**self.alpha * (1.0 - r) ** (-self.beta)

    def _dpi(self, r):
        a, b = self.alpha, self.beta
        return (
            self.eps
            * r ** (a - 1.0)
            * (1.0 - r) ** (-b - 1.0)
            * (a * (1.0 - r) + b * r)
        )

    def _energy(self, r):
        return _steep_energy(self, self.eps, self.alpha, self.beta, r)


@dataclass(frozen=True)
class BarotropicLaw(PressureLawBase):
    """Power law a * r**gamma_n, finite for every r >= 0."""

    a: float
    gamma_n: float

    kind = "barotropic"
    singular_at = None

    def __post_init__(self):
        _require_positive(self.kind, a=self.a)
        if not (self.gamma_n > 1.0):
            raise ParameterError(f"barotropic law: gamma_n must exceed 1, got {self.gamma_n}")

    def _pi(self, r):
        return self.a * r**self.gamma_n

    def _dpi(self, r):
        return self.a * self.gamma_n * r ** (self.gamma_n - 1.0)

    def _energy(self, r):
        g = self.gamma_n
        return self.a / (g - 1.0) * r ** (g - 1.0)


@dataclass(frozen=True)
class TruncatedLaw(PressureLawBase):
    """Steep law capped above 1 - delta, plus a stiff power background.

    Below 1 - delta this is kappa * s**cap_k + eps * s**alpha / (1-s)**beta;
    at and above 1 - delta the singular factor is frozen at delta**-beta, so
    the law is finite (and still increasing) for all s >= 0.  The derivative
    at the junction uses the right (capped) branch.
    """

    eps: float
    alpha: float
    beta: float
    kappa: float
    cap_k: float
    delta: float

    kind = "truncated"
    singular_at = None

    def __post_init__(self):
        _require_positive(
            self.kind,
            eps=self.eps,
            alpha=self.alpha,
            beta=self.beta,
            kappa=self.kappa,
        )
        if not (self.cap_k > 4.0):
            raise ParameterError(f"truncated law: cap_k must exceed 4, got {self.cap_k}")
        if not (0.0 < self.delta < 1.0):
            raise ParameterError(f"truncated law: delta must lie in (0, 1), got {self.delta}")
        _warn_if_shallow(self.kind, self.alpha, self.beta)

    @property
    def _cap(self):
        return 1.0 - self.delta

    def _pi(self, s):
        below = np.minimum(s, self._cap)
        steep = self.eps * below**self.alpha * (1.0 - below) ** (-self.beta)
        capped = self.eps * s**self.alpha * self.delta**-self.beta
        sing = np.where(s < self._cap, steep, capped)
        return self.kappa * s**self.cap_k + sing

    def _dpi(self, s):
        a, b = self.alpha, self.beta
        below = np.minimum(s, self._cap)
        steep = (
            self.eps
            * below ** (a - 1.0)
            * (1.0 - below) ** (-b - 1.0)
            * (a * (1.0 - below) + b * below)
        )
        capped = self.eps * a * s ** (a - 1.0) * self.delta**-b
        sing = np.where(s < self._cap, steep, capped)
        return self.kappa * self.cap_k * s ** (self.cap_k - 1.0) + sing

    def _energy(self, s):
        if self.alpha <= 1.0:
            raise ParameterError("truncated law: potentials need alpha > 1")
        k = self.cap_k
        background = self.kappa / (k - 1.0) * s ** (k - 1.0)
        below = np.minimum(s, self._cap)
        steep = _steep_energy(self, self.eps, self.alpha, self.beta, below)
        a = self.alpha
        tail = np.where(
            s > self._cap,
            self.eps
            * (s ** (a - 1.0) - self._cap ** (a - 1.0))
            / (self.delta**self.beta * (a - 1.0)),
            0.0,
        )
        return background + steep + tail


@dataclass(frozen=True)
class SedimentationLaw(PressureLawBase):
    """Suspension law c0 * phi**s_exp / (phi_star - phi) on [0, phi_star).

    The argument is the particle volume fraction; the blow-up sits at the
    random close packing fraction phi_star rather than at 1.
    """

    c0: float
    s_exp: float
    phi_star: float = 0.64

    kind = "sedimentation"

    def __post_init__(self):
        _require_positive(self.kind, c0=self.c0, phi_star=self.phi_star)
        if not (2.0 <= self.s_exp <= 5.0):
            raise ParameterError(
                f"sedimentation law: s_exp must lie in [2, 5], got {self.s_exp}"
            )

    @property
    def singular_at(self):
        return self.phi_star

    def _pi(self, phi):
        return self.c0 * phi**self.s_exp / (self.phi_star - phi)

    def _dpi(self, phi):
        s = self.s_exp
        num = s * self.phi_star - (s - 1.0) * phi
        return self.c0 * phi ** (s - 1.0) * num / (self.phi_star - phi) ** 2

    def _energy(self, phi):
        s, ps = self.s_exp, self.phi_star
        if float(s).is_integer():
            m = int(round(s)) - 2
            total = ps**m * np.log(ps / (ps - phi))
            for i in range(m):
                total = total - ps ** (m - 1 - i) * phi ** (i + 1) / (i + 1)
            return self.c0 * total
        flat = np.ravel(phi)
        out = np.array([_quad_energy_sediment(self, float(v)) for v in flat])
        return out.reshape(np.shape(phi))


def _steep_energy(law, eps, alpha, beta, r):
    """Antiderivative of eps * s**(alpha-2) * (1-s)**(-beta) from 0 to r."""
    if alpha <= 1.0:
        raise ParameterError(f"{law.kind} law: potentials need alpha > 1")
    if float(alpha).is_integer():
        return _steep_energy_closed(eps, int(round(alpha)), beta, np.asarray(r, dtype=float))
    flat = np.ravel(r)
    out = np.array([_quad_energy_steep(law, float(v)) for v in flat])
    return out.reshape(np.shape(r))


def _steep_energy_closed(eps, alpha, beta, r):
    # substitute s -> 1 - t and expand (1 - t)**(alpha - 2) binomially;
    # each term integrates to a power of (1 - r), or a log when the
    # exponent cancels
    m = alpha - 2
    one_minus = 1.0 - r
    total = np.zeros_like(one_minus)
    for k in range(m + 1):
        coeff = math.comb(m, k) * (-1.0) ** k
        expo = k - beta + 1.0
        if abs(expo) < 1e-12:
            term = -np.log(one_minus)
        else:
            term = (1.0 - one_minus**expo) / expo
        total = total + coeff * term
    return eps * total


@lru_cache(maxsize=1 << 16)
def _quad_energy_steep(law, r):
    # substituting t = s**(alpha-1) removes the weak endpoint singularity
    if r == 0.0:
        return 0.0
    a, b = law.alpha, law.beta
    p = 1.0 / (a - 1.0)

    def integrand(t):
        return (1.0 - t**p) ** (-b)

    return law.eps * p * _quad(integrand, 0.0, r ** (a - 1.0))


@lru_cache(maxsize=1 << 16)
def _quad_energy_sediment(law, phi):
    if phi == 0.0:
        return 0.0
    s, ps = law.s_exp, law.phi_star
    p = 1.0 / (s - 1.0)

    def integrand(t):
        return 1.0 / (ps - t**p)

    return law.c0 * p * _quad(integrand, 0.0, phi ** (s - 1.0))


def _quad(fn, lo, hi):
    value, err = integrate.quad(fn, lo, hi, epsabs=0.0, epsrel=QUAD_REL_TOL, limit=500)
    if not np.isfinite(value):
        raise QuadratureFailure("quadrature returned a non-finite value")
    if err > 1e3 * QUAD_REL_TOL * max(abs(value), 1e-300):
        raise QuadratureFailure(
            f"quadrature error estimate {err:.3e} exceeds tolerance for value {value:.3e}"
        )
    return value


class _ScaledRatioLaw:
    """View of a law whose natural argument is not the congestion ratio.

    Rescales the argument so the blow-up sits at ratio 1; derivative and the
    two potentials pick up the scale factor so that all identities between
    them survive unchanged.
    """

    kind = "scaled"
    singular_at = 1.0

    def __init__(self, law, scale):
        self.law = law
        self.scale = scale

    def pressure(self, r):
        return self.law.pressure(np.asarray(r, dtype=float) * self.scale)

    def pressure_deriv(self, r):
        return self.scale * self.law.pressure_deriv(np.asarray(r, dtype=float) * self.scale)

    def enthalpy(self, r):
        return self.scale * self.law.enthalpy(np.asarray(r, dtype=float) * self.scale)

    def energy_potential(self, r):
        return self.scale * self.law.energy_potential(np.asarray(r, dtype=float) * self.scale)


def ratio_law(law):
    """Return a view of ``law`` taking the congestion ratio as argument."""
    if isinstance(law, SedimentationLaw):
        return _ScaledRatioLaw(law, law.phi_star)
    return law


@lru_cache(maxsize=256)
def _floor_offset(law):
    c1 = 1.0 / (2.0 * (law.beta - 1.0))
    grid = np.linspace(0.0, 0.999, 20001)
    gap = c1 * law.eps * (1.0 - grid) ** (1.0 - law.beta) - law.energy_potential(grid)
    c2 = max(float(np.max(gap)), 0.0)
    return c2 * (1.0 + 1e-9) + 1e-15


def energy_potential_floor(law, r):
    """Check the steep law's stored energy against its diverging floor.

    For a steep law with integer exponents the stored-energy potential
    dominates c1 * eps * (1 - r)**(1 - beta) - c2 with c1 = 1/(2*(beta-1))
    and a constant c2 calibrated once per law.  Returns ``(holds, slack)``
    where slack is the pointwise margin.
    """
    if not isinstance(law, SingularLaw):
        raise ParameterError("energy floor check applies to the singular law only")
    if not (float(law.alpha).is_integer() and float(law.beta).is_integer()):
        raise ParameterError("energy floor check needs integer exponents")
    if law.beta < 2.0:
        raise ParameterError("energy floor check needs beta >= 2")
    arr = _as_ratio_array(r)
    if np.any(arr >= 1.0):
        raise BarrierViolation("energy floor check needs ratios below 1")
    c1 = 1.0 / (2.0 * (law.beta - 1.0))
    bound = c1 * law.eps * (1.0 - arr) ** (1.0 - law.beta) - _floor_offset(law)
    slack = law.energy_potential(arr) - bound
    holds = bool(np.all(slack >= 0.0))
    return holds, _match_shape(slack, r)


LAW_KINDS = {
    "singular": SingularLaw,
    "barotropic": BarotropicLaw,
    "truncated": TruncatedLaw,
    "sedimentation": SedimentationLaw,
}
