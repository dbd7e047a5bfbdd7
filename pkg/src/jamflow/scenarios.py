"""Built-in scenarios and manufactured solutions.

Scenario constants below were tuned once against the acceptance runs: the
gas exponent is deliberately high so the gas stays soft until the barrier
takes over, and the steep-law exponents are at the shallow end so the jam
structure reacts visibly across a stiffness sweep.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .domain import (
    build_barrier,
    ConstantBarrier,
    GaussianBumpBarrier,
    Grid,
    InitialData,
    PipeBarrier,
    profile_values,
    TanhStepBarrier,
)
from .errors import BarrierViolation, ParameterError, SpecError, UnknownScenario
from .pressure import (
    BarotropicLaw,
    FluidParams,
    SedimentationLaw,
    SingularLaw,
    TruncatedLaw,
)


@dataclass(frozen=True)
class FillFraction:
    """Initial density as a fixed fraction of the local barrier."""

    fraction: float
    kind = "fill_fraction"

    def __post_init__(self):
        if not (0.0 < self.fraction < 1.0):
            raise ParameterError(f"fill fraction must lie in (0, 1), got {self.fraction}")


@dataclass(frozen=True)
class InitialSpec:
    """Density profile plus a uniform initial velocity."""

    profile: object  # any barrier-style profile spec, or FillFraction
    velocity: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "velocity", tuple(float(v) for v in np.atleast_1d(self.velocity))
        )


def build_initial(spec, grid, barrier):
    """Sample an initial spec into cell-centered fields."""
    if len(spec.velocity) != grid.dim:
        raise SpecError(
            f"initial velocity has {len(spec.velocity)} components on a "
            f"{grid.dim}D grid"
        )
    if isinstance(spec.profile, FillFraction):
        rho0 = spec.profile.fraction * barrier.interior.copy()
    else:
        rho0, _ = profile_values(spec.profile, grid.meshes())
        rho0 = np.asarray(rho0, dtype=float)
    mom0 = np.stack([rho0 * v for v in spec.velocity])
    return InitialData(rho0=rho0, mom0=mom0)


# ---------------------------------------------------------------------------
# manufactured solutions

def _symbolic_pressure(law, r):
    """Congestion pressure as a sympy expression of the ratio symbol."""
    if law is None:
        return sp.Integer(0)
    if isinstance(law, SingularLaw):
        return law.eps * r**law.alpha / (1 - r) ** law.beta
    if isinstance(law, BarotropicLaw):
        return law.a * r**law.gamma_n
    if isinstance(law, TruncatedLaw):
        cap = 1 - law.delta
        steep = law.eps * r**law.alpha / (1 - r) ** law.beta
        capped = law.eps * r**law.alpha / law.delta**law.beta
        return law.kappa * r**law.cap_k + sp.Piecewise((steep, r < cap), (capped, True))
    if isinstance(law, SedimentationLaw):
        phi = law.phi_star * r
        return law.c0 * phi**law.s_exp / (law.phi_star - phi)
    raise ParameterError(f"no symbolic form for law {law!r}")


def _symbolic_barrier(spec, x):
    if spec is None:
        return sp.Integer(1)
    if isinstance(spec, (int, float)):
        return sp.Float(spec)
    if isinstance(spec, sp.Expr):
        return spec
    if isinstance(spec, ConstantBarrier):
        return sp.Float(spec.value)
    if isinstance(spec, TanhStepBarrier):
        arg = (x - spec.center) / spec.width
        return spec.left + (spec.right - spec.left) * (1 + sp.tanh(arg)) / 2
    if isinstance(spec, GaussianBumpBarrier):
        c = spec.center[0]
        return spec.base + spec.amp * sp.exp(-(((x - c) / spec.width) ** 2))
    if isinstance(spec, PipeBarrier):
        theta = sp.pi * (x - spec.center) / (2 * spec.halfwidth)
        depth = spec.base - spec.throat
        return sp.Piecewise(
            (spec.base - depth * sp.cos(theta) ** 2, abs(x - spec.center) <= spec.halfwidth),
            (spec.base, True),
        )
    raise SpecError(f"cannot lift barrier spec {spec!r} to a symbolic profile")


RATIO_MARGIN = 0.8


class ManufacturedSolution:
    """Closed-form fields with the forcing that makes them exact solutions.

    Given density and velocity expressions in (t, x), builds the mass and
    momentum sources by pushing the expressions through the full 1D balance
    laws (advection, gas pressure, barrier-weighted congestion pressure,
    viscous stress) and differentiating symbolically.  A solver run driven
    by these sources must converge to the expressions as the mesh refines.
    """

    def __init__(self, rho_expr, u_expr, law, params, barrier_spec=None):
        t, x = sp.symbols("t x", real=True)
        local = {"t": t, "x": x, "pi": sp.pi}
        rho = sp.sympify(rho_expr, locals=local)
        u = sp.sympify(u_expr, locals=local)
        bar = _symbolic_barrier(barrier_spec, x)
        ratio = rho / bar
        pi_c = _symbolic_pressure(law, ratio)
        gas = rho**params.gamma
        visc = (2 * params.mu + params.lam) * sp.diff(u, x, 2)
        mass_src = sp.diff(rho, t) + sp.diff(rho * u, x)
        mom_src = (
            sp.diff(rho * u, t)
            + sp.diff(rho * u * u, x)
            + sp.diff(gas, x)
            + bar * sp.diff(pi_c, x)
            - visc
        )
        self.law = law
        self.params = params
        self.exprs = {"rho": rho, "u": u, "barrier": bar}
        self._fns = {
            name: sp.lambdify((t, x), expr, modules="numpy")
            for name, expr in [
                ("rho", rho),
                ("u", u),
                ("mom", rho * u),
                ("mass_src", mass_src),
                ("mom_src", mom_src),
                ("ratio", ratio),
            ]
        }

    def _eval(self, name, t, x):
        out = self._fns[name](t, x)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(x)).copy() \
            if np.ndim(x) else float(out)

    def density(self, t, x):
        return self._eval("rho", t, x)

    def velocity(self, t, x):
        return self._eval("u", t, x)

    def momentum(self, t, x):
        return self._eval("mom", t, x)

    def mass_source(self, t, x):
        return self._eval("mass_src", t, x)

    def momentum_source(self, t, x):
        return self._eval("mom_src", t, x)

    def check_margin(self, t_end, extent=1.0, samples=512):
        ts = np.linspace(0.0, max(t_end, 1e-9), 65)
        xs = np.linspace(0.0, extent, samples)
        worst = max(float(np.max(self._fns["ratio"](tv, xs))) for tv in ts)
        if worst > RATIO_MARGIN:
            raise BarrierViolation(
                f"manufactured fields reach ratio {worst:.3f} > {RATIO_MARGIN}"
            )
        return worst

    def initial_data(self, grid):
        x = grid.centers(0)
        rho0 = self.density(0.0, x)
        mom0 = self.momentum(0.0, x)[None, :]
        return InitialData(rho0=rho0, mom0=mom0)

    def sources_for(self, grid):
        x = grid.centers(0)

        def sources(t):
            return self.mass_source(t, x), self.momentum_source(t, x)[None, :]

        return sources


def manufactured_sources(rho_expr, u_expr, law, params, barrier_spec, t, x):
    """Evaluate manufactured mass/momentum sources at given points.

    Raises BarrierViolation when the fields leave the safety margin
    ratio <= 0.8 at the evaluation points.
    """
    sol = ManufacturedSolution(rho_expr, u_expr, law, params, barrier_spec)
    ratio = np.asarray(sol._fns["ratio"](t, x), dtype=float)
    if np.any(ratio > RATIO_MARGIN):
        raise BarrierViolation(
            f"manufactured fields reach ratio {float(np.max(ratio)):.3f} > {RATIO_MARGIN}"
        )
    return sol.mass_source(t, x), sol.momentum_source(t, x)


MANUFACTURED_DENSITY = "0.5 + 0.2*sin(2*pi*x)*cos(t)"
MANUFACTURED_VELOCITY = "0.1*sin(2*pi*x)"


def manufactured_default(law, params, barrier_spec=None):
    """The pinned trigonometric manufactured pair used by the scenario."""
    return ManufacturedSolution(
        MANUFACTURED_DENSITY, MANUFACTURED_VELOCITY, law, params, barrier_spec
    )


# ---------------------------------------------------------------------------
# scenario registry

@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    grid: Grid
    barrier_spec: object
    initial_spec: InitialSpec | None
    law: object
    fluid: FluidParams
    t_end: float
    snapshot_every: float = 0.01
    manufactured: ManufacturedSolution | None = None

    def barrier(self, grid=None):
        return build_barrier(self.barrier_spec, grid or self.grid)

    def initial_data(self, grid=None, barrier=None):
        grid = grid or self.grid
        if self.manufactured is not None:
            return self.manufactured.initial_data(grid)
        barrier = barrier or self.barrier(grid)
        return build_initial(self.initial_spec, grid, barrier)


def _with_cells(grid, cells):
    if cells is None:
        return grid
    cells = tuple(int(n) for n in np.atleast_1d(cells))
    if len(cells) != len(grid.cells):
        raise ParameterError("cells override must match the scenario dimension")
    return Grid(extents=grid.extents, cells=cells)


def _traffic(cells):
    # Stiff gas exponent keeps the free stream honest about the unit
    # barrier: softer exponents let the pile absorb the ram load well
    # below saturation and the jam never forms.  The fine snapshot
    # cadence keeps time integrals of the recorded series accurate.
    return Scenario(
        name="traffic_1d",
        description="rightward stream piles up against the right wall",
        grid=_with_cells(Grid((1.0,), (200,)), cells),
        barrier_spec=ConstantBarrier(1.0),
        initial_spec=InitialSpec(
            profile=GaussianBumpBarrier(base=0.3, amp=0.4, center=(0.3,), width=0.1),
            velocity=(0.5,),
        ),
        law=SingularLaw(eps=1e-3, alpha=2.0, beta=2.0),
        fluid=FluidParams(mu=2e-3, lam=0.0, gamma=60.0),
        t_end=1.0,
        snapshot_every=0.002,
    )


def _lane(cells):
    return Scenario(
        name="lane_narrowing_1d",
        description="uniform stream meets a smooth drop in the maximal density",
        grid=_with_cells(Grid((1.0,), (200,)), cells),
        barrier_spec=TanhStepBarrier(left=1.0, right=0.6, center=0.5, width=0.05),
        initial_spec=InitialSpec(profile=ConstantBarrier(0.5), velocity=(0.3,)),
        law=SingularLaw(eps=1e-3, alpha=2.0, beta=2.0),
        fluid=FluidParams(mu=5e-3, lam=0.0, gamma=8.0),
        t_end=0.5,
        snapshot_every=0.001,
    )


def _pipe(cells):
    return Scenario(
        name="pipe_1d",
        description="nearly full channel squeezed through a cosine throat",
        grid=_with_cells(Grid((1.0,), (200,)), cells),
        barrier_spec=PipeBarrier(base=1.0, throat=0.8, center=0.5, halfwidth=0.2),
        initial_spec=InitialSpec(profile=FillFraction(0.8), velocity=(0.3,)),
        law=SingularLaw(eps=1e-3, alpha=2.0, beta=2.0),
        # the stiffer gas exponent and extra viscosity keep the throat
        # pocket from ringing antidissipatively once it saturates
        fluid=FluidParams(mu=1e-2, lam=0.0, gamma=12.0),
        t_end=0.5,
        snapshot_every=0.001,
    )


def _crowd(cells):
    # Blob and obstacle sit one blob-width apart and the drift is brisk,
    # so the leading edge reaches the capacity dip early and saturates
    # it well inside the short 2D horizon.
    return Scenario(
        name="crowd_blob_2d",
        description="dense blob drifts into a region of reduced capacity",
        grid=_with_cells(Grid((1.0, 1.0), (96, 96)), cells),
        barrier_spec=GaussianBumpBarrier(
            base=1.0, amp=-0.6, center=(0.6, 0.5), width=0.12
        ),
        initial_spec=InitialSpec(
            profile=GaussianBumpBarrier(base=0.15, amp=0.5, center=(0.32, 0.5), width=0.12),
            velocity=(1.0, 0.0),
        ),
        law=SingularLaw(eps=1e-3, alpha=2.0, beta=2.0),
        fluid=FluidParams(mu=1e-2, lam=0.0, gamma=8.0),
        t_end=0.3,
        snapshot_every=0.001,
    )


def _manufactured(cells):
    law = SingularLaw(eps=0.05, alpha=3.0, beta=3.0)
    fluid = FluidParams(mu=0.02, lam=0.0, gamma=2.0)
    barrier_spec = ConstantBarrier(1.0)
    sol = manufactured_default(law, fluid, barrier_spec)
    t_end = 0.2
    sol.check_margin(t_end)
    return Scenario(
        name="manufactured_1d",
        description="forced trigonometric fields for convergence measurement",
        grid=_with_cells(Grid((1.0,), (200,)), cells),
        barrier_spec=barrier_spec,
        initial_spec=None,
        law=law,
        fluid=fluid,
        t_end=t_end,
        manufactured=sol,
    )


_BUILDERS = {
    "traffic_1d": _traffic,
    "lane_narrowing_1d": _lane,
    "pipe_1d": _pipe,
    "crowd_blob_2d": _crowd,
    "manufactured_1d": _manufactured,
}

SCENARIO_NAMES = tuple(_BUILDERS)


def make_scenario(name, cells=None):
    try:
        builder = _BUILDERS[name]
    except KeyError:
        known = ", ".join(SCENARIO_NAMES)
        raise UnknownScenario(f"unknown scenario {name!r}; known: {known}") from None
    return builder(cells)


def scenario_descriptions():
    return {name: _BUILDERS[name](None).description for name in SCENARIO_NAMES}
