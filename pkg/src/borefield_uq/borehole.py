"""Quasi-stationary thermal model of a double-U borehole heat exchanger.

The four pipes are lumped into a downward and an upward channel coupled
to each other and to the borehole wall through a delta circuit of
thermal resistances.  Along the axis the two channel temperatures obey a
linear ODE system driven by the wall temperature profile; its closed
form uses five kernel functions of depth, so outlet temperature and
extracted power follow from two convolution integrals instead of a
numerical ODE solve.

Resistances are built from the tube dimensions: a convective film (with
a laminar/turbulent Nusselt correlation), conduction through the pipe
wall, and two-dimensional conduction in the grout evaluated by line
sources with an isothermal borehole wall.  The double-U is assumed
symmetric (same-loop legs diametrically opposite), which makes the two
channels exchange symmetric resistances with the wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateParametersError

#: Nusselt number of fully developed laminar pipe flow at uniform flux
NU_LAMINAR = 4.36
RE_LAMINAR_END = 2300.0
RE_TURBULENT_START = 3000.0


@dataclass(frozen=True)
class BHEParams:
    """Cross-section, fluid and flow data of one exchanger.

    Lengths in meters, conductivities in W/(m K), density in kg/m^3,
    heat capacity in J/(kg K), dynamic viscosity in Pa s, and the total
    volumetric flow through the exchanger (both loops together) in L/s.
    ``kind`` tags the pipe topology; only the double-U network is
    implemented.
    """

    length: float
    borehole_diameter: float
    pipe_outer_diameter: float
    pipe_wall_thickness: float
    shank_spacing: float
    pipe_conductivity: float
    grout_conductivity: float
    fluid_conductivity: float
    fluid_density: float
    fluid_heat_capacity: float
    fluid_viscosity: float
    flow_rate: float
    kind: str = "double-U"

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if name == "kind":
                continue
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.pipe_wall_thickness >= self.pipe_outer_diameter / 2.0:
            raise ValueError("pipe wall swallows the whole pipe")
        if self.shank_spacing / 2.0 + self.pipe_outer_diameter / 2.0 >= self.borehole_radius:
            raise ValueError("pipes do not fit inside the borehole")

    @property
    def borehole_radius(self) -> float:
        return self.borehole_diameter / 2.0

    @property
    def pipe_outer_radius(self) -> float:
        return self.pipe_outer_diameter / 2.0

    @property
    def pipe_inner_radius(self) -> float:
        return self.pipe_outer_diameter / 2.0 - self.pipe_wall_thickness

    @property
    def volumetric_flow(self) -> float:
        """Total flow through the exchanger in m^3/s."""
        return self.flow_rate * 1e-3

    @property
    def capacity_rate(self) -> float:
        """Total flow heat capacity rate in W/K."""
        return self.fluid_density * self.fluid_heat_capacity * self.volumetric_flow


#: A stock 152 mm double-U exchanger with a water-glycol fill at 0.5 l/s
DEFAULT_DOUBLE_U = BHEParams(
    length=81.0,
    borehole_diameter=0.1522,
    pipe_outer_diameter=0.032,
    pipe_wall_thickness=0.0029,
    shank_spacing=0.072,
    pipe_conductivity=0.42,
    grout_conductivity=2.0,
    fluid_conductivity=0.48,
    fluid_density=1052.0,
    fluid_heat_capacity=3795.0,
    fluid_viscosity=0.0052,
    flow_rate=0.5,
)


def nusselt_number(reynolds: float, prandtl: float) -> float:
    """Pipe-flow Nusselt number with a blended transition region.

    Laminar value below Re 2300, the Gnielinski correlation above
    Re 3000, and a linear blend in between so the resistance varies
    continuously with the flow rate.
    """
    if reynolds <= 0.0 or prandtl <= 0.0:
        raise ValueError("reynolds and prandtl must be positive")

    def turbulent(re):
        f = (0.79 * math.log(re) - 1.64) ** -2
        return (f / 8.0 * (re - 1000.0) * prandtl /
                (1.0 + 12.7 * math.sqrt(f / 8.0) * (prandtl ** (2.0 / 3.0) - 1.0)))

    if reynolds <= RE_LAMINAR_END:
        return NU_LAMINAR
    if reynolds >= RE_TURBULENT_START:
        return turbulent(reynolds)
    w = (reynolds - RE_LAMINAR_END) / (RE_TURBULENT_START - RE_LAMINAR_END)
    return (1.0 - w) * NU_LAMINAR + w * turbulent(RE_TURBULENT_START)


@dataclass(frozen=True)
class MetaParams:
    """Axial-model coefficients derived from one :class:`BHEParams`.

    ``beta1``/``beta2`` couple each channel to the wall, ``beta12`` the
    channels to each other (all per meter); ``beta``, ``gamma`` and
    ``delta`` are the combinations entering the axial kernels.  The
    channel and internal resistances and the capacity rate are kept for
    heat-balance work downstream.
    """

    beta1: float
    beta2: float
    beta12: float
    beta: float
    gamma: float
    delta: float
    channel_resistance: float
    internal_resistance: float
    capacity_rate: float
    reynolds: float
    nusselt: float

    def __post_init__(self):
        avg = (self.beta1 + self.beta2) / 2.0
        want = math.sqrt(avg * avg + self.beta12 * (self.beta1 + self.beta2))
        if abs(self.gamma - want) > 1e-12 * max(want, 1e-30):
            raise ValueError("gamma is inconsistent with the beta coefficients")
        if self.gamma <= 0.0:
            raise DegenerateParametersError("gamma must be positive")


def meta_params(p: BHEParams) -> MetaParams:
    """Reduce a borehole cross-section to its axial-model coefficients.

    Raises
    ------
    ValueError
        If ``p.kind`` is not the double-U topology.
    DegenerateParametersError
        If the resistance network degenerates (non-positive resistances),
        which a physically valid :class:`BHEParams` cannot produce.
    """
    if p.kind != "double-U":
        raise ValueError(f"only the double-U network is implemented, got {p.kind!r}")
    r_b = p.borehole_radius
    r_po = p.pipe_outer_radius
    r_pi = p.pipe_inner_radius
    b = p.shank_spacing / 2.0

    # film: one loop carries half the flow
    flow_pipe = p.volumetric_flow / 2.0
    velocity = flow_pipe / (math.pi * r_pi * r_pi)
    reynolds = p.fluid_density * velocity * (2.0 * r_pi) / p.fluid_viscosity
    prandtl = p.fluid_viscosity * p.fluid_heat_capacity / p.fluid_conductivity
    nu = nusselt_number(reynolds, prandtl)
    h_film = nu * p.fluid_conductivity / (2.0 * r_pi)
    r_film = 1.0 / (2.0 * math.pi * r_pi * h_film)
    r_wall = math.log(r_po / r_pi) / (2.0 * math.pi * p.pipe_conductivity)

    # line sources with an isothermal borehole wall (image method); the
    # four pipes sit on a circle of radius b, 90 degrees apart
    g = 1.0 / (2.0 * math.pi * p.grout_conductivity)
    r_self = g * math.log((r_b * r_b - b * b) / (r_b * r_po))
    r_adj = g * math.log(math.sqrt(r_b ** 4 + b ** 4) / (r_b * b * math.sqrt(2.0)))
    r_opp = g * math.log((r_b * r_b + b * b) / (2.0 * b * r_b))
    if min(r_self, r_adj, r_opp) <= 0.0:
        raise DegenerateParametersError("grout resistance network is not physical")

    r_pipe = r_self + r_wall + r_film
    # two-channel reduction: each channel is one diagonal pipe pair's
    # down legs, which sit 90 degrees apart, so the in-channel coupling
    # is the adjacent resistance and the cross-channel coupling mixes
    # the opposite and adjacent ones
    s_chan = (r_pipe + r_adj) / 2.0
    m_chan = (r_opp + r_adj) / 2.0
    if s_chan <= m_chan:
        raise DegenerateParametersError("channel coupling exceeds self resistance")
    r_channel = s_chan + m_chan
    r_internal = (s_chan * s_chan - m_chan * m_chan) / m_chan

    cf = p.capacity_rate
    beta1 = 1.0 / (r_channel * cf)
    beta2 = beta1
    beta12 = 1.0 / (r_internal * cf)
    beta = (beta2 - beta1) / 2.0
    avg = (beta1 + beta2) / 2.0
    gamma = math.sqrt(avg * avg + beta12 * (beta1 + beta2))
    delta = (beta12 + avg) / gamma
    return MetaParams(
        beta1=beta1, beta2=beta2, beta12=beta12, beta=beta, gamma=gamma,
        delta=delta, channel_resistance=r_channel, internal_resistance=r_internal,
        capacity_rate=cf, reynolds=reynolds, nusselt=nu,
    )


def f_functions(mp: MetaParams, z):
    """The five axial kernels at depth ``z`` (scalar or array).

    ``f1``, ``f2``, ``f3`` propagate the channel temperatures at the
    inlet plane down to ``z``; ``f4`` and ``f5`` weight the wall profile
    in the convolution terms.  At ``z = 0`` they reduce to
    ``(1, 0, 1, beta1, beta2)``.
    """
    z = np.asarray(z, dtype=float)
    e = np.exp(mp.beta * z)
    ch = np.cosh(mp.gamma * z)
    sh = np.sinh(mp.gamma * z)
    b1, b2, b12, g, d = mp.beta1, mp.beta2, mp.beta12, mp.gamma, mp.delta
    f1 = e * (ch - d * sh)
    f2 = e * (b12 / g) * sh
    f3 = e * (ch + d * sh)
    f4 = e * (b1 * ch - (d * b1 + b2 * b12 / g) * sh)
    f5 = e * (b2 * ch + (d * b2 + b1 * b12 / g) * sh)
    return f1, f2, f3, f4, f5


@dataclass(frozen=True)
class WallProfile:
    """Borehole wall temperature sampled on a uniform depth grid."""

    z: np.ndarray
    temperature: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).reshape(-1)
        t = np.asarray(self.temperature, dtype=float).reshape(-1)
        if z.size < 16:
            raise ValueError(f"wall profile needs at least 16 stations, got {z.size}")
        if z.size != t.size:
            raise ValueError("depth and temperature counts differ")
        if z[0] != 0.0 or not (z[-1] > 0.0):
            raise ValueError("depth grid must start at 0 and end at the length")
        steps = np.diff(z)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0) or steps[0] <= 0.0:
            raise ValueError("depth grid must be uniform and increasing")
        if not np.isfinite(t).all():
            raise ValueError("wall temperatures must be finite")
        z.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "temperature", t)

    @property
    def length(self) -> float:
        return float(self.z[-1])


def _trapezoid_weights(z: np.ndarray) -> np.ndarray:
    h = z[1] - z[0]
    w = np.full(z.size, h)
    w[0] = w[-1] = h / 2.0
    return w


def _closure_terms(mp: MetaParams, wall: WallProfile):
    """Kernel values at the bottom and the two wall convolutions."""
    length = wall.length
    f1l, f2l, f3l, f4l, f5l = (float(v) for v in f_functions(mp, length))
    rev = length - wall.z
    _, _, _, f4r, f5r = f_functions(mp, rev)
    w = _trapezoid_weights(wall.z)
    i4 = float(np.dot(w, wall.temperature * f4r))
    i5 = float(np.dot(w, wall.temperature * f5r))
    return f1l, f2l, f3l, i4, i5


def outlet_and_power(mp: MetaParams, t_in0: float, wall: WallProfile):
    """Outlet temperature and extracted power for one inlet temperature.

    Closes the axial solution with the bottom U-turn condition
    ``T_in(L) = T_out(L)`` and reports the power the fluid extracts from
    the ground, ``capacity_rate * (T_out(0) - T_in(0))``, positive when
    the fluid warms up on its way through.
    """
    f1l, f2l, f3l, i4, i5 = _closure_terms(mp, wall)
    den = f3l - f2l
    if abs(den) < 1e-12:
        raise DegenerateParametersError("axial closure is singular")
    t_out0 = (t_in0 * (f1l + f2l) + i4 + i5) / den
    power = mp.capacity_rate * (t_out0 - t_in0)
    return float(t_out0), float(power)


def profiles(mp: MetaParams, t_in0: float, t_out0: float, wall: WallProfile):
    """Channel temperature profiles on the wall grid.

    Evaluates the closed-form solution, convolving the wall profile with
    the ``f4``/``f5`` kernels by trapezoid on the grid of ``wall``.

    Returns
    -------
    (t_in, t_out) : ndarray pair
        Downward and upward channel temperatures at ``wall.z``.
    """
    z = wall.z
    tb = wall.temperature
    f1, f2, f3, _, _ = f_functions(mp, z)
    # lower-triangular convolution: for each depth, integrate the wall
    # contribution from the surface down to that depth
    lag = z[:, None] - z[None, :]
    mask = lag >= 0.0
    _, _, _, f4m, f5m = f_functions(mp, np.where(mask, lag, 0.0))
    h = z[1] - z[0]
    w = np.where(mask, h, 0.0)
    w[:, 0] = h / 2.0
    diag = np.arange(z.size)
    w[diag, diag] = h / 2.0
    w[0, 0] = 0.0
    conv4 = (w * f4m * mask) @ tb
    conv5 = (w * f5m * mask) @ tb
    t_in = t_in0 * f1 + t_out0 * f2 + conv4
    t_out = -t_in0 * f2 + t_out0 * f3 - conv5
    return t_in, t_out


def source_density(mp: MetaParams, t_in, t_out, t_wall):
    """Heat flux per meter from the fluid into the ground (W/m).

    Negative while extracting.  Both channels see the wall through the
    same channel resistance for the symmetric double-U.
    """
    t_in = np.asarray(t_in, dtype=float)
    t_out = np.asarray(t_out, dtype=float)
    t_wall = np.asarray(t_wall, dtype=float)
    r = mp.channel_resistance
    return (t_in - t_wall) / r + (t_out - t_wall) / r


def required_inlet(mp: MetaParams, p_target: float, walls):
    """Common inlet temperature so the array extracts ``p_target`` watts.

    All exchangers share the inlet (parallel hydraulic connection) and
    their outlet temperatures respond affinely to it, so the total power
    is linear in the inlet temperature and the solve is exact.

    Parameters
    ----------
    p_target : float
        Total extraction power of the array, in W (positive extracts
        heat from the ground).
    walls : sequence of WallProfile
        Current wall profile of every exchanger.

    Returns
    -------
    (t_in0, powers)
        The inlet temperature and the per-exchanger extraction powers,
        which sum to ``p_target``.
    """
    if not walls:
        raise ValueError("need at least one wall profile")
    cf = mp.capacity_rate
    slopes = []
    offsets = []
    for wall in walls:
        f1l, f2l, f3l, i4, i5 = _closure_terms(mp, wall)
        den = f3l - f2l
        if abs(den) < 1e-12:
            raise DegenerateParametersError("axial closure is singular")
        slopes.append((f1l + f2l) / den)
        offsets.append((i4 + i5) / den)
    s = slopes[0]
    if abs(s - 1.0) < 1e-12:
        raise DegenerateParametersError(
            "outlet does not respond to the inlet; cannot meet a power target"
        )
    n = len(walls)
    t_in0 = (p_target / cf - sum(offsets)) / (n * (s - 1.0))
    powers = np.array([cf * ((s - 1.0) * t_in0 + c) for c in offsets])
    return float(t_in0), powers
