"""Units, parameters, spatial grids and single-photon wavepackets.

Natural units are used throughout: the decay rate into the guided mode sets
the time scale (gamma = 1 by default), the propagation speed sets the length
scale (c = 1), and the 1D mode density is fixed by the convention
2*pi*rho_1d*c = 1.  Under that convention the spatial norm
integral |psi(r)|^2 dr of an amplitude equals its mode-space norm, so every
probability below is a plain trapezoidal integral over the grid.

The atom sits at r = 0.  Incoming packets occupy r < 0 and propagate to the
right; grids therefore always straddle the origin, and the origin is always
a grid node so that the jump of the one-sided exponential packet sits on a
node (the stored nodal value is the left limit).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "PhysicalParams",
    "SpatialGrid",
    "Wavepacket",
    "make_exponential_wavepacket",
    "overlap",
    "default_grid",
]

#: fraction of the packet norm allowed to fall off the left edge of a grid
TAIL_TOLERANCE = 1e-9

#: grids are auto-sized to this many 1/e widths of the packet tail
TAIL_WIDTHS = 25.0


@dataclass(frozen=True)
class PhysicalParams:
    """Rates, detunings and unit conventions of the emitter/waveguide system.

    Parameters
    ----------
    delta_spec : float
        Spectral width of the incident exponential packet (same units as
        ``gamma``).  This is the single knob selecting the operating regime:
        width 2*gamma maximises stimulated emission, width << gamma gives
        monochromatic state transfer.
    gamma : float
        Spontaneous decay rate into the guided mode (mirror geometry already
        folded in).
    detuning : float
        Carrier detuning of the packet from the atomic line, nu_L - nu_A.
    nu_a : float
        Atomic carrier frequency.  Zero selects the rotating frame, which is
        the default because every reported observable is phase insensitive.
    c : float
        Propagation speed.
    rho_1d : float, optional
        1D mode density.  Fixed by the convention 2*pi*rho_1d*c = 1; passing
        an inconsistent value is rejected.
    """

    delta_spec: float
    gamma: float = 1.0
    detuning: float = 0.0
    nu_a: float = 0.0
    c: float = 1.0
    rho_1d: Optional[float] = None

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.delta_spec <= 0:
            raise ValueError(f"delta_spec must be positive, got {self.delta_spec}")
        if self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")
        rho = 1.0 / (2.0 * math.pi * self.c)
        if self.rho_1d is None:
            object.__setattr__(self, "rho_1d", rho)
        elif abs(self.rho_1d * 2.0 * math.pi * self.c - 1.0) > 1e-9:
            raise ValueError(
                "rho_1d must satisfy 2*pi*rho_1d*c = 1, "
                f"got rho_1d={self.rho_1d} with c={self.c}"
            )

    @property
    def nu_l(self) -> float:
        """Carrier frequency of the incident packet."""
        return self.nu_a + self.detuning

    @property
    def amplitude_decay(self) -> complex:
        """Complex decay constant gamma/2 + i*nu_a of the excited amplitudes."""
        return complex(0.5 * self.gamma, self.nu_a)

    @property
    def emission_coupling(self) -> float:
        """Coupling sqrt(gamma*pi*rho_1d) between the emitter and the outgoing field."""
        return math.sqrt(self.gamma * math.pi * self.rho_1d)

    @property
    def packet_norm(self) -> float:
        """Continuum normalization sqrt(2*pi*rho_1d*delta_spec) of the packet."""
        return math.sqrt(2.0 * math.pi * self.rho_1d * self.delta_spec)


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform 1D grid straddling the atom position r = 0."""

    r_min: float
    r_max: float
    n_points: int
    positions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError(f"n_points must be >= 2, got {self.n_points}")
        if not (self.r_min < 0.0 < self.r_max):
            raise ValueError(
                f"grid must straddle the atom at r=0, got [{self.r_min}, {self.r_max}]"
            )
        pos = self.r_min + self.dr * np.arange(self.n_points)
        pos.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        i0 = int(round(-self.r_min / self.dr))
        if not (0 < i0 < self.n_points - 1) or abs(pos[i0]) > 1e-9 * self.dr:
            raise ValueError("r = 0 must coincide with an interior grid node")
        object.__setattr__(self, "_atom_index", i0)

    @property
    def dr(self) -> float:
        return (self.r_max - self.r_min) / (self.n_points - 1)

    @property
    def atom_index(self) -> int:
        """Index of the node at r = 0."""
        return self._atom_index

    @classmethod
    def from_spacing(cls, r_min: float, r_max: float, dr: float) -> "SpatialGrid":
        """Build a grid with spacing ``dr`` snapped so that 0 is a node."""
        if dr <= 0:
            raise ValueError(f"dr must be positive, got {dr}")
        n_left = max(1, int(math.ceil(-r_min / dr - 1e-9)))
        n_right = max(1, int(math.ceil(r_max / dr - 1e-9)))
        lo = -(n_left * dr)
        hi = n_right * dr
        return cls(lo, hi, n_left + n_right + 1)

    def same_as(self, other: "SpatialGrid") -> bool:
        return (
            self.n_points == other.n_points
            and self.r_min == other.r_min
            and self.r_max == other.r_max
        )


def _trapezoid_norm(amplitude: np.ndarray, dr: float) -> float:
    density = amplitude.real**2 + amplitude.imag**2
    return float(np.trapezoid(density, dx=dr))


@dataclass(frozen=True)
class Wavepacket:
    """Complex amplitude profile of a single photon on a spatial grid.

    ``profile`` is an optional callable giving the amplitude at arbitrary
    positions; the analytic packet family provides it so that solvers can
    sample the initial condition off-grid without interpolation error.

    ``edge_index`` marks the node carrying the support jump (the nodal value
    is the left limit; the amplitude vanishes strictly right of it).  When it
    is known, norm integrals use the split trapezoidal rule with the jump
    node as a segment boundary, which keeps the quadrature second order;
    this is the point of pinning the jump to a node in the first place.
    Constructed packets carry unit norm; intermediate fields (scattering
    outputs, sector amplitudes) may opt out of that check.
    """

    grid: SpatialGrid
    amplitude: np.ndarray
    carrier: float = 0.0
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    require_unit_norm: bool = True
    edge_index: Optional[int] = None

    def __post_init__(self):
        amp = np.ascontiguousarray(self.amplitude, dtype=np.complex128)
        if amp.shape != (self.grid.n_points,):
            raise ValueError(
                f"amplitude has {amp.shape} entries for a {self.grid.n_points}-point grid"
            )
        amp.flags.writeable = False
        object.__setattr__(self, "amplitude", amp)
        if self.require_unit_norm and abs(self.norm() - 1.0) > 1e-6:
            raise ValueError(f"wavepacket norm {self.norm()} deviates from 1 beyond 1e-6")

    def norm(self) -> float:
        """Norm integral |amplitude|^2 dr (split trapezoidal rule at the support jump)."""
        value = _trapezoid_norm(self.amplitude, self.grid.dr)
        e = self.edge_index
        if e is not None and 0 < e < self.grid.n_points - 1:
            a = self.amplitude[e]
            value -= 0.5 * self.grid.dr * (a.real**2 + a.imag**2)
        return value

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        """Amplitude at arbitrary positions (profile if available, else linear interpolation)."""
        r = np.asarray(r, dtype=float)
        if self.profile is not None:
            return self.profile(r)
        pos = self.grid.positions
        re = np.interp(r, pos, self.amplitude.real, left=0.0, right=0.0)
        im = np.interp(r, pos, self.amplitude.imag, left=0.0, right=0.0)
        return re + 1j * im

    @classmethod
    def from_samples(cls, grid: SpatialGrid, values: np.ndarray, carrier: float = 0.0) -> "Wavepacket":
        """Wrap raw amplitude samples, renormalizing them on the grid."""
        values = np.asarray(values, dtype=np.complex128)
        norm = _trapezoid_norm(values, grid.dr)
        if norm <= 0.0:
            raise ValueError("cannot normalize a zero amplitude profile")
        return cls(grid, values / math.sqrt(norm), carrier)


def make_exponential_wavepacket(
    params: PhysicalParams, grid: SpatialGrid, *, start: float = 0.0
) -> Wavepacket:
    """One-sided exponential packet N*exp[(delta_spec/2 + i*nu_L)(r-start)/c] for r <= start.

    The packet is the spontaneous-emission shape of a neighbouring emitter of
    linewidth ``delta_spec``.  It is renormalized to unit norm on the discrete
    grid, so downstream probability ledgers balance to machine precision.

    Parameters
    ----------
    params : PhysicalParams
        Supplies delta_spec, the carrier nu_L and the unit convention.
    grid : SpatialGrid
        Target grid.  Must extend far enough left that the truncated tail
        carries less than ``TAIL_TOLERANCE`` of the norm.
    start : float, optional
        Position of the leading edge (default 0, i.e. the packet front has
        just reached the atom).  Must be <= 0 and sit on a grid node.

    Raises
    ------
    ValueError
        If the grid is too short for the requested width, or the leading
        edge falls off a node.
    """
    delta = params.delta_spec
    c = params.c
    if start > 0.0:
        raise ValueError(f"packet must be incoming (start <= 0), got start={start}")
    offset = (start - grid.r_min) / grid.dr
    if abs(offset - round(offset)) > 1e-9:
        raise ValueError(f"packet edge start={start} must sit on a grid node")
    tail_fraction = math.exp(delta * (grid.r_min - start) / c)
    if tail_fraction > TAIL_TOLERANCE:
        raise ValueError(
            f"grid too short: r_min={grid.r_min} keeps {tail_fraction:.2e} of the "
            f"packet norm off-grid (needs r_min <= start - {TAIL_WIDTHS}*c/delta)"
        )

    rate = (0.5 * delta + 1j * params.nu_l) / c
    norm0 = params.packet_norm
    edge = int(round((start - grid.r_min) / grid.dr))

    raw = np.where(
        grid.positions <= start,
        norm0 * np.exp(rate * (grid.positions - start)),
        0.0 + 0.0j,
    )
    raw_norm = _trapezoid_norm(raw, grid.dr)
    if 0 < edge < grid.n_points - 1:
        raw_norm -= 0.5 * grid.dr * abs(raw[edge]) ** 2
    scale = 1.0 / math.sqrt(raw_norm)

    def profile(r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros(r.shape, dtype=np.complex128)
        mask = r <= start
        out[mask] = scale * norm0 * np.exp(rate * (r[mask] - start))
        return out

    return Wavepacket(grid, raw * scale, carrier=params.nu_l, profile=profile, edge_index=edge)


def overlap(p: Wavepacket, q: Wavepacket) -> complex:
    """Trapezoidal overlap integral conj(p) * q dr of two packets on one grid."""
    if not p.grid.same_as(q.grid):
        raise ValueError("wavepackets live on different grids")
    return complex(np.trapezoid(np.conj(p.amplitude) * q.amplitude, dx=p.grid.dr))


def default_grid(
    params: PhysicalParams, t_max: float, dr: float, *, start: float = 0.0
) -> SpatialGrid:
    """Grid sized for an evolution up to ``t_max``.

    The left extent holds the packet tail below the truncation tolerance and
    the right extent covers the light cone c*t_max, so the excited-state
    norm integral never loses support.
    """
    left = start - TAIL_WIDTHS * params.c / params.delta_spec
    right = max(params.c * t_max, dr)
    return SpatialGrid.from_spacing(left, right, dr)
