"""Two-photon output amplitudes and polarization-resolved emission probabilities.

Once the emitter has relaxed, the joint state of the two outgoing photons is
encoded in three amplitudes: phi_aa (both photons share the stimulating
polarization), and phi_ab over the two ground states (one photon each).
Every value of those amplitudes is a retarded copy of the single-excitation
field,

    phi_aa(r1, r2, t) = P [Theta(t - r2/c) Theta(r2) psi_a(r1 - r2, t - r2/c)
                           + (1 <-> 2)],
    phi_ab_A(r1, r2, t) = P Theta(t - r1/c) Theta(r1) psi_b(r2 - r1, t - r1/c),
    phi_ab_B(r1, r2, t) = P Theta(t - r2/c) Theta(r2) psi_a(r1 - r2, t - r2/c),

with P = sqrt(pi rho_1d gamma)/2.  The default representation is therefore
history compressed: amplitudes are composed on demand from the boundary
record of the solver instead of storing O(N^2) grids, which keeps narrow
bandwidths tractable.  A dense (r1, r2) mode exists for small grids as a
cross-check of the compressed reductions.

Probabilities follow the sector norms p_aa = 2 sum |phi_aa|^2 and
p_ab = 4 sum (|phi_ab_A|^2 + |phi_ab_B|^2); with these combinatorial weights
the ledger rho_ee(t) + p_aa(t) + p_ab(t) = 1 balances identically at every
time, which is the check that fixes the bookkeeping convention.  Collapsing
the double integrals along the retarded coordinate turns each probability
into one-dimensional cumulative integrals of the boundary record; the same
reduction gives the population curve of the quadrature solver in O(T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import PhysicalParams, Wavepacket
from .dynamics import SingleExcitationState, SiteHistory, TimeSeries

__all__ = [
    "TwoPhotonState",
    "assemble_two_photon",
    "probabilities_numeric",
    "probabilities_closed_form",
    "cloning_fidelity",
    "optimal_delta",
    "probability_drift",
]

_DENSE_LIMIT = 4096  # nodes per axis beyond which the dense mode refuses to run


def _complex_interp(x: np.ndarray, xp: np.ndarray, fp: np.ndarray) -> np.ndarray:
    return np.interp(x, xp, fp.real) + 1j * np.interp(x, xp, fp.imag)


@dataclass
class _Channel:
    """Cumulative integrals of one polarization's boundary record.

    ``g`` is the undecayed inbound record psi0(-c t') and ``w`` its
    exponentially weighted cumulative integral; every retarded field value
    and every probability reduction below is built from these two series.
    """

    times: np.ndarray
    g: np.ndarray
    w: np.ndarray
    packet: Optional[Wavepacket]

    @classmethod
    def build(cls, params: PhysicalParams, times: np.ndarray, site: np.ndarray,
              packet: Optional[Wavepacket]) -> "_Channel":
        lam = params.amplitude_decay
        g = site * np.exp(lam * times)
        if times.size < 2:
            w = np.zeros_like(g)
        else:
            w = cumulative_trapezoid(np.exp(lam * times) * g, times, initial=0.0)
        return cls(times, g, w, packet)

    def g_at(self, tau):
        return _complex_interp(tau, self.times, self.g)

    def w_at(self, tau):
        return _complex_interp(tau, self.times, self.w)

    def is_zero(self) -> bool:
        return not np.any(self.g)

    def rho_series(self, params: PhysicalParams) -> np.ndarray:
        """Reconstructed norm of this channel at every history time."""
        if self.is_zero():
            return np.zeros_like(self.times)
        gamma, c = params.gamma, params.c
        lam = params.amplitude_decay
        t = self.times
        # incoming remnant: decayed packet mass still left of the atom
        if self.packet is not None:
            grid = self.packet.grid
            dens = self.packet.amplitude.real**2 + self.packet.amplitude.imag**2
            mass = cumulative_trapezoid(dens, dx=grid.dr, initial=0.0)
            idx = grid.atom_index - np.round(c * t / grid.dr).astype(int)
            left = np.where(idx >= 0, mass[np.clip(idx, 0, None)], 0.0)
        else:
            left = np.zeros_like(t)
        left = left * np.exp(-gamma * t)
        if t.size < 2:
            return left

        # outgoing side: expand |G(s) - (gamma/2) e^{-lam s}(W(t)-W(s))|^2
        # into cumulants over s so the whole series costs O(T)
        e = np.exp(-lam * t)
        d1 = cumulative_trapezoid(np.abs(self.g) ** 2, t, initial=0.0)
        d2 = cumulative_trapezoid(self.g * np.conj(e), t, initial=0.0)
        d3 = cumulative_trapezoid(self.g * np.conj(e * self.w), t, initial=0.0)
        eg = np.exp(-gamma * t)
        d4 = (1.0 - eg) / gamma
        d5 = cumulative_trapezoid(eg * self.w, t, initial=0.0)
        d6 = cumulative_trapezoid(eg * np.abs(self.w) ** 2, t, initial=0.0)
        right = (
            d1
            - gamma * (np.real(np.conj(self.w) * d2) - np.real(d3))
            + 0.25 * gamma**2 * (np.abs(self.w) ** 2 * d4 - 2.0 * np.real(np.conj(self.w) * d5) + d6)
        )
        return left + c * eg * right

    def cross_term(self, params: PhysicalParams) -> np.ndarray:
        """Cumulative interference integral feeding the same-polarization probability."""
        if self.is_zero():
            return np.zeros_like(self.times)
        gamma = params.gamma
        lam = params.amplitude_decay
        t = self.times
        e = np.exp(-lam * t)
        ca = cumulative_trapezoid(self.g * np.conj(e), t, initial=0.0)
        eg = np.exp(-gamma * t)
        cb = (1.0 - eg) / gamma
        cc = cumulative_trapezoid(self.w * eg, t, initial=0.0)
        integrand = np.conj(self.g) * e * (ca - 0.5 * gamma * (self.w * cb - cc))
        return 2.0 * np.real(cumulative_trapezoid(integrand, t, initial=0.0))

    def field_at(self, params: PhysicalParams, u: np.ndarray, tau: np.ndarray) -> np.ndarray:
        """Reconstruct psi(u, tau): free region for u <= 0, retarded form beyond the atom."""
        lam = params.amplitude_decay
        c = params.c
        u = np.asarray(u, float)
        tau = np.broadcast_to(np.asarray(tau, float), u.shape)
        out = np.zeros(u.shape, np.complex128)
        if self.packet is None:
            return out
        free = u <= 0.0
        out[free] = self.packet.evaluate(u[free] - c * tau[free]) * np.exp(-lam * tau[free])
        inside = (~free) & (u <= c * tau)
        if np.any(inside):
            s = tau[inside] - u[inside] / c
            out[inside] = self.g_at(s) * np.exp(-lam * tau[inside]) - (
                0.5 * params.gamma
                * np.exp(-lam * (tau[inside] + s))
                * (self.w_at(tau[inside]) - self.w_at(s))
            )
        return out


@dataclass
class TwoPhotonState:
    """History-compressed two-photon amplitudes at evaluation time ``t``.

    The composition prefactor sqrt(pi rho_1d gamma)/2 is kept explicit so the
    sector-norm factors (2 for the symmetrized same-polarization pair, 4 for
    the distinct-polarization pairs) stay visible in the probability code.
    """

    params: PhysicalParams
    t: float
    history: SiteHistory
    prefactor: float
    rho_series: Optional[TimeSeries] = None
    channel_a: _Channel = field(repr=False, default=None)
    channel_b: _Channel = field(repr=False, default=None)

    def phi_aa(self, r1, r2) -> np.ndarray:
        one = self._retarded(self.channel_a, r1, r2)
        return self.prefactor * (one + self._retarded(self.channel_a, r2, r1))

    def phi_ab_A(self, r1, r2) -> np.ndarray:
        return self.prefactor * self._retarded(self.channel_b, r2, r1)

    def phi_ab_B(self, r1, r2) -> np.ndarray:
        return self.prefactor * self._retarded(self.channel_a, r1, r2)

    def _retarded(self, channel: _Channel, r1, r2) -> np.ndarray:
        """P-free building block Theta(t - r2/c) Theta(r2) psi(r1 - r2, t - r2/c)."""
        c = self.params.c
        r1 = np.asarray(r1, float)
        r2 = np.asarray(r2, float)
        r1, r2 = np.broadcast_arrays(r1, r2)
        out = np.zeros(r1.shape, np.complex128)
        if self.t <= 0.0:  # no emission has occurred yet
            return out
        emit = (r2 >= 0.0) & (r2 <= c * self.t)
        if np.any(emit):
            tau = self.t - r2[emit] / c
            out[emit] = channel.field_at(self.params, r1[emit] - r2[emit], tau)
        return out


def assemble_two_photon(state: SingleExcitationState, t: Optional[float] = None) -> TwoPhotonState:
    """Compose the two-photon amplitudes at time ``t`` from the stored history.

    ``t`` defaults to the state time and may be earlier; the boundary record
    must cover [0, t].
    """
    if t is None:
        t = state.t
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    hist = state.history
    if not hist.covers(t):
        raise ValueError(f"insufficient history: record ends at {hist.times[-1]}, requested {t}")

    keep = hist.times <= t * (1 + 1e-12) + 1e-300
    times = hist.times[keep]
    site_a = hist.psi_a[keep]
    site_b = hist.psi_b[keep]
    if times[-1] < t * (1 - 1e-12):
        times = np.append(times, t)
        site_a = np.append(site_a, _complex_interp(np.array([t]), hist.times, hist.psi_a))
        site_b = np.append(site_b, _complex_interp(np.array([t]), hist.times, hist.psi_b))
    trimmed = SiteHistory(times, site_a, site_b)

    rho = None
    if state.rho_series is not None and state.rho_series.times[-1] >= times[-1] - 1e-12:
        m = state.rho_series.times <= t * (1 + 1e-12) + 1e-300
        rho = TimeSeries(state.rho_series.times[m], state.rho_series.values[m])

    ch_a = _Channel.build(state.params, times, site_a, state.packet)
    ch_b = _Channel.build(state.params, times, site_b, state.packet_b)
    prefactor = 0.5 * state.params.emission_coupling
    return TwoPhotonState(state.params, float(t), trimmed, prefactor, rho, ch_a, ch_b)


def _channel_probabilities(tp: TwoPhotonState, channel: _Channel,
                           recorded: Optional[np.ndarray]) -> Tuple[float, float]:
    """(same-polarization, distinct-polarization) contributions of one channel."""
    params = tp.params
    t = channel.times
    rho = recorded if recorded is not None else channel.rho_series(params)
    diag = 0.5 * params.gamma * float(np.trapezoid(rho, t))
    cross = 0.5 * params.gamma * params.c * float(channel.cross_term(params)[-1])
    return diag + cross, diag


def probabilities_numeric(tp: TwoPhotonState, method: str = "compressed") -> Tuple[float, float, float]:
    """Emission probabilities (p_aa, p_ab, p_bb) from the assembled amplitudes.

    ``compressed`` evaluates the exact 1D reduction of the double integrals
    over the boundary record; ``dense`` materializes the amplitudes on the
    (r1, r2) product grid and applies the product trapezoidal rule on the
    causal wedge (small grids only).
    """
    if method == "compressed":
        recorded = None
        if tp.rho_series is not None and tp.channel_b.is_zero():
            recorded = tp.rho_series.values
        p_aa, p_ab_b = _channel_probabilities(tp, tp.channel_a, recorded)
        if tp.channel_b.is_zero():
            p_bb, p_ab_a = 0.0, 0.0
        else:
            p_bb, p_ab_a = _channel_probabilities(tp, tp.channel_b, None)
        return p_aa, p_ab_a + p_ab_b, p_bb
    if method == "dense":
        return _probabilities_dense(tp)
    raise ValueError(f"unknown method {method!r}")


def _probabilities_dense(tp: TwoPhotonState) -> Tuple[float, float, float]:
    params = tp.params
    packet = tp.channel_a.packet
    if packet is None:
        raise ValueError("dense mode requires the a-polarization packet")
    grid = packet.grid
    k = int(round(params.c * tp.t / grid.dr))
    hi = min(grid.n_points, grid.atom_index + k + 1)
    if hi > _DENSE_LIMIT:
        raise ValueError(
            f"dense mode would need {hi} nodes per axis (limit {_DENSE_LIMIT}); "
            "use the compressed representation"
        )
    axis = grid.positions[:hi]
    r1, r2 = np.meshgrid(axis, axis, indexing="ij")
    dr = grid.dr

    def norm2(arr):
        return float(np.trapezoid(np.trapezoid(np.abs(arr) ** 2, dx=dr), dx=dr))

    p_aa = 2.0 * norm2(tp.phi_aa(r1, r2))
    p_ab = 4.0 * (norm2(tp.phi_ab_A(r1, r2)) + norm2(tp.phi_ab_B(r1, r2)))
    if tp.channel_b.is_zero():
        p_bb = 0.0
    else:
        bb = tp.prefactor * (
            tp._retarded(tp.channel_b, r1, r2) + tp._retarded(tp.channel_b, r2, r1)
        )
        p_bb = 2.0 * norm2(bb)
    return p_aa, p_ab, p_bb


def probability_drift(state: SingleExcitationState, window: float = 5.0) -> float:
    """Largest change of (p_aa, p_ab) over the trailing ``window`` (convergence guard)."""
    t1 = state.t
    t0 = max(0.0, t1 - window)
    pa1, pb1, _ = probabilities_numeric(assemble_two_photon(state, t1))
    pa0, pb0, _ = probabilities_numeric(assemble_two_photon(state, t0))
    return max(abs(pa1 - pa0), abs(pb1 - pb0))


# ---------------------------------------------------------------------------
# closed forms of the relaxed limit
# ---------------------------------------------------------------------------

def _require_resonant(params: PhysicalParams) -> None:
    if params.detuning != 0.0:
        raise ValueError("closed-form probabilities assume a resonant carrier (detuning = 0)")


def _p_aa_closed(delta: float, gamma: float) -> float:
    return delta * (4.0 * gamma + delta) / (2.0 * (gamma + delta) ** 2)


def probabilities_closed_form(params: PhysicalParams) -> Tuple[float, float]:
    """Relaxed-limit probabilities (p_aa, p_ab) of the resonant exponential drive."""
    _require_resonant(params)
    g, d = params.gamma, params.delta_spec
    p_aa = _p_aa_closed(d, g)
    p_ab = 0.5 * (1.0 + (g * g - 2.0 * d * g) / (g + d) ** 2)
    return p_aa, p_ab


def cloning_fidelity(params: PhysicalParams) -> float:
    """Polarization-cloning fidelity p_aa * 1 + p_ab * 1/2."""
    p_aa, p_ab = probabilities_closed_form(params)
    return p_aa + 0.5 * p_ab


def optimal_delta(
    params_template: PhysicalParams,
    bracket: Tuple[float, float] = (0.01, 100.0),
    tol: float = 1e-6,
) -> float:
    """Packet width maximizing p_aa, by golden-section search over the bracket.

    ``bracket`` and ``tol`` are in units of gamma.  If the maximum sits on a
    bracket edge (monotone restriction), that edge is returned exactly.
    """
    _require_resonant(params_template)
    gamma = params_template.gamma
    lo, hi = bracket
    if not (0 < lo < hi):
        raise ValueError(f"invalid bracket {bracket}")
    a, b = lo * gamma, hi * gamma
    tol_abs = tol * gamma

    f = lambda d: _p_aa_closed(d, gamma)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol_abs:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
    best = 0.5 * (a + b)
    if best - lo * gamma < tol_abs:
        return lo * gamma
    if hi * gamma - best < tol_abs:
        return hi * gamma
    return best
