"""Photon-pair entanglement, noise estimates and parameter sweeps.

In the monochromatic operating point the device emits one short photon (the
spontaneous shape, label S) and one long photon (the transferred drive,
label L) with anticorrelated polarizations, ideally the singlet-like pair
(|b_S, a_L> - |a_S, b_L>)/sqrt(2).  The pair is stored here as a 4x4 density
matrix over the polarization of the early-bin photon tensor the late-bin
photon.

Nonorthogonal time-bin envelopes (finite <S|L> overlap) are handled by
Gram-Schmidt: the long mode is split into its component along the short
mode plus an orthogonal remainder.  The component along the short bin puts
both photons into the same bin, where the pair carries the symmetric
polarization state; that sector is orthogonal to the one-photon-per-bin
sector in the field and enters the two-qubit matrix incoherently.  With a
perfect pi transfer phase the same-bin amplitude cancels exactly; an
imperfect phase converts bin overlap into entanglement loss.  This overlap
model is the artifact's own construction (no published formula exists) and
is labelled as such in the state metadata.

Dissipation and dephasing enter only through the multiplicative estimate
beta * (1 - gamma_star/Gamma) of the achievable fidelity and entanglement,
valid for near-unity beta and weak dephasing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .core import PhysicalParams
from .dynamics import evolve
from .twophoton import (
    assemble_two_photon,
    cloning_fidelity,
    probabilities_closed_form,
    probabilities_numeric,
    probability_drift,
)
from . import core as _core
from . import twophoton as _twophoton

__all__ = [
    "TwoPhotonPolarizationState",
    "NoiseParams",
    "build_epr_state",
    "concurrence",
    "entanglement_entropy",
    "noise_degradation",
    "sweep_delta",
    "SweepRow",
    "SweepTable",
    "crossing_delta",
]

OVERLAP_MODEL = "gram-schmidt-bin-mixing"

_SIGMA_YY = np.array(
    [
        [0, 0, 0, -1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [-1, 0, 0, 0],
    ],
    dtype=np.complex128,
)


@dataclass(frozen=True)
class TwoPhotonPolarizationState:
    """Two-qubit polarization state of the photon pair, basis |aa>, |ab>, |ba>, |bb>."""

    rho: np.ndarray
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        rho = np.ascontiguousarray(self.rho, dtype=np.complex128)
        if rho.shape != (4, 4):
            raise ValueError(f"density matrix must be 4x4, got {rho.shape}")
        if np.abs(rho - rho.conj().T).max() > 1e-9:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-9 or abs(np.trace(rho).imag) > 1e-9:
            raise ValueError(f"density matrix trace {np.trace(rho)} deviates from 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-9:
            raise ValueError("density matrix is not positive semidefinite")
        rho.flags.writeable = False
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_pure(cls, vec, metadata: Optional[dict] = None) -> "TwoPhotonPolarizationState":
        v = np.asarray(vec, dtype=np.complex128).reshape(4)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("zero state vector")
        v = v / n
        return cls(np.outer(v, v.conj()), metadata or {})


def build_epr_state(
    transfer_phase: complex = 1.0, mode_overlap: complex = 0.0
) -> TwoPhotonPolarizationState:
    """Photon-pair polarization state (|b_S,a_L> - transfer_phase |a_S,b_L>)/sqrt(2).

    ``transfer_phase`` is the unit-modulus phase of the polarization flip
    relative to its ideal value (1 means the ideal pi transfer).
    ``mode_overlap`` is the envelope overlap <S|L> of the two time bins.
    """
    eta = complex(transfer_phase)
    s = complex(mode_overlap)
    if abs(abs(eta) - 1.0) > 1e-6:
        raise ValueError(f"transfer_phase must be unit modulus, got |{eta}| = {abs(eta)}")
    if abs(s) > 1.0:
        raise ValueError(f"mode_overlap magnitude must be <= 1, got {abs(s)}")

    # Gram-Schmidt split of the long mode: a_L = s a_S + sqrt(1-|s|^2) a_perp
    w_same = 0.5 * abs(s) ** 2 * abs(1.0 - eta) ** 2
    w_diff = 0.5 * (1.0 - abs(s) ** 2) * (1.0 + abs(eta) ** 2)
    total = w_same + w_diff
    if total <= 0.0:
        raise ValueError("degenerate construction: both sector weights vanish")

    psi_diff = np.array([0.0, -eta, 1.0, 0.0], dtype=np.complex128) / math.sqrt(2.0)
    psi_same = np.array([0.0, 1.0, 1.0, 0.0], dtype=np.complex128) / math.sqrt(2.0)
    rho = (
        w_diff * np.outer(psi_diff, psi_diff.conj())
        + w_same * np.outer(psi_same, psi_same.conj())
    ) / total
    meta = {
        "transfer_phase": eta,
        "mode_overlap": s,
        "same_bin_weight": w_same / total,
        "overlap_model": OVERLAP_MODEL,
    }
    return TwoPhotonPolarizationState(rho, meta)


def concurrence(state: TwoPhotonPolarizationState) -> float:
    """Wootters concurrence of the two-qubit state (0 separable, 1 maximally entangled)."""
    rho = state.rho
    rho_tilde = _SIGMA_YY @ rho.conj() @ _SIGMA_YY
    evals = np.linalg.eigvals(rho @ rho_tilde)
    lam = np.sqrt(np.clip(evals.real, 0.0, None))
    lam.sort()
    return float(max(0.0, lam[3] - lam[2] - lam[1] - lam[0]))


def entanglement_entropy(state: TwoPhotonPolarizationState) -> float:
    """Entropy (bits) of one photon's reduced polarization state.

    An entanglement measure for pure pair states; reported as a secondary
    diagnostic alongside the concurrence.
    """
    rho = state.rho.reshape(2, 2, 2, 2)
    reduced = np.einsum("ijkj->ik", rho)
    p = np.clip(np.linalg.eigvalsh(reduced), 0.0, 1.0)
    p = p[p > 1e-15]
    return float(-(p * np.log2(p)).sum())


@dataclass(frozen=True)
class NoiseParams:
    """Loss and dephasing figures: beta = Gamma/(Gamma+gamma_3D), gamma_star in units of Gamma."""

    beta: float
    gamma_star: float

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.gamma_star < 0.0:
            raise ValueError(f"gamma_star must be nonnegative, got {self.gamma_star}")
        if self.gamma_star > 0.3:
            warnings.warn(
                f"gamma_star = {self.gamma_star} is outside the weak-dephasing regime; "
                "the multiplicative estimate degrades",
                stacklevel=2,
            )


def noise_degradation(noise: NoiseParams) -> float:
    """Multiplicative degradation beta * (1 - gamma_star) of fidelity and entanglement."""
    return noise.beta * (1.0 - noise.gamma_star)


# ---------------------------------------------------------------------------
# parameter sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    delta_over_gamma: float
    p_aa: float
    p_ab: float
    fidelity: float
    numeric_gap: Optional[float] = None
    drift: Optional[float] = None
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepTable:
    rows: List[SweepRow]
    mode: str
    metadata: dict


def sweep_delta(
    delta_range: Tuple[float, float],
    n: int,
    mode: str = "closed_form",
    *,
    gamma: float = 1.0,
    dr: float = 4e-3,
    t_final: float = 30.0,
) -> SweepTable:
    """Tabulate (delta/gamma, p_aa, p_ab, fidelity) over a width range.

    ``numeric`` mode runs the marching solver per row and records the gap to
    the closed form together with the late-time probability drift; solver
    failures annotate the affected row without aborting the sweep.
    """
    lo, hi = delta_range
    if not (0.0 < lo <= hi):
        raise ValueError(f"need 0 < delta_min <= delta_max, got {delta_range}")
    if n < 1 or (n < 2 and lo != hi):
        raise ValueError("need at least 2 sweep points for a nontrivial range")
    if mode not in ("closed_form", "numeric"):
        raise ValueError(f"unknown sweep mode {mode!r}")

    deltas = np.array([lo]) if lo == hi else np.linspace(lo, hi, n)
    rows: List[SweepRow] = []
    for d in deltas:
        params = PhysicalParams(delta_spec=float(d) * gamma, gamma=gamma)
        p_aa_cf, p_ab_cf = probabilities_closed_form(params)
        if mode == "closed_form":
            rows.append(SweepRow(float(d), p_aa_cf, p_ab_cf, cloning_fidelity(params)))
            continue
        try:
            grid = _core.default_grid(params, t_max=t_final, dr=dr * params.c / gamma)
            packet = _core.make_exponential_wavepacket(params, grid)
            state = evolve(params, packet, t_final / gamma)
            p_aa, p_ab, _ = probabilities_numeric(assemble_two_photon(state))
            rows.append(
                SweepRow(
                    float(d),
                    p_aa,
                    p_ab,
                    p_aa + 0.5 * p_ab,
                    numeric_gap=max(abs(p_aa - p_aa_cf), abs(p_ab - p_ab_cf)),
                    drift=probability_drift(state),
                )
            )
        except (ValueError, MemoryError) as exc:
            rows.append(
                SweepRow(float(d), math.nan, math.nan, math.nan, error=str(exc))
            )
    meta = {"mode": mode, "gamma": gamma}
    if mode == "numeric":
        meta.update({"dr": dr, "t_final": t_final})
    return SweepTable(rows, mode, meta)


def crossing_delta(gamma: float = 1.0) -> float:
    """Width at which the two emission probabilities cross (p_aa = p_ab = 1/2)."""
    f = lambda d: _twophoton._p_aa_closed(d, gamma) - 0.5
    return float(brentq(f, 1e-6 * gamma, 1.9 * gamma, xtol=1e-12))
