"""Polarization-dependent read current of MFIM tunnel junctions.

Per-column band diagrams are built from the series electrostatics, the
transmission through the stacked dielectric/ferroelectric barrier is
evaluated with the WKB exponent in closed form per linear band segment, and
the current density follows the Tsu-Esaki supply integral (electrons only,
single parabolic band).

Energy bookkeeping: all band edges and Fermi levels are in eV relative to
the Fermi level of the electrode contacting the dielectric (MD).  Positive
bias v raises the potential of the ferroelectric-side electrode (MF), so
its Fermi level sits at -v and positive current flows for positive bias.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import EPS0, HBAR, K_B, M_E, Q_E
from .errors import ModelConsistencyWarning, QuadratureError
from .lgd import (LatticeState, MaterialParams, StackGeometry,
                  affine_field_coefficients, relax_to_steady,
                  solve_series_electrostatics, tdgl_step, default_time_step,
                  driving_field)

__all__ = [
    "BarrierParams", "BandLayer", "BandProfile", "Pulse", "Waveform",
    "ProgramTemplate", "ProgramLevel", "ProgramResult", "band_profile",
    "wkb_transmission", "tsu_esaki_current", "read_current",
    "depolarization_field", "apply_waveform", "program_levels",
]


@dataclass(frozen=True)
class BarrierParams:
    """Electrode and barrier energies for tunneling (eV, fractions, K).

    Defaults are representative of TiN / Hf-Zr-O2 / Al2O3 stacks and are
    calibration knobs rather than measured ground truth.
    """

    phi_md: float = 4.6        # work function of the dielectric-side electrode
    chi_f: float = 2.65        # ferroelectric electron affinity
    chi_d: float = 1.6         # dielectric electron affinity
    phi_mf: float = 4.6        # work function of the ferroelectric-side electrode
    m_eff: float = 0.4         # tunneling mass / electron rest mass
    temperature: float = 300.0

    def __post_init__(self):
        for name in ("phi_md", "chi_f", "chi_d", "phi_mf"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.m_eff <= 1.0:
            raise ValueError("m_eff must lie in (0, 1]")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass(frozen=True)
class BandLayer:
    """One barrier layer: thickness (m) and conduction-band edge at both faces (eV)."""

    thickness: float
    e_start: float
    e_end: float


@dataclass(frozen=True)
class BandProfile:
    """Piecewise-linear conduction band across the stack, MD side first."""

    layers: tuple[BandLayer, ...]
    fermi_md: float
    fermi_mf: float
    v_d: float                  # dielectric voltage drop (V)
    reading_condition: bool     # q*v_d exceeds the ferroelectric barrier

    @property
    def max_edge(self) -> float:
        return max(max(l.e_start, l.e_end) for l in self.layers)


def band_profile(p_i: float, v: float, geom: StackGeometry, mat: MaterialParams,
                 barrier: BarrierParams) -> BandProfile:
    """Conduction band of one column at polarization p_i and applied bias v.

    A work-function difference between the electrodes shifts the
    electrostatic voltage across the stack by the contact potential.
    """
    v_elec = v - (barrier.phi_mf - barrier.phi_md)
    sol = solve_series_electrostatics(np.array([p_i], float), v_elec, geom, mat)
    v_d = float(sol.v_d[0])
    v_f = float(sol.e_f[0]) * geom.t_f
    e_md = barrier.phi_md - barrier.chi_d
    dielectric = BandLayer(geom.t_d, e_md, e_md - v_d)
    e_df = barrier.phi_md - barrier.chi_f - v_d
    ferroelectric = BandLayer(geom.t_f, e_df, e_df - v_f)
    layers = (dielectric, ferroelectric) if geom.t_d > 0 else (ferroelectric,)
    return BandProfile(
        layers=layers, fermi_md=0.0, fermi_mf=-v, v_d=v_d,
        reading_condition=v_d > (barrier.phi_md - barrier.chi_f))


# --------------------------------------------------------------------------
# WKB transmission
# --------------------------------------------------------------------------

def _wkb_exponent(layers, energies: np.ndarray, m_eff: float) -> np.ndarray:
    """2 * integral of kappa dx for each energy; closed form per linear segment."""
    kappa0 = math.sqrt(2.0 * m_eff * M_E * Q_E) / HBAR   # 1/m per sqrt(eV)
    e = np.asarray(energies, dtype=float)
    total = np.zeros_like(e)
    for layer in layers:
        e1 = np.broadcast_to(np.asarray(layer.e_start, float), e.shape)
        e2 = np.broadcast_to(np.asarray(layer.e_end, float), e.shape)
        length = layer.thickness
        slope = (e2 - e1) / length
        flat = np.abs(e2 - e1) < 1e-15
        # clip the forbidden sub-interval [xa, xb] where the edge exceeds E
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = np.where(flat, 0.0, (e - e1) / np.where(flat, 1.0, slope))
        above1 = e1 > e
        above2 = e2 > e
        any_forbidden = above1 | above2
        xa = np.where(above1, 0.0, np.clip(x_cross, 0.0, length))
        xb = np.where(above2, length, np.clip(x_cross, 0.0, length))
        ha = np.maximum(e1 + slope * xa - e, 0.0)
        hb = np.maximum(e1 + slope * xb - e, 0.0)
        flat_part = (xb - xa) * np.sqrt(ha)
        with np.errstate(divide="ignore", invalid="ignore"):
            sloped = (2.0 / 3.0) * (hb ** 1.5 - ha ** 1.5) / slope
        contrib = np.where(flat, flat_part, sloped)
        total += np.where(any_forbidden & (xb > xa), np.maximum(contrib, 0.0), 0.0)
    return 2.0 * kappa0 * total


def wkb_transmission(profile: BandProfile, energy, m_eff: float):
    """Transmission probability T(E) in [0, 1]; 1 when nothing is forbidden."""
    e = np.asarray(energy, dtype=float)
    t = np.exp(-_wkb_exponent(profile.layers, e, m_eff))
    t = np.clip(t, 0.0, 1.0)
    return float(t) if np.isscalar(energy) or e.ndim == 0 else t


# --------------------------------------------------------------------------
# Tsu-Esaki current
# --------------------------------------------------------------------------

def _supply(e: np.ndarray, fermi_md: float, fermi_mf: float, kt_ev: float):
    # ln[(1+exp((f_md-E)/kT)) / (1+exp((f_mf-E)/kT))], stable at both tails
    return (np.logaddexp(0.0, (fermi_md - e) / kt_ev)
            - np.logaddexp(0.0, (fermi_mf - e) / kt_ev))


def _simpson(y: np.ndarray, dx: float) -> float:
    n = y.shape[-1]
    if n % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of points")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float(np.dot(y, w)) * dx / 3.0


def _energy_window(profile: BandProfile, kt_ev: float):
    lo = min(profile.fermi_md, profile.fermi_mf) - 10.0 * kt_ev
    hi = profile.max_edge + 10.0 * kt_ev
    return lo, max(hi, lo + 20.0 * kt_ev)


def tsu_esaki_current(profile: BandProfile, barrier: BarrierParams,
                      v: float, rel_tol: float = 1e-4) -> float:
    """Tunneling current density (A/m^2) through one column.

    The energy integral is refined by grid doubling until the result is
    stable to rel_tol; exactly 0 at zero bias (detailed balance).
    """
    if v == 0.0 or profile.fermi_md == profile.fermi_mf:
        return 0.0
    kt_j = K_B * barrier.temperature
    kt_ev = kt_j / Q_E
    lo, hi = _energy_window(profile, kt_ev)
    pref = Q_E * barrier.m_eff * M_E * kt_j / (2.0 * math.pi ** 2 * HBAR ** 3)

    def integral(n_pts: int) -> float:
        e = np.linspace(lo, hi, n_pts)
        y = (wkb_transmission(profile, e, barrier.m_eff)
             * _supply(e, profile.fermi_md, profile.fermi_mf, kt_ev))
        return _simpson(y, (hi - lo) / (n_pts - 1))

    n = 257
    prev = integral(n)
    while n < 2 ** 15:
        n = 2 * n - 1
        cur = integral(n)
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return pref * Q_E * cur
        prev = cur
    raise QuadratureError(
        f"energy integral not converged to {rel_tol:g} with {n} points")


DEVICE_AREA_DEFAULT = 3.14e-8   # m^2; typical large-pad junction (~3.14e-4 cm^2)


def read_current(state: LatticeState, v_r: float, geom: StackGeometry,
                 mat: MaterialParams, barrier: BarrierParams,
                 device_area: float | None = None,
                 rel_tol: float = 1e-4) -> float:
    """Total read current (A) at bias v_r, summed over domain columns.

    Each column contributes its own Tsu-Esaki density times d^2; the lattice
    patch is scaled onto device_area (lattice area itself when None), so
    partially switched lattices give intermediate currents.
    """
    if v_r == 0.0:
        return 0.0
    kt_j = K_B * barrier.temperature
    kt_ev = kt_j / Q_E
    profiles = [band_profile(float(p_i), v_r, geom, mat, barrier)
                for p_i in state.p]
    lo = min(_energy_window(pr, kt_ev)[0] for pr in profiles)
    hi = max(_energy_window(pr, kt_ev)[1] for pr in profiles)
    pref = Q_E * barrier.m_eff * M_E * kt_j / (2.0 * math.pi ** 2 * HBAR ** 3)

    def densities(n_pts: int) -> np.ndarray:
        e = np.linspace(lo, hi, n_pts)
        dx = (hi - lo) / (n_pts - 1)
        sup = _supply(e, 0.0, -v_r, kt_ev)
        out = np.empty(len(profiles))
        for i, pr in enumerate(profiles):
            y = np.exp(-_wkb_exponent(pr.layers, e, barrier.m_eff)) * sup
            out[i] = _simpson(y, dx)
        return out

    n = 257
    prev = densities(n)
    while n < 2 ** 15:
        n = 2 * n - 1
        cur = densities(n)
        scale = np.maximum(np.abs(cur), 1e-300)
        if np.max(np.abs(cur - prev) / scale) <= rel_tol:
            break
        prev = cur
    else:
        raise QuadratureError("per-column energy integrals not converged")
    area_scale = 1.0 if device_area is None else device_area / geom.lattice_area
    return float(np.sum(pref * Q_E * cur) * geom.d ** 2 * area_scale)


def depolarization_field(geom: StackGeometry, mat: MaterialParams,
                         p_r: float) -> float:
    """Retention-state depolarizing field magnitude p_r/(eps0*eps_f*(C_D/C_F+1))."""
    if p_r < 0:
        raise ValueError("p_r must be non-negative")
    if geom.t_d == 0:
        return 0.0
    c_d = EPS0 * geom.eps_d / geom.t_d
    c_f = EPS0 * mat.eps_f / geom.t_f
    return p_r / (EPS0 * mat.eps_f * (c_d / c_f + 1.0))


# --------------------------------------------------------------------------
# write/read waveforms and multilevel programming
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Pulse:
    kind: str          # write | read | rest
    amplitude: float   # V
    duration: float    # s

    def __post_init__(self):
        if self.kind not in ("write", "read", "rest"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.duration <= 0:
            raise ValueError("pulse duration must be positive")


@dataclass(frozen=True)
class Waveform:
    pulses: tuple[Pulse, ...]

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))


def _integrate_pulse(state: LatticeState, v: float, duration: float,
                     mat: MaterialParams, geom: StackGeometry, dt: float,
                     settle_tol: float) -> LatticeState:
    """March the dynamics at fixed bias; stop early once the state settles.

    The state time always advances by the full pulse duration (a settled
    state no longer moves, so skipping the remainder is exact up to the
    settle tolerance).
    """
    t_end = state.t + duration
    current = state
    while current.t < t_end - 1e-18:
        f = driving_field(current.p, v, mat, geom)
        if float(np.max(np.abs(f))) < settle_tol:
            break
        step = min(dt, t_end - current.t)
        current = tdgl_step(current, v, step, mat, geom)
    if current.t < t_end:
        current = current.copy()
        current.t = t_end
        if current.v_t != v:
            sol = solve_series_electrostatics(current.p, v, geom, mat)
            current.v_t, current.e_f, current.e_d, current.v_d = \
                v, sol.e_f, sol.e_d, sol.v_d
    return current


def apply_waveform(state: LatticeState, wf: Waveform, geom: StackGeometry,
                   mat: MaterialParams, barrier: BarrierParams,
                   dt: float | None = None, settle_tol: float = 1e3,
                   device_area: float | None = None):
    """Drive the lattice through a pulse train; sample current at read pulses.

    Returns (final_state, samples) with samples a list of (t, I) tuples
    taken at the end of each read pulse, after relaxation at the read bias
    capped by the pulse duration.
    """
    if dt is None:
        dt = default_time_step(mat, geom)
    current = state
    samples: list[tuple[float, float]] = []
    for pulse in wf.pulses:
        current = _integrate_pulse(current, pulse.amplitude, pulse.duration,
                                   mat, geom, dt, settle_tol)
        if pulse.kind == "read":
            samples.append((current.t,
                            read_current(current, pulse.amplitude, geom, mat,
                                         barrier, device_area=device_area)))
    return current, samples


@dataclass(frozen=True)
class ProgramTemplate:
    """Reset/write/read schedule used for every programming trial.

    read_relax is kept short against the switching time at the read bias:
    a stored pattern drifts toward the read-bias steady state (read
    disturb), so a long quasi-static read would erase the level spacing.
    The default settles the reversible well response without flipping
    domains.
    """

    reset_voltage: float = -8.0
    reset_duration: float = 1e-6
    write_duration: float = 1e-6
    rest_duration: float = 1e-5
    read_voltage: float = 2.0
    read_relax: float = 1e-7


@dataclass(frozen=True)
class ProgramLevel:
    amplitude: float
    p_avg: float
    i_read: float


@dataclass(frozen=True)
class ProgramResult:
    levels: tuple[ProgramLevel, ...]
    p_monotone: bool
    i_monotone: bool


def program_levels(state: LatticeState, amplitudes, geom: StackGeometry,
                   mat: MaterialParams, barrier: BarrierParams,
                   template: ProgramTemplate = ProgramTemplate(),
                   dt: float | None = None, settle_tol: float = 1e3,
                   device_area: float | None = None) -> ProgramResult:
    """Program one level per write amplitude, each from a fresh reset.

    Amplitudes must be sorted ascending.  Non-monotone level sequences are
    reported via the result flags and a ModelConsistencyWarning, never
    silently.
    """
    amplitudes = [float(a) for a in amplitudes]
    if any(b < a for a, b in zip(amplitudes, amplitudes[1:])):
        raise ValueError("write amplitudes must be sorted ascending")
    levels = []
    for amp in amplitudes:
        wf = Waveform((
            Pulse("write", template.reset_voltage, template.reset_duration),
            Pulse("rest", 0.0, template.rest_duration),
            Pulse("write", amp, template.write_duration),
            Pulse("rest", 0.0, template.rest_duration),
            Pulse("read", template.read_voltage, template.read_relax),
        ))
        final, samples = apply_waveform(state.copy(), wf, geom, mat, barrier,
                                        dt=dt, settle_tol=settle_tol,
                                        device_area=device_area)
        levels.append(ProgramLevel(amplitude=amp, p_avg=final.p_avg,
                                   i_read=samples[-1][1]))
    p_seq = [lv.p_avg for lv in levels]
    i_seq = [lv.i_read for lv in levels]
    p_mono = all(b >= a - 1e-12 for a, b in zip(p_seq, p_seq[1:]))
    i_mono = all(b >= a * (1 - 1e-9) for a, b in zip(i_seq, i_seq[1:]))
    if not (p_mono and i_mono):
        warnings.warn("programmed levels are not monotone in write amplitude",
                      ModelConsistencyWarning, stacklevel=2)
    return ProgramResult(levels=tuple(levels), p_monotone=p_mono,
                         i_monotone=i_mono)
