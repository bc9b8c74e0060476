"""Multi-domain Landau-Ginzburg-Devonshire dynamics for series MFIM stacks.

The ferroelectric film is discretized into an n_y x n_x lattice of square
domains (side d, wall width w), each carrying a single out-of-plane
polarization component p_i (C/m^2).  Every domain column sees a series
ferroelectric/dielectric capacitor between metal plates; domains interact
through a discrete domain-wall energy on shared edges and, optionally,
through a lateral charge-sharing correction to the depolarizing field.
Dynamics are overdamped gradient flow:

    rho_kin * dp_i/dt = f_landau(p_i) + e_f,i + f_wall,i + f_lateral,i

with f_landau = -(2*alpha*p + 4*beta*p^3 + 6*gamma*p^5) and e_f,i the
ferroelectric field of column i.  All quantities are SI: polarization in
C/m^2, fields in V/m, energies in J, lengths in m.

Column electrostatics (exact per column, tau = t_d + t_f*eps_d/eps_f):

    e_d,i = (v_t + t_f*p_i/(eps0*eps_f)) / tau
    e_f,i = eps_d*v_t/(eps_f*tau) - p_i*t_d/(eps0*eps_f*tau)
    v_d,i = e_d,i * t_d

so e_f is affine in p: e_f = a*v_t + b*p with a = eps_d/(eps_f*tau) and
b = -t_d/(eps0*eps_f*tau).  Displacement continuity
eps0*eps_f*e_f,i + p_i = eps0*eps_d*e_d,i and the voltage balance
e_f,i*t_f + e_d,i*t_d = v_t hold identically.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import EPS0
from .errors import (DegenerateMaterialError, InsufficientDataError,
                     IntegrationBlowupError, NonConvergenceError)

__all__ = [
    "MaterialParams", "StackGeometry", "LatticeState", "SweepSegment",
    "SweepProtocol", "Trace", "StabilityResult", "ElectrostaticSolution",
    "Observables", "spontaneous_polarization", "nc_stability_check",
    "landau_bulk_field", "affine_field_coefficients", "coupling_field",
    "lateral_field", "solve_series_electrostatics", "driving_field",
    "default_time_step", "tdgl_step", "relax_to_steady", "init_lattice",
    "run_voltage_sweep", "gibbs_energy", "observables", "switching_spread",
]


# --------------------------------------------------------------------------
# parameter containers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MaterialParams:
    """Ferroelectric material constants.

    alpha, beta, gamma: Landau coefficients of U_L = alpha*P^2 + beta*P^4
    + gamma*P^6 in m/F, m^5/(C^2 F), m^9/(C^4 F).  k_dw is the domain-wall
    coupling constant (m^3/F), eps_f the relative permittivity, rho_kin the
    kinetic resistivity (Ohm*m) setting the switching time scale.
    wall_scale multiplies the discrete wall-energy prefactor (the geometric
    prefactor of the wall discretization is known only up to a constant).
    """

    alpha: float
    beta: float
    gamma: float
    k_dw: float
    eps_f: float
    rho_kin: float
    wall_scale: float = 1.0

    def __post_init__(self):
        if not (self.beta > 0 or self.gamma > 0):
            raise ValueError("bounded Landau energy requires beta > 0 or gamma > 0")
        if self.eps_f <= 0:
            raise ValueError("eps_f must be positive")
        if self.rho_kin <= 0:
            raise ValueError("rho_kin must be positive")
        if self.k_dw < 0:
            raise ValueError("k_dw must be non-negative")
        if self.wall_scale <= 0:
            raise ValueError("wall_scale must be positive")


@dataclass(frozen=True)
class StackGeometry:
    """Layer thicknesses and the domain lattice of an MFIM stack.

    t_d = 0 is allowed and describes the metal-ferroelectric-metal limit
    (the dielectric layer collapses, eps_d then only enters via tau).
    lateral_screening is the fraction (0..1) of the depolarizing response
    that couples to the lattice-average polarization instead of each
    column's own polarization.  0 treats every column as an isolated series
    stack; values near 1 describe stacks whose domain side is small against
    the dielectric thickness, where electrode/dielectric charge spreads
    laterally and single columns are only weakly self-screened.  The
    lattice-average (uniform) response is independent of this parameter.
    """

    t_f: float
    t_d: float
    eps_d: float
    n_x: int
    n_y: int
    d: float
    w: float
    lateral_screening: float = 0.0

    def __post_init__(self):
        if self.t_f <= 0 or self.d <= 0 or self.w <= 0:
            raise ValueError("t_f, d, w must be positive")
        if self.t_d < 0:
            raise ValueError("t_d must be non-negative")
        if self.eps_d <= 0:
            raise ValueError("eps_d must be positive")
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError("lattice needs n_x*n_y >= 1 domains")
        if not self.w < self.d:
            raise ValueError("wall width w must be smaller than domain side d")
        if not 0.0 <= self.lateral_screening <= 1.0:
            raise ValueError("lateral_screening must lie in [0, 1]")

    @property
    def n_domains(self) -> int:
        return self.n_x * self.n_y

    @property
    def lattice_area(self) -> float:
        """Total device area represented by the lattice (m^2)."""
        return self.n_domains * self.d ** 2


@dataclass
class LatticeState:
    """Evolving lattice state: polarization plus cached per-column fields.

    p is flat, row-major (index i = iy*n_x + ix).  The cached e_f, e_d, v_d
    satisfy the per-column electrostatics for (p, v_t) exactly.
    """

    p: np.ndarray
    t: float
    v_t: float
    e_f: np.ndarray
    e_d: np.ndarray
    v_d: np.ndarray

    @property
    def p_avg(self) -> float:
        return float(np.mean(self.p))

    def copy(self) -> "LatticeState":
        return LatticeState(self.p.copy(), self.t, self.v_t,
                            self.e_f.copy(), self.e_d.copy(), self.v_d.copy())


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    lhs: float     # C_D + C_F (F/m^2)
    rhs: float     # 1/(2|alpha| t_f) (F/m^2)


@dataclass(frozen=True)
class ElectrostaticSolution:
    e_f: np.ndarray
    e_d: np.ndarray
    v_d: np.ndarray


# --------------------------------------------------------------------------
# static material / stack relations
# --------------------------------------------------------------------------

def spontaneous_polarization(mat: MaterialParams) -> float:
    """Zero-field equilibrium |P| of the bare Landau energy (0 if alpha >= 0)."""
    if mat.alpha >= 0:
        return 0.0
    if mat.gamma == 0:
        return math.sqrt(-mat.alpha / (2.0 * mat.beta))
    # stationarity alpha + 2*beta*P^2 + 3*gamma*P^4 = 0, outer root
    disc = mat.beta ** 2 - 3.0 * mat.gamma * mat.alpha
    p2 = (-mat.beta + math.sqrt(disc)) / (3.0 * mat.gamma)
    return math.sqrt(p2)


def nc_stability_check(geom: StackGeometry, mat: MaterialParams) -> StabilityResult:
    """Single-domain stabilization criterion (C_D + C_F) < 1/(2|alpha| t_f)."""
    if mat.alpha == 0:
        raise DegenerateMaterialError("alpha = 0: stabilization bound undefined")
    c_f = EPS0 * mat.eps_f / geom.t_f
    c_d = math.inf if geom.t_d == 0 else EPS0 * geom.eps_d / geom.t_d
    lhs = c_d + c_f
    rhs = 1.0 / (2.0 * abs(mat.alpha) * geom.t_f)
    return StabilityResult(stable=lhs < rhs, lhs=lhs, rhs=rhs)


def landau_bulk_field(p, mat: MaterialParams):
    """Negative derivative of the Landau energy density, -dU_L/dP (V/m)."""
    return -(2.0 * mat.alpha * p + 4.0 * mat.beta * p ** 3
             + 6.0 * mat.gamma * p ** 5)


def affine_field_coefficients(geom: StackGeometry, mat: MaterialParams):
    """Coefficients (a, b) of the per-column field e_f = a*v_t + b*p."""
    tau = geom.t_d + geom.t_f * geom.eps_d / mat.eps_f
    a = geom.eps_d / (mat.eps_f * tau)
    b = -geom.t_d / (EPS0 * mat.eps_f * tau)
    return a, b


def solve_series_electrostatics(p, v_t: float, geom: StackGeometry,
                                mat: MaterialParams) -> ElectrostaticSolution:
    """Exact per-column fields of the series ferroelectric/dielectric stack."""
    p = np.asarray(p, dtype=float)
    tau = geom.t_d + geom.t_f * geom.eps_d / mat.eps_f
    e_d = (v_t + geom.t_f * p / (EPS0 * mat.eps_f)) / tau
    e_f = (geom.eps_d * v_t / (mat.eps_f * tau)
           - p * geom.t_d / (EPS0 * mat.eps_f * tau))
    v_d = e_d * geom.t_d
    return ElectrostaticSolution(e_f=e_f, e_d=e_d, v_d=v_d)


# --------------------------------------------------------------------------
# interaction fields
# --------------------------------------------------------------------------

def _wall_prefactor(mat: MaterialParams, geom: StackGeometry) -> float:
    # field per unit polarization difference; from the pairwise edge energy
    # (wall_scale * k_dw * t_f * w / (2 d)) * (p_i - p_j)^2 over t_f*d^2 volume
    return mat.wall_scale * mat.k_dw * geom.w / geom.d ** 3


def _neighbor_field_rows(p2d: np.ndarray, r0: int, r1: int, c: float) -> np.ndarray:
    """Wall field c * sum_nbr (p_j - p_i) for rows [r0:r1); open boundaries.

    Contributions are accumulated in a fixed order (up, down, left, right)
    so the result is bitwise independent of row chunking.
    """
    ny, nx = p2d.shape
    block = p2d[r0:r1]
    out = np.zeros_like(block)
    if r0 > 0:
        out[0:1] += p2d[r0 - 1:r0] - block[0:1]
    if r1 - r0 > 1:
        out[1:] += p2d[r0:r1 - 1] - block[1:]
    if r1 < ny:
        out[-1:] += p2d[r1:r1 + 1] - block[-1:]
    if r1 - r0 > 1:
        out[:-1] += p2d[r0 + 1:r1] - block[:-1]
    if nx > 1:
        out[:, 1:] += block[:, :-1] - block[:, 1:]
        out[:, :-1] += block[:, 1:] - block[:, :-1]
    return c * out


def coupling_field(p, mat: MaterialParams, geom: StackGeometry) -> np.ndarray:
    """Domain-wall driving field on each domain (V/m), 4-neighbor lattice."""
    p2d = np.asarray(p, dtype=float).reshape(geom.n_y, geom.n_x)
    c = _wall_prefactor(mat, geom)
    return _neighbor_field_rows(p2d, 0, geom.n_y, c).reshape(-1)


def lateral_field(p, mat: MaterialParams, geom: StackGeometry) -> np.ndarray:
    """Lateral charge-sharing correction s*b*(p_mean - p_i) to the column field.

    Zero when lateral_screening = 0 (isolated columns) and identically zero
    for uniform lattices at any screening fraction.
    """
    p = np.asarray(p, dtype=float)
    s = geom.lateral_screening
    if s == 0.0:
        return np.zeros_like(p)
    _, b = affine_field_coefficients(geom, mat)
    return s * b * (np.mean(p) - p)


def driving_field(p, v_t: float, mat: MaterialParams, geom: StackGeometry,
                  pool: ThreadPoolExecutor | None = None,
                  workers: int = 1) -> np.ndarray:
    """Total field rho_kin*dp/dt on every domain (V/m)."""
    p = np.asarray(p, dtype=float)
    a, b = affine_field_coefficients(geom, mat)
    s = geom.lateral_screening
    p_mean = float(np.mean(p)) if s != 0.0 else 0.0
    c_wall = _wall_prefactor(mat, geom)
    p2d = p.reshape(geom.n_y, geom.n_x)
    out = np.empty_like(p2d)

    def fill(r0: int, r1: int):
        block = p2d[r0:r1]
        f = landau_bulk_field(block, mat) + (a * v_t + b * block)
        if s != 0.0:
            f += s * b * (p_mean - block)
        f += _neighbor_field_rows(p2d, r0, r1, c_wall)
        out[r0:r1] = f

    if pool is None or workers <= 1 or geom.n_y == 1:
        fill(0, geom.n_y)
    else:
        n = min(workers, geom.n_y)
        bounds = [(i * geom.n_y) // n for i in range(n + 1)]
        futures = [pool.submit(fill, bounds[i], bounds[i + 1]) for i in range(n)]
        for fut in futures:
            fut.result()
    return out.reshape(-1)


# --------------------------------------------------------------------------
# time integration
# --------------------------------------------------------------------------

def default_time_step(mat: MaterialParams, geom: StackGeometry) -> float:
    """Stable explicit-Euler step from the stiffest linearized rate.

    Uses the field slope bound over the divergence guard band |p| <= 2*P0
    (Landau curvature, depolarization slope |b| and the wall diagonal) with
    a 4x safety margin, and never exceeds 0.2*rho_kin/|2 alpha|.
    """
    p_ref = 2.0 * spontaneous_polarization(mat)
    a_, b = affine_field_coefficients(geom, mat)
    kappa = (abs(2.0 * mat.alpha) + 12.0 * mat.beta * p_ref ** 2
             + 30.0 * abs(mat.gamma) * p_ref ** 4 + abs(b)
             + 8.0 * _wall_prefactor(mat, geom))
    dt = 0.5 * mat.rho_kin / kappa
    if mat.alpha != 0:
        dt = min(dt, 0.2 * mat.rho_kin / abs(2.0 * mat.alpha))
    return dt


def _make_state(p: np.ndarray, t: float, v_t: float, geom: StackGeometry,
                mat: MaterialParams) -> LatticeState:
    sol = solve_series_electrostatics(p, v_t, geom, mat)
    return LatticeState(p=p, t=t, v_t=v_t, e_f=sol.e_f, e_d=sol.e_d, v_d=sol.v_d)


def tdgl_step(state: LatticeState, v_t: float, dt: float, mat: MaterialParams,
              geom: StackGeometry, pool: ThreadPoolExecutor | None = None,
              workers: int = 1) -> LatticeState:
    """One explicit first-order step of the gradient-flow dynamics."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    f = driving_field(state.p, v_t, mat, geom, pool=pool, workers=workers)
    p_new = state.p + (dt / mat.rho_kin) * f
    p0 = spontaneous_polarization(mat)
    guard = 2.0 * p0 if p0 > 0 else math.inf
    if not np.all(np.isfinite(p_new)) or np.any(np.abs(p_new) > guard):
        raise IntegrationBlowupError(
            f"polarization left the guard band |p| <= {guard:.4g} C/m^2 "
            f"at t = {state.t:.4g} s with dt = {dt:.4g} s", dt=dt)
    return _make_state(p_new, state.t + dt, v_t, geom, mat)


def relax_to_steady(state: LatticeState, v_t: float, mat: MaterialParams,
                    geom: StackGeometry, tol: float = 100.0,
                    t_max: float = 1e-3, dt: float | None = None,
                    pool: ThreadPoolExecutor | None = None,
                    workers: int = 1) -> LatticeState:
    """Integrate at fixed v_t until max |rho_kin*dp/dt| < tol (V/m).

    Returns immediately (after one residual check) if already converged.
    Raises NonConvergenceError carrying the residual when t_max elapses.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if dt is None:
        dt = default_time_step(mat, geom)
    elapsed = 0.0
    current = state
    while True:
        f = driving_field(current.p, v_t, mat, geom, pool=pool, workers=workers)
        residual = float(np.max(np.abs(f)))
        if residual < tol:
            if current is state:
                # refresh caches for the requested bias without advancing time
                current = _make_state(state.p.copy(), state.t, v_t, geom, mat)
            return current
        if elapsed >= t_max:
            raise NonConvergenceError(
                f"no steady state within t_max = {t_max:.4g} s "
                f"(residual {residual:.4g} V/m, tol {tol:.4g} V/m)",
                residual=residual)
        p_new = current.p + (dt / mat.rho_kin) * f
        p0 = spontaneous_polarization(mat)
        guard = 2.0 * p0 if p0 > 0 else math.inf
        if not np.all(np.isfinite(p_new)) or np.any(np.abs(p_new) > guard):
            raise IntegrationBlowupError(
                f"relaxation diverged with dt = {dt:.4g} s", dt=dt)
        current = _make_state(p_new, current.t + dt, v_t, geom, mat)
        elapsed += dt


def init_lattice(geom: StackGeometry, mat: MaterialParams, mode: str = "uniform",
                 p0: float = 0.0, noise: float = 0.0, seed: int = 0) -> LatticeState:
    """Deterministic initial state.

    uniform:           p_i = p0 everywhere
    random-perturbed:  p_i = p0 + zero-mean uniform noise of half-width `noise`
    two-phase:         +p0 on the left half of the lattice, -p0 on the right
    """
    if noise < 0:
        raise ValueError("noise half-width must be non-negative")
    n = geom.n_domains
    if mode == "uniform":
        p = np.full(n, float(p0))
    elif mode == "random-perturbed":
        rng = np.random.default_rng(seed)
        p = p0 + rng.uniform(-noise, noise, size=n)
    elif mode == "two-phase":
        p2d = np.full((geom.n_y, geom.n_x), float(p0))
        p2d[:, geom.n_x // 2:] = -p0
        p = p2d.reshape(-1)
        if noise > 0:
            rng = np.random.default_rng(seed)
            p = p + rng.uniform(-noise, noise, size=n)
    else:
        raise ValueError(f"unknown init mode {mode!r}")
    return _make_state(p, 0.0, 0.0, geom, mat)


# --------------------------------------------------------------------------
# energy
# --------------------------------------------------------------------------

def _edge_square_sum(p2d: np.ndarray) -> float:
    h = p2d[:, 1:] - p2d[:, :-1]
    v = p2d[1:, :] - p2d[:-1, :]
    return float(np.sum(h * h) + np.sum(v * v))


def gibbs_energy(state, v_t: float, mat: MaterialParams,
                 geom: StackGeometry) -> float:
    """Total Gibbs energy (J); Lyapunov function of the fixed-bias dynamics.

    G = sum_i t_f d^2 (alpha p^2 + beta p^4 + gamma p^6 - a v_t p)
        + sum_edges wall_scale k_dw t_f w/(2d) (p_i - p_j)^2
        - t_f d^2 (b/2) [(1-s) sum_i p_i^2 + s (sum_i p_i)^2 / n]

    with (a, b) the affine field coefficients and s the lateral screening
    fraction, so that dG/dp_i = -t_f d^2 * (total driving field on i).
    """
    p = state.p if isinstance(state, LatticeState) else np.asarray(state, float)
    p2d = p.reshape(geom.n_y, geom.n_x)
    vol = geom.t_f * geom.d ** 2
    landau = vol * float(np.sum(mat.alpha * p ** 2 + mat.beta * p ** 4
                                + mat.gamma * p ** 6))
    wall = (mat.wall_scale * mat.k_dw * geom.t_f * geom.w / (2.0 * geom.d)
            * _edge_square_sum(p2d))
    a, b = affine_field_coefficients(geom, mat)
    s = geom.lateral_screening
    total = float(np.sum(p))
    elec = vol * (-a * v_t * total
                  - 0.5 * b * ((1.0 - s) * float(np.sum(p * p))
                               + s * total * total / p.size))
    return landau + wall + elec


# --------------------------------------------------------------------------
# sweeps, traces, observables
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSegment:
    """Linear voltage ramp v_start -> v_end at ramp_rate, sampled sample_count times.

    v_start == v_end holds the voltage for 1 V worth of ramp time (1/ramp_rate).
    """

    v_start: float
    v_end: float
    ramp_rate: float
    sample_count: int

    def __post_init__(self):
        if self.ramp_rate <= 0:
            raise ValueError("ramp_rate must be positive")
        if self.sample_count < 2:
            raise ValueError("sample_count must be at least 2")

    @property
    def duration(self) -> float:
        dv = abs(self.v_end - self.v_start)
        return (dv if dv > 0 else 1.0) / self.ramp_rate


@dataclass(frozen=True)
class SweepProtocol:
    segments: tuple[SweepSegment, ...]

    def __post_init__(self):
        if not self.segments:
            raise ValueError("protocol needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))


@dataclass
class Trace:
    """Columnar record of a voltage sweep (one row per requested sample)."""

    t: np.ndarray
    v_t: np.ndarray
    p_avg: np.ndarray
    v_d_avg: np.ndarray
    q_md: np.ndarray
    energy: np.ndarray
    segment: np.ndarray
    snapshots: np.ndarray | None = None
    final_state: LatticeState | None = None

    def __len__(self) -> int:
        return self.t.size


@dataclass(frozen=True)
class Observables:
    gain: np.ndarray
    q_md: np.ndarray
    hysteresis_width: float


def run_voltage_sweep(state: LatticeState, protocol: SweepProtocol,
                      mat: MaterialParams, geom: StackGeometry,
                      dt: float | None = None, record_snapshots: bool = False,
                      workers: int = 1) -> Trace:
    """Integrate the TDGL dynamics through all protocol segments.

    Samples are evenly spaced in time within each segment, endpoints
    included; a sample coinciding with the previous segment's endpoint is
    dropped so trace times stay strictly increasing.
    """
    if dt is None:
        dt = default_time_step(mat, geom)
    cols: dict[str, list] = {k: [] for k in
                             ("t", "v_t", "p_avg", "v_d_avg", "q_md", "energy",
                              "segment")}
    snaps: list[np.ndarray] = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    current = state
    try:
        for seg_idx, seg in enumerate(protocol.segments):
            duration = seg.duration
            n_steps = max(int(math.ceil(duration / dt)), seg.sample_count - 1, 1)
            dt_seg = duration / n_steps
            sample_steps = np.unique(
                np.rint(np.linspace(0, n_steps, seg.sample_count)).astype(int))
            sample_set = set(int(m) for m in sample_steps)
            for m in range(n_steps + 1):
                frac = m / n_steps
                v_now = seg.v_start + (seg.v_end - seg.v_start) * frac
                if m in sample_set:
                    t_now = current.t
                    if not cols["t"] or t_now > cols["t"][-1]:
                        if current.v_t != v_now:
                            current = _make_state(current.p, current.t, v_now,
                                                  geom, mat)
                        cols["t"].append(t_now)
                        cols["v_t"].append(v_now)
                        cols["p_avg"].append(current.p_avg)
                        cols["v_d_avg"].append(float(np.mean(current.v_d)))
                        cols["q_md"].append(EPS0 * geom.eps_d
                                            * float(np.mean(current.e_d)))
                        cols["energy"].append(gibbs_energy(current, v_now, mat, geom))
                        cols["segment"].append(seg_idx)
                        if record_snapshots:
                            snaps.append(current.p.copy())
                if m < n_steps:
                    v_next = seg.v_start + (seg.v_end - seg.v_start) * ((m + 1) / n_steps)
                    current = tdgl_step(current, v_next, dt_seg, mat, geom,
                                        pool=pool, workers=workers)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    trace = Trace(
        t=np.asarray(cols["t"]), v_t=np.asarray(cols["v_t"]),
        p_avg=np.asarray(cols["p_avg"]), v_d_avg=np.asarray(cols["v_d_avg"]),
        q_md=np.asarray(cols["q_md"]), energy=np.asarray(cols["energy"]),
        segment=np.asarray(cols["segment"], dtype=int),
        snapshots=np.asarray(snaps) if record_snapshots else None,
        final_state=current)
    return trace


def _segment_slices(trace: Trace) -> list[slice]:
    seg = trace.segment
    out = []
    start = 0
    for i in range(1, seg.size + 1):
        if i == seg.size or seg[i] != seg[start]:
            out.append(slice(start, i))
            start = i
    return out


def observables(trace: Trace) -> Observables:
    """Per-sample voltage gain and MD charge, plus the loop hysteresis width.

    gain is the finite difference of v_d_avg against v_t within each
    monotone segment (central in the interior, one-sided at segment ends);
    hold segments get NaN.  hysteresis_width is the largest vertical gap in
    p_avg between the longest rising and longest falling branches over
    their common v_t range, normalized by the loop's total p_avg range.
    """
    n = len(trace)
    gain = np.full(n, np.nan)
    for sl in _segment_slices(trace):
        m = sl.stop - sl.start
        if m < 3:
            raise InsufficientDataError(
                f"segment {int(trace.segment[sl.start])} has {m} samples; "
                "need at least 3")
        v = trace.v_t[sl]
        if abs(v[-1] - v[0]) > 0:
            gain[sl] = np.gradient(trace.v_d_avg[sl], v)
    width = _hysteresis_width(trace)
    return Observables(gain=gain, q_md=trace.q_md.copy(), hysteresis_width=width)


def _branch_slices(trace: Trace) -> tuple[slice | None, slice | None]:
    up = down = None
    up_span = down_span = 0.0
    for sl in _segment_slices(trace):
        v = trace.v_t[sl]
        span = v[-1] - v[0]
        if span > 0 and span >= up_span:
            up, up_span = sl, span
        elif span < 0 and -span >= down_span:
            down, down_span = sl, -span
    return up, down


def _hysteresis_width(trace: Trace) -> float:
    up, down = _branch_slices(trace)
    if up is None or down is None:
        return 0.0
    v_up, p_up = trace.v_t[up], trace.p_avg[up]
    v_dn, p_dn = trace.v_t[down][::-1], trace.p_avg[down][::-1]
    lo = max(v_up[0], v_dn[0])
    hi = min(v_up[-1], v_dn[-1])
    if hi <= lo:
        return 0.0
    grid = np.linspace(lo, hi, max(v_up.size, v_dn.size))
    gap = np.abs(np.interp(grid, v_up, p_up) - np.interp(grid, v_dn, p_dn))
    p_all = np.concatenate([p_up, p_dn])
    p_range = float(np.max(p_all) - np.min(p_all))
    if p_range == 0.0:
        return 0.0
    return float(np.max(gap)) / p_range


def switching_spread(trace: Trace, level: float = 0.0) -> float:
    """Spread (V) of per-domain switching voltages on the longest rising branch.

    A domain's switching voltage is the v_t of its first upward crossing of
    `level`.  Requires per-domain snapshots; domains that never cross are
    ignored; returns 0.0 when fewer than two domains switch.
    """
    if trace.snapshots is None:
        raise InsufficientDataError("switching_spread needs per-domain snapshots")
    up, _ = _branch_slices(trace)
    if up is None:
        return 0.0
    v = trace.v_t[up]
    snaps = trace.snapshots[up]
    crossings = []
    for j in range(snaps.shape[1]):
        pj = snaps[:, j]
        above = pj > level
        if above[0] or not above.any():
            continue
        k = int(np.argmax(above))
        # linear interpolation between samples k-1 and k
        f = (level - pj[k - 1]) / (pj[k] - pj[k - 1])
        crossings.append(v[k - 1] + f * (v[k] - v[k - 1]))
    if len(crossings) < 2:
        return 0.0
    return float(np.max(crossings) - np.min(crossings))
