"""Clock spectroscopy protocols: Rabi baseline, winding-number readouts, SSH clock."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.integrate import cumulative_trapezoid, trapezoid

from .analytics import required_sites
from .evolve import (EDGE_LEAKAGE_LIMIT, EdgeLeakageError, Propagator, Pulse, apply_pulse,
                     check_edges, evolve_const, prepare_bond_superposition, rotate_bonds,
                     _PULSES)
from .model import RMParameters, build_rm_hamiltonian
from .noise import NOISELESS, NoiseRealization
from .state import localized_state, measure

#: finest MD time step allowed, as a fraction of the sideband Rabi period
MD_MAX_STEP_FRACTION = 0.01


class NoRootError(ValueError):
    pass


def apply_noise(params: RMParameters, realization: NoiseRealization,
                tilt_scale: Optional[float] = None) -> RMParameters:
    """Omega -> Omega e^{i eps_phi} (1 + eps_a), delta_t -> delta_t + eps_t * Omega_B."""
    scale = params.omega_b if tilt_scale is None else tilt_scale
    return replace(
        params,
        omega_a=params.omega_a * realization.amp_a,
        omega_b=params.omega_b * realization.amp_b,
        delta_t=params.delta_t + realization.tilt(scale),
        phase=params.phase + realization.eps_phi,
        phase_b=None if realization.eps_phi_b is None else
        (params.phase if params.phase_b is None else params.phase_b) + realization.eps_phi_b,
    )


# ---------------------------------------------------------------- Rabi baseline

@dataclass(frozen=True)
class RabiSpec:
    omega_r: float

    @property
    def t_pi(self) -> float:
        return math.pi / self.omega_r


def rabi_lineshape(spec: RabiSpec, delta_l: float,
                   realization: NoiseRealization = NOISELESS) -> float:
    """(n_e - n_g)/2 after a nominal pi pulse at carrier detuning ``delta_l``."""
    omega = spec.omega_r * realization.amp_a
    h = build_rm_hamiltonian(RMParameters(omega, 0.0, delta_l, 0.0, realization.eps_phi), 2)
    return measure(evolve_const(h, localized_state(2, 0), spec.t_pi)).S_z


def rabi_excitation(delta_l, omega: float, t: float):
    """Closed-form two-level excitation probability."""
    w2 = omega ** 2 + np.asarray(delta_l, float) ** 2
    return omega ** 2 / w2 * np.sin(np.sqrt(w2) * t / 2) ** 2


def _rabi_slope(delta_l: float, omega: float, t: float) -> float:
    w = math.hypot(omega, delta_l)
    s, c = math.sin(w * t / 2), math.cos(w * t / 2)
    return omega ** 2 * (-2 * delta_l / w ** 4 * s * s + t * delta_l / w ** 3 * s * c)


def rabi_operating_point(spec: RabiSpec) -> float:
    """Positive detuning of maximal lineshape slope (root of the second derivative)."""
    om, t = spec.omega_r, spec.t_pi
    h = 1e-6 * om
    curvature = lambda d: (_rabi_slope(d + h, om, t) - _rabi_slope(d - h, om, t)) / (2 * h)
    return optimize.brentq(curvature, 0.3 * om, 1.2 * om, xtol=1e-12 * om)


# ---------------------------------------------------------------- winding readouts

@dataclass
class MDTrace:
    """Mean-displacement run: I_y readout and its weighted integral."""

    params: RMParameters
    times: np.ndarray
    I_y: np.ndarray
    x_over_aL: np.ndarray
    centroid_shift: np.ndarray
    site_count: int

    def plateau(self, lo: float, hi: float) -> float:
        """Time average of x(T)/a_L over Omega_B T in [lo, hi]."""
        phase = self.times * self.params.omega_b
        m = (phase >= lo - 1e-9) & (phase <= hi + 1e-9)
        return float(trapezoid(self.x_over_aL[m], self.times[m]) / (self.times[m][-1] - self.times[m][0]))

    def to_csv(self, path: str | Path, r: float | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "T", "I_y", "x_over_aL"])
            rr = self.params.ratio if r is None else r
            for row in zip(self.times, self.I_y, self.x_over_aL):
                w.writerow([repr(rr), *(repr(float(v)) for v in row)])


def md_time_grid(omega_b: float, t_max: float, fraction: float = MD_MAX_STEP_FRACTION / 2) -> np.ndarray:
    n = int(math.ceil(t_max / (fraction * 2 * math.pi / omega_b)))
    return np.linspace(0.0, t_max, n + 1)


def run_md_protocol(params: RMParameters, times: Sequence[float], site_count: int = 64,
                    l0: Optional[int] = None, *, guard: bool = True) -> MDTrace:
    """Evolve |l0,g> under the SSH model, apply m1, read S_z = I_y, integrate.

    ``times`` must start at 0 with spacing at most 1% of the sideband period.
    """
    if params.delta or params.delta_t:
        raise ValueError("the MD protocol runs at delta = delta_t = 0")
    t = np.asarray(times, float)
    if t[0] != 0 or np.any(np.diff(t) <= 0):
        raise ValueError("times must start at 0 and increase")
    if params.omega_b > 0 and np.max(np.diff(t)) > MD_MAX_STEP_FRACTION * 2 * math.pi / params.omega_b * (1 + 1e-9):
        raise ValueError("MD time grid is coarser than 1% of the sideband period")
    l0 = site_count // 2 if l0 is None else l0
    psi0 = localized_state(site_count, l0)
    amps = Propagator(build_rm_hamiltonian(params, site_count)).series(psi0, t)
    pops = np.abs(amps) ** 2
    if guard:
        edge = pops[:, :4].sum(axis=1) + pops[:, -4:].sum(axis=1)
        bad = np.flatnonzero(edge >= EDGE_LEAKAGE_LIMIT)
        if bad.size:
            raise EdgeLeakageError(
                f"edge population {edge[bad[0]]:.3e} at Omega_B T = {t[bad[0]] * params.omega_b:.4g} "
                f"in MD run on {site_count} sites")
    family, angle, axis = _PULSES[Pulse.M1]
    after = np.abs(rotate_bonds(amps, family, angle, axis)) ** 2
    s_z = (after[:, 1::2].sum(axis=1) - after[:, 0::2].sum(axis=1)) / 2
    x = params.omega_b * cumulative_trapezoid(s_z, t, initial=0.0)
    sites = np.arange(site_count)
    centroid = l0 - (pops[:, 0::2] + pops[:, 1::2]) @ sites
    return MDTrace(params, t, s_z, x, centroid, site_count)


def _ix_sites(params: RMParameters, t: float, site_count: Optional[int]) -> int:
    return site_count if site_count is not None else required_sites(params.omega_a, params.omega_b, t)


def run_one_step_protocol(params: RMParameters, t: float, site_count: Optional[int] = None) -> float:
    """Evolve |l0,g> under the tilted RM model for ``t``, apply m2, read S_z = I_x."""
    n = _ix_sites(params, t, site_count)
    psi = evolve_const(build_rm_hamiltonian(params, n), localized_state(n, n // 2), t)
    check_edges(psi, "one-step protocol")
    return measure(apply_pulse(Pulse.M2, psi)).S_z


def run_alternative_ssh(params: RMParameters, t: float, site_count: Optional[int] = None,
                        adiabatic: bool = False) -> float:
    """Prepare (|l0,g> + |l0-1,e>)/sqrt2, evolve for ``t``, return -S_z."""
    n = _ix_sites(params, t, site_count)
    psi0 = prepare_bond_superposition(n, n // 2, adiabatic=adiabatic, omega=max(params.omega_b, 1e-12))
    psi = evolve_const(build_rm_hamiltonian(params, n), psi0, t)
    check_edges(psi, "alternative SSH protocol")
    return -measure(psi).S_z


# ---------------------------------------------------------------- SSH clock

@dataclass(frozen=True)
class SSHClockSpec:
    omega_a: float
    omega_b: float
    hold_time: Optional[float] = None
    operating_point: float = 0.0
    site_count: Optional[int] = None

    def __post_init__(self):
        if not self.omega_b > self.omega_a:
            raise ValueError("SSH clock operates in the non-trivial phase (omega_b > omega_a)")

    @property
    def t_hold(self) -> float:
        return math.pi / self.omega_b if self.hold_time is None else self.hold_time

    def params(self, delta: float = 0.0, delta_t: float = 0.0) -> RMParameters:
        return RMParameters(self.omega_a, self.omega_b, delta, delta_t)


def run_ssh_clock(spec: SSHClockSpec, delta: float = 0.0, delta_t: float = 0.0,
                  realization: NoiseRealization = NOISELESS) -> float:
    """One-step I_x signal at the hold time with a noise realization applied."""
    params = apply_noise(spec.params(spec.operating_point + delta, delta_t), realization)
    sites = spec.site_count or required_sites(spec.omega_a * 1.2, spec.omega_b * 1.2, spec.t_hold)
    return run_one_step_protocol(params, spec.t_hold, sites)


SignalSource = Callable[[float, float], float]


def _bracketed_root(f: Callable[[float], float], lo: float, hi: float, what: str) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise NoRootError(f"no sign change of the symmetrized {what} signal on [{lo:g}, {hi:g}]")
    return optimize.brentq(f, lo, hi, xtol=1e-14 * max(abs(lo), abs(hi), 1.0), rtol=1e-15)


def solve_resonance(signals: tuple[SignalSource, SignalSource], probe: tuple[float, float],
                    bracket: tuple[float, float]) -> tuple[float, float]:
    """Find offsets (d*, dt*) where each signal is balanced under probe inversion.

    Signal ``i`` is balanced when s_i(d* + p, dt* + q) + s_i(d* - p, dt* - q) = 0
    for probe ``(p, q)``. Two signals with different delta/delta_t mixing are
    needed to separate the offsets; the root is found by nested bracketing.
    """
    p, q = probe
    s1, s2 = signals

    def g(s, u, v):
        return s(u + p, v + q) + s(u - p, v - q)

    def inner(v):
        return _bracketed_root(lambda u: g(s1, u, v), -bracket[0], bracket[0], "first")

    v_star = _bracketed_root(lambda v: g(s2, inner(v), v), -bracket[1], bracket[1], "second")
    return inner(v_star), v_star


def solve_resonance_1d(signal: Callable[[float], float], probe: float, bracket: float) -> float:
    """Offset d* with s(d* + probe) + s(d* - probe) = 0 (for odd signals) or
    s(d* + probe) - s(d* - probe) = 0 when ``probe`` sits on opposite flanks of
    an even lineshape; the caller passes the appropriate combination."""
    return _bracketed_root(lambda u: signal(u + probe) + signal(u - probe), -bracket, bracket, "1-D")


def rabi_resonance(spec: RabiSpec, offset: float, realization: NoiseRealization = NOISELESS,
                   operating_point: Optional[float] = None) -> float:
    """Infer the line center with the two-flank (FWHM) method.

    The true resonance sits at ``offset``; returns the detuning where both
    flank signals agree.
    """
    dc = rabi_operating_point(spec) if operating_point is None else operating_point
    line = lambda d: rabi_lineshape(spec, d - offset, realization)
    return _bracketed_root(lambda u: line(u + dc) - line(u - dc), -0.5 * dc, 0.5 * dc, "Rabi flank")


def ssh_signal_pair(spec: SSHClockSpec, realization: NoiseRealization = NOISELESS,
                    hold_times: Optional[tuple[float, float]] = None,
                    offset: tuple[float, float] = (0.0, 0.0)) -> tuple[SignalSource, SignalSource]:
    """Two one-step signals with different hold times for the 2-D resonance solve."""
    t1, t2 = hold_times or (spec.t_hold, 3 * spec.t_hold)

    def make(t):
        s = replace(spec, hold_time=t)
        return lambda d, dt: run_ssh_clock(s, d - offset[0], dt - offset[1], realization)

    return make(t1), make(t2)


# ---------------------------------------------------------------- excess noise

def rabi_sigma2(spec: RabiSpec, sigma_a: float, N, operating_point: Optional[float] = None):
    """sigma_s^2 of the Rabi signal at its operating point (beta = Omega_R)."""
    from .noise import statistical_noise_sigma2

    dc = rabi_operating_point(spec) if operating_point is None else operating_point

    def signal(omega):
        h = build_rm_hamiltonian(RMParameters(omega, 0.0, dc), 2)
        return measure(evolve_const(h, localized_state(2, 0), spec.t_pi)).S_z

    return statistical_noise_sigma2(signal, {"omega": spec.omega_r},
                                    {"omega": sigma_a * spec.omega_r}, N)


def ssh_sigma2(spec: SSHClockSpec, sigma_a: float, sigma_t: float, N):
    """sigma_s^2 of the one-step I_x signal at the operating point.

    Parameters are Omega_A, Omega_B and the residual tilt. At delta = 0 the
    amplitude derivatives vanish, so the tilt term carries the excess noise.
    """
    from .noise import statistical_noise_sigma2

    sites = spec.site_count or required_sites(spec.omega_a * 1.2, spec.omega_b * 1.2, spec.t_hold)

    def signal(omega_a, omega_b, delta_t):
        p = RMParameters(omega_a, omega_b, spec.operating_point, delta_t)
        return run_one_step_protocol(p, spec.t_hold, sites)

    nominal = {"omega_a": spec.omega_a, "omega_b": spec.omega_b, "delta_t": 0.0}
    sigmas = {"omega_a": sigma_a * spec.omega_a, "omega_b": sigma_a * spec.omega_b,
              "delta_t": sigma_t * spec.omega_b}
    return statistical_noise_sigma2(signal, nominal, sigmas, N)


def ssh_slope(spec: SSHClockSpec) -> float:
    """d I_x / d delta at the operating point (central difference)."""
    from .noise import central_derivative

    return central_derivative(lambda d: run_ssh_clock(spec, d - spec.operating_point), spec.operating_point,
                              rel_step=1e-3 * spec.omega_b if spec.operating_point == 0 else 1e-4)
