"""Matter-wave interferometers that split g and e across the lattice.

Two protocols share the same skeleton: a carrier pi/2 pulse makes
(|l,g> + |l,e>)/sqrt2, a separation stage moves e up and g down by N_p sites
each, the tilt imprints a phase proportional to the separation, the exact
reverse of the separation stage brings the arms back, and a final carrier
pi/2 converts S_y into population.

* MPP: N_p composite pulses (sideband pi then carrier pi) and a dark time.
* TPP: N_p adiabatic Rice-Mele pump cycles.

Reversal flips the sign of every controllable term (drive couplings via a pi
drive phase, laser detunings). The tilt and, when enabled, the AC Stark
residuals keep their sign; they are what makes the recovery imperfect.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .evolve import (Pulse, Schedule, _PULSES, apply_pulse, check_edges, evolve_schedule,
                     pulse_hamiltonian, rotate_bonds, step_amplitudes)
from .model import LatticeParams, RMParameters, build_rm_hamiltonian, stark_detunings
from .noise import NOISELESS, NoiseRealization, NoiseSpec, ensemble_run, median_and_interval
from .state import QuantumState, carrier_coherence, fidelity, localized_state, measure

#: free sites kept on each side of the maximal separation
GUARD_SITES = 50
ADIABATIC_WARN = 0.05


class AdiabaticityWarning(UserWarning):
    pass


# ---------------------------------------------------------------- specs

@dataclass(frozen=True)
class MPPSpec:
    """Many-pulse protocol; ``omega`` drives both the carrier and the sideband."""

    omega: float
    n_pulses: int
    dark_time: float
    name: str = "MPP"

    def __post_init__(self):
        if not self.omega > 0 or self.n_pulses < 1 or self.dark_time < 0:
            raise ValueError("MPPSpec needs omega > 0, n_pulses >= 1, dark_time >= 0")

    @property
    def t_d(self) -> float:
        return self.n_pulses * (math.pi / self.omega + math.pi / self.omega)

    @property
    def t_f(self) -> float:
        return 2 * self.t_d + self.dark_time


P0 = MPPSpec(2 * math.pi * 24, 24, 2.0, "P0")
P1 = MPPSpec(2 * math.pi * 40, 15, 3.25, "P1")
P2 = MPPSpec(2 * math.pi * 40, 65, 0.75, "P2")
MPP_PRESETS = {"P0": P0, "P1": P1, "P2": P2}


def _smooth(v):
    """0 -> 1 with vanishing slope at both ends."""
    return v - np.sin(2 * np.pi * v) / (2 * np.pi)


@dataclass(frozen=True)
class PumpCycle:
    """One closed loop in the (delta, Omega_A - Omega_B) plane.

    The loop is the circle delta = delta_m cos(theta),
    Omega_A - Omega_B = offset - m sin(theta), with the positive part of the
    difference driving the carrier and the negative part the sideband. The
    cycle dwells at theta = 0 (no coupling), sweeps the sideband half
    theta in [0, pi] over ``transfer_fraction`` of the period and the carrier
    half over the rest. Dwell and carrier half have equal length, which centres
    the inter-site transfer in the cycle.
    """

    tau: float
    m: float = 2 * math.pi * 150
    delta_m: float = 2 * math.pi * 150
    offset: float = 0.0
    transfer_fraction: float = 0.5
    reversed: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("cycle time must be > 0")
        if not 0 < self.transfer_fraction < 1:
            raise ValueError("transfer_fraction must lie in (0, 1)")
        if self.m <= 0 or self.delta_m <= 0:
            raise ValueError("loop amplitudes must be > 0")

    @property
    def encloses_origin(self) -> bool:
        return abs(self.offset) < self.m

    @property
    def minimum_gap(self) -> float:
        """Smallest band gap 2E along the loop (numerical)."""
        th = np.linspace(0, 2 * np.pi, 4001)
        return float(np.min(np.hypot(self.delta_m * np.cos(th), self.offset - self.m * np.sin(th))))

    def theta(self, t: float) -> float:
        u = (t / self.tau) % 1.0
        if self.reversed:
            return self._theta(1.0 - u)
        return self._theta(u)

    def _theta(self, u: float) -> float:
        a = self.transfer_fraction
        b = (1 - a) / 2
        if u < b:
            return 0.0
        if u < b + a:
            return np.pi * _smooth((u - b) / a)
        return np.pi + np.pi * _smooth((u - b - a) / b)

    def point(self, t: float) -> tuple[float, float]:
        """(delta, Omega_A - Omega_B) at time ``t``."""
        th = self.theta(t)
        return self.delta_m * np.cos(th), self.offset - self.m * np.sin(th)

    def parameters(self, t: float, delta_t: float = 0.0) -> RMParameters:
        delta, diff = self.point(t)
        return RMParameters(max(diff, 0.0), max(-diff, 0.0), delta, delta_t)


@dataclass(frozen=True)
class TPPSpec:
    """Thouless-pumping protocol: N_p forward cycles then N_p reversed ones."""

    tau: float
    n_pulses: int
    cycle: Optional[PumpCycle] = None
    steps_per_cycle: int = 400
    name: str = "TPP"

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if self.cycle is None:
            object.__setattr__(self, "cycle", PumpCycle(self.tau))
        elif self.cycle.tau != self.tau:
            raise ValueError("cycle period differs from tau")

    @property
    def t_f(self) -> float:
        return 2 * self.n_pulses * self.tau


def ideal_phase_mpp(spec: MPPSpec, delta_t: float) -> float:
    return 2 * delta_t * (spec.t_f - 2 * spec.t_d) * spec.n_pulses


def ideal_phase_tpp(spec: TPPSpec, delta_t: float) -> float:
    return delta_t * spec.t_f ** 2 / (2 * spec.tau)


def tpp_phase_sum(spec: TPPSpec, delta_t: float) -> float:
    """4 delta_t sum_{n=0}^{N_p} n tau, which exceeds the closed form by (N_p+1)/N_p."""
    n = np.arange(spec.n_pulses + 1)
    return float(4 * delta_t * np.sum(n * spec.tau))


# ---------------------------------------------------------------- imperfections

@dataclass(frozen=True)
class Imperfections:
    """Static errors of one shot.

    With ``ac_stark`` the off-resonant light shifts of both tones act as an
    extra carrier detuning while a drive is on. The laser is assumed tuned to
    the light-shifted line at nominal intensity, so only the part caused by
    amplitude noise survives unless ``stark_compensated`` is False.
    """

    realization: NoiseRealization = NOISELESS
    ac_stark: bool = False
    stark_compensated: bool = True
    lattice: LatticeParams = field(default_factory=lambda: LatticeParams(site_count=2))

    def stark_delta(self, omega_a: float, omega_b: float) -> float:
        """Detuning (rad/s, on the delta scale) from the AC Stark shift."""
        if not self.ac_stark:
            return 0.0
        r = self.realization
        ca, cb = stark_detunings(omega_a * r.amp_a, omega_b * r.amp_b, self.lattice)
        if self.stark_compensated:
            na, nb = stark_detunings(omega_a, omega_b, self.lattice)
            ca, cb = ca - na, cb - nb
        # a coefficient c of sum(n_g - n_e) equals delta = 2c
        return 2 * (ca + cb)


PERFECT = Imperfections()


@dataclass
class InterferometerResult:
    protocol: str
    delta_t: float
    signal: float  # S_y before the final pi/2
    final_S_z: float
    coherence: complex
    separation: np.ndarray  # d_eg after each forward step
    populations: np.ndarray  # (n_e, n_g) after each forward step
    overlaps: np.ndarray  # |<psi0|psi>|^2 after each forward step
    recovery: float  # |<psi0|psi(t_f)>|^2 for this run
    n_pulses: int
    final_state: QuantumState = field(repr=False)

    @property
    def separation_ratio(self) -> float:
        """d_eg/(2 N_p a_L) at the end of the forward stage."""
        return float(self.separation[-1] / (2 * self.n_pulses))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["cycle", "d_eg", "n_e", "n_g", "F"])
            for i, (d, (ne, ng), f) in enumerate(zip(self.separation, self.populations,
                                                     self.overlaps), start=1):
                w.writerow([i, repr(float(d)), repr(float(ne)), repr(float(ng)), repr(float(f))])


# ---------------------------------------------------------------- MPP

def _site_count(reach: int, guard: int = GUARD_SITES) -> int:
    return 2 * (reach + guard) + 1


def _record(psi0: QuantumState, psi: QuantumState, seps, pops, ovl):
    o = measure(psi)
    seps.append(o.d_eg)
    pops.append((o.n_e, o.n_g))
    ovl.append(fidelity(psi0, psi))


def _drive_pulse(pulse: Pulse, psi: QuantumState, omega: float, imp: Imperfections, delta_t: float,
                 finite: bool, reverse: bool) -> QuantumState:
    r = imp.realization
    family = _PULSES[pulse][0]
    scale = r.amp_a if family == "carrier" else r.amp_b
    phase = r.eps_phi if family == "carrier" else r.phase_b
    if reverse:
        phase += math.pi
    if not finite:
        return apply_pulse(pulse, psi, amplitude_scale=scale, drive_phase=phase)
    stark = imp.stark_delta(omega, 0.0) if family == "carrier" else imp.stark_delta(0.0, omega)
    return apply_pulse(pulse, psi, omega, finite=True, amplitude_scale=scale, drive_phase=phase,
                       delta=stark, delta_t=delta_t)


def _tilt_evolve(psi: QuantumState, delta_t: float, t: float) -> QuantumState:
    if t == 0 or delta_t == 0:
        return psi
    sites = np.repeat(np.arange(psi.site_count), 2)
    return QuantumState(np.exp(-1j * delta_t * sites * t) * psi.amplitudes)


def _split(psi: QuantumState, imp: Imperfections) -> QuantumState:
    r = imp.realization
    return apply_pulse(Pulse.CARRIER_HALF, psi, amplitude_scale=r.amp_a, drive_phase=r.eps_phi)


def _finish(protocol, delta_t, psi0, psi, seps, pops, ovl, n_pulses, imp) -> InterferometerResult:
    check_edges(psi, protocol)
    o = measure(psi)
    final = measure(_split(psi, imp))
    return InterferometerResult(
        protocol, delta_t, o.S_y, final.S_z, carrier_coherence(psi), np.array(seps, float),
        np.array(pops, float), np.array(ovl, float), fidelity(psi0, psi), n_pulses, psi)


def run_mpp(spec: MPPSpec, delta_t: float = 0.0, imperfections: Imperfections = PERFECT, *,
            finite: bool = True, site_count: Optional[int] = None) -> InterferometerResult:
    """Many-pulse protocol.

    ``finite=False`` uses instantaneous pulses, so the tilt only acts during
    the dark time and the accumulated phase is exactly ``ideal_phase_mpp``.
    """
    # imperfect pulses can push a stray piece one site per composite pulse in
    # both the forward and the reversed stage
    n = site_count or _site_count(2 * spec.n_pulses)
    r = imperfections.realization
    dt_total = delta_t + r.tilt(spec.omega)
    psi0 = _split(localized_state(n, n // 2), imperfections)
    psi = psi0
    seps, pops, ovl = [], [], []
    sequence = [Pulse.SIDEBAND_PI, Pulse.CARRIER_PI]
    for _ in range(spec.n_pulses):
        for p in sequence:
            psi = _drive_pulse(p, psi, spec.omega, imperfections, dt_total, finite, False)
        _record(psi0, psi, seps, pops, ovl)
    check_edges(psi, f"{spec.name} separation")
    psi = _tilt_evolve(psi, dt_total, spec.dark_time)
    for _ in range(spec.n_pulses):
        for p in reversed(sequence):
            psi = _drive_pulse(p, psi, spec.omega, imperfections, dt_total, finite, True)
    return _finish(spec.name, delta_t, psi0, psi, seps, pops, ovl, spec.n_pulses, imperfections)


# ---------------------------------------------------------------- TPP

def _pump_source(spec: TPPSpec, n: int, delta_t: float, imp: Imperfections, reverse: bool):
    cyc = spec.cycle
    r = imp.realization
    t_end = spec.n_pulses * spec.tau

    def source(t):
        p = cyc.parameters(t_end - t if reverse else t)
        oa, ob = p.omega_a * r.amp_a, p.omega_b * r.amp_b
        stark = imp.stark_delta(p.omega_a, p.omega_b)
        sign = -1.0 if reverse else 1.0
        params = RMParameters(oa, ob, sign * p.delta + stark, delta_t,
                              phase=r.eps_phi + (math.pi if reverse else 0.0),
                              phase_b=r.phase_b + (math.pi if reverse else 0.0))
        return build_rm_hamiltonian(params, n)

    return source


def run_tpp(spec: TPPSpec, delta_t: float = 0.0, imperfections: Imperfections = PERFECT, *,
            site_count: Optional[int] = None, record: bool = True) -> InterferometerResult:
    """Thouless-pumping protocol.

    The reversed stage is the exact time reverse of the forward pumping with
    the couplings and the loop detuning negated; the tilt is left untouched.
    """
    n = site_count or _site_count(spec.n_pulses)
    r = imperfections.realization
    dt_total = delta_t + r.tilt(spec.cycle.m)
    psi0 = _split(localized_state(n, n // 2), imperfections)
    seps, pops, ovl = [], [], []
    tau = spec.tau
    dt = tau / spec.steps_per_cycle
    boundaries = {round(k * spec.steps_per_cycle) for k in range(1, spec.n_pulses + 1)}
    counter = {"step": 0}

    def observer(t, amps):
        counter["step"] += 1
        if record and counter["step"] in boundaries:
            _record(psi0, QuantumState(amps, check=False), seps, pops, ovl)

    t_end = spec.n_pulses * tau
    forward = Schedule(_pump_source(spec, n, dt_total, imperfections, False), 0.0, t_end, dt)
    psi = evolve_schedule(forward, psi0, observer=observer, context=f"{spec.name} forward pumping")
    if not record:
        _record(psi0, psi, seps, pops, ovl)
    backward = Schedule(_pump_source(spec, n, dt_total, imperfections, True), 0.0, t_end, dt)
    psi = evolve_schedule(backward, psi, context=f"{spec.name} reversed pumping")
    return _finish(spec.name, delta_t, psi0, psi, seps, pops, ovl, spec.n_pulses, imperfections)


def pump_transport(cycle: PumpCycle, cycles: int = 1, site_count: int = 128,
                   steps_per_cycle: int = 400, delta_t: float = 0.0) -> np.ndarray:
    """Displacement of the g and e arms after each cycle, shape ``(cycles, 2)``.

    Starts from |l0,g> and |l0,e> separately; positive means increasing site index.
    """
    out = np.zeros((cycles, 2))
    l0 = site_count // 2
    for col, alpha in enumerate((0, 1)):
        psi = localized_state(site_count, l0, alpha)
        xs = []

        def observer(t, amps, xs=xs):
            k = len(xs) + 1
            if abs(t - k * cycle.tau) < 0.5 * cycle.tau / steps_per_cycle:
                p = np.abs(amps) ** 2
                xs.append(float(np.repeat(np.arange(site_count), 2) @ p) - l0)

        sched = Schedule(lambda t: build_rm_hamiltonian(cycle.parameters(t, delta_t), site_count),
                         0.0, cycles * cycle.tau, cycle.tau / steps_per_cycle)
        evolve_schedule(sched, psi, observer=observer, context="pump transport")
        out[:, col] = xs
    return out


def check_adiabatic(cycle: PumpCycle, steps_per_cycle: int = 400) -> float:
    """Single-cycle transport of the g arm; warns when it misses -1 by > 5%."""
    moved = pump_transport(cycle, 1, 2 * GUARD_SITES, steps_per_cycle)[0, 0]
    if abs(abs(moved) - 1) > ADIABATIC_WARN:
        import warnings
        warnings.warn(f"pump cycle moved {moved:+.3f} sites instead of -1", AdiabaticityWarning)
    return moved


# ---------------------------------------------------------------- phases and ensembles

Runner = Callable[[float], InterferometerResult]


def protocol_runner(spec: MPPSpec | TPPSpec, imperfections: Imperfections = PERFECT,
                    **kwargs) -> Runner:
    if isinstance(spec, MPPSpec):
        return lambda d: run_mpp(spec, d, imperfections, **kwargs)
    return lambda d: run_tpp(spec, d, imperfections, record=False, **kwargs)


def ideal_phase(spec: MPPSpec | TPPSpec, delta_t: float) -> float:
    return ideal_phase_mpp(spec, delta_t) if isinstance(spec, MPPSpec) else ideal_phase_tpp(spec, delta_t)


def extract_phase(runner: Runner, delta_t: float, *, expected_rate: float,
                  reference: Optional[InterferometerResult] = None,
                  max_increment: float = math.pi / 3) -> float:
    """Accumulated phase at ``delta_t`` relative to the delta_t = 0 run.

    arg of the carrier coherence is only known modulo 2 pi, so the tilt is
    ramped from 0 in steps small enough (by ``expected_rate``, the phase per
    unit delta_t) for the phase to be unwrapped.
    """
    ref = reference or runner(0.0)
    if delta_t == 0:
        return 0.0
    steps = max(1, math.ceil(abs(expected_rate * delta_t) / max_increment))
    phases = [0.0]
    for k in range(1, steps + 1):
        res = runner(delta_t * k / steps)
        phases.append(float(np.angle(res.coherence / ref.coherence)))
    return float(np.unwrap(phases)[-1])


def phase_scan(runner: Runner, delta_ts: Sequence[float], expected_rate: float) -> np.ndarray:
    ref = runner(0.0)
    return np.array([extract_phase(runner, d, expected_rate=expected_rate, reference=ref)
                     for d in delta_ts])


@dataclass
class ProtocolEnsemble:
    name: str
    separation_ratio: np.ndarray
    recovery: np.ndarray
    signal: np.ndarray
    separation_trace: np.ndarray

    def summary(self) -> dict:
        out = {}
        for key in ("separation_ratio", "recovery", "signal"):
            med, low, high = median_and_interval(getattr(self, key))
            out[key] = {"median": med, "low": low, "high": high, "width": high - low}
        return out


class _Shot:
    """Picklable per-realization protocol call."""

    def __init__(self, spec, delta_t, ac_stark, lattice, kwargs):
        self.spec, self.delta_t, self.ac_stark, self.lattice, self.kwargs = (
            spec, delta_t, ac_stark, lattice, kwargs)

    def __call__(self, realization: NoiseRealization) -> dict:
        imp = Imperfections(realization, ac_stark=self.ac_stark, lattice=self.lattice)
        if isinstance(self.spec, MPPSpec):
            res = run_mpp(self.spec, self.delta_t, imp, **self.kwargs)
        else:
            res = run_tpp(self.spec, self.delta_t, imp, **self.kwargs)
        rec = {"separation_ratio": res.separation_ratio, "recovery": res.recovery,
               "signal": res.signal}
        rec.update({f"d_eg_{i + 1}": float(v) for i, v in enumerate(res.separation)})
        return rec


def recovery_fidelity_experiment(spec: MPPSpec | TPPSpec, noise: NoiseSpec, n: int, *,
                                 delta_t: float = 0.0, ac_stark: bool = False,
                                 lattice: Optional[LatticeParams] = None, workers: int = 1,
                                 **kwargs) -> ProtocolEnsemble:
    """Per-realization recovery fidelity, separation and signal.

    F is defined at delta_t = 0; with ``delta_t`` nonzero the recovery column is
    the overlap of that run and the separation and signal refer to it as well.
    """
    shot = _Shot(spec, delta_t, ac_stark, lattice or LatticeParams(site_count=2), kwargs)
    ens = ensemble_run(shot, noise, n, workers)
    if ens.failures:
        raise RuntimeError(f"{len(ens.failures)} realizations failed: {ens.failures[0][1]}")
    trace = np.array([[r[f"d_eg_{i + 1}"] for i in range(spec.n_pulses)] for r in ens.records])
    return ProtocolEnsemble(spec.name, ens.values("separation_ratio"), ens.values("recovery"),
                            ens.values("signal"), trace / (2 * np.arange(1, spec.n_pulses + 1)))


def interferometer_signal(spec: MPPSpec | TPPSpec, delta_t: float, amplitude_scale: float = 1.0,
                          **kwargs) -> float:
    """Noise-free S_y with every drive amplitude scaled (for sigma_s^2 derivatives)."""
    imp = Imperfections(NoiseRealization(eps_a=amplitude_scale - 1.0))
    return protocol_runner(spec, imp, **kwargs)(delta_t).signal


def spec_summary(spec: MPPSpec | TPPSpec) -> dict:
    d = asdict(spec)
    if isinstance(spec, MPPSpec):
        d.update(t_d=spec.t_d, t_f=spec.t_f)
    else:
        d.update(t_f=spec.t_f)
    return d


def write_summary(path: str | Path, spec, result: InterferometerResult, phase: float,
                  seed: Optional[int] = None) -> dict:
    doc = {"spec": spec_summary(spec), "delta_t": result.delta_t, "phase_extracted": phase,
           "phase_ideal": ideal_phase(spec, result.delta_t), "F": result.recovery,
           "S_y": result.signal, "seed": seed}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
    return doc


def operating_tilt(spec: MPPSpec | TPPSpec) -> float:
    """delta_t whose ideal phase is pi/2, where S_y is most sensitive."""
    return (math.pi / 2) / ideal_phase(spec, 1.0)


def interferometer_sigma2(spec: MPPSpec | TPPSpec, sigma_a: float, N,
                          delta_t: Optional[float] = None, **kwargs):
    """sigma_s^2 of S_y at ``delta_t`` (default :func:`operating_tilt`).

    beta is the common drive amplitude scale, so sigma_beta = sigma_a.
    """
    from .noise import statistical_noise_sigma2

    d = operating_tilt(spec) if delta_t is None else delta_t
    return statistical_noise_sigma2(lambda scale: interferometer_signal(spec, d, scale, **kwargs),
                                    {"scale": 1.0}, {"scale": sigma_a}, N)
