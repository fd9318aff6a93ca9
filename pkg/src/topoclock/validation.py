"""Fast oracle-equivalence and invariant checks behind ``topoclock validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _winding() -> tuple[bool, str]:
    from .analytics import winding_number_raw

    ob = 2 * math.pi * 10
    errs = [abs(winding_number_raw(ob / r, ob) - (1 if r > 1 else 0)) for r in (0.3, 0.5, 2, 3)]
    return max(errs) < 1e-6, f"max |W_raw - W| = {max(errs):.1e}"


def _dimerized() -> tuple[bool, str]:
    from .analytics import analytic_Iy, analytic_mean_displacement
    from .model import RMParameters
    from .spectroscopy import run_md_protocol

    ob = 2 * math.pi * 10
    t = np.linspace(0, 4 * math.pi / ob, 401)
    tr = run_md_protocol(RMParameters(0.0, ob), t, 16)
    e1 = np.max(np.abs(analytic_Iy(0.0, ob, t) - np.sin(ob * t) / 2))
    e2 = np.max(np.abs(analytic_mean_displacement(0.0, ob, t) - (1 - np.cos(ob * t)) / 2))
    e3 = np.max(np.abs(tr.I_y - np.sin(ob * t) / 2))
    worst = max(e1, e2, e3)
    return worst < 1e-10, f"max deviation {worst:.1e}"


def _identity() -> tuple[bool, str]:
    from .model import RMParameters
    from .spectroscopy import run_alternative_ssh, run_one_step_protocol

    ob = 2 * math.pi * 10
    worst = 0.0
    for d in (-0.1, 0.05):
        for dt in (-0.05, 0.1):
            p = RMParameters(ob / 3, ob, d * ob, dt * ob)
            worst = max(worst, abs(run_alternative_ssh(p, math.pi / ob) - run_one_step_protocol(p, math.pi / ob)))
    return worst < 1e-6, f"max difference {worst:.1e}"


def _pulses() -> tuple[bool, str]:
    from .evolve import Pulse, apply_pulse
    from .state import QuantumState, measure

    rng = np.random.default_rng(3)
    amps = rng.normal(size=24) + 1j * rng.normal(size=24)
    amps[0] = amps[-1] = 0
    psi = QuantumState.normalized(amps)
    o = measure(psi)
    e1 = abs(measure(apply_pulse(Pulse.M1, psi)).S_z - o.I_y)
    e2 = abs(measure(apply_pulse(Pulse.M2, psi)).S_z - o.I_x)
    e3 = abs(measure(apply_pulse(Pulse.CARRIER_HALF, psi)).S_z - o.S_y)
    worst = max(e1, e2, e3)
    return worst < 1e-12, f"max readout error {worst:.1e}"


def _norm() -> tuple[bool, str]:
    from .evolve import rm_schedule, evolve_schedule
    from .model import RMParameters
    from .state import localized_state

    ob = 2 * math.pi * 10
    sched = rm_schedule(lambda t: RMParameters(ob * (1 + 0.3 * math.sin(t)), ob, 0.2 * ob * math.cos(3 * t), 0.01),
                        48, 0.0, 1.0, 1e-4)
    psi = evolve_schedule(sched, localized_state(48, 24), guard=False)
    drift = abs(psi.norm - 1)
    return drift < 1e-9, f"norm drift {drift:.1e} over {sched.steps} steps"


def _reversal() -> tuple[bool, str]:
    from .evolve import rm_schedule, evolve_schedule
    from .model import RMParameters
    from .state import fidelity, localized_state

    ob = 2 * math.pi * 10
    sched = rm_schedule(lambda t: RMParameters(ob * (1 + 0.5 * math.sin(7 * t)), ob, 0.3 * ob, 0.05 * ob),
                        64, 0.0, 0.5, 1e-3)
    psi0 = localized_state(64, 32)
    back = evolve_schedule(sched.reversed(), evolve_schedule(sched, psi0))
    deficit = 1 - fidelity(psi0, back)
    return deficit < 1e-8, f"fidelity deficit {deficit:.1e}"


def _interferometers() -> tuple[bool, str]:
    from .interferometer import P0, TPPSpec, run_mpp, run_tpp

    f1 = run_mpp(P0, finite=False).recovery
    f2 = run_tpp(TPPSpec(1 / 5, 2)).recovery
    worst = max(1 - f1, 1 - f2)
    return worst < 1e-8, f"F(MPP) = {f1:.12f}, F(TPP) = {f2:.12f}"


def _stark() -> tuple[bool, str]:
    from .evolve import validate_stark_shift

    vals = [validate_stark_shift(tone, 0.05, periods=20) for tone in ("carrier", "sideband")]
    ok = all(v.worst_deficit < 1e-3 and v.relative_error < 0.1 for v in vals)
    return ok, "; ".join(f"{v.tone}: deficit {v.worst_deficit:.1e}, shift error {v.relative_error:.1%}"
                         for v in vals)


def _determinism() -> tuple[bool, str]:
    from .noise import NoiseSpec, ensemble_run

    spec = NoiseSpec(0.01, 0.005, 0.001, seed=11)
    f = lambda r: r.eps_a + 2 * r.eps_phi - r.eps_t
    a = ensemble_run(f, spec, 50).values("value")
    b = ensemble_run(f, spec, 50).values("value")
    return bool(np.array_equal(a, b)), "identical draws for equal (seed, index)"


CHECKS: list[tuple[str, Callable[[], tuple[bool, str]]]] = [
    ("winding quantization", _winding),
    ("dimerized closed forms", _dimerized),
    ("bond-state identity", _identity),
    ("measurement pulse contracts", _pulses),
    ("norm conservation", _norm),
    ("schedule reversal", _reversal),
    ("interferometer recovery", _interferometers),
    ("AC Stark effective model", _stark),
    ("seeded determinism", _determinism),
]


def run_checks() -> list[CheckResult]:
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # reported, not raised
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), detail))
    return out
