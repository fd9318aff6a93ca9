"""Command-line entry point: ``topoclock <experiment> [--config FILE] [flags]``.

Configs are flat JSON objects with dotted keys ``<experiment>.<field>``.
Frequencies are given in Hz (keys ending in ``_hz``) and converted to rad/s
once, here. Every run writes a ``manifest.json`` listing its outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__

log = logging.getLogger("topoclock")

TWO_PI = 2 * math.pi
WORKERS_ENV = "TOPOCLOCK_WORKERS"
KINDS = ("winding", "md-scan", "ix-scan", "clock", "mwi", "sensitivity", "validate")

# defaults per experiment; keys ending in _hz are frequencies in Hz
DEFAULTS: dict[str, dict[str, Any]] = {
    "winding": {"r": [0.3, 0.5, 2.0, 3.0], "omega_b_hz": 10.0, "k_points": 4096},
    "md-scan": {"r": [0.3, 1.0, 3.0], "omega_b_hz": 10.0, "site_count": 256,
                "max_phase": 40 * math.pi, "plateau_from": 20 * math.pi, "guard": True},
    "ix-scan": {"r": [0.3, 3.0], "omega_b_hz": 10.0, "hold_phase": math.pi,
                "delta_over_omega_b": [round(x, 10) for x in np.linspace(-0.1, 0.1, 11)],
                "delta_t_over_omega_b": 0.0},
    "clock": {"omega_a_hz": 5.0, "omega_b_hz": 10.0, "rabi_omega_hz": 10.0, "sigma_a": 0.01,
              "sigma_phi": 0.005, "sigma_t": 0.001, "per_tone": False},
    "mwi": {"protocols": ["P0", "P1", "P2", "TPP5", "TPP12"], "sigma_a": 0.02, "ac_stark": True,
            "pump_amplitude_hz": 150.0, "delta_t": []},
    "sensitivity": {"omega_a_hz": 5.0, "omega_b_hz": 10.0, "rabi_omega_hz": 10.0,
                    "sigma_a": 0.01, "sigma_t": 0.001, "N": [10, 100, 1000],
                    "interferometers": ["P0", "P1", "P2", "TPP5", "TPP12"],
                    "mwi_sigma_a": 0.02, "interrogation_time": 1.0},
    "validate": {},
}
DEFAULT_REALIZATIONS = {"clock": 1000, "mwi": 50}
RUN_KEYS = ("seed", "out", "workers", "realizations")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    kind: str
    params: dict[str, Any]
    out: Path
    seed: int = 0
    realizations: int = 0
    workers: int = 1

    def rad(self, key: str) -> float:
        """A ``*_hz`` parameter in rad/s."""
        return TWO_PI * float(self.params[key])

    def echo(self) -> dict:
        params = {f"{self.kind}.{k}": v for k, v in sorted(self.params.items())}
        params.update({f"{self.kind}.{k[:-3]}_rad_s": TWO_PI * v
                       for k, v in self.params.items() if k.endswith("_hz")})
        return {"kind": self.kind, "params": params, "out": str(self.out), "seed": self.seed,
                "realizations": self.realizations, "workers": self.workers}


def _check_value(path: str, value, default) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if isinstance(default, (int, float)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite, got {value!r}")
        if path.endswith("_hz") and value <= 0:
            raise ConfigError(f"{path}: frequency must be > 0, got {value!r}")
        if path.split(".")[-1].startswith(("sigma", "site_count", "k_points")) and value < 0:
            raise ConfigError(f"{path}: must be >= 0, got {value!r}")
        return type(default)(value) if isinstance(default, int) and float(value).is_integer() else value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        numeric = bool(default) and all(isinstance(d, (int, float)) for d in default)
        for i, v in enumerate(value):
            if numeric and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise ConfigError(f"{path}[{i}]: expected a number, got {v!r}")
            if isinstance(v, (int, float)) and not isinstance(v, bool) and not math.isfinite(v):
                raise ConfigError(f"{path}[{i}]: must be finite, got {v!r}")
            if path.endswith((".r", ".N")) and isinstance(v, (int, float)) and v <= 0:
                raise ConfigError(f"{path}[{i}]: must be > 0, got {v!r}")
        return value
    return value


def _parse_flag_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config(kind: str, config_path: str | None = None, overrides: dict | None = None,
                 sets: list[str] | None = None) -> RunConfig:
    """Merge defaults, the JSON file and command-line flags (flags win)."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment {kind!r}; choose from {', '.join(KINDS)}")
    raw: dict[str, Any] = {}
    if config_path:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file {config_path} does not exist")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{config_path}: top level must be an object")
    for item in sets or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item!r}: expected KEY=VALUE")
        raw[key.strip().replace("-", "_") if "." not in key else key.strip()] = _parse_flag_value(value)
    defaults = DEFAULTS[kind]
    params = dict(defaults)
    run: dict[str, Any] = {}
    for key, value in raw.items():
        if key in RUN_KEYS:
            run[key] = value
            continue
        prefix, dot, name = key.partition(".")
        if not dot:
            raise ConfigError(f"{key}: unknown key (expected '<experiment>.<field>' or one of {RUN_KEYS})")
        if prefix not in DEFAULTS:
            raise ConfigError(f"{key}: unknown experiment {prefix!r}")
        name = name.replace("-", "_")
        if prefix != kind:
            if name not in DEFAULTS[prefix]:
                raise ConfigError(f"{key}: unknown key")
            continue  # belongs to another experiment in a shared file
        if name not in defaults:
            raise ConfigError(f"{key}: unknown key")
        params[name] = _check_value(key, value, defaults[name])
    for key, value in (overrides or {}).items():
        if value is not None:
            run[key] = value
    seed = run.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")
    workers = run.get("workers") or int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers < 1:
        raise ConfigError(f"workers: must be >= 1, got {workers}")
    realizations = run.get("realizations", DEFAULT_REALIZATIONS.get(kind, 0))
    if kind in DEFAULT_REALIZATIONS and realizations < 2:
        raise ConfigError(f"realizations: need >= 2, got {realizations}")
    out = Path(run.get("out", f"runs/{kind}"))
    return RunConfig(kind, params, out, seed, int(realizations), int(workers))


# ---------------------------------------------------------------- output helpers

class Outputs:
    """Collects emitted files so the manifest can list all of them."""

    def __init__(self, root: Path, cfg: RunConfig):
        self.root = root
        self.cfg = cfg
        self.files: list[str] = []
        root.mkdir(parents=True, exist_ok=True)

    def _register(self, name: str) -> Path:
        self.files.append(name)
        return self.root / name

    def csv(self, name: str, header: list[str], rows, meta: dict | None = None) -> None:
        buf = io.StringIO()
        buf.write(f"# topoclock {__version__} {self.cfg.kind} seed={self.cfg.seed}\n")
        for k, v in (meta or {}).items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self._register(name).write_text(buf.getvalue(), encoding="utf-8")

    def json(self, name: str, doc) -> None:
        self._register(name).write_text(json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


# ---------------------------------------------------------------- experiments

def run_winding(cfg: RunConfig, out: Outputs) -> None:
    from .analytics import CriticalPointError, band_data, winding_number, zak_phase

    ob = cfg.rad("omega_b_hz")
    nk = int(cfg.params["k_points"])
    rows, bands = [], []
    for r in cfg.params["r"]:
        oa = ob / r
        try:
            w, raw = winding_number(oa, ob, nk)
            zak = zak_phase(oa, ob, nk)
        except CriticalPointError:
            w, raw, zak = None, float("nan"), float("nan")
        rows.append([r, oa / TWO_PI, ob / TWO_PI, w, raw, zak])
        bd = band_data(oa, ob, nk)
        bands.extend([r, *vals] for vals in zip(bd.k, bd.energy, bd.phase, bd.berry_connection))
    out.csv("winding.csv", ["r", "omega_a_hz", "omega_b_hz", "W", "W_raw", "zak_phase"], rows,
            {"omega_b_rad_s": ob})
    out.csv("bands.csv", ["r", "k", "E_k", "phi_k", "A_k"], bands)


def run_md_scan(cfg: RunConfig, out: Outputs) -> None:
    from .analytics import analytic_mean_displacement
    from .model import RMParameters
    from .spectroscopy import md_time_grid, run_md_protocol

    ob = cfg.rad("omega_b_hz")
    p = cfg.params
    times = md_time_grid(ob, p["max_phase"] / ob)
    rows, plateaus = [], {}
    for r in p["r"]:
        tr = run_md_protocol(RMParameters(ob / r, ob), times, int(p["site_count"]), guard=p["guard"])
        analytic = analytic_mean_displacement(ob / r, ob, times)
        rows.extend([r, t, x, iy, a] for t, x, iy, a in zip(times, tr.x_over_aL, tr.I_y, analytic))
        plateaus[str(r)] = tr.plateau(p["plateau_from"], p["max_phase"])
    out.csv("md_scan.csv", ["r", "T", "x_over_aL", "I_y", "x_over_aL_analytic"], rows,
            {"omega_b_hz": p["omega_b_hz"], "omega_b_rad_s": ob, "site_count": p["site_count"]})
    out.json("md_plateaus.json", {"plateau": plateaus, "window_omega_b_T": [p["plateau_from"], p["max_phase"]]})


def run_ix_scan(cfg: RunConfig, out: Outputs) -> None:
    from .analytics import delta_response
    from .model import RMParameters
    from .spectroscopy import run_one_step_protocol

    ob = cfg.rad("omega_b_hz")
    p = cfg.params
    t = p["hold_phase"] / ob
    rows, slopes = [], {}
    for r in p["r"]:
        xs, ys = [], []
        for d in p["delta_over_omega_b"]:
            ix = run_one_step_protocol(RMParameters(ob / r, ob, d * ob, p["delta_t_over_omega_b"] * ob), t)
            xs.append(d)
            ys.append(ix)
            rows.append([r, d, d * ob / TWO_PI, ix])
        fit = np.polyfit(xs, ys, 1)
        pred = np.polyval(fit, xs)
        ss = float(np.sum((np.array(ys) - np.mean(ys)) ** 2))
        r2 = 1 - float(np.sum((np.array(ys) - pred) ** 2)) / ss if ss > 0 else float("nan")
        slopes[str(r)] = {"slope": fit[0], "intercept": fit[1], "r_squared": r2,
                          "analytic_slope": delta_response(ob / r, ob, t)}
    out.csv("ix_scan.csv", ["r", "delta_over_omega_b", "delta_hz", "I_x"], rows,
            {"omega_b_hz": p["omega_b_hz"], "omega_b_rad_s": ob, "hold_phase": p["hold_phase"]})
    out.json("ix_slopes.json", slopes)


def run_clock(cfg: RunConfig, out: Outputs) -> None:
    from .noise import NoiseSpec, ensemble_run
    from .spectroscopy import (RabiSpec, SSHClockSpec, rabi_lineshape, rabi_operating_point,
                               run_ssh_clock)

    p = cfg.params
    noise = NoiseSpec(p["sigma_a"], p["sigma_phi"], p["sigma_t"], p["per_tone"], cfg.seed)
    ssh = SSHClockSpec(cfg.rad("omega_a_hz"), cfg.rad("omega_b_hz"))
    rabi = RabiSpec(cfg.rad("rabi_omega_hz"))
    dop = rabi_operating_point(rabi)
    n = cfg.realizations
    es = ensemble_run(partial(run_ssh_clock, ssh, 0.0, 0.0), noise, n, cfg.workers)
    er = ensemble_run(partial(rabi_lineshape, rabi, dop), noise, n, cfg.workers)
    for name, ens in (("ssh", es), ("rabi", er)):
        out.csv(f"clock_{name}.csv", ["index", "signal"], [[r["index"], r["value"]] for r in ens.records])
    out.json("clock_summary.json", {
        "ssh": {**es.summary("value"), "failures": len(es.failures), "hold_time_s": ssh.t_hold},
        "rabi": {**er.summary("value"), "failures": len(er.failures),
                 "operating_point_rad_s": dop, "operating_point_hz": dop / TWO_PI},
        "noise": {"sigma_a": noise.sigma_a, "sigma_phi": noise.sigma_phi, "sigma_t": noise.sigma_t,
                  "per_tone": noise.per_tone, "seed": noise.seed},
        "realizations": n,
    })


def _mwi_spec(name: str, pump_amplitude: float):
    from .interferometer import MPP_PRESETS, PumpCycle, TPPSpec

    if name in MPP_PRESETS:
        return MPP_PRESETS[name]
    taus = {"TPP5": (1 / 5, 10), "TPP12": (1 / 12, 24)}
    if name not in taus:
        raise ConfigError(f"mwi.protocols: unknown protocol {name!r} (P0, P1, P2, TPP5, TPP12)")
    tau, n = taus[name]
    return TPPSpec(tau, n, PumpCycle(tau, pump_amplitude, pump_amplitude), name=name)


def run_mwi(cfg: RunConfig, out: Outputs) -> None:
    from .interferometer import (extract_phase, ideal_phase, protocol_runner,
                                 recovery_fidelity_experiment, run_mpp, run_tpp, spec_summary,
                                 MPPSpec)
    from .noise import NoiseSpec

    p = cfg.params
    noise = NoiseSpec(sigma_a=p["sigma_a"], seed=cfg.seed)
    amp = cfg.rad("pump_amplitude_hz")
    summary = {}
    for name in p["protocols"]:
        spec = _mwi_spec(name, amp)
        ideal = run_mpp(spec) if isinstance(spec, MPPSpec) else run_tpp(spec)
        out.csv(f"mwi_{name}_trace.csv", ["cycle", "d_eg", "n_e", "n_g", "F"],
                [[i + 1, d, ne, ng, f] for i, (d, (ne, ng), f) in
                 enumerate(zip(ideal.separation, ideal.populations, ideal.overlaps))])
        ens = recovery_fidelity_experiment(spec, noise, cfg.realizations, ac_stark=p["ac_stark"],
                                           workers=cfg.workers)
        out.csv(f"mwi_{name}_realizations.csv", ["index", "separation_ratio", "F", "S_y"],
                [[i, s, f, y] for i, (s, f, y) in
                 enumerate(zip(ens.separation_ratio, ens.recovery, ens.signal))])
        runner = protocol_runner(spec)
        ref = runner(0.0)
        phases = [[d, extract_phase(runner, d, expected_rate=ideal_phase(spec, 1.0), reference=ref),
                   ideal_phase(spec, d)] for d in p["delta_t"]]
        if phases:
            out.csv(f"mwi_{name}_phase.csv", ["delta_t", "phase_extracted", "phase_ideal"], phases)
        summary[name] = {"spec": spec_summary(spec), "noise_free_F": ideal.recovery,
                         "noise_free_separation_ratio": ideal.separation_ratio,
                         "ensemble": ens.summary(), "seed": cfg.seed}
        out.json(f"mwi_{name}.json", summary[name])


def run_sensitivity(cfg: RunConfig, out: Outputs) -> None:
    from .interferometer import interferometer_sigma2
    from .noise import central_derivative, clock_sensitivity
    from .spectroscopy import (RabiSpec, SSHClockSpec, rabi_lineshape, rabi_operating_point,
                               rabi_sigma2, ssh_sigma2, ssh_slope)

    p = cfg.params
    N = np.asarray(p["N"], float)
    ssh = SSHClockSpec(cfg.rad("omega_a_hz"), cfg.rad("omega_b_hz"))
    rabi = RabiSpec(cfg.rad("rabi_omega_hz"))
    rows = []
    s_ssh = np.atleast_1d(ssh_sigma2(ssh, p["sigma_a"], p["sigma_t"], N))
    s_rabi = np.atleast_1d(rabi_sigma2(rabi, p["sigma_a"], N))
    slope = ssh_slope(ssh)
    dop = rabi_operating_point(rabi)
    rabi_slope = central_derivative(partial(rabi_lineshape, rabi), dop)
    t_l = p["interrogation_time"]
    for n, a, b in zip(N, s_ssh, s_rabi):
        rows.append(["ssh", int(n), a, clock_sensitivity(slope, a, n, t_l)])
        rows.append(["rabi", int(n), b, clock_sensitivity(rabi_slope, b, n, t_l)])
    for name in p["interferometers"]:
        spec = _mwi_spec(name, TWO_PI * DEFAULTS["mwi"]["pump_amplitude_hz"])
        vals = np.atleast_1d(interferometer_sigma2(spec, p["mwi_sigma_a"], N))
        rows.extend([name, int(n), v, ""] for n, v in zip(N, vals))
    out.csv("sensitivity.csv", ["protocol", "N", "sigma_s2", "delta2_delta"], rows,
            {"ssh_slope": slope, "rabi_slope": rabi_slope, "interrogation_time_s": t_l})


def run_validate(cfg: RunConfig, out: Outputs) -> int:
    from .validation import run_checks

    results = run_checks()
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}")
    out.json("validate.json", [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results])
    return 0 if all(r.passed for r in results) else 1


RUNNERS: dict[str, Callable[[RunConfig, Outputs], Any]] = {
    "winding": run_winding, "md-scan": run_md_scan, "ix-scan": run_ix_scan, "clock": run_clock,
    "mwi": run_mwi, "sensitivity": run_sensitivity, "validate": run_validate,
}


def run(cfg: RunConfig) -> int:
    out = Outputs(cfg.out, cfg)
    start = time.perf_counter()
    try:
        status = RUNNERS[cfg.kind](cfg, out) or 0
    except ConfigError:
        raise
    except Exception as exc:
        print(f"error in {cfg.kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = 2
    manifest = {
        "config": cfg.echo(),
        "seed": cfg.seed,
        "tool": "topoclock",
        "version": __version__,
        "wall_time_s": round(time.perf_counter() - start, 3),
        "status": status,
        "files": {name: hashlib.sha256((cfg.out / name).read_bytes()).hexdigest() for name in out.files},
    }
    (cfg.out / "manifest.json").write_text(json.dumps(_plain(manifest), indent=2, sort_keys=True) + "\n",
                                            encoding="utf-8")
    return int(status)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topoclock", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"topoclock {__version__}")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", help="JSON file with dotted keys")
        sp.add_argument("--seed", type=int, help="master seed (overrides the file)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
        sp.add_argument("--realizations", type=int, help="noise realizations")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key, e.g. --set md-scan.site-count=128")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.kind, args.config,
                           {"seed": args.seed, "out": args.out, "workers": args.workers,
                            "realizations": args.realizations}, args.set)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
