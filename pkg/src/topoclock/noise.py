"""Static shot-to-shot noise, Monte Carlo ensembles and sensitivity formulas."""

from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

#: central quantile interval reported around the median
COVERAGE = 0.956
LOW_Q, HIGH_Q = (1 - COVERAGE) / 2, 1 - (1 - COVERAGE) / 2


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian widths of the static imperfections.

    ``sigma_phi`` is in units of pi and ``sigma_t`` in units of Omega_B.
    """

    sigma_a: float = 0.0
    sigma_phi: float = 0.0
    sigma_t: float = 0.0
    per_tone: bool = False
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_a", "sigma_phi", "sigma_t"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")

    @property
    def is_zero(self) -> bool:
        return self.sigma_a == self.sigma_phi == self.sigma_t == 0


@dataclass(frozen=True)
class NoiseRealization:
    eps_a: float = 0.0
    eps_phi: float = 0.0
    eps_t: float = 0.0
    eps_a_b: Optional[float] = None
    eps_phi_b: Optional[float] = None
    index: int = -1

    @property
    def amp_a(self) -> float:
        return 1 + self.eps_a

    @property
    def amp_b(self) -> float:
        return 1 + (self.eps_a if self.eps_a_b is None else self.eps_a_b)

    @property
    def phase_b(self) -> float:
        return self.eps_phi if self.eps_phi_b is None else self.eps_phi_b

    def tilt(self, omega_b: float) -> float:
        """Residual-tilt offset in rad/s."""
        return self.eps_t * omega_b


NOISELESS = NoiseRealization()


def sample_realization(spec: NoiseSpec, index: int) -> NoiseRealization:
    """Draw realization ``index``; depends only on ``(spec.seed, index)``."""
    rng = np.random.default_rng([spec.seed, index])
    z = rng.standard_normal(5)
    eps_a = spec.sigma_a * z[0]
    eps_phi = spec.sigma_phi * math.pi * z[1]
    eps_t = spec.sigma_t * z[2]
    if spec.per_tone:
        return NoiseRealization(eps_a, eps_phi, eps_t, spec.sigma_a * z[3],
                                spec.sigma_phi * math.pi * z[4], index)
    return NoiseRealization(eps_a, eps_phi, eps_t, index=index)


def median_and_interval(samples: Sequence[float]) -> tuple[float, float, float]:
    """Median and the central 95.6% interval (linear-interpolated quantiles)."""
    x = np.asarray(samples, float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        raise ValueError("no samples")
    low, med, high = np.quantile(x, [LOW_Q, 0.5, HIGH_Q])
    return float(med), float(low), float(high)


@dataclass
class EnsembleResult:
    """Per-realization records plus robust summaries."""

    records: list[dict]
    failures: list[tuple[int, str]] = field(default_factory=list)
    spec: Optional[NoiseSpec] = None

    @property
    def count(self) -> int:
        return len(self.records)

    def values(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.records], float)

    def summary(self, key: str) -> dict:
        med, low, high = median_and_interval(self.values(key))
        return {"median": med, "low": low, "high": high, "width": high - low}

    @property
    def keys(self) -> list[str]:
        return [k for k in self.records[0] if k != "index"] if self.records else []

    def to_json(self, path: str | Path | None = None) -> dict:
        doc = {
            "realizations": self.count,
            "failures": [{"index": i, "error": msg} for i, msg in self.failures],
            "noise": asdict(self.spec) if self.spec else None,
            "summary": {k: self.summary(k) for k in self.keys if _numeric(self.records, k)},
        }
        if path is not None:
            Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")
        return doc

    def to_csv(self, path: str | Path) -> None:
        keys = ["index", *self.keys]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(keys)
            for r in self.records:
                w.writerow([r.get(k) for k in keys])


def _numeric(records, key) -> bool:
    return all(isinstance(r[key], (int, float)) for r in records)


def _call(protocol, realization):
    try:
        out = protocol(realization)
    except Exception as exc:  # recorded per realization
        return realization.index, None, f"{type(exc).__name__}: {exc}"
    if not isinstance(out, Mapping):
        out = {"value": float(out)}
    return realization.index, dict(out), None


def ensemble_run(protocol: Callable[[NoiseRealization], float | Mapping[str, float]],
                 spec: NoiseSpec, n: int, workers: int = 1) -> EnsembleResult:
    """Run ``protocol`` once per realization index ``0..n-1``.

    With ``workers > 1`` the protocol must be picklable; results are ordered by
    index so the outcome does not depend on scheduling.
    """
    if n < 2:
        raise ValueError("ensemble needs n >= 2")
    draws = [sample_realization(spec, i) for i in range(n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_call, [protocol] * n, draws))
    else:
        results = [_call(protocol, d) for d in draws]
    records, failures = [], []
    for index, rec, err in results:
        if err is not None:
            log.warning("realization %d failed: %s", index, err)
            failures.append((index, err))
        else:
            records.append({"index": index, **rec})
    return EnsembleResult(records, failures, spec)


def central_derivative(f: Callable[[float], float], x0: float, rel_step: float = 1e-4,
                       check_tol: float = 1e-3, floor: float = 1e-8) -> float:
    """Central difference with a halved-step consistency check.

    Derivatives below ``floor`` in magnitude are treated as zero for the check.
    """
    step = rel_step * abs(x0)
    if not step > 1e-12:
        # x0 at or near zero: treat rel_step as absolute
        step = rel_step
    for _ in range(4):
        d1 = (f(x0 + step) - f(x0 - step)) / (2 * step)
        if math.isfinite(d1):
            break
        warnings.warn(f"non-finite derivative at step {step:g}; retrying with a larger step")
        step *= 10
    else:
        raise FloatingPointError("derivative is not finite")
    d2 = (f(x0 + step / 2) - f(x0 - step / 2)) / step
    scale = max(abs(d1), abs(d2))
    if scale > floor and abs(d1 - d2) > check_tol * scale:
        warnings.warn(f"finite-difference check failed: {d1:.6g} vs {d2:.6g}")
    return d2


def statistical_noise_sigma2(signal: Callable[..., float], nominal: Mapping[str, float],
                             sigmas: Mapping[str, float], N) -> np.ndarray | float:
    """sigma_s^2 = sum_beta sigma_beta^2 N(N-1) (d<o>/d beta)^2.

    ``signal(**params)`` is the single-atom noise-free signal; ``sigmas`` gives
    the absolute standard deviation of each parameter named in ``nominal``.
    """
    total = 0.0
    for name, sigma in sigmas.items():
        if sigma == 0:
            continue
        base = dict(nominal)

        def f(v, name=name, base=base):
            base[name] = v
            return signal(**base)

        total += sigma ** 2 * central_derivative(f, nominal[name]) ** 2
    nn = np.asarray(N, float)
    out = total * nn * (nn - 1)
    return float(out) if out.ndim == 0 else out


def clock_sensitivity(signal_slope: float, sigma2: float, N: float, t_L: float) -> float:
    """Delta^2 delta = (N/4 + sigma_s^2) / (t_L^2 (d<O>/d phi)^2)."""
    if signal_slope == 0:
        raise ZeroDivisionError("signal slope d<O>/d phi is zero")
    return (N / 4 + sigma2) / (t_L ** 2 * signal_slope ** 2)


def run_parallel(fn: Callable, items: Sequence, workers: int = 1) -> list:
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]
