"""Momentum-space band theory and closed-form predictions for the SSH chain.

Per quasimomentum k the model is a two-level problem with coupling
h_k = (Omega_A + Omega_B e^{ik})/2, so E_k = |h_k| and phi_k = arg h_k.
Starting from a site-localized g atom every k is populated equally, which makes
the observables Brillouin-zone averages of closed-form two-level expressions.

Prefactors here are the ones that reproduce the dimerized limits and the
brute-force chain evolution (see tests/test_analytics.py); in particular
I_y carries 1/(4 E_k) rather than 1/E_k^2, and the carrier-detuning response
of I_x is x(t)/Omega_B, i.e. (delta/Omega_B)(W/2) on average.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_K_POINTS = 4096
CRITICAL_TOLERANCE = 1e-9


class CriticalPointError(ValueError):
    """Winding number is undefined at r = 1."""


def k_grid(n: int = DEFAULT_K_POINTS) -> np.ndarray:
    """Uniform grid over (-pi, pi]."""
    return -np.pi + 2 * np.pi * np.arange(1, n + 1) / n


def band_energy(omega_a: float, omega_b: float, k: np.ndarray) -> np.ndarray:
    """Upper-band energy E_k = sqrt(A^2 + B^2 + 2AB cos k)/2."""
    arg = omega_a ** 2 + omega_b ** 2 + 2 * omega_a * omega_b * np.cos(k)
    return 0.5 * np.sqrt(np.maximum(arg, 0.0))


def phase_derivative(omega_a: float, omega_b: float, k: np.ndarray) -> np.ndarray:
    """d phi_k/dk = B (A cos k + B) / (4 E_k^2); 1/2 at a gap closing point."""
    num = omega_b * (omega_a * np.cos(k) + omega_b)
    den = omega_a ** 2 + omega_b ** 2 + 2 * omega_a * omega_b * np.cos(k)
    closed = den <= 1e-300
    return np.where(closed, 0.5, num / np.where(closed, 1.0, den))


@dataclass(frozen=True)
class BandData:
    k: np.ndarray
    energy: np.ndarray
    phase: np.ndarray
    berry_connection: np.ndarray

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "E_k", "phi_k", "A_k"])
            for row in zip(self.k, self.energy, self.phase, self.berry_connection):
                w.writerow([repr(float(v)) for v in row])


def band_data(omega_a: float, omega_b: float, n_k: int = DEFAULT_K_POINTS) -> BandData:
    k = k_grid(n_k)
    phase = np.unwrap(np.angle(omega_a + omega_b * np.exp(1j * k)))
    return BandData(k, band_energy(omega_a, omega_b, k), phase,
                    -0.5 * phase_derivative(omega_a, omega_b, k))


def _check_not_critical(omega_a: float, omega_b: float) -> None:
    if omega_a < 0 or omega_b < 0:
        raise ValueError("couplings must be >= 0")
    if omega_a == 0 and omega_b == 0:
        raise ValueError("at least one coupling must be nonzero")
    if omega_a > 0 and abs(omega_b / omega_a - 1) < CRITICAL_TOLERANCE:
        raise CriticalPointError("r = 1: the gap closes and the winding number is undefined")


def winding_number_raw(omega_a: float, omega_b: float, n_k: int = DEFAULT_K_POINTS) -> float:
    """W = -(1/pi) * integral of the Berry connection over the zone."""
    _check_not_critical(omega_a, omega_b)
    conn = band_data(omega_a, omega_b, n_k).berry_connection
    # periodic trapezoid rule
    return float(-(1 / np.pi) * conn.sum() * (2 * np.pi / n_k))


def winding_number(omega_a: float, omega_b: float, n_k: int = DEFAULT_K_POINTS) -> tuple[int, float]:
    """Rounded winding number and the raw quadrature value."""
    raw = winding_number_raw(omega_a, omega_b, n_k)
    return int(round(raw)), raw


def zak_phase(omega_a: float, omega_b: float, n_k: int = DEFAULT_K_POINTS) -> float:
    return -math.pi * winding_number_raw(omega_a, omega_b, n_k)


def analytic_Iy(omega_a: float, omega_b: float, t, n_k: int = DEFAULT_K_POINTS):
    """Sideband current <I_y>(t) after starting in |l0, g>.

    Zone average of (A cos k + B) sin(2 E_k t) / (4 E_k).
    """
    k = k_grid(n_k)
    e = band_energy(omega_a, omega_b, k)
    weight = omega_a * np.cos(k) + omega_b
    tt = np.asarray(t, float)
    arg = 2 * np.multiply.outer(tt, e)
    # sin(2Et)/(4E) -> t/2 as E -> 0
    kernel = 0.5 * np.multiply.outer(tt, np.ones_like(e)) * np.sinc(arg / np.pi)
    out = (kernel * weight).mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def analytic_mean_displacement(omega_a: float, omega_b: float, T, n_k: int = DEFAULT_K_POINTS):
    """x(T)/a_L = Omega_B * int_0^T I_y dt = <(phi_k'/2)(1 - cos 2 E_k T)>_k.

    The time-independent part is W/2; at r = 1 it is 1/4.
    """
    k = k_grid(n_k)
    e = band_energy(omega_a, omega_b, k)
    dphi = phase_derivative(omega_a, omega_b, k)
    tt = np.asarray(T, float)
    osc = 1 - np.cos(2 * np.multiply.outer(tt, e))
    out = (0.5 * dphi * osc).mean(axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def secular_mean_displacement(omega_a: float, omega_b: float, n_k: int = DEFAULT_K_POINTS) -> float:
    """Long-time average of x(T)/a_L (no critical-point guard)."""
    k = k_grid(n_k)
    return float(0.5 * phase_derivative(omega_a, omega_b, k).mean())


def delta_response(omega_a: float, omega_b: float, t, n_k: int = DEFAULT_K_POINTS):
    """Dimensionless slope Omega_B * dI_x/d delta at delta = delta_t = 0.

    Exactly equals x(t)/a_L, so its secular part is W/2.
    """
    return analytic_mean_displacement(omega_a, omega_b, t, n_k)


def _brute_force_ix(omega_a: float, omega_b: float, delta: float, delta_t: float, t: float,
                    site_count: int | None = None) -> float:
    from .evolve import Pulse, apply_pulse, evolve_const, check_edges
    from .model import RMParameters, build_rm_hamiltonian
    from .state import localized_state, measure

    if site_count is None:
        site_count = required_sites(omega_a, omega_b, t)
    h = build_rm_hamiltonian(RMParameters(omega_a, omega_b, delta, delta_t), site_count)
    psi = evolve_const(h, localized_state(site_count, site_count // 2), t)
    check_edges(psi, "I_x evaluation")
    return measure(apply_pulse(Pulse.M2, psi)).S_z


def required_sites(omega_a: float, omega_b: float, t: float, margin: int = 24) -> int:
    """Chain length that keeps a site-localized packet away from both edges."""
    speed = min(omega_a, omega_b) / 2 if min(omega_a, omega_b) > 0 else 0.0
    half = int(math.ceil(speed * t)) + margin
    return 2 * half + 2


def s_function(omega_a: float, omega_b: float, t: float, *, step: float = 1e-3,
               site_count: int | None = None) -> float:
    """Dimensionless tilt response Omega_B * dI_x/d delta_t at the origin.

    Evaluated as a central finite difference of the chain evolution with
    relative step ``step`` (in units of Omega_B).
    """
    if t == 0:
        return 0.0
    h = step * omega_b
    plus = _brute_force_ix(omega_a, omega_b, 0.0, h, t, site_count)
    minus = _brute_force_ix(omega_a, omega_b, 0.0, -h, t, site_count)
    return (plus - minus) / (2 * h) * omega_b


def linear_response_Ix(omega_a: float, omega_b: float, delta: float, delta_t: float, t: float,
                       n_k: int = DEFAULT_K_POINTS) -> float:
    """First-order <I_x>(t) in the carrier detuning and the residual tilt."""
    if delta == 0 and delta_t == 0:
        return 0.0
    slope_delta = delta_response(omega_a, omega_b, t, n_k)
    slope_tilt = s_function(omega_a, omega_b, t) if delta_t else 0.0
    return (slope_delta * delta + slope_tilt * delta_t) / omega_b
