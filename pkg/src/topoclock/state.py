"""Single-particle wavefunctions and the observables read out by the protocols."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .model import E, G

NORM_TOLERANCE = 1e-9
#: populations below this make d_eg undefined
DEGENERATE_POPULATION = 1e-6


class NormalizationError(ValueError):
    pass


class QuantumState:
    """Amplitudes ``c[l, alpha]`` stored flat with index ``2*l + alpha``."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes, *, check: bool = True):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size % 2 or amps.size < 4:
            raise ValueError("amplitude vector must have even length >= 4")
        if check:
            norm = float(np.vdot(amps, amps).real)
            if abs(norm - 1) > NORM_TOLERANCE:
                raise NormalizationError(f"state norm {norm!r} deviates from 1")
        amps.setflags(write=False)
        self.amplitudes = amps

    @classmethod
    def normalized(cls, amplitudes) -> "QuantumState":
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(amps / np.linalg.norm(amps))

    @property
    def site_count(self) -> int:
        return self.amplitudes.size // 2

    @property
    def g(self) -> np.ndarray:
        return self.amplitudes[0::2]

    @property
    def e(self) -> np.ndarray:
        return self.amplitudes[1::2]

    @property
    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def site_populations(self) -> np.ndarray:
        return np.abs(self.g) ** 2 + np.abs(self.e) ** 2

    def edge_population(self) -> float:
        """Population on the two outermost sites at each end."""
        p = self.site_populations()
        return float(p[:2].sum() + p[-2:].sum())

    def __repr__(self):
        return f"QuantumState(L={self.site_count}, norm={self.norm:.12f})"


def localized_state(site_count: int, l0: int, alpha: int = G) -> QuantumState:
    if not 0 <= l0 < site_count:
        raise IndexError(f"site {l0} outside lattice of {site_count} sites")
    amps = np.zeros(2 * site_count, complex)
    amps[2 * l0 + alpha] = 1.0
    return QuantumState(amps)


def superposition(site_count: int, *terms: tuple[complex, int, int]) -> QuantumState:
    """Normalized sum of ``coef * |l, alpha>`` terms."""
    amps = np.zeros(2 * site_count, complex)
    for coef, l, alpha in terms:
        amps[2 * l + alpha] += coef
    return QuantumState.normalized(amps)


@dataclass(frozen=True)
class ObservableSet:
    S_z: float
    I_x: float
    I_y: float
    S_y: float
    n_e: float
    n_g: float
    x: float
    d_eg: float  # nan when undefined

    @property
    def d_eg_defined(self) -> bool:
        return not math.isnan(self.d_eg)

    CSV_COLUMNS = ("t", "S_z", "I_x", "I_y", "S_y", "n_e", "n_g", "x", "d_eg")

    def csv_row(self, t: float) -> list[float]:
        return [t, *astuple(self)]


def sideband_coherence(state: QuantumState) -> complex:
    """sum_l <a^dag_{l,e} a_{l+1,g}> = I_x + i I_y."""
    return complex(np.sum(np.conj(state.e[:-1]) * state.g[1:]))


def carrier_coherence(state: QuantumState) -> complex:
    """sum_l <a^dag_{l,e} a_{l,g}> = S_x + i S_y."""
    return complex(np.sum(np.conj(state.e) * state.g))


def measure(state: QuantumState) -> ObservableSet:
    g, e = state.g, state.e
    pg, pe = np.abs(g) ** 2, np.abs(e) ** 2
    n_g, n_e = float(pg.sum()), float(pe.sum())
    sites = np.arange(state.site_count)
    side = sideband_coherence(state)
    carr = carrier_coherence(state)
    x_e, x_g = float(sites @ pe), float(sites @ pg)
    if n_e < DEGENERATE_POPULATION or n_g < DEGENERATE_POPULATION:
        d_eg = math.nan
    else:
        d_eg = x_e / n_e - x_g / n_g
    return ObservableSet(
        S_z=(n_e - n_g) / 2,
        I_x=side.real,
        I_y=side.imag,
        S_y=carr.imag,
        n_e=n_e,
        n_g=n_g,
        x=x_e + x_g,
        d_eg=d_eg,
    )


def fidelity(a: QuantumState, b: QuantumState) -> float:
    if a.site_count != b.site_count:
        raise ValueError(f"lattice size mismatch: {a.site_count} vs {b.site_count}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def observable_names() -> tuple[str, ...]:
    return tuple(f.name for f in fields(ObservableSet))
