"""Tilted Rice-Mele / SSH Hamiltonians for a two-tone driven Wannier-Stark clock.

Basis ordering is ``j = 2*l + alpha`` with ``alpha = 0`` for g and ``alpha = 1``
for e, so the carrier bond (l,g)-(l,e) and the sideband bond (l,e)-(l+1,g) are
both nearest neighbours in index space and every Hamiltonian is tridiagonal.

All frequencies are angular (rad/s). Lengths are in units of the lattice
constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Optional

import numpy as np
from scipy import optimize, special

G, E = 0, 1

#: J0/J1 ratio quoted for the shallow 5 E_r lattice.
CALIBRATION_RATIO_5ER = 1.73


class InvalidLatticeError(ValueError):
    pass


def index(l: int, alpha: int) -> int:
    return 2 * l + alpha


@dataclass(frozen=True)
class LatticeParams:
    """Wannier-Stark lattice.

    ``tilt`` is Delta with hbar*Delta = M*g*a_L, ``soc_phase`` is k_c*a_L.
    """

    site_count: int
    tunneling: float = 2 * np.pi * 224.0
    tilt: float = 2 * np.pi * 866.0
    soc_phase: float = 2 * np.pi * 406.7 / 698.4
    overlap: float = 1.0
    lattice_depth: Optional[float] = None

    def __post_init__(self):
        if self.site_count < 2:
            raise InvalidLatticeError(f"site_count must be >= 2, got {self.site_count}")
        if not self.tilt > 0:
            raise InvalidLatticeError(f"tilt must be > 0, got {self.tilt}")
        if self.tunneling < 0:
            raise InvalidLatticeError(f"tunneling must be >= 0, got {self.tunneling}")
        if not 0 <= self.soc_phase < 2 * np.pi:
            raise InvalidLatticeError(f"soc_phase must lie in [0, 2pi), got {self.soc_phase}")
        if not 0 < self.overlap <= 1:
            raise InvalidLatticeError(f"overlap must lie in (0, 1], got {self.overlap}")

    @property
    def dim(self) -> int:
        return 2 * self.site_count

    @property
    def bessel_argument(self) -> float:
        """J~ = 4 J |sin(phi/2)| / Delta."""
        return 4 * self.tunneling * abs(np.sin(self.soc_phase / 2)) / self.tilt

    @property
    def center(self) -> int:
        return self.site_count // 2

    def resized(self, site_count: int) -> "LatticeParams":
        return replace(self, site_count=site_count)


@dataclass(frozen=True)
class RMParameters:
    """Couplings and detunings of the tilted Rice-Mele model.

    ``omega_a``/``omega_b`` are magnitudes; ``phase`` is a drive phase
    multiplying both couplings unless ``phase_b`` sets the sideband separately.
    """

    omega_a: float
    omega_b: float
    delta: float = 0.0
    delta_t: float = 0.0
    phase: float = 0.0
    phase_b: Optional[float] = None

    def __post_init__(self):
        if self.omega_a < 0 or self.omega_b < 0:
            raise ValueError("coupling magnitudes must be >= 0")

    @property
    def ratio(self) -> float:
        if self.omega_a == 0:
            raise ZeroDivisionError("r = omega_b/omega_a undefined for omega_a = 0")
        return self.omega_b / self.omega_a


@dataclass(frozen=True)
class BareDrives:
    carrier: float
    sideband: float

    def __post_init__(self):
        if self.carrier < 0 or self.sideband < 0:
            raise ValueError("bare Rabi frequencies must be >= 0")


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Hermitian tridiagonal Hamiltonian.

    ``offdiag[j]`` is the element H[j+1, j]; H[j, j+1] is its conjugate.
    """

    diag: np.ndarray
    offdiag: np.ndarray
    site_count: int
    frame: str = "rotating-gauge"

    @property
    def dim(self) -> int:
        return 2 * self.site_count

    @property
    def matrix(self) -> np.ndarray:
        h = np.diag(self.diag.astype(complex))
        k = np.arange(self.dim - 1)
        h[k + 1, k] = self.offdiag
        h[k, k + 1] = np.conj(self.offdiag)
        return h

    def __add__(self, other: "Hamiltonian") -> "Hamiltonian":
        return Hamiltonian(self.diag + other.diag, self.offdiag + other.offdiag,
                           self.site_count, self.frame)

    def __neg__(self) -> "Hamiltonian":
        return Hamiltonian(-self.diag, -self.offdiag, self.site_count, self.frame)

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def _rm_elements(params: RMParameters, site_count: int):
    if site_count < 2:
        raise InvalidLatticeError(f"site_count must be >= 2, got {site_count}")
    sites = np.arange(site_count)
    diag = np.empty(2 * site_count)
    diag[0::2] = params.delta / 2 + params.delta_t * sites
    diag[1::2] = -params.delta / 2 + params.delta_t * sites
    phase_a = np.exp(1j * params.phase)
    phase_b = phase_a if params.phase_b is None else np.exp(1j * params.phase_b)
    off = np.empty(2 * site_count - 1, dtype=complex)
    # H[(l,e),(l,g)] = Omega_A e^{i eps}/2
    off[0::2] = params.omega_a * phase_a / 2
    # H[(l+1,g),(l,e)] = conj(Omega_B e^{i eps}/2)
    off[1::2] = np.conj(params.omega_b * phase_b / 2)
    return diag, off


def build_rm_hamiltonian(params: RMParameters, lattice: LatticeParams | int) -> Hamiltonian:
    """Tilted Rice-Mele Hamiltonian on an open chain.

    Carrier coupling Omega_A/2 on (l,g)<->(l,e), sideband coupling Omega_B/2 on
    (l+1,g)<->(l,e), +delta/2 on g and -delta/2 on e, plus delta_t*l on site l.
    """
    site_count = lattice if isinstance(lattice, (int, np.integer)) else lattice.site_count
    diag, off = _rm_elements(params, int(site_count))
    return Hamiltonian(diag, off, int(site_count))


def diagonal_hamiltonian(diag: np.ndarray, site_count: int) -> Hamiltonian:
    return Hamiltonian(np.asarray(diag, float), np.zeros(2 * site_count - 1, complex), site_count)


def level_shift(coefficient: float, site_count: int) -> Hamiltonian:
    """``coefficient * sum_l (n_lg - n_le)``: how AC Stark shifts enter."""
    diag = np.tile([coefficient, -coefficient], site_count)
    return diagonal_hamiltonian(diag, site_count)


def derive_effective_drives(bare: BareDrives, lattice: LatticeParams) -> RMParameters:
    """Bessel-weighted drive strengths in the rotating-gauge frame.

    Omega_A = Omega_c I_0 J_0(J~) and |Omega_B| = Omega_s I_0 |J_{-1}(J~)|;
    the sign of J_{-1} is absorbed into the gauge.
    """
    x = lattice.bessel_argument
    return RMParameters(
        omega_a=abs(bare.carrier * lattice.overlap * special.jv(0, x)),
        omega_b=abs(bare.sideband * lattice.overlap * special.jv(-1, x)),
    )


def bessel_ratio_root(ratio: float = CALIBRATION_RATIO_5ER) -> float:
    """Smallest J~ with J_0(J~)/J_1(J~) = ratio."""
    return optimize.brentq(lambda x: special.j0(x) / special.j1(x) - ratio, 1e-6, 2.404)


def calibrated_lattice(site_count: int, ratio: float = CALIBRATION_RATIO_5ER,
                       **kwargs) -> LatticeParams:
    """Lattice whose tunneling is tuned so that J_0(J~)/J_1(J~) = ratio."""
    base = LatticeParams(site_count=site_count, **kwargs)
    target = bessel_ratio_root(ratio)
    tunneling = target * base.tilt / (4 * abs(np.sin(base.soc_phase / 2)))
    return replace(base, tunneling=tunneling, lattice_depth=kwargs.get("lattice_depth", 5.0))


def ac_stark_shift(bare: BareDrives, lattice: LatticeParams) -> tuple[float, float]:
    """Off-resonant level shifts of the carrier and sideband tones.

    Returns ``(carrier, sideband)`` as coefficients of ``sum_l (n_lg - n_le)``:
    +(Omega_c I_0 J_1)^2/(4 Delta) for the carrier tone and
    -(Omega_s I_0 J_0)^2/(4 Delta) for the sideband tone.
    """
    if lattice.tilt == 0:
        raise ZeroDivisionError("AC Stark shift requires a nonzero tilt")
    x = lattice.bessel_argument
    carrier = (bare.carrier * lattice.overlap * special.jv(1, x)) ** 2 / (4 * lattice.tilt)
    sideband = -(bare.sideband * lattice.overlap * special.jv(0, x)) ** 2 / (4 * lattice.tilt)
    return float(carrier), float(sideband)


def stark_detunings(omega_a: float, omega_b: float, lattice: LatticeParams) -> tuple[float, float]:
    """AC Stark coefficients expressed through the effective couplings.

    Same convention as :func:`ac_stark_shift`, with the bare drives eliminated:
    carrier +Omega_A^2 (J_1/J_0)^2/(4 Delta), sideband -Omega_B^2 (J_0/J_1)^2/(4 Delta).
    """
    x = lattice.bessel_argument
    j0, j1 = special.j0(x), special.j1(x)
    carrier = omega_a ** 2 * (j1 / j0) ** 2 / (4 * lattice.tilt)
    sideband = -omega_b ** 2 * (j0 / j1) ** 2 / (4 * lattice.tilt)
    return float(carrier), float(sideband)


def ws_coupling_matrix(tunneling: float, tilt: float, range_: int) -> np.ndarray:
    """Matrix of J_{l-m}(2J/Delta) for l, m in [-range_, range_]."""
    if range_ < 1:
        raise ValueError("range must be >= 1")
    n = np.arange(-range_, range_ + 1)
    return special.jv(n[:, None] - n[None, :], 2 * tunneling / tilt)


def bessel_addition_sum(u: float, alpha: float, nu: int, terms: int = 60) -> complex:
    """Left-hand side of sum_k J_{nu+k}(u) J_k(u) e^{i k alpha}."""
    k = np.arange(-terms, terms + 1)
    return complex(np.sum(special.jv(nu + k, u) * special.jv(k, u) * np.exp(1j * k * alpha)))


def bessel_addition_closed(u: float, alpha: float, nu: int) -> complex:
    """Closed form J_nu(2u sin(alpha/2)) e^{i nu (pi - alpha)/2} of the sum above.

    Writing the phase as e^{-i nu (pi + alpha)/2} is off by (-1)^nu.
    """
    return complex(special.jv(nu, 2 * u * np.sin(alpha / 2)) * np.exp(1j * nu * (np.pi - alpha) / 2))


Tone = Literal["carrier", "sideband"]


@dataclass(frozen=True)
class CounterRotatingHamiltonian:
    """Single-tone drive in the rotating-gauge frame without the RWA.

    For the sideband tone the resonant coupling is the inter-site bond and the
    on-site bond oscillates as e^{i Delta t}; for the carrier tone the roles
    swap and the oscillation is e^{-i Delta t}.
    """

    bare: BareDrives
    lattice: LatticeParams
    tone: Tone
    resonant: float = field(init=False)
    off_resonant: float = field(init=False)

    def __post_init__(self):
        x = self.lattice.bessel_argument
        i0 = self.lattice.overlap
        if self.tone == "sideband":
            resonant = self.bare.sideband * i0 * abs(special.jv(-1, x))
            off = self.bare.sideband * i0 * special.jv(0, x)
        elif self.tone == "carrier":
            resonant = self.bare.carrier * i0 * special.jv(0, x)
            off = self.bare.carrier * i0 * abs(special.jv(-1, x))
        else:
            raise ValueError(f"unknown tone {self.tone!r}")
        object.__setattr__(self, "resonant", float(resonant))
        object.__setattr__(self, "off_resonant", float(off))

    @property
    def period(self) -> float:
        return 2 * np.pi / self.lattice.tilt

    def __call__(self, t: float) -> Hamiltonian:
        n = self.lattice.site_count
        diag = np.zeros(2 * n)
        off = np.empty(2 * n - 1, dtype=complex)
        if self.tone == "sideband":
            off[0::2] = self.off_resonant / 2 * np.exp(1j * self.lattice.tilt * t)
            off[1::2] = self.resonant / 2
        else:
            off[0::2] = self.resonant / 2
            off[1::2] = np.conj(self.off_resonant / 2 * np.exp(-1j * self.lattice.tilt * t))
        return Hamiltonian(diag, off, n, frame="rotating-gauge/no-RWA")

    def effective(self) -> Hamiltonian:
        """RWA Hamiltonian with the AC Stark shift of the dropped bond."""
        n = self.lattice.site_count
        coeff = self.off_resonant ** 2 / (4 * self.lattice.tilt)
        if self.tone == "sideband":
            h = build_rm_hamiltonian(RMParameters(0.0, self.resonant), n)
            return h + level_shift(-coeff, n)
        h = build_rm_hamiltonian(RMParameters(self.resonant, 0.0), n)
        return h + level_shift(coeff, n)


def build_counterrotating_hamiltonian(bare: BareDrives, lattice: LatticeParams,
                                      tone: Tone) -> CounterRotatingHamiltonian:
    return CounterRotatingHamiltonian(bare, lattice, tone)


HamiltonianSource = Callable[[float], Hamiltonian]
