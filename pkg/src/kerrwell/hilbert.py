"""Truncated Fock-space operators and model Hamiltonians.

Two model families are supported:

* ``KPO`` -- the rotating-frame Kerr parametric oscillator with a squeezing
  drive ``eps2`` and a linear drive ``eps1`` of phase ``phi``.  Energies are in
  units of the Kerr constant K with hbar = 1.
* ``CHEMICAL`` -- an ordinary particle in the quartic double well
  ``p^2/2 + x^4 - k2 x^2 + k1 x`` in units hbar = mass = k4 = 1, represented
  in a harmonic-oscillator basis of frequency ``basis_freq``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .errors import ConsistencyError, InvalidDimensionError, UsageError

logger = logging.getLogger(__name__)

HERMITICITY_RTOL = 1e-12
CHEMICAL_DEFAULT_DIM = 120
CHEMICAL_CONVERGENCE_TOL = 1e-6
# variational optimum of a harmonic trial state for p^2/2 + x^4
_QUARTIC_BASIS_FREQ = 6.0 ** (1.0 / 3.0)


class Family(str, enum.Enum):
    KPO = "kpo"
    CHEMICAL = "chemical"


AXES = {
    Family.KPO: ("eps1", "eps2", "phi"),
    Family.CHEMICAL: ("k1", "k2"),
}


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless Hamiltonian parameters for either model family.

    KPO quantities are in units of K, chemical ones in units of k4; both
    scales are fixed to 1.  ``input_rescale`` multiplies ``(eps1, eps2)``
    when the Hamiltonian is built and is carried along for provenance.
    """

    family: Family = Family.KPO
    eps1: float = 0.0
    eps2: float = 0.0
    phi: float = 0.0
    k1: float = 0.0
    k2: float = 0.0
    input_rescale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("eps1", "eps2", "phi", "k1", "k2", "input_rescale"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise UsageError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.eps2 < 0:
            raise UsageError(f"eps2 must be >= 0, got {self.eps2}")
        if self.k2 < 0:
            raise UsageError(f"k2 must be >= 0, got {self.k2}")
        if not 0.8 <= self.input_rescale <= 1.2:
            raise UsageError(f"input_rescale must lie in [0.8, 1.2], got {self.input_rescale}")

    @classmethod
    def kpo(cls, eps1=0.0, eps2=0.0, phi=0.0, input_rescale=1.0) -> ModelParams:
        return cls(Family.KPO, eps1=eps1, eps2=eps2, phi=phi, input_rescale=input_rescale)

    @classmethod
    def chemical(cls, k1=0.0, k2=0.0) -> ModelParams:
        return cls(Family.CHEMICAL, k1=k1, k2=k2)

    @property
    def energy_scale(self) -> float:
        """K (KPO) or k4 (chemical); always 1 in toolkit units."""
        return 1.0

    @property
    def eps1_eff(self) -> float:
        return self.eps1 * self.input_rescale

    @property
    def eps2_eff(self) -> float:
        return self.eps2 * self.input_rescale

    @property
    def asymmetry_drive(self) -> float:
        """Signed drive that tilts the wells along x."""
        if self.family is Family.KPO:
            return self.eps1_eff
        return self.k1

    @property
    def depth_drive(self) -> float:
        if self.family is Family.KPO:
            return self.eps2_eff
        return self.k2

    def with_value(self, axis: str, value: float) -> ModelParams:
        if axis not in AXES[self.family]:
            raise UsageError(f"axis {axis!r} is not valid for the {self.family.value} model")
        return replace(self, **{axis: value})

    def as_dict(self) -> dict:
        return {
            "family": self.family.value,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "phi": self.phi,
            "k1": self.k1,
            "k2": self.k2,
            "input_rescale": self.input_rescale,
        }


@dataclass(frozen=True)
class Hamiltonian:
    """A Hermitian matrix together with the parameters that produced it.

    ``matrix`` is the physical Hamiltonian (for the KPO, H_eff itself, whose
    well states are its *largest* eigenvalues).  ``quasi_matrix`` applies the
    toolkit sign convention in which wells are minima for both families.
    """

    matrix: np.ndarray
    params: ModelParams
    basis_freq: float = 1.0
    warnings: tuple[str, ...] = field(default=())

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def quasi_matrix(self) -> np.ndarray:
        if self.params.family is Family.KPO:
            return -self.matrix
        return self.matrix

    def shifted(self, constant: float) -> Hamiltonian:
        """Same Hamiltonian plus ``constant`` times the identity (physical sign)."""
        return replace(self, matrix=self.matrix + constant * np.eye(self.dim))


# ---------------------------------------------------------------------------
# Fock-space building blocks


def _check_dim(dim, minimum=2):
    if int(dim) != dim or dim < minimum:
        raise InvalidDimensionError(f"dimension must be an integer >= {minimum}, got {dim}")
    return int(dim)


def annihilation_operator(dim: int, with_adjoint: bool = False):
    """Truncated ``a`` with sqrt(n) on the superdiagonal.

    With ``with_adjoint=True`` returns the pair ``(a, a_dag)``.
    """
    dim = _check_dim(dim)
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)
    if with_adjoint:
        return a, a.conj().T.copy()
    return a


def number_operator(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def parity_operator(dim: int) -> np.ndarray:
    """exp(i pi a^dag a), diagonal (+1, -1, +1, ...)."""
    dim = _check_dim(dim)
    return np.diag((-1.0) ** np.arange(dim)).astype(complex)


def position_operator(dim: int, basis_freq: float = 1.0) -> np.ndarray:
    """X = (a + a^dag) / sqrt(2 basis_freq).

    ``basis_freq = 1`` gives the KPO quadrature of ``a -> (x + ip)/sqrt(2)``.
    """
    if basis_freq <= 0:
        raise UsageError(f"basis_freq must be positive, got {basis_freq}")
    a, ad = annihilation_operator(dim, with_adjoint=True)
    return (a + ad) / math.sqrt(2.0 * basis_freq)


def momentum_operator(dim: int, basis_freq: float = 1.0) -> np.ndarray:
    """P = i sqrt(basis_freq / 2) (a^dag - a)."""
    if basis_freq <= 0:
        raise UsageError(f"basis_freq must be positive, got {basis_freq}")
    a, ad = annihilation_operator(dim, with_adjoint=True)
    return 1j * math.sqrt(basis_freq / 2.0) * (ad - a)


def check_hermitian(matrix: np.ndarray, what: str = "operator") -> None:
    scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
    deviation = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    if deviation > HERMITICITY_RTOL * max(scale, 1e-300):
        raise ConsistencyError(f"{what} is not Hermitian: max|H - H^dag| = {deviation:.3e}")


# ---------------------------------------------------------------------------
# Hamiltonians


def default_kpo_dim(eps2: float) -> int:
    """Fock cutoff ``max(60, ceil(4 eps2 + 6 sqrt(eps2) + 20))`` (eps2 in units of K)."""
    eps2 = max(float(eps2), 0.0)
    return max(60, math.ceil(4.0 * eps2 + 6.0 * math.sqrt(eps2) + 20.0))


def default_dim(params: ModelParams) -> int:
    if params.family is Family.KPO:
        return default_kpo_dim(params.eps2_eff)
    return CHEMICAL_DEFAULT_DIM


def build_kpo_hamiltonian(params: ModelParams, dim: int | None = None) -> Hamiltonian:
    """-a^dag^2 a^2 + eps2 (a^2 + a^dag^2) + eps1 (e^{i phi} a + e^{-i phi} a^dag), K = 1."""
    if params.family is not Family.KPO:
        raise UsageError("build_kpo_hamiltonian needs a KPO parameter set")
    dim = _check_dim(default_kpo_dim(params.eps2_eff) if dim is None else dim)
    a, ad = annihilation_operator(dim, with_adjoint=True)
    eps1, eps2, phi = params.eps1_eff, params.eps2_eff, params.phi
    n = np.arange(dim, dtype=float)
    h = np.diag(-n * (n - 1.0)).astype(complex)
    h += eps2 * (a @ a + ad @ ad)
    h += eps1 * (np.exp(1j * phi) * a + np.exp(-1j * phi) * ad)
    check_hermitian(h, "KPO Hamiltonian")
    h = 0.5 * (h + h.conj().T)
    return Hamiltonian(h, params, basis_freq=1.0)


def default_basis_freq(k2: float) -> float:
    """Harmonic frequency at the well bottoms, 2 sqrt(k2).

    Falls back to the variational quartic frequency 6^(1/3) when the wells are
    too shallow for the curvature to be a useful scale.
    """
    return max(2.0 * math.sqrt(max(k2, 0.0)), _QUARTIC_BASIS_FREQ)


def _chemical_matrix(k1, k2, dim, basis_freq):
    # pad by 4 so x^4 and p^2 matrix elements are exact inside the cutoff
    big = dim + 4
    x = position_operator(big, basis_freq).real
    p_im = momentum_operator(big, basis_freq).imag  # P = i * p_im
    x2 = x @ x
    x4 = x2 @ x2
    p2 = -(p_im @ p_im)  # (i p_im)^2
    h = 0.5 * p2 + x4 - k2 * x2 + k1 * x
    return h[:dim, :dim].astype(complex)


def build_chemical_hamiltonian(
    params: ModelParams,
    dim: int | None = None,
    basis_freq: float | None = None,
    check_convergence: bool = True,
) -> Hamiltonian:
    """p^2/2 + x^4 - k2 x^2 + k1 x in a harmonic basis of frequency ``basis_freq``.

    When ``check_convergence`` is set the ground energy is recomputed at twice
    the cutoff; a shift above 1e-6 is recorded in ``Hamiltonian.warnings``.
    """
    if params.family is not Family.CHEMICAL:
        raise UsageError("build_chemical_hamiltonian needs a chemical parameter set")
    dim = _check_dim(CHEMICAL_DEFAULT_DIM if dim is None else dim)
    freq = default_basis_freq(params.k2) if basis_freq is None else float(basis_freq)
    if freq <= 0:
        raise UsageError(f"basis_freq must be positive, got {freq}")
    h = _chemical_matrix(params.k1, params.k2, dim, freq)
    check_hermitian(h, "chemical Hamiltonian")
    notes = []
    if check_convergence:
        e_small = np.linalg.eigvalsh(h)[0]
        e_big = np.linalg.eigvalsh(_chemical_matrix(params.k1, params.k2, 2 * dim, freq))[0]
        shift = abs(e_small - e_big)
        if shift > CHEMICAL_CONVERGENCE_TOL:
            msg = f"truncation not converged: ground energy moves by {shift:.2e} when dim doubles"
            logger.warning(msg)
            notes.append(msg)
    return Hamiltonian(h, params, basis_freq=freq, warnings=tuple(notes))


def build_hamiltonian(params: ModelParams, dim: int | None = None, **kwargs) -> Hamiltonian:
    if params.family is Family.KPO:
        return build_kpo_hamiltonian(params, dim)
    return build_chemical_hamiltonian(params, dim, **kwargs)


# ---------------------------------------------------------------------------
# States


def coherent_truncation_floor(alpha: complex) -> float:
    n = abs(alpha) ** 2
    return n + 10.0 * math.sqrt(n + 1.0)


def coherent_state(alpha: complex, dim: int) -> np.ndarray:
    """Normalized truncated coherent state |alpha>.

    Requires ``dim >= |alpha|^2 + 10 sqrt(|alpha|^2 + 1)`` so the discarded
    Poisson tail is negligible.
    """
    dim = _check_dim(dim, minimum=1)
    if dim < coherent_truncation_floor(alpha):
        raise InvalidDimensionError(
            f"dim={dim} too small for |alpha|^2={abs(alpha) ** 2:.3g}; "
            f"need >= {coherent_truncation_floor(alpha):.1f}"
        )
    n = np.arange(dim)
    if alpha == 0:
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
        return psi
    r, theta = abs(alpha), np.angle(alpha)
    log_amp = -0.5 * r**2 + n * math.log(r) - 0.5 * gammaln(n + 1)
    psi = np.exp(log_amp) * np.exp(1j * theta * n)
    return psi / np.linalg.norm(psi)


# ---------------------------------------------------------------------------
# Physical units


@dataclass(frozen=True)
class PhysicalDriveParams:
    """Circuit nonlinearities and drive amplitudes, all angular frequencies (rad/s)."""

    g3: float
    g4: float
    omega_a: float
    Omega1: float = 0.0
    Omega2: float = 0.0

    def __post_init__(self):
        if not self.omega_a > 0:
            raise UsageError(f"omega_a must be positive, got {self.omega_a}")


class DriveCoefficients(NamedTuple):
    K: float
    eps1: float
    eps2: float
    eps1_over_K: float
    eps2_over_K: float


def convert_physical_params(p: PhysicalDriveParams) -> DriveCoefficients:
    """Kerr constant and drive coefficients of the effective Hamiltonian.

    K = -3 g4 / 2 + 10 g3^2 / (3 omega_a), eps1 = Omega1 / 2,
    eps2 = 4 g3 Omega2 / (3 omega_a).
    """
    K = -1.5 * p.g4 + 10.0 * p.g3**2 / (3.0 * p.omega_a)
    if K <= 0:
        raise UsageError(f"Kerr constant must be positive in this convention, got K={K:.4g}")
    eps1 = p.Omega1 / 2.0
    eps2 = p.g3 * 4.0 * p.Omega2 / (3.0 * p.omega_a)
    return DriveCoefficients(K, eps1, eps2, eps1 / K, eps2 / K)
