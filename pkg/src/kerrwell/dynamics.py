"""Lindblad dynamics: Liouvillian, propagation, steady states and activation times.

Density matrices are vectorized column-major (``vec(A X B) = (B^T kron A) vec X``)
and the Liouvillian is kept sparse; at the working dimensions (~60 levels)
a dense d^2 x d^2 matrix would be 200 MB of mostly zeros.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize
from scipy.optimize import linear_sum_assignment

from .errors import (
    ConsistencyError,
    DegenerateSteadyStateError,
    IndeterminateError,
    InsufficientSupportError,
    IntegrationError,
    NoDecayError,
    UsageError,
)
from .hilbert import (
    Family,
    Hamiltonian,
    ModelParams,
    annihilation_operator,
    build_hamiltonian,
    coherent_state,
    default_dim,
    position_operator,
)
from .semiclassics import analyze_landscape
from .spectra import Spectrum, eigensystem

logger = logging.getLogger(__name__)

TRACE_PRESERVATION_TOL = 1e-10
ZERO_EIGENVALUE_TOL = 1e-10
TRANSFER_MIN = 0.5
TRACE_DRIFT_MAX = 1e-6
POSITIVITY_CLIP = -1e-8
POSITIVITY_FAIL = -1e-6
DEFAULT_STEP_RATIO = 0.01
_DENSE_LIMIT = 400  # below this many superoperator rows eigenproblems go dense


@dataclass(frozen=True)
class DissipationParams:
    kappa: float = 0.025
    n_th: float = 0.05

    def __post_init__(self):
        if not (math.isfinite(self.kappa) and self.kappa > 0):
            raise UsageError(f"kappa must be positive, got {self.kappa}")
        if not (math.isfinite(self.n_th) and self.n_th >= 0):
            raise UsageError(f"n_th must be >= 0, got {self.n_th}")


@dataclass
class Superoperator:
    matrix: sp.csc_matrix
    dim: int
    dissipation: DissipationParams
    hamiltonian: Hamiltonian | None = None

    @property
    def params(self) -> ModelParams | None:
        return self.hamiltonian.params if self.hamiltonian is not None else None

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.dim)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def _dissipator(c, eye):
    cdc = (c.conj().T @ c).tocsr()
    return sp.kron(c.conj(), c) - 0.5 * sp.kron(eye, cdc) - 0.5 * sp.kron(cdc.T, eye)


def liouvillian(h: Hamiltonian | np.ndarray, d: DissipationParams) -> Superoperator:
    """Sparse generator of -i[H, rho] + kappa(1+n_th) D[a] rho + kappa n_th D[a^dag] rho.

    ``H`` is the physical Hamiltonian (not the quasi-energy matrix) and ``a``
    is the annihilation operator of the basis it is written in.
    """
    if isinstance(h, Hamiltonian):
        hm, snapshot = h.matrix, h
    else:
        hm, snapshot = np.asarray(h, dtype=complex), None
    dim = hm.shape[0]
    eye = sp.identity(dim, format="csr", dtype=complex)
    hs = sp.csr_matrix(hm)
    a = sp.csr_matrix(annihilation_operator(dim))
    gen = -1j * (sp.kron(eye, hs) - sp.kron(hs.T, eye))
    gen = gen + d.kappa * (1.0 + d.n_th) * _dissipator(a, eye)
    if d.n_th > 0:
        gen = gen + d.kappa * d.n_th * _dissipator(a.conj().T.tocsr(), eye)
    gen = gen.tocsc()
    gen.eliminate_zeros()

    # trace preservation: vec(I) is a left null vector
    left = gen.conj().T @ vec(np.eye(dim))
    scale = max(1.0, float(abs(gen).max()))
    if np.max(np.abs(left)) > TRACE_PRESERVATION_TOL * scale:
        raise ConsistencyError(f"Liouvillian is not trace preserving (residual {np.max(np.abs(left)):.2e})")
    return Superoperator(gen, dim, d, snapshot)


# ---------------------------------------------------------------------------
# which-well projectors and states


def half_space_projectors(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """(P_right, P_left): spectral projectors of X onto positive / negative eigenvalues.

    For odd ``dim`` the zero-eigenvalue vector is shared equally.  The sign of
    X does not depend on the basis frequency, so the same projectors serve
    both model families.
    """
    w, v = np.linalg.eigh(position_operator(dim))
    zero = np.abs(w) < 1e-12
    weights_right = np.where(zero, 0.5, np.where(w > 0, 1.0, 0.0))
    weights_left = np.where(zero, 0.5, np.where(w < 0, 1.0, 0.0))
    right = (v * weights_right) @ v.conj().T
    left = (v * weights_left) @ v.conj().T
    return right, left


def shallow_side(params: ModelParams) -> int:
    """-1 if the shallow well sits at negative x, +1 otherwise."""
    land = analyze_landscape(params)
    return -1 if land.shallow[0] < 0 else 1


def well_projectors(dim: int, params: ModelParams | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(P_shallow, P_deep) half-space projectors.

    Without ``params`` the shallow side is taken to be negative x.
    """
    right, left = half_space_projectors(dim)
    side = -1 if params is None else shallow_side(params)
    return (left, right) if side < 0 else (right, left)


def shallow_coherent_state(params: ModelParams, dim: int, basis_freq: float = 1.0) -> np.ndarray:
    """Coherent state centred on the classical shallow-well minimum, as a density matrix."""
    x, p, _ = analyze_landscape(params).shallow
    if params.family is Family.KPO:
        alpha = complex(x, p) / math.sqrt(2.0)
    else:
        alpha = complex(x * math.sqrt(basis_freq / 2.0), p / math.sqrt(2.0 * basis_freq))
    psi = coherent_state(alpha, dim)
    return np.outer(psi, psi.conj())


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


# ---------------------------------------------------------------------------
# propagation


@dataclass
class Trajectory:
    times: np.ndarray
    shallow_population: np.ndarray
    deep_population: np.ndarray
    trace_error: np.ndarray
    hermiticity_error: np.ndarray
    min_eigenvalue: np.ndarray
    final_state: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)


class _RationalStepper:
    """exp(hL) v approximated by the (2,3) Pade approximant (Radau IIA, order 5).

    The approximant is L-stable, so stiff coherences far outside the slow
    manifold are damped instead of amplified.  Applied by partial fractions,
    one sparse LU per pole and step size, cached.
    """

    _NUM = np.poly1d([1 / 20, 2 / 5, 1])
    _DEN = np.poly1d([-1 / 60, 3 / 20, -3 / 5, 1])

    def __init__(self, gen: sp.csc_matrix):
        self.gen = gen
        self.eye = sp.identity(gen.shape[0], format="csc", dtype=complex)
        self.poles = self._DEN.r
        self.residues = self._NUM(self.poles) / self._DEN.deriv()(self.poles)
        self._cache: dict[float, list] = {}

    def factors(self, h):
        if h not in self._cache:
            self._cache[h] = [spla.splu((h * self.gen - z * self.eye).tocsc()) for z in self.poles]
        return self._cache[h]

    def step(self, v, h):
        return sum(c * lu.solve(v) for c, lu in zip(self.residues, self.factors(h)))


def _step_ladder(t, ratio):
    """Largest power-of-two multiple of 1e-3 not exceeding ratio * (1 + t)."""
    hmax = ratio * (1.0 + t)
    return 1e-3 * 2.0 ** math.floor(math.log2(hmax / 1e-3)) if hmax >= 1e-3 else hmax


def default_time_grid(t_max: float, n_points: int = 200, step_ratio: float = DEFAULT_STEP_RATIO) -> np.ndarray:
    """t = 0 followed by log-spaced points up to ``t_max``.

    Points are snapped to whole multiples of the step size in force, so the
    propagator needs only a handful of distinct step sizes.
    """
    if not t_max > 0.1:
        raise UsageError("t_max must exceed 0.1")
    target = np.geomspace(0.1, t_max, n_points - 1)
    out = [0.0]
    for t in target:
        prev = out[-1]
        h = _step_ladder(prev, step_ratio)
        m = max(1, round((t - prev) / h))
        out.append(prev + m * h)
    return np.array(out)


def _checked_state(v, dim, i, warnings):
    rho = unvec(v, dim)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    rho = 0.5 * (rho + rho.conj().T)
    tr = float(np.trace(rho).real)
    w, u = np.linalg.eigh(rho)
    lo = float(w.min())
    if lo < POSITIVITY_FAIL:
        raise IntegrationError(f"density matrix lost positivity (min eigenvalue {lo:.2e}) at point {i}")
    if lo < POSITIVITY_CLIP:
        warnings.append(f"clipped eigenvalue {lo:.2e} at point {i}")
        w = np.clip(w, 0.0, None)
        rho = (u * w) @ u.conj().T
        rho *= tr / np.trace(rho).real
    return rho, herm, tr, lo


def evolve(
    rho0: np.ndarray,
    L: Superoperator,
    times,
    projectors: tuple[np.ndarray, np.ndarray] | None = None,
    step_ratio: float = DEFAULT_STEP_RATIO,
) -> Trajectory:
    """Propagate ``rho0`` under ``L`` and record which-well populations.

    Internal steps satisfy h <= step_ratio * (1 + t); each output point is
    checked for trace drift, Hermiticity and positivity.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or times[0] != 0 or np.any(np.diff(times) <= 0):
        raise UsageError("times must be strictly ascending and start at 0")
    dim = L.dim
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (dim, dim):
        raise UsageError(f"rho0 has shape {rho0.shape}, expected {(dim, dim)}")
    if projectors is None:
        projectors = well_projectors(dim, L.params) if L.params is not None else well_projectors(dim)
    p_sh, p_dp = projectors

    stepper = _RationalStepper(L.matrix)
    n = len(times)
    shallow, deep = np.empty(n), np.empty(n)
    trace_err, herm_err, min_eig = np.empty(n), np.empty(n), np.empty(n)
    warnings: list[str] = []
    v = vec(rho0).copy()
    for i, t in enumerate(times):
        if i > 0:
            prev = times[i - 1]
            dt = t - prev
            h = _step_ladder(prev, step_ratio)
            m = round(dt / h)
            if m < 1 or abs(m * h - dt) > 1e-9 * dt:
                m = math.ceil(dt / (step_ratio * (1.0 + prev)))
                h = dt / m
            for _ in range(m):
                v = stepper.step(v, h)
                r = unvec(v, dim)
                v = vec(0.5 * (r + r.conj().T))
        rho, herm, tr, lo = _checked_state(v, dim, i, warnings)
        v = vec(rho)
        if abs(tr - 1.0) > TRACE_DRIFT_MAX:
            raise IntegrationError(f"trace drifted to {tr:.9f} at t = {t:g}")
        a = float(np.real(np.vdot(p_sh, rho)))  # Tr(P rho) for Hermitian P
        b = float(np.real(np.vdot(p_dp, rho)))
        shallow[i], deep[i] = a / (a + b), b / (a + b)
        trace_err[i], herm_err[i], min_eig[i] = abs(tr - 1.0), herm, lo
    if herm_err.max() > 0:
        logger.debug("max Hermiticity deviation before symmetrization: %.2e", herm_err.max())
    return Trajectory(times, shallow, deep, trace_err, herm_err, min_eig, unvec(v, dim), warnings)


# ---------------------------------------------------------------------------
# spectral analysis


def slow_modes(L: Superoperator, k: int = 6):
    """Eigenvalues (sorted by |Re|, then |Im|) and right eigenmatrices closest to zero."""
    n = L.matrix.shape[0]
    if n <= _DENSE_LIMIT:
        w, v = np.linalg.eig(L.to_dense())
    else:
        k = min(k, n - 2)
        # fixed start vector: ARPACK's random default breaks bitwise reproducibility
        v0 = np.random.default_rng(0).standard_normal(n).astype(complex)
        w, v = spla.eigs(L.matrix, k=k, sigma=1e-7, which="LM", tol=1e-12, v0=v0)
    order = np.lexsort((np.abs(w.imag), np.abs(w.real)))
    w, v = w[order], v[:, order]
    return w, [unvec(v[:, j], L.dim) for j in range(len(w))]


def _normalize_density(x):
    rho = 0.5 * (x + x.conj().T)
    tr = np.trace(rho)
    if abs(tr) < 1e-300:
        raise ConsistencyError("steady-state candidate has zero trace")
    rho = rho / tr.real
    w, u = np.linalg.eigh(rho)
    if w.min() < POSITIVITY_FAIL:
        raise ConsistencyError(f"steady state has eigenvalue {w.min():.2e}")
    w = np.where(w > POSITIVITY_CLIP, np.clip(w, 0.0, None), w)
    rho = (u * w) @ u.conj().T
    return rho / np.trace(rho).real


def steady_state(L: Superoperator, check_unique: bool = True) -> np.ndarray:
    """Null vector of L as a normalized density matrix.

    One row of L is replaced by the trace condition and the system solved
    with a sparse LU.  The null space is checked to be one dimensional.
    """
    if check_unique:
        w, _ = slow_modes(L, k=3)
        zeros = int(np.sum(np.abs(w) < ZERO_EIGENVALUE_TOL))
        if zeros != 1:
            raise DegenerateSteadyStateError(f"Liouvillian null space has dimension {zeros}")
    dim = L.dim
    a = L.matrix.tolil(copy=True)
    a[0, :] = vec(np.eye(dim)).reshape(1, -1)
    b = np.zeros(dim * dim, dtype=complex)
    b[0] = 1.0
    x = spla.splu(a.tocsc()).solve(b)
    return _normalize_density(unvec(x, dim))


class Method(str, enum.Enum):
    FIT = "fit"
    SPECTRAL = "spectral"


@dataclass
class SectorRate:
    rate: float  # -Re(lambda)
    frequency: float  # Im(lambda)
    diagonal_weight: float  # share of the eigenmatrix on the H-eigenbasis diagonal
    transfer: float  # |Tr((P_shallow - P_deep) m)| / ||m||_F: interwell population carried


@dataclass
class DecayFit:
    T: float
    O: float
    rmse: float
    method: Method
    eigenvalue: complex | None = None
    sector_rates: list[SectorRate] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.T > 0:
            raise ConsistencyError(f"activation time must be positive, got {self.T}")


def _eigenbasis(L):
    if L.hamiltonian is not None:
        _, u = np.linalg.eigh(L.hamiltonian.matrix)
        return u
    return np.eye(L.dim)


def activation_time_spectral(
    L: Superoperator,
    projectors: tuple[np.ndarray, np.ndarray] | None = None,
    k: int = 6,
    sector: str = "imbalance",
) -> DecayFit:
    """T = 1 / |Re lambda| for the slow Liouvillian mode that carries the activation.

    ``sector="imbalance"`` picks the nonzero mode that moves the most
    population between the wells, |Tr((P_shallow - P_deep) m)| / ||m||.
    Intrawell relaxation modes score near zero here whatever the steady
    state looks like.  ``sector="population"`` picks the slowest mode living
    mostly on the diagonal of the H eigenbasis.
    """
    if sector not in ("imbalance", "population"):
        raise UsageError(f"unknown sector {sector!r}")
    dim = L.dim
    if projectors is None:
        projectors = well_projectors(dim, L.params) if L.params is not None else well_projectors(dim)
    p_sh, p_dp = projectors
    imbalance = p_sh - p_dp
    u = _eigenbasis(L)
    n = L.matrix.shape[0]
    warnings: list[str] = []
    # A resonant, underdamped activation pair can sit beyond many slow intrawell
    # modes in |lambda|, so the search widens until one carries interwell transfer.
    for kk in (k, 4 * k, 10 * k):
        w, mats = slow_modes(L, kk)
        zero = np.abs(w) < ZERO_EIGENVALUE_TOL
        if zero.sum() != 1:
            raise DegenerateSteadyStateError(f"Liouvillian null space has dimension {int(zero.sum())}")
        rates = []
        for lam, m in zip(w[~zero], [m for m, z in zip(mats, zero) if not z]):
            m_norm = np.linalg.norm(m)
            transfer = abs(np.vdot(imbalance, m)) / m_norm
            in_basis = u.conj().T @ m @ u
            diag = float(np.sum(np.abs(np.diag(in_basis)) ** 2) / m_norm**2)
            rates.append(SectorRate(float(-lam.real), float(lam.imag), diag, float(transfer)))
        if sector != "imbalance" or any(r.transfer >= TRANSFER_MIN for r in rates) or kk >= n - 2 or n <= _DENSE_LIMIT:
            break
    rho_ss = _normalize_density(mats[int(np.argmax(zero))])

    if not rates:
        raise IndeterminateError("no nonzero Liouvillian eigenvalue resolved")
    if sector == "imbalance":
        strong = [j for j, r in enumerate(rates) if r.transfer >= TRANSFER_MIN]
        if strong:
            chosen = strong[0]
        else:
            chosen = max(range(len(rates)), key=lambda j: rates[j].transfer)
            warnings.append(f"no slow mode with interwell transfer >= {TRANSFER_MIN}; using the strongest ({rates[chosen].transfer:.3f})")
    else:
        pops = [j for j, r in enumerate(rates) if r.diagonal_weight > 0.5]
        if not pops:
            raise IndeterminateError("no population-sector mode among the slow modes")
        chosen = pops[0]
    rate = rates[chosen].rate
    if rate < ZERO_EIGENVALUE_TOL:
        raise IndeterminateError(f"decay rate {rate:.2e} is below numerical resolution")
    offset = float(np.real(np.vdot(p_sh, rho_ss)))
    lam = complex(-rate, rates[chosen].frequency)
    return DecayFit(1.0 / rate, offset, math.nan, Method.SPECTRAL, lam, rates, warnings)


def _decay_model(t, T, O, p0):
    return O + (p0 - O) * np.exp(-t / T)


def activation_time_fit(traj: Trajectory) -> DecayFit:
    """Least-squares fit of P(t) = O + (P(0) - O) exp(-t/T) with P(0) fixed."""
    t = np.asarray(traj.times, dtype=float)
    y = np.asarray(traj.shallow_population, dtype=float)
    if np.ptp(y) < 1e-3:
        raise NoDecayError(f"population changes by only {np.ptp(y):.2e}")
    p0, o0 = y[0], y[-1]
    half = 0.5 * (p0 + o0)
    crossed = np.nonzero((y - half) * np.sign(p0 - o0) <= 0)[0]
    if len(crossed) and crossed[0] > 0:
        j = crossed[0]
        t_half = np.interp(half, [y[j], y[j - 1]], [t[j], t[j - 1]]) if y[j] != y[j - 1] else t[j]
    else:
        t_half = 0.5 * t[-1]
    T0 = max(t_half / math.log(2.0), 1e-12)

    def resid(theta):
        return _decay_model(t, math.exp(theta[0]), theta[1], p0) - y

    sol = optimize.least_squares(resid, [math.log(T0), o0], method="lm", xtol=1e-14, ftol=1e-14)
    T, O = math.exp(sol.x[0]), float(sol.x[1])
    rmse = float(np.sqrt(np.mean(sol.fun**2)))
    warnings = []
    if t[-1] < 3.0 * T:
        warnings.append(f"trajectory spans {t[-1] / T:.2f} T (< 3 T); T may be unreliable")
    return DecayFit(T, O, rmse, Method.FIT, None, [], warnings)


# ---------------------------------------------------------------------------
# detailed balance


@dataclass
class DetailedBalanceReport:
    beta_values: list[float]
    beta_avg: float
    beta_std: float
    trace_distance: float
    populations: np.ndarray  # steady-state eigen-populations aligned with spec levels


def detailed_balance_analysis(rho_ss: np.ndarray, spec: Spectrum, threshold: float = 1e-6) -> DetailedBalanceReport:
    """Effective inverse temperatures from neighbouring steady-state eigen-populations.

    beta_{n,n+1} = -ln(p_{n+1}/p_n) / (E_{n+1} - E_n) in the quasi-energy
    convention, over neighbours whose populations both exceed ``threshold``.
    """
    rho_ss = np.asarray(rho_ss)
    if rho_ss.shape != (spec.dim, spec.dim):
        raise UsageError("steady state and spectrum have different dimensions")
    p, vecs = np.linalg.eigh(0.5 * (rho_ss + rho_ss.conj().T))
    overlap = np.abs(spec.eigenvectors.conj().T @ vecs) ** 2
    rows, cols = linear_sum_assignment(-overlap)
    pops = np.empty(spec.n_levels)
    pops[rows] = p[cols]
    e = spec.energies
    betas = [
        float(-math.log(pops[n + 1] / pops[n]) / (e[n + 1] - e[n]))
        for n in range(spec.n_levels - 1)
        if pops[n] > threshold and pops[n + 1] > threshold and e[n + 1] != e[n]
    ]
    if len(betas) < 2:
        raise InsufficientSupportError(f"only {len(betas)} neighbouring pairs exceed threshold {threshold:g}")
    beta = float(np.mean(betas))
    logw = -beta * e
    logw -= logw.max()
    weights = np.exp(logw)
    gibbs = (spec.eigenvectors * weights) @ spec.eigenvectors.conj().T
    gibbs /= np.trace(gibbs).real
    dist = min(max(trace_distance(rho_ss, gibbs), 0.0), 1.0)
    return DetailedBalanceReport(betas, beta, float(np.std(betas)), dist, pops)


# ---------------------------------------------------------------------------
# one-call helpers used by the sweep engine


def build_liouvillian(params: ModelParams, d: DissipationParams, dim: int | None = None) -> Superoperator:
    return liouvillian(build_hamiltonian(params, dim or default_dim(params)), d)


def activation_time(
    params: ModelParams,
    d: DissipationParams,
    dim: int | None = None,
    method: Method | str = Method.SPECTRAL,
    t_max: float | None = None,
    n_points: int = 200,
) -> DecayFit:
    """Activation time out of the shallow well at one parameter point."""
    method = Method(method)
    L = build_liouvillian(params, d, dim)
    projectors = well_projectors(L.dim, params)
    spectral = activation_time_spectral(L, projectors)
    if method is Method.SPECTRAL:
        return spectral
    t_max = 10.0 * spectral.T if t_max is None else t_max
    rho0 = shallow_coherent_state(params, L.dim, L.hamiltonian.basis_freq)
    traj = evolve(rho0, L, default_time_grid(t_max, n_points), projectors)
    return activation_time_fit(traj)


def steady_ratio(params: ModelParams, d: DissipationParams, dim: int | None = None) -> tuple[float, float]:
    """(P_shallow, P_shallow / P_deep) in the steady state."""
    L = build_liouvillian(params, d, dim)
    rho = steady_state(L)
    p_sh, p_dp = well_projectors(L.dim, params)
    a = float(np.real(np.vdot(p_sh, rho)))
    b = float(np.real(np.vdot(p_dp, rho)))
    return a, a / b


def detailed_balance_at(
    params: ModelParams, d: DissipationParams, dim: int | None = None, threshold: float = 1e-6
) -> DetailedBalanceReport:
    L = build_liouvillian(params, d, dim)
    rho = steady_state(L)
    return detailed_balance_analysis(rho, eigensystem(L.hamiltonian), threshold)
