"""Classical phase-space analysis of the double-well landscapes.

The KPO quasi-energy function is obtained from H_eff by a -> (x + ip)/sqrt(2)
and a sign flip so that wells are minima::

    q(x, p) = (x^2 + p^2)^2 / 4 - eps2 (x^2 - p^2) - sqrt(2) eps1 (x cos(phi) - p sin(phi))

The chemical model uses its literal Hamiltonian p^2/2 + x^4 - k2 x^2 + k1 x.
Actions are phase-space areas divided by 2 pi (hbar = 1).
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, optimize

from .errors import BistabilityLostError, NumericalError, UsageError
from .hilbert import Family, ModelParams

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
LOBE_CROSSCHECK_RTOL = 1e-5


class Well(str, enum.Enum):
    SHALLOW = "shallow"
    DEEP = "deep"


# ---------------------------------------------------------------------------
# the classical function and its derivatives


def _coeffs(params: ModelParams):
    if params.family is Family.KPO:
        e1 = params.eps1_eff
        return params.eps2_eff, SQRT2 * e1 * math.cos(params.phi), SQRT2 * e1 * math.sin(params.phi)
    return params.k2, params.k1, 0.0


def classical_hamiltonian(params: ModelParams, x, p):
    """Quasi-energy q(x, p) in the wells-are-minima convention (vectorized)."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    if params.family is Family.KPO:
        e2, c, s = _coeffs(params)
        r2 = x * x + p * p
        return 0.25 * r2 * r2 - e2 * (x * x - p * p) - (c * x - s * p)
    return 0.5 * p * p + x**4 - params.k2 * x * x + params.k1 * x


def _gradient(params, z):
    x, p = z
    if params.family is Family.KPO:
        e2, c, s = _coeffs(params)
        r2 = x * x + p * p
        return np.array([r2 * x - 2 * e2 * x - c, r2 * p + 2 * e2 * p + s])
    return np.array([4 * x**3 - 2 * params.k2 * x + params.k1, p])


def _hessian(params, z):
    x, p = z
    if params.family is Family.KPO:
        e2 = params.eps2_eff
        return np.array([[3 * x * x + p * p - 2 * e2, 2 * x * p], [2 * x * p, x * x + 3 * p * p + 2 * e2]])
    return np.array([[12 * x * x - 2 * params.k2, 0.0], [0.0, 1.0]])


def _line_poly(params, origin, direction):
    """Coefficients (low order first) of t -> q(origin + t * direction)."""
    x0, p0 = origin
    dx, dp = direction
    X = np.array([x0, dx])
    Pp = np.array([p0, dp])
    if params.family is Family.KPO:
        e2, c, s = _coeffs(params)
        r2 = P.polyadd(P.polymul(X, X), P.polymul(Pp, Pp))
        out = 0.25 * P.polymul(r2, r2)
        out = P.polysub(out, e2 * P.polysub(P.polymul(X, X), P.polymul(Pp, Pp)))
        out = P.polysub(out, c * X - s * Pp)
        return out
    X2 = P.polymul(X, X)
    out = 0.5 * P.polymul(Pp, Pp)
    out = P.polyadd(out, P.polymul(X2, X2))
    out = P.polysub(out, params.k2 * X2)
    return P.polyadd(out, params.k1 * X)


# ---------------------------------------------------------------------------
# critical points and landscape


@dataclass
class ClassicalLandscape:
    params: ModelParams
    well_minima: list[tuple[float, float, float]]  # [shallow, deep] as (x, p, q)
    saddle: tuple[float, float, float]
    asymmetry_A: float
    barrier_heights: tuple[float, float]  # (shallow, deep)
    well_frequencies: tuple[float, float] = (math.nan, math.nan)

    @property
    def shallow(self):
        return self.well_minima[0]

    @property
    def deep(self):
        return self.well_minima[1]

    def minimum(self, well: Well | str):
        return self.shallow if Well(well) is Well.SHALLOW else self.deep

    def frequency(self, well: Well | str) -> float:
        return self.well_frequencies[0 if Well(well) is Well.SHALLOW else 1]


def _well_scale(params):
    if params.family is Family.KPO:
        return math.sqrt(2.0 * max(params.eps2_eff, 0.0))
    return math.sqrt(max(params.k2, 0.0) / 2.0)


def _seeds(params):
    x0 = max(_well_scale(params), 0.5)
    d = 0.25 * x0
    return [
        (x0, 0.0), (-x0, 0.0), (0.0, 0.0),
        (x0 + d, d), (-x0 - d, -d), (x0 - d, -d), (-x0 + d, d),
        (0.0, d), (0.0, -d),
    ]


def critical_points(params: ModelParams) -> list[tuple[np.ndarray, str]]:
    """Distinct stationary points of q classified as 'min', 'saddle' or 'max'.

    Multi-start root solve on the gradient from nine seeds, Newton-polished.
    """
    found: list[np.ndarray] = []
    scale = max(_well_scale(params), 1.0)
    for seed in _seeds(params):
        sol = optimize.root(
            lambda z: _gradient(params, z), np.array(seed), jac=lambda z: _hessian(params, z), method="hybr"
        )
        z = sol.x
        for _ in range(3):
            try:
                z = z - np.linalg.solve(_hessian(params, z), _gradient(params, z))
            except np.linalg.LinAlgError:
                break
        if np.max(np.abs(_gradient(params, z))) > 1e-9 * scale**3:
            continue
        if all(np.hypot(*(z - f)) > 1e-6 * scale for f in found):
            found.append(z)
    out = []
    for z in found:
        h = _hessian(params, z)
        det, tr = np.linalg.det(h), np.trace(h)
        kind = "saddle" if det < 0 else ("min" if tr > 0 else "max")
        out.append((z, kind))
    out.sort(key=lambda item: (item[0][0], item[0][1]))
    return out


def _landscape_or_none(params):
    pts = critical_points(params)
    minima = [z for z, kind in pts if kind == "min"]
    saddles = [z for z, kind in pts if kind == "saddle"]
    if len(minima) < 2 or not saddles:
        return None
    return minima, saddles


def bistability_boundary(params: ModelParams, tol: float = 1e-8) -> float:
    """Magnitude of the tilting drive (eps1 or k1) at which one well disappears."""
    axis = "eps1" if params.family is Family.KPO else "k1"
    base = params.with_value(axis, 0.0)
    if _landscape_or_none(base) is None:
        return 0.0
    rescale = params.input_rescale if params.family is Family.KPO else 1.0
    lo, hi = 0.0, max(_well_scale(params), 1.0) ** 3 / rescale
    while _landscape_or_none(params.with_value(axis, hi)) is not None:
        lo, hi = hi, 2 * hi
    while hi - lo > tol * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if _landscape_or_none(params.with_value(axis, mid)) is None:
            hi = mid
        else:
            lo = mid
    return lo


def analyze_landscape(params: ModelParams) -> ClassicalLandscape:
    """Locate both minima and the saddle; compute asymmetry and barrier heights.

    The shallow well is the minimum with the larger quasi-energy.  On an exact
    tie (untilted wells) the minimum at negative x is labelled shallow, which
    continues the eps1 -> 0+ labelling of the KPO at phi = 0.
    """
    found = _landscape_or_none(params)
    if found is None:
        axis = "eps1" if params.family is Family.KPO else "k1"
        boundary = bistability_boundary(params)
        raise BistabilityLostError(
            f"landscape is monostable; bistability is lost at |{axis}| ~ {boundary:.6g}", boundary
        )
    minima, saddles = found
    minima.sort(key=lambda z: classical_hamiltonian(params, *z))
    deep, shallow = minima[0], minima[-1]
    # the separating saddle is the one closest to the segment joining the wells
    mid = 0.5 * (deep + shallow)
    saddle = min(saddles, key=lambda z: np.hypot(*(z - mid)))
    tilt = params.asymmetry_drive
    if tilt == 0.0:
        # untilted: q is even in x, wells are an exact mirror pair on p = 0
        r = 0.5 * (abs(deep[0]) + abs(shallow[0]))
        shallow, deep, saddle = np.array([-r, 0.0]), np.array([r, 0.0]), np.zeros(2)
    q_sh = float(classical_hamiltonian(params, *shallow))
    q_dp = float(classical_hamiltonian(params, *deep))
    if tilt == 0.0:
        q_sh = q_dp = min(q_sh, q_dp)
    elif q_sh == q_dp and shallow[0] > deep[0]:
        shallow, deep = deep, shallow
    q_sd = float(classical_hamiltonian(params, *saddle))

    def freq(z):
        h = _hessian(params, z)
        return math.sqrt(max(np.linalg.det(h), 0.0))

    return ClassicalLandscape(
        params=params,
        well_minima=[(float(shallow[0]), float(shallow[1]), q_sh), (float(deep[0]), float(deep[1]), q_dp)],
        saddle=(float(saddle[0]), float(saddle[1]), q_sd),
        asymmetry_A=q_sh - q_dp,
        barrier_heights=(q_sd - q_sh, q_sd - q_dp),
        well_frequencies=(freq(shallow), freq(deep)),
    )


def small_oscillation_frequency(params: ModelParams, well: Well | str = Well.DEEP) -> float:
    return analyze_landscape(params).frequency(well)


# ---------------------------------------------------------------------------
# lobe areas


def _roots(coeffs):
    # negligible leading terms (rays nearly along p) would swamp the companion matrix
    coeffs = np.trim_zeros(np.where(np.abs(coeffs) < 1e-18 * np.max(np.abs(coeffs)), 0.0, coeffs), "b")
    return np.roots(coeffs[::-1])


def _below_length(coeffs):
    """Total length of {t : poly(t) < 0} for a polynomial that is positive at +-inf."""
    roots = _roots(coeffs)
    real = np.sort(roots[np.abs(roots.imag) <= 1e-9 * (1.0 + np.abs(roots))].real)
    if len(real) < 2:
        return 0.0
    total = 0.0
    for a, b in zip(real[:-1], real[1:]):
        if b > a and P.polyval(0.5 * (a + b), coeffs) < 0:
            total += b - a
    return total


def _frame(land: ClassicalLandscape):
    sx, sp, q_s = land.saddle
    axis = np.array(land.deep[:2]) - np.array(land.shallow[:2])
    e = axis / np.hypot(*axis)
    n = np.array([-e[1], e[0]])
    return np.array([sx, sp]), e, n, q_s


def _slice_length(params, land, u, side=None):
    origin, e, n, q_s = _frame(land)
    coeffs = _line_poly(params, origin + u * e, n)
    coeffs[0] -= q_s
    return _below_length(coeffs)


def _edge(params, land, sign):
    """Extent of the region q < q_saddle along +-e from the saddle."""
    origin, e, n, q_s = _frame(land)
    lo = 0.0
    target = land.shallow if sign < 0 else land.deep
    hi = abs(float(np.dot(np.array(target[:2]) - origin, e)))
    while _slice_length(params, land, sign * hi) > 0:
        lo, hi = hi, 2 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _slice_length(params, land, sign * mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-14 * max(hi, 1.0):
            break
    return sign * hi


def _area_slices(params, land, well):
    sign = -1.0 if Well(well) is Well.SHALLOW else 1.0
    edge = _edge(params, land, sign)
    a, b = (edge, 0.0) if sign < 0 else (0.0, edge)
    val, _ = integrate.quad(
        lambda u: _slice_length(params, land, u), a, b, limit=400, epsabs=0.0, epsrel=1e-11
    )
    return val


def _first_root(coeffs):
    roots = _roots(coeffs)
    ok = (np.abs(roots.imag) <= 1e-6 * (1.0 + np.abs(roots.real))) & (roots.real > 0)
    if not np.any(ok):
        raise NumericalError("ray from well minimum never leaves the lobe")
    return float(np.min(roots.real[ok]))


def _area_polar(params, land, well):
    """Green's theorem in polar form about the well minimum: (1/2) closed-integral r^2 dtheta."""
    z0 = np.array(land.minimum(well)[:2])
    q_s = land.saddle[2]
    sdir = np.array(land.saddle[:2]) - z0
    theta_s = math.atan2(sdir[1], sdir[0])

    def r2(theta):
        coeffs = _line_poly(params, z0, (math.cos(theta), math.sin(theta)))
        coeffs[0] -= q_s
        return _first_root(coeffs) ** 2

    val, _ = integrate.quad(
        lambda t: 0.5 * r2(t), theta_s, theta_s + 2 * math.pi, limit=400, epsabs=0.0, epsrel=1e-11
    )
    return val


def lobe_area(params: ModelParams, well: Well | str, check: bool = True) -> float:
    """Phase-space area of the figure-eight lobe of ``well`` below the saddle.

    Iterated adaptive quadrature over slices (inner extent exact from the
    quartic's roots); cross-checked against a polar contour integral.
    """
    land = analyze_landscape(params)
    area = _area_slices(params, land, well)
    if check:
        other = _area_polar(params, land, well)
        if abs(area - other) > LOBE_CROSSCHECK_RTOL * max(abs(area), 1e-300):
            raise NumericalError(
                f"lobe area cross-check failed: slices {area:.10g} vs contour {other:.10g}"
            )
    return area


def lobe_action(params: ModelParams, well: Well | str, check: bool = True) -> float:
    """Action enclosed by one lobe of the separatrix, area / (2 pi)."""
    return lobe_area(params, well, check) / (2.0 * math.pi)


def separatrix_area(params: ModelParams) -> float:
    """Area of the full region {q < q_saddle} (both lobes)."""
    land = analyze_landscape(params)
    lo, hi = _edge(params, land, -1.0), _edge(params, land, 1.0)
    val, _ = integrate.quad(
        lambda u: _slice_length(params, land, u), lo, hi, points=[0.0], limit=400, epsabs=0.0, epsrel=1e-11
    )
    return val


def orbit_count(action: float) -> int:
    """Number of quantized orbits n with n + 1/2 <= action."""
    return max(0, math.floor(action + 0.5))


# ---------------------------------------------------------------------------
# EBK curves and resonances


@dataclass
class EBKCurve:
    n_quantum: int
    well: Well
    points: list[tuple[float, float]]  # (eps1, eps2)
    omitted: list[float] = field(default_factory=list)  # eps2 values with no root
    phi: float = 0.0

    def as_arrays(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        return pts[:, 0], pts[:, 1]


def _kpo_boundary(eps2, phi):
    if math.cos(phi) == 1.0 or phi == 0.0:
        return SQRT2 * (2.0 * eps2 / 3.0) ** 1.5
    return bistability_boundary(ModelParams.kpo(1.0, eps2, phi))


def ebk_root(n_quantum: int, well: Well | str, eps2: float, phi: float = 0.0, tol: float = 1e-8):
    """eps1 >= 0 where the lobe action equals n + 1/2, or None if no root exists."""
    well = Well(well)
    target = n_quantum + 0.5
    edge = _kpo_boundary(eps2, phi) * (1.0 - 1e-4)
    if edge <= 0:
        return None

    def f(e1):
        return lobe_action(ModelParams.kpo(e1, eps2, phi), well, check=False) - target

    try:
        f0, f1 = f(0.0), f(edge)
    except (BistabilityLostError, NumericalError):
        return None
    if abs(f0) <= 1e-9 * target:
        return 0.0
    if f0 * f1 > 0:
        return None
    root = optimize.brentq(f, 0.0, edge, xtol=tol, rtol=4 * np.finfo(float).eps)
    lobe_action(ModelParams.kpo(root, eps2, phi), well, check=True)
    return root


def ebk_curve(n_quantum: int, well: Well | str, eps2_values, phi: float = 0.0, tol: float = 1e-8) -> EBKCurve:
    """Points (eps1, eps2) where the ``well`` lobe holds exactly n + 1/2 action quanta.

    eps2 values without a root in the bistable range are listed in ``omitted``.
    """
    if n_quantum < 0:
        raise UsageError("n_quantum must be >= 0")
    curve = EBKCurve(int(n_quantum), Well(well), [], [], phi)
    for e2 in np.asarray(eps2_values, dtype=float):
        root = ebk_root(n_quantum, well, float(e2), phi, tol) if e2 > 0 else None
        if root is None:
            curve.omitted.append(float(e2))
        else:
            curve.points.append((root, float(e2)))
    return curve


def resonance_parabola(n: int, eps1):
    """eps2 = (eps1 / n)^2: level alignment A = n S with A ~ 4 eps1 sqrt(eps2), S ~ 4 eps2."""
    if int(n) != n or n < 1:
        raise UsageError("resonance index must be a positive integer (n = 0 is the eps1 = 0 line)")
    return (np.asarray(eps1, dtype=float) / n) ** 2


def resonance_eps1(n: int, eps2):
    """Inverse of :func:`resonance_parabola`."""
    if int(n) != n or n < 1:
        raise UsageError("resonance index must be a positive integer")
    return n * np.sqrt(np.asarray(eps2, dtype=float))


@dataclass(frozen=True)
class TriplePoint:
    n: int  # shallow-well quantum number
    m: int  # deep-well quantum number
    eps1: float
    eps2: float
    resonance: int  # parabola index
    deep_eps2_offset: float  # eps2 distance of the deep EBK curve m from the point


def triple_intersections(
    n_max: int,
    m_max: int,
    eps2_range: tuple[float, float],
    phi: float = 0.0,
    tolerance: float = 0.1,
) -> list[TriplePoint]:
    """Where a resonance parabola, a shallow EBK curve and a deep EBK curve meet.

    For each parabola k in 1..n_max and shallow quantum number n in 0..n_max
    the parabola/shallow-curve intersection is solved to 1e-6 along the
    parabola; the deep quantum number m <= m_max whose EBK curve passes
    within ``tolerance`` (in eps2) of that point is reported.
    """
    lo, hi = eps2_range
    if not hi > lo:
        raise UsageError("eps2_range must be a non-empty interval")
    out = []
    grid = np.linspace(max(lo, 1e-3), hi, 41)
    for k in range(1, n_max + 1):

        def shallow_on_parabola(e2):
            e1 = float(resonance_eps1(k, e2))
            return lobe_action(ModelParams.kpo(e1, e2, phi), Well.SHALLOW, check=False)

        actions = []
        for e2 in grid:
            try:
                actions.append(shallow_on_parabola(e2))
            except (BistabilityLostError, NumericalError):
                actions.append(math.nan)
        actions = np.array(actions)
        for n in range(0, n_max + 1):
            vals = actions - (n + 0.5)
            for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
                if not (math.isfinite(fa) and math.isfinite(fb)) or fa * fb > 0:
                    continue
                e2 = optimize.brentq(lambda v: shallow_on_parabola(v) - (n + 0.5), a, b, xtol=1e-9)
                e1 = float(resonance_eps1(k, e2))
                deep = lobe_action(ModelParams.kpo(e1, e2, phi), Well.DEEP)
                m = int(round(deep - 0.5))
                if m > m_max or m < 0:
                    continue
                offset = _deep_curve_offset(m, e1, e2, phi)
                if offset is not None and abs(offset) <= tolerance:
                    out.append(TriplePoint(n, m, e1, e2, k, offset))
    out.sort(key=lambda t: (t.eps2, t.eps1))
    return out


def _deep_curve_offset(m, eps1, eps2, phi):
    """eps2' - eps2 where eps2' puts the deep lobe at m + 1/2 for fixed eps1."""
    target = m + 0.5

    def f(e2):
        return lobe_action(ModelParams.kpo(eps1, e2, phi), Well.DEEP, check=False) - target

    lo, hi = max(eps2 - 2.0, 1e-3), eps2 + 2.0
    try:
        flo, fhi = f(lo), f(hi)
    except (BistabilityLostError, NumericalError):
        # shrink towards the point until the landscape stays bistable
        lo = eps2 - 0.5
        try:
            flo, fhi = f(lo), f(hi)
        except (BistabilityLostError, NumericalError):
            return None
    if flo * fhi > 0:
        return None
    return optimize.brentq(f, lo, hi, xtol=1e-9) - eps2


def rabi_frequency(eps1: float, eps2: float, with_flag: bool = False):
    """Well-to-well oscillation frequency used for drive calibration (units of K).

    4 eps1 sqrt(eps2) for eps2 >= 1 and 2 eps1 at eps2 = 0; in between the two
    limits are blended linearly, which is only a heuristic (flag returned
    when ``with_flag`` is set).
    """
    if eps2 < 0:
        raise UsageError("eps2 must be >= 0")
    large = 4.0 * eps1 * math.sqrt(eps2)
    if eps2 >= 1.0:
        value, heuristic = large, False
    elif eps2 == 0.0:
        value, heuristic = 2.0 * eps1, False
    else:
        value, heuristic = (1.0 - eps2) * 2.0 * eps1 + eps2 * large, True
    return (value, heuristic) if with_flag else value
