"""Radial diagnostics: H, D, frequency, Weiss energy, their identities and fits."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .fields import DomainError, ScalarField, homogeneous_extension, rescale
from .quadrature import boundary_mass, dirichlet_energies, sphere_sampling

W_NOISE_FLOOR = 1e-8
MONOTONE_SLACK = 1e-3
LAMBDA = 1.5


@dataclass
class RadialProfile:
    """Per-radius ``H``, ``D``, ``N = r D / H`` and ``W_{3/2}``."""

    x0: np.ndarray
    dim: int
    radii: np.ndarray
    H: np.ndarray
    D: np.ndarray
    N: np.ndarray
    W: np.ndarray
    fits: dict = field(default_factory=dict)

    def rows(self):
        for k in range(len(self.radii)):
            yield (self.radii[k], self.H[k], self.D[k], self.N[k], self.W[k])

    def to_csv(self, path) -> None:
        data = np.column_stack([self.radii, self.H, self.D, self.N, self.W])
        np.savetxt(path, data, delimiter=",", header="r,H,D,N,W", comments="", fmt="%.17g")


def weiss(D, H, r, dim: int, lam: float = LAMBDA):
    """``W_lam(r) = D / r^{n+2lam-2} - lam H / r^{n+2lam-1}``."""
    return D / r ** (dim + 2 * lam - 2) - lam * H / r ** (dim + 2 * lam - 1)


def validate_radii(u: ScalarField, x0, radii, min_factor: float = 4.0) -> np.ndarray:
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0:
        raise ValueError("radii must be a nonempty list")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    h = u.grid.spacing
    if radii[0] < min_factor * h * (1 - 1e-12):
        raise ValueError(f"smallest radius {radii[0]:.4g} is below {min_factor:g} grid spacings")
    reach = 1.0 - float(np.linalg.norm(x0))
    if radii[-1] > reach + 1e-12:
        raise DomainError(f"radius {radii[-1]:.4g} exceeds dist(x0, dB_1) = {reach:.4g}")
    return radii


def radial_profile(u: ScalarField, x0, radii, quality: Optional[float] = None,
                   lam: float = LAMBDA) -> RadialProfile:
    x0 = np.asarray(x0, dtype=float)
    radii = validate_radii(u, x0, radii)
    n = u.grid.dim
    H = np.array([boundary_mass(u, x0, r, quality) for r in radii])
    D = dirichlet_energies(u, x0, radii, quality)
    with np.errstate(divide="ignore", invalid="ignore"):
        N = np.where(H > 1e-300, radii * D / H, np.nan)
    W = weiss(D, H, radii, n, lam)
    return RadialProfile(x0, n, radii, H, D, N, W)


def is_nondecreasing(values, slack: float = MONOTONE_SLACK) -> bool:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    return bool(np.all(np.diff(v) >= -slack))


def _sphere_terms(u: ScalarField, x0, r: float, quality=None):
    s = sphere_sampling(u.grid.dim, x0, r, u.grid.spacing, quality)
    v, g = u.sample(s.nodes)
    dn = np.einsum("ij,ij->i", g, s.normals)
    gt2 = np.sum(g * g, axis=1) - dn * dn
    return s, v, dn, gt2


def _centered(f, r):
    """Three-point derivative on a nonuniform grid at interior nodes."""
    h1 = r[1:-1] - r[:-2]
    h2 = r[2:] - r[1:-1]
    return (-h2 / (h1 * (h1 + h2)) * f[:-2] + (h2 - h1) / (h1 * h2) * f[1:-1]
            + h1 / (h2 * (h1 + h2)) * f[2:])


def _radial_derivative(f, r):
    """Centered difference of ``f`` in ``log r`` against ``log f`` when ``f > 0``
    (exact for powers of ``r``), plain centered difference otherwise."""
    if np.all(f > 0):
        return f[1:-1] / r[1:-1] * _centered(np.log(f), np.log(r))
    return _centered(f, r)


def _rel(a, b, floor=1e-300):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


@dataclass
class IdentityReport:
    radii: np.ndarray
    H_prime: np.ndarray
    D_prime: np.ndarray
    D_surface: np.ndarray
    max_residual: dict

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual}


def check_identities(u: ScalarField, x0, radii, quality: Optional[float] = None,
                     abs_floor: float = 1e-12) -> IdentityReport:
    """Residuals of ``H' = (n-1)H/r + 2 int u u_nu``, ``D' = (n-2)D/r + 2 int u_nu^2``
    and ``D = int u u_nu``; derivatives by centered differences over ``radii``,
    taken in log-log variables for positive profiles so that the truncation
    error vanishes on homogeneous fields.

    Residuals are relative to the larger side, or to ``abs_floor`` when
    both sides vanish.
    """
    x0 = np.asarray(x0, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3:
        raise ValueError("need at least 3 radii")
    radii = validate_radii(u, x0, radii)
    n = u.grid.dim
    H = np.array([boundary_mass(u, x0, r, quality) for r in radii])
    D = dirichlet_energies(u, x0, radii, quality)
    uun = np.empty_like(radii)
    un2 = np.empty_like(radii)
    for k, r in enumerate(radii):
        s, v, dn, _ = _sphere_terms(u, x0, r, quality)
        uun[k] = s.integrate(v * dn)
        un2[k] = s.integrate(dn * dn)
    ri = radii[1:-1]
    Hp = _radial_derivative(H, radii)
    Dp = _radial_derivative(D, radii)
    rhs_H = (n - 1) * H[1:-1] / ri + 2 * uun[1:-1]
    rhs_D = (n - 2) * D[1:-1] / ri + 2 * un2[1:-1]
    res = {
        "H_prime": float(np.max(_rel(Hp, rhs_H, abs_floor))),
        "D_prime": float(np.max(_rel(Dp, rhs_D, abs_floor))),
        "D_surface": float(np.max(_rel(D, uun, abs_floor))),
    }
    return IdentityReport(radii, _rel(Hp, rhs_H, abs_floor), _rel(Dp, rhs_D, abs_floor),
                          _rel(D, uun, abs_floor), res)


# -- frequency ---------------------------------------------------------------

def default_small_radii(u: ScalarField, x0, count: int = 5, factor: float = 4.0,
                        ratio: float = 1.25) -> np.ndarray:
    r0 = factor * u.grid.spacing
    return r0 * ratio ** np.arange(count)


@dataclass
class FrequencyLimit:
    value: float
    radii: np.ndarray
    N: np.ndarray
    monotone: bool
    model: str

    def __float__(self):
        return self.value


def _power_model(r, n0, a, b):
    return n0 + a * r ** b


def frequency_limit(u: ScalarField, x0, radii: Optional[Sequence[float]] = None,
                    quality: Optional[float] = None, noise: float = MONOTONE_SLACK) -> FrequencyLimit:
    """Extrapolate ``N(r)`` to ``r -> 0`` with ``N0 + a r^b`` over the smallest radii."""
    x0 = np.asarray(x0, dtype=float)
    radii = default_small_radii(u, x0) if radii is None else np.asarray(radii, dtype=float)
    prof = radial_profile(u, x0, radii, quality)
    N = prof.N
    ok = np.isfinite(N)
    r, N_ok = radii[ok], N[ok]
    monotone = is_nondecreasing(N_ok, noise)
    if r.size == 0:
        return FrequencyLimit(float("nan"), radii, N, monotone, "undefined")
    if r.size < 3 or np.ptp(N_ok) < 1e-6:
        return FrequencyLimit(float(np.mean(N_ok)), radii, N, monotone, "constant")
    slope = (N_ok[-1] - N_ok[0]) / (r[-1] - r[0])
    p0 = (N_ok[0] - slope * r[0], slope, 1.0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            popt, _ = curve_fit(_power_model, r, N_ok, p0=p0,
                                bounds=([-np.inf, -np.inf, 0.25], [np.inf, np.inf, 4.0]),
                                maxfev=20000)
        n0 = float(popt[0])
        model = "power"
    except (RuntimeError, ValueError):
        n0 = float(N_ok[0] - slope * r[0])
        model = "linear"
    return FrequencyLimit(n0, radii, N, monotone, model)


# -- Weiss energy decay ---------------------------------------------------------

@dataclass
class DecayFit:
    C: float
    gamma: float
    n_points: int

    @property
    def cone_like(self) -> bool:
        return math.isinf(self.gamma)


def weiss_decay_fit(profile_or_radii, W=None, floor: float = W_NOISE_FLOOR) -> DecayFit:
    """Least squares ``log W = log C + gamma log r`` over radii with ``W > floor``.

    If no radius clears the floor the field is cone-like: ``gamma = inf``.
    """
    if W is None:
        radii, W = profile_or_radii.radii, profile_or_radii.W
    else:
        radii = profile_or_radii
    radii = np.asarray(radii, dtype=float)
    W = np.asarray(W, dtype=float)
    keep = np.isfinite(W) & (W > floor)
    if keep.sum() == 0:
        return DecayFit(0.0, math.inf, 0)
    if keep.sum() == 1:
        return DecayFit(float(W[keep][0]), float("nan"), 1)
    gamma, logc = np.polyfit(np.log(radii[keep]), np.log(W[keep]), 1)
    return DecayFit(float(math.exp(logc)), float(gamma), int(keep.sum()))


@dataclass
class Nondegeneracy:
    H0: float
    ratios: np.ndarray
    monotone: bool
    degenerate: bool

    @property
    def flagged(self) -> bool:
        return self.degenerate or not self.monotone


def nondegeneracy_constant(profile: RadialProfile, slack: float = MONOTONE_SLACK,
                           zero_floor: float = 1e-14) -> Nondegeneracy:
    """``H0 = min_r H(r) / r^{n+2}`` and whether the ratio is nondecreasing."""
    ratio = profile.H / profile.radii ** (profile.dim + 2)
    H0 = float(np.min(ratio))
    mono = bool(np.all(ratio[1:] >= ratio[:-1] * (1.0 - slack)))
    degenerate = H0 <= zero_floor
    if degenerate:
        H0 = 0.0
    return Nondegeneracy(H0, ratio, mono, degenerate)


# -- derivative decomposition ---------------------------------------------------

@dataclass
class DecompositionCheck:
    radii: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))


def weiss_derivative_terms(u: ScalarField, x0, r: float, quality=None) -> dict:
    """The pieces of ``dW/dr`` at radius ``r`` from a single sphere.

    ``W(1, c_r)`` uses the homogeneous extension of the trace of ``u_r``,
    ``defect`` is ``int_{dB_1} (grad u_r . nu - 3/2 u_r)^2``.
    """
    n = u.grid.dim
    s, v, dn, gt2 = _sphere_terms(u, x0, r, quality)
    scale = r ** (-(n + 2))
    Dc = scale * s.integrate(r * r * gt2 + 2.25 * v * v) / (n + 1)
    Hc = scale * s.integrate(v * v)
    defect = scale * s.integrate((r * dn - 1.5 * v) ** 2)
    return {"W_c": Dc - 1.5 * Hc, "defect": defect, "W_cone_D": Dc}


def weiss_decomposition(u: ScalarField, x0, radii, step: Optional[float] = None,
                        quality: Optional[float] = None) -> DecompositionCheck:
    """Compare a centered difference of ``W_{3/2}`` with
    ``(n+1)/r (W(1,c_r) - W(1,u_r)) + (1/r) int_{dB_1}(d_nu u_r - 3/2 u_r)^2``.
    """
    x0 = np.asarray(x0, dtype=float)
    n = u.grid.dim
    radii = np.asarray(radii, dtype=float)
    step = 2.0 * u.grid.spacing if step is None else step
    lhs, rhs = [], []
    for r in radii:
        rr = np.array([r - step, r, r + step])
        prof = radial_profile(u, x0, rr, quality)
        lhs.append((prof.W[2] - prof.W[0]) / (2 * step))
        t = weiss_derivative_terms(u, x0, r, quality)
        rhs.append((n + 1) / r * (t["W_c"] - prof.W[1]) + t["defect"] / r)
    lhs, rhs = np.array(lhs), np.array(rhs)
    return DecompositionCheck(radii, lhs, rhs, _rel(lhs, rhs))


# -- blowups -------------------------------------------------------------------

@dataclass
class BlowupReport:
    radii: np.ndarray
    differences: np.ndarray
    ratio: float
    cone_distances: np.ndarray
    amplitudes: np.ndarray
    directions: list

    def to_dict(self) -> dict:
        return {"radii": self.radii.tolist(), "differences": self.differences.tolist(),
                "ratio": self.ratio, "cone_distances": self.cone_distances.tolist(),
                "amplitudes": self.amplitudes.tolist(),
                "directions": [list(map(float, d)) for d in self.directions]}


def dyadic_radii(r0: float, K: int) -> np.ndarray:
    return r0 * 2.0 ** -np.arange(K + 1)


def geometric_rate(values, floor: float = 1e-12) -> float:
    """Per-step ratio ``exp(slope)`` of a log-linear fit; ``nan`` if too few points clear ``floor``."""
    v = np.asarray(values, dtype=float)
    k = np.arange(v.size)
    keep = v > floor
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(k[keep], np.log(v[keep]), 1)
    return float(math.exp(slope))


def blowup_sequence(u: ScalarField, x0, r0: float, K: int, quality: Optional[float] = None,
                    with_cone: bool = True, lam: float = LAMBDA) -> BlowupReport:
    """Dyadic rescalings ``u_{r_k}``, ``r_k = r0 2^{-k}``: successive trace
    differences ``int_{dB_1} |u_{r_k} - u_{r_{k+1}}|`` and cone distances of
    the homogeneous extensions."""
    from .blowups import dist_to_cone32

    if K < 2:
        raise ValueError("need K >= 2 halvings")
    x0 = np.asarray(x0, dtype=float)
    radii = dyadic_radii(r0, K)
    h = u.grid.spacing
    if radii[-1] < 4 * h * (1 - 1e-12):
        raise ValueError(f"r0 2^-K = {radii[-1]:.4g} is below 4 grid spacings")
    s = sphere_sampling(u.grid.dim, np.zeros(u.grid.dim), 1.0, h, quality)
    traces = []
    dists, amps, dirs = [], [], []
    for r in radii:
        ur = rescale(u, x0, r, lam)
        traces.append(ur(s.nodes))
        if with_cone:
            c = homogeneous_extension(u, x0, r, lam)
            cd = dist_to_cone32(c, quality=quality)
            dists.append(cd.dist)
            amps.append(cd.amplitude)
            dirs.append(cd.direction)
    diffs = np.array([s.integrate(np.abs(traces[k] - traces[k + 1])) for k in range(K)])
    return BlowupReport(radii, diffs, geometric_rate(diffs), np.array(dists), np.array(amps), dirs)


# -- regularity proxy ------------------------------------------------------------

def holder_seminorm_proxy(u: ScalarField, n_pairs: int = 4000, radius: float = 0.5,
                          seed: int = 0, min_sep: Optional[float] = None) -> float:
    """``sup |grad u(x) - grad u(y)| / |x - y|^{1/2} / |u|_{L^2(B_1)}`` over random
    pairs in the closed upper half of ``B_radius`` (the gradient of an even
    solution jumps across the coincidence set, so halves are treated apart)."""
    rng = np.random.default_rng(seed)
    n = u.grid.dim
    min_sep = 2.0 * u.grid.spacing if min_sep is None else min_sep

    def draw(k):
        p = rng.normal(size=(k, n))
        p /= np.linalg.norm(p, axis=1)[:, None]
        p *= radius * rng.random(k)[:, None] ** (1.0 / n)
        p[:, -1] = np.abs(p[:, -1])
        return p

    x, y = draw(n_pairs), draw(n_pairs)
    # half the pairs are near each other to probe small scales
    half = n_pairs // 2
    y[:half] = x[:half] + min_sep * rng.normal(size=(half, n)) * 4
    y[:half, -1] = np.abs(y[:half, -1])
    inside = np.linalg.norm(y, axis=1) <= radius
    x, y = x[inside], y[inside]
    d = np.linalg.norm(x - y, axis=1)
    keep = d >= min_sep
    x, y, d = x[keep], y[keep], d[keep]
    gx = u.sample(x)[1]
    gy = u.sample(y)[1]
    sem = float(np.max(np.linalg.norm(gx - gy, axis=1) / np.sqrt(d)))
    s_rho, wr = np.polynomial.legendre.leggauss(16)
    l2 = 0.0
    for p, w in zip(0.5 * (s_rho + 1), 0.5 * wr):
        sm = sphere_sampling(n, np.zeros(n), p, u.grid.spacing)
        l2 += w * sm.integrate(u(sm.nodes) ** 2)
    return sem / math.sqrt(l2)
