"""Periodic-orbit search, classification, realness and completeness audit.

Orbits of period dividing n are located as roots of f^n(z) - z by damped
Newton iteration over C^2, from a deterministic blend of grid and
low-discrepancy seeds confined to the filtration bidisk (all bounded
orbits live there).  Roots are deduplicated, grouped into cycles by
applying f, and every returned orbit passes an independent residual
recheck in extended precision.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import mpmath as mp
import numpy as np

from . import mapcore
from .errors import IllConditionedError, NotApplicableError
from .green import FiltrationCertificate, filtration_radius
from .mapcore import ComposedMap, Point2

_DIVERGE_FACTOR = 1e6     # |coord| beyond this times R counts as diverged
_SV_MULTIPLE_ROOT = 1e-6  # sigma_min(Df^n - I) below this flags multiplicity


class OrbitClass(Enum):
    SADDLE = "saddle"
    SINK = "sink"
    SOURCE = "source"
    INDIFFERENT = "indifferent"


class DuplicateCollisionWarning(UserWarning):
    """Two distinct orbits sit suspiciously close to each other."""


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic cycle; ``points`` has length equal to the exact period."""

    points: tuple[Point2, ...]
    requested_n: int
    residual: float
    multipliers: Optional[tuple[complex, complex]] = None  # (lambda_s, lambda_u)
    orbit_class: Optional[OrbitClass] = None
    realness: Optional[str] = None  # "real" | "nonreal"
    max_im: float = 0.0

    @property
    def period(self) -> int:
        return len(self.points)

    @property
    def is_lower_period(self) -> bool:
        """True when the exact period is a proper divisor of the request."""
        return self.period < self.requested_n

    def conj(self) -> "PeriodicOrbit":
        return replace(self, points=tuple(p.conj() for p in self.points))


@dataclass
class SearchStats:
    seeds_used: int = 0
    rounds_run: int = 0
    converged_points: int = 0
    distinct_points: int = 0
    nonconverged: int = 0
    orbit_count: int = 0
    collisions: int = 0
    recheck_failures: int = 0


@dataclass
class OrbitSearch:
    orbits: list
    stats: SearchStats


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------

def _halton(index: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(index.shape, dtype=float)
    f = 1.0
    i = index.astype(np.int64).copy()
    while np.any(i > 0):
        f /= base
        out += f * (i % base)
        i //= base
    return out


def _nested_grid_axis(density: int, r: float) -> np.ndarray:
    # 2^k + 1 points so denser grids contain sparser ones
    k = max(2, math.ceil(math.log2(max(density - 1, 2))))
    return np.linspace(-r, r, 2 ** k + 1)


def _make_seeds(m: ComposedMap, density: int, r: float, seed: int):
    """Deterministic seed cloud: 4D Halton prefix, coarse complex grid,
    a real-plane grid for real maps, and a seeded uniform cloud."""
    chunks = []
    n_halton = density * density
    idx = np.arange(1, n_halton + 1)
    h = np.stack([_halton(idx, b) for b in (2, 3, 5, 7)], axis=1)
    pts = (2 * h - 1) * r
    chunks.append(pts[:, 0] + 1j * pts[:, 1])
    chunks_y = [pts[:, 2] + 1j * pts[:, 3]]

    q = max(3, density // 8)
    g = np.linspace(-r, r, q)
    xr, xi, yr, yi = np.meshgrid(g, g, g, g, indexing="ij")
    chunks.append((xr + 1j * xi).ravel())
    chunks_y.append((yr + 1j * yi).ravel())

    if m.is_real:
        axis = _nested_grid_axis(density, r)
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        chunks.append(gx.ravel().astype(complex))
        chunks_y.append(gy.ravel().astype(complex))

    rng = np.random.default_rng(seed)
    n_rand = density * density
    u = rng.uniform(-r, r, size=(n_rand, 4))
    chunks.append(u[:, 0] + 1j * u[:, 1])
    chunks_y.append(u[:, 2] + 1j * u[:, 3])

    return np.concatenate(chunks), np.concatenate(chunks_y)


# ---------------------------------------------------------------------------
# damped Newton on f^n(z) - z
# ---------------------------------------------------------------------------

def _residual2(m: ComposedMap, X, Y, n: int):
    FX, FY = X, Y
    with np.errstate(all="ignore"):
        for _ in range(n):
            FX, FY = mapcore._apply_xy(m, FX, FY)
        r2 = np.abs(FX - X) ** 2 + np.abs(FY - Y) ** 2
    return np.where(np.isfinite(r2), r2, np.inf)


def _newton_periodic(m: ComposedMap, n: int, X, Y, tol: float, itmax: int,
                     box: float):
    """Vectorized damped Newton with a backtracking line search on |g|^2."""
    X = X.astype(complex, copy=True)
    Y = Y.astype(complex, copy=True)
    r2 = _residual2(m, X, Y, n)
    tol2 = tol * tol
    with np.errstate(all="ignore"):
        for _ in range(itmax):
            live = (r2 >= tol2) & np.isfinite(r2)
            if not live.any():
                break
            idx = np.flatnonzero(live)
            x, y = X[idx], Y[idx]
            FX, FY, a11, a12, a21, a22 = mapcore._fn_with_jac(m, x, y, n)
            gx = FX - x
            gy = FY - y
            det = (a11 - 1) * (a22 - 1) - a12 * a21
            ok = np.isfinite(det) & (np.abs(det) > 1e-280) \
                & np.isfinite(gx) & np.isfinite(gy)
            det = np.where(ok, det, 1.0)
            dx = np.where(ok, (-gx * (a22 - 1) + gy * a12) / det, 0.0)
            dy = np.where(ok, (-(a11 - 1) * gy + a21 * gx) / det, 0.0)
            lam = np.ones(dx.shape)
            xn = x + dx
            yn = y + dy
            r2n = _residual2(m, xn, yn, n)
            r2o = r2[idx]
            for _ in range(24):
                worse = r2n > (1 - 0.25 * lam) * r2o
                if not worse.any():
                    break
                lam = np.where(worse, 0.5 * lam, lam)
                xn = np.where(worse, x + lam * dx, xn)
                yn = np.where(worse, y + lam * dy, yn)
                r2n = _residual2(m, xn, yn, n)
            accept = r2n <= r2o
            xn = np.where(accept, xn, x)
            yn = np.where(accept, yn, y)
            r2n = np.where(accept, r2n, r2o)
            # park seeds that left the search box far behind
            gone = (np.abs(xn) > _DIVERGE_FACTOR * box) | (np.abs(yn) > _DIVERGE_FACTOR * box)
            r2n = np.where(gone, np.inf, r2n)
            X[idx] = xn
            Y[idx] = yn
            r2[idx] = r2n
    return X, Y, np.sqrt(r2)


def _polish(m: ComposedMap, n: int, x: complex, y: complex, steps: int = 3):
    for _ in range(steps):
        X = np.array([x])
        Y = np.array([y])
        FX, FY, a11, a12, a21, a22 = mapcore._fn_with_jac(m, X, Y, n)
        gx = complex(FX[0] - x)
        gy = complex(FY[0] - y)
        det = complex((a11[0] - 1) * (a22[0] - 1) - a12[0] * a21[0])
        if det == 0 or not np.isfinite(abs(det)):
            break
        x = x + (-gx * complex(a22[0] - 1) + gy * complex(a12[0])) / det
        y = y + (-complex(a11[0] - 1) * gy + complex(a21[0]) * gx) / det
    return x, y


# ---------------------------------------------------------------------------
# dedup + cycle assembly
# ---------------------------------------------------------------------------

def _dedup_points(xs, ys, eps: float):
    order = np.lexsort((ys.imag, ys.real, xs.imag, xs.real))
    reps = []
    for i in order:
        zx, zy = xs[i], ys[i]
        hit = False
        for rx, ry in reps:
            if max(abs(zx - rx), abs(zy - ry)) < eps:
                hit = True
                break
        if not hit:
            reps.append((zx, zy))
    return reps


def _orbit_residual_mp(m: ComposedMap, pts, prec: int = 120) -> float:
    k = len(pts)
    worst = mp.mpf(0)
    with mp.workprec(prec):
        for j in range(k):
            fx, fy = mapcore.apply_mp(m, pts[j][0], pts[j][1], prec=prec)
            nxt = pts[(j + 1) % k]
            worst = max(worst, abs(fx - mp.mpc(nxt[0])), abs(fy - mp.mpc(nxt[1])))
    return float(worst)


def _refine_orbit_mp(m: ComposedMap, x, y, n: int, prec: int = 160, steps: int = 6):
    """Extended-precision Newton refinement of a root of f^n - id."""
    with mp.workprec(prec):
        x, y = mp.mpc(x), mp.mpc(y)
        for _ in range(steps):
            jx, jy = x, y
            J = [[mp.mpc(1), mp.mpc(0)], [mp.mpc(0), mp.mpc(1)]]
            for _ in range(n):
                Jf = mapcore.derivative_mp(m, jx, jy, prec=prec)
                J = [[Jf[0][0] * J[0][0] + Jf[0][1] * J[1][0],
                      Jf[0][0] * J[0][1] + Jf[0][1] * J[1][1]],
                     [Jf[1][0] * J[0][0] + Jf[1][1] * J[1][0],
                      Jf[1][0] * J[0][1] + Jf[1][1] * J[1][1]]]
                jx, jy = mapcore.apply_mp(m, jx, jy, prec=prec)
            gx, gy = jx - x, jy - y
            a11, a12 = J[0][0] - 1, J[0][1]
            a21, a22 = J[1][0], J[1][1] - 1
            det = a11 * a22 - a12 * a21
            if det == 0:
                break
            x = x + (-gx * a22 + gy * a12) / det
            y = y + (-a11 * gy + a21 * gx) / det
        return complex(x), complex(y)


def _assemble_orbits(m: ComposedMap, reps, n: int, tol: float, dedup_eps: float,
                     stats: SearchStats):
    match_eps = max(10 * dedup_eps, 1e3 * tol)
    pool = list(reps)
    used = [False] * len(pool)
    orbits = []
    divisors = [k for k in range(1, n + 1) if n % k == 0]
    for i, (zx, zy) in enumerate(pool):
        if used[i]:
            continue
        # forward orbit images z, f(z), ..., f^n(z)
        orb = [(zx, zy)]
        cx, cy = zx, zy
        for _ in range(n):
            pt = mapcore.apply(m, Point2(cx, cy))
            cx, cy = pt.x, pt.y
            orb.append((cx, cy))
        # exact period: minimal divisor k of n with f^k(z) = z
        k = n
        for cand in divisors:
            tx, ty = orb[cand]
            if max(abs(tx - zx), abs(ty - zy)) < match_eps:
                k = cand
                break
        cycle = orb[:k]
        # mark every rep that belongs to this cycle as used
        for (px, py) in cycle:
            for j, (rx, ry) in enumerate(pool):
                if not used[j] and max(abs(px - rx), abs(py - ry)) < match_eps:
                    used[j] = True
        res = _orbit_residual_mp(m, cycle)
        if res > tol:
            rx, ry = _refine_orbit_mp(m, cycle[0][0], cycle[0][1], k)
            cycle = [(rx, ry)]
            cx, cy = rx, ry
            for _ in range(k - 1):
                pt = mapcore.apply(m, Point2(cx, cy))
                cx, cy = pt.x, pt.y
                cycle.append((cx, cy))
            res = _orbit_residual_mp(m, cycle)
            if res > tol:
                stats.recheck_failures += 1
                continue
        # canonical rotation: start at the lexicographically smallest point
        keys = [(p[0].real, p[0].imag, p[1].real, p[1].imag) for p in cycle]
        start = min(range(k), key=lambda j: keys[j])
        cycle = cycle[start:] + cycle[:start]
        orbits.append(PeriodicOrbit(
            points=tuple(Point2(px, py) for px, py in cycle),
            requested_n=n, residual=res))
    # collision scan
    flat = [(p.x, p.y, oi) for oi, o in enumerate(orbits) for p in o.points]
    for i in range(len(flat)):
        for j in range(i + 1, len(flat)):
            if flat[i][2] == flat[j][2]:
                continue
            if max(abs(flat[i][0] - flat[j][0]), abs(flat[i][1] - flat[j][1])) < 10 * dedup_eps:
                stats.collisions += 1
                warnings.warn("two distinct orbits closer than 10*dedup_eps",
                              DuplicateCollisionWarning)
    orbits.sort(key=lambda o: (o.period, o.points[0].x.real, o.points[0].x.imag,
                               o.points[0].y.real, o.points[0].y.imag))
    return orbits


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def find_periodic_orbits_detailed(m: ComposedMap, n: int, *,
                                  seed_density: int = 24,
                                  tol: float = 1e-10,
                                  newton_max: int = 80,
                                  dedup_eps: float = 1e-8,
                                  seed: int = 0,
                                  escalate: bool = True,
                                  max_rounds: int = 3,
                                  classify: bool = True,
                                  eta: float = 1e-3,
                                  tol_im: float = 1e-8,
                                  cert: Optional[FiltrationCertificate] = None) -> OrbitSearch:
    """find_periodic_orbits plus seed/convergence statistics."""
    if n < 1:
        raise ValueError("period bound n must be >= 1")
    if cert is None:
        cert = filtration_radius(m)
    box = cert.radius * 1.05
    stats = SearchStats()
    conv_x = np.empty(0, dtype=complex)
    conv_y = np.empty(0, dtype=complex)
    orbits: list[PeriodicOrbit] = []
    density = seed_density
    for rnd in range(max(1, max_rounds)):
        X0, Y0 = _make_seeds(m, density, box, seed)
        stats.seeds_used += len(X0)
        stats.rounds_run = rnd + 1
        X, Y, r = _newton_periodic(m, n, X0, Y0, tol, newton_max, box)
        good = r < tol
        stats.nonconverged += int((~good).sum())
        stats.converged_points += int(good.sum())
        conv_x = np.concatenate([conv_x, X[good]])
        conv_y = np.concatenate([conv_y, Y[good]])
        reps = _dedup_points(conv_x, conv_y, dedup_eps)
        if reps:
            polished = [_polish(m, n, zx, zy) for zx, zy in reps]
            reps = _dedup_points(np.array([p[0] for p in polished]),
                                 np.array([p[1] for p in polished]), dedup_eps)
        orbits = _assemble_orbits(m, reps, n, tol, dedup_eps, stats)
        found_count = sum(o.period for o in orbits)
        if not escalate or found_count >= m.degree ** n:
            break
        density *= 2
    stats.distinct_points = sum(o.period for o in orbits)
    stats.orbit_count = len(orbits)
    if classify:
        orbits = [classify_orbit(m, o, eta=eta) for o in orbits]
        if m.is_real:
            orbits = [realness_verdict(m, o, tol_im=tol_im) for o in orbits]
    return OrbitSearch(orbits=orbits, stats=stats)


def find_periodic_orbits(m: ComposedMap, n: int, **opts) -> list[PeriodicOrbit]:
    """All periodic orbits of period dividing n found in the bidisk.

    Each orbit satisfies residual < tol (rechecked in extended precision),
    lower-period orbits are kept with their exact period, and the list is
    deterministically ordered.
    """
    return find_periodic_orbits_detailed(m, n, **opts).orbits


def _expanding_eig(m: ComposedMap, points, forward: bool) -> complex:
    """Largest-modulus eigenvalue of the derivative product along a cycle,
    with periodic rebalancing (scale factors kept in log space)."""
    M = np.eye(2, dtype=complex)
    logscale = 0.0
    k = len(points)
    if forward:
        seq = points
    else:
        seq = tuple(points[-j % k] for j in range(k))  # p, f^-1 p, f^-2 p, ...
    for p in seq:
        J = (mapcore.derivative(m, p) if forward
             else mapcore.derivative_inverse(m, p))
        M = J @ M
        s = np.max(np.abs(M))
        if not np.isfinite(s) or s == 0.0:
            raise IllConditionedError("derivative product left the double range")
        if s > 1e100:
            M = M / s
            logscale += math.log(s)
    lam = mapcore.eig2(M)[1]
    if logscale > 700:
        raise IllConditionedError("multiplier magnitude exceeds double range")
    return lam * math.exp(logscale)


def _multipliers_double(m: ComposedMap, orbit: PeriodicOrbit):
    """(lambda_s, lambda_u) of the cycle derivative.

    The expanding eigenvalue of a product is well-conditioned, so lambda_u
    comes from the forward product and lambda_s as the reciprocal of the
    inverse product's expanding eigenvalue; extracting the small
    eigenvalue from the forward product directly would cancel
    catastrophically for strongly dissipative cycles.
    """
    lam_u = complex(_expanding_eig(m, orbit.points, forward=True))
    lam_s = complex(1.0 / _expanding_eig(m, orbit.points, forward=False))
    if abs(lam_s) > abs(lam_u):
        lam_s, lam_u = lam_u, lam_s
    return lam_s, lam_u


def _multipliers_mp(m: ComposedMap, orbit: PeriodicOrbit, prec: int = 160):
    with mp.workprec(prec):
        M = [[mp.mpc(1), mp.mpc(0)], [mp.mpc(0), mp.mpc(1)]]
        for p in orbit.points:
            J = mapcore.derivative_mp(m, p.x, p.y, prec=prec)
            M = [[J[0][0] * M[0][0] + J[0][1] * M[1][0],
                  J[0][0] * M[0][1] + J[0][1] * M[1][1]],
                 [J[1][0] * M[0][0] + J[1][1] * M[1][0],
                  J[1][0] * M[0][1] + J[1][1] * M[1][1]]]
        tr = M[0][0] + M[1][1]
        det = M[0][0] * M[1][1] - M[0][1] * M[1][0]
        disc = mp.sqrt(tr * tr - 4 * det)
        l1 = (tr + disc) / 2
        l2 = (tr - disc) / 2
        if abs(l1) >= abs(l2) and l1 != 0:
            l2 = det / l1
        elif l2 != 0:
            l1 = det / l2
        pair = sorted([complex(l1), complex(l2)], key=abs)
        return pair[0], pair[1]


def classify_orbit(m: ComposedMap, orbit: PeriodicOrbit,
                   eta: float = 1e-3) -> PeriodicOrbit:
    """Attach multipliers (eigenvalues of the cycle derivative product,
    |lambda_s| <= |lambda_u|) and the saddle/sink/source/indifferent class."""
    try:
        lam_s, lam_u = _multipliers_double(m, orbit)
    except IllConditionedError:
        lam_s, lam_u = _multipliers_mp(m, orbit)
    if abs(abs(lam_s) - 1) <= eta or abs(abs(lam_u) - 1) <= eta:
        cls = OrbitClass.INDIFFERENT
    elif abs(lam_s) < 1 and abs(lam_u) > 1:
        cls = OrbitClass.SADDLE
    elif abs(lam_u) < 1:
        cls = OrbitClass.SINK
    else:
        cls = OrbitClass.SOURCE
    return replace(orbit, multipliers=(lam_s, lam_u), orbit_class=cls)


def realness_verdict(m: ComposedMap, orbit: PeriodicOrbit,
                     tol_im: float = 1e-8) -> PeriodicOrbit:
    """Real iff every orbit point has |Im| below tol_im in both coordinates."""
    if not m.is_real:
        raise NotApplicableError("realness verdicts require a real-coefficient map")
    mx = max(p.max_im() for p in orbit.points)
    verdict = "real" if mx < tol_im else "nonreal"
    return replace(orbit, realness=verdict, max_im=mx)


@dataclass(frozen=True)
class CompletenessAudit:
    expected: int
    found_count: int
    missing: int
    multiplicity_flags: tuple


def completeness_audit(m: ComposedMap, n: int, found) -> CompletenessAudit:
    """Compare the number of distinct solutions of f^n(z) = z against d^n.

    Orbits whose Newton system is nearly singular at a root are flagged as
    possible multiple roots; a shortfall is reported, never raised.
    """
    expected = m.degree ** n
    count = sum(o.period for o in found)
    flags = []
    for i, o in enumerate(found):
        X = np.array([o.points[0].x])
        Y = np.array([o.points[0].y])
        _, _, a11, a12, a21, a22 = mapcore._fn_with_jac(m, X, Y, n)
        A = np.array([[a11[0] - 1, a12[0]], [a21[0], a22[0] - 1]])
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] < _SV_MULTIPLE_ROOT:
            flags.append((i, float(sv[-1])))
    return CompletenessAudit(expected=expected, found_count=count,
                             missing=max(0, expected - count),
                             multiplicity_flags=tuple(flags))
