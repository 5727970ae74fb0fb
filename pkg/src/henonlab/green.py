"""Escape filtration and certified evaluation of the Green functions.

G^+ measures the rate of forward escape: it is 0 exactly on the set of
points with bounded forward orbit and satisfies G^+ о f = d * G^+.  The
evaluator iterates the map until the orbit enters the escape region

    V+ = { |y| >= max(|x|, R) },

where a certified radius R makes every factor at least double |y| while
staying in V+.  From there a geometric tail bound turns finitely many
iterations into a value with an explicit error bound.  G^- uses the same
machinery on the inverse map (escape region {|x| >= max(|y|, R)}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import mpmath as mp
import numpy as np

from . import mapcore
from .errors import InternalInvariantError
from .mapcore import HUGE, ComposedMap, Point2, as_point, inverse_composed

# refinement iterations allowed past n_max once an orbit has escaped;
# overflow terminates the loop long before this at degree >= 2
_EXTRA_REFINE = 256


class OrbitStatus(Enum):
    ESCAPED = "escaped"
    BOUNDED = "bounded"


@dataclass(frozen=True)
class FiltrationCertificate:
    """Radius R and growth data certifying the escape region V+.

    For every factor, rho(R) < 1/2 and |c_d| R^(d-1) (1 - rho(R)) >= 2,
    so one factor application on V+ at least doubles |y| and stays in V+.
    """

    radius: float
    growth_ratio: float
    region: str = "abs(y) >= max(abs(x), R)"

    def contains(self, z) -> bool:
        z = as_point(z)
        return abs(z.y) >= max(abs(z.x), self.radius)


def factor_rho(factor, r):
    """rho(r) = (sum_{j<d} |c_j| r^(j-d) + |delta| r^(1-d)) / |c_d|.

    Monotone nonincreasing in r; the relative size of the non-leading
    terms of p(y) - delta*x on V+ at |y| = r.
    """
    d = factor.degree
    c = factor.p_coeffs
    r = np.asarray(r, dtype=float)
    s = np.zeros_like(r)
    for j in range(d):
        s = s + abs(c[j]) * r ** (j - d)
    s = s + abs(factor.delta) * r ** (1 - d)
    out = s / abs(c[d])
    return out if out.shape else float(out)


def _factor_ok(factor, r: float) -> bool:
    rho = factor_rho(factor, r)
    if not rho < 0.5:
        return False
    growth = abs(factor.p_coeffs[-1]) * r ** (factor.degree - 1) * (1 - rho)
    return growth >= 2.0


def filtration_radius(m: ComposedMap) -> FiltrationCertificate:
    """Smallest radius located by doubling-and-bisection that certifies V+."""
    r = 1.0
    while not all(_factor_ok(f, r) for f in m.factors):
        r *= 2.0
        if r > 1e120:
            raise InternalInvariantError("filtration radius search diverged")
    lo, hi = r / 2.0, r
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if all(_factor_ok(f, mid) for f in m.factors):
            hi = mid
        else:
            lo = mid
    rho = max(float(factor_rho(f, hi)) for f in m.factors)
    return FiltrationCertificate(radius=hi, growth_ratio=rho)


@dataclass(frozen=True)
class GreenEstimate:
    """A certified pointwise value of G^+ or G^-.

    ESCAPED results carry |value - G| <= err_bound.  BOUNDED means escape
    was not observed within n_max iterations; value is 0 and the error
    beyond that horizon is unknown (err_bound = inf).
    """

    value: float
    n_used: int
    err_bound: float
    status: OrbitStatus


@dataclass(frozen=True)
class OrbitFate:
    status: OrbitStatus
    n: int


# ---------------------------------------------------------------------------
# tail constants
# ---------------------------------------------------------------------------

def _tail_weights(m: ComposedMap):
    """Per-factor weights w_i = product of the degrees of later factors."""
    degs = m.factor_degrees
    w = []
    for i in range(len(degs)):
        prod = 1
        for dj in degs[i + 1:]:
            prod *= dj
        w.append(prod)
    return w


def _tail_log_leading(m: ComposedMap) -> float:
    """Deterministic part of the tail: sum_i w_i log|c_d,i|.

    Feeding the geometric series, it contributes B * d^-n / (d - 1) to the
    limit and is added to the estimate exactly rather than bounded.
    """
    w = _tail_weights(m)
    return sum(wi * math.log(abs(f.p_coeffs[-1])) for wi, f in zip(w, m.factors))


def _tail_err_const(m: ComposedMap, r):
    """Error constant C(r) = sum_i w_i (|log(1-rho_i)| + |log(1+rho_i)|).

    rho_i is evaluated at the current iterate magnitude r >= R; since rho
    is nonincreasing and |y| only grows in V+, this bounds every later
    per-step error, so |G - estimate| <= C(r) d^-n / (d-1).
    """
    w = _tail_weights(m)
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    for wi, f in zip(w, m.factors):
        rho = factor_rho(f, r)
        rho = np.minimum(rho, 0.999999)
        out = out + wi * (np.abs(np.log1p(-rho)) + np.log1p(rho))
    return out if out.shape else float(out)


# ---------------------------------------------------------------------------
# the vectorized escape engine
# ---------------------------------------------------------------------------

_ST_ACTIVE = -1
_ST_BOUNDED = 0
_ST_ESCAPED = 1
_ST_OVERFLOW = 2  # escaped, finalized early at the last finite iterate


def green_values(m: ComposedMap, X, Y, tol: float = 1e-10, n_max: int = 200,
                 cert: Optional[FiltrationCertificate] = None):
    """Evaluate G^+ on coordinate arrays.

    Returns (value, err_bound, n_used, status) arrays; status codes are
    0 bounded-up-to-n_max, 1 escaped, 2 escaped-with-overflow-cutoff.
    """
    if cert is None:
        cert = filtration_radius(m)
    R = cert.radius
    d = m.degree
    B = _tail_log_leading(m)

    X = np.array(X, dtype=complex, copy=True)
    Y = np.array(Y, dtype=complex, copy=True)
    shape = X.shape
    X = X.ravel()
    Y = Y.ravel()
    n = np.zeros(X.shape, dtype=np.int64)
    status = np.full(X.shape, _ST_ACTIVE, dtype=np.int8)
    escaped = np.zeros(X.shape, dtype=bool)
    value = np.zeros(X.shape, dtype=float)
    err = np.full(X.shape, math.inf, dtype=float)

    def finalize(idx, code):
        absy = np.abs(Y[idx])
        scale = d ** (-n[idx].astype(float))
        value[idx] = np.maximum(scale * np.log(absy) + B * scale / (d - 1), 0.0)
        err[idx] = _tail_err_const(m, np.maximum(absy, R)) * scale / (d - 1)
        status[idx] = code

    with np.errstate(all="ignore"):
        for _ in range(n_max + _EXTRA_REFINE):
            active = status == _ST_ACTIVE
            if not active.any():
                break
            absx = np.abs(X)
            absy = np.abs(Y)
            newly = active & ~escaped & (absy >= np.maximum(absx, R))
            escaped |= newly
            # certified-enough escaped cells are done
            ref = active & escaped
            if ref.any():
                scale = d ** (-n[ref].astype(float))
                eb = _tail_err_const(m, np.maximum(absy[ref], R)) * scale / (d - 1)
                done_idx = np.flatnonzero(ref)[eb <= tol]
                if done_idx.size:
                    finalize(done_idx, _ST_ESCAPED)
                    active = status == _ST_ACTIVE
            # out of horizon without escape
            out = active & ~escaped & (n >= n_max)
            if out.any():
                status[out] = _ST_BOUNDED
                value[out] = 0.0
                err[out] = math.inf
                active = status == _ST_ACTIVE
            if not active.any():
                break
            # one map application for everything still active
            idx = np.flatnonzero(active)
            X2, Y2 = mapcore._apply_xy(m, X[idx], Y[idx])
            bad = ~(np.isfinite(X2.real) & np.isfinite(X2.imag)
                    & np.isfinite(Y2.real) & np.isfinite(Y2.imag)
                    & (np.abs(Y2) < HUGE) & (np.abs(X2) < HUGE))
            if bad.any():
                # escape is certain; finalize from the last finite iterate
                finalize(idx[bad], _ST_OVERFLOW)
                good = ~bad
                idx = idx[good]
                X2 = X2[good]
                Y2 = Y2[good]
            X[idx] = X2
            Y[idx] = Y2
            n[idx] += 1
        still = status == _ST_ACTIVE
        if still.any():
            # escaped but the bound never met tol within the refine budget
            finalize(np.flatnonzero(still), _ST_OVERFLOW)

    return (value.reshape(shape), err.reshape(shape),
            n.reshape(shape), status.reshape(shape))


def _estimate_from_arrays(value, err, n, status) -> GreenEstimate:
    st = OrbitStatus.BOUNDED if int(status) == _ST_BOUNDED else OrbitStatus.ESCAPED
    return GreenEstimate(value=float(value), n_used=int(n),
                         err_bound=float(err), status=st)


def _raw_xy(z):
    # extended precision accepts raw mp pairs: coercing through Point2
    # would round a refined point back to double accuracy
    if isinstance(z, Point2):
        return z.x, z.y
    if isinstance(z, (tuple, list)) and len(z) == 2:
        return z[0], z[1]
    z = as_point(z)
    return z.x, z.y


def green_plus(m: ComposedMap, z, tol: float = 1e-10, n_max: int = 200,
               cert: Optional[FiltrationCertificate] = None,
               precision: str = "double", prec_bits: int = 120) -> GreenEstimate:
    """Certified value of G^+ at a point."""
    if precision == "extended":
        x, y = _raw_xy(z)
        return _green_mp(m, x, y, tol, n_max, cert, prec=prec_bits)
    z = as_point(z)
    v, e, n, s = green_values(m, np.array([z.x]), np.array([z.y]),
                              tol=tol, n_max=n_max, cert=cert)
    return _estimate_from_arrays(v[0], e[0], n[0], s[0])


def green_minus(m: ComposedMap, z, tol: float = 1e-10, n_max: int = 200,
                cert: Optional[FiltrationCertificate] = None,
                precision: str = "double", prec_bits: int = 120) -> GreenEstimate:
    """Certified value of G^-: G^+ of the inverse map at swapped coordinates."""
    g = inverse_composed(m)
    if precision == "extended":
        x, y = _raw_xy(z)
        return _green_mp(m, x, y, tol, n_max, cert, prec=prec_bits,
                         backward=True)
    z = as_point(z)
    v, e, n, s = green_values(g, np.array([z.y]), np.array([z.x]),
                              tol=tol, n_max=n_max, cert=cert)
    return _estimate_from_arrays(v[0], e[0], n[0], s[0])


def _green_mp(m: ComposedMap, x, y, tol, n_max,
              cert: Optional[FiltrationCertificate], prec: int = 120,
              backward: bool = False) -> GreenEstimate:
    """Scalar extended-precision version of the escape engine.

    The backward side iterates the exact inverse of the given map
    (apply_inverse_mp) rather than the double-rounded composed inverse,
    so refined periodic points stay fixed to working precision; tail
    constants still come from the composed inverse (their rounding only
    perturbs the value at the e-16 level).
    """
    tail_src = inverse_composed(m) if backward else m
    if cert is None:
        cert = filtration_radius(tail_src)
    R = cert.radius
    d = m.degree
    B = _tail_log_leading(tail_src)

    def grown(xx, yy):
        return abs(xx) if backward else abs(yy)

    def other(xx, yy):
        return abs(yy) if backward else abs(xx)

    with mp.workprec(prec):
        x, y = mp.mpc(x), mp.mpc(y)
        n = 0
        escaped = False
        while True:
            if not escaped and grown(x, y) >= max(other(x, y), R):
                escaped = True
            if escaped:
                g = float(grown(x, y))
                eb = _tail_err_const(tail_src, max(g, R)) * d ** (-n) / (d - 1)
                if eb <= tol or n > n_max + _EXTRA_REFINE:
                    val = float(mp.log(grown(x, y)) * mp.mpf(d) ** (-n)
                                + B * d ** (-n) / (d - 1))
                    return GreenEstimate(value=max(val, 0.0), n_used=n,
                                         err_bound=float(eb),
                                         status=OrbitStatus.ESCAPED)
            elif n >= n_max:
                return GreenEstimate(value=0.0, n_used=n_max, err_bound=math.inf,
                                     status=OrbitStatus.BOUNDED)
            if backward:
                x, y = mapcore.apply_inverse_mp(m, x, y, prec=prec)
            else:
                x, y = mapcore.apply_mp(m, x, y, prec=prec)
            n += 1


def bounded_orbit_test(m: ComposedMap, z, n_max: int = 200,
                       cert: Optional[FiltrationCertificate] = None,
                       backward: bool = False) -> OrbitFate:
    """Escape detection only: ESCAPED(n) at the first entry into V+.

    BOUNDED guarantees no entry into the escape region up to n_max, which
    confines the tail of the orbit to the radius-R bidisk.
    """
    z = as_point(z)
    if backward:
        m = inverse_composed(m)
        x, y = z.y, z.x
    else:
        x, y = z.x, z.y
    if cert is None:
        cert = filtration_radius(m)
    R = cert.radius
    for n in range(n_max + 1):
        if abs(y) >= max(abs(x), R):
            return OrbitFate(OrbitStatus.ESCAPED, n)
        if n == n_max:
            break
        xn, yn = mapcore._apply_xy(m, np.complex128(x), np.complex128(y))
        x, y = complex(xn), complex(yn)
        if not (abs(x) < HUGE and abs(y) < HUGE):
            return OrbitFate(OrbitStatus.ESCAPED, n + 1)
    return OrbitFate(OrbitStatus.BOUNDED, n_max)


# ---------------------------------------------------------------------------
# planar slices and rasters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AffineSlice:
    """Affine embedding of a planar (u, v) parameter domain into C^2."""

    base: Point2
    dir1: tuple[complex, complex]
    dir2: tuple[complex, complex]

    def __post_init__(self):
        d1 = (complex(self.dir1[0]), complex(self.dir1[1]))
        d2 = (complex(self.dir2[0]), complex(self.dir2[1]))
        # reject linearly dependent directions over R (2x4 real rank check)
        a = np.array([[d1[0].real, d1[1].real, d1[0].imag, d1[1].imag],
                      [d2[0].real, d2[1].real, d2[0].imag, d2[1].imag]])
        if np.linalg.matrix_rank(a) < 2:
            raise InternalInvariantError("slice directions are linearly dependent")
        object.__setattr__(self, "base", as_point(self.base))
        object.__setattr__(self, "dir1", d1)
        object.__setattr__(self, "dir2", d2)

    @classmethod
    def complex_line(cls, base, direction) -> "AffineSlice":
        """The complex line base + s*direction, parametrized by s = u + i v."""
        dx, dy = complex(direction[0]), complex(direction[1])
        return cls(as_point(base), (dx, dy), (1j * dx, 1j * dy))

    @classmethod
    def real_plane(cls) -> "AffineSlice":
        """R^2 inside C^2 (both parameters real coordinate directions)."""
        return cls(Point2(0, 0), (1.0 + 0j, 0j), (0j, 1.0 + 0j))

    @property
    def is_complex_line(self) -> bool:
        return (abs(self.dir2[0] - 1j * self.dir1[0]) == 0.0
                and abs(self.dir2[1] - 1j * self.dir1[1]) == 0.0)

    def points(self, U, V):
        U = np.asarray(U, dtype=float)
        V = np.asarray(V, dtype=float)
        X = self.base.x + U * self.dir1[0] + V * self.dir2[0]
        Y = self.base.y + U * self.dir1[1] + V * self.dir2[1]
        return X, Y


@dataclass(frozen=True)
class RasterGrid:
    """Cell-centered raster of Green values over a parametrized slice.

    values[i, j] is the estimate at parameter (u_j, v_i); status uses the
    engine codes (0 bounded, 1 escaped, 2 escaped/overflow); mass, when
    present, is the discrete-Laplacian cell mass of the slice measure.
    """

    slice: object
    window: tuple[float, float, float, float]  # (u0, u1, v0, v1)
    nx: int
    ny: int
    values: np.ndarray
    status: np.ndarray
    err: np.ndarray
    tol: float
    n_max: int
    side: str
    mass: Optional[np.ndarray] = None

    def cell_centers(self):
        u0, u1, v0, v1 = self.window
        du = (u1 - u0) / self.nx
        dv = (v1 - v0) / self.ny
        u = u0 + (np.arange(self.nx) + 0.5) * du
        v = v0 + (np.arange(self.ny) + 0.5) * dv
        return np.meshgrid(u, v)


def _grid_eval(m, slc, window, nx, ny, tol, n_max, side, pad=0):
    u0, u1, v0, v1 = window
    du = (u1 - u0) / nx
    dv = (v1 - v0) / ny
    ju = np.arange(-pad, nx + pad) + 0.5
    jv = np.arange(-pad, ny + pad) + 0.5
    U, V = np.meshgrid(u0 + ju * du, v0 + jv * dv)
    X, Y = slc.points(U, V)
    if side == "forward":
        val, err, n, st = green_values(m, X, Y, tol=tol, n_max=n_max)
    elif side == "backward":
        g = inverse_composed(m)
        val, err, n, st = green_values(g, Y, X, tol=tol, n_max=n_max)
    else:
        raise ValueError(f"unknown side {side!r}")
    return val, err, st, du, dv


def raster_green(m: ComposedMap, slc, window, resolution, tol: float = 1e-8,
                 n_max: int = 200, side: str = "forward") -> RasterGrid:
    """Per-cell Green estimates at the centers of an nx-by-ny grid."""
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2x2")
    val, err, st, _, _ = _grid_eval(m, slc, window, nx, ny, tol, n_max, side)
    return RasterGrid(slice=slc, window=tuple(float(w) for w in window),
                      nx=nx, ny=ny, values=val, status=st.astype(np.int8),
                      err=err, tol=tol, n_max=n_max, side=side)


def slice_measure_raster(m: ComposedMap, slc, window, resolution,
                         tol: float = 1e-8, n_max: int = 200,
                         side: str = "forward") -> RasterGrid:
    """Green raster plus five-point-Laplacian cell masses.

    mass = (2 pi)^-1 * discrete Laplacian * cell area, signed; small
    negative values are honest discretization error and are not clipped.
    """
    nx, ny = resolution
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2x2")
    val, err, st, du, dv = _grid_eval(m, slc, window, nx, ny, tol, n_max, side, pad=1)
    c = val[1:-1, 1:-1]
    lap = ((val[1:-1, :-2] + val[1:-1, 2:] - 2 * c) / du ** 2
           + (val[:-2, 1:-1] + val[2:, 1:-1] - 2 * c) / dv ** 2)
    mass = lap * du * dv / (2 * math.pi)
    return RasterGrid(slice=slc, window=tuple(float(w) for w in window),
                      nx=nx, ny=ny, values=c.copy(),
                      status=st[1:-1, 1:-1].astype(np.int8).copy(),
                      err=err[1:-1, 1:-1].copy(), tol=tol, n_max=n_max,
                      side=side, mass=mass)
