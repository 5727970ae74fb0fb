"""Linearization charts of saddle manifolds and their intersections.

A saddle orbit of period k carries an entire parametrization
psi : C -> W^u with psi(0) = p and

    f^k(psi(t)) = psi(lambda * t),      |lambda| > 1,

whose power-series coefficients solve a triangular hierarchy of 2x2
linear systems.  The same code path builds stable charts as unstable
charts of the inverse map, so a stable chart's dilation also has modulus
above 1 (it conjugates f^-k).  Outside the series radius the functional
equation extends the chart by finitely many pushforwards.  Homoclinic and
heteroclinic points are located as zeros of psi_u(s) - psi_s(t) over the
two chart parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import green as green_mod
from . import mapcore
from .errors import MagnitudeOverflowError, NearResonanceError, NotASaddleError
from .green import RasterGrid, slice_measure_raster
from .mapcore import HUGE, ComposedMap, Point2, as_point
from .periodic import OrbitClass, PeriodicOrbit

_RESONANCE_FLOOR = 1e-10


@dataclass(frozen=True)
class ManifoldChart:
    """Truncated entire parametrization of W^u or W^s at a saddle point.

    coeffs[m - 1] holds the C^2-valued series coefficient of t^m,
    m = 1..K; the constant term is the base point itself.  tol_chart is
    the residual sup actually measured on |t| <= r0.
    """

    orbit: PeriodicOrbit
    point_index: int
    side: str  # "unstable" | "stable"
    lam: complex
    coeffs: np.ndarray  # shape (K, 2) complex
    r0: float
    tol_chart: float

    @property
    def order(self) -> int:
        return len(self.coeffs)

    @property
    def base(self) -> Point2:
        return self.orbit.points[self.point_index]

    @property
    def forward(self) -> bool:
        return self.side == "unstable"


# ---------------------------------------------------------------------------
# truncated power series in one variable (coefficient arrays, index = power)
# ---------------------------------------------------------------------------

def _series_mul(A, B, K):
    out = np.zeros(K + 1, dtype=complex)
    for i in range(K + 1):
        if A[i] != 0:
            out[i:] += A[i] * B[:K + 1 - i]
    return out


def _series_polyval(coeffs, Y, K):
    out = np.zeros(K + 1, dtype=complex)
    out[0] = coeffs[-1]
    for c in coeffs[-2::-1]:
        out = _series_mul(out, Y, K)
        out[0] += c
    return out


def _series_apply(m: ComposedMap, X, Y, K, forward=True, reps=1):
    for _ in range(reps):
        if forward:
            for f in m.factors:
                X, Y = Y, _series_polyval(f.p_coeffs, Y, K) - f.delta * X
        else:
            for f in reversed(m.factors):
                X, Y = (_series_polyval(f.p_coeffs, X, K) - Y) / f.delta, X
    return X, Y


# ---------------------------------------------------------------------------
# chart construction
# ---------------------------------------------------------------------------

def _chart_series_residual(m, base, coeffs, lam, r, k, forward, nsamp=257):
    """sup over |t| = r of the functional-equation defect of the series."""
    t = r * np.exp(2j * np.pi * np.arange(nsamp) / nsamp)
    X, Y, _, _ = _eval_series_arrays(base, coeffs, t)
    for _ in range(k):
        if forward:
            X, Y = mapcore._apply_xy(m, X, Y)
        else:
            X, Y = mapcore._apply_inv_xy(m, X, Y)
    X2, Y2, _, _ = _eval_series_arrays(base, coeffs, lam * t)
    return float(np.max(np.maximum(np.abs(X - X2), np.abs(Y - Y2))))


def linearize(m: ComposedMap, saddle: PeriodicOrbit, side: str = "unstable",
              order: int = 30, point_index: int = 0,
              tol_chart: float = 1e-10) -> ManifoldChart:
    """Solve the chart coefficients order by order at a saddle orbit point.

    At order j >= 2 the system (DF(p) - lambda^j I) c_j = -(lower-order
    terms) is uniquely solvable because |lambda^j| > |lambda| keeps
    lambda^j away from both eigenvalues of DF(p).
    """
    if saddle.orbit_class is not OrbitClass.SADDLE:
        raise NotASaddleError("chart construction requires a saddle orbit")
    if side not in ("unstable", "stable"):
        raise ValueError("side must be 'unstable' or 'stable'")
    forward = side == "unstable"
    k = saddle.period
    p = saddle.points[point_index]
    DF = mapcore.orbit_derivative(m, p, k if forward else -k)
    evals, evecs = np.linalg.eig(DF)
    iu = int(np.argmax(np.abs(evals)))
    lam = complex(evals[iu])
    if abs(lam) <= 1:
        raise NotASaddleError("no expanding eigenvalue at the base point")
    for j in range(2, order + 1):
        if min(abs(lam ** j - mu) for mu in evals) < _RESONANCE_FLOOR:
            raise NearResonanceError(f"lambda^{j} collides with an eigenvalue")
    v = evecs[:, iu]
    big = int(np.argmax(np.abs(v)))
    v = v * (abs(v[big]) / v[big])
    v = v / np.linalg.norm(v)
    if m.is_real and abs(lam.imag) == 0.0:
        v = v.real.astype(complex)  # strip roundoff so real maps get real charts
        v = v / np.linalg.norm(v)

    # solve 10 spare orders beyond the kept truncation: the extra terms
    # measure the true truncation error, which the functional-equation
    # defect alone underestimates (the tail nearly satisfies the same
    # equation)
    K = order
    Kx = order + 10
    for j in range(order + 1, Kx + 1):
        if min(abs(lam ** j - mu) for mu in evals) < _RESONANCE_FLOOR:
            raise NearResonanceError(f"lambda^{j} collides with an eigenvalue")
    cs = np.zeros((Kx + 1, 2), dtype=complex)
    cs[0] = (p.x, p.y)
    cs[1] = v
    I2 = np.eye(2)
    for j in range(2, Kx + 1):
        X = cs[:, 0].copy()
        Y = cs[:, 1].copy()
        X[j:] = 0
        Y[j:] = 0
        FX, FY = _series_apply(m, X, Y, Kx, forward=forward, reps=k)
        rhs = -np.array([FX[j], FY[j]])
        cs[j] = np.linalg.solve(DF - lam ** j * I2, rhs)

    # validity radius from the empirical coefficient decay, margin 2,
    # then shrink until both the next-10-terms tail and the functional
    # defect are below tol_chart on the circle |t| = r0
    norms = np.abs(cs[1:K + 1]).max(axis=1)
    ms = np.arange(1, K + 1)
    pos = norms[1:] > 0
    if pos.any():
        r_est = 1.0 / float(np.max(norms[1:][pos] ** (1.0 / ms[1:][pos])))
    else:
        r_est = 1.0
    r0 = r_est / 2.0
    coeffs = cs[1:K + 1].copy()
    spare = np.abs(cs[K + 1:]).max(axis=1)

    def tail_bound(r):
        return float(np.sum(spare * r ** np.arange(K + 1, Kx + 1)))

    res = _chart_series_residual(m, p, coeffs, lam, r0, k, forward)
    for _ in range(80):
        if res <= tol_chart and tail_bound(r0) <= 0.5 * tol_chart:
            break
        r0 *= 0.85
        res = _chart_series_residual(m, p, coeffs, lam, r0, k, forward)
    res = max(res, _chart_series_residual(m, p, coeffs, lam, 0.5 * r0, k, forward))
    return ManifoldChart(orbit=saddle, point_index=point_index, side=side,
                         lam=lam, coeffs=coeffs, r0=r0, tol_chart=res)


# ---------------------------------------------------------------------------
# evaluation with global extension
# ---------------------------------------------------------------------------

def _eval_series_arrays(base: Point2, coeffs: np.ndarray, t: np.ndarray):
    """Horner evaluation of the chart series and its t-derivative."""
    t = np.asarray(t, dtype=complex)
    X = np.zeros_like(t)
    Y = np.zeros_like(t)
    DX = np.zeros_like(t)
    DY = np.zeros_like(t)
    K = len(coeffs)
    for j in range(K, 0, -1):
        cx, cy = coeffs[j - 1]
        DX = DX * t + j * cx
        DY = DY * t + j * cy
        X = (X + cx) * t
        Y = (Y + cy) * t
    return X + base.x, Y + base.y, DX, DY


def _extension_counts(chart: ManifoldChart, t: np.ndarray, forced_m=None):
    absl = abs(chart.lam)
    at = np.abs(np.asarray(t, dtype=complex))
    with np.errstate(divide="ignore"):
        mm = np.ceil(np.log(np.maximum(at / chart.r0, 1.0)) / math.log(absl))
    mm = mm.astype(np.int64)
    # fix rounding: ensure |t| / lam^m <= r0
    need = at / absl ** np.maximum(mm, 0) > chart.r0
    while need.any():
        mm = mm + need.astype(np.int64)
        need = at / absl ** np.maximum(mm, 0) > chart.r0
    mm = np.maximum(mm, 0)
    if forced_m is not None:
        if np.any(forced_m < mm):
            raise ValueError("forced extension count is below the minimum")
        mm = np.broadcast_to(np.asarray(forced_m, dtype=np.int64), mm.shape).copy()
    return mm


def _chart_eval_arrays(m: ComposedMap, chart: ManifoldChart, t,
                       forced_m=None):
    """psi(t) and psi'(t) on arrays: series inside r0, pushforward outside."""
    t = np.asarray(t, dtype=complex)
    k = chart.orbit.period
    mm = _extension_counts(chart, t, forced_m)
    tt = t * chart.lam ** (-mm.astype(float))
    X, Y, DX, DY = _eval_series_arrays(chart.base, chart.coeffs, tt)
    mmax = int(mm.max()) if mm.size else 0
    with np.errstate(all="ignore"):
        for step in range(1, mmax + 1):
            act = mm >= step
            if not act.any():
                break
            idx = np.flatnonzero(act)
            x, y = X[idx], Y[idx]
            a11 = np.ones_like(x)
            a12 = np.zeros_like(x)
            a21 = np.zeros_like(x)
            a22 = np.ones_like(x)
            for _ in range(k):
                x, y, a11, a12, a21, a22 = mapcore._apply_with_jac_xy(
                    m, x, y, a11, a12, a21, a22, forward=chart.forward)
            X[idx] = x
            Y[idx] = y
            DX[idx], DY[idx] = (a11 * DX[idx] + a12 * DY[idx],
                                a21 * DX[idx] + a22 * DY[idx])
    scale = chart.lam ** (-mm.astype(float))
    return X, Y, DX * scale, DY * scale


def chart_eval(m: ComposedMap, chart: ManifoldChart, t: complex,
               forced_m: Optional[int] = None) -> Point2:
    """Evaluate psi(t); |t| may exceed r0 by any floating-representable factor."""
    X, Y, _, _ = _chart_eval_arrays(m, chart, np.array([t]), forced_m=forced_m)
    x, y = complex(X[0]), complex(Y[0])
    if not (abs(x) < HUGE and abs(y) < HUGE
            and math.isfinite(x.real) and math.isfinite(y.real)):
        raise MagnitudeOverflowError("chart evaluation left the floating range")
    return Point2(x, y)


def chart_points(m: ComposedMap, chart: ManifoldChart, ts) -> np.ndarray:
    """Vectorized psi over an array of parameters; shape (..., 2)."""
    ts = np.asarray(ts, dtype=complex)
    X, Y, _, _ = _chart_eval_arrays(m, chart, ts.ravel())
    return np.stack([X, Y], axis=-1).reshape(ts.shape + (2,))


@dataclass(frozen=True)
class ChartSlice:
    """Embedding protocol adapter: chart parameter plane t = u + i v."""

    map: ComposedMap
    chart: ManifoldChart

    def points(self, U, V):
        T = np.asarray(U, dtype=float) + 1j * np.asarray(V, dtype=float)
        X, Y, _, _ = _chart_eval_arrays(self.map, self.chart, T.ravel())
        return X.reshape(T.shape), Y.reshape(T.shape)


def green_on_chart(m: ComposedMap, chart: ManifoldChart, extent: float,
                   resolution=(64, 64), tol: float = 1e-8,
                   n_max: int = 200) -> RasterGrid:
    """Raster of the complementary Green function over |Re t|, |Im t| <= extent.

    Unstable charts restrict G^+ (whose slice Laplacian carries mass near
    the saddle); stable charts restrict G^-.
    """
    side = "forward" if chart.side == "unstable" else "backward"
    window = (-extent, extent, -extent, extent)
    return slice_measure_raster(m, ChartSlice(m, chart), window, resolution,
                                tol=tol, n_max=n_max, side=side)


# ---------------------------------------------------------------------------
# homoclinic / heteroclinic intersections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HomoclinicPoint:
    """A located zero of psi_u(s) - psi_s(t)."""

    s: complex
    t: complex
    point: Point2
    residual: float
    transversal: bool
    sigma_min: float
    max_im: float


@dataclass
class IntersectionStats:
    seeds: int = 0
    converged: int = 0
    outside_window: int = 0
    trivial: int = 0
    unbounded_dropped: int = 0
    distinct: int = 0


@dataclass
class IntersectionSearch:
    hits: list
    stats: IntersectionStats


def _logpolar_seeds(lo: float, hi: float, absl: float, per_factor: int,
                    n_ang: int):
    n_rad = max(3, int(math.ceil(per_factor * math.log(hi / lo) / math.log(absl))))
    radii = np.exp(np.linspace(math.log(lo), math.log(hi), n_rad))
    angles = 2 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
    R, A = np.meshgrid(radii, angles, indexing="ij")
    return (R * np.exp(1j * A)).ravel()


def find_intersections_detailed(m: ComposedMap, chart_u: ManifoldChart,
                                chart_s: ManifoldChart, annuli=None,
                                tol: float = 1e-10, *,
                                span: float = 6.0,
                                angles: int = 8,
                                radial_per_factor: float = 2.5,
                                newton_max: int = 40,
                                dedup_eps: float = 1e-8,
                                sv_threshold: float = 1e-6,
                                exclusion_ratio: float = 0.05,
                                bound_horizon: int = 12) -> IntersectionSearch:
    """Newton over the pair (s, t) of chart parameters, log-polar seeding.

    The default windows are the annuli r0 <= |.| <= |lambda|^span * r0 on
    each side; solutions recur under (s, t) -> (lambda_u s, lambda_s t),
    so a few dilation factors of coverage see every local family.
    """
    if chart_u.side != "unstable" or chart_s.side != "stable":
        raise ValueError("expected an unstable chart and a stable chart")
    lu, ls = chart_u.lam, chart_s.lam
    if annuli is None:
        annuli = ((chart_u.r0, chart_u.r0 * abs(lu) ** span),
                  (chart_s.r0, chart_s.r0 * abs(ls) ** span))
    (slo, shi), (tlo, thi) = annuli
    su = _logpolar_seeds(slo, shi, abs(lu), radial_per_factor, angles)
    tv = _logpolar_seeds(tlo, thi, abs(ls), radial_per_factor, angles)
    S, T = np.meshgrid(su, tv, indexing="ij")
    S = S.ravel().astype(complex)
    T = T.ravel().astype(complex)
    stats = IntersectionStats(seeds=len(S))

    cap_s = shi * abs(lu) ** 2
    cap_t = thi * abs(ls) ** 2

    def val_and_jac(s, t):
        Ux, Uy, dUx, dUy = _chart_eval_arrays(m, chart_u, s)
        Sx, Sy, dSx, dSy = _chart_eval_arrays(m, chart_s, t)
        return Ux - Sx, Uy - Sy, dUx, dUy, -dSx, -dSy

    def r2_of(s, t):
        gx, gy, *_ = val_and_jac(s, t)
        r2 = np.abs(gx) ** 2 + np.abs(gy) ** 2
        return np.where(np.isfinite(r2), r2, np.inf)

    alive = np.ones(S.shape, dtype=bool)
    r2 = r2_of(S, T)
    tol2 = tol * tol
    with np.errstate(all="ignore"):
        for _ in range(newton_max):
            work = alive & (r2 >= tol2) & np.isfinite(r2)
            if not work.any():
                break
            idx = np.flatnonzero(work)
            s, t = S[idx], T[idx]
            gx, gy, a11, a21, a12, a22 = val_and_jac(s, t)
            det = a11 * a22 - a12 * a21
            ok = np.isfinite(det) & (np.abs(det) > 1e-280)
            det = np.where(ok, det, 1.0)
            ds = np.where(ok, (-gx * a22 + gy * a12) / det, 0.0)
            dt = np.where(ok, (-a11 * gy + a21 * gx) / det, 0.0)
            lamb = np.ones(ds.shape)
            sn = s + ds
            tn = t + dt
            r2n = r2_of(sn, tn)
            r2o = r2[idx]
            for _ in range(20):
                worse = r2n > (1 - 0.25 * lamb) * r2o
                if not worse.any():
                    break
                lamb = np.where(worse, 0.5 * lamb, lamb)
                sn = np.where(worse, s + lamb * ds, sn)
                tn = np.where(worse, t + lamb * dt, tn)
                r2n = r2_of(sn, tn)
            accept = r2n <= r2o
            sn = np.where(accept, sn, s)
            tn = np.where(accept, tn, t)
            r2n = np.where(accept, r2n, r2o)
            dead = (np.abs(sn) > cap_s) | (np.abs(tn) > cap_t) | ~np.isfinite(r2n)
            alive[idx[dead]] = False
            S[idx] = sn
            T[idx] = tn
            r2[idx] = r2n

    conv = alive & (r2 < tol2)
    stats.converged = int(conv.sum())
    S, T = S[conv], T[conv]

    margin = 1 + 1e-9
    inside = ((np.abs(S) >= slo / margin) & (np.abs(S) <= shi * margin)
              & (np.abs(T) >= tlo / margin) & (np.abs(T) <= thi * margin))
    same_base = (chart_u.base.x - chart_s.base.x, chart_u.base.y - chart_s.base.y)
    homoclinic = max(abs(same_base[0]), abs(same_base[1])) < 1e-12
    if homoclinic:
        triv = ((np.abs(S) < exclusion_ratio * chart_u.r0)
                & (np.abs(T) < exclusion_ratio * chart_s.r0))
        stats.trivial = int((triv & inside).sum())
        inside &= ~triv
    stats.outside_window = stats.converged - int(inside.sum())
    S, T = S[inside], T[inside]

    # dedup on the located points
    Ux, Uy, dUx, dUy = _chart_eval_arrays(m, chart_u, S)
    Sx, Sy, dSx, dSy = _chart_eval_arrays(m, chart_s, T)
    order = np.lexsort((T.imag, T.real, S.imag, S.real,
                        Uy.imag, Uy.real, Ux.imag, Ux.real))
    chosen = []
    for i in order:
        if any(max(abs(Ux[i] - Ux[j]), abs(Uy[i] - Uy[j])) < dedup_eps
               for j in chosen):
            continue
        chosen.append(i)

    cert_f = green_mod.filtration_radius(m)
    cert_b = green_mod.filtration_radius(mapcore.inverse_composed(m))
    hits = []
    for i in chosen:
        pt = Point2(complex((Ux[i] + Sx[i]) / 2), complex((Uy[i] + Sy[i]) / 2))
        res = float(max(abs(Ux[i] - Sx[i]), abs(Uy[i] - Sy[i])))
        fwd = green_mod.bounded_orbit_test(m, pt, n_max=bound_horizon, cert=cert_f)
        bwd = green_mod.bounded_orbit_test(m, pt, n_max=bound_horizon,
                                           cert=cert_b, backward=True)
        if (fwd.status is not green_mod.OrbitStatus.BOUNDED
                or bwd.status is not green_mod.OrbitStatus.BOUNDED):
            stats.unbounded_dropped += 1
            continue
        M = np.array([[dUx[i], -dSx[i]], [dUy[i], -dSy[i]]])
        sv = float(np.linalg.svd(M, compute_uv=False)[-1])
        hits.append(HomoclinicPoint(
            s=complex(S[i]), t=complex(T[i]), point=pt, residual=res,
            transversal=sv > sv_threshold, sigma_min=sv,
            max_im=pt.max_im() if m.is_real else float("nan")))
    stats.distinct = len(hits)
    hits.sort(key=lambda h: (h.point.x.real, h.point.x.imag,
                             h.point.y.real, h.point.y.imag))
    return IntersectionSearch(hits=hits, stats=stats)


def find_intersections(m: ComposedMap, chart_u: ManifoldChart,
                       chart_s: ManifoldChart, annuli=None,
                       tol: float = 1e-10, **opts) -> list:
    """Homoclinic/heteroclinic points in the parameter windows.

    An empty list is a valid result (window too small); the detailed
    variant reports seed statistics alongside.
    """
    return find_intersections_detailed(m, chart_u, chart_s, annuli, tol,
                                       **opts).hits


# ---------------------------------------------------------------------------
# extended-precision verification
#
# In doubles, an orbit known to residual eps shadows the true one only for
# about log(1/eps)/chi steps before roundoff amplifies along the expanding
# direction.  Boundedness claims over long horizons therefore re-derive the
# point in working precision matched to exp(chi * horizon).
# ---------------------------------------------------------------------------

import mpmath as mp  # noqa: E402  (verification section only)


@dataclass(frozen=True)
class MpChart:
    base: tuple
    lam: object
    coeffs: tuple  # ((cx, cy) mpc pairs for powers 1..K)
    r0: float
    forward: bool
    period: int


def linearize_mp(m: ComposedMap, chart: ManifoldChart, prec: int = 400) -> MpChart:
    """Rebuild a chart's series in extended precision.

    The base periodic point is refined first; the eigenvector follows the
    same normalization as the double-precision build, so parameters carry
    over between the two charts.
    """
    from .periodic import _refine_orbit_mp

    k = chart.orbit.period
    forward = chart.forward
    with mp.workprec(prec):
        bx, by = _refine_orbit_mp(m, chart.base.x, chart.base.y, k,
                                  prec=prec, steps=40)
        J = [[mp.mpc(1), mp.mpc(0)], [mp.mpc(0), mp.mpc(1)]]
        x, y = mp.mpc(bx), mp.mpc(by)
        for _ in range(k):
            Jf = mapcore.derivative_mp(m, x, y, prec=prec)
            J = [[Jf[0][0] * J[0][0] + Jf[0][1] * J[1][0],
                  Jf[0][0] * J[0][1] + Jf[0][1] * J[1][1]],
                 [Jf[1][0] * J[0][0] + Jf[1][1] * J[1][0],
                  Jf[1][0] * J[0][1] + Jf[1][1] * J[1][1]]]
            x, y = mapcore.apply_mp(m, x, y, prec=prec)
        if not forward:
            det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
            J = [[J[1][1] / det, -J[0][1] / det], [-J[1][0] / det, J[0][0] / det]]
        tr = J[0][0] + J[1][1]
        det = J[0][0] * J[1][1] - J[0][1] * J[1][0]
        disc = mp.sqrt(tr * tr - 4 * det)
        cands = [(tr + disc) / 2, (tr - disc) / 2]
        lam = max(cands, key=abs)
        # eigenvector from the better-conditioned row
        r1 = (J[0][1], lam - J[0][0])
        r2 = (lam - J[1][1], J[1][0])
        v = r1 if abs(r1[0]) + abs(r1[1]) >= abs(r2[0]) + abs(r2[1]) else r2
        big = 0 if abs(v[0]) >= abs(v[1]) else 1
        phase = abs(v[big]) / v[big]
        nrm = mp.sqrt(abs(v[0]) ** 2 + abs(v[1]) ** 2)
        v = (v[0] * phase / nrm, v[1] * phase / nrm)

        K = chart.order
        cs = [(mp.mpc(0), mp.mpc(0)) for _ in range(K + 1)]
        cs[0] = (mp.mpc(bx), mp.mpc(by))
        cs[1] = (v[0], v[1])

        def series_apply_mp(X, Y):
            for _ in range(k):
                if forward:
                    for f in m.factors:
                        PY = [mp.mpc(0)] * (K + 1)
                        PY[0] = mp.mpc(f.p_coeffs[-1])
                        for c in f.p_coeffs[-2::-1]:
                            PY = _series_mul_mp(PY, Y, K)
                            PY[0] += mp.mpc(c)
                        X, Y = Y, [PY[i] - mp.mpc(f.delta) * X[i] for i in range(K + 1)]
                else:
                    for f in reversed(m.factors):
                        PX = [mp.mpc(0)] * (K + 1)
                        PX[0] = mp.mpc(f.p_coeffs[-1])
                        for c in f.p_coeffs[-2::-1]:
                            PX = _series_mul_mp(PX, X, K)
                            PX[0] += mp.mpc(c)
                        X, Y = [(PX[i] - Y[i]) / mp.mpc(f.delta) for i in range(K + 1)], X
            return X, Y

        for j in range(2, K + 1):
            X = [cs[i][0] if i < j else mp.mpc(0) for i in range(K + 1)]
            Y = [cs[i][1] if i < j else mp.mpc(0) for i in range(K + 1)]
            FX, FY = series_apply_mp(X, Y)
            lj = lam ** j
            a11 = J[0][0] - lj
            a12 = J[0][1]
            a21 = J[1][0]
            a22 = J[1][1] - lj
            det2 = a11 * a22 - a12 * a21
            rx, ry = -FX[j], -FY[j]
            cs[j] = ((rx * a22 - a12 * ry) / det2, (a11 * ry - rx * a21) / det2)
        return MpChart(base=(cs[0][0], cs[0][1]), lam=lam,
                       coeffs=tuple(cs[1:]), r0=chart.r0,
                       forward=forward, period=k)


def _series_mul_mp(A, B, K):
    out = [mp.mpc(0)] * (K + 1)
    for i in range(K + 1):
        if A[i] != 0:
            for j in range(K + 1 - i):
                out[i + j] += A[i] * B[j]
    return out


def chart_eval_mp(m: ComposedMap, ch: MpChart, t, prec: int = 400,
                  with_deriv: bool = False):
    """psi(t) (and optionally psi'(t)) in extended precision."""
    with mp.workprec(prec):
        t = mp.mpc(t)
        absl = abs(ch.lam)
        mm = 0
        tt = t
        while abs(tt) > ch.r0:
            tt /= ch.lam
            mm += 1
        X, Y = mp.mpc(0), mp.mpc(0)
        DX, DY = mp.mpc(0), mp.mpc(0)
        for j in range(len(ch.coeffs), 0, -1):
            cx, cy = ch.coeffs[j - 1]
            DX = DX * tt + j * cx
            DY = DY * tt + j * cy
            X = (X + cx) * tt
            Y = (Y + cy) * tt
        X += ch.base[0]
        Y += ch.base[1]
        for _ in range(mm * ch.period):
            if with_deriv:
                J = (mapcore.derivative_mp(m, X, Y, prec=prec) if ch.forward
                     else _inv_jac_mp(m, X, Y, prec))
                DX, DY = (J[0][0] * DX + J[0][1] * DY,
                          J[1][0] * DX + J[1][1] * DY)
            X, Y = (mapcore.apply_mp(m, X, Y, prec=prec) if ch.forward
                    else mapcore.apply_inverse_mp(m, X, Y, prec=prec))
        if with_deriv:
            scale = ch.lam ** (-mm)
            return X, Y, DX * scale, DY * scale
        return X, Y


def _inv_jac_mp(m, x, y, prec):
    """Jacobian of f^-1 at (x, y), chained over reversed factors."""
    with mp.workprec(prec):
        x, y = mp.mpc(x), mp.mpc(y)
        J = [[mp.mpc(1), mp.mpc(0)], [mp.mpc(0), mp.mpc(1)]]
        for f in reversed(m.factors):
            dp = mp.mpc(0)
            for k in range(f.degree, 0, -1):
                dp = dp * x + k * mp.mpc(f.p_coeffs[k])
            d = mp.mpc(f.delta)
            J = [[(dp * J[0][0] - J[1][0]) / d, (dp * J[0][1] - J[1][1]) / d],
                 [J[0][0], J[0][1]]]
            px = mp.mpc(f.p_coeffs[-1])
            for c in f.p_coeffs[-2::-1]:
                px = px * x + mp.mpc(c)
            x, y = (px - y) / d, x
        return J


def refine_intersection_mp(m: ComposedMap, chu: MpChart, chs: MpChart,
                           s0, t0, prec: int = 400, steps: int = 12):
    """Extended-precision Newton polish of an intersection parameter pair."""
    with mp.workprec(prec):
        s, t = mp.mpc(s0), mp.mpc(t0)
        for _ in range(steps):
            ux, uy, dux, duy = chart_eval_mp(m, chu, s, prec, with_deriv=True)
            sx, sy, dsx, dsy = chart_eval_mp(m, chs, t, prec, with_deriv=True)
            gx, gy = ux - sx, uy - sy
            a11, a12 = dux, -dsx
            a21, a22 = duy, -dsy
            det = a11 * a22 - a12 * a21
            if det == 0:
                break
            s = s + (-gx * a22 + gy * a12) / det
            t = t + (-a11 * gy + a21 * gx) / det
        ux, uy, _, _ = chart_eval_mp(m, chu, s, prec, with_deriv=True)
        sx, sy, _, _ = chart_eval_mp(m, chs, t, prec, with_deriv=True)
        res = float(max(abs(ux - sx), abs(uy - sy)))
        return s, t, (ux + sx) / 2, (uy + sy) / 2, res


def orbit_bounded_mp(m: ComposedMap, x, y, horizon: int, radius: float,
                     prec: int = 400, backward: bool = False) -> bool:
    """Escape test over `horizon` steps in extended precision.

    True means the orbit never entered the escape region; the working
    precision must dominate exp(chi * horizon) for the answer to reflect
    the true orbit of (x, y).
    """
    with mp.workprec(prec):
        if backward:
            xx, yy = mp.mpc(y), mp.mpc(x)
            gm = mapcore.inverse_composed(m)
        else:
            xx, yy = mp.mpc(x), mp.mpc(y)
            gm = m
        for _ in range(horizon + 1):
            if abs(yy) >= max(abs(xx), radius):
                return False
            xx, yy = mapcore.apply_mp(gm, xx, yy, prec=prec)
        return True
