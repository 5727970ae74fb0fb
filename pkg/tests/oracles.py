"""Independent oracles for the test suite.

Everything here re-derives expected values from scratch: inline map
formulas in classical coordinates, quadratic formulas, dense-grid Newton,
high-precision direct limits and real curve continuation.  None of it
calls the library code paths it is used to check.
"""

from __future__ import annotations

import cmath
import math

import mpmath as mp
import numpy as np


def classical_fixed_points(a: float, b: float):
    """Fixed points of h(x, y) = (1 - a x^2 + y, b x): the roots of
    a x^2 + (1 - b) x - 1 = 0 with y = b x."""
    disc = (1 - b) ** 2 + 4 * a
    r = math.sqrt(disc)
    xs = ((-(1 - b) + r) / (2 * a), (-(1 - b) - r) / (2 * a))
    return [(x, b * x) for x in xs]


def classical_jacobian(a: float, b: float, x: float):
    return [[-2 * a * x, 1.0], [b, 0.0]]


def eig2x2(mat):
    """Eigenvalues of a 2x2 matrix by the quadratic formula, sorted by
    ascending modulus."""
    (m00, m01), (m10, m11) = mat
    tr = m00 + m11
    det = m00 * m11 - m01 * m10
    disc = cmath.sqrt(complex(tr * tr - 4 * det))
    l1 = (tr + disc) / 2
    l2 = (tr - disc) / 2
    return sorted([complex(l1), complex(l2)], key=abs)


def brute_census_classical(a: float, b: float, n: int, grid: int = 24,
                           box: float = 2.5, tol: float = 1e-12):
    """All solutions of h^n(z) = z by plain Newton from a dense complex grid.

    Runs entirely in classical coordinates with its own map evaluation.
    """
    def hmap(x, y):
        return 1 - a * x * x + y, b * x

    def hn_jac(x, y):
        j = np.eye(2, dtype=complex)
        for _ in range(n):
            j = np.array([[-2 * a * x, 1.0], [b, 0.0]], dtype=complex) @ j
            x, y = hmap(x, y)
        return (x, y), j

    lin = np.linspace(-box, box, grid)
    lin_im = np.linspace(-box, box, max(5, grid // 3))
    roots = []
    for xr in lin:
        for xi in lin_im:
            for yr in lin_im:
                for yi in lin_im:
                    x = complex(xr, xi)
                    y = complex(yr, yi)
                    for _ in range(60):
                        (fx, fy), j = hn_jac(x, y)
                        gx, gy = fx - x, fy - y
                        if max(abs(gx), abs(gy)) < tol:
                            z = (x, y)
                            if not any(max(abs(z[0] - r[0]), abs(z[1] - r[1])) < 1e-6
                                       for r in roots):
                                roots.append(z)
                            break
                        A = j - np.eye(2)
                        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
                        if det == 0 or not np.isfinite(abs(det)):
                            break
                        dx = (-gx * A[1, 1] + gy * A[0, 1]) / det
                        dy = (-A[0, 0] * gy + A[1, 0] * gx) / det
                        x, y = x + dx, y + dy
                        if abs(x) > 1e8 or abs(y) > 1e8:
                            break
    return roots


def mp_green_limit(factor_specs, x0, y0, n_iter: int, prec: int = 120):
    """Direct high-precision limit d^-n log^+ ||f^n z|| for a composed map."""
    degs = [len(c) - 1 for c, _ in factor_specs]
    d = 1
    for dd in degs:
        d *= dd
    with mp.workprec(prec):
        x, y = mp.mpc(x0), mp.mpc(y0)
        for _ in range(n_iter):
            for coeffs, delta in factor_specs:
                py = mp.mpc(coeffs[-1])
                for c in coeffs[-2::-1]:
                    py = py * y + mp.mpc(c)
                x, y = y, py - mp.mpc(delta) * x
        nrm = max(abs(x), abs(y), mp.mpf(1))
        return float(mp.log(nrm) / mp.mpf(d) ** n_iter)


def real_manifold_polyline(a: float, b: float, fixed_x: float, eigvec,
                           unstable: bool, steps: int, seg: float = 1e-4,
                           box: float = 3.0, max_gap: float = 1e-3,
                           npts: int = 4001):
    """Continuation of the real stable/unstable curve of the elementary-form
    map F(x, y) = (y, 1 - a y^2 + b x) at the fixed point (fixed_x, fixed_x).

    Marches a short eigensegment forward (or backward) with midpoint
    refinement, clipping to the box; returns a list of polyline arcs.
    """
    def fwd(p):
        x, y = p
        return np.array([y, 1 - a * y * y + b * x])

    def bwd(p):
        x, y = p
        return np.array([(y - 1 + a * x * x) / b, x])

    step = fwd if unstable else bwd
    base = np.array([fixed_x, fixed_x])
    v = np.array(eigvec, dtype=float)
    v = v / np.linalg.norm(v)
    ts = np.linspace(-seg, seg, npts)
    pts = base[None, :] + ts[:, None] * v[None, :]
    arcs = [pts]
    for _ in range(steps):
        new_arcs = []
        for arc in arcs:
            img = np.array([step(p) for p in arc])
            # refine where consecutive images spread apart
            refined = [img[0]]
            src = [arc[0]]
            for i in range(1, len(arc)):
                gap = np.max(np.abs(img[i] - img[i - 1]))
                if gap > max_gap:
                    extra = int(min(64, math.ceil(gap / max_gap)))
                    for k in range(1, extra + 1):
                        p = arc[i - 1] + (arc[i] - arc[i - 1]) * k / (extra + 1)
                        refined.append(step(p))
                        src.append(p)
                refined.append(img[i])
                src.append(arc[i])
            img = np.array(refined)
            # split into sub-arcs inside the box
            inside = np.max(np.abs(img), axis=1) <= box
            start = None
            for i, ok in enumerate(inside):
                if ok and start is None:
                    start = i
                elif not ok and start is not None:
                    if i - start >= 2:
                        new_arcs.append(img[start:i])
                    start = None
            if start is not None and len(img) - start >= 2:
                new_arcs.append(img[start:])
        arcs = new_arcs
        if not arcs:
            break
    return arcs


def point_to_polyline_dist(point, arcs) -> float:
    """Distance from a planar point to a set of polyline arcs."""
    p = np.asarray(point, dtype=float)
    best = math.inf
    for arc in arcs:
        a0 = arc[:-1]
        a1 = arc[1:]
        d = a1 - a0
        L2 = np.sum(d * d, axis=1)
        L2 = np.where(L2 == 0, 1e-300, L2)
        t = np.clip(np.sum((p[None, :] - a0) * d, axis=1) / L2, 0.0, 1.0)
        proj = a0 + t[:, None] * d
        dist = np.sqrt(np.sum((proj - p[None, :]) ** 2, axis=1))
        best = min(best, float(dist.min()))
    return best
