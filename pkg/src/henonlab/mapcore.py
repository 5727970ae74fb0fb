"""Composed elementary form of polynomial diffeomorphisms of C^2.

Every map handled by the toolkit is stored as a composition of elementary
factors

    (x, y) |-> (y, p(y) - delta * x),        deg p >= 2, delta != 0,

applied left to right.  This single normal form drives iteration,
inversion, derivatives, degree bookkeeping and the constant Jacobian
determinant.  The classical quadratic map h(x, y) = (1 - a x^2 + y, b x)
enters only through an explicit affine conjugacy (see
:func:`from_classical_henon`).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import mpmath as mp
import numpy as np

from .errors import DegenerateParameterError, MagnitudeOverflowError

# saturation threshold: values beyond this are treated as overflow so that
# products like delta*x never reach inf and poison later arithmetic
HUGE = 1e280

_REAL_EPS = 0.0  # coefficients must be exactly real for is_real


def _as_complex(v) -> complex:
    return complex(v)


@dataclass(frozen=True)
class Point2:
    """A point of C^2 with finite coordinates."""

    x: complex
    y: complex

    def __post_init__(self):
        x = _as_complex(self.x)
        y = _as_complex(self.y)
        if not (math.isfinite(x.real) and math.isfinite(x.imag)
                and math.isfinite(y.real) and math.isfinite(y.imag)):
            raise MagnitudeOverflowError(f"non-finite point ({x}, {y})")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def conj(self) -> "Point2":
        return Point2(self.x.conjugate(), self.y.conjugate())

    def max_abs(self) -> float:
        return max(abs(self.x), abs(self.y))

    def max_im(self) -> float:
        return max(abs(self.x.imag), abs(self.y.imag))

    def __iter__(self):
        yield self.x
        yield self.y


def as_point(z) -> Point2:
    """Coerce a Point2 or a 2-sequence of complex scalars into a Point2."""
    if isinstance(z, Point2):
        return z
    x, y = z
    return Point2(complex(x), complex(y))


@dataclass(frozen=True)
class ElementaryFactor:
    """One factor (x, y) |-> (y, p(y) - delta*x).

    ``p_coeffs`` lists the coefficients of p with the constant term first.
    """

    p_coeffs: tuple[complex, ...]
    delta: complex
    _np_coeffs: np.ndarray = field(init=False, repr=False, compare=False)
    _np_dcoeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        coeffs = tuple(_as_complex(c) for c in self.p_coeffs)
        delta = _as_complex(self.delta)
        if len(coeffs) < 3:
            raise DegenerateParameterError("factor polynomial must have degree >= 2")
        if coeffs[-1] == 0:
            raise DegenerateParameterError("leading coefficient of p must be nonzero")
        if delta == 0:
            raise DegenerateParameterError("delta must be nonzero")
        object.__setattr__(self, "p_coeffs", coeffs)
        object.__setattr__(self, "delta", delta)
        arr = np.array(coeffs, dtype=complex)
        darr = arr[1:] * np.arange(1, len(coeffs))
        object.__setattr__(self, "_np_coeffs", arr)
        object.__setattr__(self, "_np_dcoeffs", darr)

    @property
    def degree(self) -> int:
        return len(self.p_coeffs) - 1

    @property
    def is_real(self) -> bool:
        return self.delta.imag == 0 and all(c.imag == 0 for c in self.p_coeffs)

    def p(self, y):
        """Evaluate p(y); works on scalars and numpy arrays."""
        c = self._np_coeffs
        out = np.full_like(np.asarray(y, dtype=complex), c[-1])
        for k in range(len(c) - 2, -1, -1):
            out = out * y + c[k]
        return out if isinstance(y, np.ndarray) else complex(out)

    def dp(self, y):
        """Evaluate p'(y)."""
        c = self._np_dcoeffs
        out = np.full_like(np.asarray(y, dtype=complex), c[-1])
        for k in range(len(c) - 2, -1, -1):
            out = out * y + c[k]
        return out if isinstance(y, np.ndarray) else complex(out)


@dataclass(frozen=True)
class ComposedMap:
    """A polynomial diffeomorphism as a composition of elementary factors.

    ``degree`` is the product of the factor degrees and ``jac_det`` the
    product of the factor deltas; both are constants of the map.
    """

    factors: tuple[ElementaryFactor, ...]
    degree: int = field(init=False)
    jac_det: complex = field(init=False)
    is_real: bool = field(init=False)

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise DegenerateParameterError("a composed map needs at least one factor")
        object.__setattr__(self, "factors", factors)
        deg = 1
        det = 1.0 + 0.0j
        for f in factors:
            deg *= f.degree
            det *= f.delta
        object.__setattr__(self, "degree", deg)
        object.__setattr__(self, "jac_det", det)
        object.__setattr__(self, "is_real", all(f.is_real for f in factors))

    @property
    def factor_degrees(self) -> tuple[int, ...]:
        return tuple(f.degree for f in self.factors)


def make_map(factor_specs: Iterable[tuple[Sequence[complex], complex]]) -> ComposedMap:
    """Build a ComposedMap from (p_coeffs, delta) pairs, constant term first."""
    return ComposedMap(tuple(ElementaryFactor(tuple(c), d) for c, d in factor_specs))


# ---------------------------------------------------------------------------
# classical quadratic adapter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TauConjugacy:
    """The affine change of variables tau(x, y) = (y/b, x).

    It conjugates the classical quadratic map h(x, y) = (1 - a x^2 + y, b x)
    to the elementary form F(x, y) = (y, 1 - a y^2 + b x):  F = tau o h o tau^-1.
    """

    b: float

    def forward(self, z) -> Point2:
        z = as_point(z)
        return Point2(z.y / self.b, z.x)

    def inverse(self, z) -> Point2:
        z = as_point(z)
        return Point2(z.y, self.b * z.x)


@dataclass(frozen=True)
class ClassicalHenon:
    """Elementary-form embedding of the classical quadratic family."""

    a: float
    b: float
    map: ComposedMap
    tau: TauConjugacy

    def classical_apply(self, z) -> Point2:
        """Apply h(x, y) = (1 - a x^2 + y, b x) in the original coordinates."""
        z = as_point(z)
        return Point2(1 - self.a * z.x * z.x + z.y, self.b * z.x)


def from_classical_henon(a: float, b: float) -> ClassicalHenon:
    """Embed the classical quadratic map with parameters (a, b), b != 0.

    Returns the elementary-form map F(x, y) = (y, 1 - a y^2 + b x)
    (p(y) = 1 - a y^2, delta = -b) together with the conjugacy tau
    satisfying F = tau o h o tau^-1.
    """
    if b == 0:
        raise DegenerateParameterError("classical parameter b must be nonzero")
    fac = ElementaryFactor((1.0 + 0j, 0.0 + 0j, complex(-a)), complex(-b))
    return ClassicalHenon(a=float(a), b=float(b),
                          map=ComposedMap((fac,)), tau=TauConjugacy(float(b)))


def inverse_composed(m: ComposedMap) -> ComposedMap:
    """The inverse map, swapped back into elementary form.

    With sigma(x, y) = (y, x), the map sigma o f^-1 o sigma is again a
    composition of elementary factors: the factor list reversed, with
    p replaced by p/delta and delta by 1/delta.  Consequently
    G^-(z) for f equals G^+ of this map at sigma(z), and the backward
    escape region is {|x| >= max(|y|, R)}.
    """
    facs = []
    for f in reversed(m.factors):
        coeffs = tuple(c / f.delta for c in f.p_coeffs)
        facs.append(ElementaryFactor(coeffs, 1.0 / f.delta))
    return ComposedMap(tuple(facs))


# ---------------------------------------------------------------------------
# point operations
# ---------------------------------------------------------------------------

def _check_mag(x: complex, y: complex):
    if not (abs(x.real) < HUGE and abs(x.imag) < HUGE
            and abs(y.real) < HUGE and abs(y.imag) < HUGE):
        raise MagnitudeOverflowError("intermediate magnitude exceeded range")


def apply(m: ComposedMap, z) -> Point2:
    """Apply the composition of factors in order."""
    z = as_point(z)
    x, y = z.x, z.y
    with np.errstate(all="ignore"):
        for f in m.factors:
            x, y = y, f.p(y) - f.delta * x
            _check_mag(x, y)
    return Point2(x, y)


def apply_inverse(m: ComposedMap, z) -> Point2:
    """Apply f^-1; one factor inverts as (u, v) |-> ((p(u) - v)/delta, u)."""
    z = as_point(z)
    x, y = z.x, z.y
    with np.errstate(all="ignore"):
        for f in reversed(m.factors):
            x, y = (f.p(x) - y) / f.delta, x
            _check_mag(x, y)
    return Point2(x, y)


def iterate(m: ComposedMap, z, n: int) -> Point2:
    """n-fold forward (n > 0) or backward (n < 0) application."""
    z = as_point(z)
    if n >= 0:
        for _ in range(n):
            z = apply(m, z)
    else:
        for _ in range(-n):
            z = apply_inverse(m, z)
    return z


def derivative(m: ComposedMap, z) -> np.ndarray:
    """The 2x2 complex Jacobian Df(z), a chain of [[0, 1], [-delta, p'(y)]]."""
    z = as_point(z)
    x, y = z.x, z.y
    J = np.eye(2, dtype=complex)
    for f in m.factors:
        J = np.array([[0.0, 1.0], [-f.delta, f.dp(y)]], dtype=complex) @ J
        x, y = y, f.p(y) - f.delta * x
        _check_mag(x, y)
    return J


def derivative_inverse(m: ComposedMap, z) -> np.ndarray:
    """The 2x2 complex Jacobian of f^-1 at z."""
    z = as_point(z)
    x, y = z.x, z.y
    J = np.eye(2, dtype=complex)
    for f in reversed(m.factors):
        J = np.array([[f.dp(x) / f.delta, -1.0 / f.delta],
                      [1.0, 0.0]], dtype=complex) @ J
        x, y = (f.p(x) - y) / f.delta, x
        _check_mag(x, y)
    return J


def orbit_derivative(m: ComposedMap, z, n: int) -> np.ndarray:
    """Df^n(z) for n > 0 (or Df^-n via inverse factors for n < 0)."""
    z = as_point(z)
    J = np.eye(2, dtype=complex)
    for _ in range(abs(n)):
        J = (derivative(m, z) if n > 0 else derivative_inverse(m, z)) @ J
        z = apply(m, z) if n > 0 else apply_inverse(m, z)
    return J


# ---------------------------------------------------------------------------
# vectorized kernels (shared by the search and raster engines)
# ---------------------------------------------------------------------------

def _poly_arr(coeffs: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.full_like(y, coeffs[-1])
    for k in range(len(coeffs) - 2, -1, -1):
        out = out * y + coeffs[k]
    return out


def _apply_xy(m: ComposedMap, X: np.ndarray, Y: np.ndarray):
    """One full forward application on coordinate arrays (no overflow checks)."""
    for f in m.factors:
        X, Y = Y, _poly_arr(f._np_coeffs, Y) - f.delta * X
    return X, Y


def _apply_inv_xy(m: ComposedMap, X: np.ndarray, Y: np.ndarray):
    for f in reversed(m.factors):
        X, Y = (_poly_arr(f._np_coeffs, X) - Y) / f.delta, X
    return X, Y


def _apply_with_jac_xy(m: ComposedMap, X, Y, a11, a12, a21, a22, forward=True):
    """One application, chaining the 2x2 Jacobian entries along."""
    if forward:
        for f in m.factors:
            dp = _poly_arr(f._np_dcoeffs, Y)
            b11, b12 = a21, a22
            b21 = -f.delta * a11 + dp * a21
            b22 = -f.delta * a12 + dp * a22
            a11, a12, a21, a22 = b11, b12, b21, b22
            X, Y = Y, _poly_arr(f._np_coeffs, Y) - f.delta * X
    else:
        for f in reversed(m.factors):
            dp = _poly_arr(f._np_dcoeffs, X)
            b11 = (dp * a11 - a21) / f.delta
            b12 = (dp * a12 - a22) / f.delta
            b21, b22 = a11, a12
            a11, a12, a21, a22 = b11, b12, b21, b22
            X, Y = (_poly_arr(f._np_coeffs, X) - Y) / f.delta, X
    return X, Y, a11, a12, a21, a22


def _fn_with_jac(m: ComposedMap, X, Y, n: int, forward=True):
    """f^n (or f^-n) with the chained Jacobian, elementwise over arrays."""
    a11 = np.ones_like(X)
    a12 = np.zeros_like(X)
    a21 = np.zeros_like(X)
    a22 = np.ones_like(X)
    with np.errstate(all="ignore"):
        for _ in range(n):
            X, Y, a11, a12, a21, a22 = _apply_with_jac_xy(
                m, X, Y, a11, a12, a21, a22, forward=forward)
    return X, Y, a11, a12, a21, a22


# ---------------------------------------------------------------------------
# extended-precision kernels (mpmath), used by oracles and rechecks
# ---------------------------------------------------------------------------

def apply_mp(m: ComposedMap, x, y, prec: int = 120):
    """Forward application in >= prec-bit arithmetic; returns mpc pair."""
    with mp.workprec(prec):
        x, y = mp.mpc(x), mp.mpc(y)
        for f in m.factors:
            py = mp.mpc(f.p_coeffs[-1])
            for c in f.p_coeffs[-2::-1]:
                py = py * y + mp.mpc(c)
            x, y = y, py - mp.mpc(f.delta) * x
        return x, y


def apply_inverse_mp(m: ComposedMap, x, y, prec: int = 120):
    with mp.workprec(prec):
        x, y = mp.mpc(x), mp.mpc(y)
        for f in reversed(m.factors):
            px = mp.mpc(f.p_coeffs[-1])
            for c in f.p_coeffs[-2::-1]:
                px = px * x + mp.mpc(c)
            x, y = (px - y) / mp.mpc(f.delta), x
        return x, y


def derivative_mp(m: ComposedMap, x, y, prec: int = 120):
    """Jacobian in extended precision as a 2x2 nested list of mpc."""
    with mp.workprec(prec):
        x, y = mp.mpc(x), mp.mpc(y)
        J = [[mp.mpc(1), mp.mpc(0)], [mp.mpc(0), mp.mpc(1)]]
        for f in m.factors:
            dp = mp.mpc(0)
            for k in range(f.degree, 0, -1):
                dp = dp * y + k * mp.mpc(f.p_coeffs[k])
            d = mp.mpc(f.delta)
            J = [[J[1][0], J[1][1]],
                 [-d * J[0][0] + dp * J[1][0], -d * J[0][1] + dp * J[1][1]]]
            py = mp.mpc(f.p_coeffs[-1])
            for c in f.p_coeffs[-2::-1]:
                py = py * y + mp.mpc(c)
            x, y = y, py - d * x
        return J


def eig2(M: np.ndarray) -> tuple[complex, complex]:
    """Eigenvalues of a 2x2 complex matrix by the quadratic formula,
    ordered by ascending modulus."""
    tr = M[0, 0] + M[1, 1]
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    disc = cmath.sqrt(complex(tr * tr - 4 * det))
    l1 = complex(tr + disc) / 2
    l2 = complex(tr - disc) / 2
    # refine the smaller root through the product to limit cancellation
    if abs(l1) >= abs(l2) and l1 != 0:
        l2 = complex(det) / l1
    elif l2 != 0:
        l1 = complex(det) / l2
    return (l1, l2) if abs(l1) <= abs(l2) else (l2, l1)
