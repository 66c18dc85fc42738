"""Closed-form potential theory of the unit disk.

Points are complex numbers; bulk points live in the open disk |z| < 1.
All functions broadcast over numpy arrays of points.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


class DomainError(ValueError):
    """A point or configuration violates a domain precondition."""


def require_in_disk(z, name: str = "point", tol: float = 0.0) -> None:
    """Raise DomainError unless every entry of z lies in the open unit disk."""
    if np.any(np.abs(np.asarray(z)) >= 1.0 - tol):
        raise DomainError(f"{name} must lie in the open unit disk")


def green(x, y):
    """Dirichlet Green's function G(x, y) of the unit disk.

    G = (1/2pi) log|x-y|^-1 - (1/2pi) log|1 - conj(x) y|^-1.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    d = np.abs(x - y)
    if np.any(d == 0.0):
        raise DomainError("green: coincident points")
    return (np.log(np.abs(1.0 - np.conj(x) * y)) - np.log(d)) / TWO_PI


def harmonic_part(x, y):
    """Harmonic part g(x, y) = (1/2pi) log|1 - conj(x) y| of the Green's function."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return np.log(np.abs(1.0 - np.conj(x) * y)) / TWO_PI


def conformal_radius(a):
    """Conformal radius 1 - |a|^2 of the unit disk seen from a; equals exp(2pi g(a,a))."""
    return 1.0 - np.abs(np.asarray(a, dtype=complex)) ** 2


class MobiusToZero:
    """Disk automorphism z -> (z - a)/(1 - conj(a) z) sending a to 0."""

    def __init__(self, a: complex):
        a = complex(a)
        if abs(a) >= 1.0:
            raise DomainError("mobius_to_zero: |a| must be < 1")
        self.a = a

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (z - self.a) / (1.0 - np.conj(self.a) * z)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return (1.0 - abs(self.a) ** 2) / (1.0 - np.conj(self.a) * z) ** 2

    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        return (w + self.a) / (1.0 + np.conj(self.a) * w)


def mobius_to_zero(a: complex) -> MobiusToZero:
    return MobiusToZero(a)


def boundary_tangent(theta):
    """Counterclockwise unit tangent i e^{i theta} at the boundary point e^{i theta}."""
    return 1j * np.exp(1j * np.asarray(theta, dtype=float))


# --- first and second derivatives of G and g, used by the GFF correlators ---
#
# With G real, d/dz G and d/dzbar G are complex conjugates.  Derivative codes:
# 0 = none, "d" = holomorphic d/dz, "db" = antiholomorphic d/dzbar, acting on
# the argument indicated.

def green_deriv(x, y, dx=0, dy=0):
    """Derivatives of G(x, y) in its arguments; dx, dy in {0, "d", "db"}."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if dx == 0 and dy == 0:
        return green(x, y)
    c = -1.0 / (2.0 * TWO_PI)
    if dx == "d" and dy == 0:
        return c * (1.0 / (x - y) + np.conj(y) / (1.0 - x * np.conj(y)))
    if dx == "db" and dy == 0:
        return np.conj(green_deriv(x, y, "d", 0))
    if dx == 0 and dy == "d":
        return green_deriv(y, x, "d", 0)
    if dx == 0 and dy == "db":
        return green_deriv(y, x, "db", 0)
    if dx == "d" and dy == "d":
        return c / (x - y) ** 2
    if dx == "db" and dy == "db":
        return np.conj(c / (x - y) ** 2)
    if dx == "d" and dy == "db":
        return c / (1.0 - x * np.conj(y)) ** 2
    if dx == "db" and dy == "d":
        return np.conj(c / (1.0 - x * np.conj(y)) ** 2)
    raise ValueError(f"unknown derivative codes {dx!r}, {dy!r}")


def harmonic_deriv(x, dx=0):
    """Derivative of the diagonal harmonic part g(x, x) = (1/2pi) log(1-|x|^2)."""
    x = np.asarray(x, dtype=complex)
    if dx == 0:
        return harmonic_part(x, x)
    val = -np.conj(x) / (1.0 - np.abs(x) ** 2) / TWO_PI
    if dx == "d":
        return val
    if dx == "db":
        return np.conj(val)
    raise ValueError(f"unknown derivative code {dx!r}")
