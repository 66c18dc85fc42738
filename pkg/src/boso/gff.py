"""Closed-form free-field correlation functions on the unit disk.

Charge (imaginary-exponential) correlators, mixed charge/field/derivative
correlators via the Isserlis expansion, Wick-ordered trig combinations, and
the connected two-point kernel of the charge-2 cosine that renormalizes the
interaction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import partitions as pa
from .disk import DomainError, green, green_deriv, harmonic_part, require_in_disk

EULER_GAMMA = 0.5772156649015329

SQRT_PI = math.sqrt(math.pi)
TWO_SQRT_PI = 2.0 * math.sqrt(math.pi)


def wick_constant(gamma: float) -> float:
    """Cutoff-free factor of the Wick-ordered exponential, exp(g^2(gam_E - log 4)/8pi)."""
    return math.exp(gamma * gamma * (EULER_GAMMA - math.log(4.0)) / (8.0 * math.pi))


@dataclass(frozen=True)
class ChargeConfig:
    """Charges gamma_j at pairwise distinct points x_j."""

    points: tuple
    gammas: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        require_in_disk(pts, "charge point")
        for i, j in combinations(range(len(pts)), 2):
            if pts[i] == pts[j]:
                raise DomainError("charge points must be pairwise distinct")

    @staticmethod
    def of(*pairs) -> "ChargeConfig":
        return ChargeConfig(tuple(complex(p) for p, _ in pairs),
                            tuple(float(g) for _, g in pairs))


@dataclass(frozen=True)
class FieldSpec:
    """Field insertions phi / d phi / dbar phi at the given points."""

    points: tuple
    derivs: tuple  # entries 0, "d", "db"

    @staticmethod
    def of(*pairs) -> "FieldSpec":
        return FieldSpec(tuple(complex(p) for p, d in pairs), tuple(d for _, d in pairs))


def charge_correlation(cfg: ChargeConfig) -> float:
    """exp(-sum_{j<j'} g_j g_j' G(x_j,x_j') - (1/2) sum_j g_j^2 g(x_j,x_j))."""
    pts = np.asarray(cfg.points, dtype=complex)
    gam = np.asarray(cfg.gammas, dtype=float)
    expo = -0.5 * float(np.sum(gam * gam * harmonic_part(pts, pts)))
    for i, j in combinations(range(len(pts)), 2):
        expo -= gam[i] * gam[j] * float(green(pts[i], pts[j]))
    return math.exp(expo)


def _pair_value(spec: FieldSpec, k: int, kk: int):
    return green_deriv(spec.points[k], spec.points[kk], spec.derivs[k], spec.derivs[kk])


def _single_value(cfg: ChargeConfig, spec: FieldSpec, k: int):
    y, d = spec.points[k], spec.derivs[k]
    tot = 0j
    for x, g in zip(cfg.points, cfg.gammas):
        tot += g * green_deriv(y, x, d, 0)
    return 1j * tot


def _isserlis(cfg: ChargeConfig, spec: FieldSpec):
    """Gaussian moment of prod_k (phi(y_k) + i sum_j g_j G(y_k, x_j)) with derivatives."""
    m = len(spec.points)
    if m == 0:
        return 1.0
    idx = tuple(range(m))

    def rec(rest):
        if not rest:
            return 1.0
        total = 0j
        k = rest[0]
        tail = rest[1:]
        total += _single_value(cfg, spec, k) * rec(tail)
        for pos, kk in enumerate(tail):
            sub = tail[:pos] + tail[pos + 1:]
            total += _pair_value(spec, k, kk) * rec(sub)
        return total

    return rec(idx)


def mixed_correlation(cfg: ChargeConfig, spec: FieldSpec) -> complex:
    """< prod :e^{i g_j phi(x_j)}: prod D_k phi(y_k) > on the disk."""
    all_pts = list(cfg.points) + list(spec.points)
    for i, j in combinations(range(len(all_pts)), 2):
        if all_pts[i] == all_pts[j]:
            raise DomainError("charge and field points must be pairwise distinct")
    return charge_correlation(cfg) * _isserlis(cfg, spec)


@dataclass(frozen=True)
class TrigFactor:
    """One Wick-ordered trig insertion :cos(g phi(x)): or :sin(g phi(x)):."""

    point: complex
    gamma: float
    kind: str = "cos"  # cos | sin

    def terms(self):
        if self.kind == "cos":
            return ((0.5, self.gamma), (0.5, -self.gamma))
        if self.kind == "sin":
            return ((-0.5j, self.gamma), (0.5j, -self.gamma))
        raise ValueError(f"unknown trig kind {self.kind!r}")


def cos_factor(point, gamma=TWO_SQRT_PI) -> TrigFactor:
    return TrigFactor(complex(point), float(gamma), "cos")


def sin_factor(point, gamma=SQRT_PI) -> TrigFactor:
    return TrigFactor(complex(point), float(gamma), "sin")


def trig_correlation(factors, spec: FieldSpec | None = None) -> complex:
    """Expectation of a product of trig factors and field insertions.

    Expands each factor into its two charges and sums the 2^m resulting
    mixed correlations.
    """
    factors = list(factors)
    if spec is None:
        spec = FieldSpec((), ())
    total = 0j

    def rec(i, coeff, charges):
        nonlocal total
        if i == len(factors):
            cfg = ChargeConfig(tuple(f.point for f in factors), tuple(charges))
            total += coeff * mixed_correlation(cfg, spec)
            return
        for c, g in factors[i].terms():
            rec(i + 1, coeff * c, charges + [g])

    rec(0, 1.0 + 0j, [])
    return total


def counterterm_kernel(x: complex, y: complex) -> float:
    """Connected :cos(2 sqrt(pi) phi): two-point kernel.

    (cosh(4 pi G(x,y)) - 1) exp(-2 pi (g(x,x) + g(y,y))); positive, with a
    |x-y|^{-2} short-distance singularity.
    """
    if x == y:
        raise DomainError("counterterm kernel diverges on the diagonal")
    g_sum = float(harmonic_part(x, x) + harmonic_part(y, y))
    return float(np.cosh(4.0 * math.pi * green(x, y)) - 1.0) * math.exp(-2.0 * math.pi * g_sum)


def gff_cumulant(blocks, spec: FieldSpec | None = None) -> complex:
    """Joint cumulant of trig-factor groups via the moments-to-cumulants map.

    blocks is a sequence of groups of TrigFactor; field insertions, when
    present, ride along with the first block.
    """
    blocks = [list(b) for b in blocks]
    labels = tuple(range(len(blocks)))

    def moment(sub):
        factors = [f for j in sub for f in blocks[j]]
        sp = spec if (spec is not None and 0 in sub) else None
        return trig_correlation(factors, sp)

    return pa.cumulant(moment, labels)
