"""Mass-perturbation series of Ising correlations around the critical point.

The p-th order coefficient functions (A_p for disorder-fermion, B_p for
fermion-fermion correlations) obey the first-order recursion

    f_{p+1}(z) = (1/pi) int [i alpha(x) conj(f_p(x))] (star) K(z, x) d^2x,

with the critical spin-weighted pair correlations as kernel K; the truncated
series f = sum_p (-m)^p f_p solves the mass-m Vekua equation.  A coefficient
tower keeps the values of every level on a fixed quadrature grid over the
support of the mass bump, so one batched critical solve per configuration
serves all evaluations.  The moving 1/(z - x) kernel pole is tamed by
subtracting the constant-coefficient model c(z)/(pi (z - x)) inside a ball
centered at z: the model integrates to zero over any such ball, so the
subtraction changes nothing analytically while bounding the summand.

Leading coefficients beta_(p), lambda_(p) at a spin come from the
contour-plus-area extraction, radius independent by construction; the area
integrand only involves the tower one level down.  Conventions follow the
critical module:

    f_p ~ e^{-i pi/4}[beta_p (z-a)^{-1/2} + lambda_p (z-a)^{1/2}
                      + beta'_p conj((z-a)^{1/2})] + o(|z-a|^{1/2}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critical import (E4, DisorderSolver, FermionPairSpinor, PairSolver,
                       critical_correlation, energy_one_point, spin_sqrt,
                       vacuum_energy_correlation, vacuum_energy_pair)
from .disk import DomainError
from .partitions import partitions
from .quadrature import (BudgetExceeded, SingularityHint, contour_circle,
                         integrate_disk)

E4BAR = np.conj(E4)
_GL3, _GL3W = np.polynomial.legendre.leggauss(3)


class MassProfile:
    """Smooth compactly supported radial bump A (1 - |x-c|^2/r^2)^3.

    C^2 at the support edge; the support must close inside the unit disk.
    """

    def __init__(self, amplitude: float = 1.0, center: complex = 0.0,
                 radius: float = 0.6):
        center = complex(center)
        if abs(center) + radius >= 1.0:
            raise DomainError("mass profile support must close inside the disk")
        self.amplitude = float(amplitude)
        self.center = center
        self.radius = float(radius)
        self.sup_norm = abs(amplitude)

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        s = np.abs(x - self.center) ** 2 / self.radius**2
        return np.where(s < 1.0, self.amplitude * (1.0 - np.minimum(s, 1.0)) ** 3, 0.0)

    def grad(self, x):
        """Gradient as the complex number d/dx1 + i d/dx2."""
        x = np.asarray(x, dtype=complex)
        d = x - self.center
        s = np.abs(d) ** 2 / self.radius**2
        fac = np.where(s < 1.0,
                       -6.0 * self.amplitude * (1.0 - np.minimum(s, 1.0)) ** 2
                       / self.radius**2, 0.0)
        return fac * d


def star_combine(c, pair1, pair_i):
    """c (star) psi^{[star]} = Re(c) psi^{[1]} - Im(c) psi^{[i]} on values."""
    return np.real(c) * pair1 - np.imag(c) * pair_i


class SupportGrid:
    """Fixed polar quadrature mesh over the support ball of a mass profile.

    Cells refine toward the listed hot points (spins, fermion poles); each
    cell carries a 3x3 Gauss-Legendre rule in the (radial fraction, angle)
    coordinates.
    """

    def __init__(self, alpha: MassProfile, hot_points=(), base_radial: int = 10,
                 base_angular: int = 20, refine_levels: int = 5):
        self.alpha = alpha
        c0, big_r = alpha.center, alpha.radius
        hot = [complex(h) for h in hot_points if abs(complex(h) - c0) < big_r]
        cells = [(i / base_radial, (i + 1) / base_radial,
                  2 * math.pi * j / base_angular, 2 * math.pi * (j + 1) / base_angular)
                 for i in range(base_radial) for j in range(base_angular)]

        def contains(cell, h):
            s = abs(h - c0) / big_r
            th = math.atan2((h - c0).imag, (h - c0).real) % (2 * math.pi)
            s0, s1, t0, t1 = cell
            return s0 <= s <= s1 and t0 <= th <= t1

        for _ in range(refine_levels):
            new = []
            for cell in cells:
                if any(contains(cell, h) for h in hot):
                    s0, s1, t0, t1 = cell
                    sm, tm = 0.5 * (s0 + s1), 0.5 * (t0 + t1)
                    new.extend([(s0, sm, t0, tm), (sm, s1, t0, tm),
                                (s0, sm, tm, t1), (sm, s1, tm, t1)])
                else:
                    new.append(cell)
            cells = new

        nodes, weights = [], []
        for s0, s1, t0, t1 in cells:
            ss = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * _GL3
            sw_all = _GL3W * 0.5 * (s1 - s0)
            tt = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * _GL3
            tw_all = _GL3W * 0.5 * (t1 - t0)
            for s_val, sw in zip(ss, sw_all):
                for t_val, tw in zip(tt, tw_all):
                    nodes.append(c0 + s_val * big_r * np.exp(1j * t_val))
                    weights.append(sw * tw * s_val * big_r**2)
        self.nodes = np.asarray(nodes, dtype=complex)
        self.weights = np.asarray(weights, dtype=float)
        self.alpha_vals = np.asarray(alpha(self.nodes), dtype=float)

    @property
    def size(self) -> int:
        return self.nodes.size

    def ball_radius(self, z: complex, cap: float = 0.35) -> float:
        """Largest pole-subtraction radius with B(z, rho) inside the support.

        A generous default keeps the kernel poles of every nearby quadrature
        node smoothly cancelled when evaluating between nodes.
        """
        room = self.alpha.radius - abs(complex(z) - self.alpha.center)
        return max(0.0, min(cap, room))


class MassSeries:
    """Coefficient tower f_0, f_1, ..., f_P on a fixed support grid.

    kind "disorder": f_0 is the disorder-fermion spinor with beta(a_k) = +1;
    kind "pair": f_0 = <sigma_A psi_z psi_w^{[eta]}>_0 / <sigma_A>_0.
    """

    def __init__(self, spins, alpha: MassProfile, kind: str = "disorder",
                 k: int = 0, w: complex | None = None, eta: complex = 1.0,
                 grid: SupportGrid | None = None):
        self.spins = tuple(complex(a) for a in spins)
        self.alpha = alpha
        self.kind = kind
        hot = list(self.spins)
        self.w = None
        if kind == "pair":
            if w is None:
                raise ValueError("pair series needs the fixed fermion point w")
            self.w = complex(w)
            self.eta = complex(eta)
            hot.append(self.w)
            self._base_solver = PairSolver(self.spins, [self.w]) if self.spins else None
        elif kind == "disorder":
            if not self.spins:
                raise DomainError("disorder series needs at least one spin")
            self.k = int(k)
            self._base = DisorderSolver(self.spins, self.k)
        else:
            raise ValueError(f"unknown series kind {kind!r}")
        self.grid = grid or SupportGrid(alpha, hot_points=hot)
        self.kernel = PairSolver(self.spins, self.grid.nodes)
        self.levels = [np.asarray(self.base_values(self.grid.nodes))]

    # -- level 0 -------------------------------------------------------------
    def base_values(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.kind == "disorder":
            return self._base(z)
        if not self.spins:
            return FermionPairSpinor(self.w, self.eta)(z)
        out = np.empty(z.shape, dtype=complex)
        flat = out.ravel()
        for idx, zz in enumerate(z.ravel()):
            f1, fi = self._base_solver.eval(complex(zz))[0]
            flat[idx] = np.real(self.eta) * f1 + np.imag(self.eta) * fi
        return out

    # -- recursion on the grid ------------------------------------------------
    def extend(self, p_max: int) -> None:
        while len(self.levels) <= p_max:
            prev = self.levels[-1]
            c = 1j * self.grid.alpha_vals * np.conj(prev)
            vals = np.empty(self.grid.size, dtype=complex)
            for i, z in enumerate(self.grid.nodes):
                cz = complex(c[i])
                vals[i] = self._grid_sum(complex(z), c, cz, skip=i)
            self.levels.append(vals)

    def _grid_sum(self, z: complex, c, c_at_z: complex, skip: int | None = None) -> complex:
        g = self.grid
        with np.errstate(divide="ignore", invalid="ignore"):
            fvals = self.kernel.eval(z)  # (G, 2); the z-node entry is masked below
            terms = g.weights * star_combine(c, fvals[:, 0], fvals[:, 1]) / math.pi
        terms = np.asarray(terms, dtype=complex)
        terms[~np.isfinite(terms)] = 0.0
        if skip is not None:
            terms[skip] = 0.0
        rho = g.ball_radius(z)
        if rho > 0.0:
            dist = np.abs(g.nodes - z)
            mask = (dist < rho) & (dist > 1e-13)
            if np.any(mask):
                # radially cut-off pole model: integrates to zero over the
                # centered ball by symmetry, and the C^1 cutoff avoids a
                # quadrature kink at the ball boundary
                taper = (1.0 - (dist[mask] / rho) ** 2) ** 2
                terms[mask] -= g.weights[mask] * taper * (
                    c_at_z / (math.pi * (z - g.nodes[mask])))
        return complex(np.sum(terms))

    # -- evaluation ------------------------------------------------------------
    def eval(self, p: int, z: complex) -> complex:
        """f_p(z) from the grid representation (p = 0 exact)."""
        if p >= len(self.levels):
            self.extend(p)
        if p == 0:
            return complex(self.base_values(np.asarray([z]))[0])
        c = 1j * self.grid.alpha_vals * np.conj(self.levels[p - 1])
        c_at_z = 1j * complex(self.alpha(z)) * np.conj(self.eval(p - 1, z))
        return self._grid_sum(complex(z), c, c_at_z)

    def eval_batch(self, p: int, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        return np.asarray([self.eval(p, complex(zz)) for zz in z.ravel()]).reshape(z.shape)

    def eval_accurate(self, p: int, z: complex, tol: float = 1e-7,
                      budget: int = 4000) -> complex:
        """Fully adaptive evaluation; supported for p = 1 (level 0 is exact)."""
        if p == 0:
            return self.eval(0, z)
        if p != 1:
            raise ValueError("adaptive evaluation supports p = 1 only; use eval()")
        z = complex(z)
        a = self.alpha

        def integrand(x):
            c = 1j * np.asarray(a(x)) * np.conj(self.base_values(x))
            sol = PairSolver(self.spins, x)
            fv = sol.eval(z)
            return star_combine(c, fv[:, 0], fv[:, 1]) / math.pi

        hints = [SingularityHint(s, "inverse_first") for s in self.spins
                 if abs(s - a.center) < a.radius]
        if abs(z - a.center) < a.radius:
            hints.append(SingularityHint(z, "inverse_first"))
        if self.w is not None and abs(self.w - a.center) < a.radius:
            hints.append(SingularityHint(self.w, "inverse_first"))
        try:
            res = integrate_disk(integrand, hints, tol=tol, center=a.center,
                                 radius=a.radius, budget=budget)
        except BudgetExceeded as exc:
            if exc.result.error_estimate > 50 * tol:
                raise
            res = exc.result
        return complex(res.value)


def advance_coefficient(series: MassSeries, p: int) -> None:
    """Materialize tower levels up to order p on the grid."""
    series.extend(p)


# ---------------------------------------------------------------------------
# coefficient extraction at a spin: contour + area, radius independent
# ---------------------------------------------------------------------------

@dataclass
class SpinCoefficients:
    beta: complex
    beta_prime: complex
    lam: complex


def coefficient_beta_lambda(series: MassSeries, p: int, a: complex,
                            radius: float | None = None, contour_m: int = 64,
                            area_tol: float = 1e-8, accurate: bool = False,
                            _cache: dict | None = None) -> SpinCoefficients:
    """beta_(p), beta'_(p), lambda_(p) of the tower level p at the spin a.

    accurate=True routes contour evaluations of f_1 through the adaptive
    integrator instead of the grid representation.
    """
    a = complex(a)
    series.extend(p)
    cache = _cache if _cache is not None else {}

    clear = 1.0 - abs(a)
    for s in series.spins:
        if s != a:
            clear = min(clear, abs(s - a))
    if series.w is not None:
        clear = min(clear, abs(series.w - a))
    r = radius if radius is not None else 0.25 * clear
    if r >= clear:
        raise DomainError("extraction radius reaches another singularity")

    def f_p_at(pp, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if pp == 0:
            return series.base_values(z)
        if accurate and pp == 1:
            return np.asarray([series.eval_accurate(1, complex(zz))
                               for zz in z.ravel()]).reshape(z.shape)
        return series.eval_batch(pp, z)

    def betas(pp) -> complex:
        key = ("beta", pp, a)
        if key in cache:
            return cache[key]
        if pp == 0:
            if series.kind == "disorder":
                val = complex(series._base.beta_at(series.spins.index(a)))
            else:
                sol = series._base_solver
                b1, bi = sol.beta_at(series.spins.index(a))[0]
                val = complex(np.real(series.eta) * b1 + np.imag(series.eta) * bi)
        else:
            cont = contour_circle(lambda z: f_p_at(pp, z) / spin_sqrt(z, a),
                                  a, r, mode="trapezoid-M", m=contour_m)
            # dbar f_p = + i alpha conj(f_{p-1}): the Cauchy kernel of the
            # recursion carries a plus sign, the series alternation (-m)^p
            # restores the massive equation for the resummed function
            def area_int(z):
                return (1j * np.asarray(series.alpha(z))
                        * np.conj(f_p_at(pp - 1, z))) / spin_sqrt(z, a)
            area = integrate_disk(area_int, [SingularityHint(a, "inverse_first")],
                                  tol=area_tol, center=a, radius=r).value
            val = complex(E4 * (cont / (2j * math.pi) - area / math.pi))
        cache[key] = val
        return val

    beta_p = betas(p)
    beta_prev = betas(p - 1) if p >= 1 else None
    # conj-root coefficient matching the leading dbar singularity
    bp = -2.0 * complex(series.alpha(a)) * np.conj(beta_prev) if p >= 1 else 0.0

    def dagger(z):
        z = np.asarray(z, dtype=complex)
        val = f_p_at(p, z) - E4BAR * beta_p / spin_sqrt(z, a)
        if p >= 1:
            val = val - E4BAR * bp * np.conj(spin_sqrt(z, a))
        return val

    cont2 = contour_circle(lambda z: dagger(z) / spin_sqrt(z, a) ** 3,
                           a, r, mode="trapezoid-M", m=contour_m)
    if p >= 1:
        def area_int2(z):
            # dbar of the dagger function: +i alpha conj(f_{p-1}) minus the
            # dbar of the removed conj-root term; the leading singularities
            # cancel at a, leaving an integrable integrand
            z = np.asarray(z, dtype=complex)
            dbar = (1j * np.asarray(series.alpha(z)) * np.conj(f_p_at(p - 1, z))
                    - E4BAR * bp * 0.5 / np.conj(spin_sqrt(z, a)))
            return dbar / spin_sqrt(z, a) ** 3
        area2 = integrate_disk(area_int2, [SingularityHint(a, "inverse_first")],
                               tol=area_tol, center=a, radius=r).value
    else:
        area2 = 0.0
    lam = complex(E4 * (cont2 / (2j * math.pi) - area2 / math.pi))
    return SpinCoefficients(beta=beta_p, beta_prime=complex(bp), lam=lam)


def beta_density(series: MassSeries, p: int, a: complex,
                 tol: float = 1e-9, budget: int = 4000) -> complex:
    """beta_(p) by integrating the analytic coefficient density.

    At the critical base point, the beta extraction commutes with the mass
    integral (absolutely convergent density ~ |x-a|^{-1}):

        beta(a; f_p) = (1/pi) int [i alpha(x) conj(f_{p-1}(x))]
                                  (star) beta(a; K(., x)) d^2x.

    The analogous lambda density is only conditionally convergent and is not
    offered; use the radius-independent contour-plus-area extraction.
    """
    a = complex(a)
    if p < 1:
        raise ValueError("density extraction applies to p >= 1")
    series.extend(p - 1)
    j = series.spins.index(a)
    alpha = series.alpha

    def density(x):
        x = np.asarray(x, dtype=complex)
        if p == 1:
            prev = series.base_values(x)
        else:
            prev = series.eval_batch(p - 1, x)
        c = 1j * np.asarray(alpha(x)) * np.conj(prev)
        sol = PairSolver(series.spins, x)
        beta = sol.beta_at(j)
        return star_combine(c, beta[:, 0], beta[:, 1]) / math.pi

    others = tuple(s for s in series.spins if s != a) \
        + ((series.w,) if series.w else ())
    hints = _support_hints(alpha, (a,) + others)
    res = integrate_disk(density, hints, tol=tol, center=alpha.center,
                         radius=alpha.radius, budget=budget)
    return complex(res.value)


def _base_beta(series: MassSeries, j: int) -> complex:
    if series.kind == "disorder":
        return complex(series._base.beta_at(j))
    b1, bi = series._base_solver.beta_at(j)[0]
    return complex(np.real(series.eta) * b1 + np.imag(series.eta) * bi)


# ---------------------------------------------------------------------------
# batched critical energy correlators (shared by the Taylor coefficients)
# ---------------------------------------------------------------------------

def spin_energy_ratio_batch(spins, u) -> np.ndarray:
    """<sigma_A eps_u>_0/<sigma_A>_0 for a batch of energy points."""
    u = np.atleast_1d(np.asarray(u, dtype=complex))
    if not spins:
        return 1.0 / (1.0 - np.abs(u) ** 2)
    sol = PairSolver(spins, u)
    return np.real(0.5j * sol.merged_psistar())


def spin_energy_pair_batch(spins, u1: complex, u2) -> np.ndarray:
    """<sigma_A eps_{u1} eps_{u2}>_0/<sigma_A>_0, batched over u2."""
    u1 = complex(u1)
    u2 = np.atleast_1d(np.asarray(u2, dtype=complex))
    if not spins:
        return np.asarray([vacuum_energy_pair(u1, z) for z in u2])
    sol2 = PairSolver(spins, u2)
    m34 = sol2.merged_psistar()
    sol1 = PairSolver(spins, [u1])
    m12 = complex(sol1.merged_psistar()[0])
    ev = sol2.eval(u1)
    f1, fi = ev[:, 0], ev[:, 1]
    m13 = f1 + 1j * fi            # <sigma psi_{u1} psi_{u2}>
    m14 = f1 - 1j * fi            # <sigma psi_{u1} psi*_{u2}>
    m23 = np.conj(m14)            # <sigma psi*_{u1} psi_{u2}>
    m24 = np.conj(m13)            # <sigma psi*_{u1} psi*_{u2}>
    pf = m12 * m34 - m13 * m24 + m14 * m23
    return np.real(-0.25 * pf)


def _support_hints(alpha: MassProfile, points):
    return [SingularityHint(complex(s), "inverse_first") for s in points
            if abs(complex(s) - alpha.center) < alpha.radius]


# ---------------------------------------------------------------------------
# pure spin Taylor coefficients of log <sigma_A>_{m alpha} / <sigma_A>_0
# ---------------------------------------------------------------------------

def pure_spin_taylor(p: int, spins, alpha: MassProfile, tol: float = 1e-6,
                     tol_inner: float = 1e-4) -> float:
    """p-th coefficient of log(<sigma_A>_{m alpha}/<sigma_A>_0) at m = 0, p <= 2."""
    spins = tuple(complex(a) for a in spins)
    if p == 0:
        return 0.0
    if p == 1:
        def integrand(u):
            vals = spin_energy_ratio_batch(spins, u) - 1.0 / (1.0 - np.abs(u) ** 2)
            return np.asarray(alpha(u)) * vals
        res = integrate_disk(integrand, _support_hints(alpha, spins), tol=tol,
                             center=alpha.center, radius=alpha.radius)
        return -float(res.value) / math.pi
    if p == 2:
        def outer(u1_arr):
            u1_arr = np.atleast_1d(np.asarray(u1_arr, dtype=complex))
            out = np.empty(u1_arr.shape)
            flat = out.ravel()
            for idx, u1 in enumerate(u1_arr.ravel()):
                u1 = complex(u1)
                ser1 = float(spin_energy_ratio_batch(spins, [u1])[0])
                e1 = energy_one_point(u1)

                def inner(u2):
                    pair = spin_energy_pair_batch(spins, u1, u2)
                    vac = np.asarray([vacuum_energy_pair(u1, complex(z)) for z in u2])
                    ser2 = spin_energy_ratio_batch(spins, u2)
                    e2 = 1.0 / (1.0 - np.abs(u2) ** 2)
                    t = (pair - vac) - (ser1 * ser2 - e1 * e2)
                    return np.asarray(alpha(u2)) * t

                hints = _support_hints(alpha, (u1,) + spins)
                val = integrate_disk(inner, hints, tol=tol_inner,
                                     center=alpha.center, radius=alpha.radius).value
                flat[idx] = float(np.real(val)) * float(alpha(u1))
            return out

        res = integrate_disk(outer, _support_hints(alpha, spins), tol=tol_inner,
                             center=alpha.center, radius=alpha.radius)
        return float(res.value) / (2.0 * math.pi**2)
    raise ValueError("pure_spin_taylor supports p <= 2")


# ---------------------------------------------------------------------------
# the log-derivative kernel along a path: massive spin correlation increments
# ---------------------------------------------------------------------------

def lambda_coefficients_at(a1: complex, other_spins, alpha: MassProfile,
                           p_max: int = 2, tol: float = 1e-6,
                           route: str = "density") -> list[complex]:
    """lambda_(p)(a1; A_p) for p = 1..p_max with the disorder tower at a1."""
    spins = (complex(a1),) + tuple(complex(s) for s in other_spins)
    series = MassSeries(spins, alpha, kind="disorder", k=0)
    series.extend(p_max - 1)
    out = []
    cache: dict = {}
    for p in range(1, p_max + 1):
        co = coefficient_beta_lambda(series, p, complex(a1), _cache=cache)
        out.append(co.lam)
    return out


def spin_log_ratio_increment(a1: complex, other_spins, alpha: MassProfile,
                             p_max: int = 2, path: str = "radial",
                             n_path: int = 10, waypoint: complex | None = None,
                             boundary_margin: float = 0.985) -> list[float]:
    """Coefficients L_p of the increment log ratio for adding the spin a1.

    The increment is sum_p (-m)^p L_p with
    L_p = Re int_{a_b}^{a1} (1/2) lambda(a'; A_p) da' along the chosen path
    from the boundary; "radial" runs straight in from a_b = a1/|a1| (scaled to
    the margin), "dogleg" takes a two-segment detour through the waypoint.
    """
    a1 = complex(a1)
    a_b = (a1 / abs(a1) if a1 != 0 else 1.0) * boundary_margin
    if path == "radial":
        segs = [(a_b, a1)]
    elif path == "dogleg":
        if waypoint is None:
            mid = 0.5 * (a_b + a1)
            waypoint = mid + 0.25j * (a1 - a_b)
        segs = [(a_b, complex(waypoint)), (complex(waypoint), a1)]
    else:
        raise ValueError(f"unknown path {path!r}")

    nodes, wts = np.polynomial.legendre.leggauss(n_path)
    out = np.zeros(p_max)
    for z0, z1 in segs:
        dz = z1 - z0
        for t, wt in zip(nodes, wts):
            a_prime = z0 + 0.5 * (t + 1.0) * dz
            lams = lambda_coefficients_at(a_prime, other_spins, alpha, p_max=p_max)
            for p in range(1, p_max + 1):
                out[p - 1] += 0.5 * wt * np.real(0.5 * lams[p - 1] * dz)
    return [float(v) for v in out]


def spin_log_ratio(m: float, alpha: MassProfile, spins, p_max: int = 2,
                   increments: list[list[float]] | None = None,
                   radius_guard: float = 0.5, **path_kwargs) -> float:
    """log(<sigma_A>_{m alpha}/<sigma_A>_0) by adding spins one at a time.

    Refuses |m| beyond half of the empirical radius |L_p/L_{p+1}| of the
    truncated increments.
    """
    spins = tuple(complex(a) for a in spins)
    if increments is None:
        increments = []
        for idx, a1 in enumerate(spins):
            increments.append(spin_log_ratio_increment(
                a1, spins[idx + 1:], alpha, p_max=p_max, **path_kwargs))
    total = 0.0
    for coeffs in increments:
        for p, c in enumerate(coeffs, start=1):
            total += (-m) ** p * c
        nonzero = [abs(c) for c in coeffs if abs(c) > 1e-14]
        if len(nonzero) >= 2:
            rad = nonzero[-2] / nonzero[-1]
            if abs(m) > radius_guard * rad:
                raise DomainError(
                    f"|m| = {abs(m):g} beyond {radius_guard:g} of the empirical "
                    f"series radius {rad:g}")
    return total


# ---------------------------------------------------------------------------
# doubled correlations: Taylor coefficients at m0 = 0
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DoubledQuery:
    """Doubled observable: (sigma sigma~) pairs, (Psi Psi~) pairs, (eps + eps~) sums."""

    sigma_pairs: tuple = ()
    fermion_pairs: tuple = ()   # entries (point, kind) with kind psi | psistar
    energy_sums: tuple = ()

    def spins(self):
        return tuple(complex(a) for a in self.sigma_pairs)


def _single_ratio(query: DoubledQuery, energies) -> complex:
    """<sigma_U Psi_Z eps_S>_0 / <sigma_U>_0 for one copy."""
    spins = query.spins()
    ferm = [(complex(pt), kind) for pt, kind in query.fermion_pairs]
    if not ferm and not spins:
        return vacuum_energy_correlation(energies)
    if not ferm:
        if len(energies) == 0:
            return 1.0
        if len(energies) == 1:
            return complex(spin_energy_ratio_batch(spins, [energies[0]])[0])
        if len(energies) == 2:
            return complex(spin_energy_pair_batch(spins, energies[0], [energies[1]])[0])
    return critical_correlation(spins=spins, fermions=ferm, energies=energies)


def doubled_moment(query: DoubledQuery, extra_energies=()) -> complex:
    """<(sigma sigma~)_U (Psi Psi~)_Z prod (eps+eps~)>_0 / <(sigma sigma~)_U>_0.

    The energy set is the query's own (eps+eps~) insertions plus the extra
    points; each doubled energy sum expands over the two independent copies.
    """
    pts = tuple(complex(u) for u in query.energy_sums) \
        + tuple(complex(u) for u in extra_energies)
    total = 0j
    for bits in range(1 << len(pts)):
        s1 = [pts[i] for i in range(len(pts)) if bits >> i & 1]
        s2 = [pts[i] for i in range(len(pts)) if not bits >> i & 1]
        total += _single_ratio(query, tuple(s1)) * _single_ratio(query, tuple(s2))
    return total


def doubled_vacuum_moment(energies) -> float:
    pts = tuple(complex(u) for u in energies)
    total = 0.0
    for bits in range(1 << len(pts)):
        s1 = [pts[i] for i in range(len(pts)) if bits >> i & 1]
        s2 = [pts[i] for i in range(len(pts)) if not bits >> i & 1]
        total += vacuum_energy_correlation(s1) * vacuum_energy_correlation(s2)
    return total


def doubled_energy_cumulant_2pt(w: complex, x: complex) -> float:
    """<(eps+eps~)_w ; (eps+eps~)_x>_0^T = 2(<eps_w eps_x>_0 - <eps_w><eps_x>)."""
    return 2.0 * (vacuum_energy_pair(w, x)
                  - energy_one_point(w) * energy_one_point(x))


def _doubled_cumulant(query: DoubledQuery, x_points) -> complex:
    """<D-hat ; E_{x_1}; ...; E_{x_p}>^T with D-hat the ratio-normalized
    doubled observable and E the doubled energy sum; moments of blocks
    without D-hat are vacuum doubled moments."""
    labels = ("obs",) + tuple(range(len(x_points)))

    def moment(block):
        pts = tuple(x_points[j] for j in block if j != "obs")
        if "obs" in block:
            return doubled_moment(query, pts)
        return doubled_vacuum_moment(pts)

    from .partitions import cumulant
    return cumulant(moment, labels)


def _enboso_kernel(query: DoubledQuery, x_points) -> complex:
    """Order-p integrand T(x) of the series for <D>_{m a}/<sigma sigma~>_{m a}.

    Sums over matchings of observable energies to integration points (the
    two-point doubled cumulants), a subset of remaining points joining the
    main correlation, and signed factorial-weighted partitions of the rest
    into spin-weighted doubled energy blocks.
    """
    from itertools import combinations, permutations

    w_pts = tuple(complex(u) for u in query.energy_sums)
    p = len(x_points)
    spin_query = DoubledQuery(sigma_pairs=query.sigma_pairs)
    total = 0j
    r = len(w_pts)
    for i_size in range(min(r, p) + 1):
        for i_set in combinations(range(r), i_size):
            rest_w = tuple(w_pts[i] for i in range(r) if i not in i_set)
            reduced = DoubledQuery(query.sigma_pairs, query.fermion_pairs, rest_w)
            for targets in permutations(range(p), i_size):
                d2 = 1.0
                for wi, xj in zip(i_set, targets):
                    d2 *= doubled_energy_cumulant_2pt(w_pts[wi], x_points[xj])
                remaining = [j for j in range(p) if j not in targets]
                for c_size in range(len(remaining) + 1):
                    for c_set in combinations(remaining, c_size):
                        dm = doubled_moment(reduced,
                                            tuple(x_points[j] for j in c_set))
                        lam_set = [j for j in remaining if j not in c_set]
                        if lam_set:
                            lam_sum = 0.0
                            for lam in partitions(tuple(lam_set)):
                                term = (-1.0) ** len(lam) * math.factorial(len(lam))
                                for block in lam:
                                    term *= np.real(doubled_moment(
                                        spin_query,
                                        tuple(x_points[j] for j in block)))
                                lam_sum += term
                        else:
                            lam_sum = 1.0
                        total += d2 * dm * lam_sum
    return total


def doubled_taylor(p: int, query: DoubledQuery, alpha: MassProfile,
                   tol: float = 1e-5) -> complex:
    """p-th Taylor coefficient of <D>_{m alpha} / <(sigma sigma~)_U>_0 at m = 0.

    Assembled as the Cauchy product of the energy-insertion series (ratio by
    the doubled spin correlation) and the doubled spin series itself.  For
    pure spin queries this reduces to doubled_spin_coefficient.
    """
    spins = query.spins()
    has_extra = bool(query.fermion_pairs or query.energy_sums)
    if not has_extra:
        return doubled_spin_coefficient(p, spins, alpha, tol=tol)
    if p > 1:
        raise ValueError("doubled_taylor with fermion/energy insertions caps at p = 1")

    def ratio_coeff(q: int) -> complex:
        if q == 0:
            return doubled_moment(query)

        def integrand(u):
            u = np.atleast_1d(np.asarray(u, dtype=complex))
            vals = np.asarray([_enboso_kernel(query, (complex(z),))
                               for z in u.ravel()]).reshape(u.shape)
            return np.asarray(alpha(u)) * vals

        pts = spins + tuple(complex(x) for x, _ in query.fermion_pairs) \
            + tuple(complex(x) for x in query.energy_sums)
        res = integrate_disk(integrand, _support_hints(alpha, pts), tol=tol,
                             center=alpha.center, radius=alpha.radius)
        return -complex(res.value) / math.pi

    total = 0j
    for q in range(p + 1):
        s_part = 1.0 if p == q else doubled_spin_coefficient(p - q, spins, alpha, tol=tol)
        total += ratio_coeff(q) * s_part
    return total


def doubled_spin_coefficient(p: int, spins, alpha: MassProfile,
                             tol: float = 1e-5, tol_inner: float = 1e-4) -> float:
    """p-th coefficient of <sigma_A>^2_{m alpha}/<sigma_A>^2_0 via doubled cumulants."""
    spins = tuple(complex(a) for a in spins)
    query = DoubledQuery(sigma_pairs=spins)
    if p == 0:
        return 1.0
    if p == 1:
        def integrand(u):
            u = np.atleast_1d(np.asarray(u, dtype=complex))
            vals = np.asarray([np.real(_doubled_cumulant(query, (complex(z),)))
                               for z in u])
            return np.asarray(alpha(u)) * vals
        res = integrate_disk(integrand, _support_hints(alpha, spins), tol=tol,
                             center=alpha.center, radius=alpha.radius)
        return -float(res.value) / math.pi
    if p == 2:
        def outer(u1_arr):
            u1_arr = np.atleast_1d(np.asarray(u1_arr, dtype=complex))
            out = np.empty(u1_arr.shape)
            flat = out.ravel()
            for idx, u1 in enumerate(u1_arr.ravel()):
                u1 = complex(u1)

                def inner(u2):
                    u2 = np.atleast_1d(np.asarray(u2, dtype=complex))
                    vals = np.asarray([np.real(_doubled_cumulant(query, (u1, complex(z))))
                                       for z in u2])
                    return np.asarray(alpha(u2)) * vals

                val = integrate_disk(inner, _support_hints(alpha, (u1,) + spins),
                                     tol=tol_inner, center=alpha.center,
                                     radius=alpha.radius).value
                flat[idx] = float(np.real(val)) * float(alpha(u1))
            return out
        res = integrate_disk(outer, _support_hints(alpha, spins), tol=tol_inner,
                             center=alpha.center, radius=alpha.radius)
        return float(res.value) / (2.0 * math.pi**2)
    raise ValueError("doubled spin coefficients supported for p <= 2")
