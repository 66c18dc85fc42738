"""Critical Ising correlations on the unit disk.

Spin-weighted fermion pair correlations are the unique holomorphic spinors
with prescribed singular behavior at the insertions and the boundary phase
condition conj(f(zeta)) = tau_zeta f(zeta).  They are built from a real basis
pulled back from the upper half plane; leading coefficients of basis elements
come from closed forms, so the linear solve is the only numerical step.

Reference branch: each square root sqrt(z - a) is cut along the ray from a
radially outward, and every evaluation, coefficient extraction, or Pfaffian
entry uses this one convention.  Coefficient normalization used throughout:

    f(z) ~ e^{-i pi/4} [ beta (z-a)^{-1/2} + lambda (z-a)^{1/2} + ... ]

so the bare one-spin disorder spinor has beta = +1 at its insertion.  The
overall sign of correlations with disorder insertions depends on this branch
choice; only ratios, coefficients, and squared quantities are contract-level
outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disk import DomainError, require_in_disk
from .partitions import pfaffian
from .quadrature import contour_circle

E4 = np.exp(1j * np.pi / 4)
SQRT2 = math.sqrt(2.0)

PSI, PSISTAR = "psi", "psistar"


def sqrt_cut(s, cut_dir: complex):
    """sqrt(s) with the branch cut along the ray arg(s) = arg(cut_dir)."""
    s = np.asarray(s, dtype=complex)
    phi0 = np.angle(cut_dir) if cut_dir != 0 else 0.0
    rel = np.mod(phi0 - np.angle(s), 2.0 * np.pi)
    phi = phi0 - rel
    return np.sqrt(np.abs(s)) * np.exp(0.5j * phi)


def _cut_dir(a: complex) -> complex:
    a = complex(a)
    return a / abs(a) if a != 0 else 1.0


def spin_sqrt(z, a: complex):
    """Reference-branch sqrt(z - a) for a branch point at a (cut radially out)."""
    return sqrt_cut(np.asarray(z, dtype=complex) - a, _cut_dir(a))


def _t_map(z):
    z = np.asarray(z, dtype=complex)
    return 1j * (1.0 + z) / (1.0 - z)


def _w_factor(z):
    return SQRT2 * E4 / (1.0 - np.asarray(z, dtype=complex))


def _pa_factor(z, a: complex, exclude_sqrt: bool = False):
    """Spin factor |1-a| (1-z) / (2i sqrt(z-a) sqrt(1-conj(a) z))."""
    z = np.asarray(z, dtype=complex)
    out = abs(1.0 - a) * (1.0 - z) / (2j * np.sqrt(1.0 - np.conj(a) * z))
    if not exclude_sqrt:
        out = out / spin_sqrt(z, a)
    return out


def _pw_factor(z, w: complex, exclude_pole: bool = False):
    """Fermion factor (1-z)^2 |1-w|^2 / (-4 (z-w)(1-conj(w) z))."""
    z = np.asarray(z, dtype=complex)
    out = (1.0 - z) ** 2 * abs(1.0 - w) ** 2 / (-4.0 * (1.0 - np.conj(w) * z))
    if not exclude_pole:
        out = out / (z - w)
    return out


class PairSolver:
    """Batched critical pair correlations <sigma_A psi_z psi_w^{[eta]}> / <sigma_A>.

    One instance fixes the spins and a batch of fermion points w; the two
    canonical targets eta = 1 and eta = i are solved together.  Evaluations
    broadcast: eval(z) with scalar z returns shape (batch, 2).
    """

    def __init__(self, spins, w):
        self.spins = tuple(complex(a) for a in spins)
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        if self.spins:
            require_in_disk(np.asarray(self.spins), "spin")
        require_in_disk(w, "fermion point")
        self.w = w
        n = len(self.spins)
        self.dim = n + 2
        b = w.size
        mat = np.empty((b, self.dim, self.dim))
        for m in range(self.dim):
            for j, a in enumerate(self.spins):
                vals = _eval_skip_spin(a, m, self.spins, self.w, a)
                mat[:, j, m] = np.real(E4 * vals)
            hw = _eval_skip_pole(self.w, m, self.spins, self.w)
            mat[:, n, m] = np.real(hw)
            mat[:, n + 1, m] = np.imag(hw)
        rhs = np.zeros((b, self.dim, 2))
        rhs[:, n, 0] = 1.0   # eta = 1: gamma = conj(eta) = 1
        rhs[:, n + 1, 0] = 0.0
        rhs[:, n, 1] = 0.0   # eta = i: gamma = conj(eta) = -i
        rhs[:, n + 1, 1] = -1.0
        self.coef = np.linalg.solve(mat, rhs)  # (b, dim, 2)
        self.cond = float(np.max([np.linalg.cond(mat[k]) for k in range(min(b, 4))]))

    def eval(self, z):
        """F_eta(z) for the batch; z scalar -> (batch, 2)."""
        vm = np.stack([_eval_full(z, m, self.spins, self.w) for m in range(self.dim)],
                      axis=-1)  # (b, dim)
        return np.einsum("bm,bmt->bt", vm, self.coef)

    def beta_at(self, j: int):
        """beta at spin j for both targets, analytic from the basis; (batch, 2)."""
        a = self.spins[j]
        g = np.stack([_eval_skip_spin(a, m, self.spins, self.w, a)
                      for m in range(self.dim)], axis=-1)
        return E4 * np.einsum("bm,bmt->bt", g, self.coef)

    def beta_lambda_at(self, j: int):
        """(beta, lambda) coefficient pairs at spin j; both analytic, (batch, 2) each.

        With G_m the basis element stripped of its root factor at the spin,
        beta(v_m) = e^{i pi/4} G_m(a) and lambda(v_m) = e^{i pi/4} G_m'(a).
        """
        a = self.spins[j]
        g = np.stack([_eval_skip_spin(a, m, self.spins, self.w, a)
                      for m in range(self.dim)], axis=-1)
        ld = np.stack([_stripped_logderiv(a, m, self.spins, self.w, a)
                       for m in range(self.dim)], axis=-1)
        beta = E4 * np.einsum("bm,bmt->bt", g, self.coef)
        lam = E4 * np.einsum("bm,bmt->bt", g * ld, self.coef)
        return beta, lam

    def merged_psistar(self):
        """lim_{z->w} <sigma_A psi_z psi*_w>/<sigma_A> per batch entry (analytic).

        The psi* combination removes the pole, so the limit is the derivative
        of the pole-free numerator H(z) = (z-w) f(z) at w, computed from the
        logarithmic derivatives of the basis factors.
        """
        hp = np.empty((self.w.size, self.dim), dtype=complex)
        for m in range(self.dim):
            h = _eval_skip_pole(self.w, m, self.spins, self.w)
            hp[:, m] = h * _logderiv_batched(self.w, m, self.spins, self.w)
        y = self.coef[:, :, 0] - 1j * self.coef[:, :, 1]
        return np.einsum("bm,bm->b", hp, y)


def _eval_full(z, m, spins, w_batch):
    """v_m(z) for each fermion point in the batch; returns (batch,) for scalar z."""
    z = complex(z)
    base = _t_map(z) ** m * _w_factor(z)
    for a in spins:
        base = base * _pa_factor(z, a)
    return base * _pw_factor(z, w_batch)


def _eval_skip_spin(a, m, spins, w_batch, skip):
    a = complex(a)
    base = _t_map(a) ** m * _w_factor(a)
    for s in spins:
        base = base * _pa_factor(a, s, exclude_sqrt=(s == skip))
    return base * _pw_factor(a, w_batch)


def _eval_skip_pole(z_batch, m, spins, w_batch):
    """H_m(w) = [(z-w) v_m](z) at z = z_batch, poles at w_batch (elementwise)."""
    z = np.asarray(z_batch, dtype=complex)
    base = _t_map(z) ** m * _w_factor(z)
    for a in spins:
        base = base * _pa_factor(z, a)
    return base * _pw_factor(z, w_batch, exclude_pole=True)


def _logderiv_batched(z, m, spins, w_batch):
    z = np.asarray(z, dtype=complex)
    ld = np.zeros_like(z)
    if m:
        ld = ld + m * 2.0 / ((1.0 - z) * (1.0 + z))
    ld = ld + 1.0 / (1.0 - z)
    ld = ld + (-2.0 / (1.0 - z)) + np.conj(w_batch) / (1.0 - np.conj(w_batch) * z)
    for a in spins:
        ld = ld + (-1.0 / (1.0 - z)) - 0.5 / (z - a) + 0.5 * np.conj(a) / (1.0 - np.conj(a) * z)
    return ld


def _stripped_logderiv(z, m, spins, w_batch, stripped_spin):
    """d/dz log of the basis element with the root factor at one spin removed;
    the fermion pole stays in.  Evaluated at z (typically the spin itself)."""
    z = np.asarray(z, dtype=complex)
    ld = np.zeros_like(np.asarray(w_batch, dtype=complex)) + 0j
    if m:
        ld = ld + m * 2.0 / ((1.0 - z) * (1.0 + z))
    ld = ld + 1.0 / (1.0 - z)
    ld = ld + (-2.0 / (1.0 - z)) - 1.0 / (z - w_batch) \
        + np.conj(w_batch) / (1.0 - np.conj(w_batch) * z)
    for a in spins:
        if a == stripped_spin:
            ld = ld + (-1.0 / (1.0 - z)) + 0.5 * np.conj(a) / (1.0 - np.conj(a) * z)
        else:
            ld = ld + (-1.0 / (1.0 - z)) - 0.5 / (z - a) \
                + 0.5 * np.conj(a) / (1.0 - np.conj(a) * z)
    return ld


class DisorderSolver:
    """Disorder-fermion correlations <sigma_{A-hat-k} mu_{a_k} psi_z>/<sigma_A>.

    No fermion poles; dimension equals the number of spins.  Normalized so
    beta(a_k) = +1 in the module convention (collinear with the one-spin
    closed form).
    """

    def __init__(self, spins, k: int = 0):
        self.spins = tuple(complex(a) for a in spins)
        self.k = k
        n = len(self.spins)
        if n == 0:
            raise DomainError("disorder solve needs at least one spin")
        mat = np.empty((n, n))
        for m in range(n):
            for j, a in enumerate(self.spins):
                g = _t_map(a) ** m * _w_factor(a)
                for s in self.spins:
                    g = g * _pa_factor(a, s, exclude_sqrt=(s == a))
                mat[j, m] = np.real(E4 * g)
        rhs = np.zeros(n)
        rhs[k] = 1.0
        self.coef = np.linalg.solve(mat, rhs)
        self.cond = float(np.linalg.cond(mat))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        total = 0j * z
        for m in range(len(self.spins)):
            base = _t_map(z) ** m * _w_factor(z)
            for a in self.spins:
                base = base * _pa_factor(z, a)
            total = total + self.coef[m] * base
        return total

    def beta_at(self, j: int) -> complex:
        a = self.spins[j]
        tot = 0j
        for m in range(len(self.spins)):
            g = _t_map(a) ** m * _w_factor(a)
            for s in self.spins:
                g = g * _pa_factor(a, s, exclude_sqrt=(s == a))
            tot += self.coef[m] * complex(g)
        return complex(E4 * tot)

    def lambda_at(self, j: int) -> complex:
        """Analytic lambda coefficient at the j-th spin, E4 * sum c_m G_m'(a)."""
        a = self.spins[j]
        tot = 0j
        for m in range(len(self.spins)):
            g = _t_map(a) ** m * _w_factor(a)
            ld = 1.0 / (1.0 - a)
            if m:
                ld = ld + m * 2.0 / ((1.0 - a) * (1.0 + a))
            for s in self.spins:
                g = g * _pa_factor(a, s, exclude_sqrt=(s == a))
                if s == a:
                    ld = ld + (-1.0 / (1.0 - a)) + 0.5 * np.conj(s) / (1.0 - np.conj(s) * a)
                else:
                    ld = ld + (-1.0 / (1.0 - a)) - 0.5 / (a - s) \
                        + 0.5 * np.conj(s) / (1.0 - np.conj(s) * a)
            tot += self.coef[m] * complex(g) * complex(ld)
        return complex(E4 * tot)

    @property
    def branch_points(self):
        return self.spins


class BasisElement:
    """One spinor of the critical constrained space for a fixed configuration."""

    def __init__(self, m: int, spins, fermions):
        self.m = m
        self.spins = tuple(complex(a) for a in spins)
        self.fermions = tuple(complex(w) for w in fermions)
        self.branch_points = self.spins

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        val = _t_map(z) ** self.m * _w_factor(z)
        for w in self.fermions:
            val = val * _pw_factor(z, w)
        for a in self.spins:
            val = val * _pa_factor(z, a)
        return val

    def beta_at(self, a: complex) -> complex:
        a = complex(a)
        g = _t_map(a) ** self.m * _w_factor(a)
        for w in self.fermions:
            g = g * _pw_factor(a, w)
        for s in self.spins:
            g = g * _pa_factor(a, s, exclude_sqrt=(s == a))
        return complex(E4 * g)

    def gamma_at(self, w0: complex) -> complex:
        w0 = complex(w0)
        g = _t_map(w0) ** self.m * _w_factor(w0)
        for w in self.fermions:
            g = g * _pw_factor(w0, w, exclude_pole=(w == w0))
        for a in self.spins:
            g = g * _pa_factor(w0, a)
        return complex(g)


def build_basis(spins, fermions=(), min_separation: float = 1e-6):
    """Real basis of the critical constrained space; dimension n + 2 n'.

    Returns (elements, coefficient_matrix, condition_number); matrix rows are
    (Re beta at each spin; Re gamma, Im gamma at each fermion), columns the
    basis elements.
    """
    spins = tuple(complex(a) for a in spins)
    fermions = tuple(complex(w) for w in fermions)
    pts = spins + fermions
    if len(pts) > 1 and _min_separation(pts) < min_separation:
        raise DomainError("configuration points too close for a stable basis")
    dim = len(spins) + 2 * len(fermions)
    elems = [BasisElement(m, spins, fermions) for m in range(dim)]
    mat = np.empty((dim, dim))
    for col, e in enumerate(elems):
        row = 0
        for a in spins:
            mat[row, col] = np.real(e.beta_at(a))
            row += 1
        for w in fermions:
            g = e.gamma_at(w)
            mat[row, col] = np.real(g)
            mat[row + 1, col] = np.imag(g)
            row += 2
    cond = float(np.linalg.cond(mat)) if dim else 0.0
    return elems, mat, cond


class SolvedSpinor:
    """Real combination of basis elements with prescribed leading coefficients."""

    def __init__(self, elems, coef):
        self.elems = elems
        self.coef = np.asarray(coef, dtype=float)
        self.branch_points = elems[0].branch_points if elems else ()

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        total = np.zeros_like(z)
        for c, e in zip(self.coef, self.elems):
            total = total + c * e(z)
        return total

    def beta_at(self, a: complex) -> complex:
        return complex(sum(c * e.beta_at(a) for c, e in zip(self.coef, self.elems)))

    def gamma_at(self, w: complex) -> complex:
        return complex(sum(c * e.gamma_at(w) for c, e in zip(self.coef, self.elems)))


def solve_correlation(spins, fermions, target) -> SolvedSpinor:
    """Unique element with the prescribed coefficient vector.

    target lists (Re beta at each spin; Re gamma, Im gamma at each fermion)
    in configuration order; a fermion insertion psi^{[eta]} at w corresponds
    to (Re eta, -Im eta) in its two slots.
    """
    elems, mat, cond = build_basis(spins, fermions)
    target = np.asarray(target, dtype=float)
    if target.shape != (len(elems),):
        raise ValueError("target length must equal the space dimension")
    if cond > 1e10:
        raise DomainError(f"basis ill-conditioned (cond ~ {cond:.2g})")
    coef = np.linalg.solve(mat, target)
    return SolvedSpinor(elems, coef)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

class OneSpinSpinor:
    """<mu_a psi_z>_0 / <sigma_a>_0 = e^{-i pi/4} sqrt((1-|a|^2)/(1-conj(a) z)) / sqrt(z-a)."""

    def __init__(self, a: complex):
        a = complex(a)
        require_in_disk(np.asarray([a]), "a")
        self.a = a
        self.branch_points = (a,)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (np.conj(E4) * np.sqrt((1.0 - abs(self.a) ** 2) / (1.0 - np.conj(self.a) * z))
                / spin_sqrt(z, self.a))


def one_spin_disorder_fermion(a: complex) -> OneSpinSpinor:
    return OneSpinSpinor(a)


class FermionPairSpinor:
    """<psi_z psi_w^{[eta]}>_0 on the disk, no spins; poles only at w."""

    def __init__(self, w: complex, eta: complex):
        w = complex(w)
        require_in_disk(np.asarray([w]), "w")
        self.w = w
        self.eta = complex(eta)
        self.branch_points = ()

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        w, eta = self.w, self.eta
        scale = abs(eta) / math.sqrt(1.0 - abs(w) ** 2)
        c = (eta / abs(eta)) * np.conj(E4)
        zeta = (z - w) / (1.0 - np.conj(w) * z)
        pref = np.conj(E4) * math.sqrt(1.0 - abs(w) ** 2) / (1.0 - np.conj(w) * z)
        return pref * scale * (c + 1.0 / (c * zeta))


def fermion_pair(w: complex, eta: complex) -> FermionPairSpinor:
    return FermionPairSpinor(w, eta)


def vacuum_pair(z, w, kind_z: str, kind_w: str):
    """<Psi_z Psi_w>_0 with no spins, complex kinds; closed form."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if kind_z == PSI and kind_w == PSI:
        return 2.0 / (z - w)
    if kind_z == PSI and kind_w == PSISTAR:
        return -2j / (1.0 - np.conj(w) * z)
    if kind_z == PSISTAR and kind_w == PSI:
        return 2j / (1.0 - np.conj(z) * w)
    if kind_z == PSISTAR and kind_w == PSISTAR:
        return 2.0 / np.conj(z - w)
    raise ValueError(f"unknown fermion kinds {kind_z!r}, {kind_w!r}")


def energy_one_point(u: complex) -> float:
    """<epsilon_u>_0 = 1/(1-|u|^2) in the module normalization."""
    require_in_disk(np.asarray([u]), "u")
    return 1.0 / (1.0 - abs(complex(u)) ** 2)


def vacuum_energy_pair(u: complex, v: complex) -> float:
    """<epsilon_u epsilon_v>_0 closed form."""
    u, v = complex(u), complex(v)
    return (1.0 / ((1.0 - abs(u) ** 2) * (1.0 - abs(v) ** 2))
            + 1.0 / abs(u - v) ** 2 - 1.0 / abs(1.0 - np.conj(u) * v) ** 2)


def vacuum_energy_correlation(points) -> float:
    """<prod_k epsilon_{u_k}>_0 by Pfaffian over the closed-form pair table."""
    pts = [complex(p) for p in points]
    r = len(pts)
    if r == 0:
        return 1.0
    slots = [(p, k) for p in pts for k in (PSI, PSISTAR)]
    m = np.zeros((2 * r, 2 * r), dtype=complex)
    for i in range(2 * r):
        for j in range(i + 1, 2 * r):
            (zi, ki), (zj, kj) = slots[i], slots[j]
            if zi == zj:
                val = -2j / (1.0 - abs(zi) ** 2) if (ki, kj) == (PSI, PSISTAR) else None
                if val is None:
                    raise DomainError("duplicate energy points")
            else:
                val = vacuum_pair(zi, zj, ki, kj)
            m[i, j] = val
            m[j, i] = -val
    val = (0.5j) ** r * pfaffian(m)
    return float(np.real(val))


# ---------------------------------------------------------------------------
# general critical correlations (ratios by the pure spin correlation)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldInsertion:
    kind: str            # "spin" | "disorder" | "psi" | "psistar" | "fermion" | "energy"
    at: complex
    eta: complex = 1.0   # for kind == "fermion" (real fermion psi^{[eta]})


def _min_separation(points):
    pts = [complex(p) for p in points]
    best = math.inf
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            best = min(best, abs(pts[i] - pts[j]))
    return best


def critical_correlation(spins=(), disorders=(), fermions=(), energies=(),
                         coincidence_guard: float = 1e-4) -> complex:
    """<sigma_spins mu_disorders Psi_fermions prod eps>_0 / <sigma_all>_0.

    fermions is a sequence of (point, kind[, eta]); sigma_all means spins plus
    disorder positions.  Assembled as a Pfaffian over two-point solves on the
    fixed reference branch.
    """
    spins = tuple(complex(a) for a in spins)
    disorders = tuple(complex(a) for a in disorders)
    ferm = []
    for f in fermions:
        if isinstance(f, FieldInsertion):
            ferm.append((complex(f.at), f.kind, complex(f.eta)))
        else:
            point, kind = f[0], f[1]
            eta = complex(f[2]) if len(f) > 2 else 1.0
            ferm.append((complex(point), kind, eta))
    energies = tuple(complex(u) for u in energies)
    all_pts = list(spins) + list(disorders) + [p for p, _, _ in ferm] + list(energies)
    if all_pts and _min_separation(all_pts) < coincidence_guard:
        raise DomainError("insertions closer than the coincidence guard")
    if (len(disorders) + len(ferm)) % 2:
        raise DomainError("disorder plus fermion count must be even")

    weights = spins + disorders  # sigma weighting set
    slots: list[tuple] = []
    for u in disorders:
        slots.append(("dis", u, None))
    for p, kind, eta in ferm:
        slots.append((kind, p, eta))
    for u in energies:
        slots.append((PSI, u, None))
        slots.append((PSISTAR, u, None))

    n_slots = len(slots)
    if n_slots == 0:
        return 1.0
    if n_slots % 2:
        raise DomainError("odd fermionic slot count")
    if n_slots > 12:
        raise DomainError("critical correlation capped at 12 fermionic slots")

    dis_solvers = {u: DisorderSolver(weights, weights.index(u)) for u in disorders}
    pair_solvers: dict[complex, PairSolver] = {}

    def pair_solver(w):
        if w not in pair_solvers:
            pair_solvers[w] = (PairSolver(weights, [w]) if weights
                               else None)
        return pair_solvers[w]

    def pair_value(p_slot, q_slot):
        kp, zp, ep = p_slot
        kq, zq, eq = q_slot
        if kp == "dis":
            fu = dis_solvers[zp]
            if kq == "dis":
                return -1j * fu.beta_at(weights.index(zq))
            base = complex(fu(zq))
            return _combine_first_kind(base, kq, eq)
        if kq == "dis":
            return -pair_value(q_slot, p_slot)
        # both genuine fermion kinds
        if not weights:
            return _vacuum_combined(zp, kp, ep, zq, kq, eq)
        if zp == zq:
            # merged psi psi* within one energy insertion
            sol = pair_solver(zq)
            merged = complex(sol.merged_psistar()[0])
            if (kp, kq) == (PSI, PSISTAR):
                return merged
            raise DomainError("coincident fermion slots other than psi psi*")
        sol = pair_solver(zq)
        ev = sol.eval(zp)[0]
        f1, fi = complex(ev[0]), complex(ev[1])

        # <psi_z Psi^{kq}_w>: psi_w = [1] + i [i]; psistar_w = [1] - i [i]
        def psi_first(kind, eta):
            if kind == PSI:
                return f1 + 1j * fi
            if kind == PSISTAR:
                return f1 - 1j * fi
            return np.real(eta) * f1 + np.imag(eta) * fi

        conj_kind = {PSI: PSISTAR, PSISTAR: PSI, "fermion": "fermion"}
        val_a = psi_first(kq, eq)
        val_b = psi_first(conj_kind[kq], eq)  # for the conjugated correlation
        if kp == PSI:
            return val_a
        if kp == PSISTAR:
            # conjugation swaps psi <-> psi* on every insertion
            return np.conj(val_b)
        return 0.5 * (np.conj(ep) * val_a + ep * np.conj(val_b))

    m = np.zeros((n_slots, n_slots), dtype=complex)
    for i in range(n_slots):
        for j in range(i + 1, n_slots):
            v = pair_value(slots[i], slots[j])
            m[i, j] = v
            m[j, i] = -v
    return (0.5j) ** len(energies) * pfaffian(m)


def _combine_first_kind(value_psi_first, kind, eta):
    """Turn <... psi_z X> into <... Psi_z X> for the requested first kind.

    value_psi_first is the value with a plain psi in the first slot; psi* is
    its complex conjugate (conjugation swaps psi and psi*), real fermions are
    the half-sum.
    """
    if kind == PSI:
        return value_psi_first
    if kind == PSISTAR:
        return np.conj(value_psi_first)
    return 0.5 * (np.conj(eta) * value_psi_first + eta * np.conj(value_psi_first))


def _vacuum_combined(zp, kp, ep, zq, kq, eq):
    if zp == zq:
        if (kp, kq) == (PSI, PSISTAR):
            return -2j / (1.0 - abs(zp) ** 2)
        raise DomainError("coincident vacuum fermion slots other than psi psi*")
    def base(kz, kw):
        return vacuum_pair(zp, zq, kz, kw)
    if kp in (PSI, PSISTAR) and kq in (PSI, PSISTAR):
        return base(kp, kq)
    if kp == "fermion" and kq in (PSI, PSISTAR):
        return 0.5 * (np.conj(ep) * base(PSI, kq) + ep * base(PSISTAR, kq))
    if kq == "fermion" and kp in (PSI, PSISTAR):
        return 0.5 * (np.conj(eq) * base(kp, PSI) + eq * base(kp, PSISTAR))
    return 0.25 * (np.conj(ep) * np.conj(eq) * base(PSI, PSI)
                   + np.conj(ep) * eq * base(PSI, PSISTAR)
                   + ep * np.conj(eq) * base(PSISTAR, PSI)
                   + ep * eq * base(PSISTAR, PSISTAR))


def spin_weighted_pair(spins, z, w, eta) -> complex:
    """<sigma_A psi_z psi_w^{[eta]}>_0 / <sigma_A>_0 at distinct bulk points."""
    if not spins:
        return complex(FermionPairSpinor(w, eta)(z))
    sol = PairSolver(spins, [w])
    f1, fi = sol.eval(z)[0]
    return complex(np.real(eta) * f1 + np.imag(eta) * fi)


def spin_energy_ratio(spins, u) -> float:
    """<sigma_A eps_u>_0 / <sigma_A>_0."""
    if not spins:
        return energy_one_point(u)
    sol = PairSolver(spins, [u])
    return float(np.real(0.5j * sol.merged_psistar()[0]))


def multipoint_fermion(spins, fermions) -> complex:
    """<sigma_A Psi_1 ... Psi_{2k}>_0/<sigma_A>_0 via the Pfaffian decomposition."""
    return critical_correlation(spins=spins, fermions=fermions)


# ---------------------------------------------------------------------------
# coefficient extraction and the log-derivative kernel
# ---------------------------------------------------------------------------

def extract_coefficients(f, a: complex, radius: float | None = None,
                         others=(), m: int = 256) -> dict:
    """Leading coefficients of a holomorphic spinor around its branch point a.

    Returns {"beta": o_{-1/2}, "lambda": o_{+1/2}} in the convention
    f ~ e^{-i pi/4}(beta (z-a)^{-1/2} + lambda (z-a)^{1/2}).  Contour radius
    defaults to a safe fraction of the distance to the other singular points
    and the boundary.
    """
    a = complex(a)
    clear = 1.0 - abs(a)
    for p in others:
        if complex(p) != a:
            clear = min(clear, abs(complex(p) - a))
    if radius is None:
        radius = 0.45 * clear
    elif radius >= clear:
        raise DomainError("extraction radius reaches another singularity")

    def kern_beta(z):
        return np.asarray(f(z)) / spin_sqrt(z, a)

    def kern_lambda(z):
        return np.asarray(f(z)) / spin_sqrt(z, a) ** 3

    beta = E4 * contour_circle(kern_beta, a, radius, mode="trapezoid-M", m=m) / (2j * np.pi)
    lam = E4 * contour_circle(kern_lambda, a, radius, mode="trapezoid-M", m=m) / (2j * np.pi)
    return {"beta": complex(beta), "lambda": complex(lam)}


def critical_A(spins, at: complex) -> complex:
    """Log-derivative kernel A_0(a_1): half the lambda coefficient of the
    disorder-fermion spinor oriented with beta(a_1) = +1."""
    spins = tuple(complex(a) for a in spins)
    at = complex(at)
    sol = DisorderSolver(spins, spins.index(at))
    others = [s for s in spins if s != at]
    coef = extract_coefficients(sol, at, others=others)
    return 0.5 * coef["lambda"]
