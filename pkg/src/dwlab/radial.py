"""Compactly supported radial ground states of the unit-scale energy.

Minimizes E(u) = integral( |grad u|^2 / 2 + W(u) ) over nonnegative radial
functions whose mass integral( u ) stays within a budget gamma.  For gamma
above a potential-dependent threshold the minimizer is a plateau-like bump
with negative energy, saturated mass, compact support and a strictly
negative multiplier; the operations here extract and cross-check all of
those quantities (multiplier, support radius, dilation identity, explicit
radius bounds, piecewise-affine comparison energy).

Discretization: nodes r_i = i*h on [0, r_max]; every node owns the shell
[r_i - h/2, r_i + h/2] (clipped at 0), which yields strictly positive
lumped volume weights and recovers the 2N(u_1 - u_0)/h^2 Laplacian at the
origin from the variational form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainTooSmall, EmptySupport, NonConvergence, SweepExhausted
from .potential import Potential, PotentialCertificate

__all__ = [
    "RadialGrid",
    "RadialProfile",
    "RadialOptions",
    "RadiusBounds",
    "SupportInfo",
    "PohozaevReport",
    "ThresholdSweep",
    "unit_ball_volume",
    "unit_sphere_area",
    "minimize_radial",
    "extract_multiplier",
    "support_radius",
    "support_radius_values",
    "radius_bounds",
    "pohozaev_residual",
    "comparison_energy",
    "w_sup_on_well",
    "ansatz_values",
    "gamma_threshold",
    "project_mass",
    "radial_energy",
    "radial_kinetic",
    "radial_mass",
]

DEFAULT_TAU = 1e-8


def unit_ball_volume(dim: int) -> float:
    """Volume of the unit ball in R^dim."""
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


def unit_sphere_area(dim: int) -> float:
    """(dim-1)-area of the unit sphere bounding the unit ball in R^dim."""
    return dim * unit_ball_volume(dim)


@dataclass(frozen=True)
class RadialGrid:
    """Uniform node grid r_i = i*h, i = 0..n_cells, on [0, r_max]."""

    dim: int
    r_max: float
    n_cells: int

    def __post_init__(self):
        if self.dim < 1 or self.r_max <= 0 or self.n_cells < 8:
            raise ValueError("need dim >= 1, r_max > 0, n_cells >= 8")

    @property
    def h(self) -> float:
        return self.r_max / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.h

    @property
    def shell_weights(self) -> np.ndarray:
        """Lumped volume w_i of the shell owned by node i (all positive)."""
        h = self.h
        r = self.nodes
        omega = unit_ball_volume(self.dim)
        outer = np.minimum(r + 0.5 * h, self.r_max)
        inner = np.maximum(r - 0.5 * h, 0.0)
        return omega * (outer ** self.dim - inner ** self.dim)

    @property
    def face_factors(self) -> np.ndarray:
        """alpha * r_{i+1/2}^{N-1} on the n_cells faces between nodes."""
        h = self.h
        mid = (np.arange(self.n_cells) + 0.5) * h
        return unit_sphere_area(self.dim) * mid ** (self.dim - 1)

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid(self.dim, self.r_max, self.n_cells * factor)


@dataclass
class RadialProfile:
    """A (typically converged) radial minimizer with its derived quantities."""

    grid: RadialGrid
    values: np.ndarray
    gamma: float
    lam: float
    energy: float
    support_radius: float
    mass: float
    residual: float = np.nan
    iterations: int = 0
    converged: bool = False
    diagnostics: dict = field(default_factory=dict)

    @property
    def max_value(self) -> float:
        return float(self.values.max(initial=0.0))


@dataclass
class RadialOptions:
    tol: float = 1e-8           # residual < tol * max(1, |E|)
    max_iter: int = 200_000
    tau: float = DEFAULT_TAU    # support threshold, relative to max(u)
    mass_mode: str = "upper"    # "upper": mass <= gamma; "equal": mass = gamma
    init: str | np.ndarray = "ansatz"
    check_every: int = 10
    step_growth: float = 1.3
    grow_after: int = 5
    enforce_grid_margin: bool = True
    track_energy: bool = False  # record accepted energies in the diagnostics
    zero_fallback: bool = False  # return the zero profile when it beats the iterate


@dataclass(frozen=True)
class RadiusBounds:
    """Explicit support-radius bounds c_minus*gamma^(1/N) <= R < c_plus*gamma^(1/N)."""

    c_minus: float
    c_plus: float
    dim: int

    def lower(self, gamma: float) -> float:
        return self.c_minus * gamma ** (1.0 / self.dim)

    def upper(self, gamma: float) -> float:
        return self.c_plus * gamma ** (1.0 / self.dim)


@dataclass(frozen=True)
class SupportInfo:
    radius: float
    edge_derivative: float
    last_index: int


@dataclass(frozen=True)
class PohozaevReport:
    lhs: float
    rhs: float
    residual: float
    scale: float
    kinetic: float        # A = (1/2) int |grad u|^2
    potential_term: float  # B = int W(u)
    boundary_term: float
    dilation_sign_ok: bool  # (N-2) E + 2 B < 0
    potential_negative: bool  # B < 0


# ----------------------------------------------------------------------
# quadrature pieces
# ----------------------------------------------------------------------

def radial_energy(grid: RadialGrid, values: np.ndarray, p: Potential) -> float:
    """E(u) = (1/2) int |u'|^2 + int W(u), with the radial weight."""
    diffs = np.diff(values)
    kin = 0.5 * np.dot(grid.face_factors, diffs * diffs) / grid.h
    pot = np.dot(grid.shell_weights, np.asarray(p.eval(values), dtype=float))
    return float(kin + pot)


def radial_kinetic(grid: RadialGrid, values: np.ndarray) -> float:
    diffs = np.diff(values)
    return float(0.5 * np.dot(grid.face_factors, diffs * diffs) / grid.h)


def radial_mass(grid: RadialGrid, values: np.ndarray) -> float:
    return float(np.dot(grid.shell_weights, values))


def _weighted_gradient(grid: RadialGrid, values: np.ndarray, p: Potential) -> np.ndarray:
    """L2-weighted gradient -lap_r(u) + W'(u); lap_r is the conservative stencil."""
    f = grid.face_factors
    w = grid.shell_weights
    flux = f * np.diff(values) / grid.h  # f_i * (u_{i+1} - u_i)/h on faces
    div = np.empty_like(values)
    div[0] = flux[0]
    div[1:-1] = flux[1:] - flux[:-1]
    div[-1] = -flux[-1]
    lap = div / w
    return -lap + np.asarray(p.deriv(values), dtype=float)


# ----------------------------------------------------------------------
# feasible-set projection
# ----------------------------------------------------------------------

def project_mass(values: np.ndarray, weights: np.ndarray, gamma: float,
                 mode: str = "upper") -> np.ndarray:
    """Exact projection onto {u >= 0, mass <= gamma} (or mass = gamma).

    In the weighted inner product the projection is max(v - t, 0) with the
    uniform shift t found exactly by sorting (water filling).  Under the
    budget constraint t >= 0 and clipping first is equivalent; under the
    equality constraint t may be negative, lifting the whole profile.
    """
    if mode == "upper":
        u = np.maximum(values, 0.0)
        if float(np.dot(weights, u)) <= gamma:
            return u
        v = u
    elif mode == "equal":
        v = np.asarray(values, dtype=float)
    else:
        raise ValueError(f"unknown mass mode {mode!r}")

    order = np.argsort(v)[::-1]
    vs = v[order]
    ws = weights[order]
    cw = np.cumsum(ws)
    cwv = np.cumsum(ws * vs)
    t_candidates = (cwv - gamma) / cw
    below = np.append(vs[1:], -np.inf)
    valid = (t_candidates < vs) & (t_candidates >= below)
    k = int(np.nonzero(valid)[0][0])
    return np.maximum(v - t_candidates[k], 0.0)


# ----------------------------------------------------------------------
# comparison ansatz
# ----------------------------------------------------------------------

def _ansatz_t0(cert: PotentialCertificate, gamma: float, dim: int) -> float:
    omega = unit_ball_volume(dim)
    c1 = (4.0 * omega * cert.s0 / 3.0) ** (-1.0 / dim)
    return c1 * gamma ** (1.0 / dim)


def ansatz_values(cert: PotentialCertificate, gamma: float, grid: RadialGrid) -> np.ndarray:
    """Plateau-with-ramp trial profile: s0 on [0, t0], affine to 0 at t0 + 1."""
    t0 = _ansatz_t0(cert, gamma, grid.dim)
    r = grid.nodes
    vals = np.clip(cert.s0 * (t0 + 1.0 - r), 0.0, cert.s0)
    return vals


def comparison_energy(cert: PotentialCertificate, gamma: float, dim: int,
                      w_sup: float | None = None) -> float:
    """Closed-form upper bound for the minimum energy at mass budget gamma.

    Evaluates the plateau-with-ramp trial function analytically:
    E* = alpha * [ (s0^2/(2 N) + w_hat) t0^N ((1 + 1/t0)^N - 1) - (m/N) t0^N ]
    with t0 = (4 omega_N s0 / 3)^(-1/N) gamma^(1/N) and w_hat the sup of |W|
    on [0, s0].  Negative for large gamma, where it decays linearly in
    -gamma; requires t0 >= 1 so that the ramp fits inside the plateau scale.
    """
    t0 = _ansatz_t0(cert, gamma, dim)
    if t0 < 1.0:
        raise ValueError(f"gamma too small for the plateau ansatz (t0 = {t0:.4g} < 1)")
    if w_sup is None:
        raise ValueError("pass w_sup = max |W| on [0, s0] (see w_sup_on_well)")
    alpha = unit_sphere_area(dim)
    shell = t0 ** dim * ((1.0 + 1.0 / t0) ** dim - 1.0)
    return float(alpha * ((cert.s0 ** 2 / (2.0 * dim) + w_sup) * shell
                          - (cert.m / dim) * t0 ** dim))


def w_sup_on_well(p: Potential, cert: PotentialCertificate, n: int = 20001) -> float:
    """sup of |W| on [0, s0], by dense sampling (W is smooth)."""
    s = np.linspace(0.0, cert.s0, n)
    return float(np.max(np.abs(np.asarray(p.eval(s), dtype=float))))


# ----------------------------------------------------------------------
# the solver
# ----------------------------------------------------------------------

def minimize_radial(p: Potential, cert: PotentialCertificate | None, gamma: float,
                    grid: RadialGrid, opts: RadialOptions | None = None) -> RadialProfile:
    """Projected-gradient minimization over {u >= 0, mass(u) <= gamma}.

    Each step is u <- Proj(u - s * g) with g the weighted Euler-Lagrange
    gradient and s chosen by backtracking so the energy never increases.
    Convergence is declared when the unit-step projected-gradient residual
    ||u - Proj(u - g)||_inf falls below tol * max(1, |E|).

    Raises NonConvergence at the iteration cap and DomainTooSmall when the
    converged support reaches the grid edge (the predicted support must fit:
    r_max >= 2 * c_plus * gamma^(1/N) whenever a certificate is supplied).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    opts = opts or RadialOptions()
    if cert is not None and opts.enforce_grid_margin:
        rb = radius_bounds(cert, grid.dim)
        if grid.r_max < 2.0 * rb.upper(gamma):
            raise DomainTooSmall(
                f"r_max = {grid.r_max:.4g} below twice the predicted support "
                f"{rb.upper(gamma):.4g}; enlarge the grid")

    w = grid.shell_weights
    if isinstance(opts.init, np.ndarray):
        u = np.array(opts.init, dtype=float, copy=True)
        if u.shape != (grid.n_cells + 1,):
            raise ValueError("init array does not match the grid")
    elif opts.init == "zero":
        u = np.zeros(grid.n_cells + 1)
    elif opts.init == "ansatz":
        if cert is None:
            raise ValueError("ansatz init needs a certificate")
        u = ansatz_values(cert, gamma, grid)
    else:
        raise ValueError(f"unknown init {opts.init!r}")
    u = project_mass(u, w, gamma, opts.mass_mode)

    # step-size seed from a Gershgorin bound on the stiff part
    wpp = np.asarray(p.deriv2(np.linspace(0.0, max(1.0, 2.0 * u.max(initial=1.0)), 64)))
    curv = 4.0 * max(grid.dim, 1) / grid.h ** 2 + float(np.max(np.abs(wpp)))
    step = 1.8 / curv
    step_cap = 1e4 * step

    energy = radial_energy(grid, u, p)
    residual = np.inf
    accepts_since_growth = 0
    flat_count = 0
    fine_phase = False
    step_safe = 1.8 / curv
    n_iter = 0
    converged = False
    history = [energy] if opts.track_energy else None

    for n_iter in range(1, opts.max_iter + 1):
        g = _weighted_gradient(grid, u, p)

        if n_iter % opts.check_every == 1 or opts.check_every == 1:
            trial_unit = project_mass(u - g, w, gamma, opts.mass_mode)
            residual = float(np.max(np.abs(u - trial_unit)))
            if fine_phase:
                energy = radial_energy(grid, u, p)
                if history is not None:
                    history.append(energy)
            if residual < opts.tol * max(1.0, abs(energy)):
                converged = True
                break

        if fine_phase:
            # energy differences are below float resolution here; a fixed
            # step under the Gershgorin stability bound still descends
            u = project_mass(u - step_safe * g, w, gamma, opts.mass_mode)
            continue

        # backtracking: no energy increase beyond summation noise
        noise = 1e-13 * max(1.0, abs(energy), 0.02 * gamma)
        accepted = False
        drop = 0.0
        for _ in range(60):
            trial = project_mass(u - step * g, w, gamma, opts.mass_mode)
            e_trial = radial_energy(grid, trial, p)
            if np.isfinite(e_trial) and e_trial <= energy + noise:
                drop = energy - e_trial
                u, energy = trial, e_trial
                if history is not None:
                    history.append(energy)
                accepted = True
                break
            step *= 0.5
            accepts_since_growth = 0
        if not accepted:
            fine_phase = True
            continue
        flat_count = flat_count + 1 if drop <= noise else 0
        if flat_count >= 8:
            fine_phase = True
            step = min(step, step_safe)
            continue
        accepts_since_growth += 1
        if accepts_since_growth >= opts.grow_after:
            step = min(step * opts.step_growth, step_cap)
            accepts_since_growth = 0

    if not converged:
        raise NonConvergence(
            f"radial solve at gamma={gamma:g} stopped after {n_iter} iterations "
            f"with residual {residual:.3e}")

    # under the mass budget the zero profile is feasible with E = 0, so a
    # positive-energy stall is a metastable branch point; with the fallback
    # enabled the better of the two is returned (global-minimum semantics),
    # otherwise the converged critical point stands
    fell_back = False
    if opts.zero_fallback and energy > 0.0 and opts.mass_mode == "upper":
        u = np.zeros_like(u)
        energy = 0.0
        fell_back = True

    sup = support_radius_values(grid, u, opts.tau)
    if sup.last_index >= grid.n_cells - 2 and u.max(initial=0.0) > 0:
        raise DomainTooSmall(
            f"support reaches the grid edge (R = {sup.radius:.4g}, r_max = {grid.r_max:g})")

    lam, lam_std = _multiplier_from_values(grid, u, p, opts.tau, min_nodes=1)
    profile = RadialProfile(
        grid=grid,
        values=u,
        gamma=float(gamma),
        lam=lam,
        energy=float(energy),
        support_radius=sup.radius,
        mass=radial_mass(grid, u),
        residual=residual,
        iterations=n_iter,
        converged=True,
        diagnostics={
            "multiplier_std": lam_std,
            "edge_derivative": sup.edge_derivative,
            "zero_fallback": fell_back,
            "mass_mode": opts.mass_mode,
            "tau": opts.tau,
            **({"energy_history": history} if history is not None else {}),
        },
    )
    return profile


def _multiplier_from_values(grid, values, p, tau, min_nodes):
    peak = float(values.max(initial=0.0))
    if peak <= 0.0:
        return 0.0, 0.0
    support = values > tau * peak
    if int(support.sum()) < min_nodes:
        return 0.0, 0.0
    g = _weighted_gradient(grid, values, p)
    lam_nodes = g[support]
    return float(np.mean(lam_nodes)), float(np.std(lam_nodes))


def extract_multiplier(profile: RadialProfile, p: Potential,
                       tau: float | None = None) -> tuple[float, float]:
    """Multiplier as the mean Euler-Lagrange value over the support.

    At a converged constrained minimizer the quantity -lap_r(u) + W'(u) is
    constant on {u > 0}; its mean is the multiplier and its standard
    deviation a convergence diagnostic.  Requires >= 10 support nodes.
    """
    tau = profile.diagnostics.get("tau", DEFAULT_TAU) if tau is None else tau
    peak = profile.max_value
    support_n = int(np.sum(profile.values > tau * peak)) if peak > 0 else 0
    if support_n < 10:
        raise EmptySupport(f"only {support_n} support nodes (need >= 10)")
    return _multiplier_from_values(profile.grid, profile.values, p, tau, min_nodes=10)


def support_radius_values(grid: RadialGrid, values: np.ndarray,
                          tau: float = DEFAULT_TAU) -> SupportInfo:
    peak = float(values.max(initial=0.0))
    if peak <= 0.0:
        return SupportInfo(0.0, 0.0, -1)
    idx = np.nonzero(values > tau * peak)[0]
    last = int(idx[-1])
    radius = grid.h * last
    edge = (values[last] - values[last - 1]) / grid.h if last >= 1 else values[last] / grid.h
    return SupportInfo(radius, float(edge), last)


def support_radius(profile: RadialProfile, tau: float = DEFAULT_TAU) -> SupportInfo:
    """Support radius h*max{i : u_i > tau*max u} plus the one-sided edge slope.

    The edge slope is the backward difference at the outermost support node;
    for a converged profile it vanishes at first order in h because the
    minimizer meets the obstacle tangentially.
    """
    return support_radius_values(profile.grid, profile.values, tau)


def radius_bounds(cert: PotentialCertificate, dim: int) -> RadiusBounds:
    """Explicit constants: c- = (1/(s0 w_N))^(1/N), c+ = (3/2)(1/(s1 w_N))^(1/N)."""
    omega = unit_ball_volume(dim)
    c_minus = (1.0 / (cert.s0 * omega)) ** (1.0 / dim)
    c_plus = 1.5 * (1.0 / (cert.s1crit * omega)) ** (1.0 / dim)
    return RadiusBounds(c_minus=c_minus, c_plus=c_plus, dim=dim)


def pohozaev_residual(profile: RadialProfile, p: Potential) -> PohozaevReport:
    """Dilation (Pohozaev) identity residual on the support ball.

    Checks  int(-lam u + W(u)) = (1/N - 1/2) int |grad u|^2
            - (1/2) alpha R^N u'(R)^2
    by radial quadrature, with the boundary term from the discrete edge
    slope.  The residual is reported against the magnitude of the largest
    constituent term: at N = 2 the two sides individually cancel to the
    size of the boundary term, so a raw relative residual would be 0/0.
    Also evaluates the dilation sign checks (N-2)E + 2B < 0 and B < 0.
    """
    grid = profile.grid
    dim = grid.dim
    u = profile.values
    A = radial_kinetic(grid, u)
    B = float(np.dot(grid.shell_weights, np.asarray(p.eval(u), dtype=float)))
    sup = support_radius_values(grid, u, profile.diagnostics.get("tau", DEFAULT_TAU))
    boundary = 0.5 * unit_sphere_area(dim) * sup.radius ** dim * sup.edge_derivative ** 2
    lhs = -profile.lam * profile.mass + B
    rhs = (1.0 / dim - 0.5) * 2.0 * A - boundary
    scale = max(abs(profile.lam) * profile.mass, abs(B),
                abs(1.0 / dim - 0.5) * 2.0 * A, boundary, 1e-300)
    energy = A + B
    return PohozaevReport(
        lhs=float(lhs),
        rhs=float(rhs),
        residual=float(abs(lhs - rhs)),
        scale=float(scale),
        kinetic=float(A),
        potential_term=float(B),
        boundary_term=float(boundary),
        dilation_sign_ok=bool((dim - 2) * energy + 2.0 * B < 0.0),
        potential_negative=bool(B < 0.0),
    )


# ----------------------------------------------------------------------
# empirical mass threshold
# ----------------------------------------------------------------------

@dataclass
class ThresholdSweep:
    gamma_tilde: float
    rows: list  # (gamma, energy, mass, support_radius, qualifies)


def gamma_threshold(p: Potential, cert: PotentialCertificate, dim: int,
                    gammas: Sequence[float] | None = None,
                    h_target: float = 0.05,
                    tol: float = 1e-7) -> ThresholdSweep:
    """Smallest swept gamma with E < 0, saturated mass and interior support.

    This is an empirical stand-in for the theoretical threshold above which
    the budgeted problem behaves like the mass-equality problem; it sweeps a
    geometric ladder (default 2^k, k = 0..10) and records one row per gamma.
    Raises SweepExhausted if nothing on the ladder qualifies.
    """
    if gammas is None:
        gammas = [float(2 ** k) for k in range(0, 11)]
    rb = radius_bounds(cert, dim)
    rows = []
    gamma_tilde = None
    for gamma in gammas:
        r_max = max(2.0 * rb.upper(gamma), 40.0 * h_target)
        n = max(64, int(math.ceil(r_max / h_target)))
        grid = RadialGrid(dim, r_max, n)
        # global-minimum semantics: below the threshold the zero profile wins
        prof = minimize_radial(p, cert, gamma, grid,
                               RadialOptions(tol=tol, zero_fallback=True))
        saturated = abs(prof.mass - gamma) <= 1e-6 * gamma
        interior = prof.support_radius < grid.r_max - 5 * grid.h
        qualifies = prof.energy < 0.0 and saturated and interior
        rows.append((gamma, prof.energy, prof.mass, prof.support_radius, qualifies))
        if qualifies and gamma_tilde is None:
            gamma_tilde = gamma
    if gamma_tilde is None:
        raise SweepExhausted(
            f"no gamma in {list(gammas)} reached negative energy with saturated mass")
    return ThresholdSweep(gamma_tilde=gamma_tilde, rows=rows)
