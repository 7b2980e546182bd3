"""Volume-constrained critical points on masked grid domains.

The energy (eps^2/2) int |grad u|^2 + int W(u) is driven to a critical
point on the affine slice {int u = V} of zero-Dirichlet fields.  The flow
step is u <- u - a * (g - mean g) with g = -eps^2 lap u + W'(u); removing
the interior mean keeps the volume fixed to round-off at every step and
makes the converged mean of g the constraint multiplier.  A Newton solve on
the bordered system (g - lam, volume - V) sharpens flow output to near
machine precision and can land on saddle points the flow only approaches.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .domain import GridDomain
from .errors import Diverged, NonConvergence, SingularJacobian, VolumeDrift
from .potential import Potential, PotentialCertificate

__all__ = [
    "Field",
    "SolutionRecord",
    "FlowOptions",
    "BoxBoundsReport",
    "energy",
    "raw_gradient",
    "gradient_flow",
    "newton_refine",
    "box_bounds_check",
    "uniform_field",
    "bump_field",
    "barycenter_of",
    "masked_laplacian_matrix",
]


@dataclass
class Field:
    """Node values on a domain lattice, zero outside the interior mask."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.domain.shape:
            raise ValueError("field shape does not match the domain lattice")

    @property
    def volume(self) -> float:
        return float(self.values.sum() * self.domain.cell_volume)

    def copy(self) -> "Field":
        return Field(self.domain, self.values.copy())

    def interior(self) -> np.ndarray:
        return self.values[self.domain.mask]


@dataclass
class SolutionRecord:
    field: Field
    lam: float
    energy: float
    residual_inf: float
    barycenter: np.ndarray
    iterations: int
    converged: bool
    eps: float
    volume: float
    morse_index: int | None = None
    nondegenerate: bool | None = None
    diagnostics: dict = field(default_factory=dict)


@dataclass
class FlowOptions:
    tol_factor: float = 1e-8      # residual_inf < tol_factor * max(1, |E|)
    max_iter: int = 500_000
    check_every: int = 10
    step_growth: float = 1.3
    grow_after: int = 5
    strict: bool = True           # raise NonConvergence at the cap
    drift_tol: float = 1e-8       # relative volume drift triggering rescue
    track_energy: bool = False    # record accepted energies in diagnostics


def _lap(values: np.ndarray, h: float) -> np.ndarray:
    """Dirichlet Laplacian; exterior nodes are zero by construction."""
    d = values.ndim
    out = (-2.0 * d) * values
    for axis in range(d):
        out += np.roll(values, 1, axis=axis)
        out += np.roll(values, -1, axis=axis)
    return out / (h * h)


def energy(f: Field, p: Potential, eps: float) -> float:
    """(eps^2/2) sum over edges of grad^2 plus sum of W over interior nodes."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = f.values
    h = f.domain.h
    d = v.ndim
    kin = 0.0
    for axis in range(d):
        pad_shape = list(v.shape)
        pad_shape[axis] = 1
        zeros = np.zeros(pad_shape)
        diffs = np.diff(np.concatenate([zeros, v, zeros], axis=axis), axis=axis)
        kin += float(np.sum(diffs * diffs))
    kin *= 0.5 * eps * eps * h ** (d - 2)
    pot = float(np.sum(np.asarray(p.eval(v[f.domain.mask]), dtype=float))) \
        * f.domain.cell_volume
    return kin + pot


def raw_gradient(f: Field, p: Potential, eps: float) -> np.ndarray:
    """Pointwise Euler-Lagrange quantity -eps^2 lap u + W'(u), zero off-mask."""
    g = -eps * eps * _lap(f.values, f.domain.h) \
        + np.asarray(p.deriv(f.values), dtype=float)
    return np.where(f.domain.mask, g, 0.0)


def barycenter_of(f: Field) -> np.ndarray:
    """|u|-weighted center of mass of the field."""
    weights = np.abs(f.values)
    total = weights.sum()
    if total == 0.0:
        from .errors import ZeroField
        raise ZeroField("barycenter of the zero field is undefined")
    out = np.empty(f.domain.dim)
    for axis in range(f.domain.dim):
        coords = f.domain.axis_coords(axis)
        shape = [1] * f.domain.dim
        shape[axis] = -1
        out[axis] = float(np.sum(weights * coords.reshape(shape))) / total
    return out


def uniform_field(domain: GridDomain, V: float, inset: float | None = None) -> Field:
    """Constant level on the inner shrinking of the domain, volume V."""
    mask = domain.omega_minus(inset) if inset is not None else domain.omega_minus(0.0)
    vals = np.where(mask, 1.0, 0.0)
    vals *= V / (vals.sum() * domain.cell_volume)
    return Field(domain, vals)


def bump_field(domain: GridDomain, center, radius: float, V: float) -> Field:
    """Smooth compactly supported cos^2 bump, normalized to volume V."""
    pts = domain.node_coords()
    center = np.atleast_1d(np.asarray(center, dtype=float))
    r = np.linalg.norm(pts - center, axis=1).reshape(domain.shape)
    vals = np.where(r < radius, np.cos(0.5 * np.pi * r / radius) ** 2, 0.0)
    vals = np.where(domain.mask, vals, 0.0)
    total = vals.sum() * domain.cell_volume
    if total <= 0:
        raise ValueError("bump does not overlap the domain interior")
    return Field(domain, vals * (V / total))


def gradient_flow(init: Field, p: Potential, V: float, eps: float,
                  opts: FlowOptions | None = None) -> SolutionRecord:
    """Volume-preserving descent to a constrained critical point.

    The iteration u <- u - a * P(-eps^2 lap u + W'(u)), with P subtracting
    the interior mean, conserves the volume exactly; the step a backtracks
    on the energy until decrements fall below float resolution, after which
    a fixed stability-bounded step carries the residual the rest of the
    way.  At convergence the multiplier is the interior mean of the raw
    gradient.
    """
    opts = opts or FlowOptions()
    dom = init.domain
    mask = dom.mask
    n_mask = int(mask.sum())
    vol0 = init.volume
    if abs(vol0 - V) > 1e-10 * max(1.0, abs(V)):
        raise ValueError(f"init volume {vol0:g} does not match V = {V:g}")

    f = init.copy()
    u = f.values

    span = float(np.max(np.abs(u))) if np.any(u) else 1.0
    wpp = np.asarray(p.deriv2(np.linspace(-0.5 * span, 2.0 * span, 64)), dtype=float)
    curv = 4.0 * dom.dim * eps * eps / dom.h ** 2 + float(np.max(np.abs(wpp)))
    step = 1.8 / curv
    step_safe = step
    step_cap = 1e4 * step

    e_now = energy(f, p, eps)
    residual = np.inf
    lam = 0.0
    fine_phase = False
    flat_count = 0
    accepts = 0
    drift_events = 0
    n_iter = 0
    converged = False
    history = [e_now] if opts.track_energy else None

    def tangent(gr):
        gm = float(gr[mask].mean())
        return np.where(mask, gr - gm, 0.0), gm

    for n_iter in range(1, opts.max_iter + 1):
        g = raw_gradient(f, p, eps)
        gt, lam = tangent(g)

        if n_iter % opts.check_every == 1 or opts.check_every == 1:
            residual = float(np.max(np.abs(gt)))
            if fine_phase:
                e_now = energy(f, p, eps)
                if history is not None:
                    history.append(e_now)
            if residual < opts.tol_factor * max(1.0, abs(e_now)):
                converged = True
                break
            drift = f.volume - V
            if abs(drift) > opts.drift_tol * max(abs(V), 1.0):
                u[mask] -= drift / (n_mask * dom.cell_volume)
                drift_events += 1
                warnings.warn(f"volume drift {drift:.3e} re-projected", VolumeDrift)

        if fine_phase:
            u -= step_safe * gt
            continue

        noise = 1e-13 * max(1.0, abs(e_now), abs(V))
        accepted = False
        drop = 0.0
        for _ in range(60):
            trial = Field(dom, u - step * gt)
            e_trial = energy(trial, p, eps)
            if np.isfinite(e_trial) and e_trial <= e_now + noise:
                drop = e_now - e_trial
                f, u, e_now = trial, trial.values, e_trial
                if history is not None:
                    history.append(e_now)
                accepted = True
                break
            step *= 0.5
            accepts = 0
        if not accepted:
            fine_phase = True
            step = step_safe
            continue
        flat_count = flat_count + 1 if drop <= noise else 0
        if flat_count >= 8:
            fine_phase = True
            step = min(step, step_safe)
            continue
        accepts += 1
        if accepts >= opts.grow_after:
            step = min(step * opts.step_growth, step_cap)
            accepts = 0

    if not converged and opts.strict:
        raise NonConvergence(
            f"gradient flow stopped after {n_iter} iterations, residual {residual:.3e}")

    g = raw_gradient(f, p, eps)
    gt, lam = tangent(g)
    residual = float(np.max(np.abs(gt)))
    e_now = energy(f, p, eps)
    return SolutionRecord(
        field=f,
        lam=float(lam),
        energy=float(e_now),
        residual_inf=residual,
        barycenter=barycenter_of(f) if np.any(f.values) else np.zeros(dom.dim),
        iterations=n_iter,
        converged=converged,
        eps=float(eps),
        volume=f.volume,
        diagnostics={"drift_events": drift_events, "method": "gradient_flow",
                     **({"energy_history": history} if history is not None else {})},
    )


_LAP_LOCK = __import__("threading").Lock()


def masked_laplacian_matrix(domain: GridDomain) -> sparse.csr_matrix:
    """Sparse Dirichlet Laplacian over interior nodes (cached per domain)."""
    with _LAP_LOCK:
        cached = domain._cache.get("lap_matrix")
    if cached is not None:
        return cached
    mask = domain.mask
    n = int(mask.sum())
    index = -np.ones(domain.shape, dtype=np.int64)
    index[mask] = np.arange(n)
    h2 = domain.h ** 2
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [np.full(n, -2.0 * domain.dim / h2)]
    for axis in range(domain.dim):
        for shift in (1, -1):
            nbr = np.roll(index, shift, axis=axis)
            both = mask & (nbr >= 0)
            rows.append(index[both])
            cols.append(nbr[both])
            vals.append(np.full(int(both.sum()), 1.0 / h2))
    mat = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))
    with _LAP_LOCK:
        domain._cache["lap_matrix"] = mat
    return mat


def newton_refine(record: SolutionRecord, p: Potential, eps: float,
                  tol: float = 1e-12, max_steps: int = 30,
                  basin_residual: float = 1.0,
                  stall_floor: float = 1e-8) -> SolutionRecord:
    """Newton solve of the stationarity system (g - lam, volume - V).

    Operates on the bordered Jacobian [[L, -1], [vol row, 0]] with
    L = -eps^2 lap + W''(u); quadratic residual decrease is expected inside
    the basin.  Raises SingularJacobian on a numerically singular system
    (a degenerate critical point) and Diverged when the residual grows
    persistently or leaves the basin guard.  Near-degenerate directions
    (quasi-translation modes) limit the reachable residual through the
    Jacobian's conditioning; a stall below ``stall_floor`` (times the
    energy scale) is accepted and noted in the diagnostics.
    """
    dom = record.field.domain
    mask = dom.mask
    n = int(mask.sum())
    if record.residual_inf > basin_residual:
        raise Diverged(
            f"flow residual {record.residual_inf:.3e} above the Newton basin "
            f"guard {basin_residual:g}")
    V = record.volume
    lap = masked_laplacian_matrix(dom)
    vol_row = np.full(n, dom.cell_volume)

    u = record.field.interior().copy()
    lam = record.lam

    def residual_vec(u_, lam_):
        g = -eps * eps * (lap @ u_) + np.asarray(p.deriv(u_), dtype=float)
        return np.concatenate([g - lam_, [vol_row @ u_ - V]])

    F = residual_vec(u, lam)
    norm = float(np.max(np.abs(F)))
    tol_abs = tol * max(1.0, abs(record.energy))
    floor_abs = stall_floor * max(1.0, abs(record.energy))
    best_u, best_lam, best_norm = u.copy(), lam, norm
    grew = 0
    steps = 0
    stalled = False
    while norm > tol_abs and steps < max_steps:
        A = (-eps * eps) * lap + sparse.diags(np.asarray(p.deriv2(u), dtype=float))
        J = sparse.bmat([[A, -np.ones((n, 1))],
                         [vol_row[None, :], None]], format="csc")
        try:
            solve = splu(J)
            delta = solve.solve(-F)
        except RuntimeError as exc:
            raise SingularJacobian(str(exc)) from exc
        if not np.all(np.isfinite(delta)):
            raise SingularJacobian("non-finite Newton step (singular system)")
        u = u + delta[:n]
        lam = lam + delta[n]
        F = residual_vec(u, lam)
        new_norm = float(np.max(np.abs(F)))
        if new_norm < best_norm:
            best_u, best_lam, best_norm = u.copy(), lam, new_norm
        grew = grew + 1 if new_norm > 0.5 * norm else 0
        if not np.isfinite(new_norm) or (grew >= 3 and new_norm > floor_abs):
            raise Diverged(f"Newton residual grew to {new_norm:.3e}")
        if grew >= 3:
            stalled = True
            break
        norm = new_norm
        steps += 1
    if norm > best_norm:
        u, lam, norm = best_u, best_lam, best_norm
    if norm > tol_abs:
        if norm > floor_abs:
            raise Diverged(
                f"Newton stalled at residual {norm:.3e} after {steps} steps")
        stalled = True

    vals = np.zeros(dom.shape)
    vals[mask] = u
    fld = Field(dom, vals)
    return SolutionRecord(
        field=fld,
        lam=float(lam),
        energy=energy(fld, p, eps),
        residual_inf=norm,
        barycenter=barycenter_of(fld) if np.any(vals) else np.zeros(dom.dim),
        iterations=record.iterations + steps,
        converged=True,
        eps=float(eps),
        volume=fld.volume,
        diagnostics={**record.diagnostics, "newton_steps": steps,
                     "newton_stalled": stalled,
                     "method": "gradient_flow+newton"},
    )


@dataclass(frozen=True)
class BoxBoundsReport:
    min_value: float
    max_value: float
    lower_ok: bool
    upper_ok: bool
    multiplier_ok: bool | None
    volume_positive: bool
    tolerance: float


def box_bounds_check(record: SolutionRecord, cert: PotentialCertificate,
                     tol: float = 1e-6) -> BoxBoundsReport:
    """A priori bound report: 0 <= u <= s0 for minimizers, lam >= w_minus.

    The multiplier bound applies only to records with positive volume; for
    degenerate zero-volume input the report notes the failed precondition
    instead of judging the multiplier.
    """
    vals = record.field.interior()
    vmin = float(vals.min(initial=0.0))
    vmax = float(vals.max(initial=0.0))
    vol_pos = record.volume > 0.0
    return BoxBoundsReport(
        min_value=vmin,
        max_value=vmax,
        lower_ok=bool(vmin >= -tol),
        upper_ok=bool(vmax <= cert.s0 + tol),
        multiplier_ok=bool(record.lam >= cert.w_minus - 1e-6) if vol_pos else None,
        volume_positive=vol_pos,
        tolerance=tol,
    )
