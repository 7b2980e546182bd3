"""Bump transplantation and solution counting on 2-D domains.

The scaled radial ground state provides a family of low-energy seeds
indexed by interior points: placing the bump at x0 costs eps^N times the
unit-scale energy, and its barycenter returns x0.  Flowing every seed of a
lattice to a critical point, polishing with Newton and deduplicating gives
a catalog whose distinct count is compared against the domain's covering
category and Betti sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import GridDomain, make_domain
from .errors import (BumpOverflowsDomain, MissingRadialData, NonConvergence,
                     ZeroField)
from .fieldsolver import (Field, FlowOptions, SolutionRecord, barycenter_of,
                          energy, gradient_flow, newton_refine)
from .potential import Potential, PotentialCertificate
from .radial import RadialProfile, radius_bounds

__all__ = [
    "RadialReference",
    "AdmissibleParams",
    "SolutionCatalog",
    "MStarEstimate",
    "admissible",
    "photography",
    "barycenter",
    "sublevel_m",
    "sublevel_m_star",
    "enumerate_solutions",
    "dedup_records",
    "default_seed_lattice",
    "translate_classes",
]


@dataclass
class RadialReference:
    """Radial solves available to the 2-D experiments.

    ``gamma_threshold`` is the empirical mass threshold from the radial
    sweep; ``profiles`` hold unit-scale solves keyed by their mass.
    """

    gamma_threshold: float
    profiles: list

    def lookup(self, gamma: float, rtol: float = 1e-6) -> RadialProfile:
        for prof in self.profiles:
            if abs(prof.gamma - gamma) <= rtol * max(1.0, abs(gamma)):
                return prof
        raise MissingRadialData(
            f"no radial solve at gamma = {gamma:g} "
            f"(available: {[p.gamma for p in self.profiles]})")


@dataclass(frozen=True)
class AdmissibleParams:
    V1: float          # largest admissible volume for this domain
    eps1: float        # largest admissible eps at the requested volume
    gamma: float       # V / eps^N
    c_level: float     # eps^N * E(U_gamma), the seeding energy level
    inside: bool       # (V, eps) within the admissible box
    r_deform: float
    bump_radius: float  # eps * R_gamma


def admissible(domain: GridDomain, cert: PotentialCertificate,
               radial_ref: RadialReference, V: float, eps: float) -> AdmissibleParams:
    """Admissibility box and seeding level for a (volume, eps) pair.

    V1 = (r_deform / c_plus)^N guarantees transplanted bumps fit inside the
    inner shrinking; eps1 = (V / gamma_threshold)^(1/N) keeps the scaled
    mass above the radial threshold.  The seeding level is the scaled
    radial energy c = eps^N E(U_gamma), negative on the admissible box.
    """
    if V <= 0 or eps <= 0:
        raise ValueError("V and eps must be positive")
    dim = domain.dim
    rb = radius_bounds(cert, dim)
    V1 = (domain.r_deform / rb.c_plus) ** dim
    eps1 = (V / radial_ref.gamma_threshold) ** (1.0 / dim)
    gamma = V / eps ** dim
    prof = radial_ref.lookup(gamma)
    c_level = eps ** dim * prof.energy
    return AdmissibleParams(
        V1=float(V1),
        eps1=float(eps1),
        gamma=float(gamma),
        c_level=float(c_level),
        inside=bool(V <= V1 and eps <= eps1),
        r_deform=float(domain.r_deform),
        bump_radius=float(eps * prof.support_radius),
    )


def photography(domain: GridDomain, profile: RadialProfile, x0,
                eps: float) -> Field:
    """Transplant the scaled radial bump to center x0 on the domain grid.

    Values come from linear interpolation of the radial profile at
    |x - x0| / eps; the result is renormalized so its grid volume is
    exactly eps^N * gamma.  The bump must fit: eps * R_gamma strictly less
    than the distance from x0 to the boundary, with x0 in the inner
    shrinking.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dist = domain.distance_to_boundary(x0)
    bump_r = eps * profile.support_radius
    if dist <= domain.r_deform:
        raise BumpOverflowsDomain(
            f"center {x0.tolist()} is outside the inner shrinking "
            f"(boundary distance {dist:.4g} <= r_deform {domain.r_deform:g})")
    if bump_r >= dist:
        raise BumpOverflowsDomain(
            f"scaled bump radius {bump_r:.4g} exceeds the boundary "
            f"distance {dist:.4g} of its center")
    pts = domain.node_coords()
    r = np.linalg.norm(pts - x0, axis=1) / eps
    vals = np.interp(r, profile.grid.nodes, profile.values, right=0.0)
    vals = np.where(domain.mask.ravel(), vals, 0.0).reshape(domain.shape)
    target = eps ** domain.dim * profile.gamma
    total = vals.sum() * domain.cell_volume
    if total <= 0:
        raise BumpOverflowsDomain("transplanted bump misses the interior mask")
    return Field(domain, vals * (target / total))


def barycenter(f: Field) -> np.ndarray:
    """|u|-weighted center of mass; raises ZeroField on the zero field."""
    return barycenter_of(f)


def sublevel_m(profile: RadialProfile, eps: float) -> float:
    """Least energy of bumps confined to a ball of the scaled support radius.

    By the dilation identity this equals eps^N times the unit-scale
    minimum, so no new minimization is needed.
    """
    return float(eps ** profile.grid.dim * profile.energy)


@dataclass(frozen=True)
class MStarEstimate:
    value: float          # witness energy: an upper bound for the infimum
    rho: float
    eps: float
    volume: float
    bump_centers: tuple   # the two mirrored centers used by the witness
    grid_h: float


def sublevel_m_star(p: Potential, half_profile: RadialProfile, rho: float,
                    eps: float, grid_h: float | None = None) -> MStarEstimate:
    """Upper-bound witness for the exterior-constrained least energy.

    The competitor class keeps the barycenter at the origin while avoiding
    the ball of radius rho around it; the witness is a mirrored pair of
    half-volume bumps just outside that ball.  Its grid energy is an upper
    bound (reported as an estimate, with the construction) of the true
    infimum, which cannot be computed exactly.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    dim = half_profile.grid.dim
    bump_r = eps * half_profile.support_radius
    cx = rho + bump_r * 1.05 + eps * half_profile.grid.h
    half_w = cx + 1.3 * bump_r
    if grid_h is None:
        grid_h = min(eps / 3.0, bump_r / 12.0)
    dom = make_domain("k_holed_rectangle",
                      {"width": 2.2 * half_w, "height": 3.0 * bump_r, "k": 0},
                      grid_h)
    pts = dom.node_coords()
    vals = np.zeros(pts.shape[0])
    for sign in (-1.0, 1.0):
        center = np.array([sign * cx, 0.0])
        r = np.linalg.norm(pts - center, axis=1) / eps
        vals += np.interp(r, half_profile.grid.nodes, half_profile.values,
                          right=0.0)
    vals = np.where(dom.mask.ravel(), vals, 0.0).reshape(dom.shape)
    target = 2.0 * eps ** dim * half_profile.gamma
    vals *= target / (vals.sum() * dom.cell_volume)
    witness = Field(dom, vals)
    return MStarEstimate(
        value=energy(witness, p, eps),
        rho=float(rho),
        eps=float(eps),
        volume=float(target),
        bump_centers=((-cx, 0.0), (cx, 0.0)),
        grid_h=float(grid_h),
    )


def default_seed_lattice(domain: GridDomain, params: AdmissibleParams,
                         pitch: float | None = None) -> list:
    """Lattice of admissible bump centers over the inner shrinking.

    Default pitch is twice the scaled bump radius; points are kept when the
    bump fits strictly inside the domain from there.
    """
    pitch = 2.0 * params.bump_radius if pitch is None else pitch
    pitch = max(pitch, domain.h)
    seeds = []
    half_n = [int(np.floor((domain.axis_coords(a)[-1]) / pitch)) + 1
              for a in range(domain.dim)]
    ranges = [np.arange(-k, k + 1) * pitch for k in half_n]
    mesh = np.meshgrid(*ranges, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    for x0 in pts:
        d = domain.distance_to_boundary(x0)
        if d > domain.r_deform and d > params.bump_radius * 1.05:
            seeds.append(tuple(float(c) for c in x0))
    return seeds


@dataclass
class SolutionCatalog:
    records: list                  # deduplicated, sorted by (energy, barycenter)
    cluster_sizes: list            # seeds collapsed into each record
    failures: list                 # (seed, error message)
    c_level: float
    distinct_below_c: int
    distinct_total: int
    dedup_l2: float
    dedup_barycenter: float
    seeds: list
    params: AdmissibleParams | None = None
    notes: dict = field(default_factory=dict)


def _l2_distance(a: Field, b: Field) -> float:
    diff = a.values - b.values
    return float(np.sqrt(np.sum(diff * diff) * a.domain.cell_volume))


def _sort_key(rec: SolutionRecord):
    return (rec.energy, *[float(c) for c in rec.barycenter])


def dedup_records(records, dedup_l2: float, dedup_barycenter: float):
    """Greedy clustering: duplicates agree in both L2 and barycenter.

    Records are visited in (energy, barycenter) order so the outcome is
    independent of the input ordering; returns representatives and the
    number of records collapsed into each.
    """
    ordered = sorted(records, key=_sort_key)
    reps: list[SolutionRecord] = []
    sizes: list[int] = []
    for rec in ordered:
        for i, rep in enumerate(reps):
            if (np.linalg.norm(rec.barycenter - rep.barycenter) <= dedup_barycenter
                    and _l2_distance(rec.field, rep.field) <= dedup_l2):
                sizes[i] += 1
                break
        else:
            reps.append(rec)
            sizes.append(1)
    return reps, sizes


def enumerate_solutions(domain: GridDomain, p: Potential,
                        cert: PotentialCertificate, V: float, eps: float,
                        radial_ref: RadialReference,
                        seed_spec: Sequence | None = None,
                        flow_opts: FlowOptions | None = None,
                        use_newton: bool = True,
                        dedup_l2: float | None = None,
                        dedup_barycenter: float | None = None,
                        workers: int = 1) -> SolutionCatalog:
    """Flow every seed to a critical point, polish, deduplicate, count.

    Seeds default to the lattice of :func:`default_seed_lattice`.  Seed
    failures are recorded without aborting the sweep.  Two records are
    duplicates when both their L2 distance and their barycenter distance
    fall inside the tolerances; the catalog is sorted by (energy,
    barycenter) so identical configurations reproduce identical catalogs.
    Seeds are independent; ``workers > 1`` runs them in a thread pool and
    merges the results in seed order.
    """
    params = admissible(domain, cert, radial_ref, V, eps)
    gamma = params.gamma
    profile = radial_ref.lookup(gamma)
    seeds = list(seed_spec) if seed_spec is not None else \
        default_seed_lattice(domain, params)
    flow_opts = flow_opts or FlowOptions(tol_factor=1e-6, max_iter=60_000,
                                         strict=False)
    dedup_l2 = 1e-3 * np.sqrt(V) if dedup_l2 is None else dedup_l2
    dedup_barycenter = 2.0 * domain.h if dedup_barycenter is None else dedup_barycenter

    def solve_seed(seed):
        try:
            init = photography(domain, profile, seed, eps)
            rec = gradient_flow(init, p, V, eps, flow_opts)
            if use_newton:
                try:
                    rec = newton_refine(rec, p, eps)
                except Exception as exc:  # keep the flow record, note the polish failure
                    rec.diagnostics["newton_error"] = f"{type(exc).__name__}: {exc}"
            rec.diagnostics["seed"] = tuple(seed)
            return rec, None
        except (BumpOverflowsDomain, NonConvergence, ZeroField) as exc:
            return None, (tuple(seed), f"{type(exc).__name__}: {exc}")

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(solve_seed, seeds))
    else:
        outcomes = [solve_seed(seed) for seed in seeds]
    raw = [rec for rec, _ in outcomes if rec is not None]
    failures = [fail for _, fail in outcomes if fail is not None]

    reps, sizes = dedup_records(raw, dedup_l2, dedup_barycenter)
    below = sum(1 for r in reps if r.energy <= params.c_level)
    return SolutionCatalog(
        records=reps,
        cluster_sizes=sizes,
        failures=failures,
        c_level=params.c_level,
        distinct_below_c=below,
        distinct_total=len(reps),
        dedup_l2=float(dedup_l2),
        dedup_barycenter=float(dedup_barycenter),
        seeds=[tuple(s) for s in seeds],
        params=params,
    )


def _bump_signature(rec: SolutionRecord):
    """Peak cell, background level and background-free values of a record."""
    vals = rec.field.values
    mask = rec.field.domain.mask
    peak = np.unravel_index(int(np.argmax(vals)), vals.shape)
    background = float(np.median(vals[mask]))
    return peak, background, vals - np.where(mask, background, 0.0)


def translate_classes(catalog: SolutionCatalog, rel_tol: float = 0.15,
                      zone_frac: float = 0.05) -> list:
    """Group catalog records whose bumps are translates of one another.

    Records are aligned by their peak cells after subtracting each one's
    own far-field level (the domain-wide background is position independent
    and would otherwise mask the comparison).  Membership requires the
    aligned bump-zone L2 mismatch to stay below rel_tol relative to the
    representative; the default absorbs the sub-cell phase left over when a
    bump is pinned between lattice sites, while genuinely different shapes
    (splittings, different masses) sit far above it.  On a contractible
    domain all basins' records should land in a single class.
    """
    classes: list[list[int]] = []
    reps: list[int] = []
    sigs = [_bump_signature(rec) for rec in catalog.records]
    for i in range(len(catalog.records)):
        peak_i, _, tilde_i = sigs[i]
        placed = False
        for ci, j in enumerate(reps):
            peak_j, _, tilde_j = sigs[j]
            shifted = tilde_i
            for axis in range(shifted.ndim):
                shifted = np.roll(shifted, peak_j[axis] - peak_i[axis], axis=axis)
            zone = tilde_j > zone_frac * tilde_j.max(initial=0.0)
            norm = np.sqrt(np.sum(tilde_j[zone] ** 2))
            dist = np.sqrt(np.sum((shifted[zone] - tilde_j[zone]) ** 2))
            if dist <= rel_tol * max(norm, 1e-300):
                classes[ci].append(i)
                placed = True
                break
        if not placed:
            reps.append(i)
            classes.append([i])
    return classes
