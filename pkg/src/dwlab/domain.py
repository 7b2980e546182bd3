"""Masked uniform-grid domains with known topology.

Domains come from analytic families (disk, annulus, perturbed annulus,
rectangle with k circular holes, plus a 1-D interval used by solver
oracles).  Each family supplies an exact signed distance to the boundary,
positive inside, from which the node mask, the inner shrinking Omega^-_r
and the outer fattening Omega^+_r are all derived.  Topological invariants
are tabulated per family: the generated masks make them exact by
construction, and a flood-fill hole count cross-checks the first Betti
number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ResolutionTooCoarse, UnknownFamily

__all__ = [
    "GridDomain",
    "TopologyInfo",
    "make_domain",
    "make_interval",
    "topology",
    "hole_count",
    "FAMILIES",
]

FAMILIES = ("disk", "annulus", "perturbed_annulus", "k_holed_rectangle", "interval")

#: exterior margin, in nodes, between any interior node and the array edge
EDGE_MARGIN = 3


@dataclass
class GridDomain:
    """Uniform node lattice with an interior mask and exact boundary distances.

    Nodes sit at origin + index * h along each axis.  ``signed_distance``
    holds the exact distance to the domain boundary at every node, positive
    inside; ``mask = signed_distance > 0``.  ``r_deform`` is the default
    inset/fattening radius for which the shrunk and fattened domains keep
    the family's homotopy type.
    """

    family: str
    params: dict
    h: float
    origin: tuple
    signed_distance: np.ndarray
    r_deform: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.signed_distance.ndim

    @property
    def mask(self) -> np.ndarray:
        return self.signed_distance > 0.0

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def shape(self) -> tuple:
        return self.signed_distance.shape

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.arange(self.shape[axis]) * self.h

    def node_coords(self) -> np.ndarray:
        """(n_nodes, dim) coordinates of every lattice node, C order."""
        mesh = np.meshgrid(*[self.axis_coords(a) for a in range(self.dim)],
                           indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def boundary_distance(self) -> np.ndarray:
        """Distance to the boundary on interior nodes, 0 outside."""
        return np.where(self.mask, self.signed_distance, 0.0)

    def omega_minus(self, r: float | None = None) -> np.ndarray:
        """Mask of the inner shrinking {x in domain : dist(x, boundary) > r}."""
        r = self.r_deform if r is None else r
        return self.signed_distance > r

    def omega_plus(self, r: float | None = None) -> np.ndarray:
        """Mask of the outer fattening {x : dist(x, domain) < r}."""
        r = self.r_deform if r is None else r
        return self.signed_distance > -r

    def contains(self, point, fatten: float = 0.0) -> bool:
        """Membership of an arbitrary point, via the analytic distance."""
        return bool(_SIGNED_DISTANCE[self.family](np.atleast_2d(np.asarray(
            point, dtype=float)), self.params)[0] > -fatten)

    def distance_to_boundary(self, point) -> float:
        return float(_SIGNED_DISTANCE[self.family](
            np.atleast_2d(np.asarray(point, dtype=float)), self.params)[0])

    @property
    def interior_count(self) -> int:
        return int(self.mask.sum())

    @property
    def area(self) -> float:
        return self.interior_count * self.cell_volume


@dataclass(frozen=True)
class TopologyInfo:
    """Tabulated invariants used by the counting checks."""

    cat: int                 # covering category (least contractible cover)
    betti: tuple             # (b0, b1, ...)
    p1: int                  # sum of Betti numbers
    morse_lower: int         # 2 * p1 - 1

    def __post_init__(self):
        assert self.p1 == sum(self.betti)
        assert self.cat >= 1


def _sd_disk(pts, params):
    r = np.linalg.norm(pts, axis=1)
    return params["radius"] - r


def _sd_annulus(pts, params):
    r = np.linalg.norm(pts, axis=1)
    return np.minimum(params["r_out"] - r, r - params["r_in"])


def _sd_perturbed_annulus(pts, params):
    r = np.linalg.norm(pts, axis=1)
    hole_center = np.array([params.get("offset_x", 0.0), params.get("offset_y", 0.0)])
    rh = np.linalg.norm(pts - hole_center, axis=1)
    return np.minimum(params["r_out"] - r, rh - params["r_in"])


def _sd_rect(pts, half_w, half_h):
    dx = np.abs(pts[:, 0]) - half_w
    dy = np.abs(pts[:, 1]) - half_h
    outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
    inside = np.minimum(np.maximum(dx, dy), 0.0)
    return -(outside + inside)


def _hole_centers(params):
    k = params["k"]
    w = params["width"]
    return [((i + 1) * w / (k + 1) - w / 2.0, 0.0) for i in range(k)]


def _sd_k_holed_rectangle(pts, params):
    sd = _sd_rect(pts, params["width"] / 2.0, params["height"] / 2.0)
    for cx, cy in _hole_centers(params):
        rh = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
        sd = np.minimum(sd, rh - params["hole_radius"])
    return sd


def _sd_interval(pts, params):
    x = pts[:, 0]
    return np.minimum(x, params["length"] - x)


_SIGNED_DISTANCE = {
    "disk": _sd_disk,
    "annulus": _sd_annulus,
    "perturbed_annulus": _sd_perturbed_annulus,
    "k_holed_rectangle": _sd_k_holed_rectangle,
    "interval": _sd_interval,
}


def _validate(family, params, h):
    if family == "disk":
        if params["radius"] <= 0:
            raise ValueError("disk radius must be positive")
        return params["radius"], params["radius"]
    if family in ("annulus", "perturbed_annulus"):
        r_in, r_out = params["r_in"], params["r_out"]
        if not (0 < r_in < r_out):
            raise ValueError("annulus needs 0 < r_in < r_out")
        off = np.hypot(params.get("offset_x", 0.0), params.get("offset_y", 0.0))
        if family == "annulus" and off != 0.0:
            raise ValueError("plain annulus takes no hole offset")
        if off + r_in >= r_out:
            raise ValueError("hole must stay strictly inside the outer circle")
        width_min = r_out - r_in - off  # narrowest passage width
        if 2 * r_in < 5 * h:
            raise ResolutionTooCoarse(
                f"hole diameter {2 * r_in:g} spans fewer than 5 cells at h={h:g}")
        bound = r_out
        feature = min(width_min / 2.0, r_in)
        return bound, feature
    if family == "k_holed_rectangle":
        w, ht, k, rho = (params["width"], params["height"], params["k"],
                         params.get("hole_radius", 0.0))
        if w <= 0 or ht <= 0 or k < 0:
            raise ValueError("rectangle needs positive sides and k >= 0")
        if k > 0:
            spacing = w / (k + 1)
            if rho <= 0:
                raise ValueError("holes need a positive radius")
            if 2 * rho >= min(spacing, ht):
                raise ValueError("holes overlap each other or the boundary")
            if 2 * rho < 5 * h:
                raise ResolutionTooCoarse(
                    f"hole diameter {2 * rho:g} spans fewer than 5 cells at h={h:g}")
            gap = min((spacing - 2 * rho) / 2.0, (ht / 2.0 - rho) / 1.0)
            feature = min(gap / 2.0, rho)
        else:
            feature = min(w, ht) / 2.0
        bound = float(np.hypot(w / 2.0, ht / 2.0))
        return bound, feature
    raise UnknownFamily(f"unknown family {family!r}")


def make_domain(family: str, params: dict, h: float,
                r_deform: float | None = None) -> GridDomain:
    """Build a masked node lattice for one of the analytic families.

    The lattice is centered on the domain's symmetry center with an
    exterior margin of EDGE_MARGIN nodes, so 5-point stencils never touch
    the array edge.  ``r_deform`` defaults to half the minimal feature
    size (the largest inset for which the shrunk/fattened domains keep the
    family's homotopy type).
    """
    if family == "interval":
        return make_interval(params["length"], h)
    if family not in _SIGNED_DISTANCE:
        raise UnknownFamily(f"unknown family {family!r}")
    if h <= 0:
        raise ValueError("spacing h must be positive")
    bound, feature = _validate(family, params, h)
    half_n = int(np.ceil(bound / h)) + EDGE_MARGIN
    idx = np.arange(-half_n, half_n + 1)
    xs = idx * h
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    sd = _SIGNED_DISTANCE[family](pts, params).reshape(X.shape)
    dom = GridDomain(
        family=family,
        params=dict(params),
        h=h,
        origin=(float(xs[0]), float(xs[0])),
        signed_distance=sd,
        r_deform=float(feature / 2.0 if r_deform is None else r_deform),
    )
    if dom.interior_count == 0:
        raise ResolutionTooCoarse("empty interior mask")
    return dom


def make_interval(length: float, h: float) -> GridDomain:
    """1-D interval [0, length]; used by solver oracles and 1-D experiments."""
    if length <= 0 or h <= 0:
        raise ValueError("need positive length and spacing")
    n = int(round(length / h))
    if abs(n * h - length) > 1e-9 * length:
        raise ValueError("h must divide the interval length")
    xs = np.arange(-EDGE_MARGIN, n + EDGE_MARGIN + 1) * h
    sd = _sd_interval(xs[:, None], {"length": length})
    return GridDomain(
        family="interval",
        params={"length": float(length)},
        h=float(h),
        origin=(float(xs[0]),),
        signed_distance=sd,
        r_deform=float(length / 4.0),
    )


def topology(domain: GridDomain) -> TopologyInfo:
    """Tabulated invariants of the generated family."""
    fam = domain.family
    if fam in ("disk", "interval"):
        return TopologyInfo(cat=1, betti=(1,), p1=1, morse_lower=1)
    if fam in ("annulus", "perturbed_annulus"):
        return TopologyInfo(cat=2, betti=(1, 1), p1=2, morse_lower=3)
    if fam == "k_holed_rectangle":
        k = int(domain.params["k"])
        if k == 0:
            return TopologyInfo(cat=1, betti=(1,), p1=1, morse_lower=1)
        return TopologyInfo(cat=2, betti=(1, k), p1=1 + k, morse_lower=2 * k + 1)
    raise UnknownFamily(f"no tabulated topology for family {fam!r}")


def hole_count(domain: GridDomain) -> int:
    """Flood-fill count of bounded complement components (discrete b1)."""
    from scipy import ndimage

    if domain.dim != 2:
        return 0
    exterior = ~domain.mask
    labels, n = ndimage.label(exterior)
    if n == 0:
        return 0
    border_labels = set(np.unique(labels[0, :])) | set(np.unique(labels[-1, :])) \
        | set(np.unique(labels[:, 0])) | set(np.unique(labels[:, -1]))
    border_labels.discard(0)
    holes = [lab for lab in range(1, n + 1) if lab not in border_labels]
    return len(holes)


def connected_components(domain: GridDomain) -> int:
    """4-connected component count of the interior mask (discrete b0)."""
    from scipy import ndimage

    if domain.dim != 2:
        mask = domain.mask.astype(int)
        return int(np.sum(np.diff(np.concatenate([[0], mask])) == 1))
    _, n = ndimage.label(domain.mask)
    return int(n)
