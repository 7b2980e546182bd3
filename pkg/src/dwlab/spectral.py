"""Constrained second-variation spectra and index bookkeeping.

Linearizing the constrained equation at a solution u gives the operator
-eps^2 lap + W''(u) acting on zero-mean Dirichlet fields.  The number of
negative eigenvalues is the solution's index; an eigenvalue inside the
numerical degeneracy band flags the record as degenerate and excludes it
from the polynomial counting identity, which compares the index multiset
against the domain's Betti numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .domain import TopologyInfo
from .errors import DegenerateInput, EigSolverStall
from .fieldsolver import SolutionRecord, masked_laplacian_matrix
from .potential import Potential

__all__ = [
    "SpectrumReport",
    "MorseVerdict",
    "IndexRangeVerdict",
    "linearized_spectrum",
    "morse_relation_check",
    "morse_relation_from_records",
    "index_range_check",
]

#: eigenvector residual requirement, per reported pair
EIG_RESIDUAL_TOL = 1e-8


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray      # ascending, k smallest of the constrained operator
    morse_index: int             # count of eigenvalues below -tol_eig
    degenerate_flag: bool        # any |eigenvalue| <= tol_eig
    tol_eig: float
    residuals: np.ndarray        # ||P L P v - theta v|| per pair
    constraint_means: np.ndarray  # |mean(v)| per eigenvector
    method: str = ""


def _constrained_matrix(record: SolutionRecord, p: Potential, eps: float):
    dom = record.field.domain
    lap = masked_laplacian_matrix(dom)
    wpp = np.asarray(p.deriv2(record.field.interior()), dtype=float)
    return (-eps * eps) * lap + sparse.diags(wpp), wpp


def _dense_spectrum(L, k):
    from scipy.linalg import eigh, null_space

    n = L.shape[0]
    Q = null_space(np.ones((1, n)))
    Hc = Q.T @ (L @ Q)
    Hc = 0.5 * (Hc + Hc.T)
    vals, vecs = eigh(Hc, subset_by_index=[0, min(k, n - 1) - 1])
    return vals, Q @ vecs


def _iterative_spectrum(L, k, wpp_min):
    n = L.shape[0]
    sigma = min(0.0, wpp_min) - 1.0
    bordered = sparse.bmat(
        [[L - sigma * sparse.identity(n), np.ones((n, 1))],
         [np.ones((1, n)), None]], format="csc")
    lu = splu(bordered)
    rhs = np.zeros(n + 1)

    def matvec(v):
        w = v - v.mean()
        rhs[:n] = w
        sol = lu.solve(rhs)
        return sol[:n]

    op = LinearOperator((n, n), matvec=matvec)
    # largest magnitudes of (constrained L - sigma)^- correspond to the
    # smallest constrained eigenvalues; the constant direction maps to zero
    # and never shows up among the large ones
    mu, vecs = eigsh(op, k=min(k, n - 2), which="LA", maxiter=5000, tol=1e-12)
    theta = sigma + 1.0 / mu
    order = np.argsort(theta)
    return theta[order], vecs[:, order]


def linearized_spectrum(record: SolutionRecord, p: Potential, eps: float,
                        k: int = 6, tol_eig: float | None = None,
                        dense_cutoff: int = 2000) -> SpectrumReport:
    """k smallest eigenvalues of the zero-mean-restricted linearization.

    Small systems are resolved by dense diagonalization on an orthonormal
    basis of the zero-mean subspace; larger ones by shift-inverted Lanczos
    on the bordered (operator, mean-constraint) factorization.  Every
    reported pair must satisfy the residual bound, otherwise
    EigSolverStall is raised.
    """
    if k < 1:
        raise ValueError("need k >= 1")
    dom = record.field.domain
    h = dom.h
    tol_eig = 1e-6 * (eps * eps / (h * h)) if tol_eig is None else tol_eig
    L, wpp = _constrained_matrix(record, p, eps)
    n = L.shape[0]
    if n <= dense_cutoff:
        vals, vecs = _dense_spectrum(L.toarray(), k)
        method = "dense"
    else:
        vals, vecs = _iterative_spectrum(L, k, float(wpp.min()))
        method = "shift-invert"

    residuals = np.empty(len(vals))
    means = np.empty(len(vals))
    for i, theta in enumerate(vals):
        v = vecs[:, i]
        v = v / np.linalg.norm(v)
        Lv = L @ v
        Lv = Lv - Lv.mean()
        residuals[i] = float(np.linalg.norm(Lv - theta * v))
        means[i] = float(abs(v.mean()))
    if np.any(residuals > EIG_RESIDUAL_TOL * np.maximum(1.0, np.abs(vals))):
        worst = float(residuals.max())
        raise EigSolverStall(f"eigenpair residual {worst:.3e} above tolerance")

    vals = np.asarray(vals, dtype=float)
    return SpectrumReport(
        eigenvalues=vals,
        morse_index=int(np.sum(vals < -tol_eig)),
        degenerate_flag=bool(np.any(np.abs(vals) <= tol_eig)),
        tol_eig=float(tol_eig),
        residuals=residuals,
        constraint_means=means,
        method=method,
    )


@dataclass(frozen=True)
class MorseVerdict:
    consistent: bool
    q_coeffs: tuple | None       # nonnegative integer coefficients of Q, or None
    detail: str
    below_count_ok: bool | None  # >= p1 records at or below the level
    above_count_ok: bool | None  # >= p1 - 1 records above the level


def _poly_from_counts(indices) -> np.ndarray:
    idx = np.asarray(list(indices), dtype=int)
    if idx.size == 0:
        return np.zeros(1, dtype=int)
    if np.any(idx < 0):
        raise ValueError("indices must be nonnegative")
    return np.bincount(idx)


def morse_relation_check(indices, topo: TopologyInfo,
                         n_below_c: int | None = None,
                         n_above_c: int | None = None) -> MorseVerdict:
    """Test the counting identity sum t^mu = P + t(P - 1) + (1 + t) Q.

    ``indices`` is the multiset of indices of all (nondegenerate) critical
    points found.  The verdict carries Q's coefficients when a polynomial
    with nonnegative integer coefficients exists, otherwise the violation.
    Optional below/above counts are checked against the lower bounds p1
    and p1 - 1.
    """
    s = _poly_from_counts(indices)
    pt = np.asarray(topo.betti, dtype=int)
    shifted = np.concatenate([[0], pt])
    shifted[1] -= 1  # t * (P - 1)
    width = max(len(s), len(pt), len(shifted))
    diff = np.zeros(width, dtype=int)
    diff[:len(s)] += s
    diff[:len(pt)] -= pt
    diff[:len(shifted)] -= shifted

    # synthetic division by (1 + t)
    q = np.zeros(max(width - 1, 1), dtype=int)
    carry = 0
    for i in range(width - 1):
        q[i] = diff[i] - carry
        carry = q[i]
    remainder = diff[width - 1] - (carry if width > 1 else 0)

    ok = remainder == 0 and np.all(q >= 0)
    if ok:
        detail = "identity holds"
        q_trim = tuple(int(c) for c in np.trim_zeros(q, "b"))
    else:
        q_trim = None
        if remainder != 0:
            detail = f"division by (1+t) leaves remainder {int(remainder)}"
        else:
            detail = ("quotient has negative coefficients "
                      f"{tuple(int(c) for c in q)}")
    below_ok = None if n_below_c is None else bool(n_below_c >= topo.p1)
    above_ok = None if n_above_c is None else bool(n_above_c >= topo.p1 - 1)
    return MorseVerdict(consistent=bool(ok), q_coeffs=q_trim, detail=detail,
                        below_count_ok=below_ok, above_count_ok=above_ok)


def morse_relation_from_records(records, topo: TopologyInfo,
                                c_level: float) -> MorseVerdict:
    """Morse check over computed records; degenerate input is refused."""
    for rec in records:
        if rec.nondegenerate is False:
            raise DegenerateInput(
                "catalog contains a degenerate record; the counting identity "
                "only applies to nondegenerate critical points")
        if rec.morse_index is None:
            raise DegenerateInput("record lacks a computed index")
    indices = [rec.morse_index for rec in records]
    below = sum(1 for rec in records if rec.energy <= c_level)
    return morse_relation_check(indices, topo, n_below_c=below,
                                n_above_c=len(records) - below)


@dataclass(frozen=True)
class IndexRangeVerdict:
    ok: bool
    max_allowed: int
    offenders: tuple


def index_range_check(records, topo: TopologyInfo,
                      dim: int = 2) -> IndexRangeVerdict:
    """Low-level records must have index at most the domain dimension."""
    offenders = tuple(i for i, rec in enumerate(records)
                      if rec.morse_index is not None and rec.morse_index > dim)
    return IndexRangeVerdict(ok=len(offenders) == 0, max_allowed=dim,
                             offenders=offenders)
