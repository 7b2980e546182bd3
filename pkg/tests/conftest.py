import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from dwlab.potential import certify, quartic
from dwlab.radial import RadialGrid, minimize_radial


@pytest.fixture(scope="session")
def q12():
    return quartic(1.0, 2.0)


@pytest.fixture(scope="session")
def cert12(q12):
    return certify(q12)


@pytest.fixture(scope="session")
def prof200(q12, cert12):
    """Flagship planar ground state: gamma=200, h=1/32 on [0, 32]."""
    return minimize_radial(q12, cert12, 200.0, RadialGrid(2, 32.0, 1024))


class LinePlateauOracle:
    """Exact structure of the 1-D compactly supported minimizer.

    For mass beyond the plateau threshold the profile is a flat core at the
    level u* where the secant from the origin is tangent to W, glued to a
    fixed interface; the multiplier equals W(u*)/u* independently of the
    mass, the energy is affine in the mass and the support radius is affine
    in the mass as well.  All constants reduce to 1-D quadratures with an
    explicit first integral, fully independent of the grid solver.
    """

    def __init__(self, p, cert):
        self.p = p
        self.u_star = brentq(lambda u: p.deriv(u) * u - p.eval(u),
                             1.05, cert.s0 - 1e-12, xtol=1e-15)
        self.lam = p.eval(self.u_star) / self.u_star

        def speed(u):
            return np.sqrt(max(2.0 * (p.eval(u) - self.lam * u), 0.0))

        us = self.u_star
        # interface tension and mass deficit (both finite: the integrands
        # vanish linearly at u* and like sqrt(u) at 0)
        self.sigma = quad(lambda u: speed(u), 0.0, us, limit=400)[0]
        mid = 0.5 * us
        self.deficit = (
            quad(lambda t: (us - t * t) / speed(t * t) * 2 * t,
                 1e-12, np.sqrt(mid), limit=400)[0]
            + quad(lambda s: (s * s) / speed(us - s * s) * 2 * s,
                   1e-12, np.sqrt(us - mid), limit=400)[0])

    def energy(self, gamma):
        return self.lam * gamma + 2.0 * self.sigma

    def radius(self, gamma):
        return gamma / (2.0 * self.u_star) + self.deficit / self.u_star


@pytest.fixture(scope="session")
def line_oracle(q12, cert12):
    return LinePlateauOracle(q12, cert12)


def rearrangement_corpus(n=65, h=1.0 / 64, count=50, seed=42):
    """Smooth nonnegative fields vanishing at the boundary of the unit square.

    Mix: separated pairs, eccentric blobs, compact radial bumps at exact
    lattice offsets, heavily smoothed noise, triple-bump superpositions.
    """
    from scipy.ndimage import gaussian_filter

    rng = np.random.default_rng(seed)
    x = np.arange(n) * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    taper = (np.sin(np.pi * np.clip(X, 0, 1)) * np.sin(np.pi * np.clip(Y, 0, 1))) ** 2

    def gauss(cx, cy, sx, sy=None):
        sy = sx if sy is None else sy
        return np.exp(-((X - cx) ** 2 / (2 * sx * sx)
                        + (Y - cy) ** 2 / (2 * sy * sy)))

    fields = []
    for trial in range(count):
        kind = trial % 5
        if kind == 0:
            d = rng.uniform(0.18, 0.3)
            u = (gauss(0.5 - d, 0.5, rng.uniform(0.05, 0.08))
                 + rng.uniform(0.6, 1.4) * gauss(0.5 + d,
                                                 0.5 + rng.uniform(-0.1, 0.1),
                                                 rng.uniform(0.05, 0.08))) * taper
        elif kind == 1:
            u = gauss(0.5, 0.5, rng.uniform(0.14, 0.2),
                      rng.uniform(0.05, 0.08)) * taper
        elif kind == 2:
            k1, k2 = rng.integers(-6, 7, 2)
            r = np.hypot(X - 0.5 - k1 * h, Y - 0.5 - k2 * h)
            rad = rng.uniform(0.15, 0.22)
            u = np.where(r < rad, np.cos(0.5 * np.pi * r / rad) ** 2, 0.0)
        elif kind == 3:
            u = gaussian_filter(rng.random((n, n)), 10.0)
            u = (u - u.min()) * taper
        else:
            u = sum(rng.uniform(0.5, 1.2) * gauss(rng.uniform(0.3, 0.7),
                                                  rng.uniform(0.3, 0.7),
                                                  rng.uniform(0.05, 0.09))
                    for _ in range(3)) * taper
        fields.append(u)
    return fields, h


@pytest.fixture(scope="session")
def corpus50():
    return rearrangement_corpus()
