import numpy as np
import pytest

from dwlab.errors import CertificationError
from dwlab.potential import certify, from_callables, from_table, quartic, tilt


def quartic_roots(a1, a2):
    """Closed-form critical points of s^2(s-a1)(s-a2) via the quadratic formula."""
    b = 3.0 * (a1 + a2)
    disc = np.sqrt(9.0 * (a1 + a2) ** 2 - 32.0 * a1 * a2)
    return (b - disc) / 8.0, (b + disc) / 8.0


def test_quartic_values_at_origin():
    p = quartic(1.0, 2.0)
    assert p.eval(0.0) == 0.0
    assert p.deriv(0.0) == 0.0
    assert p.deriv2(0.0) == 4.0


def test_quartic_roots_by_construction():
    p = quartic(1.0, 2.0)
    assert p.eval(1.0) == pytest.approx(0.0, abs=1e-14)
    assert p.eval(2.0) == pytest.approx(0.0, abs=1e-14)


def test_quartic_rejects_bad_parameters():
    with pytest.raises(ValueError):
        quartic(1.0, 1.0)
    with pytest.raises(ValueError):
        quartic(-1.0, 2.0)
    with pytest.raises(ValueError):
        quartic(0.0, 2.0)


def test_certify_landmarks_match_closed_form(cert12):
    s1, s0 = quartic_roots(1.0, 2.0)
    assert cert12.s1crit == pytest.approx(s1, abs=1e-10)
    assert cert12.s0 == pytest.approx(s0, abs=1e-10)
    p = quartic(1.0, 2.0)
    assert cert12.m == pytest.approx(-p.eval(s0), abs=1e-10)
    assert cert12.m > 0


def test_certify_plateau_equals_first_zero_for_quartic(cert12):
    # W' >= 0 exactly on [0, s1crit] for this well: sign sampling confirms
    p = quartic(1.0, 2.0)
    s = np.linspace(0.0, cert12.s1crit, 5000)
    assert np.all(np.asarray(p.deriv(s)) >= -1e-12)
    assert cert12.a_plateau == pytest.approx(cert12.s1crit, rel=1e-9)


def test_certificate_invariants(cert12):
    assert 0 < cert12.s1crit <= cert12.a_plateau < cert12.s0
    assert cert12.w_minus <= 0.0
    assert cert12.all_passed


def test_w_minus_matches_closed_form(cert12):
    # interior minimum of W' sits at the larger root of W'' = 0
    p = quartic(1.0, 2.0)
    s_min = (18.0 + np.sqrt(324.0 - 192.0)) / 24.0
    assert cert12.w_minus == pytest.approx(p.deriv(s_min), abs=1e-10)


def test_certify_rejects_well_without_negative_minimum():
    # shifted symmetric well: W(0) = 1 violates the double-zero axiom and
    # there is no negative minimum
    w = from_callables(lambda s: (np.asarray(s) ** 2 - 1.0) ** 2,
                       lambda s: 4.0 * np.asarray(s) * (np.asarray(s) ** 2 - 1.0),
                       lambda s: 12.0 * np.asarray(s) ** 2 - 4.0,
                       (-2.0, 3.0))
    with pytest.raises(CertificationError):
        certify(w)


def test_tilt_identity_at_zero(q12):
    t0 = tilt(q12, 0.0)
    s = np.linspace(-1.0, 3.0, 101)
    assert np.allclose(t0.eval(s), q12.eval(s), atol=0.0)
    assert np.allclose(t0.deriv(s), q12.deriv(s), atol=0.0)


def test_tilt_shifts_derivative(q12):
    t1 = tilt(q12, 1.0)
    s = np.linspace(-1.0, 3.0, 101)
    assert np.allclose(t1.deriv(s), np.asarray(q12.deriv(s)) + 1.0, atol=1e-14)
    assert np.allclose(t1.deriv2(s), q12.deriv2(s), atol=0.0)


def test_tilt_round_trip(q12):
    back = tilt(tilt(q12, 0.7), -0.7)
    s = np.linspace(-2.0, 5.0, 257)
    assert np.allclose(back.eval(s), q12.eval(s), atol=1e-13)
    assert np.allclose(back.deriv(s), q12.deriv(s), atol=1e-13)


@pytest.mark.parametrize("a1,a2", [(1.0, 2.0), (1.0, 1.5), (0.5, 3.0)])
def test_derivative_consistency_central_differences(a1, a2):
    p = quartic(a1, a2)
    h = 1e-5
    s = np.linspace(p.sample_range[0] + h, p.sample_range[1] - h, 400)
    fd = (np.asarray(p.eval(s + h)) - np.asarray(p.eval(s - h))) / (2 * h)
    scale = np.maximum(1.0, np.abs(np.asarray(p.deriv(s))))
    assert np.max(np.abs(fd - p.deriv(s)) / scale) < 50 * h * h


def test_table_potential_tracks_quartic(q12, cert12):
    s = np.linspace(-2.0, 5.0, 801)
    pt = from_table(s, q12.eval(s))
    cert = certify(pt)
    assert cert.s0 == pytest.approx(cert12.s0, rel=1e-6)
    assert cert.m == pytest.approx(cert12.m, rel=1e-6)
    assert cert.s1crit == pytest.approx(cert12.s1crit, rel=1e-6)


def test_table_potential_validates_input():
    with pytest.raises(ValueError):
        from_table([0.0, 1.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        from_table([1.0, 2.0, 3.0, 4.0], [0.0, 1.0, 2.0, 3.0])
