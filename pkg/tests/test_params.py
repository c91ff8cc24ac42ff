import cmath
import math

import pytest
from hypothesis import given, strategies as st

from monitored_ll.params import PhysicalParams, bare_couplings, luttinger_from_exchange

PI = math.pi


def test_luttinger_free_point():
    assert luttinger_from_exchange(0.0, 1.0) == 1.0


def test_luttinger_pi_exchange():
    assert luttinger_from_exchange(PI, 1.0) == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_luttinger_domain_error_at_pole():
    with pytest.raises(ValueError):
        luttinger_from_exchange(2 * PI, 1.0)
    with pytest.raises(ValueError):
        luttinger_from_exchange(7.0, 1.0)
    with pytest.raises(ValueError):
        luttinger_from_exchange(-0.1, 1.0)


def test_luttinger_result_above_one():
    for jz in (0.1, 1.0, 5.0):
        assert luttinger_from_exchange(jz, 1.0) >= 1.0


def test_monitoring_off():
    c = bare_couplings(PhysicalParams(g_s=2.0, gamma=0.0, g_c=1.0))
    assert c.k_c == 1.0
    assert c.k_s == 0.25
    assert c.kappa == 0.0
    assert c.lam == 0.0


def test_fig2_reference_point():
    # independent evaluation of the coupling map with cmath
    gam, gc, gs = 0.5, 1.0, 2.0
    ct = st_ = 1 / math.sqrt(2)
    kappa = ct * st_ * gam / PI
    k_c = 1 / gc**2 - 2j * ct**2 * gam / PI - kappa**2
    k_s = 1 / gs**2 - 2j * ct**2 * gam / PI - kappa**2

    c = bare_couplings(PhysicalParams(g_s=gs, gamma=gam))
    assert c.kappa == pytest.approx(0.0795775, abs=1e-7)
    assert c.lam == pytest.approx(0.0506606, abs=1e-7)
    assert c.k_c == pytest.approx(k_c, abs=1e-15)
    assert c.k_s == pytest.approx(k_s, abs=1e-15)
    assert c.k_c == pytest.approx(0.993667 - 0.159155j, abs=1e-6)
    assert c.k_s == pytest.approx(0.243667 - 0.159155j, abs=1e-6)


def test_pure_density_filling_kills_kappa():
    for gam in (0.1, 0.7, 2.0):
        c = bare_couplings(PhysicalParams(g_s=1.5, gamma=gam, c_tilde=1.0, s_tilde=0.0))
        assert c.kappa == 0.0
        assert c.k_c == pytest.approx(1.0 - 2j * gam / PI, abs=1e-15)
        assert c.k_s == pytest.approx(1.0 / 1.5**2 - 2j * gam / PI, abs=1e-15)


@given(
    gam=st.floats(0.0, 5.0),
    gs=st.floats(1.0, 4.0),
    angle=st.floats(0.0, math.pi / 2),
)
def test_k_tilde_two_ways(gam, gs, angle):
    p = PhysicalParams(
        g_s=gs, gamma=gam, c_tilde=math.cos(angle), s_tilde=math.sin(angle)
    )
    c = bare_couplings(p)
    for k, kt in ((c.k_c, c.k_tilde_c), (c.k_s, c.k_tilde_s)):
        assert abs((k + c.kappa**2) - kt) < 1e-14
    # closed form, independent of s~ and kappa
    assert kt == pytest.approx(1 / gs**2 - 2j * p.c_tilde**2 * gam / PI, abs=1e-14)


def test_im_k_nonpositive_and_zero_only_trivially():
    c = bare_couplings(PhysicalParams(g_s=2.0, gamma=0.3))
    assert c.k_c.imag < 0 and c.k_s.imag < 0
    c0 = bare_couplings(PhysicalParams(g_s=2.0, gamma=0.0))
    assert c0.k_c.imag == 0.0
    c1 = bare_couplings(PhysicalParams(g_s=2.0, gamma=0.4, c_tilde=0.0, s_tilde=1.0))
    assert c1.k_c.imag == 0.0


def test_monotone_in_gamma():
    gammas = [0.1 * i for i in range(11)]
    cs = [bare_couplings(PhysicalParams(g_s=2.0, gamma=g)) for g in gammas]
    for a, b in zip(cs, cs[1:]):
        assert b.k_c.imag < a.k_c.imag
        assert b.k_s.imag < a.k_s.imag
        assert b.kappa > a.kappa
        assert b.lam > a.lam


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(g_s=0.9, gamma=0.1),
        dict(g_s=2.0, gamma=-0.1),
        dict(g_s=2.0, gamma=0.1, g_c=0.0),
        dict(g_s=2.0, gamma=0.1, v_F=0.0),
        dict(g_s=2.0, gamma=0.1, rho0=-1.0),
        dict(g_s=2.0, gamma=0.1, c_tilde=0.8, s_tilde=0.8),
    ],
)
def test_invalid_inputs_rejected(kwargs):
    with pytest.raises(ValueError):
        PhysicalParams(**kwargs)
