import io
import math

import numpy as np
import pytest

from khgauge.errors import DegenerateOperator, DomainMismatch, EndpointMismatch, NotIncreasing
from khgauge.indefinite import alexiewicz_norm
from khgauge.integrate import Integrand, constant
from khgauge.library import ident, one, sin2pi
from khgauge.recover import (
    BlackBoxOperator,
    MapSamples,
    map_from_samples,
    perturbed_operator,
    recover_sigma_phi,
    transport_operator,
    verify_recovery,
)
from khgauge.transport import cantor_psi, exp_map, identity_map, piecewise_affine_map, power_map

E = math.e


def test_identity_operator():
    s, phi = recover_sigma_phi(transport_operator(identity_map(), 1))
    assert int(s) == 1
    assert phi.max_error(lambda x: x) < 1e-12


def test_square_with_negative_sign():
    T = transport_operator(power_map(2), -1)
    s, phi = recover_sigma_phi(T)
    assert int(s) == -1
    assert phi.max_error(lambda x: x * x) < 1e-8
    rep = verify_recovery(T, s, phi, [one(), ident(), sin2pi()])
    assert rep.passed, rep.as_dict()
    assert all(p.passed for p in rep.probes)


def test_exp_map():
    T = transport_operator(exp_map(), 1)
    s, phi = recover_sigma_phi(T)
    assert int(s) == 1
    assert phi.max_error(lambda x: (np.exp(x) - 1) / (E - 1)) < 1e-8


@pytest.mark.parametrize("sigma", [1, -1])
def test_piecewise_affine_keeps_its_kink(sigma):
    T = transport_operator(piecewise_affine_map(), sigma)
    s, phi = recover_sigma_phi(T, grid=257)
    assert int(s) == sigma
    assert 0.25 in phi.breakpoints or 0.25 in phi.grid
    ref = piecewise_affine_map()
    assert phi.max_error(ref.forward) < 1e-8
    assert verify_recovery(T, s, phi).passed


def test_sign_matches_end_value():
    for sigma in (1, -1):
        s, phi = recover_sigma_phi(transport_operator(power_map(3), sigma))
        assert int(s) == int(np.sign(phi.meta["u_end"]))


def test_perturbed_operator_is_rejected():
    g0 = Integrand(lambda x: 0.1 * np.pi * np.sin(2 * np.pi * x), (0.0, 1.0), label="g0")
    assert alexiewicz_norm(g0, tol=1e-10) == pytest.approx(0.1, abs=1e-9)
    T = perturbed_operator(transport_operator(power_map(2), 1), g0)
    s, phi = recover_sigma_phi(T)
    rep = verify_recovery(T, s, phi)
    assert not rep.passed
    assert rep.worst_defect > 0.05


def test_cantor_operator_fails_verification():
    T = transport_operator(cantor_psi(), 1)
    s, phi = recover_sigma_phi(T)
    rep = verify_recovery(T, s, phi)
    assert not rep.passed
    first = rep.probes[0]
    assert first.isometry_defect >= 0.4
    with pytest.raises(EndpointMismatch):
        verify_recovery(T, s, phi, strict=True)


def test_degenerate_operator():
    zero = BlackBoxOperator(lambda f: constant(0.0, (0.0, 1.0)), (0.0, 1.0), (0.0, 1.0))
    with pytest.raises(DegenerateOperator):
        recover_sigma_phi(zero)


def test_operator_checks_cells():
    T = transport_operator(identity_map(), 1)
    with pytest.raises(DomainMismatch):
        T.apply(one((0.0, 2.0)))
    bad = BlackBoxOperator(lambda f: one((0.0, 2.0)), (0.0, 1.0), (0.0, 1.0))
    with pytest.raises(DomainMismatch):
        bad.apply(one())


def test_linearity_defect_and_serialized_wrapper():
    T = transport_operator(power_map(2), 1).serialized()
    assert T.linearity_defect(sin2pi(), ident(), tol=1e-8) < 1e-8
    g0 = Integrand(lambda x: 0.2 + 0 * x, (0.0, 1.0))
    P = perturbed_operator(T, g0)
    assert P.linearity_defect(sin2pi(), ident(), tol=1e-8) == pytest.approx(0.2, abs=1e-7)


def test_map_from_samples_rejects_bad_curves():
    x = np.linspace(0, 1, 9)
    with pytest.raises(NotIncreasing):
        map_from_samples(MapSamples(x, np.sin(3 * x) / np.sin(3), (0, 1), (0, 1)))
    with pytest.raises(EndpointMismatch):
        map_from_samples(MapSamples(x, 0.9 * x, (0, 1), (0, 1)))
    phi = map_from_samples(MapSamples(x, x**2, (0, 1), (0, 1)))
    assert phi.forward(0.5) == pytest.approx(0.25)
    assert np.allclose(phi.preimage(phi.forward(x)), x, atol=1e-12)


def test_not_increasing_reported_as_fail_by_default():
    T = transport_operator(identity_map(), 1)
    x = np.linspace(0, 1, 9)
    bad = MapSamples(x, np.concatenate([x[:4], x[3:4], x[5:]]), (0, 1), (0, 1))
    rep = verify_recovery(T, 1, bad, [one()])
    assert not rep.passed and "NotIncreasing" in rep.reasons[0]
    with pytest.raises(NotIncreasing):
        verify_recovery(T, 1, bad, [one()], strict=True)


@pytest.mark.parametrize("make,sigma", [(lambda: power_map(2), -1), (exp_map, 1), (piecewise_affine_map, 1)])
def test_idempotent(make, sigma):
    tol = 1e-8
    s, phi = recover_sigma_phi(transport_operator(make(), sigma), tol=tol)
    phi_hat = map_from_samples(phi)
    s2, again = recover_sigma_phi(transport_operator(phi_hat, s), grid=phi.grid, tol=tol)
    assert int(s2) == int(s)
    assert np.max(np.abs(again.values - phi.values)) <= 2 * tol


def test_csv():
    s, phi = recover_sigma_phi(transport_operator(power_map(2), 1), grid=5)
    buf = io.StringIO()
    phi.to_csv(buf)
    rows = buf.getvalue().strip().splitlines()
    assert rows[0] == "x,phi" and len(rows) == 6
    assert [float(v) for v in rows[3].split(",")] == pytest.approx([0.5, 0.25], abs=1e-9)
