import math

import pytest
from hypothesis import given, strategies as st

from recool.errors import DomainError
from recool.physics import angular
from recool.trap import (Q_STABILITY_LIMIT, MathieuEstimate, ResonatorSpec, coupling_fraction, fixtures,
                         mathieu_q_from_secular, operating_point, resonator_power, resonator_voltage,
                         secular_from_q)

SPEC = ResonatorSpec(200.0, 24.0, 21.5e6)


def test_resonator_examples():
    assert resonator_voltage(0.0, SPEC) == 0.0
    assert resonator_voltage(4.01, SPEC) == pytest.approx(680.0, rel=0.005)
    assert resonator_voltage(4 * 2.5, SPEC) == pytest.approx(2 * resonator_voltage(2.5, SPEC), rel=1e-14)
    # frozen: (680 / 24)^2 / 200
    assert resonator_power(680.0, SPEC) == pytest.approx(4.013888888888889, rel=1e-14)
    with pytest.raises(DomainError):
        resonator_voltage(-1.0, SPEC)
    with pytest.raises(DomainError):
        ResonatorSpec(0.0, 24.0)


@given(st.floats(1e-9, 1e4))
def test_resonator_inverse(p):
    assert resonator_power(resonator_voltage(p, SPEC), SPEC) == pytest.approx(p, rel=1e-12)


def test_coupling_examples():
    assert tuple(coupling_fraction(10, 0)) == (1.0, True)
    f, ok = coupling_fraction(10, 0.5)
    assert f == pytest.approx(0.95) and ok
    f, ok = coupling_fraction(10, 1.0)
    assert f == pytest.approx(0.90) and not ok
    with pytest.raises(DomainError):
        coupling_fraction(10, 11)


@given(st.floats(0.1, 100.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_coupling_bounded_and_monotone(fwd, a, b):
    lo, hi = sorted((a * fwd, b * fwd))
    f_lo, f_hi = coupling_fraction(fwd, lo).fraction, coupling_fraction(fwd, hi).fraction
    assert 0.0 <= f_hi <= f_lo <= 1.0


def test_mathieu_examples():
    q, stable = mathieu_q_from_secular(angular(2.069e6), angular(21.48e6))
    assert q == pytest.approx(0.272, abs=5e-4)
    assert stable
    assert mathieu_q_from_secular(1e-9, angular(21.48e6)).q == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        mathieu_q_from_secular(angular(11e6), angular(21.48e6))


@given(st.floats(1e3, 1e7))
def test_mathieu_round_trip(f):
    drive = angular(21.48e6)
    w = angular(min(f, 10e6))
    assert secular_from_q(mathieu_q_from_secular(w, drive).q, drive) == pytest.approx(w, rel=1e-12)


def test_stability_boundary():
    assert MathieuEstimate(math.nextafter(Q_STABILITY_LIMIT, 0)).stable
    assert not MathieuEstimate(Q_STABILITY_LIMIT).stable
    assert Q_STABILITY_LIMIT == 0.908


def test_fixtures():
    fx = fixtures()
    assert fx.table2["1"] == 148.88
    assert fx.table2["RF"] == 680.0
    assert fx.resonator.f0 == 21.5
    assert fx.trap_depth == 4.9
    assert fx.secular_MHz == (2.069, 2.110, 1.030)
    assert fx.drive_MHz == 21.48
    with pytest.raises(TypeError):
        fx.table2["1"] = 0.0
    assert resonator_power(fx.table2["RF"], fx.resonator.spec()) == pytest.approx(4.0, rel=0.02)


def test_operating_point():
    op = operating_point()
    assert op.rf_amplitude == 680.0
    assert op.drive_omega == pytest.approx(angular(21.48e6))
    assert "RF" not in op.electrode_voltages
