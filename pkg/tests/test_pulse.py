import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydopt.errors import ConfigError, ConstraintError
from rydopt.model import mhz_to_angular
from rydopt.pulse import (
    ControlConstraints,
    FieldParams,
    FourierSeries,
    Guess,
    PulseParams,
    SampledPulse,
    draw_basis,
    linear_chirp_reference,
    rise_time,
    synthesize,
    time_grid,
)

CONS = ControlConstraints(delta_start=mhz_to_angular(-1.0), delta_end=mhz_to_angular(1.2))


def random_params(seed, scale, duration=3.0):
    rng = np.random.default_rng(seed)
    fo = draw_basis(rng.integers(1 << 30), 4, CONS.omega_bandwidth, duration)
    fd = draw_basis(rng.integers(1 << 30), 4, CONS.delta_bandwidth, duration)
    om = FourierSeries.from_vector(fo, scale * CONS.omega_max * rng.normal(size=8))
    de = FourierSeries.from_vector(fd, scale * CONS.delta_max * rng.normal(size=8))
    return PulseParams(
        duration,
        FieldParams(Guess("constant", 0.5 * CONS.omega_max), (om,)),
        FieldParams(Guess("linear", -CONS.delta_max, CONS.delta_max), (de,)),
    )


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), scale=st.floats(0.0, 20.0))
def test_bounds_and_boundaries_hold_for_any_coefficients(seed, scale):
    p = synthesize(random_params(seed, scale), CONS, dt=5e-3)
    assert np.all(p.omega >= 0)
    assert np.all(p.omega <= CONS.omega_max + 1e-12)
    assert np.all(np.abs(p.delta) <= CONS.delta_max + 1e-12)
    assert p.omega[0] == 0 and p.omega[-1] == 0
    assert p.delta[0] == pytest.approx(CONS.delta_start, abs=1e-12)
    assert p.delta[-1] == pytest.approx(CONS.delta_end, abs=1e-12)


def test_saturation_makes_flat_top():
    params = PulseParams(3.0, FieldParams(Guess("constant", 10 * CONS.omega_max)))
    p = synthesize(params, CONS)
    mid = (p.t > 0.5) & (p.t < 2.5)
    np.testing.assert_allclose(p.omega[mid], CONS.omega_max)


def test_omega_rise_time_at_least_60ns():
    params = PulseParams(3.0, FieldParams(Guess("constant", CONS.omega_max)))
    p = synthesize(params, CONS, dt=1e-4)
    assert rise_time(p.t, p.omega) >= 0.060 - 1e-4
    assert rise_time(p.t, p.omega, "trailing") >= 0.060 - 1e-4


def test_synthesis_is_deterministic():
    a = synthesize(random_params(7, 1.0), CONS)
    b = synthesize(random_params(7, 1.0), CONS)
    np.testing.assert_array_equal(a.omega, b.omega)
    np.testing.assert_array_equal(a.delta, b.delta)


def test_zero_coefficients_reproduce_guess():
    base = PulseParams(3.0, FieldParams(Guess("constant", 0.3 * CONS.omega_max)))
    zero = PulseParams(3.0, base.omega.with_component(FourierSeries.zeros((1.0, 2.0))))
    np.testing.assert_array_equal(synthesize(base, CONS).omega, synthesize(zero, CONS).omega)


def test_spectrum_confined_to_bandwidth():
    """Unsaturated Delta correction has no DFT weight far above the cutoff."""
    free = ControlConstraints()
    f = draw_basis(3, 3, free.delta_bandwidth, 20.0)
    comp = FourierSeries.from_vector(f, [0.1, -0.2, 0.15, 0.05, 0.1, -0.1])
    p = synthesize(PulseParams(20.0, delta=FieldParams(components=(comp,))), free, dt=1e-2)
    spec = np.abs(np.fft.rfft(p.delta))
    nu = np.fft.rfftfreq(len(p.delta), p.dt)
    assert spec[nu > 4 * free.delta_bandwidth].max() < 1e-2 * spec.max()


def test_basis_frequency_above_cutoff_rejected():
    comp = FourierSeries.from_vector((CONS.delta_bandwidth * 1.5,), [0.1, 0.0])
    with pytest.raises(ConstraintError):
        synthesize(PulseParams(3.0, delta=FieldParams(components=(comp,))), CONS)


def test_pinned_endpoint_outside_bound():
    with pytest.raises(ConstraintError):
        ControlConstraints(delta_end=mhz_to_angular(3.0))


def test_duration_too_short():
    with pytest.raises(ConstraintError):
        synthesize(PulseParams(0.1), CONS)


def test_draw_basis_seeded_and_in_band():
    a = draw_basis(11, 5, 0.5, 4.0)
    assert a == draw_basis(11, 5, 0.5, 4.0)
    assert a != draw_basis(12, 5, 0.5, 4.0)
    assert all(0 < f <= 0.5 for f in a)
    b = draw_basis(11, 50, 0.5, 4.0)
    assert all(0 < f <= 0.5 for f in b) and len(b) == 50


def test_time_grid():
    t = time_grid(4.0, 1e-3)
    assert len(t) == 4001 and t[-1] == 4.0
    with pytest.raises(ConfigError):
        time_grid(1.0, 0.3)


def test_chirp_reference():
    p = linear_chirp_reference(4.0, -CONS.delta_max, CONS.delta_max, CONS.omega_max)
    assert p.delta[0] == pytest.approx(-CONS.delta_max)
    assert p.delta[-1] == pytest.approx(CONS.delta_max)
    assert p.omega.max() == pytest.approx(CONS.omega_max)
    with pytest.raises(ConstraintError):
        linear_chirp_reference(4.0, 0, 0, 2 * CONS.omega_max)


def test_csv_roundtrip(tmp_path):
    p = synthesize(random_params(3, 1.0), CONS, dt=1e-2)
    path = tmp_path / "pulse.csv"
    p.to_csv(path)
    q = SampledPulse.from_csv(path)
    np.testing.assert_allclose(q.t, p.t, atol=1e-15)
    np.testing.assert_allclose(q.omega, p.omega, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(q.delta, p.delta, rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize(
    "body, row",
    [
        ("0,0,0\n0.1,abc,0\n", 3),
        ("0,0,0\n0.1,0\n", 3),
        ("0,0,0\n0.1,0,0\n0.3,0,0\n", None),
    ],
)
def test_csv_malformed(tmp_path, body, row):
    path = tmp_path / "bad.csv"
    path.write_text("t_us,omega_over_2pi_mhz,delta_over_2pi_mhz\n" + body)
    with pytest.raises(ConfigError) as err:
        SampledPulse.from_csv(path)
    if row is not None:
        assert f"row {row}" in str(err.value)


def test_sampled_check():
    p = SampledPulse(np.array([0.0, 1.0]), np.array([0.0, 10.0]), np.zeros(2))
    with pytest.raises(ConstraintError):
        p.check(CONS)
    assert math.isclose(p.dt, 1.0)
