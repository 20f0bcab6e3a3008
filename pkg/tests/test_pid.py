import numpy as np
import pytest

from pidtucker import ConfigError, DataError, PidGains, PidState, adjust, reset


def test_proportional_only_is_identity():
    gains = PidGains(1.0, 0.0, 0.0)
    state = PidState(4)
    rng = np.random.default_rng(0)
    for _ in range(50):
        pos = int(rng.integers(4))
        e = float(rng.normal())
        assert adjust(state, gains, pos, e) == e


def test_hand_computed_trace():
    gains = PidGains(1.0, 0.1, 0.2)
    state = PidState(1)
    # first call: previous error defaults to zero
    assert adjust(state, gains, 0, 1.0) == 1.0 * 1.0 + 0.1 * 1.0 + 0.2 * (1.0 - 0.0)
    assert adjust(state, gains, 0, 0.5) == 1.0 * 0.5 + 0.1 * (1.0 + 0.5) + 0.2 * (0.5 - 1.0)


def test_reset_replays_identically():
    gains = PidGains(1.0, 0.1, 0.2)
    state = PidState(1)
    first = [adjust(state, gains, 0, 1.0), adjust(state, gains, 0, 0.5)]
    reset(state)
    second = [adjust(state, gains, 0, 1.0), adjust(state, gains, 0, 0.5)]
    assert first == second


def test_reset_idempotent():
    gains = PidGains(1.0, 0.0, 0.0)
    state = PidState(2)
    adjust(state, gains, 0, 2.0)
    reset(state)
    reset(state)
    assert not state.sum_error.any() and not state.prev_error.any()
    assert adjust(state, gains, 0, 2.0) == 2.0


def test_bookkeeping_after_n_calls():
    gains = PidGains(0.5, 0.25, 0.125)
    state = PidState(3)
    errors = [0.5, -1.25, 2.0, 0.75]
    for e in errors:
        adjust(state, gains, 1, e)
    assert state.sum_error[1] == sum(errors)
    assert state.prev_error[1] == errors[-1]
    assert state.sum_error[0] == 0.0 and state.sum_error[2] == 0.0


def test_positions_do_not_interact():
    gains = PidGains(1.0, 1.0, 1.0)
    state = PidState(2)
    adjust(state, gains, 0, 10.0)
    # position 1 still starts fresh
    assert adjust(state, gains, 1, 1.0) == 1.0 * 1.0 + 1.0 * 1.0 + 1.0 * (1.0 - 0.0)


def test_linearity_of_decomposed_gains():
    rng = np.random.default_rng(5)
    errors = [float(rng.normal()) for _ in range(20)]
    kp, ki, kd = 0.7, 0.3, 0.15
    combined = PidState(1)
    p_state, i_state, d_state = PidState(1), PidState(1), PidState(1)
    p_gain = PidGains(1.0, 0.0, 0.0)
    i_gain = PidGains(0.0, 1.0, 0.0)
    d_gain = PidGains(0.0, 0.0, 1.0)
    for e in errors:
        full = adjust(combined, PidGains(kp, ki, kd), 0, e)
        parts = (adjust(p_state, p_gain, 0, e), adjust(i_state, i_gain, 0, e),
                 adjust(d_state, d_gain, 0, e))
        assert full == kp * parts[0] + ki * parts[1] + kd * parts[2]


def test_clamp_bounds_output():
    gains = PidGains(1.0, 1.0, 0.0)
    state = PidState(1)
    for _ in range(10):
        out = adjust(state, gains, 0, 5.0, clamp=3.0)
    assert out == 3.0
    reset(state)
    for _ in range(10):
        out = adjust(state, gains, 0, -5.0, clamp=3.0)
    assert out == -3.0


def test_position_out_of_range():
    state = PidState(2)
    with pytest.raises(DataError):
        adjust(state, PidGains(), 2, 1.0)
    with pytest.raises(DataError):
        adjust(state, PidGains(), -1, 1.0)


def test_negative_gains_rejected():
    with pytest.raises(ConfigError):
        PidGains(-0.1, 0.0, 0.0)
    with pytest.raises(ConfigError):
        PidGains(1.0, float("nan"), 0.0)
