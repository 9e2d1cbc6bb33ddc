"""Distortion budgeting: how much transmitter noise a rate target tolerates."""

import math

import pytest

from binoisy.evm_planner import (
    LossQuery,
    max_evm_for_loss,
    rate_loss,
    rule_of_thumb_evm,
)


def gaussian_query(decoder="matched"):
    return LossQuery(M=4, N=4, constellation="gaussian", decoder=decoder)


def test_rule_of_thumb_line():
    assert rule_of_thumb_evm(0.0) == pytest.approx(-13.0)
    assert rule_of_thumb_evm(10.0) == pytest.approx(-20.0)
    assert rule_of_thumb_evm(30.0) == pytest.approx(-34.0)


def test_rate_loss_basics():
    q = gaussian_query()
    assert rate_loss(q, 10.0, -math.inf) == pytest.approx(0.0, abs=1e-12)
    loss = rate_loss(q, 10.0, -10.0)
    assert 0.0 < loss < 1.0
    # worse hardware loses more rate
    assert rate_loss(q, 10.0, -5.0) > loss
    with pytest.raises(ValueError):
        rate_loss(q, 10.0, -10.0, ideal_rate_nats=0.0)


def test_boundary_hits_the_budget():
    q = gaussian_query()
    evm = max_evm_for_loss(q, 10.0, 0.05)
    # certified side: the returned point keeps the loss within budget, and
    # a half-dB-worse transmitter violates it
    assert rate_loss(q, 10.0, evm) <= 0.05 + 1e-9
    assert rate_loss(q, 10.0, evm + 0.5) > 0.05


def test_planner_beats_rule_of_thumb_and_is_monotone():
    q = gaussian_query()
    prev = math.inf
    for snr in (0.0, 10.0, 20.0):
        evm = max_evm_for_loss(q, snr, 0.05)
        assert evm >= rule_of_thumb_evm(snr)
        assert evm <= prev + 1e-9
        prev = evm


def test_generous_budget_returns_upper_endpoint():
    q = gaussian_query()
    assert max_evm_for_loss(q, 10.0, 0.99, hi_db=-1.0) == -1.0


def test_impossible_budget_returns_minus_inf():
    q = gaussian_query()
    # even EVM of -60 dB loses more than 1e-12 of the rate, so the budget
    # cannot be met inside the bracket; that is an answer, not an error
    assert max_evm_for_loss(q, 10.0, 1e-12) == -math.inf


def test_mismatched_decoder_loses_at_least_as_much():
    qm = gaussian_query("matched")
    qg = gaussian_query("gmi")
    # same ideal reference (no distortion means no mismatch), weaker decoder
    assert rate_loss(qg, 10.0, -10.0) >= rate_loss(qm, 10.0, -10.0) - 1e-12
    # hence the gmi planner can never allow more distortion
    assert max_evm_for_loss(qg, 10.0, 0.05) <= max_evm_for_loss(qm, 10.0, 0.05) + 1e-9


def test_discrete_constellation_budget():
    q = LossQuery(M=4, N=4, constellation="qpsk", decoder="matched")
    evm = max_evm_for_loss(q, 10.0, 0.05, tol_db=0.05)
    assert -40.0 < evm < 0.0
    assert rate_loss(q, 10.0, evm) <= 0.05 + 1e-9


def test_validation_errors():
    q = gaussian_query()
    with pytest.raises(ValueError):
        max_evm_for_loss(q, 10.0, 0.0)
    with pytest.raises(ValueError):
        max_evm_for_loss(q, 10.0, 1.0)
    with pytest.raises(ValueError):
        max_evm_for_loss(q, 10.0, 0.05, lo_db=-5.0, hi_db=-10.0)
    with pytest.raises(ValueError):
        max_evm_for_loss(q, 10.0, 0.05, tol_db=0.0)
    with pytest.raises(ValueError):
        LossQuery(M=4, N=4, constellation="gaussian", decoder="map")
