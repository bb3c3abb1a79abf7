import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cryosqueeze import decibel_loss as dl


def test_db_to_factor():
    assert dl.db_to_factor(4.8) == pytest.approx(0.33113, abs=5e-6)
    assert dl.db_to_factor(0.0) == 1.0
    assert dl.db_to_factor(10.0) == pytest.approx(0.1, rel=1e-15)


@given(st.floats(-30, 30))
def test_db_round_trip(x):
    assert dl.factor_to_db(dl.db_to_factor(x)) == pytest.approx(x, abs=1e-12)


def test_propagate_faraday_scenario():
    out = dl.propagate_squeezing(10 ** -0.87, 0.88)
    assert out == pytest.approx(0.238708733668065517, rel=1e-12)
    assert dl.factor_to_db(out) == pytest.approx(6.221316911128115, rel=1e-12)


def test_propagate_limits():
    assert dl.propagate_squeezing(0.2, 0.0) == 1.0
    assert dl.propagate_squeezing(1.0, 0.5) == 1.0
    with pytest.raises(ValueError):
        dl.propagate_squeezing(0.5, 1.5)


@given(v=st.floats(1e-3, 0.999), e1=st.floats(0, 1), e2=st.floats(0, 1))
def test_propagate_monotone_in_loss(v, e1, e2):
    lo, hi = sorted((e1, e2))
    if hi - lo < 1e-9:
        return
    # more loss (lower eta) pushes a squeezed variance toward 1
    assert dl.propagate_squeezing(v, lo) > dl.propagate_squeezing(v, hi)
    assert dl.propagate_squeezing(1 / v, lo) < dl.propagate_squeezing(1 / v, hi)


@given(v=st.floats(1e-3, 0.999), eta=st.floats(0.001, 0.999))
def test_propagated_squeezing_between_input_and_vacuum(v, eta):
    out = dl.propagate_squeezing(v, eta)
    assert v < out < 1


def test_infer_reference_pair():
    eta, r = dl.infer_eta_r(dl.SqueezeMeasurement(4.8, 12.9))
    assert eta == pytest.approx(0.694, abs=5e-4)
    assert 1 - eta == pytest.approx(0.306, abs=5e-4)
    s, a = dl.propagate_pair(eta, r)
    assert dl.factor_to_db(s) == pytest.approx(4.8, rel=1e-10)
    assert -dl.factor_to_db(a) == pytest.approx(12.9, rel=1e-10)


def test_infer_round_trip_example():
    s, a = dl.propagate_pair(0.75, 1.0)
    eta, r = dl.infer_eta_r(dl.SqueezeMeasurement(dl.factor_to_db(s), -dl.factor_to_db(a)))
    assert eta == pytest.approx(0.75, rel=1e-10)
    assert r == pytest.approx(1.0, rel=1e-10)


@given(eta=st.floats(0.1, 1.0), r=st.floats(0.05, 2.0))
def test_infer_round_trip_property(eta, r):
    s, a = dl.propagate_pair(eta, r)
    e2, r2 = dl.infer_eta_r(dl.SqueezeMeasurement(dl.factor_to_db(s), -dl.factor_to_db(a)))
    assert e2 == pytest.approx(eta, rel=1e-10)
    assert r2 == pytest.approx(r, rel=1e-10)


@given(eta=st.floats(0, 1), r=st.floats(0, 3))
def test_physicality_of_propagated_pairs(eta, r):
    s, a = dl.propagate_pair(eta, r)
    assert -dl.factor_to_db(a) >= dl.factor_to_db(s) - 1e-12


def test_equal_pair_means_lossless():
    eta, r = dl.infer_eta_r(dl.SqueezeMeasurement(6.0, 6.0))
    assert eta == pytest.approx(1.0, rel=1e-12)
    assert 20 * r / math.log(10) == pytest.approx(6.0, rel=1e-12)


@pytest.mark.parametrize("sqz,anti", [(5.0, 4.0), (0.0, 0.0), (0.001, 0.002), (-1.0, 3.0)])
def test_infer_no_solution(sqz, anti):
    with pytest.raises(dl.NoSolutionError):
        dl.infer_eta_r(dl.SqueezeMeasurement(sqz, anti))


def test_infer_rejects_efficiency_above_one():
    # antisqueezing too small for the squeezing: requires eta > 1
    with pytest.raises(dl.NoSolutionError):
        dl.infer_eta_r(dl.SqueezeMeasurement(6.0, 5.999999))


def test_compose_losses():
    chain = dl.LossChain.uniform(3, 0.88, "faraday")
    assert dl.compose_losses(chain) == pytest.approx(0.88, rel=1e-14)
    three = dl.LossChain(tuple(("f", 0.9592) for _ in range(3)))
    assert dl.compose_losses(three) == pytest.approx(0.8825, abs=1e-4)
    assert dl.compose_losses(dl.LossChain()) == 1.0
    assert dl.compose_losses(dl.LossChain((("x", 0.5),))) == 0.5
    with pytest.raises(ValueError):
        dl.LossChain((("bad", 0.0),))


def test_compose_losses_order_independent():
    effs = [0.9, 0.71, 0.999, 0.5, 0.8333]
    values = {dl.compose_losses(dl.LossChain(tuple(("s", e) for e in perm)))
              for perm in itertools.permutations(effs)}
    assert len(values) == 1


def test_contrast_to_dark_residual():
    assert dl.contrast_to_dark_residual(0.98) == pytest.approx(0.01)
    assert dl.contrast_to_dark_residual(1.0) == 0.0
    assert dl.contrast_to_dark_residual(0.0) == 0.5


def test_loss_gap_flags_non_loss_degradation():
    report = dl.loss_gap_report(8.7, 0.88, observed_db=4.8)
    assert report["expected_db"] == pytest.approx(6.22, abs=0.01)
    assert report["non_loss_degradation"] is True
    assert "non-loss" in report["note"]
    assert dl.loss_gap_report(8.7, 0.88, observed_db=6.22)["non_loss_degradation"] is False
