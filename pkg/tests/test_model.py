import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ruintail.errors import DegenerateRegimes
from ruintail.model import (
    ClaimModel,
    Constant,
    Exponential,
    LogNormal,
    ModelSpec,
    Pareto,
    RegimeParams,
    canonicalize,
    reference_model,
    sample_magnitudes,
    validate_model,
)
from ruintail.rng import RngStream

REF = RegimeParams(a0=1.0, a1=2.0, sigma0=1.0, sigma1=1.0, lambda01=1.0, lambda10=1.0)


def test_reference_model_passes_all_checks():
    report = validate_model(reference_model(), beta=1.64)
    assert report.ok
    assert report.beta0 == 1.0 and report.beta1 == 3.0
    assert {item.status for item in report.items} == {"pass"}


def test_moment_condition_pending_without_beta():
    report = validate_model(reference_model())
    assert report["moment condition"].status == "pending"
    assert report.ok


def test_increasing_business_process_fails():
    claims = ClaimModel(c=1.0, alpha1=0.0, alpha2=1.0, F2=Exponential(1.0))
    report = validate_model(ModelSpec(REF, claims))
    assert report["P not increasing"].status == "fail"
    assert not report.ok


def test_negative_beta0_fails():
    regimes = RegimeParams(a0=0.4, a1=2.0, sigma0=1.0, sigma1=1.0, lambda01=1.0, lambda10=1.0)
    report = validate_model(ModelSpec(regimes, reference_model().claims))
    assert report["beta0 > 0"].status == "fail"
    assert report.beta0 == pytest.approx(-0.2)


def test_nonpositive_volatility_reported_not_raised():
    regimes = RegimeParams(a0=1.0, a1=2.0, sigma0=0.0, sigma1=1.0, lambda01=1.0, lambda10=1.0)
    report = validate_model(ModelSpec(regimes, reference_model().claims))
    assert report["positive rates and volatilities"].status == "fail"


def test_validate_is_pure():
    spec = reference_model()
    assert validate_model(spec, beta=1.5) == validate_model(spec, beta=1.5)


def test_canonical_input_unchanged():
    out, swapped = canonicalize(REF)
    assert out == REF and not swapped


def test_reversed_labels_swapped():
    rev = REF.swapped()
    assert (rev.beta0, rev.beta1) == (3.0, 1.0)
    out, swapped = canonicalize(rev)
    assert swapped and out == REF


def test_equal_exponents_degenerate():
    regimes = RegimeParams(a0=1.0, a1=1.0, sigma0=1.0, sigma1=1.0, lambda01=1.0, lambda10=1.0)
    with pytest.raises(DegenerateRegimes) as info:
        canonicalize(regimes)
    assert info.value.exponent == 1.0


regime_values = st.fixed_dictionaries({
    "a0": st.floats(-3, 3),
    "a1": st.floats(-3, 3),
    "sigma0": st.floats(0.1, 3),
    "sigma1": st.floats(0.1, 3),
    "lambda01": st.floats(0.01, 10),
    "lambda10": st.floats(0.01, 10),
})


@given(regime_values)
def test_canonicalize_idempotent(values):
    regimes = RegimeParams(**values)
    if regimes.beta0 == regimes.beta1:
        return
    once, _ = canonicalize(regimes)
    twice, swapped = canonicalize(once)
    assert once.beta0 < once.beta1
    assert twice == once and not swapped


def test_claim_model_requires_distribution():
    with pytest.raises(ValueError):
        ClaimModel(c=1.0, alpha1=1.0)


def test_pareto_moment_diverges_at_shape():
    assert Pareto(1.0, 1.5).moment(1.64) is None
    assert Pareto(1.0, 1.5).moment(1.5) is None
    assert Pareto(2.0, 3.0).moment(1.0) == pytest.approx(3.0)


DISTS = [Exponential(1.3), Pareto(1.0, 6.0), Constant(0.7), LogNormal(0.2, 0.4)]


@pytest.mark.parametrize("dist", DISTS, ids=lambda d: type(d).__name__)
@pytest.mark.parametrize("beta", [0.5, 1.0, 1.64])
def test_sampled_fractional_moment_matches_closed_form(dist, beta):
    x = sample_magnitudes(dist, RngStream(11, 0), 10**6)
    assert x.min() > 0
    xb = x**beta
    exact = dist.moment(beta)
    if isinstance(dist, Constant):
        np.testing.assert_allclose(xb, exact)
        return
    se = xb.std(ddof=1) / math.sqrt(xb.size)
    assert abs(xb.mean() - exact) <= 4 * se
