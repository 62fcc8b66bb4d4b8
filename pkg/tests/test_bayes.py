import pytest
from conftest import grid_posterior_mean
from hypothesis import given
from hypothesis import strategies as st

from toolchain_assurance.bayes import (
    Evidence,
    GroundTruth,
    Rule,
    SanitizerHistory,
    SanitizerObservation,
    Verdict,
    posterior,
    sanitizer_update,
)
from toolchain_assurance.beta_logic import BetaParams
from toolchain_assurance.errors import SoundnessViolation

PRIOR = BetaParams(19, 43)


evidence = st.integers(0, 50).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n)))


class TestEvidence:
    def test_successes_bounded_by_trials(self):
        with pytest.raises(ValueError):
            Evidence(3, 2)

    def test_negative(self):
        with pytest.raises(ValueError):
            Evidence(-1, 2)

    def test_adds(self):
        assert Evidence(1, 2) + Evidence(3, 5) == Evidence(4, 7)


class TestPosterior:
    def test_single_success(self):
        assert posterior(PRIOR, Evidence(1, 1)) == BetaParams(20, 43)

    def test_no_data(self):
        assert posterior(BetaParams(2.5, 7), Evidence(0, 0)) == BetaParams(2.5, 7)

    def test_beta22(self):
        post = posterior(BetaParams(2, 2), Evidence(3, 10))
        assert post == BetaParams(5, 9)
        assert post.mean == pytest.approx(5 / 14, abs=1e-15)
        assert grid_posterior_mean(2, 2, 3, 10) == pytest.approx(post.mean, abs=1e-4)

    @given(st.integers(1, 20), st.integers(1, 20), evidence)
    def test_matches_grid_bayes(self, a, b, yn):
        y, n = yn
        post = posterior(BetaParams(a, b), Evidence(y, n))
        assert post.mean == pytest.approx(grid_posterior_mean(a, b, y, n), abs=1e-4)

    @given(evidence, evidence)
    def test_additive(self, e1, e2):
        e1, e2 = Evidence(*e1), Evidence(*e2)
        assert posterior(posterior(PRIOR, e1), e2) == posterior(PRIOR, e1 + e2)

    def test_converges_to_empirical_rate(self):
        post = posterior(BetaParams(19, 43), Evidence(7000, 10_000))
        assert post.mean == pytest.approx(0.7, abs=1e-2)


class TestSanitizerUpdate:
    def test_accept_is_success(self):
        obs = SanitizerObservation(Verdict.ACCEPTED, GroundTruth.HAS_UB)
        assert sanitizer_update(PRIOR, obs) == BetaParams(20, 43)

    def test_missed_ub_is_failure(self):
        obs = SanitizerObservation(Verdict.REJECTED, GroundTruth.HAS_UB)
        assert sanitizer_update(PRIOR, obs) == BetaParams(19, 44)

    def test_clean_rejection_is_no_op(self):
        obs = SanitizerObservation(Verdict.REJECTED, GroundTruth.NO_UB)
        out = sanitizer_update(PRIOR, obs)
        assert out is PRIOR

    def test_uninspected_rejection_is_no_op(self):
        obs = SanitizerObservation(Verdict.REJECTED)
        assert obs.rule is Rule.UNINSPECTED
        assert sanitizer_update(PRIOR, obs) is PRIOR

    def test_accept_without_ub_violates_soundness(self):
        with pytest.raises(SoundnessViolation):
            SanitizerObservation(Verdict.ACCEPTED, GroundTruth.NO_UB)

    def test_accept_implies_ub(self):
        assert SanitizerObservation("accepted").ground_truth is GroundTruth.HAS_UB


class TestSanitizerHistory:
    def test_uninspected_replayed_after_inspection(self):
        h = SanitizerHistory(PRIOR).extend(
            [
                SanitizerObservation(Verdict.ACCEPTED),
                SanitizerObservation(Verdict.REJECTED),
                SanitizerObservation(Verdict.REJECTED, GroundTruth.NO_UB),
            ]
        )
        assert h.current == BetaParams(20, 43)
        assert h.uninspected() == [1]
        assert h.inspect(1, GroundTruth.HAS_UB).current == BetaParams(20, 44)
        assert h.inspect(1, GroundTruth.NO_UB).current == BetaParams(20, 43)

    def test_double_inspection_rejected(self):
        h = SanitizerHistory(PRIOR).append(SanitizerObservation(Verdict.ACCEPTED))
        with pytest.raises(ValueError):
            h.inspect(0, GroundTruth.HAS_UB)

    def test_empty_history_is_prior(self):
        assert SanitizerHistory(PRIOR).current is PRIOR
