from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import product_moment_zscores
from toolchain_assurance.beta_logic import (
    FALSE,
    NO_EVIDENCE,
    TRUE,
    BetaParams,
    Moments,
    and_,
    fold_and,
    moments_of,
    not_,
    or_,
    params_from_moments,
)
from toolchain_assurance.errors import EmptyConjunction, InfeasibleMoments, NoEvidence

S2_MEAN = 19 / 62
S2_VAR = 817 / 242172


def exact_moments(a, b):
    a, b = Fraction(a), Fraction(b)
    s = a + b
    return a / s, a * b / (s * s * (s + 1))


shapes = st.floats(min_value=0.5, max_value=50, allow_nan=False)


@st.composite
def moments(draw):
    return moments_of(BetaParams(draw(shapes), draw(shapes)))


class TestBetaParams:
    def test_no_evidence_is_constructible(self):
        assert NO_EVIDENCE.is_no_evidence

    @pytest.mark.parametrize("a,b", [(-1, 1), (1, float("nan")), (float("inf"), 1)])
    def test_rejects_bad_shapes(self, a, b):
        with pytest.raises(ValueError):
            BetaParams(a, b)

    def test_accepts_numpy_integers(self):
        assert BetaParams(np.int64(19), np.float32(43)) == BetaParams(19, 43)

    def test_rejects_bool(self):
        with pytest.raises(TypeError):
            BetaParams(True, 1)


class TestMoments:
    def test_infeasible_variance_rejected(self):
        with pytest.raises(ValueError):
            Moments(0.5, 0.3)

    def test_mean_above_one_rejected(self):
        with pytest.raises(ValueError):
            Moments(1.2, 0.0)


class TestMomentsOf:
    def test_s2_initial_prior_exact(self):
        mean, var = exact_moments(19, 43)
        assert (mean, var) == (Fraction(19, 62), Fraction(817, 242172))
        m = moments_of(BetaParams(19, 43))
        assert m.mean == pytest.approx(float(mean), abs=1e-15)
        assert m.variance == pytest.approx(float(var), abs=1e-15)

    def test_s2_initial_prior_monte_carlo(self):
        rng = np.random.default_rng(7)
        n = 10**6
        x = rng.beta(19, 43, n)
        m = moments_of(BetaParams(19, 43))
        assert abs(x.mean() - m.mean) < 3 * x.std() / np.sqrt(n)
        d = x - x.mean()
        v = (d * d).mean()
        se = np.sqrt(((d**4).mean() - v * v) / n)
        assert abs(v - m.variance) < 3 * se

    def test_uniform(self):
        assert moments_of(BetaParams(1, 1)) == Moments(0.5, 1 / 12)

    def test_identity(self):
        assert moments_of(TRUE) == Moments(1.0, 0.0)
        assert moments_of(FALSE) == Moments(0.0, 0.0)

    def test_no_evidence_rejected(self):
        with pytest.raises(NoEvidence):
            moments_of(NO_EVIDENCE)


class TestAnd:
    def test_true_is_identity(self):
        y = Moments(0.3, 0.01)
        assert and_(moments_of(TRUE), y) == y
        assert and_(y, moments_of(TRUE)) == y

    def test_beta22_pair(self):
        # Beta(2,2) has variance 4/(16*5) = 0.05
        assert moments_of(BetaParams(2, 2)).variance == pytest.approx(0.05, abs=1e-15)
        m = and_(Moments(0.5, 0.05), Moments(0.5, 0.05))
        assert m.mean == pytest.approx(0.25, abs=1e-15)
        assert m.variance == pytest.approx(0.0275, abs=1e-15)

    def test_beta22_pair_monte_carlo(self):
        zm, zv = product_moment_zscores(2, 2, 2, 2, 10**6, np.random.default_rng(11))
        assert abs(zm) < 3 and abs(zv) < 3

    def test_false_annihilates(self):
        y = Moments(0.7, 0.02)
        assert and_(moments_of(FALSE), y) == Moments(0.0, 0.0)


class TestNot:
    def test_s2_negation(self):
        m = not_(Moments(S2_MEAN, S2_VAR))
        assert m.mean == pytest.approx(43 / 62, abs=1e-15)
        assert m.variance == S2_VAR

    def test_true_to_false(self):
        assert not_(Moments(1, 0)) == Moments(0, 0)

    def test_symmetric(self):
        assert not_(Moments(0.5, 1 / 12)) == Moments(0.5, 1 / 12)


class TestOr:
    def test_false_is_identity(self):
        x = Moments(0.3, 0.01)
        assert or_(x, moments_of(FALSE)) == x

    def test_true_absorbs(self):
        assert or_(Moments(1, 0), Moments(0.4, 0.02)) == Moments(1.0, 0.0)

    def test_beta22_pair(self):
        m = or_(Moments(0.5, 0.05), Moments(0.5, 0.05))
        assert m.mean == pytest.approx(0.75, abs=1e-15)
        assert m.variance == pytest.approx(0.0275, abs=1e-15)

    def test_beta22_pair_monte_carlo(self):
        rng = np.random.default_rng(13)
        n = 10**6
        z = 1 - (1 - rng.beta(2, 2, n)) * (1 - rng.beta(2, 2, n))
        assert abs(z.mean() - 0.75) < 3 * z.std() / np.sqrt(n)


class TestParamsFromMoments:
    def test_uniform(self):
        p = params_from_moments(Moments(0.5, 1 / 12))
        assert p.alpha == pytest.approx(1, rel=1e-12)
        assert p.beta == pytest.approx(1, rel=1e-12)

    def test_identities(self):
        assert params_from_moments(Moments(1, 0)) == TRUE
        assert params_from_moments(Moments(0, 0)) == FALSE

    def test_s2_round_trip(self):
        p = params_from_moments(Moments(S2_MEAN, S2_VAR))
        assert p.alpha == pytest.approx(19, abs=1e-9)
        assert p.beta == pytest.approx(43, abs=1e-9)

    def test_zero_variance_interior_mean_rejected(self):
        with pytest.raises(InfeasibleMoments):
            params_from_moments(Moments(0.4, 0.0))

    def test_boundary_variance_rejected(self):
        with pytest.raises(InfeasibleMoments):
            params_from_moments(Moments(0.5, 0.25))


class TestFoldAnd:
    def test_single(self):
        x = Moments(0.3, 0.01)
        assert fold_and([x]) == x

    def test_identities_absorbed(self):
        y = Moments(0.3, 0.01)
        assert fold_and([Moments(1, 0), Moments(1, 0), y]) == y

    def test_signing_case_with_honest_evidence(self):
        t = moments_of(TRUE)
        s2 = moments_of(BetaParams(19, 43))
        m = fold_and([t, s2, t, t, t])
        assert m.mean == pytest.approx(S2_MEAN, abs=1e-15)
        assert m.variance == pytest.approx(S2_VAR, abs=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyConjunction):
            fold_and([])


class TestLaws:
    @given(shapes, shapes)
    def test_round_trip(self, a, b):
        p = params_from_moments(moments_of(BetaParams(a, b)))
        assert p.alpha == pytest.approx(a, rel=1e-9)
        assert p.beta == pytest.approx(b, rel=1e-9)

    @given(moments())
    def test_involution(self, x):
        assert not_(not_(x)) == x

    @given(moments())
    def test_identity_laws(self, x):
        assert and_(moments_of(TRUE), x) == x
        assert and_(x, moments_of(TRUE)) == x
        assert or_(moments_of(FALSE), x) == x
        assert or_(x, moments_of(FALSE)) == x

    @given(moments(), moments(), moments())
    def test_commutative_associative(self, x, y, z):
        for op in (and_, or_):
            a, b = op(x, y), op(y, x)
            assert a.mean == pytest.approx(b.mean, abs=1e-12)
            assert a.variance == pytest.approx(b.variance, abs=1e-12)
            a, b = op(op(x, y), z), op(x, op(y, z))
            assert a.mean == pytest.approx(b.mean, abs=1e-12)
            assert a.variance == pytest.approx(b.variance, abs=1e-12)

    @given(moments(), moments())
    def test_feasibility_closure(self, x, y):
        for m in (and_(x, y), or_(x, y), not_(x)):
            assert m.variance <= m.mean * (1 - m.mean) + 1e-12

    @given(moments(), moments())
    def test_de_morgan_bitwise(self, x, y):
        assert or_(x, y) == not_(and_(not_(x), not_(y)))

    @given(st.lists(moments(), min_size=1, max_size=6), st.randoms())
    def test_fold_order_independent(self, xs, rnd):
        ys = list(xs)
        rnd.shuffle(ys)
        a, b = fold_and(xs), fold_and(ys)
        assert a.mean == pytest.approx(b.mean, abs=1e-12)
        assert a.variance == pytest.approx(b.variance, abs=1e-12)

    @settings(max_examples=10, deadline=None)
    @given(shapes, shapes, shapes, shapes, st.integers(0, 2**32 - 1))
    def test_product_monte_carlo(self, a1, b1, a2, b2, seed):
        # 1e5 samples keeps the suite quick; the acceptance test uses 1e6
        zm, zv = product_moment_zscores(a1, b1, a2, b2, 10**5, np.random.default_rng(seed))
        assert abs(zm) < 4.5 and abs(zv) < 4.5
