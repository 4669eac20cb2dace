import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evmv.errors import (
    DimensionError,
    InfiniteStrengthError,
    InvalidEvidenceError,
    TotalConflictError,
)
from evmv.sl import (
    DirichletParams,
    EvidenceVector,
    Opinion,
    combine_all,
    combine_pair,
    dirichlet_from_opinion,
    expected_probs,
    opinion_from_evidence,
)


def brute_force_combine(m1, m2):
    """Oracle: enumerate all focal-set products over {singletons} + Omega."""
    k = m1.num_classes
    masses1 = {i: m1.beliefs[i] for i in range(k)}
    masses1["omega"] = m1.uncertainty
    masses2 = {i: m2.beliefs[i] for i in range(k)}
    masses2["omega"] = m2.uncertainty
    combined = {key: 0.0 for key in masses1}
    conflict = 0.0
    for a, ma in masses1.items():
        for b, mb in masses2.items():
            if a == "omega":
                inter = b
            elif b == "omega" or a == b:
                inter = a
            else:
                inter = None
            if inter is None:
                conflict += ma * mb
            else:
                combined[inter] += ma * mb
    denom = 1.0 - conflict
    beliefs = np.array([combined[i] / denom for i in range(k)])
    return beliefs, combined["omega"] / denom, conflict


def random_opinion(rng, k):
    raw = rng.random(k + 1)
    raw /= raw.sum()
    return Opinion(raw[:k], float(raw[k]), k)


class TestOpinionFromEvidence:
    def test_zero_evidence_is_vacuous(self):
        o, d = opinion_from_evidence([0.0, 0.0])
        assert np.array_equal(o.beliefs, [0.0, 0.0])
        assert o.uncertainty == 1.0
        assert np.array_equal(d.alpha, [1.0, 1.0])

    def test_worked_example_k2(self):
        o, d = opinion_from_evidence([2.0, 0.0])
        np.testing.assert_allclose(o.beliefs, [0.5, 0.0], atol=1e-15)
        assert o.uncertainty == pytest.approx(0.5, abs=1e-15)
        np.testing.assert_allclose(d.alpha, [3.0, 1.0])
        assert d.strength == pytest.approx(4.0)

    def test_worked_example_k3(self):
        o, d = opinion_from_evidence([8.0, 1.0, 1.0])
        assert d.strength == pytest.approx(13.0)
        np.testing.assert_allclose(o.beliefs, np.array([8, 1, 1]) / 13.0, atol=1e-15)
        assert o.uncertainty == pytest.approx(3.0 / 13.0, abs=1e-15)

    def test_rejects_bad_evidence(self):
        with pytest.raises(InvalidEvidenceError):
            opinion_from_evidence([1.0, -0.5])
        with pytest.raises(InvalidEvidenceError):
            opinion_from_evidence([np.nan, 1.0])
        with pytest.raises(InvalidEvidenceError):
            opinion_from_evidence([np.inf, 1.0])

    def test_rejects_single_class(self):
        with pytest.raises(DimensionError):
            opinion_from_evidence([3.0])

    def test_monotonicity(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            e = rng.uniform(0, 10, size=3)
            o1, _ = opinion_from_evidence(e)
            bumped = e.copy()
            bumped[1] += rng.uniform(0.1, 5)
            o2, _ = opinion_from_evidence(bumped)
            assert o2.beliefs[1] > o1.beliefs[1]
            assert o2.uncertainty < o1.uncertainty


class TestDirichletFromOpinion:
    def test_vacuous_maps_to_uniform_prior(self):
        d = dirichlet_from_opinion(Opinion([0.0, 0.0], 1.0))
        np.testing.assert_array_equal(d.alpha, [1.0, 1.0])

    def test_worked_example(self):
        d = dirichlet_from_opinion(Opinion([0.5, 0.0], 0.5))
        np.testing.assert_allclose(d.alpha, [3.0, 1.0])
        assert d.strength == pytest.approx(4.0)

    def test_round_trip_example(self):
        o, _ = opinion_from_evidence([8.0, 1.0, 1.0])
        d = dirichlet_from_opinion(o)
        np.testing.assert_allclose(d.alpha, [9.0, 2.0, 2.0], atol=1e-12)

    def test_zero_uncertainty_raises(self):
        with pytest.raises(InfiniteStrengthError):
            dirichlet_from_opinion(Opinion([0.3, 0.7], 0.0))

    def test_round_trip_randomized(self):
        rng = np.random.default_rng(42)
        for _ in range(10_000):
            k = int(rng.integers(2, 6))
            e = rng.uniform(0.0, 100.0, size=k)
            o, _ = opinion_from_evidence(e)
            recovered = dirichlet_from_opinion(o).alpha - 1.0
            assert np.max(np.abs(recovered - e)) <= 1e-12


class TestExpectedProbs:
    def test_examples(self):
        np.testing.assert_allclose(expected_probs(DirichletParams([1.0, 1.0])), [0.5, 0.5])
        np.testing.assert_allclose(expected_probs(DirichletParams([3.0, 1.0])), [0.75, 0.25])
        np.testing.assert_allclose(
            expected_probs(DirichletParams([9.0, 2.0, 2.0])), np.array([9, 2, 2]) / 13.0
        )

    def test_sums_to_one(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            alpha = 1.0 + rng.uniform(0, 50, size=int(rng.integers(2, 8)))
            assert expected_probs(DirichletParams(alpha)).sum() == pytest.approx(1.0, abs=1e-12)


class TestCombinePair:
    def test_vacuous_identity_exact(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            m = random_opinion(rng, 3)
            for outcome in (
                combine_pair(Opinion.vacuous(3), m),
                combine_pair(m, Opinion.vacuous(3)),
            ):
                assert outcome.conflict == 0.0
                assert np.array_equal(outcome.opinion.beliefs, m.beliefs)
                assert outcome.opinion.uncertainty == m.uncertainty

    def test_worked_example_against_oracle(self):
        m1 = Opinion([0.6, 0.2], 0.2)
        m2 = Opinion([0.5, 0.3], 0.2)
        outcome = combine_pair(m1, m2)
        assert outcome.conflict == pytest.approx(0.28, abs=1e-15)
        np.testing.assert_allclose(outcome.opinion.beliefs, [0.52 / 0.72, 0.16 / 0.72], atol=1e-12)
        assert outcome.opinion.uncertainty == pytest.approx(0.04 / 0.72, abs=1e-12)
        oracle_b, oracle_u, oracle_kappa = brute_force_combine(m1, m2)
        np.testing.assert_allclose(outcome.opinion.beliefs, oracle_b, atol=1e-12)
        assert outcome.opinion.uncertainty == pytest.approx(oracle_u, abs=1e-12)
        assert outcome.conflict == pytest.approx(oracle_kappa, abs=1e-12)

    def test_total_conflict_raises(self):
        with pytest.raises(TotalConflictError):
            combine_pair(Opinion([1.0, 0.0], 0.0), Opinion([0.0, 1.0], 0.0))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            combine_pair(Opinion.vacuous(2), Opinion.vacuous(3))

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(17)
        for _ in range(500):
            k = int(rng.integers(2, 6))
            m1, m2 = random_opinion(rng, k), random_opinion(rng, k)
            outcome = combine_pair(m1, m2)
            oracle_b, oracle_u, oracle_kappa = brute_force_combine(m1, m2)
            np.testing.assert_allclose(outcome.opinion.beliefs, oracle_b, atol=1e-12)
            assert outcome.opinion.uncertainty == pytest.approx(oracle_u, abs=1e-12)
            assert outcome.conflict == pytest.approx(oracle_kappa, abs=1e-12)


class TestCombineAll:
    def test_single_opinion(self):
        o = Opinion([0.2, 0.3], 0.5)
        outcome = combine_all([o])
        assert outcome.opinion is o
        assert outcome.conflict == 0.0
        assert outcome.step_conflicts == ()

    def test_identity_folds_away(self):
        o = Opinion([0.2, 0.3], 0.5)
        outcome = combine_all([Opinion.vacuous(2), Opinion.vacuous(2), o])
        assert np.array_equal(outcome.opinion.beliefs, o.beliefs)
        assert outcome.opinion.uncertainty == o.uncertainty

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            combine_all([])

    def test_associativity_of_grouping(self):
        rng = np.random.default_rng(23)
        for _ in range(300):
            k = int(rng.integers(2, 5))
            ms = [random_opinion(rng, k) for _ in range(3)]
            left = combine_pair(combine_pair(ms[0], ms[1]).opinion, ms[2]).opinion
            right = combine_pair(ms[0], combine_pair(ms[1], ms[2]).opinion).opinion
            fold = combine_all(ms).opinion
            np.testing.assert_allclose(left.beliefs, right.beliefs, atol=1e-9)
            assert left.uncertainty == pytest.approx(right.uncertainty, abs=1e-9)
            np.testing.assert_allclose(fold.beliefs, left.beliefs, atol=1e-12)

    def test_step_conflicts_retained(self):
        rng = np.random.default_rng(4)
        ms = [random_opinion(rng, 3) for _ in range(4)]
        outcome = combine_all(ms)
        assert len(outcome.step_conflicts) == 3
        assert outcome.conflict == outcome.step_conflicts[-1]


@st.composite
def opinion_pairs(draw):
    k = draw(st.integers(2, 5))
    def one():
        raw = np.array(draw(st.lists(st.floats(1e-6, 1.0), min_size=k + 1, max_size=k + 1)))
        raw /= raw.sum()
        return Opinion(raw[:k], float(raw[k]), k)
    return one(), one()


class TestProperties:
    @settings(max_examples=300, deadline=None)
    @given(opinion_pairs())
    def test_closure_and_commutativity(self, pair):
        m1, m2 = pair
        out12 = combine_pair(m1, m2)
        out21 = combine_pair(m2, m1)
        o = out12.opinion
        assert np.all(o.beliefs >= 0) and o.uncertainty >= 0
        assert abs(o.beliefs.sum() + o.uncertainty - 1.0) <= 1e-12
        np.testing.assert_allclose(o.beliefs, out21.opinion.beliefs, atol=1e-12)
        assert o.uncertainty == pytest.approx(out21.opinion.uncertainty, abs=1e-12)
        assert out12.conflict == pytest.approx(out21.conflict, abs=1e-12)

    def test_sl_derived_opinions_never_totally_conflict(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            k = int(rng.integers(2, 5))
            o1, _ = opinion_from_evidence(rng.uniform(0, 1000, size=k))
            o2, _ = opinion_from_evidence(rng.uniform(0, 1000, size=k))
            assert o1.uncertainty > 0 and o2.uncertainty > 0
            combine_pair(o1, o2)  # must not raise


class TestInvariantValidation:
    def test_opinion_must_normalize(self):
        with pytest.raises(ValueError):
            Opinion([0.5, 0.5], 0.5)

    def test_opinion_rejects_negative_mass(self):
        with pytest.raises(ValueError):
            Opinion([-0.1, 0.6], 0.5)

    def test_dirichlet_requires_alpha_ge_one(self):
        with pytest.raises(ValueError):
            DirichletParams([0.5, 2.0])

    def test_evidence_vector_validation(self):
        with pytest.raises(InvalidEvidenceError):
            EvidenceVector([-1.0, 2.0])
