"""Scoring: idf, keyword extraction, weighted scores, representative choice."""

from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kwcascade.scoring import (
    Corpus,
    IdfTable,
    KeywordSet,
    MissingIdfTerm,
    WeightPolicy,
    compute_idf,
    select_representative,
    top_k_keywords,
    weighted_score,
)
from kwcascade.textproc import TokenizedResponse

from brute_force import bf_select, bf_top_k
from conftest import make_random_corpus

# The worked 3-document example: "the capital of france is paris",
# "paris is the capital", "berlin" after default normalization.
THREE_DOCS = [["capital", "france", "paris"], ["paris", "capital"], ["berlin"]]
THREE_DOC_TEXTS = ["the capital of france is paris", "paris is the capital", "berlin"]
THREE_DOC_SCORES = [1.7288714918409973, 1.414213562373095, 1.0]

# Ten responses, eight sharing a three-term core plus one filler each,
# two off-topic. Values pinned from the independent brute-force pass.
TEN_DOCS = [
    ["capital", "france", "paris", "city"],
    ["paris", "capital", "france", "town"],
    ["capital", "france", "paris", "metro"],
    ["france", "paris", "capital", "certainly"],
    ["paris", "france", "capital", "urban"],
    ["capital", "paris", "france", "indeed"],
    ["france", "capital", "paris", "surely"],
    ["paris", "capital", "france", "truly"],
    ["weather", "rain", "cold"],
    ["music", "jazz"],
]
TEN_DOC_REP = 1
TEN_DOC_SELECTION_SCORES = [
    1.8485050324766297,
    1.9637365220186032,
    1.8485050324766292,
    1.8485050324766297,
    1.9637365220186032,
    1.8485050324766292,
    1.9637365220186032,
    1.9637365220186032,
    1.6977493752543307,
    1.4142135623730951,
]


class TestCorpus:
    def test_from_texts_applies_default_normalization(self):
        corpus = Corpus.from_texts(THREE_DOC_TEXTS)
        assert [list(d.terms) for d in corpus.docs] == THREE_DOCS
        assert corpus.n == 3

    def test_from_term_lists_assigns_sequential_ids(self):
        corpus = Corpus.from_term_lists(TEN_DOCS)
        assert [d.response_id for d in corpus.docs] == list(range(10))

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            Corpus(docs=())

    def test_out_of_order_ids_rejected(self):
        docs = (
            TokenizedResponse.from_terms(["a"], response_id=1),
            TokenizedResponse.from_terms(["b"], response_id=0),
        )
        with pytest.raises(ValueError):
            Corpus(docs=docs)

    def test_duplicate_ids_rejected(self):
        docs = (
            TokenizedResponse.from_terms(["a"], response_id=0),
            TokenizedResponse.from_terms(["b"], response_id=0),
        )
        with pytest.raises(ValueError):
            Corpus(docs=docs)


class TestComputeIdf:
    def test_term_in_all_docs_scores_one(self):
        corpus = Corpus.from_term_lists([["a"], ["a"], ["a"]])
        assert compute_idf(corpus)["a"] == 1.0

    def test_term_in_one_of_three_docs(self):
        corpus = Corpus.from_term_lists([["a"], ["b"], ["c"]])
        idf = compute_idf(corpus)
        assert idf["a"] == pytest.approx(math.log(2) + 1, rel=1e-15)
        assert idf["a"] == pytest.approx(1.6931471805599454, rel=1e-15)

    def test_equal_df_gives_equal_idf(self):
        corpus = Corpus.from_term_lists([["a", "b"], ["a", "b"], ["c"]])
        idf = compute_idf(corpus)
        assert idf["a"] == idf["b"]

    def test_strictly_decreasing_in_df(self):
        corpus = Corpus.from_term_lists([["a", "b"], ["a"], ["a", "c"]])
        idf = compute_idf(corpus)
        assert idf["b"] == idf["c"] > idf["a"]

    def test_universal_term_has_table_minimum(self):
        corpus = Corpus.from_term_lists(THREE_DOCS)
        idf = compute_idf(corpus)
        # No term here is universal; df=2 terms still sit below df=1 terms.
        assert idf["capital"] == min(idf.idf.values())
        assert idf.n_docs == 3

    def test_three_doc_fixture_values(self):
        idf = compute_idf(Corpus.from_term_lists(THREE_DOCS))
        assert idf["capital"] == pytest.approx(1.2876820724517808, rel=1e-15)
        assert idf["paris"] == idf["capital"]
        assert idf["france"] == idf["berlin"] == pytest.approx(1.6931471805599454, rel=1e-15)

    def test_missing_term_raises(self):
        idf = compute_idf(Corpus.from_term_lists([["a"]]))
        with pytest.raises(MissingIdfTerm):
            idf["zzz"]

    def test_scaled_multiplies_every_entry(self):
        idf = compute_idf(Corpus.from_term_lists(THREE_DOCS))
        doubled = idf.scaled(2.0)
        assert doubled["paris"] == 2 * idf["paris"]
        assert doubled.n_docs == idf.n_docs


class TestTopKKeywords:
    def test_unambiguous_ranking(self):
        corpus = Corpus.from_term_lists([["x"] * 5 + ["y"] * 3 + ["z"]])
        assert top_k_keywords(corpus, 2).terms == frozenset({"x", "y"})

    def test_tie_broken_lexicographically(self):
        corpus = Corpus.from_term_lists([["y", "x"], ["x", "y"]])
        assert top_k_keywords(corpus, 1).terms == frozenset({"x"})

    def test_counts_sum_across_docs_not_document_frequency(self):
        # "b" appears in two docs once each; "a" appears three times in one.
        corpus = Corpus.from_term_lists([["a", "a", "a"], ["b"], ["b"]])
        assert top_k_keywords(corpus, 1).terms == frozenset({"a"})

    def test_k_larger_than_vocab_returns_all_terms(self):
        corpus = Corpus.from_term_lists([["a", "b"]])
        kws = top_k_keywords(corpus, 10)
        assert kws.terms == frozenset({"a", "b"})
        assert kws.k == 10

    def test_k_below_one_rejected(self):
        corpus = Corpus.from_term_lists([["a"]])
        with pytest.raises(ValueError):
            top_k_keywords(corpus, 0)

    def test_contains_protocol(self):
        kws = top_k_keywords(Corpus.from_term_lists(THREE_DOCS), 2)
        assert "capital" in kws and "paris" in kws
        assert "berlin" not in kws

    def test_stable_under_document_reordering(self):
        rng = random.Random(404)
        for _ in range(25):
            docs = make_random_corpus(rng)
            shuffled = list(docs)
            rng.shuffle(shuffled)
            a = top_k_keywords(Corpus.from_term_lists(docs), 4).terms
            b = top_k_keywords(Corpus.from_term_lists(shuffled), 4).terms
            assert a == b

    def test_ten_doc_fixture_matches_brute_force(self):
        corpus = Corpus.from_term_lists(TEN_DOCS)
        assert top_k_keywords(corpus, 10).terms == frozenset(bf_top_k(TEN_DOCS, 10))


class TestWeightPolicy:
    def _keywords(self) -> KeywordSet:
        return KeywordSet(terms=frozenset({"paris", "capital"}), k=2)

    def test_selection_weights(self):
        policy = WeightPolicy.for_selection(1.5, self._keywords())
        assert policy.weight("paris") == 1.5
        assert policy.weight("berlin") == 1.0

    def test_consistency_beta_takes_precedence(self):
        policy = WeightPolicy.for_consistency(
            1.5, 2.0, self._keywords(), rep_keywords=frozenset({"paris", "rome"})
        )
        assert policy.weight("paris") == 2.0  # keyword in both sets
        assert policy.weight("rome") == 2.0  # representative-only term
        assert policy.weight("capital") == 1.5  # global keyword only
        assert policy.weight("berlin") == 1.0

    def test_alpha_must_exceed_one(self):
        with pytest.raises(ValueError):
            WeightPolicy.for_selection(1.0, self._keywords())
        with pytest.raises(ValueError):
            WeightPolicy.for_selection(0.5, self._keywords())

    def test_beta_must_exceed_alpha(self):
        with pytest.raises(ValueError):
            WeightPolicy.for_consistency(1.5, 1.5, self._keywords(), frozenset())
        with pytest.raises(ValueError):
            WeightPolicy.for_consistency(2.0, 1.5, self._keywords(), frozenset())

    def test_consistency_requires_beta(self):
        with pytest.raises(ValueError):
            WeightPolicy(alpha=1.5, global_keywords=self._keywords(), mode="consistency")

    def test_selection_rejects_rep_keywords(self):
        with pytest.raises(ValueError):
            WeightPolicy(
                alpha=1.5,
                global_keywords=self._keywords(),
                mode="selection",
                rep_keywords=frozenset({"paris"}),
            )

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            WeightPolicy(alpha=1.5, global_keywords=self._keywords(), mode="ranked")


class TestWeightedScore:
    def _setup(self, term_lists, k=2, alpha=1.5):
        corpus = Corpus.from_term_lists(term_lists)
        idf = compute_idf(corpus)
        policy = WeightPolicy.for_selection(alpha, top_k_keywords(corpus, k))
        return corpus, idf, policy

    def test_empty_doc_scores_zero(self):
        corpus, idf, policy = self._setup([["a"], []])
        scored = weighted_score(corpus.docs[1], idf, policy)
        assert scored.score == 0.0
        assert scored.l2_norm == 0.0
        assert scored.components == {}

    def test_single_term_doc_scores_exactly_one(self):
        corpus, idf, policy = self._setup([["a"], ["b", "b", "b"]])
        assert weighted_score(corpus.docs[0], idf, policy).score == 1.0
        # Repetition of a single term still yields a 1-component vector.
        assert weighted_score(corpus.docs[1], idf, policy).score == 1.0

    def test_uniform_components_hit_sqrt_m(self):
        corpus, idf, policy = self._setup([["a", "b"], ["a", "b"]], k=2)
        scored = weighted_score(corpus.docs[0], idf, policy)
        assert scored.score == pytest.approx(math.sqrt(2), rel=1e-15)

    def test_component_formula(self):
        corpus, idf, policy = self._setup(THREE_DOCS)
        scored = weighted_score(corpus.docs[0], idf, policy)
        assert scored.components["capital"] == pytest.approx(
            1.5 * 1 * idf["capital"], rel=1e-15
        )
        assert scored.components["france"] == pytest.approx(
            1.0 * 1 * idf["france"], rel=1e-15
        )
        assert scored.l2_norm == pytest.approx(
            math.sqrt(sum(v * v for v in scored.components.values())), rel=1e-15
        )

    def test_term_frequency_multiplies_component(self):
        corpus, idf, policy = self._setup([["a", "a", "b"], ["b"]], k=1)
        scored = weighted_score(corpus.docs[0], idf, policy)
        single = weighted_score(corpus.docs[1], idf, policy)
        assert scored.components["a"] == pytest.approx(
            2 * idf["a"] * policy.weight("a"), rel=1e-15
        )
        assert single.components["b"] == pytest.approx(
            idf["b"] * policy.weight("b"), rel=1e-15
        )

    def test_three_doc_fixture_scores(self):
        corpus, idf, policy = self._setup(THREE_DOCS)
        scores = [weighted_score(d, idf, policy).score for d in corpus.docs]
        assert scores == pytest.approx(THREE_DOC_SCORES, rel=1e-12)
        # The middle doc is two equally weighted keywords: sqrt(2) up to
        # the last-ulp rounding of sqrt(2*x*x) vs x*sqrt(2).
        assert scores[1] == pytest.approx(math.sqrt(2), rel=1e-15)

    def test_missing_idf_entry_raises(self):
        corpus, idf, policy = self._setup(THREE_DOCS)
        alien = TokenizedResponse.from_terms(["rome"], response_id=0)
        with pytest.raises(MissingIdfTerm):
            weighted_score(alien, idf, policy)


class TestSelectRepresentative:
    def test_single_doc_wins(self):
        rep, scores = select_representative(Corpus.from_term_lists([["a", "b"]]), 2, 1.5)
        assert rep == 0
        assert len(scores) == 1

    def test_identical_docs_tie_to_lowest_id(self):
        corpus = Corpus.from_term_lists([["a", "b"]] * 4)
        rep, scores = select_representative(corpus, 2, 1.5)
        assert rep == 0
        assert len({s.score for s in scores}) == 1

    def test_three_doc_fixture(self):
        corpus = Corpus.from_texts(THREE_DOC_TEXTS)
        rep, scores = select_representative(corpus, 2, 1.5)
        assert rep == 0
        assert [s.score for s in scores] == pytest.approx(THREE_DOC_SCORES, rel=1e-12)

    def test_ten_doc_fixture_pinned(self):
        corpus = Corpus.from_term_lists(TEN_DOCS)
        rep, scores = select_representative(corpus, 10, 1.5)
        assert rep == TEN_DOC_REP
        assert [s.score for s in scores] == pytest.approx(
            TEN_DOC_SELECTION_SCORES, rel=1e-12
        )

    def test_all_empty_docs_fall_back_to_index_zero(self):
        corpus = Corpus.from_term_lists([[], [], []])
        rep, scores = select_representative(corpus, 2, 1.5)
        assert rep == 0
        assert all(s.score == 0.0 for s in scores)

    def test_empty_doc_never_beats_nonzero_doc(self):
        corpus = Corpus.from_term_lists([[], ["a"], []])
        rep, _ = select_representative(corpus, 2, 1.5)
        assert rep == 1


class TestInvariants:
    def test_scale_invariance_of_scores_and_argmax(self):
        rng = random.Random(11)
        for _ in range(40):
            docs = make_random_corpus(rng)
            corpus = Corpus.from_term_lists(docs)
            idf = compute_idf(corpus)
            policy = WeightPolicy.for_selection(1.5, top_k_keywords(corpus, 3))
            factor = rng.choice([0.25, 0.5, 3.0, 7.5, 1000.0])
            for doc in corpus.docs:
                base = weighted_score(doc, idf, policy).score
                scaled = weighted_score(doc, idf.scaled(factor), policy).score
                assert scaled == pytest.approx(base, rel=1e-12, abs=1e-15)

    def test_score_bounds(self):
        rng = random.Random(12)
        for _ in range(60):
            docs = make_random_corpus(rng)
            corpus = Corpus.from_term_lists(docs)
            idf = compute_idf(corpus)
            policy = WeightPolicy.for_selection(2.5, top_k_keywords(corpus, 4))
            for doc in corpus.docs:
                scored = weighted_score(doc, idf, policy)
                if scored.l2_norm == 0:
                    assert scored.score == 0.0
                else:
                    m = len(scored.components)
                    assert 1.0 - 1e-12 <= scored.score <= math.sqrt(m) + 1e-12

    def test_weight_monotonicity_pure_keyword_vs_keyword_free(self):
        # Raising alpha cannot push an all-keyword doc below a no-keyword doc.
        docs = [["x", "x", "y"], ["p", "q", "r"]]
        corpus = Corpus.from_term_lists(docs)
        idf = compute_idf(corpus)
        kws = KeywordSet(terms=frozenset({"x", "y"}), k=2)
        previous_gap = None
        for alpha in (1.1, 1.5, 2.0, 4.0, 16.0):
            policy = WeightPolicy.for_selection(alpha, kws)
            s_kw = weighted_score(corpus.docs[0], idf, policy).score
            s_plain = weighted_score(corpus.docs[1], idf, policy).score
            gap = s_kw - s_plain
            if previous_gap is not None:
                assert gap >= previous_gap - 1e-12
            previous_gap = gap
            # Uniform scaling of an all-keyword doc leaves its score fixed,
            # so the relative ordering is alpha-independent here.
            assert s_kw == pytest.approx(
                weighted_score(corpus.docs[0], idf, WeightPolicy.for_selection(1.0001, kws)).score,
                rel=1e-9,
            )

    def test_representative_stability_under_permutation(self):
        rng = random.Random(13)
        for _ in range(40):
            docs = make_random_corpus(rng)
            order = list(range(len(docs)))
            rng.shuffle(order)
            permuted = [docs[i] for i in order]
            rep_a, scores_a = select_representative(Corpus.from_term_lists(docs), 3, 1.5)
            rep_b, scores_b = select_representative(
                Corpus.from_term_lists(permuted), 3, 1.5
            )
            vals_a = sorted(s.score for s in scores_a)
            vals_b = sorted(s.score for s in scores_b)
            assert vals_a == pytest.approx(vals_b, rel=1e-12, abs=1e-15)
            # The winning score is permutation-independent even when the
            # winning index legitimately moves with the shuffle.
            assert scores_b[rep_b].score == pytest.approx(
                scores_a[rep_a].score, rel=1e-12
            )
            assert rep_b == min(
                i
                for i, s in enumerate(scores_b)
                if s.score == scores_b[rep_b].score
            )

    def test_oracle_equivalence_on_random_corpora(self):
        rng = random.Random(21)
        for _ in range(150):
            docs = make_random_corpus(rng)
            rep, scores = select_representative(Corpus.from_term_lists(docs), 3, 1.5)
            bf_rep, bf_scores = bf_select(docs, 3, 1.5)
            assert rep == bf_rep
            assert [s.score for s in scores] == pytest.approx(bf_scores, rel=1e-12, abs=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.lists(st.sampled_from("abcdefgh"), max_size=8),
            min_size=1,
            max_size=5,
        ),
        st.integers(min_value=1, max_value=6),
    )
    def test_hypothesis_oracle_equivalence(self, term_lists, k):
        docs = [[f"t{c}" for c in terms] for terms in term_lists]
        rep, scores = select_representative(Corpus.from_term_lists(docs), k, 1.5)
        bf_rep, bf_scores = bf_select(docs, k, 1.5)
        assert rep == bf_rep
        assert [s.score for s in scores] == pytest.approx(bf_scores, rel=1e-12, abs=1e-15)
