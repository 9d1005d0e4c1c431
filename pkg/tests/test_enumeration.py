"""Space censuses: tree/graph agreement, duplication counts, caps."""

import pytest

import oracle
from enumsr.canon import hash_phrase
from enumsr.enumeration import SpaceStats, graph_census, space_stats, tree_census
from enumsr.expr import render_infix


class TestSmallSpaces:

    def test_single_reference_single_feature(self, grammar1):
        stats = space_stats(grammar1, 1)
        assert stats.derivations == 59
        assert stats.sentences == 12
        assert stats.distinct_sentences == 12
        assert stats.distinct_canonical == 12
        assert stats.graph_rejected == 0
        assert stats.graph_sentences == 12

    def test_single_reference_two_features(self, grammar2):
        stats = space_stats(grammar2, 1)
        assert stats.sentences == 24
        assert stats.distinct_canonical == 24

    def test_two_references_single_feature(self, grammar1):
        stats = space_stats(grammar1, 2)
        assert stats.derivations == 1676
        assert stats.sentences == 304
        # eight raw strings have two distinct leftmost derivations each
        assert stats.distinct_sentences == 296
        assert stats.distinct_canonical == 175
        assert stats.graph_derived == 1644
        assert stats.graph_rejected == 129
        assert stats.graph_sentences == 175

    def test_counts_match_oracle(self, grammar1):
        stats = space_stats(grammar1, 2)
        _, sentences = oracle.enumerate_sentences(1, 2)
        assert stats.sentences == len(sentences)
        assert stats.distinct_canonical == oracle.distinct_canonical_count(1, 2)


class TestTreeGraphAgreement:

    def test_graph_keeps_one_sentence_per_digest(self, grammar1):
        _, raw = tree_census(grammar1, 2)
        _, _, kept = graph_census(grammar1, 2)
        assert {hash_phrase(s) for s in raw} == {hash_phrase(s) for s in kept}
        assert len({hash_phrase(s) for s in kept}) == len(kept)

    def test_first_seen_order_is_stable(self, grammar1):
        _, _, kept = graph_census(grammar1, 1)
        texts = [render_infix(s, grammar1.feature_names) for s in kept]
        assert texts[:3] == ["c0*x + c1", "c0*exp(c1*x) + c2",
                             "c0*log(c1*x + c2) + c3"]
        assert max(len(s) for s in kept) == 15


class TestCaps:

    def test_tree_census_cap(self, grammar1):
        with pytest.raises(RuntimeError):
            tree_census(grammar1, 3, cap=100)

    def test_graph_census_cap(self, grammar1):
        with pytest.raises(RuntimeError):
            graph_census(grammar1, 3, cap=100)


class TestRejectionRatio:

    def test_matches_counts(self, grammar1):
        stats = space_stats(grammar1, 2)
        assert stats.rejection_ratio == pytest.approx(129 / 1644)

    def test_zero_derivations(self):
        stats = SpaceStats(max_var_refs=1, n_features=1, derivations=0,
                           sentences=0, distinct_sentences=0,
                           distinct_canonical=0, graph_derived=0,
                           graph_rejected=0, graph_sentences=0)
        assert stats.rejection_ratio == 0.0
