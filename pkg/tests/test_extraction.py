import numpy as np
import pytest

from statemerge.automata import determinize, isomorphic, minimize
from statemerge.extraction import (MergeAutomaton, MergePolicy, PrefixTree,
                                   build_prefix_tree, extract, merge_all,
                                   should_merge, train_set_fidelity)
from statemerge.languages import ALPHABET
from statemerge.rnn import decisions, forward, init_model


def small_model(seed=0):
    return init_model(ALPHABET, 4, 8, np.random.default_rng(seed))


def random_strings(rng, count, max_len=8):
    out = []
    for _ in range(count):
        n = int(rng.integers(0, max_len + 1))
        out.append("".join(ALPHABET[i] for i in rng.integers(0, 2, size=n)))
    return out


class TestBuildPrefixTree:
    def test_single_string_path(self):
        tree = build_prefix_tree(small_model(), ["ab"])
        assert tree.n_states == 3
        assert tree.edges == {(0, "a"): 1, (1, "b"): 2}

    def test_shared_prefix(self):
        tree = build_prefix_tree(small_model(), ["ab", "aa"])
        assert tree.n_states == 4
        assert tree.edges[(0, "a")] == 1
        assert {tree.edges[(1, "a")], tree.edges[(1, "b")]} == {2, 3}

    def test_bfs_numbering(self):
        tree = build_prefix_tree(small_model(), ["ba", "ab"])
        # Level order with children in alphabet order: root, q_a, q_b, q_ab, q_ba.
        assert tree.edges[(0, "a")] == 1
        assert tree.edges[(0, "b")] == 2
        assert tree.edges[(1, "b")] == 3
        assert tree.edges[(2, "a")] == 4

    def test_labels_and_features_from_model(self):
        m = small_model()
        tree = build_prefix_tree(m, ["ab"])
        result = forward(m, "ab")
        assert tree.labels == decisions(m, "ab")
        for i in range(3):
            assert np.array_equal(tree.features[i], result.hidden[i])

    def test_tree_memorizes_own_prefixes(self, rng):
        m = small_model(3)
        strings = random_strings(rng, 30)
        tree = build_prefix_tree(m, strings)
        dfa = tree.as_dfa()
        for w in strings:
            preds = decisions(m, w)
            for i in range(len(w) + 1):
                assert dfa.accepts(w[:i]) == preds[i]

    def test_feature_determinism(self, rng):
        m = small_model(4)
        strings = random_strings(rng, 20)
        t1 = build_prefix_tree(m, strings)
        t2 = build_prefix_tree(m, list(strings))
        assert t1.edges == t2.edges
        assert all(np.array_equal(a, b) for a, b in zip(t1.features, t2.features))

    def test_rejects_bad_token(self):
        with pytest.raises(ValueError):
            build_prefix_tree(small_model(), ["ax"])


def toy_automaton(labels, features, edges):
    n = len(labels)
    return MergeAutomaton(ALPHABET, set(range(n)), 0,
                          {key: set(dsts) for key, dsts in edges.items()},
                          {i for i, acc in enumerate(labels) if acc},
                          {i: np.asarray(f, dtype=float) for i, f in enumerate(features)})


class TestShouldMerge:
    def test_similar_and_consistent(self):
        auto = toy_automaton([True, True], [[1.0, 0.0], [0.999, 0.01]], {})
        assert should_merge(auto, 0, 1, MergePolicy(0.01))

    def test_label_mismatch_blocks(self):
        auto = toy_automaton([True, False], [[1.0, 0.0], [1.0, 0.0]], {})
        assert not should_merge(auto, 0, 1, MergePolicy(0.5))

    def test_dissimilar_blocks(self):
        auto = toy_automaton([False, False], [[1.0, 0.0], [0.5, 0.866]], {})
        assert not should_merge(auto, 0, 1, MergePolicy(0.01))

    def test_zero_norm_never_similar(self, caplog):
        auto = toy_automaton([True, True], [[0.0, 0.0], [1.0, 0.0]], {})
        assert not should_merge(auto, 0, 1, MergePolicy(0.9))

    def test_kappa_range_validated(self):
        with pytest.raises(ValueError):
            MergePolicy(0.0)
        with pytest.raises(ValueError):
            MergePolicy(1.0)


class TestMerge:
    def test_reroute_creates_self_loop(self):
        auto = toy_automaton([True, True], [[1, 0], [1, 0]], {(0, "a"): {1}})
        auto.merge(1, 0)
        assert auto.transitions == {(0, "a"): {0}}
        assert auto.states == {0}

    def test_union_can_create_nondeterminism(self):
        auto = toy_automaton([False] * 4, [[1, 0]] * 4,
                             {(0, "b"): {2}, (1, "b"): {3}})
        auto.merge(0, 1)
        assert auto.transitions[(1, "b")] == {2, 3}

    def test_survivor_keeps_own_feature(self):
        auto = toy_automaton([True, True], [[1.0, 0.0], [0.8, 0.6]], {})
        keep_feature = auto.features[1].copy()
        auto.merge(0, 1)
        assert np.array_equal(auto.features[1], keep_feature)
        assert auto.initial == 1  # initial marker moved off the deleted state

    def test_merge_deleted_state_rejected(self):
        auto = toy_automaton([True, True, True], [[1, 0]] * 3, {})
        auto.merge(2, 0)
        with pytest.raises(ValueError):
            auto.merge(2, 1)
        with pytest.raises(ValueError):
            auto.merge(1, 1)


class TestMergeAll:
    def test_distinct_features_no_merge(self, rng):
        m = small_model(7)
        strings = random_strings(rng, 10)
        tree = build_prefix_tree(m, strings)
        merged = merge_all(tree, MergePolicy(1e-12))
        cos_max = _max_offdiag_cosine(tree)
        if cos_max <= 1 - 1e-12:
            assert len(merged.states) == tree.n_states
            assert merged.transitions == {k: {v} for k, v in tree.edges.items()}

    def test_high_tolerance_collapses_by_label(self):
        # All features closely aligned: only the label classes can survive.
        features = [np.array([1.0, 0.01 * i]) for i in range(5)]
        tree = PrefixTree(ALPHABET,
                          {(0, "a"): 1, (0, "b"): 2, (1, "a"): 3, (1, "b"): 4},
                          [True, False, False, True, False], features)
        merged = merge_all(tree, MergePolicy(0.5))
        assert len(merged.states) == 2
        assert len(merged.accepting) == 1

    def test_path_preservation(self, rng):
        for trial in range(20):
            m = small_model(100 + trial)
            strings = random_strings(rng, 15)
            tree = build_prefix_tree(m, strings)
            kappa = float(rng.uniform(0.01, 0.8))
            merged = merge_all(tree, MergePolicy(kappa))
            for w in strings:
                current = {merged.initial}
                for token in w:
                    current = {d for s in current
                               for d in merged.transitions.get((s, token), ())}
                    assert current, f"path lost for {w!r} at kappa={kappa}"
                if decisions(m, w)[-1]:
                    assert current & merged.accepting

    def test_labels_preserved_under_merging(self, rng):
        m = small_model(9)
        tree = build_prefix_tree(m, random_strings(rng, 20))
        merged = merge_all(tree, MergePolicy(0.3))
        for state in merged.states:
            assert (state in merged.accepting) == tree.labels[state]


def _max_offdiag_cosine(tree):
    feats = np.stack(tree.features)
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    unit = feats / norms
    sims = unit @ unit.T
    np.fill_diagonal(sims, -1.0)
    return float(sims.max())


class TestExtract:
    def test_pipeline_monotonicity(self, rng):
        m = small_model(13)
        strings = random_strings(rng, 40)
        report = extract(m, strings, 0.05)
        trie, merged, minimized = report.sizes
        assert merged <= trie
        assert minimized <= report.determinized_size
        assert report.data_count == len(strings)

    def test_train_fidelity_counts_prefix_agreement(self, rng):
        m = small_model(17)
        strings = random_strings(rng, 25)
        tree = build_prefix_tree(m, strings)
        # The unmerged trie always agrees with itself.
        assert train_set_fidelity(tree.as_dfa(), tree) == 1.0

    def test_empty_strings_rejected(self):
        with pytest.raises(ValueError):
            extract(small_model(), [], 0.01)
