"""DFA extraction by state merging: build a prefix tree from the model's
per-prefix decisions, merge states that agree in label and whose hidden
vectors are nearly parallel, then determinize and minimize."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .automata import Dfa, Nfa, determinize, minimize
from .rnn import RnnModel, forward

logger = logging.getLogger(__name__)


@dataclass
class PrefixTree:
    """Trie over the training prefixes; states are numbered in BFS order from
    the root, children visited in alphabet order."""
    alphabet: tuple[str, ...]
    edges: dict[tuple[int, str], int]
    labels: list[bool]
    features: list[np.ndarray]
    root: int = 0

    @property
    def n_states(self) -> int:
        return len(self.labels)

    def state_of(self, prefix: str) -> int | None:
        state = self.root
        for token in prefix:
            nxt = self.edges.get((state, token))
            if nxt is None:
                return None
            state = nxt
        return state

    def as_dfa(self) -> Dfa:
        return Dfa(self.alphabet, set(range(self.n_states)), self.root,
                   dict(self.edges), {q for q, acc in enumerate(self.labels) if acc})


@dataclass(frozen=True)
class MergePolicy:
    kappa: float

    def __post_init__(self) -> None:
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("kappa must lie strictly between 0 and 1")


def build_prefix_tree(model: RnnModel, strings: list[str]) -> PrefixTree:
    if not strings:
        raise ValueError("need at least one string")
    # Raw trie with insertion-order ids, then a BFS renumbering pass.
    children: list[dict[str, int]] = [{}]
    for w in strings:
        node = 0
        for token in w:
            if token not in model.alphabet:
                raise ValueError(f"token {token!r} not in alphabet {model.alphabet}")
            nxt = children[node].get(token)
            if nxt is None:
                nxt = len(children)
                children[node][token] = nxt
                children.append({})
            node = nxt
    bfs_id: dict[int, int] = {0: 0}
    order = [0]
    for node in order:
        for token in model.alphabet:
            child = children[node].get(token)
            if child is not None:
                bfs_id[child] = len(bfs_id)
                order.append(child)
    edges = {(bfs_id[node], token): bfs_id[child]
             for node in range(len(children))
             for token, child in children[node].items()}
    labels: list[bool | None] = [None] * len(children)
    features: list[np.ndarray | None] = [None] * len(children)
    for w in set(strings):
        result = forward(model, w)
        decided = result.yhat > 0.5
        node = 0
        for i in range(len(w) + 1):
            q = bfs_id[node]
            if labels[q] is None:
                labels[q] = bool(decided[i])
                features[q] = result.hidden[i]
            if i < len(w):
                node = children[node][w[i]]
    return PrefixTree(model.alphabet, edges, list(labels), list(features))


@dataclass
class MergeAutomaton:
    """Mutable working automaton for the merge loop; transitions are sets, so
    merging may introduce nondeterminism."""
    alphabet: tuple[str, ...]
    states: set[int]
    initial: int
    transitions: dict[tuple[int, str], set[int]] = field(default_factory=dict)
    accepting: set[int] = field(default_factory=set)
    features: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self._incoming: dict[int, set[tuple[int, str]]] = {q: set() for q in self.states}
        for (src, token), dsts in self.transitions.items():
            for dst in dsts:
                self._incoming[dst].add((src, token))

    @classmethod
    def from_tree(cls, tree: PrefixTree) -> "MergeAutomaton":
        return cls(tree.alphabet, set(range(tree.n_states)), tree.root,
                   {key: {dst} for key, dst in tree.edges.items()},
                   {q for q, acc in enumerate(tree.labels) if acc},
                   {q: tree.features[q] for q in range(tree.n_states)})

    def merge(self, q_dead: int, q_keep: int) -> "MergeAutomaton":
        """Delete q_dead, rerouting its incoming edges to q_keep and adding its
        outgoing edges to q_keep's; q_keep keeps its own feature vector."""
        if q_dead == q_keep:
            raise ValueError("cannot merge a state with itself")
        if q_dead not in self.states or q_keep not in self.states:
            raise ValueError("merge involves a deleted state")
        incoming = list(self._incoming.pop(q_dead))
        outgoing = [(token, dst) for (src, token), dsts in list(self.transitions.items())
                    if src == q_dead for dst in dsts]
        for src, token in incoming:
            self.transitions[(src, token)].discard(q_dead)
        for token, dst in outgoing:
            self.transitions.pop((q_dead, token), None)
            if dst != q_dead:
                self._incoming[dst].discard((q_dead, token))
        for src, token in incoming:
            src = q_keep if src == q_dead else src
            self.transitions.setdefault((src, token), set()).add(q_keep)
            self._incoming[q_keep].add((src, token))
        for token, dst in outgoing:
            dst = q_keep if dst == q_dead else dst
            self.transitions.setdefault((q_keep, token), set()).add(dst)
            self._incoming[dst].add((q_keep, token))
        self.transitions = {k: v for k, v in self.transitions.items() if v}
        self.states.discard(q_dead)
        self.accepting.discard(q_dead)
        self.features.pop(q_dead, None)
        if self.initial == q_dead:
            self.initial = q_keep
        return self

    def to_nfa(self) -> Nfa:
        return Nfa(self.alphabet, set(self.states), self.initial,
                   {k: set(v) for k, v in self.transitions.items()}, set(self.accepting))


def should_merge(auto: MergeAutomaton, q_i: int, q_j: int, policy: MergePolicy) -> bool:
    """Labels must agree exactly and cosine similarity must strictly exceed
    1 - kappa; a zero-norm feature never matches anything."""
    if q_i not in auto.states or q_j not in auto.states:
        raise ValueError("comparison involves a deleted state")
    if (q_i in auto.accepting) != (q_j in auto.accepting):
        return False
    f_i, f_j = auto.features[q_i], auto.features[q_j]
    n_i, n_j = np.linalg.norm(f_i), np.linalg.norm(f_j)
    if n_i == 0.0 or n_j == 0.0:
        logger.warning("zero-norm feature at state %d/%d treated as never similar", q_i, q_j)
        return False
    return float(f_i @ f_j) / (n_i * n_j) > 1.0 - policy.kappa


def merge_all(tree: PrefixTree, policy: MergePolicy) -> Nfa:
    """Fold deeper states into earlier (shallower) ones until no candidate
    pair satisfies the policy.

    Scan order: q_i runs over BFS ids descending, q_j ascending.  A single
    descending pass is exhaustive here because a merge never changes any
    surviving state's label or feature vector, so the pair predicate is
    static and a restart could only repeat failed checks.
    """
    auto = MergeAutomaton.from_tree(tree)
    n = tree.n_states
    feats = np.stack(tree.features)
    norms = np.linalg.norm(feats, axis=1)
    degenerate = norms == 0.0
    if degenerate.any():
        logger.warning("%d zero-norm features treated as never similar", int(degenerate.sum()))
    unit = np.divide(feats, norms[:, None], out=np.zeros_like(feats), where=~degenerate[:, None])
    labels = np.array(tree.labels)
    alive = np.ones(n, dtype=bool)
    threshold = 1.0 - policy.kappa
    for q_i in range(n - 1, -1, -1):
        sims = unit @ unit[q_i]
        candidates = alive & (labels == labels[q_i]) & (sims > threshold)
        candidates[q_i] = False
        if degenerate[q_i]:
            candidates[:] = False
        matches = np.nonzero(candidates)[0]
        if matches.size:
            q_j = int(matches[0])
            auto.merge(q_i, q_j)
            alive[q_i] = False
    return auto.to_nfa()


@dataclass
class ExtractionReport:
    merged: Nfa
    final: Dfa
    sizes: tuple[int, int, int]  # (trie, merged, minimized)
    determinized_size: int
    train_fidelity: float
    kappa: float
    data_count: int


def train_set_fidelity(final: Dfa, tree: PrefixTree) -> float:
    """Fraction of distinct training prefixes on which the extracted machine
    agrees with the labels recorded in the tree."""
    agree = 0
    stack: list[tuple[int, int | None]] = [(tree.root, final.initial)]
    while stack:
        node, state = stack.pop()
        accept = state is not None and state in final.accepting
        if accept == tree.labels[node]:
            agree += 1
        for token in tree.alphabet:
            child = tree.edges.get((node, token))
            if child is not None:
                stack.append((child, final.step(state, token)))
    return agree / tree.n_states


def extract(model: RnnModel, strings: list[str], kappa: float) -> ExtractionReport:
    """Full pipeline: prefix tree -> merge -> determinize -> minimize."""
    policy = MergePolicy(kappa)
    tree = build_prefix_tree(model, strings)
    merged = merge_all(tree, policy)
    det = determinize(merged)
    final = minimize(det)
    report = ExtractionReport(
        merged=merged,
        final=final,
        sizes=(tree.n_states, len(merged.states), len(final.states)),
        determinized_size=len(det.states),
        train_fidelity=train_set_fidelity(final, tree),
        kappa=kappa,
        data_count=len(strings),
    )
    if report.train_fidelity < 1.0:
        logger.warning("extracted machine disagrees with the model on %.2f%% of training prefixes",
                       100.0 * (1.0 - report.train_fidelity))
    return report
