import itertools

import numpy as np
import pytest

from statemerge.automata import Dfa, Nfa

SIGMA2 = ("a", "b")


def all_strings(alphabet, max_len):
    for n in range(max_len + 1):
        for tokens in itertools.product(alphabet, repeat=n):
            yield "".join(tokens)


def same_language(machine_a, machine_b, max_len):
    """Brute-force agreement on every string up to max_len."""
    return all(machine_a.accepts(w) == machine_b.accepts(w)
               for w in all_strings(machine_a.alphabet, max_len))


def random_dfa(rng, n_states, alphabet=SIGMA2, edge_prob=0.85):
    transitions = {}
    for state in range(n_states):
        for token in alphabet:
            if rng.random() < edge_prob:
                transitions[(state, token)] = int(rng.integers(n_states))
    accepting = {s for s in range(n_states) if rng.random() < 0.4}
    return Dfa(alphabet, set(range(n_states)), 0, transitions, accepting)


def random_nfa(rng, n_states, alphabet=SIGMA2, edge_prob=0.4):
    transitions = {}
    for state in range(n_states):
        for token in alphabet:
            dsts = {int(s) for s in range(n_states) if rng.random() < edge_prob}
            if dsts:
                transitions[(state, token)] = dsts
    accepting = {s for s in range(n_states) if rng.random() < 0.4}
    return Nfa(alphabet, set(range(n_states)), 0, transitions, accepting)


def moore_minimize_size(dfa):
    """Independent minimization oracle: Moore's iterative refinement on the
    completed machine; returns the state count excluding the dead class."""
    states = sorted(dfa.states)
    sink = max(states) + 1
    full = states + [sink]

    def step(state, token):
        if state == sink:
            return sink
        return dfa.transitions.get((state, token), sink)

    block = {s: (s in dfa.accepting) for s in full}
    while True:
        signature = {s: (block[s], tuple(block[step(s, t)] for t in dfa.alphabet))
                     for s in full}
        canon = {}
        new_block = {}
        for s in full:
            new_block[s] = canon.setdefault(signature[s], len(canon))
        if len(set(new_block.values())) == len(set(block.values())):
            block = new_block
            break
        block = new_block
    # Count blocks reachable from the initial state, excluding the dead class.
    reachable = {block[dfa.initial]}
    frontier = [dfa.initial]
    seen = {dfa.initial}
    while frontier:
        s = frontier.pop()
        for t in dfa.alphabet:
            nxt = step(s, t)
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
                reachable.add(block[nxt])
    dead = {b for b in set(block.values()) if _is_dead_block(block, full, dfa, step, b)}
    if block[dfa.initial] in dead:
        return 1  # empty language keeps its bare initial state
    return len(reachable - dead)


def _is_dead_block(block, full, dfa, step, b):
    """A block is dead iff no accepting state is reachable from its members."""
    members = [s for s in full if block[s] == b]
    seen = set(members)
    frontier = list(members)
    while frontier:
        s = frontier.pop()
        if s in dfa.accepting:
            return False
        for t in dfa.alphabet:
            nxt = step(s, t)
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return True


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
