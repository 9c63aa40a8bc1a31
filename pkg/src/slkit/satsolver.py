"""Satisfiability pipeline for one-goal sentences, and model checking via
tree-automaton membership.

decide: classify, normalize, assemble the automaton per action bound, run
the bounded emptiness search, extract a witness structure and verify it.
The action bound of the underlying finite-model property has no explicit
value here, so the solver iterates a configured schedule and reports
UNSAT_UP_TO rather than claiming unconditional unsatisfiability.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .formula import (
    Formula, FormulaError, NotASentenceError, SL1G, classify, free, render,
)
from .game import Cgs, GameError
from .semantics import OracleError, OracleScopeError, eval_direct, temporal_depth
from .automata import (
    AlphabetSizeError, AutomatonError, EmptyUpTo, MooreWitness, SearchExhausted,
    Uct, WitnessFound, assemble_full_automaton, uct_emptiness_bounded,
    uct_membership, move_conjunction,
)


class SolverError(Exception):
    pass


@dataclass(frozen=True)
class SolverConfig:
    """Schedule of action bounds and witness caps for the bounded search."""

    bounds: tuple[int, ...] = (1, 2, 3)
    k_max: int = 6
    time_budget: Optional[float] = None
    verify: bool = True
    memory_bound: Optional[int] = None  # model_check labeling copies per state

    def __post_init__(self):
        if not self.bounds or list(self.bounds) != sorted(set(self.bounds)):
            raise SolverError("bound schedule must be non-empty and increasing")
        if self.k_max < 1:
            raise SolverError("k_max must be at least 1")


@dataclass(frozen=True)
class Sat:
    model: Cgs
    witness: MooreWitness
    bound: int
    size: int
    kind: str = "SAT"


@dataclass(frozen=True)
class UnsatUpTo:
    bound_max: int
    k_max: int
    kind: str = "UNSAT_UP_TO"


@dataclass(frozen=True)
class FragmentError:
    fragment: str
    kind: str = "FRAGMENT_ERROR"


@dataclass(frozen=True)
class ResourceExhausted:
    detail: str
    kind: str = "RESOURCE_EXHAUSTED"


Verdict = object


def _agents_of(f: Formula, agents: Iterable[str]) -> tuple[str, ...]:
    return tuple(sorted(agents))


def decide(f: Formula, agents: Iterable[str], atoms: Iterable[str],
           cfg: SolverConfig = SolverConfig()) -> Verdict:
    """Satisfiability of a one-goal sentence, by bounded witness search.

    For each action bound b in the schedule the full automaton over actions
    0..b-1 is built and searched for a witness of at most k_max nodes.  The
    first witness (minimal bound, then minimal size, then lexicographically
    least) wins; exhausting the schedule yields UNSAT_UP_TO.
    """
    agents = _agents_of(f, agents)
    atom_set = tuple(sorted(frozenset(atoms)))
    try:
        fc = classify(f, agents)
    except NotASentenceError as e:
        raise SolverError(str(e))
    if fc.kind != SL1G:
        return FragmentError(fc.kind)

    deadline = time.monotonic() + cfg.time_budget if cfg.time_budget else None
    for b in cfg.bounds:
        remaining = None
        if deadline is not None:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return ResourceExhausted("time budget exhausted before the schedule ended")
        try:
            aut = assemble_full_automaton(f, agents, atom_set, tuple(range(b)))
        except AlphabetSizeError as e:
            return ResourceExhausted(str(e))
        result = uct_emptiness_bounded(aut, cfg.k_max, time_budget=remaining)
        if isinstance(result, SearchExhausted):
            return ResourceExhausted(result.detail)
        if isinstance(result, WitnessFound):
            model = extract_model(result.witness, b, agents, atom_set)
            if cfg.verify:
                if not uct_membership(result.witness, aut):
                    raise SolverError("witness failed re-verification")
                if not model_check(model, f, agents, atom_set, cfg):
                    raise SolverError("extracted model failed model checking")
                if temporal_depth(f) is not math.inf:
                    if not eval_direct(model, {}, model.initial, f):
                        raise SolverError("extracted model failed the oracle")
            return Sat(model, result.witness, b, result.size)
    return UnsatUpTo(cfg.bounds[-1], cfg.k_max)


def extract_model(w: MooreWitness, bound: int, agents: Iterable[str],
                  atoms: Iterable[str]) -> Cgs:
    """Fold a witness generator into a finite structure.

    States are the witness nodes; transitions follow the successor map;
    labels keep only the real atoms of each node's letter (placeholder and
    dependence-function components are dropped).
    """
    agents = tuple(sorted(agents))
    atom_set = frozenset(atoms)
    actions = tuple(range(bound))
    node_name = {n: f"n{i}" for i, n in enumerate(w.nodes)}
    states = tuple(node_name[n] for n in w.nodes)
    label = {}
    for n in w.nodes:
        letter = w.labels[n]
        lab = letter[0] if isinstance(letter, tuple) else letter
        label[node_name[n]] = frozenset(lab) & atom_set
    transition = {}
    for n in w.nodes:
        for d in w.directions:
            transition[(node_name[n], d)] = node_name[w.successor[(n, d)]]
    return Cgs(frozenset(atom_set), agents, actions, states,
               node_name[w.root], label, transition)


def model_check(g: Cgs, f: Formula, agents: Iterable[str],
                atoms: Iterable[str], cfg: SolverConfig = SolverConfig()) -> bool:
    """Membership-based model checking of a one-goal sentence on g.

    Searches for a finite-memory labeling of g's unwinding with placeholder
    and dependence-function components such that the full automaton accepts
    the labeled tree.  Positive answers are sound; negative answers are
    complete only relative to the memory bound (copies of each state the
    labeling may distinguish), which defaults to the automaton state count.
    """
    agents = tuple(sorted(agents))
    if set(agents) != set(g.agents):
        raise SolverError("agent sets of the formula and the structure differ")
    atom_set = tuple(sorted(frozenset(atoms) | g.atoms))
    fc = classify(f, agents)
    if fc.kind != SL1G:
        return_fragment = FragmentError(fc.kind)
        raise SolverError(f"model_check needs a one-goal sentence, got {fc.kind}")
    aut = assemble_full_automaton(f, tuple(g.agents), atom_set, g.actions)
    memory = cfg.memory_bound if cfg.memory_bound is not None else len(aut.states)

    base = frozenset(atom_set)
    placeholders = frozenset(aut.info["plan"].placeholders)

    # Letters available at a given structure state: those whose real-atom
    # part matches the state's label exactly.
    letters_at: dict = {}
    for s in g.states:
        letters_at[s] = tuple(
            letter for letter in aut.letters
            if (letter[0] & base) == (g.label[s] & base))

    directions = tuple(g.decisions())
    if tuple(aut.directions) != directions:
        raise SolverError("direction mismatch between automaton and structure")

    pruner_nodes_cap = memory * len(g.states)

    # Depth-first search over labeled copies of the unwinding: nodes are
    # (state, copy) pairs created on demand, each carrying one letter.
    from .automata import _obligation_pruner, _has_rejecting_cycle

    pruner = _obligation_pruner(aut)

    nodes: list = [(g.initial, 0)]
    letters_chosen: dict = {}
    succ_choice: dict = {}
    copies: dict = {g.initial: 1}

    def feasible() -> bool:
        edges = {}
        start = (0, aut.initial)
        stack = [start]
        seen = set()
        while stack:
            pn = stack.pop()
            if pn in seen:
                continue
            seen.add(pn)
            idx, q = pn
            node = nodes[idx]
            if node not in letters_chosen:
                continue
            moves = move_conjunction(aut.delta(q, letters_chosen[node]))
            if moves is None:
                return False
            out = []
            for m in moves:
                t = succ_choice.get((node, m.direction))
                if t is not None:
                    out.append((t, m.state))
            edges[pn] = out
            stack.extend(out)
        if pruner is not None:
            by_node: dict = {}
            for idx, q in seen:
                by_node.setdefault(idx, set()).add(q)
            if pruner(by_node):
                return False
        return not _has_rejecting_cycle(edges, [start],
                                        lambda pn: pn[1] in aut.rejecting)

    def next_cell():
        for idx in range(len(nodes)):
            node = nodes[idx]
            if node not in letters_chosen:
                return ("label", idx)
            for d in directions:
                if (node, d) not in succ_choice:
                    return ("succ", idx, d)
        return None

    def assign(cell) -> bool:
        if cell is None:
            return True
        if cell[0] == "label":
            node = nodes[cell[1]]
            for letter in letters_at[node[0]]:
                letters_chosen[node] = letter
                if feasible() and assign(next_cell()):
                    return True
                del letters_chosen[node]
            return False
        _, idx, d = cell
        node = nodes[idx]
        target_state = g.transition[(node[0], d)]
        n_copies = copies.get(target_state, 0)
        candidates = [i for i, m in enumerate(nodes) if m[0] == target_state]
        may_create = n_copies < memory and len(nodes) < pruner_nodes_cap
        for target_idx in candidates + (["new"] if may_create else []):
            created = target_idx == "new"
            if created:
                new_node = (target_state, n_copies)
                nodes.append(new_node)
                copies[target_state] = n_copies + 1
                tgt = len(nodes) - 1
            else:
                tgt = target_idx
            succ_choice[(node, d)] = tgt
            if feasible() and assign(next_cell()):
                return True
            del succ_choice[(node, d)]
            if created:
                nodes.pop()
                copies[target_state] = n_copies
        return False

    return assign(next_cell())


def verdict_to_json(v: Verdict) -> str:
    """Stable JSON for verdicts (used by the CLI and determinism checks)."""
    match v:
        case Sat(model=m, witness=w, bound=b, size=k):
            doc = {
                "verdict": "SAT",
                "bound": b,
                "witness_size": k,
                "model": {
                    "states": list(m.states),
                    "initial": m.initial,
                    "actions": list(m.actions),
                    "agents": list(m.agents),
                    "label": {s: sorted(m.label[s]) for s in m.states},
                    "transitions": [
                        {"from": s, "decision": list(d), "to": m.transition[(s, d)]}
                        for s in m.states for d in sorted(m.decisions())
                    ],
                },
            }
        case UnsatUpTo(bound_max=b, k_max=k):
            doc = {"verdict": "UNSAT_UP_TO", "bound_max": b, "k_max": k}
        case FragmentError(fragment=fr):
            doc = {"verdict": "FRAGMENT_ERROR", "fragment": fr}
        case ResourceExhausted(detail=d):
            doc = {"verdict": "RESOURCE_EXHAUSTED", "detail": d}
        case _:
            raise SolverError(f"not a verdict: {v!r}")
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
