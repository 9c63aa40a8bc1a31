"""Word and tree automata: LTL to universal co-Buechi words, goal and
sentence tree automata, full-sentence assembly, membership, and bounded
emptiness with witness extraction.

Universal co-Buechi acceptance throughout: a (word or tree) input is
accepted when every path of the run graph visits rejecting states finitely
often.  On finite generators this reduces to the absence of a reachable
cycle through a rejecting product node.

Transition formulas are positive Boolean combinations of moves; every
construction here emits conjunctions of moves (or the empty disjunction as
the failed gate), so the membership and emptiness routines only accept that
universal normal form.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .formula import (
    And, Atom, BindPrefix, Bot, Exists, Forall, Formula, FormulaError, Next,
    Not, OneGoalPlan, Or, QuantPrefix, Release, Top, Until, children, free,
    one_goal_plan, render, subformulas, to_pnf, negate,
)
from .game import Cgs, MooreStrategy
from .semantics import SkolemDepFn, enumerate_sdf, temporal_depth


class AutomatonError(Exception):
    pass


class AlphabetSizeError(AutomatonError):
    pass


# ---------------------------------------------------------------------------
# Positive Boolean transition formulas


@dataclass(frozen=True)
class Move:
    direction: tuple
    state: object


@dataclass(frozen=True)
class PAnd:
    parts: tuple


@dataclass(frozen=True)
class POr:
    parts: tuple


TRUE = PAnd(())
FALSE = POr(())


def conj(parts: Iterable) -> object:
    """Flattened conjunction; FALSE absorbs, TRUE disappears."""
    moves: list = []
    for p in parts:
        if p == FALSE:
            return FALSE
        if isinstance(p, PAnd):
            moves.extend(p.parts)
        elif isinstance(p, Move):
            moves.append(p)
        else:
            raise AutomatonError(f"non-universal transition part: {p!r}")
    seen = set()
    out = []
    for m in moves:
        if m not in seen:
            seen.add(m)
            out.append(m)
    return PAnd(tuple(out))


def is_positive(f) -> bool:
    """Structural positivity: no negation can even be represented."""
    match f:
        case Move():
            return True
        case PAnd(parts) | POr(parts):
            return all(is_positive(p) for p in parts)
    return False


def move_conjunction(f) -> Optional[tuple[Move, ...]]:
    """The moves of a universal transition formula; None encodes FALSE."""
    if f == FALSE:
        return None
    if isinstance(f, PAnd):
        if not all(isinstance(p, Move) for p in f.parts):
            raise AutomatonError("transition formula is not a conjunction of moves")
        return f.parts
    raise AutomatonError(f"not a universal transition formula: {f!r}")


# ---------------------------------------------------------------------------
# Universal co-Buechi word automata


@dataclass(frozen=True)
class Ucw:
    letters: tuple[frozenset, ...]
    states: tuple
    initials: frozenset
    delta: Mapping[tuple, frozenset]  # (state, letter) -> conjunctive state set
    rejecting: frozenset

    def __post_init__(self):
        for q in self.states:
            for a in self.letters:
                if (q, a) not in self.delta:
                    raise AutomatonError(f"missing word transition at {(q, a)}")
        if not self.rejecting <= set(self.states):
            raise AutomatonError("rejecting states must be states")


def letters_over(atoms: Iterable[str]) -> tuple[frozenset, ...]:
    """All subsets of `atoms`, smallest first, then lexicographic."""
    names = sorted(atoms)
    out = []
    for mask in range(1 << len(names)):
        out.append(frozenset(n for i, n in enumerate(names) if mask >> i & 1))
    return tuple(sorted(out, key=lambda s: (len(s), tuple(sorted(s)))))


def _ltl_guard(psi: Formula):
    for g in subformulas(psi):
        if isinstance(g, (Exists, Forall)) or g.__class__.__name__ == "Bind":
            raise AutomatonError(f"not an LTL formula: {render(psi)}")


def _elementary(psi: Formula) -> tuple[tuple[str, ...], tuple[Formula, ...]]:
    atoms = sorted({g.name for g in subformulas(psi) if isinstance(g, Atom)})
    temporal = sorted(
        (g for g in subformulas(psi) if isinstance(g, (Next, Until, Release))),
        key=render)
    return tuple(atoms), tuple(temporal)


def _holds(f: Formula, member: frozenset, el_atoms: frozenset) -> bool:
    """Local truth over an elementary-set valuation."""
    match f:
        case Atom(name):
            return Atom(name) in member if name in el_atoms else False
        case Top():
            return True
        case Bot():
            return False
        case Not(s):
            return not _holds(s, member, el_atoms)
        case And(l, r):
            return _holds(l, member, el_atoms) and _holds(r, member, el_atoms)
        case Or(l, r):
            return _holds(l, member, el_atoms) or _holds(r, member, el_atoms)
        case Next() | Until() | Release():
            return f in member
    raise AutomatonError(f"unexpected node: {f!r}")


def ltl_to_ucw(psi: Formula, atoms: Iterable[str],
               el_cap: int = 18) -> Ucw:
    """Universal co-Buechi automaton with L(U) = L(psi) over 2^atoms.

    Tableau over the elementary subformulas of nnf(!psi) gives a
    (generalized) nondeterministic Buechi automaton for the negation; a
    counter degeneralizes it; reading the same structure universally with
    the Buechi set as co-Buechi rejecting set recognizes the complement,
    i.e. psi itself.
    """
    _ltl_guard(psi)
    alphabet = letters_over(atoms)
    neg = to_pnf(negate(psi))
    el_atom_names, el_temporal = _elementary(neg)
    el_atoms = frozenset(el_atom_names)
    if len(el_atom_names) + len(el_temporal) > el_cap:
        raise AlphabetSizeError(
            f"formula has {len(el_atom_names) + len(el_temporal)} elementary "
            f"subformulas (cap {el_cap})")
    if not el_atoms <= frozenset(atoms):
        raise AutomatonError(
            f"formula atoms {sorted(el_atoms - frozenset(atoms))} outside the alphabet")

    elements = tuple(Atom(a) for a in el_atom_names) + el_temporal
    cells = []
    for mask in range(1 << len(elements)):
        cells.append(frozenset(e for i, e in enumerate(elements) if mask >> i & 1))

    untils = tuple(g for g in el_temporal if isinstance(g, Until))

    def successors(s: frozenset, letter: frozenset) -> frozenset:
        if frozenset(a.name for a in s if isinstance(a, Atom)) != letter & el_atoms:
            return frozenset()
        out = []
        for t in cells:
            ok = True
            for g in el_temporal:
                match g:
                    case Next(sub):
                        if (g in s) != _holds(sub, t, el_atoms):
                            ok = False
                    case Until(l, r):
                        want = _holds(r, s, el_atoms) or (
                            _holds(l, s, el_atoms) and g in t)
                        if (g in s) != want:
                            ok = False
                    case Release(l, r):
                        want = _holds(r, s, el_atoms) and (
                            _holds(l, s, el_atoms) or g in t)
                        if (g in s) != want:
                            ok = False
                if not ok:
                    break
            if ok:
                out.append(t)
        return frozenset(out)

    initial_cells = frozenset(s for s in cells if _holds(neg, s, el_atoms))
    fairness = [frozenset(s for s in cells
                          if u not in s or _holds(u.right, s, el_atoms))
                for u in untils]

    k = len(fairness)
    if k == 0:
        # Any infinite run of the negation automaton is accepting.
        states: set = set()
        frontier = list(initial_cells)
        delta: dict = {}
        while frontier:
            s = frontier.pop()
            if s in states:
                continue
            states.add(s)
            for a in alphabet:
                nxt = successors(s, a)
                delta[(s, a)] = nxt
                frontier.extend(nxt)
        ordered = tuple(sorted(states, key=_cell_key))
        return Ucw(alphabet, ordered, initial_cells,
                   {(q, a): delta.get((q, a), frozenset())
                    for q in ordered for a in alphabet},
                   frozenset(ordered))

    def advance(i: int, s: frozenset) -> int:
        return (i + 1) % k if s in fairness[i] else i

    initials = frozenset((s, 0) for s in initial_cells)
    states = set()
    delta = {}
    frontier = list(initials)
    while frontier:
        q = frontier.pop()
        if q in states:
            continue
        states.add(q)
        s, i = q
        j = advance(i, s)
        for a in alphabet:
            nxt = frozenset((t, j) for t in successors(s, a))
            delta[(q, a)] = nxt
            frontier.extend(nxt)
    ordered = tuple(sorted(states, key=lambda q: (_cell_key(q[0]), q[1])))
    rejecting = frozenset(q for q in ordered if q[1] == 0 and q[0] in fairness[0])
    return Ucw(alphabet, ordered, initials & states,
               {(q, a): delta.get((q, a), frozenset()) for q in ordered for a in alphabet},
               rejecting)


def _cell_key(s: frozenset):
    return tuple(sorted(render(e) for e in s))


# ---------------------------------------------------------------------------
# Lasso acceptance


def _has_rejecting_cycle(edges: Mapping, starts: Iterable, is_rejecting) -> bool:
    """Reachable cycle through a rejecting node, via iterative Tarjan SCC."""
    reachable: set = set()
    stack = list(starts)
    while stack:
        n = stack.pop()
        if n in reachable:
            continue
        reachable.add(n)
        stack.extend(edges.get(n, ()))

    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    scc_stack: list = []
    counter = [0]

    for root in sorted(reachable, key=repr):
        if root in index:
            continue
        work = [(root, iter(sorted(edges.get(root, ()), key=repr)))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        scc_stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for child in it:
                if child not in reachable:
                    continue
                if child not in index:
                    index[child] = low[child] = counter[0]
                    counter[0] += 1
                    scc_stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(sorted(edges.get(child, ()), key=repr))))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    m = scc_stack.pop()
                    on_stack.discard(m)
                    comp.append(m)
                    if m == node:
                        break
                has_cycle = len(comp) > 1 or any(
                    m in edges.get(m, ()) for m in comp)
                if has_cycle and any(is_rejecting(m) for m in comp):
                    return True
    return False


def ucw_accepts_lasso(u: Ucw, stem: Sequence, loop: Sequence) -> bool:
    """Acceptance of the ultimately periodic word stem . loop^omega.

    Product of the automaton with the lasso positions; rejected exactly
    when some reachable product cycle contains a rejecting state.
    """
    if not loop:
        raise AutomatonError("lasso loop must be non-empty")
    word = [frozenset(a) for a in stem] + [frozenset(a) for a in loop]
    n_stem = len(stem)

    def pos_next(i: int) -> int:
        return i + 1 if i + 1 < len(word) else n_stem

    edges: dict = {}
    starts = [(q, 0) for q in u.initials]
    stack = list(starts)
    seen = set()
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        q, i = node
        succ = [(q2, pos_next(i)) for q2 in u.delta[(q, word[i])]]
        edges[node] = succ
        stack.extend(succ)

    return not _has_rejecting_cycle(edges, starts, lambda n: n[0] in u.rejecting)


# ---------------------------------------------------------------------------
# Universal co-Buechi tree automata


@dataclass
class Uct:
    letters: tuple
    directions: tuple
    states: tuple
    initial: object
    rejecting: frozenset
    delta_fn: Callable[[object, object], object]
    info: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def delta(self, q, letter):
        key = (q, letter)
        if key not in self._cache:
            f = self.delta_fn(q, letter)
            if not is_positive(f):
                raise AutomatonError("transition formula is not positive")
            self._cache[key] = f
        return self._cache[key]


def _decision_letters(actions: Sequence, agents: Sequence[str]) -> tuple:
    return tuple(product(tuple(actions), repeat=len(agents)))


def goal_automaton(binding: BindPrefix, psi: Formula, actions: Sequence,
                   agents: Sequence[str], atoms: Iterable[str]) -> Uct:
    """Tree automaton for one goal: runs the word automaton of the matrix
    along the branch selected by the valuation component of each letter.

    Letters are (valuation, atom set) pairs, the valuation a tuple aligned
    with the sorted free variables of the goal; directions are decisions.
    """
    agents = tuple(agents)
    if set(binding.agents) != set(agents):
        raise AutomatonError(
            f"binding prefix covers {sorted(binding.agents)}, expected "
            f"{sorted(agents)}")
    ucw = ltl_to_ucw(psi, atoms)
    fv = tuple(sorted(free(binding.apply(psi), agents)))
    if any(v not in binding.variables for v in fv):
        raise AutomatonError("free variables escape the binding prefix")
    var_index = {v: i for i, v in enumerate(fv)}
    directions = _decision_letters(actions, agents)
    default = tuple(actions)[0]
    valuations = tuple(product(tuple(actions), repeat=len(fv)))
    letters = tuple((v, a) for v in valuations for a in ucw.letters)
    init = "goal-init"

    def follow(v: tuple) -> tuple:
        return tuple(
            v[var_index[binding.variable_of(a)]]
            if binding.variable_of(a) in var_index else default
            for a in agents)

    def delta_fn(q, letter):
        v, sigma = letter
        d = follow(v)
        if q == init:
            return conj(
                Move(d, q2)
                for q0 in sorted(ucw.initials, key=lambda s: _state_sort(s))
                for q2 in sorted(ucw.delta[(q0, sigma)], key=_state_sort))
        return conj(Move(d, q2) for q2 in sorted(ucw.delta[(q, sigma)], key=_state_sort))

    states = (init,) + ucw.states
    return Uct(letters, directions, states, init, ucw.rejecting, delta_fn,
               info={"kind": "goal", "free_vars": fv, "ucw": ucw,
                     "agents": agents, "actions": tuple(actions)})


def _state_sort(q):
    return repr(q)


def sentence_automaton(prefix: QuantPrefix, binding: BindPrefix, psi: Formula,
                       actions: Sequence, agents: Sequence[str],
                       atoms: Iterable[str]) -> Uct:
    """Tree automaton for a principal sentence.

    Letters carry a Skolem dependence function over actions instead of a
    valuation; each transition conjoins the goal transitions for every
    universal action valuation.  The dependence-function component stays in
    the input alphabet: all automaton copies at one node must read the same
    choice, which state-guessing could not enforce.
    """
    goal = goal_automaton(binding, psi, actions, agents, atoms)
    fv = goal.info["free_vars"]
    if not set(fv) <= set(prefix.variables):
        raise AutomatonError(
            f"prefix {prefix.render()} misses goal variables {sorted(set(fv) - set(prefix.variables))}")
    ucw_letters = goal.info["ucw"].letters
    sdfs = tuple(enumerate_sdf(prefix, tuple(actions)))
    letters = tuple((theta, a) for theta in sdfs for a in ucw_letters)
    univ = prefix.universal
    var_pos = {v: i for i, v in enumerate(prefix.variables)}
    keys = tuple(product(tuple(actions), repeat=len(univ)))

    def delta_fn(q, letter):
        theta, sigma = letter
        return conj(
            goal.delta(q, (tuple(theta.row(key)[var_pos[v]] for v in fv), sigma))
            for key in keys)

    return Uct(letters, goal.directions, goal.states, goal.initial,
               goal.rejecting, delta_fn,
               info={"kind": "sentence", "goal": goal, "prefix": prefix,
                     "sdfs": sdfs, "agents": goal.info["agents"],
                     "actions": tuple(actions)})


# ---------------------------------------------------------------------------
# Full-sentence assembly


def _eval_gate(skeleton: Formula, label: frozenset) -> bool:
    match skeleton:
        case Atom(name):
            return name in label
        case Top():
            return True
        case Bot():
            return False
        case Not(s):
            return not _eval_gate(s, label)
        case And(l, r):
            return _eval_gate(l, label) and _eval_gate(r, label)
        case Or(l, r):
            return _eval_gate(l, label) or _eval_gate(r, label)
    raise AutomatonError(f"non-Boolean skeleton node: {skeleton!r}")


def assemble_full_automaton(f: Formula, agents: Sequence[str],
                            atoms: Iterable[str], actions: Sequence,
                            letter_cap: int = 200_000) -> Uct:
    """Tree automaton for a full one-goal sentence over a bounded action set.

    Each principal subsentence gets a placeholder atom.  A letter is a pair
    of a label (subset of real atoms and placeholders) and, per principal
    sentence, a triple of dependence functions: the launch table (typed by
    whether the placeholder is present), and pass-through tables for the
    positive and the dual automaton.  A monitor state walks every node and
    launches the sentence automaton (placeholder present) or its dual
    (absent); the sentence's Boolean skeleton gates the root.
    """
    agents = tuple(agents)
    actions = tuple(actions)
    base_atoms = frozenset(atoms)
    plan = one_goal_plan(f, agents)
    ap = tuple(sorted(base_atoms)) + plan.placeholders
    labels = letters_over(ap)

    pos_auts = []
    neg_auts = []
    for part in plan.parts:
        pos_auts.append(sentence_automaton(
            part.prefix, part.binding, part.matrix, actions, agents, ap))
        neg_auts.append(sentence_automaton(
            part.dual_prefix, part.binding, part.dual_matrix, actions, agents, ap))

    pos_sdfs = [aut.info["sdfs"] for aut in pos_auts]
    neg_sdfs = [aut.info["sdfs"] for aut in neg_auts]

    letters = []
    for lab in labels:
        comp_choices = []
        for i, part in enumerate(plan.parts):
            head_pool = pos_sdfs[i] if part.atom in lab else neg_sdfs[i]
            comp_choices.append(tuple(
                (head, bpos, bneg)
                for head in head_pool
                for bpos in pos_sdfs[i]
                for bneg in neg_sdfs[i]))
        for comps in product(*comp_choices):
            letters.append((lab, tuple(comps)))
            if len(letters) > letter_cap:
                raise AlphabetSizeError(
                    f"full-automaton alphabet would exceed the cap ({letter_cap})")
    letters = tuple(letters)

    directions = _decision_letters(actions, agents)
    states: list = ["root", "monitor"]
    for i, aut in enumerate(pos_auts):
        states.extend(("+", i, q) for q in aut.states if q != aut.initial)
    for i, aut in enumerate(neg_auts):
        states.extend(("-", i, q) for q in aut.states if q != aut.initial)

    def tag(i: int, positive: bool, formula):
        mark = "+" if positive else "-"
        if formula == FALSE:
            return FALSE
        moves = move_conjunction(formula)
        return PAnd(tuple(Move(m.direction, (mark, i, m.state)) for m in moves))

    def monitor_obligations(letter):
        lab, comps = letter
        parts = [conj(Move(d, "monitor") for d in directions)]
        for i, part in enumerate(plan.parts):
            positive = part.atom in lab
            aut = pos_auts[i] if positive else neg_auts[i]
            head = comps[i][0]
            parts.append(tag(i, positive, aut.delta(aut.initial, (head, lab))))
        return conj(parts)

    def delta_fn(q, letter):
        lab, comps = letter
        if q == "root":
            if not _eval_gate(plan.skeleton, lab):
                return FALSE
            return monitor_obligations(letter)
        if q == "monitor":
            return monitor_obligations(letter)
        mark, i, inner = q
        positive = mark == "+"
        aut = pos_auts[i] if positive else neg_auts[i]
        body = comps[i][1] if positive else comps[i][2]
        return tag(i, positive, aut.delta(inner, (body, lab)))

    rejecting = frozenset(
        [("+", i, q) for i, aut in enumerate(pos_auts) for q in aut.rejecting] +
        [("-", i, q) for i, aut in enumerate(neg_auts) for q in aut.rejecting])

    prune_components = tuple(
        [(("+", i), aut) for i, aut in enumerate(pos_auts)] +
        [(("-", i), aut) for i, aut in enumerate(neg_auts)])
    return Uct(letters, directions, tuple(states), "root", rejecting, delta_fn,
               info={"kind": "full", "plan": plan, "atoms": tuple(sorted(base_atoms)),
                     "agents": agents, "actions": actions,
                     "positive": tuple(pos_auts), "negative": tuple(neg_auts),
                     "prune_components": prune_components})


# ---------------------------------------------------------------------------
# Moore witnesses and membership


@dataclass(frozen=True)
class MooreWitness:
    """Finite generator of a letter-labeled decision tree."""

    directions: tuple
    nodes: tuple
    root: object
    labels: Mapping
    successor: Mapping  # (node, direction) -> node

    def __post_init__(self):
        node_set = set(self.nodes)
        if self.root not in node_set:
            raise AutomatonError("witness root must be a node")
        for n in self.nodes:
            if n not in self.labels:
                raise AutomatonError(f"witness node {n!r} has no label")
            for d in self.directions:
                if (n, d) not in self.successor:
                    raise AutomatonError(f"witness misses successor ({n!r}, {d!r})")
                if self.successor[(n, d)] not in node_set:
                    raise AutomatonError("witness successor outside the node set")
        reached = {self.root}
        stack = [self.root]
        while stack:
            n = stack.pop()
            for d in self.directions:
                m = self.successor[(n, d)]
                if m not in reached:
                    reached.add(m)
                    stack.append(m)
        if reached != node_set:
            raise AutomatonError("witness has unreachable nodes")

    def size(self) -> int:
        return len(self.nodes)


def uct_membership(w: MooreWitness, u: Uct) -> bool:
    """Acceptance of the tree generated by `w`.

    The product of witness nodes and automaton states, expanded through the
    conjunctive transition formulas, must contain no falsified gate and no
    reachable cycle through a rejecting state.
    """
    if tuple(w.directions) != tuple(u.directions):
        raise AutomatonError("witness and automaton direction sets differ")
    edges: dict = {}
    start = (w.root, u.initial)
    stack = [start]
    seen = set()
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        n, q = node
        formula = u.delta(q, w.labels[n])
        moves = move_conjunction(formula)
        if moves is None:
            return False
        succ = [(w.successor[(n, m.direction)], m.state) for m in moves]
        edges[node] = succ
        stack.extend(succ)
    return not _has_rejecting_cycle(edges, [start],
                                    lambda node: node[1] in u.rejecting)


# ---------------------------------------------------------------------------
# Hopeless obligation sets (pruning aid for the bounded emptiness search)


class _HopelessSets:
    """Obligation sets of an all-rejecting component that doom every witness.

    For a component automaton whose non-initial states are all rejecting, a
    co-located obligation set S is hopeless when for every letter either
    some obligation's gate is false or some direction's successor set is
    hopeless again.  Along any completed witness the branch then carries a
    non-empty obligation chain forever; a surviving path exists (Koenig)
    and visits rejecting states infinitely, so the witness is rejected.
    Computed as a greatest fixpoint over the reachable set family.
    """

    def __init__(self, aut: Uct, family_cap: int = 4096):
        self.aut = aut
        self.family_cap = family_cap
        self.memo: dict[frozenset, bool] = {}

    def _step(self, S: frozenset, letter):
        per: dict = {}
        for q in S:
            moves = move_conjunction(self.aut.delta(q, letter))
            if moves is None:
                return None  # a falsified gate kills the node outright
            for m in moves:
                per.setdefault(m.direction, set()).add(m.state)
        return [frozenset(v) for v in per.values() if v]

    def hopeless(self, S0: frozenset) -> bool:
        if not S0:
            return False
        if S0 in self.memo:
            return self.memo[S0]
        family: set = set()
        succ: dict = {}
        stack = [S0]
        while stack:
            S = stack.pop()
            if S in family or not S:
                continue
            family.add(S)
            if len(family) > self.family_cap:
                self.memo[S0] = False  # give up: pruning is optional
                return False
            options = []
            for letter in self.aut.letters:
                stepped = self._step(S, letter)
                options.append(stepped)
                if stepped:
                    stack.extend(T for T in stepped if T not in family)
            succ[S] = options
        kept = set(family)
        changed = True
        while changed:
            changed = False
            for S in list(kept):
                for stepped in succ[S]:
                    if stepped is None:
                        continue  # fatal letter: no escape this way
                    if not any(T in kept for T in stepped):
                        kept.discard(S)
                        changed = True
                        break
        for S in family:
            self.memo[S] = S in kept
        return S0 in kept


def _obligation_pruner(u: Uct):
    """Per-component hopeless-set checkers for a merged full automaton."""
    groups = u.info.get("prune_components")
    if not groups:
        return None
    checkers = {}
    for tag, aut in groups:
        inner = set(aut.states) - {aut.initial}
        if inner and inner <= set(aut.rejecting):
            checkers[tag] = _HopelessSets(aut)
    if not checkers:
        return None

    def prune(obligations_by_node: Mapping) -> bool:
        for states in obligations_by_node.values():
            per_tag: dict = {}
            for q in states:
                if isinstance(q, tuple) and len(q) == 3 and (q[0], q[1]) in checkers:
                    per_tag.setdefault((q[0], q[1]), set()).add(q[2])
            for tag, S in per_tag.items():
                if checkers[tag].hopeless(frozenset(S)):
                    return True
        return False

    return prune


# ---------------------------------------------------------------------------
# Bounded emptiness


@dataclass(frozen=True)
class WitnessFound:
    witness: MooreWitness
    size: int


@dataclass(frozen=True)
class EmptyUpTo:
    k_max: int


@dataclass(frozen=True)
class SearchExhausted:
    detail: str


def uct_emptiness_bounded(u: Uct, k_max: int, *,
                          time_budget: Optional[float] = None,
                          check_cap: int = 5_000_000):
    """Bounded witness search for nonemptiness.

    Tries witness sizes 1..k_max.  Within one size the search assigns node
    labels and per-direction successors in a canonical order (fresh nodes
    are numbered by first use), re-checking the partial product for
    falsified gates and rejecting cycles after every assignment.  The first
    witness found is therefore the minimal-size, lexicographically least
    one; it is re-verified through uct_membership before being returned.
    Exhausting all sizes yields EmptyUpTo; guards yield SearchExhausted.
    """
    if k_max < 1:
        raise AutomatonError("witness size cap must be at least 1")
    deadline = time.monotonic() + time_budget if time_budget else None
    checks = [0]

    letters = u.letters
    directions = u.directions
    pruner = _obligation_pruner(u)

    def out_of_budget() -> bool:
        checks[0] += 1
        if checks[0] > check_cap:
            return True
        if deadline is not None and checks[0] % 64 == 0:
            return time.monotonic() > deadline
        return False

    class Budget(Exception):
        pass

    def feasible(labels: list, succs: list) -> bool:
        """Product exploration of the assigned part; unassigned cells stop
        the expansion (optimistically assumed satisfiable)."""
        if out_of_budget():
            raise Budget()
        edges: dict = {}
        start = (0, u.initial)
        stack = [start]
        seen = set()
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            n, q = node
            if labels[n] is None:
                continue
            moves = move_conjunction(u.delta(q, labels[n]))
            if moves is None:
                return False
            succ = []
            for m in moves:
                target = succs[n].get(m.direction)
                if target is not None:
                    succ.append((target, m.state))
            edges[node] = succ
            stack.extend(succ)
        if pruner is not None:
            by_node: dict = {}
            for n, q in seen:
                by_node.setdefault(n, set()).add(q)
            if pruner(by_node):
                return False
        return not _has_rejecting_cycle(edges, [start],
                                        lambda node: node[1] in u.rejecting)

    def search(size: int) -> Optional[MooreWitness]:
        labels: list = [None] * size
        succs: list = [dict() for _ in range(size)]
        allocated = [1]

        def next_cell():
            """Next unassigned cell in canonical order, or None when done."""
            for n in range(allocated[0]):
                if labels[n] is None:
                    return ("label", n)
                for d in directions:
                    if d not in succs[n]:
                        return ("succ", n, d)
            return None

        def assign(cell) -> Optional[MooreWitness]:
            if cell is None:
                w = MooreWitness(directions, tuple(range(allocated[0])), 0,
                                 {n: labels[n] for n in range(allocated[0])},
                                 {(n, d): succs[n][d]
                                  for n in range(allocated[0]) for d in directions})
                if uct_membership(w, u):
                    return w
                return None
            if cell[0] == "label":
                n = cell[1]
                for letter in letters:
                    labels[n] = letter
                    if feasible(labels, succs):
                        got = assign(next_cell())
                        if got is not None:
                            return got
                    labels[n] = None
                return None
            _, n, d = cell
            limit = allocated[0] + (1 if allocated[0] < size else 0)
            for target in range(limit):
                fresh = target == allocated[0]
                if fresh:
                    allocated[0] += 1
                succs[n][d] = target
                if feasible(labels, succs):
                    got = assign(next_cell())
                    if got is not None:
                        return got
                del succs[n][d]
                if fresh:
                    allocated[0] -= 1
            return None

        return assign(next_cell())

    try:
        for size in range(1, k_max + 1):
            got = search(size)
            if got is not None:
                return WitnessFound(got, got.size())
    except Budget:
        return SearchExhausted(
            f"search budget exhausted after {checks[0]} feasibility checks")
    return EmptyUpTo(k_max)


# ---------------------------------------------------------------------------
# Encoding generators (finite presentations of labeled trees)


def assignment_encoding(g: Cgs, s, strategies: Mapping[str, MooreStrategy],
                        fv: Sequence[str]) -> MooreWitness:
    """Generator of the assignment-labeling encoding of Moore strategies.

    Nodes are (state, memory profile) pairs; the label at a node is the
    tuple of actions the strategies output there plus the state label.
    """
    fv = tuple(fv)
    directions = _decision_letters(g.actions, g.agents)
    root = (s, tuple(strategies[v].init for v in fv))
    nodes = {root}
    labels = {}
    successor = {}
    frontier = [root]
    while frontier:
        node = frontier.pop()
        st, mems = node
        labels[node] = (tuple(strategies[v].output(m) for v, m in zip(fv, mems)),
                        g.label[st])
        for d in directions:
            t = g.transition[(st, d)]
            mems2 = tuple(strategies[v].update(m, t) for v, m in zip(fv, mems))
            child = (t, mems2)
            successor[(node, d)] = child
            if child not in nodes:
                nodes.add(child)
                frontier.append(child)
    return MooreWitness(directions, tuple(sorted(nodes, key=repr)), root,
                        labels, successor)


def dependence_encoding(g: Cgs, s, adjoint: Mapping[tuple, SkolemDepFn],
                        default: SkolemDepFn, horizon: int) -> MooreWitness:
    """Generator of a behavioral dependence-labeling encoding.

    Within the horizon, nodes are tracks from s and carry the adjoint's
    table for their track; beyond it every state gets an absorbing node
    labeled with the default table (harmless for next-bounded matrices).
    """
    directions = _decision_letters(g.actions, g.agents)
    nodes = set()
    labels = {}
    successor = {}
    root = (s,)
    frontier = [root]
    while frontier:
        node = frontier.pop()
        if node in nodes:
            continue
        nodes.add(node)
        if isinstance(node, tuple) and node and node[0] == "deep":
            st = node[1]
            labels[node] = (default, g.label[st])
            for d in directions:
                successor[(node, d)] = ("deep", g.transition[(st, d)])
                frontier.append(("deep", g.transition[(st, d)]))
            continue
        st = node[-1]
        labels[node] = (adjoint[node], g.label[st])
        for d in directions:
            t = g.transition[(st, d)]
            child = node + (t,) if len(node) < horizon else ("deep", t)
            successor[(node, d)] = child
            frontier.append(child)
    return MooreWitness(directions, tuple(sorted(nodes, key=repr)), root,
                        labels, successor)


# ---------------------------------------------------------------------------
# DOT rendering


def _dot_escape(x) -> str:
    return str(x).replace('"', r'\"')


def to_dot(obj) -> str:
    """Deterministic DOT text; rejecting states get doubled borders."""
    lines = ["digraph automaton {"]
    if isinstance(obj, Ucw):
        names = {q: f"q{i}" for i, q in enumerate(obj.states)}
        for q in obj.states:
            shape = ", peripheries=2" if q in obj.rejecting else ""
            init = ", style=bold" if q in obj.initials else ""
            lines.append(f'  {names[q]} [label="{_dot_escape(q)}"{shape}{init}];')
        for q in obj.states:
            for a in obj.letters:
                for q2 in sorted(obj.delta[(q, a)], key=_state_sort):
                    label = "{" + ",".join(sorted(a)) + "}"
                    lines.append(
                        f'  {names[q]} -> {names[q2]} [label="{label}"];')
    elif isinstance(obj, Uct):
        names = {q: f"q{i}" for i, q in enumerate(obj.states)}
        for q in obj.states:
            shape = ", peripheries=2" if q in obj.rejecting else ""
            init = ", style=bold" if q == obj.initial else ""
            lines.append(f'  {names[q]} [label="{_dot_escape(q)}"{shape}{init}];')
        for q in obj.states:
            seen = set()
            for letter in obj.letters:
                moves = move_conjunction(obj.delta(q, letter))
                if moves is None:
                    continue
                for m in moves:
                    key = (q, m.state, m.direction)
                    if key in seen:
                        continue
                    seen.add(key)
                    lines.append(
                        f'  {names[q]} -> {names[m.state]} '
                        f'[label="{_dot_escape(m.direction)}"];')
    elif isinstance(obj, MooreWitness):
        names = {n: f"n{i}" for i, n in enumerate(obj.nodes)}
        for n in obj.nodes:
            root = ", style=bold" if n == obj.root else ""
            lines.append(
                f'  {names[n]} [label="{_dot_escape(obj.labels[n])}"{root}];')
        for n in obj.nodes:
            for d in obj.directions:
                lines.append(
                    f'  {names[n]} -> {names[obj.successor[(n, d)]]} '
                    f'[label="{_dot_escape(d)}"];')
    else:
        raise AutomatonError(f"cannot render {type(obj).__name__} as DOT")
    lines.append("}")
    return "\n".join(lines) + "\n"
