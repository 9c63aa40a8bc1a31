"""Exact brute-force semantics for the next-bounded fragment, plus the
Skolem dependence machinery (enumeration, counting, adjoints, behavioral
evaluation).

Oracle scope: formulas whose only temporal operator is X.  With a finite
next-depth h, truth depends on strategy values on tracks of length at most
h from the evaluation state, so quantifiers can be enumerated exhaustively
over explicit horizon tables (see `temporal_depth`).  Until/Release are
rejected rather than approximated; exactness is the whole point of this
module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Mapping, Optional, Sequence

from .formula import (
    And, Atom, Bind, Bot, Exists, Forall, Formula, FormulaError, GoalLeaf,
    Next, Not, Or, QuantPrefix, Release, Top, Until, free, matrix_tree,
    peel_quantifiers, render,
)
from .game import Cgs, State, TableStrategy


class OracleError(Exception):
    pass


class OracleScopeError(OracleError):
    """Instance outside the oracle's exact scope (U/R, or size guards)."""


class NotBehavioralError(OracleError):
    """A strategy-level dependence function with no adjoint."""


# ---------------------------------------------------------------------------
# Temporal depth


def temporal_depth(f: Formula):
    """Maximal X-nesting, or math.inf as soon as an U/R occurs.

    F/G desugar to U/R, so any eventuality makes the formula infinite-depth
    for the oracle.
    """
    match f:
        case Atom() | Top() | Bot():
            return 0
        case Not(s) | Exists(_, s) | Forall(_, s) | Bind(_, _, s):
            return temporal_depth(s)
        case And(l, r) | Or(l, r):
            return max(temporal_depth(l), temporal_depth(r))
        case Next(s):
            return 1 + temporal_depth(s)
        case Until() | Release():
            return math.inf
    raise TypeError(f"not a formula node: {f!r}")


# ---------------------------------------------------------------------------
# Skolem dependence functions over an arbitrary finite domain


@dataclass(frozen=True)
class SkolemDepFn:
    """Table from universal valuations to full valuations over `domain`.

    Keys are value tuples aligned with prefix.universal, values with
    prefix.variables.  Construction checks the restriction property (the
    table extends its argument) and the dependence property (existential
    values depend only on their dependence set).
    """

    prefix: QuantPrefix
    domain: tuple
    entries: tuple[tuple[tuple, tuple], ...]

    def __post_init__(self):
        univ = self.prefix.universal
        allv = self.prefix.variables
        table = dict(self.entries)
        object.__setattr__(self, "_table", table)
        if len(table) != len(self.entries):
            raise OracleError("duplicate keys in dependence table")
        expected = set(product(self.domain, repeat=len(univ)))
        if set(table) != expected:
            raise OracleError("dependence table is not total on the universal valuations")
        pos = {v: i for i, v in enumerate(allv)}
        for key, out in table.items():
            if len(out) != len(allv):
                raise OracleError("malformed table row")
            for x, val in zip(univ, key):
                if out[pos[x]] != val:
                    raise OracleError(
                        f"restriction property violated at {x} for key {key}")
        for x in self.prefix.existential:
            dep = self.prefix.dependencies(x)
            dep_idx = [i for i, v in enumerate(univ) if v in dep]
            seen: dict[tuple, object] = {}
            for key, out in table.items():
                restr = tuple(key[i] for i in dep_idx)
                val = out[pos[x]]
                if restr in seen and seen[restr] != val:
                    raise OracleError(
                        f"dependence property violated for {x} on {restr}")
                seen[restr] = val

    def apply(self, valuation) -> dict:
        """Full valuation for a universal valuation (mapping or tuple)."""
        univ = self.prefix.universal
        if isinstance(valuation, Mapping):
            key = tuple(valuation[x] for x in univ)
        else:
            key = tuple(valuation)
        table = self._table
        if key not in table:
            raise OracleError(f"valuation outside the table: {key}")
        return dict(zip(self.prefix.variables, table[key]))

    def row(self, key: tuple) -> tuple:
        """Output tuple (aligned with prefix.variables) for a key tuple."""
        return self._table[key]

    def as_dict(self) -> dict[tuple, tuple]:
        return dict(self.entries)


def apply_sdf(theta: SkolemDepFn, valuation) -> dict:
    return theta.apply(valuation)


def count_sdf(prefix: QuantPrefix, d: int) -> int:
    """Closed-form number of dependence functions over a d-element domain."""
    if d < 1:
        raise OracleError("domain size must be at least 1")
    n = 1
    for x in prefix.existential:
        n *= d ** (d ** len(prefix.dependencies(x)))
    return n


def enumerate_sdf(prefix: QuantPrefix, domain: Sequence) -> Iterator[SkolemDepFn]:
    """Every dependence function exactly once.

    Deterministic order: one cell per (existential variable, dependence
    restriction), cells sorted by (prefix position, restriction), cell
    values enumerated lexicographically over the domain order.
    """
    dom = tuple(domain)
    if not dom:
        raise OracleError("domain must be non-empty")
    univ = prefix.universal
    exis = prefix.existential
    dep_idx = {x: [i for i, v in enumerate(univ) if v in prefix.dependencies(x)]
               for x in exis}
    cells = [(x, restr) for x in exis
             for restr in product(dom, repeat=len(dep_idx[x]))]
    keys = list(product(dom, repeat=len(univ)))
    allv = prefix.variables
    univ_pos = {v: i for i, v in enumerate(univ)}

    for combo in product(dom, repeat=len(cells)):
        chosen = dict(zip(cells, combo))
        entries = []
        for key in keys:
            out = []
            for v in allv:
                if v in univ_pos:
                    out.append(key[univ_pos[v]])
                else:
                    restr = tuple(key[i] for i in dep_idx[v])
                    out.append(chosen[(v, restr)])
            entries.append((key, tuple(out)))
        yield SkolemDepFn(prefix, dom, tuple(entries))


def identity_sdf(prefix: QuantPrefix, domain: Sequence) -> SkolemDepFn:
    if prefix.existential:
        raise OracleError("identity dependence function needs an all-universal prefix")
    return next(enumerate_sdf(prefix, domain))


# ---------------------------------------------------------------------------
# Adjoints: strategy-level vs track-indexed action-level tables

StrategyTuple = tuple  # actions aligned with a fixed track list


@dataclass(frozen=True)
class AdjointMap:
    """Track-indexed family of action-level dependence functions."""

    prefix: QuantPrefix
    actions: tuple
    tracks: tuple
    maps: tuple[SkolemDepFn, ...]

    def __post_init__(self):
        if len(self.tracks) != len(self.maps):
            raise OracleError("one action-level table per track is required")
        for m in self.maps:
            if m.prefix != self.prefix or m.domain != self.actions:
                raise OracleError("adjoint component over the wrong prefix or domain")

    def at(self, track) -> SkolemDepFn:
        return self.maps[self.tracks.index(track)]


def strategy_space(actions: Sequence, tracks: Sequence) -> tuple[StrategyTuple, ...]:
    """All explicit strategies over `tracks` as action tuples, in lex order."""
    return tuple(product(tuple(actions), repeat=len(tracks)))


def adjoint_of(theta: SkolemDepFn, actions: Sequence, tracks: Sequence) -> AdjointMap:
    """The adjoint of a strategy-level dependence function.

    `theta` must range over strategies represented as action tuples aligned
    with `tracks`.  Raises NotBehavioralError when some track's action-level
    table would be ill-defined (two universal valuations agreeing on the
    track but mapped to different outputs there).
    """
    acts = tuple(actions)
    trks = tuple(tracks)
    univ = theta.prefix.universal
    allv = theta.prefix.variables
    maps = []
    for ti in range(len(trks)):
        rows: dict[tuple, tuple] = {}
        for key, out in theta.entries:
            flat_key = tuple(strat[ti] for strat in key)
            flat_out = tuple(out[i][ti] for i in range(len(allv)))
            if flat_key in rows and rows[flat_key] != flat_out:
                raise NotBehavioralError(
                    f"no adjoint: inconsistent values at track index {ti} "
                    f"for action valuation {dict(zip(univ, flat_key))}")
            rows[flat_key] = flat_out
        if len(rows) != len(acts) ** len(univ):
            raise NotBehavioralError(
                f"no adjoint: track index {ti} does not see every action valuation")
        maps.append(SkolemDepFn(theta.prefix, acts, tuple(sorted(rows.items()))))
    return AdjointMap(theta.prefix, acts, trks, tuple(maps))


def sdf_from_adjoint(adj: AdjointMap) -> SkolemDepFn:
    """The strategy-level dependence function determined by an adjoint."""
    prefix = adj.prefix
    univ = prefix.universal
    allv = prefix.variables
    domain = strategy_space(adj.actions, adj.tracks)
    tables = [m.as_dict() for m in adj.maps]
    entries = []
    for key in product(domain, repeat=len(univ)):
        out = []
        for i, v in enumerate(allv):
            strat = tuple(
                tables[ti][tuple(strat_k[ti] for strat_k in key)][i]
                for ti in range(len(adj.tracks)))
            out.append(strat)
        entries.append((key, tuple(out)))
    return SkolemDepFn(prefix, domain, tuple(entries))


def is_behavioral(theta: SkolemDepFn, actions: Sequence, tracks: Sequence) -> bool:
    try:
        adjoint_of(theta, actions, tracks)
        return True
    except NotBehavioralError:
        return False


def count_strategy_sdfs(prefix: QuantPrefix, m: int, d: int) -> int:
    """All dependence functions over explicit strategies on m tracks."""
    n = 1
    for x in prefix.existential:
        n *= d ** (m * d ** (m * len(prefix.dependencies(x))))
    return n


def count_behavioral_sdfs(prefix: QuantPrefix, m: int, d: int) -> int:
    """Those admitting adjoints: one action-level table per track."""
    n = 1
    for x in prefix.existential:
        n *= d ** (m * d ** len(prefix.dependencies(x)))
    return n


# ---------------------------------------------------------------------------
# Track and strategy enumeration on a game


def horizon_tracks(g: Cgs, s: State, depth: int) -> tuple[tuple[State, ...], ...]:
    """Tracks from s of length 1..depth, ordered by (length, state order)."""
    order = {st: i for i, st in enumerate(g.states)}
    levels: list[list[tuple[State, ...]]] = [[(s,)]] if depth >= 1 else [[]]
    for _ in range(depth - 1):
        nxt = []
        for t in levels[-1]:
            for succ in sorted(g.successors(t[-1]), key=order.__getitem__):
                nxt.append(t + (succ,))
        levels.append(nxt)
    return tuple(t for level in levels for t in level)


def strategy_tables(g: Cgs, s: State, depth: int,
                    max_strategies: int = 65536) -> tuple[tuple, dict]:
    """All explicit horizon strategies from s, as canonical table tuples.

    Returns (tracks, {}) lazily: the caller materializes tables by zipping a
    combo with the track list.  Guarded by `max_strategies`.
    """
    tracks = horizon_tracks(g, s, depth)
    n = len(g.actions) ** len(tracks)
    if n > max_strategies:
        raise OracleScopeError(
            f"{n} strategies at state {s!r} exceed the oracle cap {max_strategies}")
    return tracks, {}


def _strategy_dicts(g: Cgs, s: State, depth: int,
                    max_strategies: int) -> list[dict[tuple[State, ...], object]]:
    tracks, _ = strategy_tables(g, s, depth, max_strategies)
    return [dict(zip(tracks, combo))
            for combo in product(g.actions, repeat=len(tracks))]


# ---------------------------------------------------------------------------
# Direct (quantifier-enumerating) evaluation


def _check_next_only(f: Formula):
    if temporal_depth(f) is math.inf:
        raise OracleScopeError(
            f"the oracle evaluates next-only formulas, got: {render(f)}")


def eval_direct(g: Cgs, asg, s: State, f: Formula,
                max_strategies: int = 65536) -> bool:
    """Truth of a next-only formula under exhaustive strategy quantification.

    `asg` maps free variables/agents to TableStrategy values rooted at `s`
    (or is an Assignment over such).  Quantifiers enumerate every explicit
    horizon table from the current evaluation state, with the horizon taken
    from the quantified subformula's next-depth.
    """
    _check_next_only(f)
    entries: dict[str, tuple[int, Mapping]] = {}
    source = asg if isinstance(asg, Mapping) else {k: asg[k] for k in asg.keys()}
    depth_f = temporal_depth(f)
    for key, strat in source.items():
        if isinstance(strat, TableStrategy):
            if strat.root != s:
                raise OracleError(
                    f"strategy for {key!r} rooted at {strat.root!r}, not {s!r}")
            if strat.horizon < depth_f:
                raise OracleError(
                    f"strategy horizon {strat.horizon} for {key!r} is smaller "
                    f"than the formula depth {depth_f}")
            entries[key] = (0, strat.table)
        else:
            raise OracleError("eval_direct needs explicit TableStrategy values")
    missing = free(f, g.agents) - set(entries)
    if missing:
        raise OracleError(f"assignment misses free names: {sorted(missing)}")

    def decide_at(chi: dict, rho: tuple[State, ...]) -> State:
        d = []
        for a in g.agents:
            if a not in chi:
                raise OracleError(f"agent {a!r} unbound under a temporal operator")
            k, table = chi[a]
            key = rho[k:]
            if key not in table:
                raise OracleError(f"track outside horizon for agent {a!r}: {key}")
            d.append(table[key])
        return g.transition[(rho[-1], tuple(d))]

    def ev(chi: dict, rho: tuple[State, ...], h: Formula) -> bool:
        match h:
            case Atom(name):
                return name in g.label[rho[-1]]
            case Top():
                return True
            case Bot():
                return False
            case Not(sub):
                return not ev(chi, rho, sub)
            case And(l, r):
                return ev(chi, rho, l) and ev(chi, rho, r)
            case Or(l, r):
                return ev(chi, rho, l) or ev(chi, rho, r)
            case Next(sub):
                nxt = decide_at(chi, rho)
                return ev(chi, rho + (nxt,), sub)
            case Bind(agent, var, sub):
                if var not in chi:
                    if agent not in free(sub, g.agents):
                        # The agent's strategy cannot matter below; the
                        # variable may legitimately be unassigned then.
                        return ev(chi, rho, sub)
                    raise OracleError(f"binding reads unassigned variable {var!r}")
                chi2 = dict(chi)
                chi2[agent] = chi[var]
                return ev(chi2, rho, sub)
            case Exists(var, sub) | Forall(var, sub):
                here = rho[-1]
                k = len(rho) - 1
                depth = temporal_depth(sub)
                want_all = isinstance(h, Forall)
                for table in _strategy_dicts(g, here, depth, max_strategies):
                    chi2 = dict(chi)
                    chi2[var] = (k, table)
                    result = ev(chi2, rho, sub)
                    if result and not want_all:
                        return True
                    if not result and want_all:
                        return False
                return want_all
        raise TypeError(f"not a formula node: {h!r}")

    return ev(entries, (s,), f)


# ---------------------------------------------------------------------------
# Skolemization: existence of a dependence function over horizon strategies


def _principal_parts(g: Cgs, f: Formula) -> tuple[QuantPrefix, Formula]:
    prefix, body = peel_quantifiers(f)
    fr = free(body, g.agents)
    # Vacuously quantified variables are tolerated (the trivial-goal case);
    # stray free names are not.
    if not fr <= set(prefix.variables):
        raise OracleError(
            f"not a principal sentence: prefix {prefix.render()} vs free "
            f"names {sorted(fr)}")
    return prefix, body


def skolemization_check(g: Cgs, f: Formula, max_strategies: int = 4096,
                        max_nodes: int = 2_000_000) -> bool:
    """Existence of a Skolem dependence function over horizon strategies.

    True iff some dependence table theta over the explicit horizon
    strategies satisfies: for every universal valuation chi, the goal holds
    under theta(chi).  Searched directly over the per-existential Skolem
    cells with chronological backtracking; independent of the quantifier
    recursion in eval_direct.
    """
    _check_next_only(f)
    prefix, body = _principal_parts(g, f)
    depth = temporal_depth(body)
    tracks, _ = strategy_tables(g, g.initial, depth, max_strategies)
    domain = strategy_space(g.actions, tracks)
    univ = prefix.universal
    exis = prefix.existential
    dep_idx = {x: [i for i, v in enumerate(univ) if v in prefix.dependencies(x)]
               for x in exis}
    keys = list(product(domain, repeat=len(univ)))
    if len(keys) * max(len(domain), 1) > max_nodes:
        raise OracleScopeError("skolemization search space exceeds the cap")

    def run_goal(full: dict[str, StrategyTuple]) -> bool:
        strat_map = {x: TableStrategy(g.initial, depth, dict(zip(tracks, tup)))
                     for x, tup in full.items()}
        return eval_direct(g, strat_map, g.initial, body,
                           max_strategies=max_strategies)

    cells: dict[tuple[str, tuple], StrategyTuple] = {}

    def backtrack(i: int) -> bool:
        if i == len(keys):
            return True
        key = keys[i]
        needed = []
        for x in exis:
            restr = tuple(key[j] for j in dep_idx[x])
            if (x, restr) not in cells:
                needed.append((x, restr))
        for combo in product(domain, repeat=len(needed)):
            for cell, val in zip(needed, combo):
                cells[cell] = val
            full = dict(zip(univ, key))
            for x in exis:
                restr = tuple(key[j] for j in dep_idx[x])
                full[x] = cells[(x, restr)]
            if run_goal(full) and backtrack(i + 1):
                return True
            for cell in needed:
                del cells[cell]
        return False

    return backtrack(0)


# ---------------------------------------------------------------------------
# Behavioral evaluation: per-track action-level dependence functions


def _eval_matrix(m: Formula, labels: Sequence[frozenset[str]], i: int = 0) -> bool:
    match m:
        case Atom(name):
            return name in labels[i]
        case Top():
            return True
        case Bot():
            return False
        case Not(s):
            return not _eval_matrix(s, labels, i)
        case And(l, r):
            return _eval_matrix(l, labels, i) and _eval_matrix(r, labels, i)
        case Or(l, r):
            return _eval_matrix(l, labels, i) or _eval_matrix(r, labels, i)
        case Next(s):
            return _eval_matrix(s, labels, i + 1)
    raise OracleScopeError(f"not a next-only matrix: {render(m)}")


def _tree_goals(tree) -> list[GoalLeaf]:
    match tree[0]:
        case "goal":
            return [tree[1]]
        case "lit":
            return []
        case "and" | "or":
            return _tree_goals(tree[1]) + _tree_goals(tree[2])
    raise OracleError(f"bad matrix tree node {tree[0]!r}")


def eval_behavioral(g: Cgs, s: State, f: Formula,
                    max_candidates: int = 2_000_000) -> bool:
    """Existence of a behavioral dependence function witnessing the sentence.

    The sentence is a quantification prefix over a Boolean combination of
    full goals with a next-only matrix.  A candidate is one action-level
    dependence function per track within the horizon; it wins if for every
    assignment of universal horizon strategies, the goals' plays satisfy
    the Boolean combination.
    """
    _check_next_only(f)
    prefix, body = _principal_parts(g, f)
    try:
        tree = matrix_tree(body, g.agents)
    except FormulaError as e:
        raise OracleScopeError(f"unsupported body for the behavioral oracle: {e}")
    goals = _tree_goals(tree)
    for leaf in goals:
        _eval_matrix_guard(leaf.matrix)
    depth = temporal_depth(body)
    if depth == 0:
        return _eval_tree(tree, {}, [g.label[s]], g)
    tracks = horizon_tracks(g, s, depth)
    sm_list = list(enumerate_sdf(prefix, g.actions))
    univ = prefix.universal
    n_univ_tables = (len(g.actions) ** len(tracks)) ** len(univ)
    cost = (len(sm_list) ** len(tracks)) * max(n_univ_tables, 1)
    if cost > max_candidates:
        raise OracleScopeError(
            f"behavioral search space {cost} exceeds the cap {max_candidates}")

    univ_tables = [dict(zip(tracks, combo))
                   for combo in product(g.actions, repeat=len(tracks))]
    univ_assignments = [dict(zip(univ, choice))
                        for choice in product(univ_tables, repeat=len(univ))]

    track_index = {t: i for i, t in enumerate(tracks)}

    def plays_ok(theta_hat: Sequence[SkolemDepFn], chi: dict) -> bool:
        label_cache: dict[tuple, list[frozenset[str]]] = {}

        def labels_for(binding) -> list[frozenset[str]]:
            if binding in label_cache:
                return label_cache[binding]
            agent_var = dict(binding)
            rho = (s,)
            for _ in range(depth):
                v = {x: chi[x][rho] for x in univ}
                full = theta_hat[track_index[rho]].apply(
                    tuple(v[x] for x in univ))
                d = tuple(full[agent_var[a]] for a in g.agents)
                rho = rho + (g.transition[(rho[-1], d)],)
            out = [g.label[st] for st in rho]
            label_cache[binding] = out
            return out

        def evt(tree) -> bool:
            match tree[0]:
                case "goal":
                    leaf = tree[1]
                    return _eval_matrix(leaf.matrix, labels_for(leaf.binding))
                case "lit":
                    return _eval_matrix(tree[1], [g.label[s]])
                case "and":
                    return evt(tree[1]) and evt(tree[2])
                case "or":
                    return evt(tree[1]) or evt(tree[2])
            raise OracleError("bad matrix tree")

        return evt(tree)

    recent_failures: list[dict] = []
    for candidate in product(sm_list, repeat=len(tracks)):
        ok = True
        for chi in recent_failures:
            if not plays_ok(candidate, chi):
                ok = False
                break
        if ok:
            for chi in univ_assignments:
                if not plays_ok(candidate, chi):
                    if chi not in recent_failures:
                        recent_failures.insert(0, chi)
                        del recent_failures[8:]
                    ok = False
                    break
        if ok:
            return True
    return False


def _eval_matrix_guard(m: Formula):
    if temporal_depth(m) is math.inf:
        raise OracleScopeError("goal matrix is not next-only")
    bad = [n for n in _collect_nodes(m) if isinstance(n, (Exists, Forall, Bind))]
    if bad:
        raise OracleScopeError(
            "behavioral oracle needs quantifier-free goal matrices")


def _collect_nodes(f: Formula):
    from .formula import children
    out = [f]
    for c in children(f):
        out.extend(_collect_nodes(c))
    return out


def _eval_tree(tree, chi, labels, g) -> bool:
    match tree[0]:
        case "goal":
            return _eval_matrix(tree[1].matrix, labels)
        case "lit":
            return _eval_matrix(tree[1], labels)
        case "and":
            return _eval_tree(tree[1], chi, labels, g) and _eval_tree(tree[2], chi, labels, g)
        case "or":
            return _eval_tree(tree[1], chi, labels, g) or _eval_tree(tree[2], chi, labels, g)
    raise OracleError("bad matrix tree")
