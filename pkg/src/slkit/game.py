"""Finite concurrent game structures and their dynamics.

A decision is a total map from agents to actions, represented as a tuple of
actions aligned with the structure's agent order.  Transition functions are
total on states x decisions; document loading validates totality and names
the first missing pair.

Strategies come in two forms:

* Moore machines for infinite-play operations.  The machine starts in its
  initial memory, consumes each state of a track after the first (the root
  is the known starting context), and outputs the action for the whole
  track from the final memory.  Advancing the initial memory along a play
  prefix implements the global-translation shift.
* Explicit horizon tables for the brute-force oracle: finite maps from
  tracks (from a root state, length capped by a horizon) to actions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Iterator, Mapping, Optional

State = str
Action = object  # actions are ints or strings; compared by equality
Decision = tuple  # actions aligned with Cgs.agents


class GameError(Exception):
    pass


class TotalityError(GameError):
    """A (state, decision) pair has no transition (the message names it)."""


class DocumentError(GameError):
    pass


class UnwindSizeError(GameError):
    pass


# ---------------------------------------------------------------------------
# Concurrent game structures


@dataclass(frozen=True)
class Cgs:
    atoms: frozenset[str]
    agents: tuple[str, ...]
    actions: tuple[Action, ...]
    states: tuple[State, ...]
    initial: State
    label: Mapping[State, frozenset[str]]
    transition: Mapping[tuple[State, Decision], State]

    def __post_init__(self):
        if len(set(self.agents)) != len(self.agents) or not self.agents:
            raise GameError("agents must be a non-empty duplicate-free tuple")
        if len(set(self.states)) != len(self.states) or not self.states:
            raise GameError("states must be a non-empty duplicate-free tuple")
        if len(set(self.actions)) != len(self.actions) or not self.actions:
            raise GameError("actions must be a non-empty duplicate-free tuple")
        if self.initial not in self.states:
            raise GameError(f"initial state {self.initial!r} not a state")
        for s in self.states:
            if s not in self.label:
                raise GameError(f"state {s!r} has no label")
            extra = self.label[s] - self.atoms
            if extra:
                raise GameError(f"state {s!r} labeled with unknown atoms {sorted(extra)}")
        for s in self.states:
            for d in self.decisions():
                if (s, d) not in self.transition:
                    raise TotalityError(
                        f"missing transition for state {s!r} and decision "
                        f"{self.decision_map(d)}")
                t = self.transition[(s, d)]
                if t not in set(self.states):
                    raise GameError(f"transition target {t!r} is not a state")

    def decisions(self) -> Iterator[Decision]:
        return product(self.actions, repeat=len(self.agents))

    def decision_of(self, assignment: Mapping[str, Action]) -> Decision:
        try:
            return tuple(assignment[a] for a in self.agents)
        except KeyError as e:
            raise GameError(f"decision misses agent {e.args[0]!r}") from None

    def decision_map(self, d: Decision) -> dict[str, Action]:
        return dict(zip(self.agents, d))

    def step(self, s: State, d: Decision | Mapping[str, Action]) -> State:
        if isinstance(d, Mapping):
            d = self.decision_of(d)
        return self.transition[(s, d)]

    def successors(self, s: State) -> tuple[State, ...]:
        seen: list[State] = []
        for d in self.decisions():
            t = self.transition[(s, d)]
            if t not in seen:
                seen.append(t)
        return tuple(seen)

    def is_track(self, states: Iterable[State]) -> bool:
        seq = list(states)
        if not seq or any(s not in set(self.states) for s in seq):
            return False
        return all(any(self.transition[(a, d)] == b for d in self.decisions())
                   for a, b in zip(seq, seq[1:]))


def step(g: Cgs, s: State, d) -> State:
    return g.step(s, d)


# ---------------------------------------------------------------------------
# Lassos (ultimately periodic paths)


@dataclass(frozen=True)
class Lasso:
    stem: tuple[State, ...]
    loop: tuple[State, ...]

    def __post_init__(self):
        if not self.loop:
            raise GameError("lasso loop must be non-empty")

    def state_at(self, i: int) -> State:
        if i < len(self.stem):
            return self.stem[i]
        return self.loop[(i - len(self.stem)) % len(self.loop)]

    def prefix(self, length: int) -> tuple[State, ...]:
        return tuple(self.state_at(i) for i in range(length))

    def __repr__(self):
        stem = "".join(f"{s}." for s in self.stem)
        return f"{stem}({'.'.join(self.loop)})^w"


# ---------------------------------------------------------------------------
# Strategies


@dataclass(frozen=True)
class MooreStrategy:
    """Finite-memory strategy observing the states of the track after its root."""

    init: object
    update: Callable[[object, State], object]
    output: Callable[[object], Action]

    def advanced(self, states: Iterable[State]) -> "MooreStrategy":
        """Initial memory pushed through `states` (a play prefix minus its root)."""
        m = self.init
        for s in states:
            m = self.update(m, s)
        return MooreStrategy(m, self.update, self.output)

    def act(self, track: Iterable[State]) -> Action:
        seq = list(track)
        if not seq:
            raise GameError("strategies are defined on non-trivial tracks only")
        m = self.init
        for s in seq[1:]:
            m = self.update(m, s)
        return self.output(m)

    @staticmethod
    def constant(action: Action) -> "MooreStrategy":
        return MooreStrategy(None, lambda m, s: None, lambda m: action)

    @staticmethod
    def state_count_parity(target: State, odd_action: Action, even_action: Action,
                           root_is_target: bool) -> "MooreStrategy":
        """Action by parity of the number of occurrences of `target` in the track."""
        return MooreStrategy(
            1 if root_is_target else 0,
            lambda m, s: (m + (1 if s == target else 0)) % 2,
            lambda m: odd_action if m == 1 else even_action,
        )


@dataclass(frozen=True)
class TableStrategy:
    """Explicit horizon strategy: total on tracks from `root` of length <= horizon."""

    root: State
    horizon: int
    table: Mapping[tuple[State, ...], Action]

    def act(self, track: Iterable[State]) -> Action:
        key = tuple(track)
        if key not in self.table:
            raise GameError(f"track outside the strategy horizon: {key}")
        return self.table[key]


def table_to_moore(strategy: TableStrategy, default: Action) -> MooreStrategy:
    """Moore form of a horizon table; beyond the horizon plays `default`."""
    root = strategy.root
    table = dict(strategy.table)
    h = strategy.horizon

    def update(mem, s):
        if mem is None:
            return None
        track = mem + (s,)
        return track if len(track) <= max(h, 1) else None

    def output(mem):
        if mem is not None and mem in table:
            return table[mem]
        return default

    return MooreStrategy((root,), update, output)


# ---------------------------------------------------------------------------
# Assignments


class Assignment:
    """Partial map from variables and agents to strategies (copy-on-write)."""

    __slots__ = ("_map",)

    def __init__(self, mapping: Optional[Mapping[str, object]] = None):
        self._map = dict(mapping or {})

    def redefine(self, key: str, strategy) -> "Assignment":
        new = dict(self._map)
        new[key] = strategy
        return Assignment(new)

    def __getitem__(self, key: str):
        return self._map[key]

    def __contains__(self, key: str) -> bool:
        return key in self._map

    def keys(self):
        return self._map.keys()

    def domain(self) -> frozenset[str]:
        return frozenset(self._map)

    def is_complete(self, g: Cgs) -> bool:
        return set(g.agents) <= set(self._map)

    def __eq__(self, other):
        return isinstance(other, Assignment) and self._map == other._map

    def __repr__(self):
        return f"Assignment({sorted(self._map)})"


def redefine(asg: Assignment, key: str, strategy) -> Assignment:
    return asg.redefine(key, strategy)


# ---------------------------------------------------------------------------
# Plays and global translation


def play(g: Cgs, asg: Assignment, s: State) -> Lasso:
    """The unique play of a complete Moore assignment from `s`, as a lasso.

    The product of states and memory profiles is finite, so the play is
    ultimately periodic; the returned lasso starts looping at the first
    repeated configuration.
    """
    if not asg.is_complete(g):
        raise GameError("play needs a complete assignment")
    strategies = {}
    for a in g.agents:
        f = asg[a]
        if not isinstance(f, MooreStrategy):
            raise GameError(
                "play needs Moore strategies (explicit horizon tables cannot "
                "produce an infinite play)")
        strategies[a] = f

    mems = {a: strategies[a].init for a in g.agents}
    current = s
    seen: dict[tuple, int] = {}
    states: list[State] = []
    while True:
        config = (current, tuple(mems[a] for a in g.agents))
        if config in seen:
            i = seen[config]
            return Lasso(tuple(states[:i]), tuple(states[i:]))
        seen[config] = len(states)
        states.append(current)
        d = tuple(strategies[a].output(mems[a]) for a in g.agents)
        current = g.transition[(current, d)]
        for a in g.agents:
            mems[a] = strategies[a].update(mems[a], current)


def translate(g: Cgs, asg: Assignment, s: State, i: int) -> tuple[Assignment, State]:
    """The i-th global translation of (asg, s): shifted assignment and state.

    Each Moore strategy has its initial memory advanced along the first i
    steps of the play, so the translated pair generates the play suffix.
    """
    if i < 0:
        raise GameError("translation index must be non-negative")
    pi = play(g, asg, s)
    prefix = pi.prefix(i + 1)
    shifted = {}
    for key in asg.keys():
        f = asg[key]
        if not isinstance(f, MooreStrategy):
            raise GameError("translate needs Moore strategies")
        shifted[key] = f.advanced(prefix[1:])
    return Assignment(shifted), pi.state_at(i)


# ---------------------------------------------------------------------------
# Decision-unwinding


@dataclass(frozen=True)
class UnwindPrefix:
    """Depth-bounded prefix of the decision-unwinding of a Cgs.

    Nodes are decision sequences; `to_state` is the surjection onto the
    underlying structure, and labels are inherited through it.
    """

    game: Cgs
    depth: int
    to_state: Mapping[tuple[Decision, ...], State]

    def nodes(self) -> tuple[tuple[Decision, ...], ...]:
        return tuple(sorted(self.to_state, key=lambda n: (len(n), n)))

    def label(self, node: tuple[Decision, ...]) -> frozenset[str]:
        return self.game.label[self.to_state[node]]


def unwind(g: Cgs, depth: int, node_cap: int = 200_000) -> UnwindPrefix:
    if depth < 0:
        raise GameError("unwinding depth must be non-negative")
    n_dec = len(g.actions) ** len(g.agents)
    total = sum(n_dec ** i for i in range(depth + 1))
    if total > node_cap:
        raise UnwindSizeError(
            f"unwinding would have {total} nodes (cap {node_cap})")
    mapping: dict[tuple[Decision, ...], State] = {(): g.initial}
    frontier = [()]
    for _ in range(depth):
        new_frontier = []
        for node in frontier:
            s = mapping[node]
            for d in g.decisions():
                child = node + (d,)
                mapping[child] = g.transition[(s, d)]
                new_frontier.append(child)
        frontier = new_frontier
    return UnwindPrefix(g, depth, mapping)


# ---------------------------------------------------------------------------
# Document format (JSON with canonical ordering)


def _canonical_action(a) -> str:
    return json.dumps(a, sort_keys=True)


def load_cgs(text: str) -> Cgs:
    """Parse and validate a CGS document.

    Top-level keys: ap, agents, actions, states, initial, label,
    transitions.  A transition row is {"from": state, "decision":
    agent->action map or "*", "to": state}; a "*" row is the default target
    for every decision of that state not covered by an explicit row.
    Duplicate (from, decision) pairs with conflicting targets are rejected,
    as are documents whose transition table is not total.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(f"not valid JSON: {e}") from None
    for key in ("ap", "agents", "actions", "states", "initial", "label", "transitions"):
        if key not in doc:
            raise DocumentError(f"missing top-level key: {key}")
    atoms = frozenset(doc["ap"])
    agents = tuple(doc["agents"])
    actions = tuple(doc["actions"])
    states = tuple(doc["states"])
    state_set = set(states)
    initial = doc["initial"]
    label = {}
    for s, names in doc["label"].items():
        if s not in state_set:
            raise DocumentError(f"label for unknown state {s!r}")
        label[s] = frozenset(names)
    for s in states:
        label.setdefault(s, frozenset())

    explicit: dict[tuple[State, Decision], State] = {}
    defaults: dict[State, State] = {}
    for row in doc["transitions"]:
        src, dec, dst = row.get("from"), row.get("decision"), row.get("to")
        if src not in state_set or dst not in state_set:
            raise DocumentError(f"transition row with unknown state: {row}")
        if dec == "*":
            if src in defaults and defaults[src] != dst:
                raise DocumentError(f"conflicting default rows for state {src!r}")
            defaults[src] = dst
            continue
        if not isinstance(dec, dict):
            raise DocumentError(f"decision must be an agent->action map or '*': {row}")
        if set(dec) != set(agents):
            raise DocumentError(f"decision does not cover the agents exactly: {row}")
        key = (src, tuple(dec[a] for a in agents))
        for a, act in dec.items():
            if act not in set(actions):
                raise DocumentError(f"unknown action {act!r} in row {row}")
        if key in explicit and explicit[key] != dst:
            raise DocumentError(
                f"duplicate transitions with conflicting targets for state "
                f"{src!r} and decision {dec}")
        explicit[key] = dst

    transition: dict[tuple[State, Decision], State] = {}
    for s in states:
        for d in product(actions, repeat=len(agents)):
            if (s, d) in explicit:
                transition[(s, d)] = explicit[(s, d)]
            elif s in defaults:
                transition[(s, d)] = defaults[s]
            else:
                raise TotalityError(
                    f"missing transition for state {s!r} and decision "
                    f"{dict(zip(agents, d))}")
    return Cgs(atoms, agents, actions, states, initial, label, transition)


def save_cgs(g: Cgs) -> str:
    """Canonical document for `g`: explicit rows, sorted, two-space indent."""
    def act_key(a):
        return (str(type(a).__name__), str(a))

    rows = []
    for s in sorted(g.states):
        for d in sorted(g.decisions(), key=lambda d: tuple(act_key(a) for a in d)):
            rows.append({
                "from": s,
                "decision": {a: v for a, v in zip(g.agents, d)},
                "to": g.transition[(s, d)],
            })
    doc = {
        "ap": sorted(g.atoms),
        "agents": list(g.agents),
        "actions": list(g.actions),
        "states": list(g.states),
        "initial": g.initial,
        "label": {s: sorted(g.label[s]) for s in sorted(g.states)},
        "transitions": rows,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Built-in structures


def _gstar(n: int) -> Cgs:
    """Finite truncation of the ordering witness: actions 0..n-1.

    From s0 a decision goes to s1 exactly when agent a's action is at most
    agent b's; s1 and s2 absorb.  Only s1 is labeled with p.
    """
    if n < 1:
        raise GameError("gstar needs at least one action")
    actions = tuple(range(n))
    states = ("s0", "s1", "s2")
    label = {"s0": frozenset(), "s1": frozenset({"p"}), "s2": frozenset()}
    transition = {}
    for d in product(actions, repeat=2):
        transition[("s0", d)] = "s1" if d[0] <= d[1] else "s2"
        transition[("s1", d)] = "s1"
        transition[("s2", d)] = "s2"
    return Cgs(frozenset({"p"}), ("a", "b"), actions, states, "s0", label, transition)


def _domino_witness(system, tiling: Mapping[tuple[int, int], str], n: int) -> Cgs:
    """Finite truncation of the domino-solution witness over actions 0..n-1.

    States are s0 plus (p, t) and (!p, t) per tile t; s0 moves to the state
    whose tile is the tiling entry at (a-action, b-action), with the p side
    chosen by the action comparison; tile states absorb.
    """
    if n < 1:
        raise GameError("domino witness needs at least one action")
    tiles = tuple(system.tiles)
    for i in range(n):
        for j in range(n):
            if (i, j) not in tiling:
                raise GameError(f"tiling table misses cell {(i, j)}")
            if tiling[(i, j)] not in set(tiles):
                raise GameError(f"tiling uses unknown tile {tiling[(i, j)]!r}")
    actions = tuple(range(n))
    states = ["s0"]
    label = {"s0": frozenset()}
    for t in tiles:
        states.append(f"p_{t}")
        label[f"p_{t}"] = frozenset({"p", t})
        states.append(f"np_{t}")
        label[f"np_{t}"] = frozenset({t})
    transition = {}
    for d in product(actions, repeat=2):
        t = tiling[(d[0], d[1])]
        side = "p" if d[0] <= d[1] else "np"
        transition[("s0", d)] = f"{side}_{t}"
        for s in states[1:]:
            transition[(s, d)] = s
    atoms = frozenset({"p"}) | frozenset(tiles)
    return Cgs(atoms, ("a", "b"), actions, tuple(states), "s0", label, transition)


def _ps() -> Cgs:
    """Preemptive scheduling protocol: two processes and a scheduler.

    States: si (idle), s1/s2/s12 (requests pending), sp1/sp2 (granted).
    Process actions: 0 = stay silent, 1 = request (at a granted state the
    owner's 1 releases the resource).  The scheduler breaks request ties at
    s12 (0 grants P1, 1 grants P2) and decides preemption at granted states.
    Only the six transitions pinned by the running play example are forced;
    the remaining rows are reconstructions consistent with the prose.
    """
    agents = ("P1", "P2", "S")
    actions = (0, 1)
    states = ("si", "s1", "s2", "s12", "sp1", "sp2")
    label = {
        "si": frozenset(),
        "s1": frozenset({"r1"}),
        "s2": frozenset({"r2"}),
        "s12": frozenset({"r1", "r2"}),
        "sp1": frozenset({"g1"}),
        "sp2": frozenset({"g2"}),
    }
    transition = {}
    for d in product(actions, repeat=3):
        p1, p2, s = d
        # idle: requests move to the pending states
        transition[("si", d)] = {(0, 0): "si", (1, 0): "s1",
                                 (0, 1): "s2", (1, 1): "s12"}[(p1, p2)]
        # single pending request: granted unless the other also requests
        transition[("s1", d)] = "s12" if p2 == 1 else "sp1"
        transition[("s2", d)] = "s12" if p1 == 1 else "sp2"
        # competition: the scheduler picks the winner
        transition[("s12", d)] = "sp1" if s == 0 else "sp2"
        # granted: owner may release; otherwise the scheduler may preempt
        # when the other process requests
        transition[("sp1", d)] = ("si" if p1 == 1 else
                                  ("sp2" if (p2 == 1 and s == 1) else "sp1"))
        transition[("sp2", d)] = ("si" if p2 == 1 else
                                  ("sp1" if (p1 == 1 and s == 1) else "sp2"))
    return Cgs(frozenset({"r1", "r2", "g1", "g2"}), agents, actions, states,
               "si", label, transition)


def _ppd() -> Cgs:
    """Prisoners and police's dilemma.

    Actions 0/1 mean cooperate/defect for the accomplices and wait/act for
    the police (at the release states, 0 maintains and 1 releases, so the
    all-zero police strategy avoids the both-free state).  The transitions
    are reconstructions from the prose; the jail state sj is reachable but
    carries no pinned behavior.
    """
    agents = ("A1", "A2", "P")
    actions = (0, 1)
    states = ("si", "sA1", "sA2", "sj", "sA1j", "sA2j", "sA12")
    label = {
        "si": frozenset(),
        "sA1": frozenset({"f1"}),
        "sA2": frozenset({"f2"}),
        "sj": frozenset(),
        "sA1j": frozenset({"f1"}),
        "sA2j": frozenset({"f2"}),
        "sA12": frozenset({"f1", "f2"}),
    }
    transition = {}
    for d in product(actions, repeat=3):
        a1, a2, p = d
        if p == 0:
            # spontaneous defection: lone defector goes free for good, the
            # other waits in jail for a possible release; both defecting is
            # treated as under interrogation
            target = {(0, 0): "si", (1, 0): "sA1j",
                      (0, 1): "sA2j", (1, 1): "sj"}[(a1, a2)]
        else:
            # interrogation round: the classic dilemma
            target = {(0, 0): "si", (1, 0): "sA1",
                      (0, 1): "sA2", (1, 1): "sj"}[(a1, a2)]
        transition[("si", d)] = target
        transition[("sA1j", d)] = "sA12" if p == 1 else "sA1j"
        transition[("sA2j", d)] = "sA12" if p == 1 else "sA2j"
        for absorbing in ("sA1", "sA2", "sj", "sA12"):
            transition[(absorbing, d)] = absorbing
    return Cgs(frozenset({"f1", "f2"}), agents, actions, states, "si",
               label, transition)


def builtin(name: str, *, n: int = 2, system=None,
            tiling: Optional[Mapping[tuple[int, int], str]] = None) -> Cgs:
    """Named structures: ppd, ps, gstar (n actions), domino_witness."""
    match name:
        case "ppd":
            return _ppd()
        case "ps":
            return _ps()
        case "gstar":
            return _gstar(n)
        case "domino_witness":
            if system is None or tiling is None:
                raise GameError("domino_witness needs a system and a tiling table")
            return _domino_witness(system, tiling, n)
    raise GameError(f"unknown builtin structure: {name!r}")


BUILTIN_NAMES = ("ppd", "ps", "gstar", "domino_witness")
