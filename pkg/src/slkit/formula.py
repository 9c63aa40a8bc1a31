"""Strategy logic formulas: syntax, parsing, printing, and structural analyses.

The surface grammar (ASCII) is::

    phi := "true" | "false" | ident
         | "!" phi | "X" phi | "F" phi | "G" phi
         | "<<x>>" phi | "[[x]]" phi | "(a,x)" phi
         | phi "U" phi | phi "R" phi
         | phi "&" phi | phi "|" phi | phi "->" phi | phi "<->" phi
         | "(" phi ")"

Precedence: unary operators bind tightest, then U/R (right associative),
then "&", then "|", then "->"/"<->" (right associative).  "F p" and "G p"
are sugar for "true U p" and "false R p" and are desugared while parsing;
"->" and "<->" are expanded into "!/|/&" before AST construction.

Agents and variables live in disjoint namespaces.  The grammar alone cannot
tell them apart, so parsing takes a declaration of the agent set (and
optionally closed variable/atom sets); names used in quantifier or binding
positions are checked, or inferred when the declaration leaves those sets
open.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional


class FormulaError(Exception):
    """Base class for formula-layer errors."""


class FormulaSyntaxError(FormulaError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UndeclaredIdentifierError(FormulaError):
    pass


class IdentifierClashError(FormulaError):
    """A name was used both as an agent and a variable/atom (or similar)."""


class NotASentenceError(FormulaError):
    pass


class LibraryError(FormulaError):
    pass


RESERVED = {"true", "false", "X", "U", "R", "F", "G"}

_IDENT_RE = re.compile(r"[A-Za-z_@][A-Za-z0-9_']*")


# ---------------------------------------------------------------------------
# Abstract syntax


class Formula:
    """Base class for strategy logic formula nodes (immutable)."""

    __slots__ = ()


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    sub: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    sub: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    sub: Formula


@dataclass(frozen=True)
class Bind(Formula):
    agent: str
    var: str
    sub: Formula


def children(f: Formula) -> tuple[Formula, ...]:
    match f:
        case Atom() | Top() | Bot():
            return ()
        case Not(s) | Next(s) | Exists(_, s) | Forall(_, s) | Bind(_, _, s):
            return (s,)
        case And(l, r) | Or(l, r) | Until(l, r) | Release(l, r):
            return (l, r)
    raise TypeError(f"not a formula node: {f!r}")


def size(f: Formula) -> int:
    return 1 + sum(size(c) for c in children(f))


def subformulas(f: Formula) -> frozenset[Formula]:
    """Reflexive-transitive closure of the child relation on the desugared AST."""
    seen: set[Formula] = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if g in seen:
            continue
        seen.add(g)
        stack.extend(children(g))
    return frozenset(seen)


def atoms_of(f: Formula) -> frozenset[str]:
    return frozenset(g.name for g in subformulas(f) if isinstance(g, Atom))


def used_names(f: Formula) -> tuple[frozenset[str], frozenset[str], frozenset[str]]:
    """(atom names, binding agents, variables) appearing anywhere in `f`."""
    atoms: set[str] = set()
    agents: set[str] = set()
    variables: set[str] = set()
    for g in subformulas(f):
        match g:
            case Atom(name):
                atoms.add(name)
            case Bind(agent, var, _):
                agents.add(agent)
                variables.add(var)
            case Exists(var, _) | Forall(var, _):
                variables.add(var)
    return frozenset(atoms), frozenset(agents), frozenset(variables)


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class Decl:
    """Disjoint name sets for atoms, agents, and variables.

    `variables` / `atoms` may be None, meaning the set is open: names are
    inferred from their syntactic position while parsing.  The agent set is
    always explicit and non-empty.
    """

    agents: frozenset[str]
    variables: Optional[frozenset[str]] = None
    atoms: Optional[frozenset[str]] = None

    def __post_init__(self):
        if not self.agents:
            raise IdentifierClashError("the agent set must be non-empty")
        for name in self.agents | (self.variables or frozenset()) | (self.atoms or frozenset()):
            if name in RESERVED:
                raise IdentifierClashError(f"reserved word used as a name: {name}")
            if not _IDENT_RE.fullmatch(name):
                raise IdentifierClashError(f"not a valid identifier: {name}")
        if self.variables is not None and self.agents & self.variables:
            raise IdentifierClashError(
                f"agent/variable clash: {sorted(self.agents & self.variables)}")
        if self.atoms is not None:
            for other in (self.agents, self.variables or frozenset()):
                if self.atoms & other:
                    raise IdentifierClashError(
                        f"atom name clash: {sorted(self.atoms & other)}")

    @staticmethod
    def make(agents: Iterable[str],
             variables: Optional[Iterable[str]] = None,
             atoms: Optional[Iterable[str]] = None) -> "Decl":
        return Decl(
            frozenset(agents),
            None if variables is None else frozenset(variables),
            None if atoms is None else frozenset(atoms),
        )


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<dlangle><<)|(?P<drangle>>>)|(?P<dlbrack>\[\[)|(?P<drbrack>\]\])"
    r"|(?P<iff><->)|(?P<imp>->)|(?P<lpar>\()|(?P<rpar>\))|(?P<comma>,)"
    r"|(?P<not>!)|(?P<and>&)|(?P<or>\|)|(?P<ident>[A-Za-z_][A-Za-z0-9_']*))"
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.lastgroup is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise FormulaSyntaxError(f"unexpected character {stripped[0]!r}",
                                     len(text) - len(stripped))
        kind = m.lastgroup
        tok = m.group(kind)
        start = m.start(kind)
        if kind == "ident" and tok in RESERVED:
            kind = tok
        tokens.append(_Token(kind, tok, start))
        pos = m.end()
    tokens.append(_Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], decl: Decl):
        self.tokens = tokens
        self.i = 0
        self.decl = decl
        self.seen_vars: set[str] = set()
        self.seen_atoms: set[str] = set()

    def peek(self, offset: int = 0) -> _Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise FormulaSyntaxError(
                f"expected {kind}, found {tok.text or 'end of input'!r}", tok.pos)
        self.i += 1
        return tok

    # -- role checking ------------------------------------------------------

    def _variable(self, tok: _Token) -> str:
        name = tok.text
        if name in self.decl.agents:
            raise IdentifierClashError(
                f"{name} is declared as an agent but used as a variable")
        if self.decl.variables is not None:
            if name not in self.decl.variables:
                raise UndeclaredIdentifierError(f"undeclared variable: {name}")
        elif name in self.seen_atoms or (self.decl.atoms and name in self.decl.atoms):
            raise IdentifierClashError(
                f"{name} is used both as an atom and as a variable")
        self.seen_vars.add(name)
        return name

    def _agent(self, tok: _Token) -> str:
        name = tok.text
        if name not in self.decl.agents:
            if name in self.seen_vars or (self.decl.variables and name in self.decl.variables):
                raise IdentifierClashError(
                    f"{name} is a variable but appears in agent position")
            raise UndeclaredIdentifierError(f"undeclared agent: {name}")
        return name

    def _atom(self, tok: _Token) -> str:
        name = tok.text
        if name in self.decl.agents:
            raise IdentifierClashError(
                f"{name} is declared as an agent but used as an atom")
        if name in self.seen_vars or (self.decl.variables and name in self.decl.variables):
            raise IdentifierClashError(
                f"{name} is a variable but appears in atom position")
        if self.decl.atoms is not None and name not in self.decl.atoms:
            raise UndeclaredIdentifierError(f"undeclared atom: {name}")
        self.seen_atoms.add(name)
        return name

    # -- grammar ------------------------------------------------------------

    def parse(self) -> Formula:
        f = self.implication()
        tok = self.peek()
        if tok.kind != "eof":
            raise FormulaSyntaxError(f"unexpected {tok.text!r}", tok.pos)
        return f

    def implication(self) -> Formula:
        left = self.disjunction()
        tok = self.peek()
        if tok.kind == "imp":
            self.i += 1
            right = self.implication()
            return Or(Not(left), right)
        if tok.kind == "iff":
            self.i += 1
            right = self.implication()
            return And(Or(Not(left), right), Or(Not(right), left))
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.peek().kind == "or":
            self.i += 1
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.temporal()
        while self.peek().kind == "and":
            self.i += 1
            f = And(f, self.temporal())
        return f

    def temporal(self) -> Formula:
        left = self.unary()
        tok = self.peek()
        if tok.kind == "U":
            self.i += 1
            return Until(left, self.temporal())
        if tok.kind == "R":
            self.i += 1
            return Release(left, self.temporal())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        match tok.kind:
            case "not":
                self.i += 1
                return Not(self.unary())
            case "X":
                self.i += 1
                return Next(self.unary())
            case "F":
                self.i += 1
                return Until(Top(), self.unary())
            case "G":
                self.i += 1
                return Release(Bot(), self.unary())
            case "dlangle":
                self.i += 1
                var = self._variable(self.take("ident"))
                self.take("drangle")
                return Exists(var, self.unary())
            case "dlbrack":
                self.i += 1
                var = self._variable(self.take("ident"))
                self.take("drbrack")
                return Forall(var, self.unary())
            case "true":
                self.i += 1
                return Top()
            case "false":
                self.i += 1
                return Bot()
            case "ident":
                self.i += 1
                return Atom(self._atom(tok))
            case "lpar":
                # "(a,x) phi" is a binding; "(phi)" is grouping.
                if self.peek(1).kind == "ident" and self.peek(2).kind == "comma":
                    self.i += 1
                    agent = self._agent(self.take("ident"))
                    self.take("comma")
                    var = self._variable(self.take("ident"))
                    self.take("rpar")
                    return Bind(agent, var, self.unary())
                self.i += 1
                f = self.implication()
                self.take("rpar")
                return f
        raise FormulaSyntaxError(
            f"expected a formula, found {tok.text or 'end of input'!r}", tok.pos)


def parse(text: str, decl: Decl) -> Formula:
    """Parse `text` into a desugared AST under the given declarations."""
    return _Parser(_tokenize(text), decl).parse()


# ---------------------------------------------------------------------------
# Rendering

_PREC_OR = 1
_PREC_AND = 2
_PREC_UR = 3
_PREC_UNARY = 4


def _prec(f: Formula) -> int:
    match f:
        case Or():
            return _PREC_OR
        case And():
            return _PREC_AND
        case Until(Top(), _) | Release(Bot(), _):
            return _PREC_UNARY
        case Until() | Release():
            return _PREC_UR
        case _:
            return 5


def _wrap(f: Formula, minimum: int) -> str:
    text = render(f)
    return f"({text})" if _prec(f) < minimum else text


def render(f: Formula) -> str:
    """Formula source text; `parse(render(f))` is structurally equal to `f`.

    `true U phi` and `false R phi` are printed back with the F/G sugar.
    """
    match f:
        case Atom(name):
            return name
        case Top():
            return "true"
        case Bot():
            return "false"
        case Not(s):
            return f"!{_wrap(s, _PREC_UNARY)}"
        case Next(s):
            return f"X {_wrap(s, _PREC_UNARY)}"
        case Until(Top(), s):
            return f"F {_wrap(s, _PREC_UNARY)}"
        case Release(Bot(), s):
            return f"G {_wrap(s, _PREC_UNARY)}"
        case Until(l, r):
            return f"{_wrap(l, _PREC_UNARY)} U {_wrap(r, _PREC_UR)}"
        case Release(l, r):
            return f"{_wrap(l, _PREC_UNARY)} R {_wrap(r, _PREC_UR)}"
        case And(l, r):
            return f"{_wrap(l, _PREC_AND)} & {_wrap(r, _PREC_AND + 1)}"
        case Or(l, r):
            return f"{_wrap(l, _PREC_OR)} | {_wrap(r, _PREC_OR + 1)}"
        case Exists(var, s):
            return f"<<{var}>> {_wrap(s, _PREC_UNARY)}"
        case Forall(var, s):
            return f"[[{var}]] {_wrap(s, _PREC_UNARY)}"
        case Bind(agent, var, s):
            return f"({agent},{var}) {_wrap(s, _PREC_UNARY)}"
    raise TypeError(f"not a formula node: {f!r}")


# ---------------------------------------------------------------------------
# Free agents/variables and sentences


def free(f: Formula, agents: Iterable[str]) -> frozenset[str]:
    """Free agents and variables of `f`, by the eight-case recursion.

    Temporal operators make every agent free; a binding (a,x) removes the
    agent a and adds the variable x only when a was free below.
    """
    ag = frozenset(agents)

    def go(g: Formula) -> frozenset[str]:
        match g:
            case Atom() | Top() | Bot():
                return frozenset()
            case Not(s):
                return go(s)
            case And(l, r) | Or(l, r):
                return go(l) | go(r)
            case Next(s):
                return ag | go(s)
            case Until(l, r) | Release(l, r):
                return ag | go(l) | go(r)
            case Exists(var, s) | Forall(var, s):
                return go(s) - {var}
            case Bind(agent, var, s):
                inner = go(s)
                if agent in inner:
                    return (inner - {agent}) | {var}
                return inner
        raise TypeError(f"not a formula node: {g!r}")

    return go(f)


@dataclass(frozen=True)
class Closure:
    sentence: bool
    agent_closed: bool
    variable_closed: bool


def closedness(f: Formula, agents: Iterable[str]) -> Closure:
    ag = frozenset(agents)
    fr = free(f, ag)
    return Closure(
        sentence=not fr,
        agent_closed=not (fr & ag),
        variable_closed=not (fr - ag),
    )


def is_sentence(f: Formula, agents: Iterable[str]) -> bool:
    return not free(f, agents)


# ---------------------------------------------------------------------------
# Normal forms


def negate(f: Formula) -> Formula:
    """Push one negation through `f` using the dualities of the logic."""
    match f:
        case Top():
            return Bot()
        case Bot():
            return Top()
        case Not(s):
            return s
        case Atom():
            return Not(f)
        case And(l, r):
            return Or(negate(l), negate(r))
        case Or(l, r):
            return And(negate(l), negate(r))
        case Next(s):
            return Next(negate(s))
        case Until(l, r):
            return Release(negate(l), negate(r))
        case Release(l, r):
            return Until(negate(l), negate(r))
        case Exists(var, s):
            return Forall(var, negate(s))
        case Forall(var, s):
            return Exists(var, negate(s))
        case Bind(agent, var, s):
            return Bind(agent, var, negate(s))
    raise TypeError(f"not a formula node: {f!r}")


def to_pnf(f: Formula) -> Formula:
    """Positive normal form: negation applied only to atoms."""
    match f:
        case Atom() | Top() | Bot():
            return f
        case Not(Atom()):
            return f
        case Not(s):
            return to_pnf(negate(s))
        case And(l, r):
            return And(to_pnf(l), to_pnf(r))
        case Or(l, r):
            return Or(to_pnf(l), to_pnf(r))
        case Next(s):
            return Next(to_pnf(s))
        case Until(l, r):
            return Until(to_pnf(l), to_pnf(r))
        case Release(l, r):
            return Release(to_pnf(l), to_pnf(r))
        case Exists(var, s):
            return Exists(var, to_pnf(s))
        case Forall(var, s):
            return Forall(var, to_pnf(s))
        case Bind(agent, var, s):
            return Bind(agent, var, to_pnf(s))
    raise TypeError(f"not a formula node: {f!r}")


def to_enf(f: Formula) -> Formula:
    """Existential normal form: every universal quantifier becomes !<<x>>!."""
    match f:
        case Atom() | Top() | Bot():
            return f
        case Not(s):
            return Not(to_enf(s))
        case And(l, r):
            return And(to_enf(l), to_enf(r))
        case Or(l, r):
            return Or(to_enf(l), to_enf(r))
        case Next(s):
            return Next(to_enf(s))
        case Until(l, r):
            return Until(to_enf(l), to_enf(r))
        case Release(l, r):
            return Release(to_enf(l), to_enf(r))
        case Exists(var, s):
            return Exists(var, to_enf(s))
        case Forall(var, s):
            return Not(Exists(var, Not(to_enf(s))))
        case Bind(agent, var, s):
            return Bind(agent, var, to_enf(s))
    raise TypeError(f"not a formula node: {f!r}")


def normalize(f: Formula, target: str) -> Formula:
    if target == "pnf":
        return to_pnf(f)
    if target == "enf":
        return to_enf(f)
    raise ValueError(f"unknown normal form: {target!r}")


# ---------------------------------------------------------------------------
# Quantification and binding prefixes


@dataclass(frozen=True)
class QuantPrefix:
    """Ordered quantifier word; each variable occurs exactly once."""

    steps: tuple[tuple[str, bool], ...]  # (variable, is_existential)

    def __post_init__(self):
        names = [v for v, _ in self.steps]
        if len(names) != len(set(names)):
            raise FormulaError(f"duplicate variable in quantification prefix: {names}")

    @staticmethod
    def make(*steps: tuple[str, bool]) -> "QuantPrefix":
        return QuantPrefix(tuple(steps))

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.steps)

    @property
    def existential(self) -> tuple[str, ...]:
        return tuple(v for v, e in self.steps if e)

    @property
    def universal(self) -> tuple[str, ...]:
        return tuple(v for v, e in self.steps if not e)

    def dependencies(self, y: str) -> frozenset[str]:
        """Universal variables preceding the existential variable `y`."""
        deps: set[str] = set()
        for v, e in self.steps:
            if v == y:
                return frozenset(deps) if e else frozenset()
            if not e:
                deps.add(v)
        raise FormulaError(f"variable not in prefix: {y}")

    def dual(self) -> "QuantPrefix":
        return QuantPrefix(tuple((v, not e) for v, e in self.steps))

    def apply(self, body: Formula) -> Formula:
        for v, e in reversed(self.steps):
            body = Exists(v, body) if e else Forall(v, body)
        return body

    def render(self) -> str:
        return "".join(f"<<{v}>>" if e else f"[[{v}]]" for v, e in self.steps)


@dataclass(frozen=True)
class PrefixAnalysis:
    existential: tuple[str, ...]
    universal: tuple[str, ...]
    dependencies: Mapping[str, frozenset[str]]
    dual: QuantPrefix


def prefix_analysis(p: QuantPrefix) -> PrefixAnalysis:
    return PrefixAnalysis(
        existential=p.existential,
        universal=p.universal,
        dependencies={v: p.dependencies(v) for v in p.variables},
        dual=p.dual(),
    )


@dataclass(frozen=True)
class BindPrefix:
    """Ordered binding word; each agent occurs exactly once."""

    pairs: tuple[tuple[str, str], ...]  # (agent, variable)

    def __post_init__(self):
        names = [a for a, _ in self.pairs]
        if len(names) != len(set(names)):
            raise FormulaError(f"duplicate agent in binding prefix: {names}")

    @property
    def agents(self) -> tuple[str, ...]:
        return tuple(a for a, _ in self.pairs)

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(x for _, x in self.pairs)

    def variable_of(self, agent: str) -> str:
        for a, x in self.pairs:
            if a == agent:
                return x
        raise FormulaError(f"agent not in binding prefix: {agent}")

    def apply(self, body: Formula) -> Formula:
        for a, x in reversed(self.pairs):
            body = Bind(a, x, body)
        return body


def peel_quantifiers(f: Formula) -> tuple[QuantPrefix, Formula]:
    """Split the maximal leading quantifier run off `f`."""
    steps: list[tuple[str, bool]] = []
    while True:
        match f:
            case Exists(var, s):
                steps.append((var, True))
                f = s
            case Forall(var, s):
                steps.append((var, False))
                f = s
            case _:
                return QuantPrefix(tuple(steps)), f


def peel_bindings(f: Formula) -> tuple[tuple[tuple[str, str], ...], Formula]:
    """Split the maximal leading binding run off `f` (agents may repeat)."""
    pairs: list[tuple[str, str]] = []
    while isinstance(f, Bind):
        pairs.append((f.agent, f.var))
        f = f.sub
    return tuple(pairs), f


# ---------------------------------------------------------------------------
# Fragment classification

SL1G = "SL1G"
SLBG = "SLBG"
SLFULL = "SLFull"

_ORDER = {SL1G: 0, SLBG: 1, SLFULL: 2}


def _worst(*kinds: str) -> str:
    return max(kinds, key=_ORDER.__getitem__, default=SL1G)


@dataclass(frozen=True)
class FragmentClass:
    kind: str
    principal: tuple[Formula, ...]

    @property
    def is_one_goal(self) -> bool:
        return self.kind == SL1G

    @property
    def is_boolean_goal(self) -> bool:
        return self.kind in (SL1G, SLBG)


class _Classifier:
    """Shape analysis over the PNF form of a sentence.

    A sentence is a Boolean combination of literals and quantified blocks.
    A block is a maximal quantifier run over a body made of binding
    prefixes, Boolean connectives, inner (possibly open) quantified blocks,
    and LTL matrices whose only strategic parts are closed principal
    subsentences.  One-goal shape additionally demands that each block is a
    full prefix followed directly by one full binding prefix and a matrix.
    """

    def __init__(self, agents: frozenset[str]):
        self.agents = agents
        self.principal: list[Formula] = []

    def classify(self, f: Formula) -> str:
        return self._boolean(f)

    def _boolean(self, f: Formula) -> str:
        match f:
            case Atom() | Top() | Bot() | Not(Atom()):
                return SL1G
            case And(l, r) | Or(l, r):
                return _worst(self._boolean(l), self._boolean(r))
            case Exists() | Forall():
                return self._block(f, frozenset())
            case Bind():
                return self._body(f, frozenset(), {})
            case _:
                return SLFULL

    def _block(self, f: Formula, outer_scope: frozenset[str]) -> str:
        try:
            prefix, body = peel_quantifiers(f)
        except FormulaError:
            return SLFULL  # duplicate variable within one run
        scope = frozenset(prefix.variables)
        if scope & outer_scope:
            return SLFULL  # shadowed quantification
        body_free = free(body, self.agents)
        if not free(f, self.agents) and body_free == scope:
            # Closed block with an exact prefix: a principal (sub)sentence.
            self.principal.append(f)
        # Vacuous quantification breaks the prefix/free-variable coupling.
        if not scope <= body_free:
            return SLFULL
        if not (body_free - self.agents) <= scope | outer_scope:
            return SLFULL
        if body_free & self.agents:
            return SLFULL  # free agents leak out of the block body
        return self._body(body, scope | outer_scope, {})

    def _body(self, f: Formula, scope: frozenset[str],
              bound: dict[str, str]) -> str:
        match f:
            case Bind(agent, var, s):
                if agent in bound:
                    return SLFULL
                if var not in scope:
                    return SLFULL
                new_bound = dict(bound)
                new_bound[agent] = var
                if set(new_bound) == self.agents:
                    return SL1G if self._matrix(s) else SLFULL
                return self._body(s, scope, new_bound)
            case And(l, r) | Or(l, r):
                k = _worst(self._body(l, scope, bound), self._body(r, scope, bound))
                return _worst(k, SLBG)
            case Not(Atom()) | Atom() | Top() | Bot():
                return SLBG if bound else SL1G
            case Exists() | Forall():
                if bound:
                    return SLFULL
                if not free(f, self.agents):
                    # Closed inner sentence at matrix level: fine for Boolean
                    # goals, reclassified on its own.
                    inner = self._block(f, frozenset())
                    return _worst(inner, SLBG)
                return _worst(self._block(f, scope), SLBG)
            case _:
                return SLFULL

    def _matrix(self, f: Formula) -> bool:
        """LTL over atoms and closed principal subsentences."""
        match f:
            case Atom() | Top() | Bot():
                return True
            case Not(s) | Next(s):
                return self._matrix(s)
            case And(l, r) | Or(l, r) | Until(l, r) | Release(l, r):
                return self._matrix(l) and self._matrix(r)
            case Exists() | Forall():
                if free(f, self.agents):
                    return False
                return self._block(f, frozenset()) != SLFULL
            case Bind():
                return False
        return False


def classify(f: Formula, agents: Iterable[str]) -> FragmentClass:
    """Fragment of the sentence `f`: SL1G, SLBG, or SLFull.

    Works on the PNF-pushed form, so negations of principal subsentences are
    folded into dual prefixes before the shape analysis.  Also returns the
    principal subsentences discovered (outermost first).
    """
    ag = frozenset(agents)
    if free(f, ag):
        raise NotASentenceError(f"not a sentence: free({render(f)}) = "
                                f"{sorted(free(f, ag))}")
    clf = _Classifier(ag)
    kind = clf.classify(to_pnf(f))
    seen: set[Formula] = set()
    principal = []
    for p in clf.principal:
        if p not in seen:
            seen.add(p)
            principal.append(p)
    return FragmentClass(kind, tuple(principal))


# ---------------------------------------------------------------------------
# One-goal decomposition (used by the automata pipeline)


@dataclass(frozen=True)
class GoalPart:
    """One principal sentence of a one-goal sentence, flattened.

    `matrix` is the LTL matrix with nested principal subsentences replaced
    by their placeholder atoms; `dual_matrix` is the PNF of its negation.
    """

    atom: str
    prefix: QuantPrefix
    binding: BindPrefix
    matrix: Formula
    dual_prefix: QuantPrefix
    dual_matrix: Formula


@dataclass(frozen=True)
class OneGoalPlan:
    skeleton: Formula          # Boolean formula over atoms + placeholders
    parts: tuple[GoalPart, ...]
    placeholders: tuple[str, ...]


def one_goal_plan(f: Formula, agents: Iterable[str],
                  placeholder_prefix: str = "@") -> OneGoalPlan:
    """Decompose a one-goal sentence for the automata construction.

    Every distinct principal subsentence of pnf(f) gets a fresh placeholder
    atom; matrices mention inner subsentences only through placeholders.
    """
    ag = frozenset(agents)
    fc = classify(f, ag)
    if fc.kind != SL1G:
        raise FormulaError(f"not a one-goal sentence (got {fc.kind})")
    g = to_pnf(f)
    names: dict[Formula, str] = {}
    parts_by_name: dict[str, GoalPart] = {}
    order: list[str] = []

    def placeholder(sent: Formula) -> str:
        if sent in names:
            return names[sent]
        # Reserve the name before recursing so indices follow discovery order.
        name = f"{placeholder_prefix}{len(names)}"
        names[sent] = name
        order.append(name)
        prefix, body = peel_quantifiers(sent)
        pairs, matrix = peel_bindings(body)
        matrix_abs = skeletonize(matrix)
        parts_by_name[name] = GoalPart(
            atom=name,
            prefix=prefix,
            binding=BindPrefix(pairs),
            matrix=matrix_abs,
            dual_prefix=prefix.dual(),
            dual_matrix=to_pnf(negate(matrix_abs)),
        )
        return name

    def skeletonize(h: Formula) -> Formula:
        match h:
            case Exists() | Forall():
                return Atom(placeholder(h))
            case Atom() | Top() | Bot():
                return h
            case Not(s):
                return Not(skeletonize(s))
            case And(l, r):
                return And(skeletonize(l), skeletonize(r))
            case Or(l, r):
                return Or(skeletonize(l), skeletonize(r))
            case Next(s):
                return Next(skeletonize(s))
            case Until(l, r):
                return Until(skeletonize(l), skeletonize(r))
            case Release(l, r):
                return Release(skeletonize(l), skeletonize(r))
            case Bind():
                raise FormulaError("stray binding outside a goal")
        raise TypeError(f"not a formula node: {h!r}")

    skeleton = skeletonize(g)
    parts = tuple(parts_by_name[name] for name in order)
    return OneGoalPlan(skeleton, parts, tuple(order))


# Boolean-goal matrix trees (used by the behavioral oracle).


@dataclass(frozen=True)
class GoalLeaf:
    binding: tuple[tuple[str, str], ...]  # agent -> variable, covering Ag
    matrix: Formula


def matrix_tree(body: Formula, agents: Iterable[str]):
    """Shape a block body as a Boolean tree over full goals.

    Returns nested tuples ('and', l, r) / ('or', l, r) / ('lit', formula)
    / ('goal', GoalLeaf).  Raises FormulaError on bodies with inner
    quantifiers or partial bindings (outside this oracle's scope).
    """
    ag = frozenset(agents)

    def go(f: Formula, bound: tuple[tuple[str, str], ...]):
        match f:
            case Bind(agent, var, s):
                if agent in {a for a, _ in bound}:
                    raise FormulaError("agent bound twice on one path")
                new_bound = bound + ((agent, var),)
                if {a for a, _ in new_bound} == ag:
                    return ("goal", GoalLeaf(new_bound, s))
                return go(s, new_bound)
            case And(l, r):
                return ("and", go(l, bound), go(r, bound))
            case Or(l, r):
                return ("or", go(l, bound), go(r, bound))
            case Atom() | Top() | Bot() | Not(Atom()):
                return ("lit", f)
            case _:
                raise FormulaError(
                    f"unsupported block body shape at {render(f)}")

    return go(body, ())


# ---------------------------------------------------------------------------
# Domino systems


@dataclass(frozen=True)
class DominoSystem:
    """Finite tile set with horizontal/vertical matching relations."""

    tiles: tuple[str, ...]
    horizontal: frozenset[tuple[str, str]]
    vertical: frozenset[tuple[str, str]]
    start: str

    def __post_init__(self):
        tiles = set(self.tiles)
        if len(self.tiles) != len(tiles) or not tiles:
            raise LibraryError("tile set must be non-empty and duplicate-free")
        if self.start not in tiles:
            raise LibraryError(f"distinguished tile {self.start!r} not in tile set")
        for rel, label in ((self.horizontal, "horizontal"), (self.vertical, "vertical")):
            for t, u in rel:
                if t not in tiles or u not in tiles:
                    raise LibraryError(f"{label} relation mentions unknown tile ({t}, {u})")


# ---------------------------------------------------------------------------
# Sentence library

ORDER_AGENTS = ("a", "b")


def _lt_shared(x1: str, x2: str, y: str) -> Formula:
    # (a,x1)(b,y) X p  &  (a,x2)(b,y) X !p
    return And(
        Bind("a", x1, Bind("b", y, Next(Atom("p")))),
        Bind("a", x2, Bind("b", y, Next(Not(Atom("p"))))),
    )


def _lt(x1: str, x2: str, y: str) -> Formula:
    return Exists(y, _lt_shared(x1, x2, y))


def _unb() -> Formula:
    return Forall("x1", Exists("x2", _lt("x1", "x2", "y")))


def _trn() -> Formula:
    pre = And(_lt("x1", "x2", "y"), _lt("x2", "x3", "y"))
    return Forall("x1", Forall("x2", Forall("x3",
        Or(Not(pre), _lt("x1", "x3", "y")))))


# Per-agent partial orders used by the grid/tiling family.  The "a" order
# fixes the shared strategy on agent b first; the "b" order is the mirror.


def _lt_a(x1: str, x2: str, y: str) -> Formula:
    return Exists(y, Bind("b", y, And(
        Bind("a", x1, Next(Atom("p"))),
        Bind("a", x2, Next(Not(Atom("p")))),
    )))


def _lt_b(y1: str, y2: str, x: str) -> Formula:
    return Exists(x, Bind("a", x, And(
        Bind("b", y1, Next(Not(Atom("p")))),
        Bind("b", y2, Next(Atom("p"))),
    )))


def _lt_for(agent: str, z1: str, z2: str, w: str) -> Formula:
    return _lt_a(z1, z2, w) if agent == "a" else _lt_b(z1, z2, w)


def _ord_for(agent: str) -> Formula:
    unb = Forall("z1", Exists("z2", _lt_for(agent, "z1", "z2", "w1")))
    pre = And(_lt_for(agent, "z1", "z2", "w1"), _lt_for(agent, "z2", "z3", "w2"))
    trn = Forall("z1", Forall("z2", Forall("z3",
        Or(Not(pre), _lt_for(agent, "z1", "z3", "w3")))))
    return And(unb, trn)


def _grd() -> Formula:
    return And(_ord_for("a"), _ord_for("b"))


def _succ(agent: str, z1: str, z2: str, mid: str, w1: str, w2: str) -> Formula:
    # z1 immediately precedes z2: z1 < z2 and no z3 strictly between.
    between = Exists(mid, And(_lt_for(agent, z1, mid, w1),
                              _lt_for(agent, mid, z2, w2)))
    return And(_lt_for(agent, z1, z2, w1), Not(between))


def _first(agent: str, z: str, prev: str, w: str) -> Formula:
    return Not(Exists(prev, _lt_for(agent, prev, z, w)))


def _tile_only(t: str, system: DominoSystem) -> Formula:
    f: Formula = Atom(t)
    for u in system.tiles:
        if u != t:
            f = And(f, Not(Atom(u)))
    return f


def _til(system: DominoSystem) -> Formula:
    disjuncts: list[Formula] = []
    for t in system.tiles:
        loc = Bind("a", "x", Bind("b", "y", Next(_tile_only(t, system))))
        hor_opts = [
            Forall("xn", Or(Not(_succ("a", "x", "xn", "zm", "w1", "w2")),
                            Bind("a", "xn", Bind("b", "y", Next(Atom(u))))))
            for (tt, u) in sorted(system.horizontal) if tt == t
        ]
        ver_opts = [
            Forall("yn", Or(Not(_succ("b", "y", "yn", "zm", "w1", "w2")),
                            Bind("a", "x", Bind("b", "yn", Next(Atom(u))))))
            for (tt, u) in sorted(system.vertical) if tt == t
        ]
        hor = _or_all(hor_opts)
        ver = _or_all(ver_opts)
        disjuncts.append(And(loc, And(hor, ver)))
    return Forall("x", Forall("y", _or_all(disjuncts)))


def _or_all(fs: list[Formula]) -> Formula:
    if not fs:
        return Bot()
    out = fs[0]
    for g in fs[1:]:
        out = Or(out, g)
    return out


def _rec(system: DominoSystem) -> Formula:
    t0 = system.start
    here = Bind("a", "x", Bind("b", "y", Next(Atom(t0))))
    guard = And(_first("b", "y", "yp", "w1"), Or(_first("a", "x", "xp", "w2"), here))
    then = Exists("xn", And(_lt_for("a", "x", "xn", "w3"),
                            Bind("a", "xn", Bind("b", "y", Next(Atom(t0))))))
    return Forall("x", Forall("y", Or(Not(guard), then)))


def _nash(n: int, goals: tuple[Formula, ...]) -> tuple[Decl, Formula]:
    agents = tuple(f"a{i}" for i in range(1, n + 1))
    body: Formula = Top()
    first = True
    for i, goal in enumerate(goals, start=1):
        best = Exists("y", Bind(f"a{i}", "y", goal))
        clause = Or(Not(best), goal)
        body = clause if first else And(body, clause)
        first = False
    f: Formula = body
    for i in range(n, 0, -1):
        f = Bind(f"a{i}", f"x{i}", f)
    for i in range(n, 0, -1):
        f = Exists(f"x{i}", f)
    atoms = frozenset().union(*(atoms_of(g) for g in goals)) if goals else frozenset()
    return Decl(frozenset(agents), None, frozenset(atoms)), f


def _peers_prefix(n: int, body: Formula, existential: bool) -> Formula:
    for i in range(n, 0, -1):
        body = Bind(f"a{i}", f"x{i}", body)
    for i in range(n, 0, -1):
        body = Exists(f"x{i}", body) if existential else Forall(f"x{i}", body)
    return body


def _eg(n: int, goals: tuple[Formula, ...]) -> tuple[Decl, Formula]:
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    body: Formula = Top()
    first = True
    for i, j in pairs:
        can_i = Exists("z1", Bind("b", "z1", goals[i - 1]))
        can_j = Exists("z2", Bind("b", "z2", goals[j - 1]))
        same = And(Or(Not(goals[i - 1]), goals[j - 1]),
                   Or(Not(goals[j - 1]), goals[i - 1]))
        clause = Or(Not(And(can_i, can_j)), same)
        body = clause if first else And(body, clause)
        first = False
    f = Exists("y", Bind("b", "y", body))
    f = _peers_prefix(n, f, existential=False)
    agents = frozenset([f"a{i}" for i in range(1, n + 1)] + ["b"])
    atoms = frozenset().union(*(atoms_of(g) for g in goals))
    return Decl(agents, None, frozenset(atoms)), f


def _ag(n: int, goals: tuple[Formula, ...]) -> tuple[Decl, Formula]:
    body: Formula = Top()
    first = True
    for i in range(1, n + 1):
        can = Exists("z", Bind("b", "z", goals[i - 1]))
        clause = Or(Not(can), goals[i - 1])
        body = clause if first else And(body, clause)
        first = False
    f = Exists("y", Bind("b", "y", body))
    f = _peers_prefix(n, f, existential=False)
    agents = frozenset([f"a{i}" for i in range(1, n + 1)] + ["b"])
    atoms = frozenset().union(*(atoms_of(g) for g in goals))
    return Decl(agents, None, frozenset(atoms)), f


def _rs(n: int, system_goal: Formula, goals: tuple[Formula, ...]) -> tuple[Decl, Formula]:
    _, nash_body = _nash(n, goals)
    # Re-derive just the variable-closed NE matrix under the shared bindings.
    body: Formula = Top()
    first = True
    for i, goal in enumerate(goals, start=1):
        clause = Or(Not(Exists("y", Bind(f"a{i}", "y", goal))), goal)
        body = clause if first else And(body, clause)
        first = False
    f: Formula = And(system_goal, body)
    for i in range(n, 0, -1):
        f = Bind(f"a{i}", f"x{i}", f)
    f = Bind("b", "y0", f)
    for i in range(n, 0, -1):
        f = Exists(f"x{i}", f)
    f = Exists("y0", f)
    agents = frozenset([f"a{i}" for i in range(1, n + 1)] + ["b"])
    atoms = atoms_of(system_goal).union(*(atoms_of(g) for g in goals))
    return Decl(agents, None, frozenset(atoms)), f


_ORDER_DECL = Decl(frozenset(ORDER_AGENTS), None, frozenset({"p"}))


def _default_goals(n: int) -> tuple[Formula, ...]:
    return tuple(Until(Top(), Atom(f"p{i}")) for i in range(1, n + 1))


def library(name: str, *, system: Optional[DominoSystem] = None,
            n: int = 2, goals: Optional[Iterable[Formula]] = None,
            system_goal: Optional[Formula] = None) -> tuple[Decl, Formula]:
    """Build a named sentence family instance.

    Families: ord, unb, trn, grd, til, rec, dom (domino families need a
    DominoSystem), nash, eg, ag, rs (goal families take n and LTL goals).
    Returns the declarations the sentence is built over and the sentence.
    """
    if name in {"til", "rec", "dom"}:
        if system is None:
            raise LibraryError(f"family {name!r} needs a domino system")
        if "p" in system.tiles:
            raise LibraryError('tile name "p" clashes with the order atom')
    match name:
        case "unb":
            return _ORDER_DECL, _unb()
        case "trn":
            return _ORDER_DECL, _trn()
        case "ord":
            return _ORDER_DECL, And(_unb(), _trn())
        case "grd":
            return _ORDER_DECL, _grd()
        case "til":
            decl = Decl(frozenset(ORDER_AGENTS), None,
                        frozenset({"p"}) | frozenset(system.tiles))
            return decl, _til(system)
        case "rec":
            decl = Decl(frozenset(ORDER_AGENTS), None,
                        frozenset({"p"}) | frozenset(system.tiles))
            return decl, _rec(system)
        case "dom":
            decl = Decl(frozenset(ORDER_AGENTS), None,
                        frozenset({"p"}) | frozenset(system.tiles))
            return decl, And(_grd(), And(_til(system), _rec(system)))
        case "nash":
            gs = tuple(goals) if goals is not None else _default_goals(n)
            if len(gs) != n:
                raise LibraryError(f"nash needs {n} goals, got {len(gs)}")
            return _nash(n, gs)
        case "eg":
            gs = tuple(goals) if goals is not None else _default_goals(n)
            if len(gs) != n:
                raise LibraryError(f"eg needs {n} goals, got {len(gs)}")
            return _eg(n, gs)
        case "ag":
            gs = tuple(goals) if goals is not None else _default_goals(n)
            if len(gs) != n:
                raise LibraryError(f"ag needs {n} goals, got {len(gs)}")
            return _ag(n, gs)
        case "rs":
            gs = tuple(goals) if goals is not None else _default_goals(n)
            sg = system_goal if system_goal is not None else Until(Top(), Atom("p0"))
            if len(gs) != n:
                raise LibraryError(f"rs needs {n} goals, got {len(gs)}")
            return _rs(n, sg, gs)
    raise LibraryError(f"unknown sentence family: {name!r}")


LIBRARY_FAMILIES = ("ord", "unb", "trn", "grd", "til", "rec", "dom",
                    "nash", "eg", "ag", "rs")
