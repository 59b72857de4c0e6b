"""Boolean first-order queries: parser, printer and active-domain evaluator.

Grammar (precedence ``!`` > ``&`` > ``|``; quantifiers extend as far right
as possible)::

    formula := formula "|" formula | formula "&" formula | "!" formula
             | ("E" | "A") var ("," var)* "." formula
             | "(" formula ")" | atom | term "=" term
    atom    := NAME "(" [term ("," term)*] ")"
    term    := var | INT | RATIONAL | REAL | STRING

Constants are integers (``3``), rationals (``3/4``), reals (``0.5``) and
quoted strings (``"NYC"``); any bare identifier in term position is a
variable.

Quantifiers range over the active domain of the (deduplicated) instance
together with the query's own constants. For a sentence like ``A x. R(x)``
this is *not* the reading over an infinite universe: it asks whether every
element that occurs anywhere in the instance or query is in ``R``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

from .core import BagInstance, Elem, Schema, elem_key, format_elem
from .errors import ArityMismatch, QueryError, QuerySyntaxError, UnboundVariable


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: Elem

    def __eq__(self, other):
        return isinstance(other, Const) and elem_key(self.value) == elem_key(other.value)

    def __hash__(self):
        return hash(elem_key(self.value))

    def __str__(self):
        return format_elem(self.value)


Term = Union[Var, Const]


@dataclass(frozen=True)
class Atom:
    relation: str
    terms: tuple


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


@dataclass(frozen=True)
class Not:
    sub: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


Formula = Union[Atom, Eq, Not, And, Or, Exists, Forall]


# -- printing ------------------------------------------------------------------------

_PREC = {Or: 1, And: 2}


def to_text(node: Formula) -> str:
    """Render ``node`` in the input syntax; ``parse_query(to_text(q)) == q``."""
    if isinstance(node, Atom):
        return f"{node.relation}({', '.join(str(t) for t in node.terms)})"
    if isinstance(node, Eq):
        return f"{node.left} = {node.right}"
    if isinstance(node, Not):
        return "!" + _wrap(node.sub, 3)
    if isinstance(node, (And, Or)):
        op = " & " if isinstance(node, And) else " | "
        prec = _PREC[type(node)]
        # Left-associative: the right operand needs parens at equal precedence.
        return _wrap(node.left, prec) + op + _wrap(node.right, prec + 1)
    if isinstance(node, (Exists, Forall)):
        q = "E" if isinstance(node, Exists) else "A"
        return f"{q} {node.var}. {to_text(node.body)}"
    raise TypeError(node)


def _wrap(node: Formula, min_prec: int) -> str:
    text = to_text(node)
    if isinstance(node, (Exists, Forall)):
        return f"({text})"
    if isinstance(node, (And, Or)) and _PREC[type(node)] < min_prec:
        return f"({text})"
    if isinstance(node, Eq) and min_prec >= 3:
        return f"({text})"
    return text


# -- tokenizer -------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<real>-?\d+\.\d+(?:[eE][-+]?\d+)?)
  | (?P<rational>-?\d+/\d+)
  | (?P<int>-?\d+)
  | (?P<string>"(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[()!&|.,=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


def _unquote(s: str) -> str:
    body = s[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text or tok.kind not in ("op",):
            what = "end of input" if tok.kind == "end" else repr(tok.text)
            raise QuerySyntaxError(f"expected {text!r}, found {what}", tok.pos)
        return tok

    def parse(self) -> Formula:
        node = self.disjunction()
        tok = self.peek()
        if tok.kind != "end":
            raise QuerySyntaxError(f"unexpected {tok.text!r}", tok.pos)
        return node

    def disjunction(self) -> Formula:
        node = self.conjunction()
        while self.peek().text == "|" and self.peek().kind == "op":
            self.next()
            node = Or(node, self.conjunction())
        return node

    def conjunction(self) -> Formula:
        node = self.unary()
        while self.peek().text == "&" and self.peek().kind == "op":
            self.next()
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "!":
            self.next()
            return Not(self.unary())
        if tok.kind == "name" and tok.text in ("E", "A") and self.peek(1).kind == "name":
            return self.quantified()
        return self.primary()

    def quantified(self) -> Formula:
        kind = Exists if self.next().text == "E" else Forall
        names = [self.variable()]
        while self.peek().text == ",":
            self.next()
            names.append(self.variable())
        self.expect(".")
        body = self.disjunction()
        for name in reversed(names):
            body = kind(name, body)
        return body

    def variable(self) -> str:
        tok = self.next()
        if tok.kind != "name":
            raise QuerySyntaxError(f"expected a variable, found {tok.text!r}", tok.pos)
        return tok.text

    def primary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "(":
            self.next()
            node = self.disjunction()
            self.expect(")")
            return node
        if tok.kind == "name" and self.peek(1).text == "(" and self.peek(1).kind == "op":
            self.next()
            self.next()
            terms = []
            if not (self.peek().kind == "op" and self.peek().text == ")"):
                terms.append(self.term())
                while self.peek().kind == "op" and self.peek().text == ",":
                    self.next()
                    terms.append(self.term())
            self.expect(")")
            return Atom(tok.text, tuple(terms))
        left = self.term()
        self.expect("=")
        return Eq(left, self.term())

    def term(self) -> Term:
        tok = self.next()
        if tok.kind == "name":
            return Var(tok.text)
        if tok.kind == "int":
            return Const(int(tok.text))
        if tok.kind == "rational":
            return Const(Fraction(tok.text))
        if tok.kind == "real":
            return Const(float(tok.text))
        if tok.kind == "string":
            return Const(_unquote(tok.text))
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise QuerySyntaxError(f"expected a term, found {what}", tok.pos)


# -- static checks ---------------------------------------------------------------------


def free_vars(node: Formula, bound: frozenset = frozenset()) -> set[str]:
    if isinstance(node, Atom):
        return {t.name for t in node.terms if isinstance(t, Var) and t.name not in bound}
    if isinstance(node, Eq):
        return {t.name for t in (node.left, node.right) if isinstance(t, Var) and t.name not in bound}
    if isinstance(node, Not):
        return free_vars(node.sub, bound)
    if isinstance(node, (And, Or)):
        return free_vars(node.left, bound) | free_vars(node.right, bound)
    return free_vars(node.body, bound | {node.var})


def relations_used(node: Formula, acc: Optional[dict] = None) -> dict[str, int]:
    acc = {} if acc is None else acc
    if isinstance(node, Atom):
        seen = acc.setdefault(node.relation, len(node.terms))
        if seen != len(node.terms):
            raise ArityMismatch(f"{node.relation} used with {seen} and {len(node.terms)} arguments")
    elif isinstance(node, Not):
        relations_used(node.sub, acc)
    elif isinstance(node, (And, Or)):
        relations_used(node.left, acc)
        relations_used(node.right, acc)
    elif isinstance(node, (Exists, Forall)):
        relations_used(node.body, acc)
    return acc


def constants(node: Formula) -> list[Elem]:
    out: dict = {}

    def walk(n):
        if isinstance(n, Atom):
            terms = n.terms
        elif isinstance(n, Eq):
            terms = (n.left, n.right)
        elif isinstance(n, Not):
            return walk(n.sub)
        elif isinstance(n, (And, Or)):
            walk(n.left)
            return walk(n.right)
        else:
            return walk(n.body)
        for t in terms:
            if isinstance(t, Const):
                out.setdefault(elem_key(t.value), t.value)

    walk(node)
    return [out[k] for k in sorted(out)]


def quantifier_rank(node: Formula) -> int:
    if isinstance(node, (Atom, Eq)):
        return 0
    if isinstance(node, Not):
        return quantifier_rank(node.sub)
    if isinstance(node, (And, Or)):
        return max(quantifier_rank(node.left), quantifier_rank(node.right))
    return 1 + quantifier_rank(node.body)


# -- evaluation ------------------------------------------------------------------------

Env = dict


def _term_fn(t: Term) -> Callable[[Env], tuple]:
    if isinstance(t, Const):
        key = elem_key(t.value)
        return lambda env: key
    name = t.name
    return lambda env: env[name]


def _compile(node: Formula):
    """Closure ``(env, facts, domain) -> bool``; ``env`` maps variables to element keys."""
    if isinstance(node, Atom):
        rel, arity = node.relation, len(node.terms)
        getters = [_term_fn(t) for t in node.terms]
        return lambda env, facts, dom: (rel, arity, tuple(g(env) for g in getters)) in facts
    if isinstance(node, Eq):
        lf, rf = _term_fn(node.left), _term_fn(node.right)
        return lambda env, facts, dom: lf(env) == rf(env)
    if isinstance(node, Not):
        sub = _compile(node.sub)
        return lambda env, facts, dom: not sub(env, facts, dom)
    if isinstance(node, And):
        a, b = _compile(node.left), _compile(node.right)
        return lambda env, facts, dom: a(env, facts, dom) and b(env, facts, dom)
    if isinstance(node, Or):
        a, b = _compile(node.left), _compile(node.right)
        return lambda env, facts, dom: a(env, facts, dom) or b(env, facts, dom)
    body, var = _compile(node.body), node.var
    if isinstance(node, Exists):
        def exists(env, facts, dom):
            inner = dict(env)
            for d in dom:
                inner[var] = d
                if body(inner, facts, dom):
                    return True
            return False
        return exists

    def forall(env, facts, dom):
        inner = dict(env)
        for d in dom:
            inner[var] = d
            if not body(inner, facts, dom):
                return False
        return True
    return forall


class Query:
    """A parsed, closed Boolean query ready for repeated evaluation."""

    def __init__(self, formula: Formula, text: Optional[str] = None):
        self.formula = formula
        self.text = to_text(formula) if text is None else text
        self.relations = relations_used(formula)
        self.const_keys = frozenset(elem_key(c) for c in constants(formula))
        self._fn = _compile(formula)

    def holds(self, world: BagInstance) -> bool:
        facts = {f.key for f, _ in world.items()}
        dom = world.adom() | self.const_keys
        return self._fn({}, facts, sorted(dom))

    __call__ = holds

    def __eq__(self, other):
        return isinstance(other, Query) and self.formula == other.formula

    def __hash__(self):
        return hash(self.formula)

    def __repr__(self):
        return f"Query({self.text!r})"


def parse_formula(text: str) -> Formula:
    return _Parser(text).parse()


def parse_query(text: str, schema: Optional[Schema] = None) -> Query:
    """Parse a closed Boolean query; arities are checked against ``schema`` if given."""
    formula = parse_formula(text)
    free = free_vars(formula)
    if free:
        raise UnboundVariable(f"free variable(s) {', '.join(sorted(free))}; Boolean queries must be closed")
    rels = relations_used(formula)
    if schema is not None:
        for name, arity in rels.items():
            if name not in schema.relations:
                raise ArityMismatch(f"relation {name} is not in the schema")
            if schema.relations[name] != arity:
                raise ArityMismatch(f"{name} has arity {schema.relations[name]}, query uses {arity}")
    return Query(formula, text)


def eval_bool(q: Union[Query, Formula], world: BagInstance) -> bool:
    """Set-semantics truth of ``q`` in ``world``: multiplicities are ignored."""
    if not isinstance(q, Query):
        if free_vars(q):
            raise QueryError("cannot evaluate an open formula")
        q = Query(q)
    return q.holds(world)
