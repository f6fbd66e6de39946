"""Finite-trace temporal property checker.

Property text::

    G( FC1.N && FC1.W && FC1.E && FC1.S -> F[8]( rising(FC1.done) && FC1.dout == golden(FC1.dout) ) )

Operators: ``G(...)``, ``F[H](...)`` with an explicit horizon in half-ticks,
``!``, ``&&``, ``||``, ``->`` (also ``∧ ∨ ⟹ ¬``), ``rising(sig)``, and
comparisons ``== != < <= > >=`` between signals, integer literals and
``golden(sig)``.  A bare signal means "non-zero".

Formulas are evaluated with three truth values over every half-tick of the
trace; a bounded eventually whose window runs past the end of the trace is
unknown rather than false.
"""
from __future__ import annotations

import operator
import re
from dataclasses import dataclass

from .fabric import HALF_TICK_NS


class PropertyError(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    status: str  # HOLDS | VIOLATED | INCONCLUSIVE
    time_ns: int | None = None

    def __str__(self):
        return f"VIOLATED({self.time_ns})" if self.status == "VIOLATED" else self.status


# -- syntax ------------------------------------------------------------------

@dataclass(frozen=True)
class Sig:
    name: str


@dataclass(frozen=True)
class Golden:
    name: str


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Rising:
    name: str


@dataclass(frozen=True)
class Cmp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    arg: object


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Implies:
    left: object
    right: object


@dataclass(frozen=True)
class Always:
    arg: object


@dataclass(frozen=True)
class Eventually:
    horizon: int
    arg: object


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>0x[0-9A-Fa-f]+|\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_.]*)"
    r"|(?P<op>->|=>|⟹|&&|\|\||∧|∨|¬|==|!=|<=|>=|[()\[\]!<>]))"
)
_SYMBOLS = {"∧": "&&", "∨": "||", "⟹": "->", "=>": "->", "¬": "!"}
_CMP = {"==": operator.eq, "!=": operator.ne, "<": operator.lt, "<=": operator.le,
        ">": operator.gt, ">=": operator.ge}


def _tokenize(text):
    toks, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise PropertyError(f"unexpected character {text[pos]!r} at column {pos + 1}")
        pos = m.end()
        kind = m.lastgroup
        val = m.group(kind)
        toks.append((kind, _SYMBOLS.get(val, val)))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            raise PropertyError(f"expected {value or 'a token'}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        e = self.implies()
        if self.peek()[0] is not None:
            raise PropertyError(f"trailing input at {self.peek()[1]!r}")
        return e

    def implies(self):
        left = self.disj()
        if self.peek()[1] == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disj(self):
        e = self.conj()
        while self.peek()[1] == "||":
            self.take()
            e = Or(e, self.conj())
        return e

    def conj(self):
        e = self.unary()
        while self.peek()[1] == "&&":
            self.take()
            e = And(e, self.unary())
        return e

    def unary(self):
        kind, val = self.peek()
        if val == "!":
            self.take()
            return Not(self.unary())
        if val == "(":
            self.take()
            e = self.implies()
            self.take(")")
            return e
        if kind == "name" and val == "G" and self.peek(1)[1] == "(":
            self.take()
            self.take("(")
            e = self.implies()
            self.take(")")
            return Always(e)
        if kind == "name" and val == "F" and self.peek(1)[1] in ("(", "["):
            self.take()
            if self.peek()[1] != "[":
                raise PropertyError("F needs an explicit horizon: F[H](...)")
            self.take("[")
            k, h = self.take()
            if k != "num":
                raise PropertyError(f"horizon must be an integer, got {h!r}")
            self.take("]")
            self.take("(")
            e = self.implies()
            self.take(")")
            return Eventually(int(h, 0), e)
        if kind == "name" and val == "rising" and self.peek(1)[1] == "(":
            self.take()
            self.take("(")
            name = self._name()
            self.take(")")
            return Rising(name)
        left = self.term()
        if self.peek()[1] in _CMP:
            op = self.take()[1]
            return Cmp(op, left, self.term())
        return Cmp("!=", left, Lit(0))

    def _name(self):
        k, v = self.take()
        if k != "name":
            raise PropertyError(f"expected a signal name, got {v!r}")
        return v

    def term(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return Lit(int(val, 0))
        if kind == "name" and val == "golden" and self.peek(1)[1] == "(":
            self.take()
            self.take("(")
            name = self._name()
            self.take(")")
            return Golden(name)
        if kind == "name":
            self.take()
            return Sig(val)
        raise PropertyError(f"unexpected {val!r}")


def parse_property(text: str):
    lines = [ln.split("#", 1)[0] for ln in text.splitlines()]
    body = " ".join(ln for ln in lines if ln.strip())
    if not body.strip():
        raise PropertyError("empty property")
    return _Parser(body).parse()


# -- semantics ---------------------------------------------------------------

def _signals_used(node, acc):
    if isinstance(node, (Sig, Rising)):
        acc.add(("trace", node.name))
    elif isinstance(node, Golden):
        acc.add(("golden", node.name))
    elif isinstance(node, (Not, Always)):
        _signals_used(node.arg, acc)
    elif isinstance(node, Eventually):
        _signals_used(node.arg, acc)
    elif isinstance(node, (And, Or, Implies, Cmp)):
        _signals_used(node.left, acc)
        _signals_used(node.right, acc)
    return acc


def sample(trace, name, n):
    """Value of ``name`` at each of the first ``n`` half-ticks."""
    out = [0] * n
    pts = trace.waveform(name)
    for k, (t, v) in enumerate(pts):
        start = t // HALF_TICK_NS
        end = pts[k + 1][0] // HALF_TICK_NS if k + 1 < len(pts) else n
        for i in range(max(start, 0), min(end, n)):
            out[i] = v
    return out


def _and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _or(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def _not(a):
    return None if a is None else not a


class _Evaluator:
    def __init__(self, n, values):
        self.n = n
        self.values = values

    def ev(self, node):
        n = self.n
        if isinstance(node, Cmp):
            f = _CMP[node.op]
            left, right = self.term(node.left), self.term(node.right)
            return [f(left[i], right[i]) for i in range(n)]
        if isinstance(node, Rising):
            v = self.values["trace", node.name]
            return [False] + [bool(v[i]) and not v[i - 1] for i in range(1, n)]
        if isinstance(node, Not):
            return [_not(x) for x in self.ev(node.arg)]
        if isinstance(node, And):
            return [_and(a, b) for a, b in zip(self.ev(node.left), self.ev(node.right))]
        if isinstance(node, Or):
            return [_or(a, b) for a, b in zip(self.ev(node.left), self.ev(node.right))]
        if isinstance(node, Implies):
            return [_or(_not(a), b) for a, b in zip(self.ev(node.left), self.ev(node.right))]
        if isinstance(node, Always):
            inner = self.ev(node.arg)
            out = [True] * n
            acc = True
            for i in range(n - 1, -1, -1):
                acc = _and(inner[i], acc)
                out[i] = acc
            return out
        if isinstance(node, Eventually):
            inner = self.ev(node.arg)
            h = node.horizon
            out = []
            for i in range(n):
                window = inner[i:i + h + 1]
                if True in window:
                    out.append(True)
                elif i + h >= n or None in window:
                    out.append(None)
                else:
                    out.append(False)
            return out
        raise PropertyError(f"not a formula: {node!r}")

    def term(self, node):
        if isinstance(node, Lit):
            return [node.value] * self.n
        if isinstance(node, Sig):
            return self.values["trace", node.name]
        if isinstance(node, Golden):
            return self.values["golden", node.name]
        raise PropertyError(f"not a term: {node!r}")


def check_property(trace, prop, golden=None) -> Verdict:
    """Evaluate ``prop`` (text or parsed) on ``trace``.

    A top-level ``G`` is checked at every half-tick: the first false position
    gives VIOLATED, otherwise any unknown position gives INCONCLUSIVE.  Any
    other formula is judged at time 0.
    """
    node = parse_property(prop) if isinstance(prop, str) else prop
    n = trace.until_ns // HALF_TICK_NS + 1
    known = set(trace.signal_names())
    values = {}
    for src, name in sorted(_signals_used(node, set())):
        if src == "golden":
            if golden is None:
                raise PropertyError(f"golden({name}) needs a golden trace")
            if name not in golden.signal_names():
                raise PropertyError(f"unknown golden signal {name!r}")
            values[src, name] = sample(golden, name, n)
        else:
            if name not in known:
                raise PropertyError(f"unknown signal {name!r}")
            values[src, name] = sample(trace, name, n)
    ev = _Evaluator(n, values)
    if isinstance(node, Always):
        inner = ev.ev(node.arg)
        for i, v in enumerate(inner):
            if v is False:
                return Verdict("VIOLATED", i * HALF_TICK_NS)
        return Verdict("INCONCLUSIVE") if None in inner else Verdict("HOLDS")
    v = ev.ev(node)[0]
    if v is None:
        return Verdict("INCONCLUSIVE")
    return Verdict("HOLDS") if v else Verdict("VIOLATED", 0)
