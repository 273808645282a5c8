"""Expression language for Weyl series.

Grammar (all binary operators left-associative):

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | power
    power  := atom ('^' INT)*
    atom   := NUMBER | VAR | NAME '(' expr (',' expr)* ')' | '(' expr ')'

NUMBER is an integer or ``p/q`` literal.  Variables: ``nu``, ``z<i>``, ``Z<i>``,
``dz<i>`` with 1 <= i <= 2n.  ``*`` is the commutative symbol product (wedge on
dz); the star product is ``star(a, b)``, the star commutator ``comm(a, b)`` and
the Weyl continuation ``sharp(f)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .algebra import SymplecticFrame, WeylSeries, moyal_product, star_commutator
from .errors import ParseError

FUNCTIONS = {"sharp": 1, "star": 2, "comm": 2}


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Var:
    kind: str  # "nu", "z", "Z", "dz"
    index: int = 0


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*^(),]))")


def _tokenize(src):
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(src):
        if src[pos] == "\n":
            line += 1
            line_start = pos + 1
            pos += 1
            continue
        if src[pos] in " \t\r":
            pos += 1
            continue
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), line, start - line_start + 1))
        pos = m.end()
    tokens.append(("end", "", line, pos - line_start + 1))
    return tokens


_VAR = re.compile(r"(dz|z|Z)([1-9]\d*)$")


class _Parser:
    def __init__(self, src, n):
        self.tokens = _tokenize(src)
        self.i = 0
        self.n = n

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, tok[2], tok[3])

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] not in ("op",):
            self.fail(f"expected {value!r}", tok)
        return tok

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            e = BinOp("*", e, self.unary())
        return e

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        e = self.atom()
        while self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.take()
            if tok[0] != "num" or "/" in tok[1]:
                self.fail("exponent must be a non-negative integer", tok)
            e = Pow(e, int(tok[1]))
        return e

    def atom(self):
        tok = self.take()
        kind, text = tok[0], tok[1]
        if kind == "num":
            return Num(Fraction(text))
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    self.fail(f"unknown function {text!r}", tok)
                self.take()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    self.fail(f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}", tok)
                return Call(text, tuple(args))
            if text == "nu":
                return Var("nu")
            m = _VAR.match(text)
            if not m:
                self.fail(f"unknown variable {text!r}", tok)
            idx = int(m.group(2))
            if self.n is not None and idx > 2 * self.n:
                self.fail(f"variable {text} out of range for n = {self.n}", tok)
            return Var(m.group(1), idx)
        self.fail(f"unexpected {text!r}" if text else "unexpected end of input", tok)


def parse_expression(src: str, n=None):
    """Parse ``src`` into an expression tree; ``n`` bounds variable indices."""
    return _Parser(src, n).parse()


_PREC = {"+": 1, "-": 1, "*": 2}


def to_text(e) -> str:
    """Minimal-parenthesis printer; parse(to_text(e)) == e."""
    return _print(e, 0)


def _print(e, ctx):
    # ctx: binding strength required of e (0 any, 1 sum rhs, 2 product, 3 unary, 4 power base)
    if isinstance(e, Num):
        v = e.value
        s = str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
        return s
    if isinstance(e, Var):
        return "nu" if e.kind == "nu" else f"{e.kind}{e.index}"
    if isinstance(e, Call):
        return f"{e.name}(" + ", ".join(_print(a, 0) for a in e.args) + ")"
    if isinstance(e, Pow):
        s = f"{_print(e.base, 4)}^{e.exponent}"
        return s
    if isinstance(e, Neg):
        s = "-" + _print(e.arg, 3)
        return f"({s})" if ctx > 3 else s
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        s = f"{_print(e.left, p)} {e.op} {_print(e.right, p + 1)}"
        return f"({s})" if ctx > p else s
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e, frame: SymplecticFrame, trunc_N=None) -> WeylSeries:
    n = frame.dim_n
    if isinstance(e, Num):
        return WeylSeries.constant(n, e.value, trunc_N)
    if isinstance(e, Var):
        if e.index > 2 * n:
            raise ParseError(f"variable {e.kind}{e.index} out of range for n = {n}", 1, 1)
        if e.kind == "nu":
            return WeylSeries.nu(n, 1, trunc_N)
        i = e.index - 1
        if e.kind == "z":
            return WeylSeries.base_var(n, i, trunc_N)
        if e.kind == "Z":
            return WeylSeries.fiber_var(n, i, trunc_N)
        return WeylSeries.dz(n, i, trunc_N)
    if isinstance(e, Neg):
        return -evaluate(e.arg, frame, trunc_N)
    if isinstance(e, Pow):
        return evaluate(e.base, frame, trunc_N).power(e.exponent).truncate(trunc_N)
    if isinstance(e, BinOp):
        a = evaluate(e.left, frame, trunc_N)
        b = evaluate(e.right, frame, trunc_N)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        return a.pointwise(b).truncate(trunc_N)
    if isinstance(e, Call):
        args = [evaluate(a, frame, trunc_N) for a in e.args]
        if e.name == "sharp":
            from .weyl_functions import sharp
            return sharp(args[0], frame, trunc_N)
        if e.name == "star":
            return moyal_product(args[0], args[1], frame)
        return star_commutator(args[0], args[1], frame)
    raise TypeError(f"not an expression: {e!r}")


def parse_series(src: str, frame: SymplecticFrame, trunc_N=None) -> WeylSeries:
    return evaluate(parse_expression(src, frame.dim_n), frame, trunc_N)


def random_expression(rng, n, depth=3):
    """Random expression tree for round-trip fuzzing."""
    if depth <= 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.3:
            num = rng.randint(0, 9)
            den = rng.choice([1, 1, 2, 3, 4])
            return Num(Fraction(num, den))
        if r < 0.4:
            return Var("nu")
        kind = rng.choice(["z", "Z", "dz"])
        return Var(kind, rng.randint(1, 2 * n))
    r = rng.random()
    if r < 0.55:
        return BinOp(rng.choice("+-*"), random_expression(rng, n, depth - 1),
                     random_expression(rng, n, depth - 1))
    if r < 0.7:
        return Pow(random_expression(rng, n, depth - 1), rng.randint(0, 4))
    if r < 0.82:
        return Neg(random_expression(rng, n, depth - 1))
    name = rng.choice(sorted(FUNCTIONS))
    return Call(name, tuple(random_expression(rng, n, depth - 1) for _ in range(FUNCTIONS[name])))
