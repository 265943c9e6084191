"""Text format for scenarios (``.scn``) and partition priors (``.prior``).

Example::

    scenario "Wigner"
    factor spin { up, down }
    init = 1/sqrt(2)*|up> + 1/sqrt(2)*|down>
    step M observer "F" mergeable = |up><up| + |down><down| {
      branch up : |up><up|
      branch down : |down><down|
    }
    step W observer "W" {
      branch s : 1/sqrt(4)*|up><up| + 1/sqrt(4)*|up><down| + ...
      ...
    }
    halt { W = s }

Operators act on the leading declared factors; a step whose kets are longer
than its bras attaches further factors. A term mentioning only some of the
active factors (``|down><down|`` on a coin+spin space) is expanded with the
identity on the others. ``#`` starts a comment.

Integer literals, ``sqrt(p/q)`` and ``1/sqrt(p/q)`` are exact; decimal
literals are not. Emission prints exact amplitudes symbolically and
everything else as 17-significant-digit decimals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import linalg as la
from .exact import ONE, ZERO, Surd
from .linalg import LinearMap, StateVector
from .scenario import (
    FactorSpace,
    MeasurementStep,
    Partition,
    PartitionPrior,
    Scenario,
    format_partition,
    partition_key,
)


@dataclass(frozen=True)
class SourcePosition:
    line: int
    column: int


class ParseError(Exception):
    def __init__(self, position: SourcePosition, expected: str, found: str):
        self.position = position
        self.expected = expected
        self.found = found
        super().__init__(f"line {position.line}, column {position.column}: {found}, expected {expected}")


class InvalidPrior(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+|\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\[^\n])*")
  | (?P<number>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{},=|<>:+\-*/()])
  | (?P<bad>.)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "string", "number", "ident", "punct", "eof"
    text: str
    pos: SourcePosition

    def describe(self) -> str:
        if self.kind == "eof":
            return "found end of input"
        return f"found {self.text!r}"


def _tokenize(text: str) -> list[Token]:
    out = []
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        col = m.start() - line_start + 1
        if kind == "bad":
            if m.group() == '"':
                raise ParseError(SourcePosition(line, col), "closing '\"'", "found unterminated string")
            raise ParseError(SourcePosition(line, col), "a token", f"found {m.group()!r}")
        if kind != "ws":
            out.append(Token(kind, m.group(), SourcePosition(line, col)))
        elif "\n" in m.group():
            line += m.group().count("\n")
            line_start = m.start() + m.group().rfind("\n") + 1
    out.append(Token("eof", "", SourcePosition(line, len(text) - line_start + 1)))
    return out


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


# ---------------------------------------------------------------------------
# parser


class _Amp:
    """Running amplitude value: float always, Surd while still exact."""

    __slots__ = ("value", "exact")

    def __init__(self, value: complex, exact: Surd | None):
        self.value = value
        self.exact = exact

    def __mul__(self, other):
        ex = self.exact * other.exact if self.exact is not None and other.exact is not None else None
        return _Amp(self.value * other.value, ex)

    def __neg__(self):
        return _Amp(-self.value, -self.exact if self.exact is not None else None)


_AMP_ONE = _Amp(1.0, ONE)


class _Parser:
    def __init__(self, text: str, max_dim: int = la.MAX_DIM):
        self.toks = _tokenize(text)
        self.k = 0
        self.max_dim = max_dim
        self.factors: list[FactorSpace] = []
        self.active = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.k]

    def peek(self, text: str, offset: int = 0) -> bool:
        t = self.toks[min(self.k + offset, len(self.toks) - 1)]
        return t.kind in ("punct", "ident") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.k += 1
        return t

    def fail(self, expected: str, tok: Token | None = None):
        tok = tok or self.tok
        raise ParseError(tok.pos, expected, tok.describe())

    def expect(self, text: str) -> Token:
        if not self.peek(text):
            self.fail(repr(text))
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            self.fail(what)
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        return self.expect_kind("ident", what)

    # grammar
    def scenario(self) -> Scenario:
        self.expect("scenario")
        name = _unquote(self.expect_kind("string", "scenario name string").text)
        initial = None
        steps: list[MeasurementStep] = []
        halt = None
        while self.tok.kind != "eof":
            t = self.tok
            if self.peek("factor"):
                self.factor()
            elif self.peek("init"):
                if initial is not None:
                    self.fail("a single init declaration")
                initial = self.init()
            elif self.peek("step"):
                if initial is None:
                    self.fail("init declaration before the first step")
                steps.append(self.step())
            elif self.peek("halt"):
                if halt is not None:
                    self.fail("a single halt declaration")
                halt = self.halt()
            else:
                self.fail("'factor', 'init', 'step' or 'halt'", t)
        if initial is None:
            self.fail("init declaration")
        return Scenario(name, tuple(self.factors), initial, tuple(steps), halt)

    def factor(self):
        self.expect("factor")
        name = self.ident("factor name").text
        self.expect("{")
        labels = [self.ident("basis label").text]
        while self.peek(","):
            self.advance()
            labels.append(self.ident("basis label").text)
        self.expect("}")
        self.factors.append(FactorSpace(name, tuple(labels)))

    def halt(self) -> dict[str, str]:
        self.expect("halt")
        self.expect("{")
        out = {}
        while True:
            sid = self.ident("step id")
            self.expect("=")
            lab = self.ident("outcome label")
            if sid.text in out:
                raise ParseError(sid.pos, "each step at most once", f"found repeated step {sid.text!r}")
            out[sid.text] = lab.text
            if not self.peek(","):
                break
            self.advance()
        self.expect("}")
        return out

    # amplitudes
    def rational(self) -> Fraction:
        num = self.expect_kind("number", "integer")
        if not num.text.isdigit():
            self.fail("integer", num)
        q = Fraction(int(num.text))
        if self.peek("/"):
            self.advance()
            den = self.expect_kind("number", "integer")
            if not den.text.isdigit():
                self.fail("integer", den)
            if int(den.text) == 0:
                raise ParseError(den.pos, "nonzero denominator", "found 0")
            q /= int(den.text)
        return q

    def amp_factor(self) -> _Amp:
        t = self.tok
        if self.peek("-"):
            self.advance()
            return -self.amp_factor()
        if self.peek("i"):
            self.advance()
            return _Amp(1j, Surd.imag_unit())
        if self.peek("sqrt"):
            self.advance()
            self.expect("(")
            q = self.rational()
            self.expect(")")
            return self._surd_amp(Surd.sqrt(q), t)
        if t.kind == "number":
            self.advance()
            if self.peek("/"):
                if t.text != "1":
                    self.fail("'1' before '/sqrt'", t)
                self.advance()
                self.expect("sqrt")
                self.expect("(")
                q = self.rational()
                self.expect(")")
                if q == 0:
                    raise ParseError(t.pos, "nonzero radicand", "found 1/sqrt(0)")
                return self._surd_amp(Surd.inv_sqrt(q), t)
            if t.text.isdigit():
                return self._surd_amp(Surd.rational(int(t.text)), t)
            v = float(t.text)
            if not np.isfinite(v):
                raise ParseError(t.pos, "finite number", f"found {t.text!r}")
            return _Amp(complex(v), None)
        self.fail("amplitude or ket")

    def _surd_amp(self, s: Surd, tok: Token) -> _Amp:
        try:
            v = complex(s)
        except OverflowError:
            v = complex(float("inf"))
        if not np.isfinite(v):
            raise ParseError(tok.pos, "finite amplitude", f"found {tok.text!r}")
        return _Amp(v, s)

    def coefficient(self) -> _Amp:
        c = _AMP_ONE
        while not self.peek("|"):
            c = c * self.amp_factor()
            self.expect("*")
        if not np.isfinite(c.value):
            self.fail("finite amplitude")
        return c

    def labels(self, close: str) -> list[Token]:
        out = [self.ident("basis label")]
        while self.peek(","):
            self.advance()
            out.append(self.ident("basis label"))
        self.expect(close)
        return out

    # state vectors
    def _positional(self, labs: list[Token]) -> list[int]:
        idx = []
        for j, lt in enumerate(labs):
            f = self.factors[j]
            if lt.text not in f.labels:
                raise ParseError(lt.pos, f"a basis label of factor {f.name}", f"found {lt.text!r}")
            idx.append(f.labels.index(lt.text))
        return idx


    def init(self) -> StateVector:
        self.expect("init")
        self.expect("=")
        if not self.factors:
            self.fail("factor declarations before init")
        arity = None
        value = None
        exact = None
        sign = _AMP_ONE
        while True:
            start = self.tok
            c = sign * self.coefficient()
            bar = self.expect("|")
            labs = self.labels(">")
            if arity is None:
                arity = len(labs)
                if arity > len(self.factors):
                    raise ParseError(bar.pos, f"ket arity at most {len(self.factors)}", f"ket arity {arity}")
                dim = self.dim(arity, bar)
                value = np.zeros(dim, dtype=complex)
                exact = np.full(dim, ZERO, dtype=object)
            elif len(labs) != arity:
                raise ParseError(bar.pos, str(arity), f"ket arity {len(labs)}")
            flat = _flat_index(self.factors, self._positional(labs))
            value[flat] += c.value
            if exact is not None and c.exact is not None:
                exact[flat] = exact[flat] + c.exact
            else:
                exact = None
            if not np.all(np.isfinite(value)):
                raise ParseError(start.pos, "finite amplitude", "found overflow")
            if self.peek("+") or self.peek("-"):
                sign = _AMP_ONE if self.advance().text == "+" else -_AMP_ONE
                continue
            break
        self.active = arity
        return StateVector(value, None, exact)

    def step(self) -> MeasurementStep:
        self.expect("step")
        sid = self.ident("step id").text
        self.expect("observer")
        observer = _unquote(self.expect_kind("string", "observer name string").text)
        state: dict = {}
        merged = None
        if self.peek("mergeable"):
            self.advance()
            self.expect("=")
            merged = self.op_expr(state)
        self.expect("{")
        branches = []
        while True:
            self.expect("branch")
            lab = self.ident("outcome label").text
            self.expect(":")
            branches.append((lab, self.op_expr(state)))
            if not self.peek("branch"):
                break
        self.expect("}")
        self.active = state["out"]
        return MeasurementStep(sid, observer, tuple(branches), merged)

    def op_expr(self, state: dict) -> LinearMap:
        """Parse a sum of |ket><bra| terms acting on the currently active factors.

        ``state['out']`` fixes the output factor count once known, so every
        operator of a step agrees.
        """
        n_in = self.active
        value = None
        exact = None
        all_exact = True
        sign = _AMP_ONE
        while True:
            c = sign * self.coefficient()
            bar = self.expect("|")
            kets = self.labels(">")
            lt = self.expect("<")
            bras = self.labels("|")
            kk, bb = len(kets), len(bras)
            if bb > n_in:
                raise ParseError(lt.pos, str(n_in), f"bra arity {bb}")
            if kk < bb:
                raise ParseError(bar.pos, str(bb), f"ket arity {kk}")
            if kk > bb:
                if bb != n_in:
                    raise ParseError(lt.pos, str(n_in), f"bra arity {bb}")
                if kk > len(self.factors):
                    raise ParseError(bar.pos, f"at most {len(self.factors)}", f"ket arity {kk}")
                n_out = kk
            else:
                n_out = n_in
            if state.get("out") is None:
                state["out"] = n_out
            elif state["out"] != n_out:
                raise ParseError(bar.pos, f"output arity {state['out']}", f"output arity {n_out}")
            rows = self.dim(n_out, bar)
            cols = self.dim(n_in, lt)
            if value is None:
                value = np.zeros((rows, cols), dtype=complex)
                exact = np.full((rows, cols), ZERO, dtype=object)

            if kk == bb and kk < n_in:
                kf = self.resolve_local(kets)
                bf = self.resolve_local(bras)
                if [f for f, _ in kf] != [f for f, _ in bf]:
                    raise ParseError(lt.pos, "bra on the same factors as the ket", f"found {','.join(t.text for t in bras)!r}")
                local = {f: (ki, bi) for (f, ki), (_, bi) in zip(kf, bf)}
                # enumerate joint (row, col) pairs: local factors fixed, others diagonal
                pairs = [(0, 0)]
                for f in range(n_in):
                    d = self.factors[f].dim
                    if f in local:
                        ki, bi = local[f]
                        pairs = [(r * d + ki, q * d + bi) for r, q in pairs]
                    else:
                        pairs = [(r * d + j, q * d + j) for r, q in pairs for j in range(d)]
                    if len(pairs) > self.max_dim:
                        raise ParseError(bar.pos, f"joint dimension at most {self.max_dim}", "too many entries")
            else:
                pairs = [(_flat_index(self.factors, self._positional(kets)), _flat_index(self.factors, self._positional(bras)))]
            for r, q in pairs:
                value[r, q] += c.value
                if all_exact and c.exact is not None:
                    exact[r, q] = exact[r, q] + c.exact
            if c.exact is None:
                all_exact = False
            if not np.all(np.isfinite(value)):
                raise ParseError(bar.pos, "finite amplitude", "found overflow")
            if self.peek("+") or self.peek("-"):
                sign = _AMP_ONE if self.advance().text == "+" else -_AMP_ONE
                continue
            break
        return LinearMap(value, exact if all_exact else None)

    def resolve_local(self, labs: list[Token]) -> list[tuple[int, int]]:
        """Map factor-local labels to increasing active-factor positions."""
        active = self.factors[: self.active]
        found: list[list[tuple[int, int]]] = []

        def search(j, start, acc):
            if len(found) > 1:
                return
            if j == len(labs):
                found.append(list(acc))
                return
            for f in range(start, len(active)):
                if labs[j].text in active[f].labels:
                    acc.append((f, active[f].labels.index(labs[j].text)))
                    search(j + 1, f + 1, acc)
                    acc.pop()

        search(0, 0, [])
        if not found:
            raise ParseError(labs[0].pos, "basis labels of the active factors", f"found {','.join(t.text for t in labs)!r}")
        if len(found) > 1:
            raise ParseError(labs[0].pos, "labels naming a unique factor subset", f"found ambiguous {','.join(t.text for t in labs)!r}")
        return found[0]

    def dim(self, nfactors: int, tok: Token) -> int:
        d = 1
        for f in self.factors[:nfactors]:
            d *= f.dim
        if d > self.max_dim:
            raise ParseError(tok.pos, f"joint dimension at most {self.max_dim}", f"dimension {d}")
        return d





def _flat_index(factors, idx) -> int:
    flat = 0
    for f, i in zip(factors, idx):
        flat = flat * f.dim + i
    return flat











def parse_scenario(text: str, max_dim: int = la.MAX_DIM) -> Scenario:
    """Parse ``.scn`` text. Raises :class:`ParseError` at the first failure.

    Structural problems that parse fine (incomplete branch sets, a halt
    target on a missing step, ...) are left to :func:`obspart.scenario.validate`.
    """
    return _Parser(text, max_dim).scenario()


# ---------------------------------------------------------------------------
# emission


def _fmt_float(x: float) -> str:
    return format(x, ".17g")


def _entry_terms(value: complex, ex: Surd | None) -> list[tuple[bool, str]]:
    if ex is not None:
        return ex.format_terms()
    out = []
    if value.real != 0:
        out.append((value.real < 0, _fmt_float(abs(value.real))))
    if value.imag != 0:
        out.append((value.imag < 0, "i*" + _fmt_float(abs(value.imag))))
    return out


def _join(terms: list[tuple[bool, str, str]]) -> str:
    """terms: (negative, magnitude, ket-ish text)."""
    parts = []
    for k, (neg, mag, body) in enumerate(terms):
        coef = "" if mag == "1" else mag + "*"
        if k == 0:
            parts.append(("-" if neg and coef else "-1*" if neg else "") + coef + body)
        else:
            parts.append(("- " if neg else "+ ") + coef + body)
    return " ".join(parts)


def _emit_vector(v: StateVector, labels: list[tuple[str, ...]]) -> str:
    terms = []
    for i, val in enumerate(v.amps):
        ex = v.exact[i] if v.exact is not None else None
        for neg, mag in _entry_terms(complex(val), ex):
            terms.append((neg, mag, "|" + ",".join(labels[i]) + ">"))
    if not terms:
        terms.append((False, "0", "|" + ",".join(labels[0]) + ">"))
    return _join(terms)


def _emit_map(m: LinearMap, out_labels, in_labels) -> str:
    terms = []
    for r in range(m.rows):
        for q in range(m.cols):
            ex = m.exact[r, q] if m.exact is not None else None
            for neg, mag in _entry_terms(complex(m.entries[r, q]), ex):
                terms.append((neg, mag, "|" + ",".join(out_labels[r]) + "><" + ",".join(in_labels[q]) + "|"))
    if not terms:
        terms.append((False, "0", "|" + ",".join(out_labels[0]) + "><" + ",".join(in_labels[0]) + "|"))
    return _join(terms)


def emit_scenario(s: Scenario) -> str:
    """Canonical text for a scenario whose dimensions follow its factors."""
    lines = [f"scenario {_quote(s.name)}"]
    for f in s.factors:
        lines.append(f"factor {f.name} {{ {', '.join(f.labels)} }}")
    n_in = s.factor_prefix(s.initial.dim)
    if n_in is None:
        raise ValueError("initial state dimension matches no prefix of the factors")
    lines.append("init = " + _emit_vector(s.initial, s.basis_labels(n_in)))
    for st in s.steps:
        n_out = s.factor_prefix(st.shape[0])
        if n_out is None:
            raise ValueError(f"step {st.id} output dimension matches no prefix of the factors")
        out_l, in_l = s.basis_labels(n_out), s.basis_labels(n_in)
        head = f"step {st.id} observer {_quote(st.observer)}"
        if st.merged is not None:
            head += " mergeable = " + _emit_map(st.merged, out_l, in_l)
        lines.append(head + " {")
        for lab, op in st.branches:
            lines.append(f"  branch {lab} : " + _emit_map(op, out_l, in_l))
        lines.append("}")
        n_in = n_out
    if s.halt_target:
        pairs = ", ".join(f"{k} = {v}" for k, v in s.halt_target.items())
        lines.append(f"halt {{ {pairs} }}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# priors

_PRIOR_LINE = re.compile(r"\s*p\s*\{(?P<ids>[^}]*)\}\s*=\s*(?P<num>\S+)\s*$")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


def parse_prior(text: str) -> PartitionPrior:
    """Parse ``p{I,II} = 0.25`` lines. Unlisted partitions get weight 0.

    Raises :class:`ParseError` on syntax and :class:`InvalidPrior` when the
    weights are negative or do not sum to 1 within 1e-9.
    """
    weights: dict = {}
    for n, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        m = _PRIOR_LINE.match(line)
        if m is None:
            col = len(line) - len(line.lstrip()) + 1
            raise ParseError(SourcePosition(n, col), "'p{<step ids>} = <number>'", f"found {line.strip()!r}")
        ids_text = m.group("ids")
        ids = [x.strip() for x in ids_text.split(",")] if ids_text.strip() else []
        for x in ids:
            if not _IDENT.match(x):
                raise ParseError(SourcePosition(n, m.start("ids") + 1), "step id", f"found {x!r}")
        num = m.group("num")
        try:
            w = float(Fraction(num)) if "/" in num else float(num)
        except (ValueError, ZeroDivisionError):
            raise ParseError(SourcePosition(n, m.start("num") + 1), "number", f"found {num!r}") from None
        if not np.isfinite(w):
            raise ParseError(SourcePosition(n, m.start("num") + 1), "finite number", f"found {num!r}")
        p = Partition(ids)
        if p in weights:
            raise ParseError(SourcePosition(n, 1), "each partition at most once", f"found repeated {format_partition(p)}")
        weights[p] = w
    prior = PartitionPrior(weights)
    bad = prior.violations()
    if bad:
        raise InvalidPrior(bad)
    return prior


def emit_prior(prior: PartitionPrior, scenario: Scenario | None = None) -> str:
    items = list(prior.weights.items())
    if scenario is not None:
        items.sort(key=lambda pw: partition_key(pw[0], scenario))
    return "".join(f"p{format_partition(p, scenario)} = {_fmt_float(w)}\n" for p, w in items)
