"""Text format for knowledge bases.

::

    entity Unit ;
    entity Company as p ;
    hyptype PltSubType (u:Unit) values [armor, mech] ;
    fragment F5 (u:Unit, p:Company) {
      input CoSubType(p) ;
      resident PltSubType(u) ;
      edge CoSubType(p) -> PltSubType(u) ;
      cpt PltSubType | CoSubType=armorCo : [0.9, 0.1] ;
      star_prior Company = 0.3 ;
    }

``#`` starts a comment running to the end of the line.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .model import FragmentSpec, KbError, MebnKb

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+) |
    (?P<nl>\n) |
    (?P<comment>\#[^\n]*) |
    (?P<arrow>->) |
    (?P<number>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?(?![A-Za-z_])) |
    (?P<name>[A-Za-z_][A-Za-z0-9_]*|\d+[A-Za-z_][A-Za-z0-9_]*) |
    (?P<punct>[;(),:\[\]{}|=*]) |
    (?P<bad>.)
    """,
    re.VERBOSE,
)


class KbParseError(KbError):
    def __init__(self, message: str, line: int, col: int):
        self.line = line
        self.col = col
        super().__init__(f"line {line}, column {col}: {message}")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out = []
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        col = m.start() - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "bad":
            raise KbParseError(f"unexpected character {m.group()!r}", line, col)
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, col))
    out.append(Token("eof", "", line, len(text) - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        raise KbParseError(msg, tok.line, tok.col)

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            self.error(f"expected {text!r}, found {self.tok.text or 'end of file'!r}")
        return self.next()

    def accept(self, text: str) -> bool:
        if self.tok.text == text:
            self.i += 1
            return True
        return False

    def name(self, what: str = "name") -> str:
        if self.tok.kind != "name":
            self.error(f"expected {what}, found {self.tok.text or 'end of file'!r}")
        return self.next().text

    def value(self) -> str:
        if self.tok.kind in ("name", "number"):
            return self.next().text
        self.error(f"expected value label, found {self.tok.text or 'end of file'!r}")

    def number(self) -> float:
        if self.tok.kind != "number":
            self.error(f"expected number, found {self.tok.text or 'end of file'!r}")
        return float(self.next().text)

    def typed_attrs(self) -> list[tuple[str, str]]:
        self.expect("(")
        attrs = []
        if not self.accept(")"):
            while True:
                a = self.name("attribute name")
                self.expect(":")
                attrs.append((a, self.name("entity type")))
                if self.accept(")"):
                    break
                self.expect(",")
        return attrs

    def node_ref(self) -> tuple[str, list[str], Token]:
        start = self.tok
        label = self.name("hypothesis type")
        self.expect("(")
        attrs = []
        if not self.accept(")"):
            while True:
                attrs.append(self.name("attribute"))
                if self.accept(")"):
                    break
                self.expect(",")
        return label, attrs, start

    def numbers(self) -> list[float]:
        self.expect("[")
        out = []
        if not self.accept("]"):
            while True:
                out.append(self.number())
                if self.accept("]"):
                    break
                self.expect(",")
        return out

    def parse(self) -> MebnKb:
        kb = MebnKb()
        while self.tok.kind != "eof":
            start = self.tok
            kw = self.name("statement keyword")
            try:
                if kw == "entity":
                    label = self.name("entity type label")
                    prefix = self.name("id prefix") if self.accept("as") else None
                    self.expect(";")
                    kb.declare_entity_type(label, prefix)
                elif kw == "hyptype":
                    label = self.name("hypothesis type label")
                    attrs = self.typed_attrs()
                    self.expect("values")
                    self.expect("[")
                    values = []
                    if not self.accept("]"):
                        while True:
                            if self.tok.text == "*":
                                self.error("'*' is reserved and cannot be declared")
                            values.append(self.value())
                            if self.accept("]"):
                                break
                            self.expect(",")
                    self.expect(";")
                    kb.declare_hypothesis_type(label, attrs, values)
                elif kw == "fragment":
                    self.fragment(kb)
                elif kw == "star_prior":
                    self.star_prior(kb)
                else:
                    self.error(f"unknown statement {kw!r}", start)
            except KbParseError:
                raise
            except KbError as exc:
                raise KbParseError(str(exc), start.line, start.col) from None
        return kb

    def star_prior(self, kb: MebnKb):
        et = self.name("entity type")
        self.expect("=")
        p = self.number()
        self.expect(";")
        kb.set_star_prior(et, p)

    def fragment(self, kb: MebnKb):
        fid = self.name("fragment id")
        attrs = self.typed_attrs()
        self.expect("{")
        spec = FragmentSpec(fid, attrs, [], [], [], {})
        declared: dict[str, list[str]] = {}
        rows: dict[str, list] = {}
        while not self.accept("}"):
            start = self.tok
            kw = self.name("fragment statement")
            if kw in ("input", "resident"):
                label, node_attrs, tok = self.node_ref()
                self.expect(";")
                (spec.inputs if kw == "input" else spec.residents).append((label, node_attrs))
                declared[label] = node_attrs
            elif kw == "edge":
                p, pa, ptok = self.node_ref()
                self.expect("->")
                c, ca, ctok = self.node_ref()
                self.expect(";")
                for label, a, tok in ((p, pa, ptok), (c, ca, ctok)):
                    if label not in declared:
                        self.error(f"edge endpoint {label} is not declared in fragment {fid}", tok)
                    if declared[label] != a:
                        self.error(f"edge endpoint {label}({','.join(a)}) does not match its declaration "
                                   f"{label}({','.join(declared[label])})", tok)
                spec.edges.append((p, c))
            elif kw == "cpt":
                label = self.name("hypothesis type")
                assignment = {}
                if self.accept("|"):
                    while True:
                        ptok = self.tok
                        parent = self.name("parent type")
                        self.expect("=")
                        if self.tok.text == "*":
                            self.error("rows for '*' are assigned automatically")
                        state = self.value()
                        if parent in assignment:
                            self.error(f"parent {parent} named twice", ptok)
                        assignment[parent] = state
                        if not self.accept(","):
                            break
                self.expect(":")
                probs = self.numbers()
                self.expect(";")
                rows.setdefault(label, []).append((assignment, probs))
            elif kw == "star_prior":
                try:
                    self.star_prior(kb)
                except KbParseError:
                    raise
                except KbError as exc:
                    raise KbParseError(str(exc), start.line, start.col) from None
            else:
                self.error(f"unknown fragment statement {kw!r}", start)
        self.accept(";")
        spec.cpts = rows
        kb.declare_fragment_type(spec)


def loads_kb(text: str) -> MebnKb:
    """Parse KB text. Raises :class:`KbParseError` carrying line/column."""
    return _Parser(text).parse()


def load_kb(path) -> MebnKb:
    with open(path, encoding="utf-8") as fh:
        return loads_kb(fh.read())


def _num(x: float) -> str:
    r = repr(float(x))
    return r[:-2] if r.endswith(".0") else r


def dumps_kb(kb: MebnKb) -> str:
    out = []
    for e in kb.entity_types.values():
        default = e.label[0].lower()
        out.append(f"entity {e.label} ;" if e.prefix == default else f"entity {e.label} as {e.prefix} ;")
    out.append("")
    for h in kb.hypothesis_types.values():
        attrs = ", ".join(f"{a}:{t}" for a, t in h.attributes)
        out.append(f"hyptype {h.label} ({attrs}) values [{', '.join(h.values)}] ;")
    for et in kb.entity_types:
        if et in kb.star_priors:
            out.append("")
            break
    for et in kb.entity_types:
        if et in kb.star_priors:
            out.append(f"star_prior {et} = {_num(kb.star_priors[et])} ;")
    for frag in kb.fragments.values():
        out.append("")
        attrs = ", ".join(f"{a}:{t}" for a, t in frag.attributes)
        out.append(f"fragment {frag.fragment_id} ({attrs}) {{")
        ref = {n.label: f"{n.label}({','.join(n.attrs)})" for n in frag.nodes}
        for n in frag.nodes:
            out.append(f"  {'input' if n.is_input else 'resident'} {ref[n.label]} ;")
        for n in frag.nodes:
            for p in frag.parents[n.label]:
                out.append(f"  edge {ref[p]} -> {ref[n.label]} ;")
        for label in frag.residents:
            parents = frag.parents[label]
            table = frag.cpts[label]
            pvals = [kb.hypothesis_types[p].values for p in parents]
            flat = table.reshape(-1, table.shape[-1])
            for row, combo in zip(flat, itertools.product(*pvals)):
                cond = " | " + ", ".join(f"{p}={s}" for p, s in zip(parents, combo)) if parents else ""
                out.append(f"  cpt {label}{cond} : [{', '.join(_num(x) for x in row)}] ;")
        out.append("}")
    return "\n".join(out).strip("\n") + "\n"


def dump_kb(kb: MebnKb, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_kb(kb))
