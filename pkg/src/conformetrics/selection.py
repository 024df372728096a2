"""Atom selection language.

Grammar (EBNF)::

    expr     = and_expr , { "or" , and_expr } ;
    and_expr = not_expr , { "and" , not_expr } ;
    not_expr = "not" , not_expr | primary ;
    primary  = "(" , expr , ")"
             | "all" | "protein" | "backbone" | "calpha"
             | "chain" , INT
             | "resid" , INT , [ "-" , INT ]
             | "name" , WORD , { WORD }
             | "element" , WORD , { WORD } ;

``backbone`` means atoms named N, CA and C (carbonyl O is not included;
write ``backbone or name O`` to add it). ``protein`` is every atom whose
residue name is not a recognised solvent, ion or co-solvent.
"""

from __future__ import annotations

import re

import numpy as np

from .core import Selection, Topology
from .errors import SelectionError

BACKBONE_NAMES = ("N", "CA", "C")

NON_PROTEIN_RESIDUES = frozenset({
    "SOL", "HOH", "WAT", "TIP3", "SPC", "NA", "CL", "K", "MG", "CA2", "ION",
    "NA+", "CL-", "MOH", "MEOH", "HEX", "TCE", "ACE", "ACN", "ACT",
})

_KEYWORDS = {"and", "or", "not", "all", "protein", "backbone", "calpha",
             "chain", "resid", "name", "element"}
_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def _tokenize(query):
    tokens = []
    pos = 0
    while pos < len(query):
        m = _TOKEN.match(query, pos)
        if m is None or m.end() == pos:
            break
        start = m.start(m.lastindex) if m.lastindex else m.end()
        text = m.group(m.lastindex) if m.lastindex else None
        if text is not None:
            tokens.append((text, start))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, query, topology):
        self.query = query
        self.tokens = _tokenize(query)
        self.k = 0
        self.top = topology
        self.n = topology.n_atoms

    def peek(self):
        return self.tokens[self.k][0] if self.k < len(self.tokens) else None

    def where(self):
        return self.tokens[self.k][1] if self.k < len(self.tokens) else len(self.query)

    def take(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def parse(self):
        if not self.tokens:
            raise SelectionError("empty selection expression", 0)
        mask = self.expr()
        if self.k != len(self.tokens):
            raise SelectionError(f"unexpected token {self.peek()!r}", self.where())
        return mask

    def expr(self):
        mask = self.and_expr()
        while self.peek() == "or":
            self.take()
            mask = mask | self.and_expr()
        return mask

    def and_expr(self):
        mask = self.not_expr()
        while self.peek() == "and":
            self.take()
            mask = mask & self.not_expr()
        return mask

    def not_expr(self):
        if self.peek() == "not":
            self.take()
            return ~self.not_expr()
        return self.primary()

    def _int(self, what):
        if self.peek() is None:
            raise SelectionError(f"expected {what}, got end of input", self.where())
        text, at = self.take()
        try:
            return int(text)
        except ValueError:
            raise SelectionError(f"expected {what}, got {text!r}", at) from None

    def _words(self, keyword):
        words = []
        while self.peek() is not None and self.peek() not in _KEYWORDS and self.peek() not in "()":
            words.append(self.take()[0])
        if not words:
            raise SelectionError(f"'{keyword}' needs at least one argument", self.where())
        return words

    def primary(self):
        tok = self.peek()
        if tok is None:
            raise SelectionError("unexpected end of expression", self.where())
        text, at = self.take()
        atoms = self.top.atoms
        if text == "(":
            mask = self.expr()
            if self.peek() != ")":
                raise SelectionError("missing closing parenthesis", self.where())
            self.take()
            return mask
        if text == "all":
            return np.ones(self.n, dtype=bool)
        if text == "protein":
            return np.array([a.residue_name.upper() not in NON_PROTEIN_RESIDUES for a in atoms], dtype=bool)
        if text == "backbone":
            return np.array([a.name in BACKBONE_NAMES for a in atoms], dtype=bool)
        if text == "calpha":
            return np.array([a.name == "CA" for a in atoms], dtype=bool)
        if text == "chain":
            k = self._int("chain number")
            return self.top.chain_ids == k
        if text == "resid":
            if self.peek() is None:
                raise SelectionError("expected residue range", self.where())
            rtext, rat = self.take()
            m = re.fullmatch(r"(-?\d+)(?:-(-?\d+))?", rtext)
            if m is None:
                raise SelectionError(f"bad residue range {rtext!r}", rat)
            lo = int(m.group(1))
            hi = int(m.group(2)) if m.group(2) is not None else lo
            seqs = self.top.residue_seqs
            return (seqs >= lo) & (seqs <= hi)
        if text == "name":
            names = set(self._words("name"))
            return np.array([a.name in names for a in atoms], dtype=bool)
        if text == "element":
            els = {w.capitalize() for w in self._words("element")}
            return np.array([a.element in els for a in atoms], dtype=bool)
        raise SelectionError(f"unknown keyword {text!r}", at)


def select(topology: Topology, query: str) -> Selection:
    """Resolve a selection expression against a topology.

    Raises :class:`SelectionError` with a character position on syntax
    errors and when nothing matches.
    """
    mask = _Parser(query, topology).parse()
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise SelectionError(f"selection {query!r} matched no atoms")
    return Selection(idx, label=query)
