"""Tiny call-expression grammar used by config strings.

    expr  := NAME [ "(" [ arg ("," arg)* ] ")" ]
    arg   := NUMBER | "inf" | expr | "[" [ arg ("," arg)* ] "]"

``parse("max_of(coord_abs(1), beta_star(0.25))")`` returns
``("max_of", [("coord_abs", [1]), ("beta_star", [0.25])])``.
"""

import math
import re

_TOKEN = re.compile(r"\s*(?:(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<sym>[(),\[\]]))")


class GrammarError(ValueError):
    pass


def _tokens(text):
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise GrammarError(f"unexpected character at {pos} in {text!r}")
        pos = m.end()
        if m.group("num") is not None:
            tok = m.group("num")
            out.append(("num", float(tok) if any(c in tok for c in ".eE") else int(tok)))
        elif m.group("name") is not None:
            out.append(("name", m.group("name")))
        else:
            out.append(("sym", m.group("sym")))
    return out


def parse(text):
    toks = _tokens(text)
    val, pos = _arg(toks, 0)
    if pos != len(toks):
        raise GrammarError(f"trailing input in {text!r}")
    if not isinstance(val, tuple):
        raise GrammarError(f"expected a name in {text!r}")
    return val


def _arg(toks, pos):
    if pos >= len(toks):
        raise GrammarError("unexpected end of input")
    kind, val = toks[pos]
    if kind == "num":
        return val, pos + 1
    if kind == "sym" and val == "[":
        items, pos = _list(toks, pos + 1, "]")
        return items, pos
    if kind == "name":
        if val == "inf":
            return math.inf, pos + 1
        if pos + 1 < len(toks) and toks[pos + 1] == ("sym", "("):
            args, pos = _list(toks, pos + 2, ")")
            return (val, args), pos
        return (val, []), pos + 1
    raise GrammarError(f"unexpected token {val!r}")


def _list(toks, pos, close):
    items = []
    if pos < len(toks) and toks[pos] == ("sym", close):
        return items, pos + 1
    while True:
        item, pos = _arg(toks, pos)
        items.append(item)
        if pos >= len(toks):
            raise GrammarError(f"missing {close!r}")
        if toks[pos] == ("sym", ","):
            pos += 1
            continue
        if toks[pos] == ("sym", close):
            return items, pos + 1
        raise GrammarError(f"expected ',' or {close!r}")


def unparse(node):
    if isinstance(node, tuple):
        name, args = node
        return name if not args else f"{name}({', '.join(unparse(a) for a in args)})"
    if isinstance(node, list):
        return "[" + ", ".join(unparse(a) for a in node) + "]"
    if isinstance(node, float) and math.isinf(node):
        return "inf"
    return repr(node)
