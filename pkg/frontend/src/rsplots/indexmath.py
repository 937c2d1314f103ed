"""Homogeneity arithmetic on the canonical multi-index strings.

The primary pipeline serializes indices as sorted token products like
"k1^2*n(0,1)"; this module recomputes |beta| from that text when no
enumerate table is supplied.
"""

from __future__ import annotations


def parse_tokens(text: str) -> list:
    if text.strip() == "0":
        return []
    out = []
    for tok in text.split("*"):
        if "^" in tok:
            head, _, e = tok.partition("^")
            exp = int(e)
        else:
            head, exp = tok, 1
        if head.startswith("k"):
            out.append(("k", int(head[1:]), exp))
        elif head.startswith("n(") and head.endswith(")"):
            n = tuple(int(v) for v in head[2:-1].split(","))
            out.append(("n", n, exp))
        else:
            raise ValueError(f"cannot parse index token {tok!r}")
    return out


def homogeneity(text: str, alpha: float) -> float:
    ks = 0
    npop = 0
    ndeg = 0
    for kind, key, exp in parse_tokens(text):
        if kind == "k":
            ks += key * exp
        else:
            npop += exp
            ndeg += (2 * key[0] + sum(key[1:])) * exp
    return alpha * (1 + ks - npop) + ndeg
