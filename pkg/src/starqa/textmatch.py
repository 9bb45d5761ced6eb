"""Token matching used by simulated tools and the heuristic planner."""

from __future__ import annotations

import re

_WORD = re.compile(r"[a-z0-9]+")

# Small fixed list; enough to stop query scaffolding from matching everything.
STOPWORDS = frozenset(
    """a an and are at by does do did for from in is it of on or the to was were
    what when where which while who how this that these those overall video appear
    appears happening happens say says read reads shown visible during best
    describes distinct many first happen following""".split()
)


def tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def content_tokens(text: str) -> set[str]:
    return {t for t in tokenize(text) if t not in STOPWORDS}


def overlap(a: str, b: str) -> int:
    return len(content_tokens(a) & content_tokens(b))


def best_match(query: str, candidates: list[str]) -> tuple[int, int]:
    """Return (index, score) of the candidate with the largest token overlap.

    Ties break toward the earliest candidate. Score 0 means nothing matched.
    """
    best_i, best_s = -1, 0
    for i, cand in enumerate(candidates):
        s = overlap(query, cand)
        if s > best_s:
            best_i, best_s = i, s
    return best_i, best_s
