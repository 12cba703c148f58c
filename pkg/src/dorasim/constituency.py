"""Constituency formalism: level-indexed chart parsing, time patterns,
pushout equivalence classes, syntax trees, and structure-dependent movement.

A sequence of words is parsed bottom-up with binary merges.  Each constituent
carries a level: words sit at level 1, and a merged constituent sits one level
above the deeper of its two children.  The per-level images abstract to time
patterns (sets of (end position, category) pairs plus a root flag), which in
turn are quotiented into equivalence classes by pattern identity.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class GrammarError(ValueError):
    """Raised for lexicon, rule table, or sequence problems."""


class TransformError(ValueError):
    """Raised when a movement transformation cannot apply."""


class LexCat(Enum):
    N = "N"
    V = "V"
    Adj = "Adj"
    P = "P"
    NP = "NP"
    VP = "VP"
    IP = "IP"
    PP = "PP"

    def __str__(self) -> str:
        return self.value


# Core five-word lexicon used throughout the formal examples.
CORE_LEXICON: dict[str, LexCat] = {
    "men": LexCat.N,
    "dogs": LexCat.N,
    "bite": LexCat.V,
    "say": LexCat.V,
    "big": LexCat.Adj,
}

# Shipped default: core words plus singulars, auxiliaries, prepositions and
# assorted example vocabulary. The dataset generator's themed words live with
# the generator; batch commands merge them in for generated corpora.
DEFAULT_LEXICON: dict[str, LexCat] = {
    **CORE_LEXICON,
    "dog": LexCat.N,
    "man": LexCat.N,
    "cat": LexCat.N,
    "cats": LexCat.N,
    "birds": LexCat.N,
    "bird": LexCat.N,
    "kids": LexCat.N,
    "teeth": LexCat.N,
    "claws": LexCat.N,
    "wings": LexCat.N,
    "sticks": LexCat.N,
    "strangers": LexCat.N,
    "mice": LexCat.N,
    "worms": LexCat.N,
    "balls": LexCat.N,
    "are": LexCat.V,
    "biting": LexCat.V,
    "chase": LexCat.V,
    "scratch": LexCat.V,
    "peck": LexCat.V,
    "poke": LexCat.V,
    "see": LexCat.V,
    "hear": LexCat.V,
    "claim": LexCat.V,
    "small": LexCat.Adj,
    "old": LexCat.Adj,
    "young": LexCat.Adj,
    "loud": LexCat.Adj,
    "with": LexCat.P,
    "near": LexCat.P,
}

# Binary merge table: (left category, right category) -> result category.
DEFAULT_RULES: dict[tuple[LexCat, LexCat], LexCat] = {
    (LexCat.Adj, LexCat.N): LexCat.NP,
    (LexCat.V, LexCat.NP): LexCat.VP,
    (LexCat.V, LexCat.IP): LexCat.VP,
    (LexCat.V, LexCat.VP): LexCat.VP,
    (LexCat.P, LexCat.NP): LexCat.PP,
    (LexCat.VP, LexCat.PP): LexCat.VP,
    (LexCat.NP, LexCat.PP): LexCat.NP,
    (LexCat.NP, LexCat.VP): LexCat.IP,
}

# Unary promotion applied at use sites: a bare N may stand in for an NP
# inside a merge without creating a constituent of its own.
PROMOTIONS: dict[LexCat, LexCat] = {LexCat.N: LexCat.NP}


def load_grammar(source) -> tuple[dict[str, LexCat], dict[tuple[LexCat, LexCat], LexCat]]:
    """Load a {"lexicon": ..., "rules": ...} grammar from a path, file, or dict."""
    if isinstance(source, (str, Path)):
        data = json.loads(Path(source).read_text(encoding="utf-8"))
    elif isinstance(source, dict):
        data = source
    else:
        data = json.load(source)
    try:
        lexicon = {w.lower(): LexCat(c) for w, c in data["lexicon"].items()}
        rules = {(LexCat(a), LexCat(b)): LexCat(r) for a, b, r in data["rules"]}
    except (KeyError, ValueError, TypeError) as exc:
        raise GrammarError(f"malformed grammar file: {exc}") from exc
    return lexicon, rules


def lexical_projection(word: str, lexicon: dict[str, LexCat] | None = None) -> LexCat:
    """Map a word to its lexical category; unknown words raise GrammarError."""
    lex = DEFAULT_LEXICON if lexicon is None else lexicon
    try:
        return lex[word.lower()]
    except KeyError:
        raise GrammarError(f"word not in lexicon: {word!r}") from None


@dataclass(frozen=True)
class Constituent:
    """A chart constituent over a 1-based inclusive span.

    Words are level 1 with no children; merged constituents have exactly two
    children and sit at max(child levels) + 1.
    """

    category: LexCat
    start: int
    end: int
    level: int
    children: tuple["Constituent", ...] = ()
    token: str | None = None

    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


def _licensed(a: LexCat, b: LexCat, rules) -> list[tuple[LexCat, bool, bool]]:
    """All rule firings for an adjacent pair, with promotion flags (left, right).

    Order is deterministic: direct rule first, then right-promoted,
    left-promoted, both-promoted.
    """
    out = []
    seen = set()
    pa = PROMOTIONS.get(a)
    pb = PROMOTIONS.get(b)
    candidates = [(a, b, False, False), (a, pb, False, True),
                  (pa, b, True, False), (pa, pb, True, True)]
    for ca, cb, fl, fr in candidates:
        if ca is None or cb is None:
            continue
        result = rules.get((ca, cb))
        if result is not None and (result, fl, fr) not in seen:
            seen.add((result, fl, fr))
            out.append((result, fl, fr))
    return out


def merge(a: Constituent, b: Constituent, rules=None) -> Constituent | None:
    """Merge two adjacent constituents if the rule table licenses the pair.

    Returns the merged constituent (first licensed reading) or None when the
    spans are not adjacent or no rule applies.
    """
    rules = DEFAULT_RULES if rules is None else rules
    if a.end + 1 != b.start:
        return None
    firings = _licensed(a.category, b.category, rules)
    if not firings:
        return None
    cat, _, _ = firings[0]
    return Constituent(category=cat, start=a.start, end=b.end,
                       level=max(a.level, b.level) + 1, children=(a, b))


@dataclass(frozen=True)
class TimePattern:
    """Abstraction of a level image: (end position, category) pairs plus theta."""

    level: int
    entries: frozenset[tuple[int, LexCat]]
    theta: int

    def key(self) -> tuple:
        """Identity used for equivalence classing (the level is provenance)."""
        return (frozenset(self.entries), self.theta)

    def as_tuple(self) -> tuple:
        """Flat display form: ends, then categories, then theta."""
        ordered = sorted(self.entries, key=lambda e: (e[0], e[1].value))
        return tuple(e[0] for e in ordered) + tuple(e[1] for e in ordered) + (self.theta,)

    def __str__(self) -> str:
        ordered = sorted(self.entries, key=lambda e: (e[0], e[1].value))
        inner = ",".join(str(e[0]) for e in ordered) + ";" + ",".join(str(e[1]) for e in ordered)
        return f"({inner};{self.theta})" if self.entries else f"(;;{self.theta})"


@dataclass(frozen=True)
class LevelImage:
    """All constituents of one level, with the root flag for that level."""

    level: int
    constituents: tuple[Constituent, ...]
    theta: int

    def pattern(self) -> TimePattern:
        return TimePattern(
            level=self.level,
            entries=frozenset((c.end, c.category) for c in self.constituents),
            theta=self.theta,
        )


# Internal chart key and derivation record.
_Key = tuple[int, LexCat, int, int]  # (level, category, start, end)


class ParseChart:
    """Bottom-up chart over binary merges with level bookkeeping."""

    def __init__(self, words: tuple[str, ...], lexicon, rules):
        self.words = words
        self.lexicon = lexicon
        self.rules = rules
        # key -> list of derivations; a derivation is a token (level 1) or
        # (left key, right key, left promoted, right promoted)
        self.cells: dict[_Key, list] = {}
        self._by_level: dict[int, list[_Key]] = {}

    def keys_at(self, level: int) -> list[_Key]:
        return self._by_level.get(level, [])

    @property
    def max_level(self) -> int:
        return max(self._by_level) if self._by_level else 0

    def _add(self, key: _Key, deriv) -> None:
        if key not in self.cells:
            self.cells[key] = []
            self._by_level.setdefault(key[0], []).append(key)
        self.cells[key].append(deriv)

    def _build(self) -> None:
        n = len(self.words)
        for i, w in enumerate(self.words, start=1):
            cat = lexical_projection(w, self.lexicon)
            self._add((1, cat, i, i), w)
        for level in range(2, n + 1):
            pairs = [(la, level - 1) for la in range(1, level)]
            pairs += [(level - 1, lb) for lb in range(1, level - 1)]
            produced = False
            for la, lb in pairs:
                for ka in self.keys_at(la):
                    for kb in self.keys_at(lb):
                        if ka[3] + 1 != kb[2]:
                            continue
                        for cat, fl, fr in _licensed(ka[1], kb[1], self.rules):
                            self._add((level, cat, ka[2], kb[3]), (ka, kb, fl, fr))
                            produced = True
            if not produced:
                break

    def theta_level(self) -> int | None:
        """The level carrying theta = 1, or None if no level does."""
        n = len(self.words)
        top = self.max_level
        if top < 2:
            return None
        if any(k[2] == 1 and k[3] == n for k in self.keys_at(top)):
            return top
        return None

    def constituent(self, key: _Key) -> Constituent:
        """Representative constituent for a cell (first derivation)."""
        level, cat, start, end = key
        deriv = self.cells[key][0]
        if level == 1:
            return Constituent(cat, start, end, 1, token=deriv)
        ka, kb, _, _ = deriv
        return Constituent(cat, start, end, level,
                           children=(self.constituent(ka), self.constituent(kb)))

    def level_image(self, level: int) -> LevelImage:
        keys = sorted(self.keys_at(level), key=lambda k: (k[2], k[3], k[1].value))
        theta = 1 if self.theta_level() == level else 0
        return LevelImage(level=level, constituents=tuple(self.constituent(k) for k in keys),
                          theta=theta)

    def level_images(self) -> list[LevelImage]:
        """Images for levels 2 .. sequence length (empty levels included)."""
        return [self.level_image(lv) for lv in range(2, len(self.words) + 1)]

    def derivation_count(self, key: _Key) -> int:
        """Distinct derivations recorded for one (level, category, span) cell."""
        return len(self.cells.get(key, []))


def _normalize_words(sequence) -> tuple[str, ...]:
    if isinstance(sequence, str):
        words = sequence.replace("?", " ").replace(".", " ").replace(",", " ").split()
    else:
        words = list(sequence)
    words = tuple(w.lower() for w in words)
    if not words:
        raise GrammarError("empty sequence")
    return words


def chart_parse(sequence, lexicon=None, rules=None) -> ParseChart:
    """Parse a sentence or word list into a level-indexed chart."""
    words = _normalize_words(sequence)
    chart = ParseChart(words, DEFAULT_LEXICON if lexicon is None else lexicon,
                       DEFAULT_RULES if rules is None else rules)
    chart._build()
    return chart


def time_pattern(sequence_or_chart, level: int, lexicon=None, rules=None) -> TimePattern:
    """The time pattern of one level of a sequence."""
    chart = (sequence_or_chart if isinstance(sequence_or_chart, ParseChart)
             else chart_parse(sequence_or_chart, lexicon, rules))
    return chart.level_image(level).pattern()


def pattern_profile(sequence_or_chart, lexicon=None, rules=None) -> tuple[TimePattern, ...]:
    """Time patterns for every level 2 .. len(words) of a sequence."""
    chart = (sequence_or_chart if isinstance(sequence_or_chart, ParseChart)
             else chart_parse(sequence_or_chart, lexicon, rules))
    return tuple(img.pattern() for img in chart.level_images())


@dataclass
class PushoutClass:
    """An equivalence class of (sequence, level) images under pattern identity."""

    representative: TimePattern
    members: set[tuple[str, int]] = field(default_factory=set)


def build_pushout(sequences, lexicon=None, rules=None) -> list[PushoutClass]:
    """Quotient the per-level images of the sequences by pattern identity.

    Every (sequence, level) pair for levels 2 .. len(words) lands in exactly
    one class; classes are keyed by (entries, theta) regardless of level.
    """
    classes: dict[tuple, PushoutClass] = {}
    for seq in sequences:
        chart = chart_parse(seq, lexicon, rules)
        name = " ".join(chart.words)
        for pat in pattern_profile(chart):
            k = pat.key()
            if k not in classes:
                classes[k] = PushoutClass(representative=pat)
            classes[k].members.add((name, pat.level))
    return list(classes.values())


@dataclass(frozen=True)
class TreeNode:
    label: LexCat
    children: tuple["TreeNode", ...] = ()
    token: str | None = None

    def bracket(self) -> str:
        if self.token is not None:
            return f"({self.label} {self.token})"
        return "(" + str(self.label) + " " + " ".join(c.bracket() for c in self.children) + ")"

    def leaves(self) -> list[str]:
        if self.token is not None:
            return [self.token]
        return [w for c in self.children for w in c.leaves()]


@dataclass(frozen=True)
class SyntaxTree:
    root: TreeNode

    def bracket(self) -> str:
        return self.root.bracket()

    def words(self) -> list[str]:
        return self.root.leaves()


@dataclass
class ParseResult:
    """Outcome of mapping a chart to syntax trees.

    trees holds every full-span derivation; ambiguous is set when there is
    more than one, in which case all candidates are reported instead of an
    arbitrary choice.
    """

    trees: tuple[SyntaxTree, ...]
    ambiguous: bool

    @property
    def tree(self) -> SyntaxTree | None:
        return self.trees[0] if len(self.trees) == 1 else None


_TREE_CAP = 64


def _expand(chart: ParseChart, key: _Key, promoted: bool) -> list[TreeNode]:
    """All tree readings of a cell.  A promoted LEFT child is rendered with an
    explicit unary projection node; a promoted right child stays bare."""
    level = key[0]
    out = []
    for deriv in chart.cells[key]:
        if level == 1:
            out.append(TreeNode(key[1], token=deriv))
            continue
        ka, kb, fl, fr = deriv
        for left in _expand(chart, ka, fl):
            for right in _expand(chart, kb, False):
                out.append(TreeNode(key[1], children=(left, right)))
                if len(out) >= _TREE_CAP:
                    break
            if len(out) >= _TREE_CAP:
                break
    if promoted:
        out = [TreeNode(PROMOTIONS[key[1]], children=(t,)) for t in out]
    return out[:_TREE_CAP]


def to_syntax_tree(sequence_or_chart, lexicon=None, rules=None) -> ParseResult:
    """Map a parsed sequence to syntax trees.

    A tree exists only when the chart reaches theta = 1.  All full-span
    derivations (across levels) are enumerated; a unique one is the tree,
    several are returned flagged ambiguous, none yields an empty result.
    """
    chart = (sequence_or_chart if isinstance(sequence_or_chart, ParseChart)
             else chart_parse(sequence_or_chart, lexicon, rules))
    if chart.theta_level() is None:
        return ParseResult(trees=(), ambiguous=False)
    n = len(chart.words)
    trees: list[SyntaxTree] = []
    for level in range(2, chart.max_level + 1):
        for key in sorted(chart.keys_at(level), key=lambda k: k[1].value):
            if key[2] == 1 and key[3] == n:
                trees.extend(SyntaxTree(t) for t in _expand(chart, key, False))
    return ParseResult(trees=tuple(trees[:_TREE_CAP]), ambiguous=len(trees) > 1)


def _vp_chain(vp: TreeNode) -> tuple[list[TreeNode], TreeNode]:
    """Split a VP into its auxiliary heads and the innermost lexical VP."""
    auxes = []
    node = vp
    while (len(node.children) == 2 and node.children[0].label is LexCat.V
           and node.children[1].label is LexCat.VP):
        auxes.append(node.children[0])
        node = node.children[1]
    return auxes, node


def structure_transform(source, kind: str, lexicon=None, rules=None) -> str:
    """Apply a structure-dependent movement and return the surface string.

    kind is "yesno" (front the tense head) or "wh-object" (question the
    object: wh word plus fronted tense head, object removed).  The operation
    reads the syntax tree, never the bare string; output is lowercase with no
    punctuation.
    """
    if isinstance(source, SyntaxTree):
        tree = source
    else:
        result = to_syntax_tree(source, lexicon, rules)
        if not result.trees:
            raise TransformError("sequence has no syntax tree")
        tree = result.trees[0]
    root = tree.root
    if root.label is not LexCat.IP or len(root.children) != 2:
        raise TransformError("transformation needs an IP over subject and VP")
    subject, vp = root.children
    if vp.label is not LexCat.VP:
        raise TransformError("transformation needs an IP over subject and VP")
    auxes, inner = _vp_chain(vp)
    if not auxes:
        raise TransformError("no tense head to move")
    t_head, rest_auxes = auxes[0], auxes[1:]
    if kind == "yesno":
        words = t_head.leaves() + subject.leaves()
        for a in rest_auxes:
            words += a.leaves()
        words += inner.leaves()
        return " ".join(words)
    if kind == "wh-object":
        if len(inner.children) != 2 or inner.children[1].label not in (LexCat.N, LexCat.NP):
            raise TransformError("no object to question")
        verb_part = inner.children[0]
        words = ["who"] + t_head.leaves() + subject.leaves()
        for a in rest_auxes:
            words += a.leaves()
        words += verb_part.leaves()
        return " ".join(words)
    raise TransformError(f"unknown transformation kind: {kind!r}")


def catalan_count(n: int) -> int:
    """Number of binary branching shapes over n words: the (n-1)-th Catalan number."""
    if n <= 0:
        raise GrammarError("sequence must contain at least one word")
    m = n - 1
    return math.comb(2 * m, m) // (m + 1)


@dataclass
class NonIsoReport:
    """Witnesses that sequences and their time patterns are not isomorphic.

    collision: first pair of distinct sequences with identical full profiles
    (at least one nonempty level), with the first nonempty level attached.
    split: first pair agreeing at one level but differing at another,
    as (seq a, seq b, (same level, differ level)).
    groups: full profile -> sequences sharing it (nonempty profiles only).
    """

    collision: tuple[str, str, int] | None
    split: tuple[str, str, tuple[int, int]] | None
    groups: dict[tuple, list[str]]

    @property
    def found(self) -> bool:
        return self.collision is not None or self.split is not None


def noniso_witness(lexicon=None, max_length: int = 4, rules=None) -> NonIsoReport:
    """Exhaustive search for non-isomorphism witnesses up to a sequence length.

    Enumerates every sequence over the lexicon, groups them by full pattern
    profile (trivial all-empty profiles are excluded), and records both a
    non-injectivity collision and a same-at-i / differ-at-j level split when
    they exist.
    """
    lex = CORE_LEXICON if lexicon is None else lexicon
    words = list(lex)
    profiles: dict[str, tuple[TimePattern, ...]] = {}
    groups: dict[tuple, list[str]] = {}
    collision = None
    order: list[str] = []
    for length in range(1, max_length + 1):
        for combo in itertools.product(words, repeat=length):
            seq = " ".join(combo)
            profile = pattern_profile(seq, lex, rules)
            profiles[seq] = profile
            order.append(seq)
            if not any(p.entries for p in profile):
                continue
            pkey = tuple(p.key() for p in profile)
            bucket = groups.setdefault(pkey, [])
            if bucket and collision is None:
                first_nonempty = next(p.level for p in profile if p.entries)
                collision = (bucket[0], seq, first_nonempty)
            bucket.append(seq)

    split = None
    by_level: dict[tuple[int, tuple], list[str]] = {}
    for seq in order:
        for pat in profiles[seq]:
            if not pat.entries:
                continue
            by_level.setdefault((pat.level, pat.key()), []).append(seq)
    for (level, _), seqs in sorted(by_level.items(), key=lambda kv: kv[0][0]):
        if split is not None:
            break
        for sa, sb in itertools.combinations(seqs, 2):
            pa, pb = profiles[sa], profiles[sb]
            for j in range(max(len(pa), len(pb))):
                qa = pa[j].key() if j < len(pa) else None
                qb = pb[j].key() if j < len(pb) else None
                if qa != qb:
                    split = (sa, sb, (level, j + 2))
                    break
            if split is not None:
                break
    return NonIsoReport(collision=collision, split=split, groups=groups)
