"""Synthetic dataset generator: themed analogs over shared structure
templates, plus category-clustered embeddings.

The corpus is built from four themed analogs holding eight propositions
each. Analogs pair up (first with second, third with fourth); the two
analogs of a pair instantiate the same eight structure templates with
theme-specific tokens, so every proposition has exactly one cross-analog
structural twin. The sixteen templates are mutually distinct in shape, so
twin identity is recoverable from structure alone. Token slots aligned
across a pair share an embedding category, which is what gives the mapper
a semantic trail to follow.
"""

from __future__ import annotations

import json

import numpy as np

from .embeddings import EmbeddingTable, Stage


class DatasetError(ValueError):
    pass


# structure templates: tuple of bindings, each (pred, obj) with "t" a token
# slot, "-" an empty slot, and a nested tuple an embedded proposition
GROUP_A = (
    (("t", "t"),),
    (("t", "t"), ("t", "t")),
    (("t", "-"),),
    (("-", "t"),),
    (("t", "t"), ("t", "-")),
    (("t", "-"), ("t", "t")),
    (("t", (("t", "t"),)),),
    (("t", "t"), ("t", (("t", "t"),))),
)

GROUP_B = (
    (("-", "t"), ("-", "t")),
    (("t", "t"), ("-", "t")),
    (("-", "t"), ("t", "t")),
    (("t", "-"), ("t", "-")),
    (("t", (("t", "t"), ("t", "t"))),),
    (("t", (("t", "t"),)), ("t", "t")),
    (("t", "-"), ("-", "t")),
    (("-", "t"), ("t", "-")),
)

# per-theme vocabulary; adjectives and verbs both serve as predicates
THEMES = (
    {
        "name": "yard",
        "adjs": ["big", "fierce", "fast", "loud"],
        "verbs": ["bite", "chase", "say", "know", "fear", "love", "guard", "obey", "trust"],
        "nouns": ["dogs", "cats", "men", "boys", "bones", "yards", "vets", "pups", "tails"],
    },
    {
        "name": "wild",
        "adjs": ["huge", "feral", "swift", "shrill"],
        "verbs": ["snap", "hunt", "howl", "sense", "dread", "favor", "stalk", "heed", "rely"],
        "nouns": ["wolves", "foxes", "hunters", "cubs", "prey", "dens", "rangers", "whelps", "furs"],
    },
    {
        "name": "sea",
        "adjs": ["deep", "vast", "quick", "grand"],
        "verbs": ["splash", "dive", "roar", "spot", "dodge", "crave", "ride", "track", "press"],
        "nouns": ["whales", "sharks", "sailors", "lads", "fish", "waves", "divers", "reefs",
                  "calves", "fins", "ships", "tides"],
    },
    {
        "name": "sky",
        "adjs": ["high", "broad", "agile", "keen"],
        "verbs": ["peck", "soar", "call", "watch", "evade", "seek", "glide", "chart", "strain"],
        "nouns": ["hawks", "crows", "farmers", "kids", "mice", "winds", "scouts", "ridges",
                  "chicks", "wings", "nests", "gusts"],
    },
)


class _SlotNamer:
    """Hands out theme tokens slot by slot and records the category label
    shared by aligned slots of a template pair."""

    def __init__(self, theme, pair_tag):
        self.preds = theme["adjs"] + theme["verbs"]
        self.nouns = list(theme["nouns"])
        self.pair_tag = pair_tag
        self.i_pred = 0
        self.i_noun = 0
        self.categories = {}

    def pred(self):
        if self.i_pred >= len(self.preds):
            raise DatasetError("theme ran out of predicate tokens")
        tok = self.preds[self.i_pred]
        self.categories[tok] = f"{self.pair_tag}/pred{self.i_pred}"
        self.i_pred += 1
        return tok

    def noun(self):
        if self.i_noun >= len(self.nouns):
            raise DatasetError("theme ran out of noun tokens")
        tok = self.nouns[self.i_noun]
        self.categories[tok] = f"{self.pair_tag}/noun{self.i_noun}"
        self.i_noun += 1
        return tok


def _instantiate(template, namer, prop_id, acc):
    """Build the proposition dict for one template, appending embedded
    propositions to acc first so references resolve."""
    rbs = []
    for pred_slot, obj_slot in template:
        pred = {"token": namer.pred()} if pred_slot == "t" else None
        if obj_slot == "t":
            obj = {"token": namer.noun()}
        elif obj_slot == "-":
            obj = None
        else:
            sub_id = f"{prop_id}s{len(acc)}"
            _instantiate(obj_slot, namer, sub_id, acc)
            obj = {"prop": sub_id}
        rbs.append({"pred": pred, "obj": obj})
    acc.append({"id": prop_id, "rbs": rbs})
    return acc


def generate_corpus(n_analogs=4, n_props=8):
    """Corpus document plus {token: category} labels."""
    if n_analogs not in (2, 4):
        raise DatasetError("generator supports 2 or 4 analogs")
    if not 1 <= n_props <= 8:
        raise DatasetError("propositions per analog must be 1..8")
    analogs = []
    categories = {}
    for ai in range(n_analogs):
        pair = ai // 2
        templates = (GROUP_A, GROUP_B)[pair]
        theme = THEMES[ai]
        namer = _SlotNamer(theme, pair_tag=f"pair{pair}")
        props = []
        for k in range(n_props):
            _instantiate(templates[k], namer, f"p{k}", props)
        for tok, cat in namer.categories.items():
            if tok in categories:
                raise DatasetError(f"token {tok!r} appears in two themes")
            categories[tok] = cat
        analogs.append({"name": theme["name"], "propositions": props})
    return {"analogs": analogs}, categories


def generate_embeddings(categories, dim=300, noise=0.15, seed=0):
    """Category-clustered embedding table: one anchor vector per category,
    tokens scattered around their anchor at the given noise scale. Smaller
    noise means tighter clusters and a stronger semantic trail between
    twin tokens."""
    rng = np.random.default_rng(seed)
    anchors = {}
    tokens = sorted(categories)
    rows = np.empty((len(tokens), dim))
    for i, tok in enumerate(tokens):
        cat = categories[tok]
        if cat not in anchors:
            anchors[cat] = rng.normal(size=dim)
        rows[i] = anchors[cat] + noise * rng.normal(size=dim)
    return EmbeddingTable(tokens, rows, Stage.RAW)


def write_embedding_text(path, table):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table.tokens)} {table.dim}\n")
        for tok in table.tokens:
            vec = " ".join(f"{v:.8f}" for v in table.vector(tok))
            fh.write(f"{tok} {vec}\n")


def syntax_lexicon(corpus_doc=None):
    """Token -> lexical category map covering the generated vocabulary."""
    lex = {}
    for theme in THEMES:
        for w in theme["adjs"]:
            lex[w] = "Adj"
        for w in theme["verbs"]:
            lex[w] = "V"
        for w in theme["nouns"]:
            lex[w] = "N"
    return lex


def spectral_corpus(n_sentences=40, scrambled=False, sem_dim=6):
    """Word-rhythm probe corpus: four-word sentences as isolated trials.

    Intact: one analog per sentence, two bindings (pred obj pred obj), so a
    fixed-rate presentation nests word, binding, and proposition rhythms.
    Scrambled: every word becomes its own single-binding analog, which keeps
    the word rate and destroys the slower structure. All semantic rows are
    identical unit vectors; the probe reads timing, not content. Returns
    (document, link-ready table).
    """
    if n_sentences < 1:
        raise DatasetError("need at least one sentence")
    analogs = []
    tokens = []
    for s in range(n_sentences):
        words = [f"w{s}x{k}" for k in range(4)]
        tokens.extend(words)
        if scrambled:
            for k, word in enumerate(words):
                analogs.append({"name": f"s{s}w{k}", "propositions": [
                    {"id": "p0", "rbs": [{"pred": {"token": word}, "obj": None}]},
                ]})
        else:
            analogs.append({"name": f"s{s}", "propositions": [
                {"id": "p0", "rbs": [
                    {"pred": {"token": words[0]}, "obj": {"token": words[1]}},
                    {"pred": {"token": words[2]}, "obj": {"token": words[3]}},
                ]},
            ]})
    rows = np.full((len(tokens), sem_dim), sem_dim ** -0.5)
    table = EmbeddingTable(tuple(tokens), rows, Stage.LINK_READY)
    return {"analogs": analogs}, table


def write_dataset(outdir, seed=0, n_analogs=4, n_props=8, dim=300,
                  noise_rich=0.15, noise_weak=1.2):
    """Emit corpus.json, rich and weak embedding files, category labels,
    and the syntax lexicon into outdir. Returns the written paths."""
    corpus, categories = generate_corpus(n_analogs, n_props)
    rich = generate_embeddings(categories, dim=dim, noise=noise_rich, seed=seed)
    weak = generate_embeddings(categories, dim=dim, noise=noise_weak, seed=seed + 1)

    paths = {
        "corpus": outdir / "corpus.json",
        "embeddings": outdir / "embeddings.txt",
        "embeddings_weak": outdir / "embeddings_weak.txt",
        "categories": outdir / "categories.json",
        "lexicon": outdir / "lexicon.json",
    }
    with open(paths["corpus"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(corpus, fh, indent=1, sort_keys=True)
        fh.write("\n")
    write_embedding_text(paths["embeddings"], rich)
    write_embedding_text(paths["embeddings_weak"], weak)
    with open(paths["categories"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(categories, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(paths["lexicon"], "w", encoding="utf-8", newline="\n") as fh:
        json.dump(syntax_lexicon(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    return paths
