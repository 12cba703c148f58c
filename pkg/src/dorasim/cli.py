"""Batch command line driver.

Wires the corpus loader, embedding pipeline, simulation loop, constituency
utilities, and evaluation exports into reproducible subcommands. Every value
an option takes can equally come from a TOML or JSON config file passed with
--config (keys use the option's long name with underscores); explicit command
line flags win over the config file, and the seed additionally falls back to
the DORA_SEED environment variable before its built-in default.

Artifact-producing commands (gen-dataset, run) refuse to overwrite existing
outputs unless --force is given, stamp a meta.json carrying the seed, the
effective options and their hash, and the tool version, and remove partial
outputs when a run fails midway. Exit status is 0 exactly when everything
requested was written or printed.
"""

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - interpreter version fallback
    import tomli as tomllib

from . import __version__
from .constituency import (
    GrammarError,
    LexCat,
    TransformError,
    build_pushout,
    chart_parse,
    load_grammar,
    structure_transform,
    to_syntax_tree,
)
from .corpus import CorpusError, load_corpus
from .datagen import DatasetError, write_dataset
from .embeddings import EmbeddingError, link_ready_pipeline
from .evaluation import EvaluationError, power_spectrum, precision, t_test_two_sample
from .mapping import (
    MappingError,
    SimulationConfig,
    run_simulation,
    structural_truth,
    write_mapping_csv,
    write_precision_csv,
)
from .network import NetworkError, instantiate_network


class CliError(ValueError):
    pass


USER_ERRORS = (
    CliError, CorpusError, DatasetError, EmbeddingError, EvaluationError,
    GrammarError, MappingError, NetworkError, TransformError, OSError,
    json.JSONDecodeError, tomllib.TOMLDecodeError,
)


# ------------------------------------------------------------ option plumbing

def _load_config(path):
    if path is None:
        return {}
    p = Path(path)
    if p.suffix.lower() == ".toml":
        return tomllib.loads(p.read_text(encoding="utf-8"))
    return json.loads(p.read_text(encoding="utf-8"))


def _opt(args, config, name, default=None, cast=None, required=False):
    """command line > config file > (seed only) DORA_SEED > default."""
    value = getattr(args, name, None)
    if value is None:
        value = config.get(name)
    if value is None and name == "seed":
        value = os.environ.get("DORA_SEED")
    if value is None:
        if required:
            raise CliError(f"missing required option --{name.replace('_', '-')}")
        value = default
    if value is not None and cast is not None:
        try:
            value = cast(value)
        except (TypeError, ValueError) as exc:
            raise CliError(f"bad value for --{name.replace('_', '-')}: {exc}") from exc
    return value


def _meta_payload(command, seed, options):
    canon = json.dumps(options, sort_keys=True)
    return {
        "command": command,
        "config_hash": hashlib.sha256(canon.encode("utf-8")).hexdigest(),
        "options": options,
        "seed": seed,
        "tool": f"dorasim {__version__}",
    }


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


class ArtifactSet:
    """Transactional output directory: collision check up front, partial
    outputs removed if anything fails before the set completes."""

    def __init__(self, outdir, names, force):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        clashes = [n for n in names if (self.outdir / n).exists()]
        if clashes and not force:
            raise CliError(
                f"output exists: {self.outdir / clashes[0]} (pass --force to overwrite)")
        self.written = []

    def path(self, name):
        p = self.outdir / name
        self.written.append(p)
        return p

    def discard(self):
        for p in self.written:
            try:
                p.unlink()
            except OSError:
                pass


def _transact(outdir, names, force, fill):
    artifacts = ArtifactSet(outdir, names, force)
    try:
        fill(artifacts)
    except BaseException:
        artifacts.discard()
        raise
    return artifacts


# ------------------------------------------------------------- matrix csv io

def write_matrix_csv(path, ids, matrix):
    matrix = np.asarray(matrix)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("prop," + ",".join(ids) + "\n")
        for rid, row in zip(ids, matrix):
            fh.write(rid + "," + ",".join(f"{v:.6f}" for v in row) + "\n")


def read_matrix_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or header[0] != "prop":
            raise CliError(f"{path}: expected a 'prop,...' matrix header")
        body = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    ids = [parts[0] for parts in body]
    if ids != header[1:]:
        raise CliError(f"{path}: matrix rows and columns disagree")
    try:
        matrix = np.array([[float(v) for v in parts[1:]] for parts in body])
    except ValueError as exc:
        raise CliError(f"{path}: non-numeric matrix entry: {exc}") from exc
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise CliError(f"{path}: matrix is not square")
    return ids, matrix


PAIR_HEADER = "driver_prop,recipient_prop,weight"


def read_mapping_pairs_csv(path):
    """Long-form symmetric mapping export: one nonzero pair per line."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != PAIR_HEADER:
        raise CliError(f"{path}: expected a '{PAIR_HEADER}' header")
    pairs = {}
    for k, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise CliError(f"{path}:{k}: expected 3 comma-separated fields")
        try:
            pairs[(parts[0], parts[1])] = float(parts[2])
        except ValueError:
            raise CliError(f"{path}:{k}: non-numeric weight {parts[2]!r}") from None
    return pairs


# ---------------------------------------------------------------- subcommands

def cmd_gen_dataset(args, config):
    out = _opt(args, config, "out", required=True)
    seed = _opt(args, config, "seed", default=0, cast=int)
    n_analogs = _opt(args, config, "analogs", default=4, cast=int)
    n_props = _opt(args, config, "props", default=8, cast=int)
    dim = _opt(args, config, "dim", default=300, cast=int)
    force = bool(_opt(args, config, "force", default=False))
    options = {"analogs": n_analogs, "dim": dim, "out": str(out),
               "props": n_props, "seed": seed}

    names = ["corpus.json", "embeddings.txt", "embeddings_weak.txt",
             "categories.json", "lexicon.json", "meta.json"]

    def fill(artifacts):
        for n in names[:-1]:
            artifacts.path(n)  # register up front so a midway failure cleans up
        write_dataset(artifacts.outdir, seed=seed, n_analogs=n_analogs,
                      n_props=n_props, dim=dim)
        _write_json(artifacts.path("meta.json"),
                    _meta_payload("gen-dataset", seed, options))

    artifacts = _transact(out, names, force, fill)
    print(f"wrote {len(artifacts.written)} artifacts to {artifacts.outdir}")
    return 0


def cmd_run(args, config):
    corpus_path = _opt(args, config, "corpus", required=True)
    emb_path = _opt(args, config, "embeddings", required=True)
    out = _opt(args, config, "out", required=True)
    iterations = _opt(args, config, "iterations", default=100, cast=int)
    reps = _opt(args, config, "reps", default=10, cast=int)
    seed = _opt(args, config, "seed", default=0, cast=int)
    variant = _opt(args, config, "variant", default="plain")
    pca = _opt(args, config, "pca", default=10, cast=int)
    force = bool(_opt(args, config, "force", default=False))
    options = {"corpus": str(corpus_path), "embeddings": str(emb_path),
               "iterations": iterations, "out": str(out), "pca": pca,
               "reps": reps, "seed": seed, "variant": variant}

    analogs = load_corpus(corpus_path)
    table, _ = link_ready_pipeline(emb_path, p=pca)
    cfg = SimulationConfig(iterations=iterations, repetitions=reps, seed=seed,
                           hebbian_variant=variant)
    result = run_simulation(analogs, table, cfg)
    probe = instantiate_network(analogs, table)
    _, truth = structural_truth(probe, analogs)

    names = (["precision.csv", "mapping.csv", "truth.csv", "meta.json"]
             + [f"mapping_matrix_rep{k}.csv" for k in range(reps)])

    def fill(artifacts):
        write_precision_csv(artifacts.path("precision.csv"), result.mean_precision())
        write_mapping_csv(artifacts.path("mapping.csv"), result.prop_ids,
                          result.prop_mapping)
        write_matrix_csv(artifacts.path("truth.csv"), result.prop_ids, truth)
        for k, matrix in enumerate(result.per_rep_mapping):
            write_matrix_csv(artifacts.path(f"mapping_matrix_rep{k}.csv"),
                             result.prop_ids, matrix)
        _write_json(artifacts.path("meta.json"), _meta_payload("run", seed, options))

    artifacts = _transact(out, names, force, fill)
    final = result.mean_precision()[-1]
    print(f"wrote {len(artifacts.written)} artifacts to {artifacts.outdir}")
    print(f"final mean precision: {final:.6f}" if np.isfinite(final)
          else "final mean precision: undefined")
    return 0


def _default_lexicon():
    # generator vocabulary first so the shipped words keep their categories
    # on any overlap
    from .constituency import DEFAULT_LEXICON
    from .datagen import syntax_lexicon

    merged = {w: LexCat(c) for w, c in syntax_lexicon().items()}
    merged.update(DEFAULT_LEXICON)
    return merged


def _load_lexicon(path):
    if path is None:
        return _default_lexicon(), None
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "lexicon" in data:
        return load_grammar(data)
    try:
        return {w.lower(): LexCat(c) for w, c in data.items()}, None
    except (AttributeError, ValueError) as exc:
        raise GrammarError(f"malformed lexicon file: {exc}") from exc


def cmd_parse(args, config):
    sentence = _opt(args, config, "sentence", required=True)
    lexicon, rules = _load_lexicon(_opt(args, config, "lexicon"))
    chart = chart_parse(sentence, lexicon, rules)
    print("words: " + " ".join(chart.words))
    for image in chart.level_images():
        print(f"level {image.level}: {image.pattern()}")
    theta = chart.theta_level()
    print(f"theta: {theta if theta is not None else 'NONE'}")
    result = to_syntax_tree(chart)
    if not result.trees:
        print("tree: NONE")
    else:
        for tree in result.trees:
            print(f"tree: {tree.bracket()}")
    return 0


def cmd_pushout(args, config):
    corpus_path = _opt(args, config, "corpus", required=True)
    lexicon, rules = _load_lexicon(_opt(args, config, "lexicon"))
    analogs = load_corpus(corpus_path)
    sequences = [a.surface_words(uid) for a in analogs for uid in a.top_level]
    classes = build_pushout(sequences, lexicon, rules)
    classes.sort(key=lambda c: (c.representative.level, str(c.representative)))
    for k, cls in enumerate(classes, start=1):
        print(f"class {k}: pattern={cls.representative} members={len(cls.members)}")
        for name, level in sorted(cls.members):
            print(f"  {name} (level {level})")
    return 0


def cmd_transform(args, config):
    sentence = _opt(args, config, "sentence", required=True)
    kind = _opt(args, config, "kind", required=True)
    lexicon, rules = _load_lexicon(_opt(args, config, "lexicon"))
    print(structure_transform(sentence, kind, lexicon, rules))
    return 0


def _trace_layer_series(path, layer, bank):
    sums = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        expect = ["tick", "unit_id", "layer", "bank", "activation"]
        if header != expect:
            raise CliError(f"{path}: expected trace header {','.join(expect)}")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != 5:
                continue
            if parts[2] != layer or (bank and parts[3] != bank):
                continue
            tick = int(parts[0])
            sums[tick] = sums.get(tick, 0.0) + float(parts[4])
    if not sums:
        raise CliError(f"{path}: no {layer} rows for bank {bank!r}")
    return np.array([sums[t] for t in sorted(sums)])


def cmd_spectrum(args, config):
    trace = _opt(args, config, "trace", required=True)
    rate = _opt(args, config, "rate", required=True, cast=float)
    layer = _opt(args, config, "layer", default="PO")
    bank = _opt(args, config, "bank", default="driver")
    if layer not in ("P", "RB", "PO"):
        raise CliError(f"unknown layer {layer!r} (expected P, RB, or PO)")
    series = _trace_layer_series(trace, layer, bank)
    spectrum = power_spectrum(series, rate)
    print("freq_hz,power")
    for f, p in zip(spectrum.frequencies, spectrum.power):
        print(f"{f:.6f},{p:.6f}")
    return 0


def cmd_eval(args, config):
    pred_path = _opt(args, config, "pred", required=True)
    truth_path = _opt(args, config, "truth", required=True)
    truth_ids, truth = read_matrix_csv(truth_path)
    with open(pred_path, encoding="utf-8") as fh:
        head = fh.readline().rstrip("\n")
    if head == PAIR_HEADER:
        index = {pid: i for i, pid in enumerate(truth_ids)}
        pred = np.zeros_like(truth)
        for (a, b), w in read_mapping_pairs_csv(pred_path).items():
            if a not in index or b not in index:
                unknown = a if a not in index else b
                raise CliError(f"{pred_path}: proposition {unknown!r} "
                               "is not in the truth matrix")
            pred[index[a], index[b]] = w
            pred[index[b], index[a]] = w
    else:
        pred_ids, pred = read_matrix_csv(pred_path)
        if pred_ids != truth_ids:
            raise CliError("prediction and truth matrices index different propositions")
    score = precision(pred, truth)
    if score is None:
        raise CliError("truth matrix has no positive pairs; precision undefined")
    print(f"{score:.6f}")
    return 0


def _load_sample(path):
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=1)
    except ValueError as exc:
        raise CliError(f"{path}: expected numeric values, one per line: {exc}") from exc
    return np.asarray(data, dtype=float).ravel()


def cmd_ttest(args, config):
    a = _load_sample(_opt(args, config, "a", required=True))
    b = _load_sample(_opt(args, config, "b", required=True))
    t, p = t_test_two_sample(a, b)
    print("stat,t,p")
    print(f"pooled_t,{t:.10g},{p:.10g}")
    return 0


# ------------------------------------------------------------------ dispatch

def build_parser():
    parser = argparse.ArgumentParser(
        prog="dorasim",
        description="relational mapping simulator: datasets, runs, parsing, evaluation",
    )
    parser.add_argument("--version", action="version", version=f"dorasim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, helptext, flags):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="TOML or JSON file supplying any flag")
        for flag, kwargs in flags:
            p.add_argument(flag, **kwargs)
        p.set_defaults(func=func)
        return p

    add("gen-dataset", cmd_gen_dataset, "emit a themed corpus with embeddings", [
        ("--out", {"help": "output directory"}),
        ("--analogs", {"type": int, "help": "number of analogs (2 or 4)"}),
        ("--props", {"type": int, "help": "propositions per analog (1..8)"}),
        ("--seed", {"type": int, "help": "generator seed"}),
        ("--dim", {"type": int, "help": "embedding dimensionality"}),
        ("--force", {"action": "store_true", "default": None,
                     "help": "overwrite existing outputs"}),
    ])
    add("run", cmd_run, "retrieval-and-mapping simulation", [
        ("--corpus", {"help": "corpus JSON file"}),
        ("--embeddings", {"help": "embedding text file"}),
        ("--iterations", {"type": int, "help": "iterations per repetition"}),
        ("--reps", {"type": int, "help": "independent repetitions"}),
        ("--seed", {"type": int, "help": "root seed"}),
        ("--variant", {"help": "hebbian variant: plain or child_corr"}),
        ("--pca", {"type": int, "help": "embedding components kept"}),
        ("--out", {"help": "output directory"}),
        ("--force", {"action": "store_true", "default": None,
                     "help": "overwrite existing outputs"}),
    ])
    add("parse", cmd_parse, "level images, theta, and tree for a sentence", [
        ("--sentence", {"help": "word sequence to parse"}),
        ("--lexicon", {"help": "JSON lexicon or grammar file"}),
    ])
    add("pushout", cmd_pushout, "pattern equivalence classes over a corpus", [
        ("--corpus", {"help": "corpus JSON file"}),
        ("--lexicon", {"help": "JSON lexicon or grammar file"}),
    ])
    add("transform", cmd_transform, "structure-dependent movement", [
        ("--sentence", {"help": "declarative source sentence"}),
        ("--kind", {"help": "yesno or wh-object"}),
        ("--lexicon", {"help": "JSON lexicon or grammar file"}),
    ])
    add("spectrum", cmd_spectrum, "power spectrum of a recorded trace", [
        ("--trace", {"help": "activation trace CSV"}),
        ("--rate", {"type": float, "help": "samples per second"}),
        ("--layer", {"help": "P, RB, or PO (default PO)"}),
        ("--bank", {"help": "bank filter (default driver)"}),
    ])
    add("eval", cmd_eval, "precision of a mapping matrix against truth", [
        ("--pred", {"help": "predicted matrix CSV"}),
        ("--truth", {"help": "truth matrix CSV"}),
    ])
    add("ttest", cmd_ttest, "two-sample t test over two value files", [
        ("--a", {"help": "first sample file"}),
        ("--b", {"help": "second sample file"}),
    ])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
