"""Command-line pipeline: stats, decompose, match, train, generate, prune,
evaluate, sweep, inspect-atoms, grad-check.

Every command is seeded and writes versioned artifacts; identical
invocations produce byte-identical outputs, and --jobs N matches --jobs 1
bit for bit.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import FORMAT_VERSIONS, __version__
from .corpus import (
    FormatError,
    load_dictionary,
    load_embeddings,
    split_corpus,
    stats_report,
)
from .define import (
    GENERATIONS_FORMAT,
    DefineModel,
    TrainConfig,
    build_model,
    generate,
    read_generations,
    train,
)
from .evaluate import (
    BleuConfig,
    ScoreScheme,
    corpus_bleu,
    fbleu,
    rbleu,
    read_labels,
    sensitivity_sweep,
)
from .match import MATCHES_FORMAT, atoms_for_matching, load_stopwords, match_heuristic
from .parallel import map_ordered
from .postprocess import MERGED_FORMAT, build_pos_lexicon, infer_pos, merge_outputs
from .sparse import DecompConfig, atom_report, fit_atoms, load_atoms, save_atoms


def _fractions(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("need three comma-separated fractions")
    return tuple(parts)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polydef",
        description="Multi-sense definition modeling pipeline.")
    parser.add_argument("--version", action="store_true",
                        help="print tool and artifact format versions")
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--config", help="JSON file of default option values")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("stats", help="per-split corpus statistics")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1))

    p = sub.add_parser("decompose", help="fit sparse sense atoms to embeddings")
    common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--atoms-out", required=True)
    p.add_argument("--num-atoms", type=int, required=True)
    p.add_argument("--sparsity", type=int, default=5)
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("match", help="pre-match definitions to atoms")
    common(p)
    p.add_argument("--mode", choices=["heu"], default="heu")
    p.add_argument("--corpus", required=True)
    p.add_argument("--atoms", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stopwords", help="file of one stopword per line")

    p = sub.add_parser("train", help="train the definition generator")
    common(p)
    p.add_argument("--mode", choices=["heu", "gs", "stgs"], default="gs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--atoms", required=True)
    p.add_argument("--ckpt-out", required=True)
    p.add_argument("--matches", help="pre-matched atom file (heu mode)")
    p.add_argument("--no-pos", action="store_true",
                   help="ablate POS conditioning (every entry tagged 'other')")
    p.add_argument("--rep-penalty", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--units", type=int, default=300)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--lr-decay", type=float, default=0.8)
    p.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1))
    p.add_argument("--log-out", help="write per-epoch training log (JSONL)")

    p = sub.add_parser("generate", help="generate definitions per (word, atom)")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--atoms", required=True)
    p.add_argument("--words", required=True, help="file of one word per line")
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", help="dictionary used to build the POS lexicon")
    p.add_argument("--pos", default="infer",
                   help="'infer' (atom-neighbor vote; needs --corpus) or a fixed tag")
    p.add_argument("--max-len", type=int, default=30)

    p = sub.add_parser("prune", help="merge redundant generated definitions")
    common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--threshold", type=float, default=0.6)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score outputs against ground truths")
    common(p)
    p.add_argument("--outputs", required=True)
    p.add_argument("--truths", required=True)
    p.add_argument("--metric", choices=["bleu", "rbleu", "fbleu", "all"], default="all")
    p.add_argument("--csv", help="also write the report as CSV")

    p = sub.add_parser("sweep", help="scoring-scheme sensitivity sweep")
    common(p)
    p.add_argument("--labels", required=True)
    p.add_argument("--truths", required=True)
    p.add_argument("--grid", default="a=0.1:0.9:0.1,b<a")
    p.add_argument("--out", help="CSV output path (default: stdout)")

    p = sub.add_parser("inspect-atoms", help="nearest words per atom")
    common(p)
    p.add_argument("--atoms", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--word", help="show this word's atoms")
    p.add_argument("--atom-ids", help="comma-separated atom ids")
    p.add_argument("-k", type=int, default=5)

    p = sub.add_parser("grad-check", help="finite-difference gradient audit")
    common(p)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--coords", type=int, default=4,
                   help="sampled coordinates per parameter")
    return parser


def _apply_config(args, parser):
    if not getattr(args, "config", None):
        return args
    with open(args.config, encoding="utf-8") as fh:
        overrides = json.load(fh)
    defaults = {}
    for action in parser._actions:
        if action.dest != argparse.SUPPRESS:
            defaults[action.dest] = action.default
    for key, value in overrides.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ValueError(f"unknown config key {key!r}")
        if getattr(args, dest) == defaults.get(dest):  # flags override the file
            setattr(args, dest, value)
    return args


# -- commands ----------------------------------------------------------------


def _cmd_stats(args):
    entries = load_dictionary(args.corpus)
    split = split_corpus(entries, fractions=args.fractions, seed=args.seed)
    print(stats_report(split))
    return 0


def _cmd_decompose(args):
    table = load_embeddings(args.embeddings)
    cfg = DecompConfig(num_atoms=args.num_atoms, sparsity=args.sparsity,
                       iterations=args.iterations, tol=args.tol, seed=args.seed)
    atomset = fit_atoms(table, cfg, jobs=args.jobs)
    save_atoms(atomset, args.atoms_out)
    errs = np.array(list(atomset.residual_norms.values()))
    print(f"fit {atomset.num_atoms} atoms over {len(table)} words; "
          f"mean residual norm {errs.mean():.6f}")
    return 0


def _cmd_match(args):
    table = load_embeddings(args.embeddings)
    atomset = load_atoms(args.atoms, table=table)
    entries = load_dictionary(args.corpus)
    stopwords = load_stopwords(args.stopwords)

    def one(indexed):
        index, entry = indexed
        if entry.word not in atomset.coeffs or not atomset.coeffs[entry.word]:
            return None
        result = match_heuristic(entry, atoms_for_matching(atomset, entry.word),
                                 table, stopwords)
        return {"word": entry.word, "entry_index": index,
                "atom_id": result.chosen_atom,
                "score": result.scores[result.chosen_atom]}

    rows = map_ordered(one, list(enumerate(entries)), args.jobs)
    skipped = sum(1 for r in rows if r is None)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": MATCHES_FORMAT}, sort_keys=True) + "\n")
        for row in rows:
            if row is not None:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"matched {len(rows) - skipped} entries ({skipped} skipped)")
    return 0


def _read_matches(path) -> dict[int, int]:
    matches = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get("format"):
                continue
            matches[int(record["entry_index"])] = int(record["atom_id"])
    return matches


def _cmd_train(args):
    table = load_embeddings(args.embeddings)
    atomset = load_atoms(args.atoms, table=table)
    entries = load_dictionary(args.corpus)
    if args.no_pos:
        entries = [type(e)(word=e.word, pos="other", definition=e.definition,
                           source=e.source, sense_group=e.sense_group)
                   for e in entries]
    index_of = {id(e): i for i, e in enumerate(entries)}
    split = split_corpus(entries, fractions=args.fractions, seed=args.seed)

    heu_atoms = heu_valid = None
    if args.mode == "heu":
        if not args.matches:
            raise ValueError("--mode heu requires --matches (see `polydef match`)")
        matches = _read_matches(args.matches)

        def aligned(part):
            kept_entries, kept_atoms = [], []
            for e in part:
                atom = matches.get(index_of[id(e)])
                if atom is not None:
                    kept_entries.append(e)
                    kept_atoms.append(atom)
            return kept_entries, kept_atoms

        split.train, heu_atoms = aligned(split.train)
        split.valid, heu_valid = aligned(split.valid)

    model = build_model(table, atomset, split.train, mode=args.mode,
                        units=args.units, seed=args.seed)
    cfg = TrainConfig(max_epochs=args.epochs, batch_size=args.batch_size,
                      lr=args.lr, lr_decay=args.lr_decay,
                      rep_penalty=args.rep_penalty, seed=args.seed)
    logs = train(model, split, cfg, heu_atoms=heu_atoms, heu_valid_atoms=heu_valid)
    model.save(args.ckpt_out)
    for record in logs:
        valid = "-" if record["valid_loss"] is None else f"{record['valid_loss']:.4f}"
        weight = ("-" if record["mean_max_match_weight"] is None
                  else f"{record['mean_max_match_weight']:.3f}")
        print(f"epoch {record['epoch']:3d}  train {record['train_loss']:.4f}  "
              f"valid {valid}  lr {record['lr']:.2e}  tau {record['tau']:.3f}  "
              f"max-weight {weight}")
    if args.log_out:
        with open(args.log_out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"format": FORMAT_VERSIONS["report"]}, sort_keys=True) + "\n")
            for record in logs:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    return 0


def _cmd_generate(args):
    table = load_embeddings(args.embeddings)
    atomset = load_atoms(args.atoms, table=table)
    model = DefineModel.load(args.ckpt, table, atomset)
    with open(args.words, encoding="utf-8") as fh:
        words = [w.strip().lower() for w in fh if w.strip()]
    lexicon = None
    if args.pos == "infer":
        if not args.corpus:
            raise ValueError("--pos infer requires --corpus to build the POS lexicon")
        lexicon = build_pos_lexicon(load_dictionary(args.corpus))

    tasks = []
    for word in words:
        if word not in table or not atomset.coeffs.get(word):
            print(f"warning: skipping {word!r} (no embedding or atoms)", file=sys.stderr)
            continue
        for atom_id, vec in atoms_for_matching(atomset, word):
            pos = (infer_pos(vec, table, lexicon) if args.pos == "infer" else args.pos)
            tasks.append((word, atom_id, pos))

    outputs = map_ordered(
        lambda t: generate(model, t[0], t[1], t[2], max_len=args.max_len),
        tasks, args.jobs)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": GENERATIONS_FORMAT}, sort_keys=True) + "\n")
        for o in outputs:
            fh.write(json.dumps({"word": o.word, "atom_id": o.atom_id, "pos": o.pos,
                                 "score": o.score, "tokens": list(o.tokens)},
                                sort_keys=True) + "\n")
    print(f"generated {len(outputs)} definitions for {len(words)} words")
    return 0


def _cmd_prune(args):
    outputs = read_generations(args.input)
    order: list[str] = []
    by_word: dict[str, list] = {}
    for o in outputs:
        if o.word not in by_word:
            order.append(o.word)
            by_word[o.word] = []
        by_word[o.word].append(o)

    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": MERGED_FORMAT}, sort_keys=True) + "\n")
        kept = 0
        for word in order:
            merged = merge_outputs(by_word[word], threshold=args.threshold)
            for gid, group in enumerate(merged.groups):
                rep = merged.representatives[gid]
                for o in group:
                    fh.write(json.dumps({
                        "word": o.word, "atom_id": o.atom_id, "pos": o.pos,
                        "score": o.score, "tokens": list(o.tokens), "group": gid,
                        "representative": o is rep,
                    }, sort_keys=True) + "\n")
            kept += len(merged.groups)
    print(f"{len(outputs)} outputs -> {kept} groups")
    return 0


def _cmd_evaluate(args):
    outputs = read_generations(args.outputs)
    truths = load_dictionary(args.truths)
    outputs_by_word: dict[str, list] = {}
    for o in outputs:
        outputs_by_word.setdefault(o.word, []).append(list(o.surface_tokens))
    truths_by_word: dict[str, list] = {}
    for e in truths:
        truths_by_word.setdefault(e.word, []).append(list(e.definition))

    cfg = BleuConfig()
    rows = []
    if args.metric in ("bleu", "fbleu", "all"):
        rows.append(("bleu", corpus_bleu(outputs_by_word, truths_by_word, cfg)))
    if args.metric in ("rbleu", "fbleu", "all"):
        rows.append(("rbleu", rbleu(outputs_by_word, truths_by_word, cfg)))
    if args.metric in ("fbleu", "all"):
        values = dict(rows)
        rows.append(("fbleu", fbleu(values["bleu"], values["rbleu"])))
    if args.metric != "all":
        rows = [(n, v) for n, v in rows if n == args.metric]
    for name, value in rows:
        print(f"{name}\t{value:.4f}")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# format: {FORMAT_VERSIONS['report']}\n")
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for name, value in rows:
                writer.writerow([name, f"{value:.6f}"])
    return 0


def _parse_grid(spec: str):
    """Grid spec like "a=0.1:0.9:0.1,b<a": a range plus the b<a constraint."""
    a_range = None
    b_range = None
    for part in spec.split(","):
        part = part.strip()
        if part == "b<a":
            continue
        name, _, rng = part.partition("=")
        if not rng:
            raise ValueError(f"bad grid component {part!r}")
        lo, hi, step = (float(x) for x in rng.split(":"))
        values = np.round(np.arange(lo, hi + 1e-9, step), 10)
        if name.strip() == "a":
            a_range = values
        elif name.strip() == "b":
            b_range = values
        else:
            raise ValueError(f"unknown grid variable {name!r}")
    if a_range is None:
        raise ValueError("grid must define a range for 'a'")
    if b_range is None:
        b_range = a_range
    grid = [ScoreScheme(a=float(a), b=float(b))
            for a in a_range for b in b_range if 1.0 > a > b > 0.0]
    if not grid:
        raise ValueError("empty scheme grid")
    return grid


def _cmd_sweep(args):
    labels_by_model = read_labels(args.labels)
    truths = load_dictionary(args.truths)
    groups: dict[str, set] = {}
    for e in truths:
        if e.sense_group is not None:
            groups.setdefault(e.word, set()).add(e.sense_group)
    rows, stable = sensitivity_sweep(labels_by_model, groups, _parse_grid(args.grid))
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        out.write(f"# format: {FORMAT_VERSIONS['report']}\n")
        writer = csv.writer(out)
        writer.writerow(["a", "b", "model", "precision", "recall"])
        for row in rows:
            writer.writerow([f"{row['a']:.3f}", f"{row['b']:.3f}", row["model"],
                             f"{row['precision']:.6f}", f"{row['recall']:.6f}"])
    finally:
        if args.out:
            out.close()
    print(f"ranking stable across grid: {stable}")
    return 0


def _cmd_inspect_atoms(args):
    table = load_embeddings(args.embeddings)
    atomset = load_atoms(args.atoms, table=table)
    if args.word:
        if args.word not in atomset.coeffs:
            raise KeyError(f"word {args.word!r} not in atom set")
        ids = [j for j, _ in sorted(atomset.coeffs[args.word],
                                    key=lambda p: -abs(p[1]))]
    elif args.atom_ids:
        ids = [int(x) for x in args.atom_ids.split(",")]
    else:
        ids = list(range(min(10, atomset.num_atoms)))
    print(atom_report(atomset, table, ids, k=args.k))
    return 0


def _cmd_grad_check(args):
    from .gradsuite import run_gradient_suite

    results = run_gradient_suite(seed=args.seed, eps=args.eps,
                                 coords_per_param=args.coords)
    worst = 0.0
    for name, err in results.items():
        print(f"{name:24s} max relative error {err:.3e}")
        worst = max(worst, err)
    print(f"{'overall':24s} max relative error {worst:.3e}")
    return 0 if worst < 1e-4 else 1


_COMMANDS = {
    "stats": _cmd_stats,
    "decompose": _cmd_decompose,
    "match": _cmd_match,
    "train": _cmd_train,
    "generate": _cmd_generate,
    "prune": _cmd_prune,
    "evaluate": _cmd_evaluate,
    "sweep": _cmd_sweep,
    "inspect-atoms": _cmd_inspect_atoms,
    "grad-check": _cmd_grad_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.version:
        print(f"polydef {__version__}")
        for name, tag in sorted(FORMAT_VERSIONS.items()):
            print(f"format {name}: {tag}")
        return 0
    if not args.command:
        parser.print_usage(sys.stderr)
        return 2
    try:
        args = _apply_config(args, parser)
        return _COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, FormatError) as exc:
        print(f"polydef: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
