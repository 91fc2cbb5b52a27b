"""Command-line pipeline: prepare, train, predict, evaluate, topn.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric error.
Flat key=value config files feed the train command; command-line flags
override file values, and the effective configuration is echoed next to
every prepare/train output for provenance.
"""

from __future__ import annotations

import argparse
import csv
import os
import random
import sys

from . import complexes as cx
from . import gatcore
from . import metrics as mx
from . import training
from .chem import parse_pdb, parse_sdf, infer_protein_bonds, perceive_ligand
from .chem.structures import ATOMIC_MASS
from .errors import CheckpointError, DataError, NumericError, PligraphError
from .gatcore import HEAD_CLASSIFICATION, HEAD_REGRESSION

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_HEAD_ALIASES = {"cls": HEAD_CLASSIFICATION, "reg": HEAD_REGRESSION,
                 HEAD_CLASSIFICATION: HEAD_CLASSIFICATION,
                 HEAD_REGRESSION: HEAD_REGRESSION}

_CONFIG_KEYS = ("learning_rate", "n_blocks", "dim", "epochs", "batch_size",
                "seed", "model", "head", "shuffle")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared helpers

def _read_config_file(path: str) -> dict[str, str]:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _CONFIG_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = value.strip()
    return values


def _build_train_config(args) -> training.TrainConfig:
    cfg = {}
    if args.config:
        cfg.update(_read_config_file(args.config))
    overrides = {
        "learning_rate": args.lr, "n_blocks": args.blocks, "dim": args.dim,
        "epochs": args.epochs, "batch_size": args.batch_size, "seed": args.seed,
        "model": args.model, "head": args.head,
    }
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    if args.no_shuffle:
        cfg["shuffle"] = "false"
    head = str(cfg.get("head", "cls"))
    if head not in _HEAD_ALIASES:
        raise UsageError(f"head must be cls or reg, got {head!r}")
    model = str(cfg.get("model", gatcore.MODEL_GNNF))
    if model not in (gatcore.MODEL_GNNF, gatcore.MODEL_GNNP):
        raise UsageError(f"model must be gnnf or gnnp, got {model!r}")
    try:
        return training.TrainConfig(
            learning_rate=float(cfg.get("learning_rate", 1e-4)),
            n_blocks=int(cfg.get("n_blocks", 2)),
            dim=int(cfg.get("dim", 70)),
            epochs=int(cfg.get("epochs", 200)),
            batch_size=int(cfg.get("batch_size", 32)),
            seed=int(cfg.get("seed", 0)),
            model_kind=model,
            head_kind=_HEAD_ALIASES[head],
            shuffle=str(cfg.get("shuffle", "true")).lower() not in ("false", "0", "no"),
        )
    except ValueError as exc:
        raise UsageError(f"bad config value: {exc}") from exc


def _config_lines(cfg: training.TrainConfig, extras: dict) -> str:
    pairs = {
        "learning_rate": cfg.learning_rate, "n_blocks": cfg.n_blocks,
        "dim": cfg.dim, "epochs": cfg.epochs, "batch_size": cfg.batch_size,
        "seed": cfg.seed, "model": cfg.model_kind, "head": cfg.head_kind,
        "shuffle": str(cfg.shuffle).lower(),
    }
    pairs.update(extras)
    return "".join(f"{k} = {pairs[k]}\n" for k in sorted(pairs))


def _echo_config(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _read_table(path: str, value_column: str) -> dict[str, list[tuple[float, str]]]:
    """Label table CSV: id plus a value/label column (optional kind column)."""
    table: dict[str, list[tuple[float, str]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames \
                or value_column not in reader.fieldnames:
            raise DataError(f"label table needs columns id,{value_column}")
        for lineno, row in enumerate(reader, start=2):
            try:
                value = float(row[value_column])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad value {row[value_column]!r}") from exc
            kind = (row.get("kind") or "Kd").strip()
            table.setdefault(row["id"], []).append((value, kind))
    return table


# ---------------------------------------------------------------------------
# prepare

def _iter_pose_records(poses_path: str):
    """Yield (sample_id, pose_rank, structure) from a file or directory."""
    if os.path.isdir(poses_path):
        names = sorted(n for n in os.listdir(poses_path) if n.endswith(".sdf"))
        if not names:
            raise DataError(f"no .sdf files in {poses_path}")
        files = [os.path.join(poses_path, n) for n in names]
    else:
        files = [poses_path]
    counters: dict[str, int] = {}
    for fname in files:
        stem = os.path.splitext(os.path.basename(fname))[0]
        with open(fname, "r", encoding="utf-8") as fh:
            mols = parse_sdf(fh.read(), source_id=stem)
        for mol in mols:
            sid = mol.source_id
            counters[sid] = counters.get(sid, 0) + 1
            yield sid, counters[sid], mol


def cmd_prepare(args) -> int:
    protein = parse_pdb(_read_text(args.protein),
                        source_id=_stem(args.protein))
    target_id = args.target_id or protein.source_id

    crystal = None
    if args.label_mode == "rmsd":
        if not args.crystal:
            raise UsageError("--label-mode rmsd requires --crystal")
        crystal_mols = parse_sdf(_read_text(args.crystal), source_id=_stem(args.crystal))
        if len(crystal_mols) != 1:
            raise DataError(f"crystal file must hold one record, got {len(crystal_mols)}")
        crystal = crystal_mols[0]
    table = None
    if args.label_mode in ("activity", "affinity", "pic50", "docking"):
        if not args.labels:
            raise UsageError(f"--label-mode {args.label_mode} requires --labels")
        column = "label" if args.label_mode == "activity" else "value"
        table = _read_table(args.labels, column)

    crop_ref = None
    if args.crop_ref:
        ref_mols = parse_sdf(_read_text(args.crop_ref), source_id=_stem(args.crop_ref))
        if len(ref_mols) != 1:
            raise DataError(f"crop reference must hold one record, got {len(ref_mols)}")
        crop_ref = perceive_ligand(ref_mols[0]).base

    skips: list[tuple[str, int, str]] = []
    graphs = []
    fixed_pocket = None
    if crop_ref is not None:
        fixed_pocket = infer_protein_bonds(
            cx.crop_pocket(protein, crop_ref, args.cutoff_pocket))

    for sid, rank, mol in _iter_pose_records(args.poses):
        try:
            perceived = perceive_ligand(mol)
        except PligraphError:
            skips.append((sid, rank, "no_heavy_atoms"))
            continue
        if args.max_mw is not None:
            mw = (perceived.base.molecular_weight()
                  + ATOMIC_MASS["H"] * sum(perceived.num_hydrogens))
            if mw > args.max_mw:
                skips.append((sid, rank, "mw_exceeded"))
                continue

        rmsd = None
        if args.label_mode == "rmsd":
            try:
                rmsd = cx.heavy_atom_rmsd(mol, crystal)
            except DataError:
                skips.append((sid, rank, "atom_count_mismatch"))
                continue
            label = cx.label_pose_by_rmsd(rmsd)
            if label is None:
                skips.append((sid, rank, "rmsd_between_thresholds"))
                continue
        else:
            entries = table.get(sid)
            if not entries:
                skips.append((sid, rank, "missing_label"))
                continue
            if args.label_mode == "pic50":
                label = cx.pic50_label_mean([v for v, _ in entries])
            elif len(entries) > 1:
                raise DataError(f"duplicate label entries for id {sid!r}")
            elif args.label_mode == "activity":
                label = cx.LabelValue(cx.LABEL_ACTIVITY, entries[0][0])
            elif args.label_mode == "affinity":
                label = cx.affinity_label(entries[0][1] or "Kd", entries[0][0])
            else:
                label = cx.LabelValue(cx.LABEL_DOCKING, entries[0][0])

        try:
            if fixed_pocket is not None:
                pocket = fixed_pocket
            else:
                pocket = infer_protein_bonds(cx.crop_pocket(
                    protein, perceived.base, args.cutoff_pocket, sample_id=sid))
            graphs.append(cx.build_complex_graph(
                pocket, perceived, label,
                interaction_cutoff=args.cutoff_interaction,
                sample_id=sid, target_id=target_id, pose_rank=rank, rmsd=rmsd))
        except cx.EmptyPocketError:
            skips.append((sid, rank, "empty_pocket"))
        except DataError as exc:
            skips.append((sid, rank, f"data_error:{exc}"))

    if args.balance:
        graphs = _balance(graphs, args.seed, skips)
    _write_skips(args.skip_log or args.out + ".skips.csv", skips)
    if not graphs:
        raise DataError("prepare produced no records (see skip log)")

    cx.write_dataset(args.out, graphs)
    echo = {
        "command": "prepare", "label_mode": args.label_mode,
        "cutoff_pocket": args.cutoff_pocket,
        "cutoff_interaction": args.cutoff_interaction,
        "balance": str(bool(args.balance)).lower(),
        "max_mw": "" if args.max_mw is None else args.max_mw,
        "seed": args.seed,
    }
    _echo_config(args.out + ".config.txt",
                 "".join(f"{k} = {echo[k]}\n" for k in sorted(echo)))
    print(f"prepare: wrote {len(graphs)} records to {args.out} "
          f"({len(skips)} skipped)")
    return EXIT_OK


def _balance(graphs, seed, skips):
    """Downsample the majority activity class to a 1:1 ratio."""
    if any(g.label.kind != cx.LABEL_ACTIVITY for g in graphs):
        raise DataError("--balance applies only to activity-labeled datasets")
    pos = [g for g in graphs if g.label.value == 1.0]
    neg = [g for g in graphs if g.label.value == 0.0]
    keep = min(len(pos), len(neg))
    rng = random.Random(seed)
    kept_ids = set()
    for group in (pos, neg):
        chosen = rng.sample(range(len(group)), keep) if len(group) > keep \
            else range(len(group))
        kept_ids.update(id(group[i]) for i in chosen)
    out = []
    for g in graphs:
        if id(g) in kept_ids:
            out.append(g)
        else:
            skips.append((g.sample_id, g.pose_rank, "balance_drop"))
    return out


def _write_skips(path, skips):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "pose_rank", "reason"])
        for sid, rank, reason in skips:
            writer.writerow([sid, rank, reason])


# ---------------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    cfg = _build_train_config(args)
    dataset = cx.read_dataset(args.data, interaction_cutoff=args.cutoff_interaction)
    eval_set = None
    if args.eval:
        eval_set = cx.read_dataset(args.eval, interaction_cutoff=args.cutoff_interaction)

    params = None
    if args.init_from:
        params = training.load_checkpoint(args.init_from)
        if params.head_kind != cfg.head_kind or params.model_kind != cfg.model_kind:
            raise CheckpointError(
                f"checkpoint is {params.model_kind}/{params.head_kind}, "
                f"config asks {cfg.model_kind}/{cfg.head_kind}")

    params, rows = training.train_loop(dataset, cfg, eval_set=eval_set, params=params)

    os.makedirs(args.out, exist_ok=True)
    training.save_checkpoint(os.path.join(args.out, "checkpoint"), params)
    config_text = _config_lines(cfg, {"cutoff_interaction": args.cutoff_interaction})
    header = "# " + " ".join(
        line.replace(" = ", "=") for line in config_text.splitlines())
    training.write_train_log(os.path.join(args.out, "train_log.csv"), rows, header)
    _echo_config(os.path.join(args.out, "effective_config.txt"), config_text)
    last = rows[-1]
    print(f"train: {len(rows)} epochs, final train_loss {last['train_loss']:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict / evaluate / topn

def cmd_predict(args) -> int:
    params = training.load_checkpoint(args.checkpoint)
    if args.model and args.model != params.model_kind:
        raise CheckpointError(
            f"checkpoint holds a {params.model_kind} model, --model asked {args.model}")
    if args.head and _HEAD_ALIASES.get(args.head, args.head) != params.head_kind:
        raise CheckpointError(
            f"checkpoint holds a {params.head_kind} head, --head asked {args.head}")

    dataset = cx.read_dataset(args.data, interaction_cutoff=args.cutoff_interaction)
    dataset.sort(key=lambda g: (g.sample_id, g.pose_rank))
    preds = []
    warnings = {}
    for i, g in enumerate(dataset):
        score = gatcore.forward(g, params)
        value = gatcore.predict(score, params.head_kind)
        if params.model_kind == gatcore.MODEL_GNNF and not g.interaction:
            warnings[i] = "no_interactions"
        preds.append(mx.PredictionRecord(
            sample_id=g.sample_id, target_id=g.target_id, pose_rank=g.pose_rank,
            score=value, label=g.label.value, rmsd=g.rmsd))
    mx.write_predictions(args.out, preds, warnings)
    print(f"predict: wrote {len(preds)} rows to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    preds = mx.read_predictions(args.predictions)
    if args.mode == "cls":
        report = mx.classification_metrics(preds, threshold=args.threshold)
        kind = "classification"
    else:
        report = mx.regression_metrics(preds)
        kind = "regression"
    print(mx.format_metric_report(report, kind))
    if args.out:
        mx.write_metric_report(args.out, report, kind)
    return EXIT_OK


def cmd_topn(args) -> int:
    preds = mx.read_predictions(args.predictions)
    n_values = [int(v) for v in args.n.split(",") if v]
    table = mx.topn_pose_analysis(preds, n_values, rmsd_good=args.rmsd_good,
                                  rank_order=args.rank_order)
    lines = [f"top-{n:<4d} {table[n]:6.2f}%" for n in n_values]
    print("\n".join(lines))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "percent"])
            for n in n_values:
                writer.writerow([n, repr(table[n])])
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point

def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pligraph",
        description="Protein-ligand activity and affinity prediction with "
                    "gated graph attention.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build a dataset from structure files")
    p.add_argument("--protein", required=True, help="target PDB file")
    p.add_argument("--poses", required=True,
                   help="ligand SDF file (multi-record) or directory of .sdf files")
    p.add_argument("--label-mode", required=True,
                   choices=["rmsd", "activity", "affinity", "pic50", "docking"])
    p.add_argument("--crystal", help="crystal ligand SDF for rmsd labeling")
    p.add_argument("--labels", help="label table CSV (id,label or id,value[,kind])")
    p.add_argument("--crop-ref",
                   help="reference ligand SDF; crop the pocket once against it")
    p.add_argument("--out", required=True, help="output dataset JSONL")
    p.add_argument("--skip-log", help="skip log CSV (default <out>.skips.csv)")
    p.add_argument("--target-id", help="target identifier (default PDB stem)")
    p.add_argument("--cutoff-pocket", type=float, default=cx.POCKET_CUTOFF)
    p.add_argument("--cutoff-interaction", type=float, default=cx.INTERACTION_CUTOFF)
    p.add_argument("--balance", action="store_true",
                   help="downsample the majority activity class to 1:1")
    p.add_argument("--max-mw", type=float, help="drop ligands above this weight (Da)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model on a prepared dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--eval", help="held-out dataset evaluated each epoch")
    p.add_argument("--out", required=True, help="output run directory")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--model", choices=[gatcore.MODEL_GNNF, gatcore.MODEL_GNNP])
    p.add_argument("--head", choices=["cls", "reg"])
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--init-from", help="checkpoint directory to resume from")
    p.add_argument("--cutoff-interaction", type=float, default=cx.INTERACTION_CUTOFF)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a dataset with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output prediction CSV")
    p.add_argument("--model", choices=[gatcore.MODEL_GNNF, gatcore.MODEL_GNNP],
                   help="assert the checkpoint model kind")
    p.add_argument("--head", choices=["cls", "reg"],
                   help="assert the checkpoint head kind")
    p.add_argument("--cutoff-interaction", type=float, default=cx.INTERACTION_CUTOFF)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="metrics over a prediction CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--mode", required=True, choices=["cls", "reg"])
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="optional metric CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("topn", help="top-N pose identification percentages")
    p.add_argument("--predictions", required=True)
    p.add_argument("--n", default="1,2,3,5", help="comma-separated rank cutoffs")
    p.add_argument("--rank-order", choices=["asc", "desc"], default="desc",
                   help="asc for docking energies, desc for probabilities")
    p.add_argument("--rmsd-good", type=float, default=2.0)
    p.add_argument("--out", help="optional CSV output")
    p.set_defaults(func=cmd_topn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PligraphError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
