"""Command-line front end: synth, train, rank, prune, select-rates, evaluate, report.

A training run produces a self-contained artifact directory:

    config.json        resolved run config (seeds included)
    checkpoint.ckpt    best-validation weights
    history.jsonl      one structured record per epoch
    metrics.json       val/test metrics of the trained model
    prune_report.json / checkpoint_pruned.ckpt        (cmd: prune)
    rate_selection.json / checkpoint_selected.ckpt    (cmd: select-rates)
    report.json / report.txt                          (cmd: report)
    log.txt            human log (timestamps live here only)

Every artifact is reproducible from (config, seed); structured outputs carry
no timestamps, so identical runs are byte-identical.  Exit codes: 0 success,
2 configuration error, 3 data/input error, 4 numeric error, 5 state error,
1 anything else.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_model, save_model
from .config import RunConfig, load_run_config
from .cost import cost_snapshot, reduction_report
from .data import SynthSpec, normalize, prepare_branches, save_windows, synth_generate
from .errors import (
    ConfigError,
    CossError,
    DataError,
    InputError,
    NumericError,
    StateError,
)
from .model import build_model, gate_weights
from .prune import (
    prune_keep,
    prune_to_threshold,
    rate_probe,
    rate_sensitivity,
    select_rates_by_policy,
)
from .report import render_gate_tables, render_prune_steps, render_summary, render_table
from .seeding import derive_seed
from .train import evaluate, fine_tune, split_dataset, train

log = logging.getLogger("coss")

EXIT_CODES = [
    (ConfigError, 2),
    (DataError, 3),
    (InputError, 3),
    (NumericError, 4),
    (StateError, 5),
    (CossError, 1),
]

CHECKPOINTS = {
    "final": "checkpoint.ckpt",
    "pruned": "checkpoint_pruned.ckpt",
    "selected": "checkpoint_selected.ckpt",
}


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


@contextlib.contextmanager
def _locked(run_dir: Path):
    """One writer per run directory at a time."""
    lock = run_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise StateError(f"run directory {run_dir} is locked by another command (rm {lock} if stale)")
    try:
        os.write(fd, f"pid {os.getpid()}\n".encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _attach_log(run_dir: Path) -> logging.Handler:
    handler = logging.FileHandler(run_dir / "log.txt")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    return handler


def _prepare_run_data(cfg: RunConfig):
    ds = cfg.load_data()
    split_dataset(ds, cfg.split_ratios, seed=cfg.seed)
    ds = normalize(ds)
    return prepare_branches(ds, cfg.model)


def _load_run(run_dir: Path, which: str = "final"):
    cfg_path = run_dir / "config.json"
    if not cfg_path.is_file():
        raise InputError(f"{run_dir} is not a run directory (no config.json)")
    cfg = load_run_config(cfg_path)
    ckpt = run_dir / CHECKPOINTS[which]
    if not ckpt.is_file():
        raise InputError(f"{run_dir}: no {which} checkpoint ({ckpt.name} missing)")
    model = load_model(ckpt)
    data = _prepare_run_data(cfg)
    return cfg, model, data


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    spec_raw = json.loads(Path(args.spec).read_text())
    if args.seed is not None:
        spec_raw["seed"] = args.seed
    spec = SynthSpec.from_dict(spec_raw)
    ds = synth_generate(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_windows(out, ds)
    print(
        f"wrote {out}: {ds.num_windows} windows, {len(ds.sensors)} sensors, "
        f"{ds.num_classes} classes"
    )
    return 0


def _train_single(cfg: RunConfig, run_dir: Path) -> dict:
    run_dir.mkdir(parents=True, exist_ok=True)
    with _locked(run_dir):
        handler = _attach_log(run_dir)
        try:
            log.info("training run: seed=%d out=%s", cfg.seed, run_dir)
            data = _prepare_run_data(cfg)
            model = build_model(cfg.model)
            model, history = train(model, data, cfg.train)
            val = evaluate(model, data, "val")
            test = evaluate(model, data, "test")
            _dump_json(run_dir / "config.json", cfg.to_dict())
            save_model(run_dir / "checkpoint.ckpt", model)
            with open(run_dir / "history.jsonl", "w") as fh:
                for rec in history.records:
                    fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
            metrics = {
                "best_epoch": history.best_epoch,
                "best_val_loss": history.best_val_loss,
                "epochs_run": history.epochs_run,
                "stopped_early": history.stopped_early,
                "metric_name": cfg.train.metric,
                "val": val.to_dict(),
                "test": test.to_dict(),
            }
            _dump_json(run_dir / "metrics.json", metrics)
            log.info(
                "done: %d epochs (best %d), val %s=%.4f test %s=%.4f",
                history.epochs_run, history.best_epoch,
                cfg.train.metric, val.by_name(cfg.train.metric),
                cfg.train.metric, test.by_name(cfg.train.metric),
            )
            return metrics
        finally:
            log.removeHandler(handler)
            handler.close()


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out:
        out_root = Path(args.out)
    else:
        runs_root = Path(os.environ.get("COSS_RUNS_DIR", "runs"))
        out_root = runs_root / f"{Path(args.config).stem}-seed{cfg.seed}"

    if args.repeats == 1:
        metrics = _train_single(cfg, out_root)
        m = cfg.train.metric
        print(
            render_table(
                ["split", m, "accuracy"],
                [
                    ["val", metrics["val"][m], metrics["val"]["accuracy"]],
                    ["test", metrics["test"][m], metrics["test"]["accuracy"]],
                ],
                title=f"run {out_root} (best epoch {metrics['best_epoch']})",
            )
        )
        return 0

    per_run = []
    for i in range(args.repeats):
        sub = cfg.with_seed(derive_seed(cfg.seed, f"repeat:{i}"))
        metrics = _train_single(sub, out_root / f"run_{i:02d}")
        per_run.append(metrics)
        print(f"run_{i:02d}: test {cfg.train.metric}={metrics['test'][cfg.train.metric]:.4f}")
    m = cfg.train.metric
    vals = np.array([r["test"][m] for r in per_run])
    summary = {
        "repeats": args.repeats,
        "metric_name": m,
        "test_mean": float(vals.mean()),
        "test_std": float(vals.std()),
        "per_run": [r["test"][m] for r in per_run],
    }
    _dump_json(out_root / "summary.json", summary)
    print(f"test {m}: {vals.mean():.4f} +/- {vals.std():.4f} over {args.repeats} runs")
    return 0


def cmd_rank(args) -> int:
    run_dir = Path(args.run)
    _, model, _ = _load_run(run_dir, "final")
    weights = gate_weights(model)
    print(render_gate_tables(weights))
    _dump_json(
        run_dir / "rank.json",
        {"weights": _jsonable_weights(weights), "rate_sensitivity": rate_sensitivity(model)},
    )
    return 0


def _jsonable_weights(weights: dict) -> dict:
    return {
        "sensors": weights["sensors"],
        "rates": {sid: {repr(r): w for r, w in per.items()} for sid, per in weights["rates"].items()},
    }


def cmd_prune(args) -> int:
    run_dir = Path(args.run)
    cfg, model, data = _load_run(run_dir, "final")
    with _locked(run_dir):
        handler = _attach_log(run_dir)
        try:
            test_full = evaluate(model, data, "test")
            if args.keep is not None:
                pruned, rep = prune_keep(
                    model, data, args.keep, train_cfg=cfg.train,
                    finetune_each=args.finetune, split=args.split, metric=cfg.train.metric,
                )
            else:
                pruned, rep = prune_to_threshold(
                    model, data, max_drop=args.max_drop, train_cfg=cfg.train,
                    finetune_each=args.finetune, split=args.split, metric=cfg.train.metric,
                )
            test_pruned = evaluate(pruned, data, "test")
            test_finetuned = None
            if args.finetune and rep.pruned:
                fine_tune(pruned, data, cfg.train)
                test_finetuned = evaluate(pruned, data, "test")
            save_model(run_dir / CHECKPOINTS["pruned"], pruned)
            payload = {
                "report": rep.to_dict(),
                "cost_after": cost_snapshot(pruned).to_dict(),
                "test_full": test_full.to_dict(),
                "test_pruned": test_pruned.to_dict(),
                "test_pruned_finetuned": test_finetuned.to_dict() if test_finetuned else None,
                "finetuned": bool(args.finetune),
            }
            _dump_json(run_dir / "prune_report.json", payload)
            print(render_prune_steps(rep))
            print(f"\npruned: {rep.pruned or '(none)'}")
            m = cfg.train.metric
            line = f"test {m}: full={test_full.by_name(m):.4f} pruned={test_pruned.by_name(m):.4f}"
            if test_finetuned:
                line += f" finetuned={test_finetuned.by_name(m):.4f}"
            print(line)
            log.info("prune: removed %s", rep.pruned)
            return 0
        finally:
            log.removeHandler(handler)
            handler.close()


def cmd_select_rates(args) -> int:
    run_dir = Path(args.run)
    which = "pruned" if (run_dir / CHECKPOINTS["pruned"]).is_file() else "final"
    cfg, model, data = _load_run(run_dir, which)
    with _locked(run_dir):
        handler = _attach_log(run_dir)
        try:
            test_before = evaluate(model, data, "test")
            selected, selection, baseline = select_rates_by_policy(
                model, data, max_drop=args.max_drop, split=args.split, metric=cfg.train.metric
            )
            probes = {
                sid: {repr(r): m for r, m in rate_probe(model, data, sid, args.split, cfg.train.metric).items()}
                for sid in model.active_sensors()
            }
            test_selected = evaluate(selected, data, "test")
            test_finetuned = None
            if args.finetune:
                fine_tune(selected, data, cfg.train)
                test_finetuned = evaluate(selected, data, "test")
            save_model(run_dir / CHECKPOINTS["selected"], selected)
            payload = {
                "base_checkpoint": which,
                "baseline_metric": baseline,
                "split": args.split,
                "metric_name": cfg.train.metric,
                "selection": selection.to_dict(),
                "probes": probes,
                "test_before": test_before.to_dict(),
                "test_selected": test_selected.to_dict(),
                "test_selected_finetuned": test_finetuned.to_dict() if test_finetuned else None,
                "cost_after": cost_snapshot(selected).to_dict(),
            }
            _dump_json(run_dir / "rate_selection.json", payload)
            rows = sorted(selection.rates.items())
            print(render_table(["sensor", "selected rate (Hz)"], rows, title="Rate selection"))
            m = cfg.train.metric
            line = f"test {m}: before={test_before.by_name(m):.4f} selected={test_selected.by_name(m):.4f}"
            if test_finetuned:
                line += f" finetuned={test_finetuned.by_name(m):.4f}"
            print(line)
            log.info("select-rates: %s", selection.rates)
            return 0
        finally:
            log.removeHandler(handler)
            handler.close()


def cmd_evaluate(args) -> int:
    run_dir = Path(args.run)
    cfg, model, data = _load_run(run_dir, args.checkpoint)
    metrics = evaluate(model, data, args.split)
    print(
        render_table(
            ["metric", "value"],
            [
                ["accuracy", metrics.accuracy],
                ["macro_f1", metrics.macro_f1],
                *[[f"f1[{name}]", v] for name, v in zip(data.class_names, metrics.per_class_f1)],
            ],
            title=f"{args.checkpoint} checkpoint on {args.split} split ({metrics.num_windows} windows)",
        )
    )
    _dump_json(run_dir / f"eval_{args.checkpoint}_{args.split}.json", metrics.to_dict())
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    cfg, model, data = _load_run(run_dir, "final")
    metric = cfg.train.metric
    full_cost = cost_snapshot(model)
    test_full = evaluate(model, data, "test")

    pruned_sensors: list[str] = []
    prune_payload = None
    if (run_dir / "prune_report.json").is_file():
        prune_payload = json.loads((run_dir / "prune_report.json").read_text())
        pruned_sensors = prune_payload["report"]["pruned"]
    if (run_dir / CHECKPOINTS["pruned"]).is_file():
        pruned_model = load_model(run_dir / CHECKPOINTS["pruned"])
        pruned_cost = cost_snapshot(pruned_model)
        m_pruned = (
            prune_payload["test_pruned_finetuned"] or prune_payload["test_pruned"]
        )[metric] if prune_payload else evaluate(pruned_model, data, "test").by_name(metric)
    else:
        pruned_cost = full_cost
        m_pruned = test_full.by_name(metric)
    red = reduction_report(full_cost, pruned_cost, test_full.by_name(metric), m_pruned)

    selection = None
    sel_red = None
    sel_payload = None
    if (run_dir / "rate_selection.json").is_file():
        sel_payload = json.loads((run_dir / "rate_selection.json").read_text())
        from .prune import RateSelection

        selection = RateSelection(
            rates={sid: float(r) for sid, r in sel_payload["selection"]["rates"].items()},
            metric=sel_payload["selection"]["metric"],
        )
        selected_model = load_model(run_dir / CHECKPOINTS["selected"])
        m_sel = (sel_payload["test_selected_finetuned"] or sel_payload["test_selected"])[metric]
        sel_red = reduction_report(
            full_cost, cost_snapshot(selected_model), test_full.by_name(metric), m_sel
        )

    text = render_table(
        ["item", "value"],
        [
            ["#Sensors", len(model.config.sensors)],
            ["Rate candidates", "; ".join(
                f"{s.sensor_id}: {','.join(f'{r:g}' for r in s.rate_candidates)}"
                for s in model.config.sensors
            )],
            ["Window size (s)", f"{model.config.window_seconds:g}"],
        ],
        title="Experiment",
    )
    text += "\n\n" + render_summary(pruned_sensors, red, selection, sel_red, metric)
    print(text)
    (run_dir / "report.txt").write_text(text + "\n")
    _dump_json(
        run_dir / "report.json",
        {
            "num_sensors": len(model.config.sensors),
            "pruned_sensors": pruned_sensors,
            "metric_name": metric,
            "prune_reduction": red.to_dict(),
            "selection": selection.to_dict() if selection else None,
            "selection_reduction": sel_red.to_dict() if sel_red else None,
        },
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coss",
        description="Train a gated multi-branch sensor classifier, rank sensors and "
        "sampling rates by learned weight scores, and prune to a hardware budget.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic dataset artifact")
    s.add_argument("--spec", required=True, help="synth spec JSON file")
    s.add_argument("--out", required=True, help="output dataset file")
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("train", help="train a model from a run config")
    s.add_argument("--config", required=True, help="run config JSON file")
    s.add_argument("--out", default=None, help="run directory (default: $COSS_RUNS_DIR/<config>-seed<seed>)")
    s.add_argument("--seed", type=int, default=None, help="override every seed in the config")
    s.add_argument("--repeats", type=int, default=1, help="train N runs with derived seeds")
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("rank", help="print sensor/rate weight-score tables")
    s.add_argument("--run", required=True)
    s.set_defaults(fn=cmd_rank)

    s = sub.add_parser("prune", help="progressively prune sensors by weight score")
    s.add_argument("--run", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--keep", type=int, default=None, help="keep exactly K sensors")
    g.add_argument("--max-drop", type=float, default=2.0,
                   help="largest pruned set with metric drop <= D points (default 2.0)")
    s.add_argument("--finetune", action="store_true", help="also fine-tune after pruning")
    s.add_argument("--split", default="val", choices=["train", "val", "test"])
    s.set_defaults(fn=cmd_prune)

    s = sub.add_parser("select-rates", help="pick one sampling rate per surviving sensor")
    s.add_argument("--run", required=True)
    s.add_argument("--max-drop", type=float, default=2.0)
    s.add_argument("--finetune", action="store_true")
    s.add_argument("--split", default="val", choices=["train", "val", "test"])
    s.set_defaults(fn=cmd_select_rates)

    s = sub.add_parser("evaluate", help="evaluate a run checkpoint on a split")
    s.add_argument("--run", required=True)
    s.add_argument("--split", default="test", choices=["train", "val", "test"])
    s.add_argument("--checkpoint", default="final", choices=sorted(CHECKPOINTS))
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("report", help="render the result summary for a run")
    s.add_argument("--run", required=True)
    s.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CossError as e:
        print(f"error: {e}", file=sys.stderr)
        for cls, code in EXIT_CODES:
            if isinstance(e, cls):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
