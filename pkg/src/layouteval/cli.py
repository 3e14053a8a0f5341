"""Command-line interface.

Subcommands: evaluate, batch-evaluate, build-ontology, stats, tune, refine.
Exit codes: 0 success, 1 validation/content error, 2 I/O error (argparse
usage errors also exit 2). Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import builder, report, tuning
from .errors import ParseError, ValidationError
from .gateway import GatewayClient, GatewayConfig, MODALITIES, make_model_critic
from .ontology import Ontology, load_ontology, save_ontology
from .refine import ScriptedFixer, heuristic_critic, refine_loop
from .scene import (
    PlacementCondition,
    SceneLayout,
    dump_json,
    load_condition,
    load_layout,
)
from .verifiers import EvalParams, evaluate


def _load_params(path: str | None) -> EvalParams:
    if path is None:
        return EvalParams()
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValidationError("$", "params overlay must be a JSON object")
    return EvalParams.from_dict(data)


def _write_or_print(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _expand_globs(patterns: list[str]) -> list[str]:
    paths: list[str] = []
    for pattern in patterns:
        matched = sorted(glob.glob(pattern))
        paths.extend(matched if matched else [pattern])
    missing = [p for p in paths if not Path(p).is_file()]
    if missing:
        raise FileNotFoundError(f"no such file: {missing[0]}")
    return paths


def _sibling_condition(layout_path: str) -> PlacementCondition | None:
    candidate = Path(layout_path).with_suffix(".condition.json")
    return load_condition(candidate) if candidate.is_file() else None


def _cmd_evaluate(args) -> int:
    layout = load_layout(args.layout, corner_anchor=args.corner_anchor)
    ontology = load_ontology(args.ontology)
    condition = load_condition(args.condition) if args.condition else None
    params = _load_params(args.params)
    result = evaluate(layout, condition, ontology, params)
    if args.format == "json":
        text = report.render_json(result)
    elif args.format == "text":
        text = report.render_text(result)
    else:
        text = report.render_csv([(Path(args.layout).stem, result)])
    _write_or_print(text, args.out)
    return 0


def _evaluate_one(task) -> dict:
    path, corner_anchor, ontology, params = task
    layout = load_layout(path, corner_anchor=corner_anchor)
    condition = _sibling_condition(path)
    return evaluate(layout, condition, ontology, params).to_dict()


def _cmd_batch_evaluate(args) -> int:
    paths = [p for p in _expand_globs(args.layouts) if not p.endswith(".condition.json")]
    if not paths:
        raise ValidationError("layouts", "no layout files matched")
    ontology = load_ontology(args.ontology)
    params = _load_params(args.params)

    tasks = [(p, args.corner_anchor, ontology, params) for p in paths]
    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            dicts = list(pool.map(_evaluate_one, tasks))
    else:
        dicts = [_evaluate_one(t) for t in tasks]

    rows = []
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(report.CSV_COLUMNS)
    for path, rep in zip(paths, dicts):
        scores = rep["scores"]
        row = [Path(path).stem,
               report.percent(scores["semantic"]), report.percent(scores["orientation"]),
               report.percent(scores["prox_overlap"]), report.percent(scores["true_overlap"]),
               report.percent(scores["average"])]
        writer.writerow(row)
        rows.append(row)
        if args.report_dir:
            out_dir = Path(args.report_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / f"{Path(path).stem}.report.json").write_text(dump_json(rep), encoding="utf-8")
    _write_or_print(buffer.getvalue(), args.out)

    if args.figures:
        from .figures import save_batch_figure

        save_batch_figure(rows, Path(args.figures))
    return 0


def _cmd_build_ontology(args) -> int:
    paths = _expand_globs(args.corpus)
    cfg = builder.BuilderConfig()
    if args.config:
        cfg = builder.BuilderConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    relations = None
    if args.relations:
        relations = []
        for path in _expand_globs([args.relations]):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        relations.append(builder.RelationTriple.from_dict(json.loads(line)))
    ontology = builder.build_ontology(paths, cfg, relations=relations, jobs=args.jobs or os.cpu_count() or 1)
    save_ontology(ontology, args.out)
    skipped = ontology.meta.get("skipped_records", [])
    if skipped:
        print(f"skipped {len(skipped)} bad corpus records", file=sys.stderr)
    return 0


def _cmd_stats(args) -> int:
    ontology = load_ontology(args.ontology)
    summary = builder.summarize(ontology)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(builder.SUMMARY_COLUMNS)
    writer.writerows(summary.rows())
    Path(args.out).write_text(buffer.getvalue(), encoding="utf-8")
    if not args.no_figures:
        from .figures import save_summary_figures

        out_dir = Path(args.figures_dir) if args.figures_dir else Path(args.out).parent
        written = save_summary_figures(summary, out_dir, stem=Path(args.out).stem)
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _load_tuning_corpus(corpus_dir: str) -> list[tuple[SceneLayout, PlacementCondition | None]]:
    root = Path(corpus_dir)
    if not root.is_dir():
        raise FileNotFoundError(f"no such directory: {corpus_dir}")
    scenes = []
    for path in sorted(root.glob("*.json")):
        if path.name.endswith(".condition.json"):
            continue
        scenes.append((load_layout(path), _sibling_condition(str(path))))
    if not scenes:
        raise ValidationError("corpus", f"no layout files in {corpus_dir}")
    return scenes


def _cmd_tune(args) -> int:
    scenes = _load_tuning_corpus(args.corpus)
    ontology = load_ontology(args.ontology)
    grid = tuning.ParamGrid.load(args.grid)
    base = _load_params(args.params)
    result = tuning.sweep(scenes, ontology, grid, base_params=base, mode=args.mode,
                          jobs=args.jobs or os.cpu_count() or 1)

    header, rows = result.csv_rows()
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    Path(args.out).write_text(buffer.getvalue(), encoding="utf-8")

    if result.errors:
        print(f"{len(result.errors)} evaluation errors during sweep", file=sys.stderr)
    if result.sanity_most_lenient_always_max is False:
        print("warning: most lenient combination missed the per-scene maximum", file=sys.stderr)

    if args.select:
        combo = tuning.select(result, band=tuple(args.band))
        text = dump_json(combo)
        sys.stdout.write(text)
        if args.selected_out:
            Path(args.selected_out).write_text(text, encoding="utf-8")
    return 0


def _cmd_refine(args) -> int:
    condition = load_condition(args.condition)
    ontology = load_ontology(args.ontology)
    params = _load_params(args.params)
    initial = load_layout(args.layout) if args.layout else None
    generator = ScriptedFixer(initial_layout=initial, fixes_per_step=args.fixes_per_step)

    if args.critic == "heuristic":
        critic = lambda layout, cond: heuristic_critic(layout, cond, params)  # noqa: E731
    else:
        config = GatewayConfig.from_env(stub_dir=args.stub_dir)
        client = GatewayClient(config)
        critic = make_model_critic(client, args.modality, tuple(args.images or ()))

    trajectory = refine_loop(
        generator, critic, condition, ontology, params,
        max_iters=args.max_iters, stop_reward=args.stop_reward,
    )
    trajectory.save_jsonl(args.out)
    last = trajectory.steps[-1]
    if last.error:
        print(f"stopped at step {last.index}: {last.error}", file=sys.stderr)
    elif last.feedback is not None:
        print(f"final reward {last.feedback.reward:.3f} after {len(trajectory.steps)} steps",
              file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layouteval",
                                     description="Symbolic floor-plan layout evaluation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score one layout against an ontology")
    p.add_argument("--layout", required=True, help="layout JSON file")
    p.add_argument("--ontology", required=True, help="ontology JSON file")
    p.add_argument("--condition", help="placement condition JSON (enables completeness)")
    p.add_argument("--params", help="EvalParams overlay JSON")
    p.add_argument("--format", choices=("json", "text", "csv"), default="json")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--corner-anchor", action="store_true",
                   help="interpret object cx/cy as the min corner instead of the center")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("batch-evaluate", help="score many layouts into one CSV")
    p.add_argument("--layouts", nargs="+", required=True, help="layout files or glob patterns")
    p.add_argument("--ontology", required=True)
    p.add_argument("--params")
    p.add_argument("--out", help="scores CSV (default: stdout)")
    p.add_argument("--report-dir", help="also write one JSON report per layout here")
    p.add_argument("--figures", help="write a score overview figure into this directory")
    p.add_argument("--jobs", type=int, default=0, help="parallel workers (default: all cores)")
    p.add_argument("--corner-anchor", action="store_true")
    p.set_defaults(func=_cmd_batch_evaluate)

    p = sub.add_parser("build-ontology", help="build an ontology from a corpus")
    p.add_argument("--corpus", nargs="+", required=True, help="corpus JSONL files or globs")
    p.add_argument("--config", help="builder config JSON")
    p.add_argument("--relations", help="relation-triple JSONL glob for support filtering")
    p.add_argument("--out", required=True, help="ontology JSON output")
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=_cmd_build_ontology)

    p = sub.add_parser("stats", help="summarize an ontology to CSV (plus figures)")
    p.add_argument("--ontology", required=True)
    p.add_argument("--out", required=True, help="summary CSV output")
    p.add_argument("--figures-dir", help="figure directory (default: next to the CSV)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("tune", help="sweep a threshold grid over reference scenes")
    p.add_argument("--corpus", required=True,
                   help="directory of layout JSONs (optional <stem>.condition.json siblings)")
    p.add_argument("--ontology", required=True)
    p.add_argument("--grid", required=True, help="grid JSON: {param: [candidates], ...}")
    p.add_argument("--out", required=True, help="sweep results CSV")
    p.add_argument("--params", help="base EvalParams overlay")
    p.add_argument("--mode", choices=("argmax", "perfect"), default="argmax")
    p.add_argument("--select", action="store_true", help="print the chosen combo as a params overlay")
    p.add_argument("--band", type=float, nargs=2, default=[0.30, 0.70], metavar=("LO", "HI"))
    p.add_argument("--selected-out", help="also write the chosen combo JSON here")
    p.add_argument("--jobs", type=int, default=0)
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("refine", help="run the iterative refinement loop")
    p.add_argument("--condition", required=True)
    p.add_argument("--ontology", required=True)
    p.add_argument("--critic", choices=("heuristic", "model"), required=True)
    p.add_argument("--modality", choices=MODALITIES, default="text")
    p.add_argument("--layout", help="initial layout (default: naive placement from the condition)")
    p.add_argument("--images", nargs="*", help="pre-rendered view files for image modalities")
    p.add_argument("--max-iters", type=int, default=5)
    p.add_argument("--stop-reward", type=float, default=1.0)
    p.add_argument("--fixes-per-step", type=int, default=1)
    p.add_argument("--params")
    p.add_argument("--stub-dir", help="replay canned gateway responses from this directory")
    p.add_argument("--out", required=True, help="trajectory JSONL output")
    p.set_defaults(func=_cmd_refine)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
