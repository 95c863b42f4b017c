"""Command-line front end binding the toolkit into reproducible pipelines.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error. One structured
log line per event goes to standard error; all data outputs are CSV/JSON.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import augment as aug
from . import evaluation as ev
from . import io as sio
from . import linear
from . import metrics as gm
from .core import (
    CohortManifest,
    SubjectRecord,
    devectorize,
    highest_quality_site,
    lowest_quality_site,
    split_cohort,
    vectorize_upper,
)
from .deep import ArchitectureConfig, HarmonizerModel, TrainingConfig, export_embeddings, train
from .errors import IoError, ScharmError, ValidationError
from .synthetic import generate_synthetic_cohort, redraw_retest

log = logging.getLogger("scharm")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(1)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scharm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic multi-site cohort")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--subjects", type=int, required=True)
    p.add_argument("--sites-file", required=True)
    p.add_argument("--effect-file", required=True)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("augment", help="mixup-augment one site's training matrices")
    p.add_argument("--manifest", required=True)
    p.add_argument("--site", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--report", action="store_true")

    p = sub.add_parser("metrics", help="nodal graph metrics for every record")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit-lr", help="fit the per-edge linear model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train a deep harmonizer")
    p.add_argument("--manifest", required=True)
    p.add_argument("--arch", choices=["fae", "gae"], required=True)
    p.add_argument("--config", default=None, help="JSON architecture config overrides")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--augment", type=int, default=0, metavar="N",
                   help="mixup-augment the training split with N children per site")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("harmonize", help="harmonize matrices to a target site")
    p.add_argument("--manifest", required=True)
    p.add_argument("--method", choices=["lr", "fae", "gae"], required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--target-site", type=int, required=True)
    p.add_argument("--source-site", type=int, default=None,
                   help="site to harmonize from (default: lowest quality)")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("evaluate", help="evaluation battery against a target cohort")
    p.add_argument("--pred-manifest", required=True)
    p.add_argument("--target-manifest", required=True)
    p.add_argument("--retest-manifest", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--normalized", action="store_true")

    p = sub.add_parser("export-embeddings", help="dump encoder embeddings as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    return parser


def _cmd_generate(args) -> int:
    sites = sio.load_sites(args.sites_file)
    d = (args.nodes * args.nodes - args.nodes) // 2
    effect = sio.load_effect(args.effect_file, d=d)
    manifest = generate_synthetic_cohort(
        n_nodes=args.nodes, n_subjects=args.subjects, sites=sites,
        effect=effect, density=args.density, seed=args.seed,
    )
    manifest = split_cohort(manifest, (0.8, 0.1, 0.1), seed=args.seed)
    out_dir = Path(args.out_dir)
    path = sio.save_cohort(manifest, out_dir)
    log.info("event=generated subjects=%d sites=%d manifest=%s", args.subjects, len(sites), path)

    # independent noise redraw at the highest-quality site: synthetic retest
    high = highest_quality_site(sites)
    test_ids = sorted(sid for sid, s in manifest.split_labels.items() if s == "test")
    retest_records = redraw_retest(manifest, effect, high, test_ids, seed=args.seed + 1)
    retest = CohortManifest(
        subjects=retest_records, sites=sites,
        split_labels={sid: "retest" for sid in test_ids}, seed=args.seed + 1,
    )
    retest_dir = out_dir / "retest"
    rpath = sio.save_cohort(retest, retest_dir)
    log.info("event=retest-generated subjects=%d manifest=%s", len(test_ids), rpath)
    return 0


def _cmd_augment(args) -> int:
    manifest = sio.load_cohort(args.manifest)
    records = manifest.records(split="train" if manifest.split_labels else None,
                               site_index=args.site)
    originals = [r.matrix for r in records]
    augmented = aug.augment_site(originals, args.count, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(augmented):
        sio.save_matrix(m, out_dir / f"aug{i:05d}.csv")
    log.info("event=augmented site=%d count=%d out=%s", args.site, args.count, out_dir)
    if args.report:
        report = aug.augmentation_report(originals, augmented)
        (out_dir / "report.csv").write_text(aug.report_to_csv(report))
        log.info("event=augmentation-report out=%s", out_dir / "report.csv")
    return 0


def _cmd_metrics(args) -> int:
    manifest = sio.load_cohort(args.manifest)
    lines = ["subject_id,site_index,node_index,NS,CC,CLC,LE"]
    for rec in manifest.subjects:
        ns = gm.nodal_strength(rec.matrix).values
        cc = gm.closeness_centrality(rec.matrix).values
        clc = gm.clustering_coefficient(rec.matrix).values
        le = gm.local_efficiency(rec.matrix).values
        for i in range(rec.matrix.n):
            lines.append(
                f"{rec.subject_id},{rec.site.site_index},{i},"
                f"{ns[i]:.10g},{cc[i]:.10g},{clc[i]:.10g},{le[i]:.10g}"
            )
    Path(args.out).write_text("\n".join(lines) + "\n")
    log.info("event=metrics records=%d out=%s", len(manifest.subjects), args.out)
    return 0


def _training_observations(manifest: CohortManifest):
    split = "train" if manifest.split_labels else None
    return [(vectorize_upper(r.matrix), r.site) for r in manifest.records(split=split)]


def _cmd_fit_lr(args) -> int:
    manifest = sio.load_cohort(args.manifest)
    model = linear.fit_lr(_training_observations(manifest))
    Path(args.out).write_text(linear.model_to_csv(model))
    log.info("event=fit-lr edges=%d out=%s", model.d, args.out)
    return 0


def _cmd_train(args) -> int:
    manifest = sio.load_cohort(args.manifest)
    n_sites = len(manifest.sites)
    if args.arch == "fae":
        config = ArchitectureConfig.fae_default(manifest.n_nodes, n_sites)
    else:
        config = ArchitectureConfig.gae_default(manifest.n_nodes, n_sites)
    if args.config:
        overrides = json.loads(Path(args.config).read_text())
        config = ArchitectureConfig.from_dict({**config.to_dict(), **overrides})
    model = HarmonizerModel(config, seed=args.seed)
    hyper = TrainingConfig(epochs=args.epochs, seed=args.seed)
    if args.augment > 0:
        manifest = aug.augment_cohort(manifest, args.augment, seed=args.seed)
        log.info("event=augmented-train per_site=%d total=%d",
                 args.augment, len(manifest.records(split="train")))
    model, history = train(model, manifest, hyper)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.save(out_dir / "model.bin", history=history)
    log.info("event=trained arch=%s epochs=%d final_loss=%.6g out=%s",
             args.arch, args.epochs, history.records[-1].total_loss, out_dir / "model.bin")
    return 0


def _cmd_harmonize(args) -> int:
    manifest = sio.load_cohort(args.manifest)
    target = manifest.site_by_index(args.target_site)
    source_idx = (args.source_site if args.source_site is not None
                  else lowest_quality_site(manifest.sites).site_index)
    source = manifest.site_by_index(source_idx)
    records = manifest.records(site_index=source_idx)
    if args.method == "lr":
        model = linear.model_from_csv(Path(args.model).read_text(), manifest.n_nodes)
        harmonized = [
            devectorize(linear.lr_harmonize(vectorize_upper(rec.matrix), source, target, model),
                        manifest.n_nodes)
            for rec in records
        ]
    else:
        model, _ = HarmonizerModel.load(args.model)
        if model.config.kind != args.method:
            raise ValidationError(f"model is {model.config.kind}, requested {args.method}")
        harmonized = model.harmonize_many([r.matrix for r in records], target)
    out_records = [
        SubjectRecord(subject_id=r.subject_id, site=target, matrix=m,
                      group_key=r.group_key, latent_truth=r.latent_truth)
        for r, m in zip(records, harmonized)
    ]
    out = CohortManifest(
        subjects=out_records, sites=manifest.sites,
        split_labels={r.subject_id: manifest.split_labels[r.subject_id]
                      for r in records if r.subject_id in manifest.split_labels},
        seed=manifest.seed,
    )
    path = sio.save_cohort(out, args.out_dir)
    log.info("event=harmonized method=%s source=%d target=%d records=%d manifest=%s",
             args.method, source_idx, args.target_site, len(out_records), path)
    return 0


def _cmd_evaluate(args) -> int:
    pred = sio.load_cohort(args.pred_manifest)
    target = sio.load_cohort(args.target_manifest)
    high = highest_quality_site(target.sites)
    low = lowest_quality_site(target.sites)
    pred_by_id = {r.subject_id: r.matrix for r in pred.subjects}
    target_by_id = {r.subject_id: r.matrix
                    for r in target.records(site_index=high.site_index)}
    low_by_id = {r.subject_id: r.matrix
                 for r in target.records(site_index=low.site_index)}
    shared = sorted(set(pred_by_id) & set(target_by_id))
    if not shared:
        raise ValidationError("no shared subjects between pred and target manifests")
    pred_mats = [pred_by_id[s] for s in shared]
    target_mats = [target_by_id[s] for s in shared]
    reports = [ev.evaluate_method("harmonized", pred_mats, target_mats)]
    if all(s in low_by_id for s in shared):
        reports.append(ev.evaluate_method("lower_bound", [low_by_id[s] for s in shared], target_mats))
    if args.retest_manifest:
        retest = sio.load_cohort(args.retest_manifest)
        retest_by_id = {r.subject_id: r.matrix for r in retest.subjects}
        rshared = sorted(set(retest_by_id) & set(target_by_id))
        if rshared:
            reports.append(
                ev.evaluate_method("upper_bound",
                                   [target_by_id[s] for s in rshared],
                                   [retest_by_id[s] for s in rshared])
            )
    Path(args.out).write_text(ev.report_table_csv(reports))
    log.info("event=evaluated subjects=%d methods=%d out=%s", len(shared), len(reports), args.out)
    if args.normalized:
        norm_path = Path(args.out).with_name(Path(args.out).stem + "_normalized.csv")
        norm_path.write_text(ev.normalized_report(reports))
        log.info("event=normalized-report out=%s", norm_path)
    return 0


def _cmd_export_embeddings(args) -> int:
    model, _ = HarmonizerModel.load(args.model)
    manifest = sio.load_cohort(args.manifest)
    Path(args.out).write_text(export_embeddings(model, manifest))
    log.info("event=embeddings records=%d out=%s", len(manifest.subjects), args.out)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "augment": _cmd_augment,
    "metrics": _cmd_metrics,
    "fit-lr": _cmd_fit_lr,
    "train": _cmd_train,
    "harmonize": _cmd_harmonize,
    "evaluate": _cmd_evaluate,
    "export-embeddings": _cmd_export_embeddings,
}


def run(argv: list[str]) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except IoError as e:
        log.error("event=io-error detail=%s", e)
        return 2
    except ScharmError as e:
        log.error("event=error type=%s detail=%s", type(e).__name__, e)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
