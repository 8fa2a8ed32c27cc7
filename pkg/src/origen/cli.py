"""Command-line entry point.

Subcommands: estimate (per-prompt reference vs typicality table), genericize
(streamed selection over K batches), report (recompute delimited reports and
figures from a stored manifest), validate (run the scenario suite).

Exit codes: 0 success, 1 runtime or assertion failure, 2 usage/config error.
All randomness flows from --seed; identical flags give byte-identical
manifest record bodies (timestamps live only in the manifest header).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from . import synthlab
from .backends import (CorpusBackend, HttpBackend, build_synthetic_backend,
                       load_embedding_file, load_synthetic_config)
from .errors import FormatError, InputError, OrigenError
from .estimator import (Conditioning, Reference, repeated_estimates,
                        typicality_summary)
from .genericize import (genericize_stream, most_generic_reference,
                         similarity_report, top_similar)
from .geometry import Embedding, metric_names, resolve_metric
from .seeds import derive_seed
from .store import (EmbeddingCache, RunManifest, canonical_json, jsonable,
                    load_manifest, write_rows_csv, write_similarity_csv,
                    write_similarity_json, write_top_similar_csv,
                    write_top_similar_json)

AUTH_TOKEN_ENV = "ORIGEN_API_TOKEN"

ESTIMATE_CSV_HEADER = ["prompt", "reference_label", "metric", "n", "m",
                       "ref_mean", "ref_std", "typ_mean", "typ_std"]


class UsageError(Exception):
    """Bad flags or config; maps to exit code 2."""


# -- argument handling ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="origen",
        description="Originality estimation and output genericization "
                    "over black-box generative backends.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, *, sampling: bool = True) -> None:
        p.add_argument("--config", help="JSON config file; flags win over it")
        p.add_argument("--out", help="output directory")
        p.add_argument("--metric", help="distance metric name "
                                        f"(registered: {', '.join(metric_names())})")
        p.add_argument("--format", choices=["csv", "jsonl"], dest="fmt",
                       help="delimited export format (default csv)")
        p.add_argument("--bins", type=int, help="similarity histogram bins (default 50)")
        if sampling:
            p.add_argument("--backend", choices=["synthetic", "corpus", "http"])
            p.add_argument("--endpoint", help="http backend base URL")
            p.add_argument("--mixture-config", dest="mixture_config",
                           help="synthetic backend config JSON (discrete or mixture)")
            p.add_argument("--corpus", help="embedding JSONL file for the corpus backend")
            p.add_argument("--prompt", action="append", default=None,
                           help="conditioning prompt (repeatable)")
            p.add_argument("--reference", help="embedding file, file#id, corpus id, "
                                               "or content file (http backend)")
            p.add_argument("--n", type=int, help="samples per estimate/batch (default 40)")
            p.add_argument("--seed", type=int, help="seed base (default 0)")
            p.add_argument("--parallelism", type=int, help="bounded batch parallelism")
            p.add_argument("--no-cache", action="store_true", default=None,
                           help="bypass the embedding cache")

    p_est = sub.add_parser("estimate", help="repeated originality estimates per prompt")
    add_common(p_est)
    p_est.add_argument("--m", type=int, help="repeated estimates per prompt (default 40)")

    p_gen = sub.add_parser("genericize", help="select generic outputs over K batches")
    add_common(p_gen)
    p_gen.add_argument("--k", type=int, help="number of selections K (default 250)")
    p_gen.add_argument("--top-k", type=int, dest="top_k",
                       help="entries in the top-similar report (default 5)")
    p_gen.add_argument("--no-anchor", action="store_true", default=None,
                       help="skip the lowest-originality anchor pass")

    p_rep = sub.add_parser("report", help="recompute reports from a stored manifest")
    add_common(p_rep, sampling=False)
    p_rep.add_argument("--manifest", required=True, help="manifest file to report on")
    p_rep.add_argument("--top-k", type=int, dest="top_k")
    p_rep.add_argument("--no-figures", action="store_true", default=None,
                       help="skip PNG rendering")

    p_val = sub.add_parser("validate", help="run the synthetic scenario suite")
    p_val.add_argument("--list", action="store_true", help="list scenarios and exit")
    p_val.add_argument("--scenario", help="run one scenario by name")
    p_val.add_argument("--negative-control", action="store_true",
                       help="run the corrupted suppression scenario (expected to fail)")
    p_val.add_argument("--out", help="directory for manifests and the JSON report")
    p_val.add_argument("--seed", type=int, help="override scenario seed bases")
    p_val.add_argument("--n", type=int, help="samples per estimate (default 40)")
    p_val.add_argument("--m", type=int, help="estimates per prompt (default 40)")
    p_val.add_argument("--k", type=int, help="genericize selections (default 250)")
    p_val.add_argument("--parallelism", type=int)
    return parser


DEFAULTS = {
    "metric": "cosine-distance",
    "fmt": "csv",
    "bins": 50,
    "n": 40,
    "m": 40,
    "k": 250,
    "seed": 0,
    "parallelism": 1,
    "top_k": 5,
    "no_cache": False,
    "no_anchor": False,
    "no_figures": False,
    "prompt": None,
    "backend": None,
    "endpoint": None,
    "mixture_config": None,
    "corpus": None,
    "reference": None,
    "out": None,
}


def resolve_options(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the optional config file, then flags."""
    opts = dict(DEFAULTS)
    config_path = getattr(args, "config", None)
    if config_path:
        import json
        try:
            doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config file {config_path}: {exc}")
        if not isinstance(doc, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")
        for key, value in doc.items():
            opts[key.replace("-", "_")] = value
    for key, value in vars(args).items():
        if key in ("command", "config"):
            continue
        if value is not None:
            opts[key] = value
    return opts


# -- backend / reference resolution ---------------------------------------------


def _build_backend(opts: dict):
    kind = opts.get("backend")
    if kind == "synthetic":
        if not opts.get("mixture_config"):
            raise UsageError("--backend synthetic requires --mixture-config")
        try:
            config = load_synthetic_config(opts["mixture_config"])
        except (FormatError, InputError, OSError) as exc:
            raise UsageError(f"bad synthetic config: {exc}")
        return build_synthetic_backend(config), {"kind": "synthetic",
                                                 "config_path": opts["mixture_config"]}
    if kind == "corpus":
        if not opts.get("corpus"):
            raise UsageError("--backend corpus requires --corpus")
        try:
            backend = CorpusBackend(opts["corpus"])
        except (FormatError, OSError) as exc:
            raise UsageError(f"bad corpus file: {exc}")
        return backend, {"kind": "corpus", "path": opts["corpus"]}
    if kind == "http":
        if not opts.get("endpoint"):
            raise UsageError("--backend http requires --endpoint")
        backend = HttpBackend(opts["endpoint"],
                              auth_token=os.environ.get(AUTH_TOKEN_ENV),
                              max_inflight=max(1, int(opts["parallelism"])))
        return backend, {"kind": "http", "endpoint": opts["endpoint"]}
    raise UsageError("--backend must be one of synthetic, corpus, http")


def _load_reference_file(path: Path):
    try:
        return load_embedding_file(path)
    except (FormatError, OSError) as exc:
        raise UsageError(f"bad reference file: {exc}")


def _resolve_reference(opts: dict, backend, out_dir: Path) -> Reference | None:
    spec = opts.get("reference")
    if not spec:
        return None
    if "#" in spec:
        path_s, _, rec_id = spec.partition("#")
        path = Path(path_s)
        if not path.exists():
            raise UsageError(f"reference file not found: {path}")
        for e in _load_reference_file(path):
            if e.id == rec_id:
                return Reference(e, label=rec_id)
        raise UsageError(f"id {rec_id!r} not found in {path}")
    path = Path(spec)
    if path.exists() and path.suffix in (".jsonl", ".json"):
        records = _load_reference_file(path)
        if len(records) != 1:
            raise UsageError(
                f"{path} holds {len(records)} records; use {path}#<id> to pick one")
        return Reference(records[0], label=records[0].id)
    if path.exists():
        if not isinstance(backend, HttpBackend):
            raise UsageError(
                f"content reference {path} needs --backend http to embed it")
        if not backend.embedders:
            raise UsageError("backend advertises no embedders")
        embedder = backend.embedders[0]
        content = path.read_bytes()
        cache = EmbeddingCache(out_dir / "cache", enabled=not opts["no_cache"])
        embedding = cache.get_or_compute(
            content, embedder,
            lambda data: backend.embed([(path.name, data)], embedder)[0])
        return Reference(embedding, label=path.stem)
    if isinstance(backend, CorpusBackend):
        return Reference(backend.lookup(spec), label=spec)
    raise UsageError(f"cannot resolve reference {spec!r} (no such file, "
                     f"and the backend is not a corpus)")


def _make_manifest(out_dir: Path, command: str, opts: dict, backend_desc: dict,
                   backend, reference: Reference | None,
                   prompts: list[str]) -> RunManifest:
    snapshot = {
        "command": command,
        "backend": backend_desc | {"id": backend.id,
                                   "dim": backend.embedding_dimension},
        "metric": opts["metric"],
        "n": opts["n"],
        "m": opts.get("m"),
        "K": opts.get("k"),
        "seed_base": opts["seed"],
        "prompts": prompts,
        "bins": opts["bins"],
        "format": opts["fmt"],
        "cache_enabled": not opts["no_cache"],
        "parallelism": opts["parallelism"],
        "std_convention": "population",
        "reference": (None if reference is None else {
            "id": reference.embedding.id,
            "label": reference.label,
            "values": reference.embedding.values,
        }),
    }
    run_id = hashlib.sha256(
        canonical_json(jsonable(snapshot)).encode("ascii")).hexdigest()[:16]
    return RunManifest(out_dir / "run.manifest", run_id, snapshot)


def _out_dir(opts: dict) -> Path:
    out = opts.get("out")
    if not out:
        raise UsageError("--out DIR is required")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _conditioning(prompt: str, backend, seed_base: int) -> Conditioning:
    return Conditioning(prompt=prompt, backend_id=backend.id,
                        seed_base=derive_seed(seed_base, "prompt", prompt))


# -- subcommands -----------------------------------------------------------------


def cmd_estimate(opts: dict) -> int:
    out_dir = _out_dir(opts)
    prompts = opts.get("prompt") or []
    if not prompts:
        raise UsageError("estimate needs at least one --prompt")
    if opts["n"] < 1 or opts["m"] < 1:
        raise UsageError("--n and --m must be >= 1")
    backend, backend_desc = _build_backend(opts)
    reference = _resolve_reference(opts, backend, out_dir)
    if reference is None:
        raise UsageError("estimate needs --reference")
    metric = resolve_metric(opts["metric"])
    rows = []
    with _make_manifest(out_dir, "estimate", opts, backend_desc, backend,
                        reference, prompts) as manifest:
        for prompt in prompts:
            cond = _conditioning(prompt, backend, opts["seed"])
            ref_summary = repeated_estimates(
                reference, cond, opts["n"], opts["m"], metric, backend,
                manifest=manifest, parallelism=opts["parallelism"])
            typ_summary = typicality_summary(
                cond, opts["n"], opts["m"], metric, backend,
                manifest=manifest, parallelism=opts["parallelism"])
            rows.append({
                "prompt": prompt, "reference_label": reference.label,
                "metric": metric.name, "n": opts["n"], "m": opts["m"],
                "ref_mean": ref_summary.mean, "ref_std": ref_summary.std,
                "typ_mean": typ_summary.mean, "typ_std": typ_summary.std,
            })
    write_rows_csv(ESTIMATE_CSV_HEADER,
                   [[r[k] if not isinstance(r[k], float) else repr(r[k])
                     for k in ESTIMATE_CSV_HEADER] for r in rows],
                   out_dir / "estimate_summary.csv")
    print(f"reference: {reference.label}   metric: {metric.name}   "
          f"n={opts['n']} m={opts['m']}")
    print(f"{'prompt':<48} {'ref mean':>10} {'ref std':>10} "
          f"{'typ mean':>10} {'typ std':>10}")
    for r in rows:
        print(f"{r['prompt'][:48]:<48} {r['ref_mean']:>10.5f} {r['ref_std']:>10.5f} "
              f"{r['typ_mean']:>10.5f} {r['typ_std']:>10.5f}")
    print(f"manifest: {out_dir / 'run.manifest'}")
    return 0


def cmd_genericize(opts: dict) -> int:
    out_dir = _out_dir(opts)
    prompts = opts.get("prompt") or []
    if len(prompts) != 1:
        raise UsageError("genericize needs exactly one --prompt")
    if opts["n"] < 2:
        raise UsageError("genericization needs --n >= 2 (the n-1 "
                         "self-exclusion is undefined below that)")
    if opts["k"] < 1:
        raise UsageError("--k must be >= 1")
    backend, backend_desc = _build_backend(opts)
    reference = _resolve_reference(opts, backend, out_dir)
    metric = resolve_metric(opts["metric"])
    prompt = prompts[0]
    with _make_manifest(out_dir, "genericize", opts, backend_desc, backend,
                        reference, prompts) as manifest:
        cond = _conditioning(prompt, backend, opts["seed"])
        selections = genericize_stream(
            cond, opts["k"], opts["n"], metric, backend,
            manifest=manifest, parallelism=opts["parallelism"])
        reports = {}
        if reference is not None:
            slice_ = _reload_slice(out_dir / "run.manifest", prompt)
            reports["reference"] = similarity_report(
                reference, slice_, metric, bins=opts["bins"])
            reports["top"] = top_similar(reference, slice_, opts["top_k"], metric)
            if not opts["no_anchor"]:
                anchor = most_generic_reference(
                    selections, cond, opts["n"], metric, backend, manifest=manifest)
                reports["anchor"] = similarity_report(
                    Reference(anchor.embedding, label=f"generic-anchor:{anchor.sample_id}"),
                    slice_, metric, bins=opts["bins"])
            for key in ("reference", "anchor"):
                if key in reports:
                    manifest.append({
                        "type": "report", "kind": "similarity", "target": key,
                        "prompt": prompt, "bins": opts["bins"],
                        "payload": reports[key].to_dict(),
                    })
            manifest.append({
                "type": "report", "kind": "top_similar", "prompt": prompt,
                "k": opts["top_k"], "payload": reports["top"].to_dict(),
            })
    _write_selections(out_dir, selections, prompt, opts["fmt"])
    if reference is not None:
        write_similarity_csv(reports["reference"], out_dir / "similarity_to_reference.csv")
        write_similarity_json(reports["reference"], out_dir / "similarity_to_reference.json")
        write_top_similar_csv(reports["top"], out_dir / "top_similar.csv")
        write_top_similar_json(reports["top"], out_dir / "top_similar.json")
        if "anchor" in reports:
            write_similarity_csv(reports["anchor"], out_dir / "similarity_to_anchor.csv")
            write_similarity_json(reports["anchor"], out_dir / "similarity_to_anchor.json")
    print(f"{len(selections)} selections over {opts['k']}x{opts['n']} samples "
          f"-> {out_dir}")
    return 0


def _reload_slice(manifest_path: Path, prompt: str):
    return load_manifest(manifest_path).slice(prompt=prompt, phase="genericize")


def _write_selections(out_dir: Path, selections, prompt: str, fmt: str) -> None:
    if fmt == "jsonl":
        with (out_dir / "selections.jsonl").open("w", encoding="ascii") as fh:
            for sel in selections:
                fh.write(canonical_json(jsonable({
                    "prompt": prompt, "batch": sel.batch_index,
                    "selected_index": sel.selected_index,
                    "selected_id": sel.selected_id,
                    "cross_mean_distance": sel.cross_mean_distance,
                })) + "\n")
    else:
        write_rows_csv(
            ["prompt", "batch", "selected_index", "selected_id", "cross_mean_distance"],
            [[prompt, s.batch_index, s.selected_index, s.selected_id,
              repr(s.cross_mean_distance)] for s in selections],
            out_dir / "selections.csv")


def cmd_report(opts: dict, manifest_path: str, *, figures: bool = True) -> int:
    out_dir = _out_dir(opts)
    manifest = load_manifest(manifest_path)
    if not manifest.records:
        print(f"manifest {manifest_path} holds no records", file=sys.stderr)
        return 1
    config = manifest.config
    metric = resolve_metric(opts.get("metric") or config.get("metric", "cosine-distance"))
    bins = opts.get("bins") or config.get("bins", 50)
    wrote = []
    summary_rows = _summary_rows(manifest)
    if summary_rows:
        write_rows_csv(ESTIMATE_CSV_HEADER,
                       [[r[k] if not isinstance(r[k], float) else repr(r[k])
                         for k in ESTIMATE_CSV_HEADER] for r in summary_rows],
                       out_dir / "estimate_summary.csv")
        wrote.append("estimate_summary.csv")
        if figures:
            from .report import render_originality_bars
            render_originality_bars(summary_rows, out_dir / "originality_summary.png",
                                    reference_label=summary_rows[0]["reference_label"])
            wrote.append("originality_summary.png")
    ref_doc = config.get("reference")
    gen_slice = manifest.slice(phase="genericize")
    if ref_doc and gen_slice.samples and gen_slice.selections:
        reference = Reference(
            Embedding(np.asarray(ref_doc["values"], dtype=np.float64),
                      id=ref_doc["id"]),
            label=ref_doc.get("label", ref_doc["id"]))
        rep = similarity_report(reference, gen_slice, metric, bins=bins)
        write_similarity_csv(rep, out_dir / "similarity_to_reference.csv")
        write_similarity_json(rep, out_dir / "similarity_to_reference.json")
        top = top_similar(reference, gen_slice, opts.get("top_k") or 5, metric)
        write_top_similar_csv(top, out_dir / "top_similar.csv")
        write_top_similar_json(top, out_dir / "top_similar.json")
        wrote += ["similarity_to_reference.csv", "similarity_to_reference.json",
                  "top_similar.csv", "top_similar.json"]
        if figures:
            from .report import render_similarity_histogram
            render_similarity_histogram(rep, out_dir / "similarity_to_reference.png")
            wrote.append("similarity_to_reference.png")
        anchor_rec = next(iter(manifest.slice().anchors), None)
        if anchor_rec is not None:
            anchor_emb = _find_sample_values(gen_slice, anchor_rec["sample_id"])
            if anchor_emb is not None:
                anchor_ref = Reference(anchor_emb,
                                       label=f"generic-anchor:{anchor_rec['sample_id']}")
                arep = similarity_report(anchor_ref, gen_slice, metric, bins=bins)
                write_similarity_csv(arep, out_dir / "similarity_to_anchor.csv")
                write_similarity_json(arep, out_dir / "similarity_to_anchor.json")
                wrote += ["similarity_to_anchor.csv", "similarity_to_anchor.json"]
                if figures:
                    from .report import render_similarity_histogram
                    render_similarity_histogram(arep, out_dir / "similarity_to_anchor.png")
                    wrote.append("similarity_to_anchor.png")
    if not wrote:
        print(f"manifest {manifest_path} holds nothing reportable", file=sys.stderr)
        return 1
    print("wrote " + ", ".join(wrote) + f" -> {out_dir}")
    return 0


def _summary_rows(manifest) -> list[dict]:
    config = manifest.config
    rows = []
    estimates = {}
    typicals = {}
    for rec in manifest.slice().summaries:
        if rec.get("phase") == "estimate":
            estimates[rec["prompt"]] = rec
        elif rec.get("phase") == "typicality":
            typicals[rec["prompt"]] = rec
    ref_doc = config.get("reference") or {}
    for prompt in config.get("prompts", sorted(estimates)):
        if prompt in estimates and prompt in typicals:
            est, typ = estimates[prompt], typicals[prompt]
            rows.append({
                "prompt": prompt,
                "reference_label": ref_doc.get("label", "reference"),
                "metric": est["metric"], "n": est["n"], "m": est["m"],
                "ref_mean": est["mean"], "ref_std": est["std"],
                "typ_mean": typ["mean"], "typ_std": typ["std"],
            })
    return rows


def _find_sample_values(slice_, sample_id: str) -> Embedding | None:
    for rec in slice_.samples:
        if rec["id"] == sample_id:
            return Embedding(np.asarray(rec["values"], dtype=np.float64),
                             id=sample_id)
    return None


def cmd_validate(args: argparse.Namespace) -> int:
    if args.list:
        for s in synthlab.all_scenarios():
            print(s.name)
        print(synthlab.negative_control_scenario().name)
        return 0
    if args.negative_control:
        scenarios = [synthlab.negative_control_scenario()]
    else:
        scenarios = synthlab.all_scenarios()
        if args.scenario:
            scenarios = [s for s in scenarios if s.name == args.scenario]
            if not scenarios:
                raise UsageError(f"unknown scenario {args.scenario!r}")
    if args.seed is not None:
        scenarios = [dataclasses.replace(s, seed=args.seed) for s in scenarios]
    n = args.n or 40
    m = args.m or 40
    K = args.k or 250
    parallelism = args.parallelism or 1
    out_dir = Path(args.out) if args.out else None
    reports = []
    for scenario in scenarios:
        report = synthlab.run_paper_protocol(
            scenario, n=n, m=m, K=K, parallelism=parallelism,
            out_dir=None if out_dir is None else out_dir / scenario.name)
        reports.append(report)
        print(report.to_text())
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "validation.json").write_text(
            canonical_json([r.to_dict() for r in reports]) + "\n", encoding="ascii")
    all_passed = all(r.passed for r in reports)
    print(f"{sum(r.passed for r in reports)}/{len(reports)} scenarios passed")
    return 0 if all_passed else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            return cmd_validate(args)
        opts = resolve_options(args)
        if args.command == "estimate":
            return cmd_estimate(opts)
        if args.command == "genericize":
            return cmd_genericize(opts)
        if args.command == "report":
            return cmd_report(opts, args.manifest,
                              figures=not (opts.get("no_figures") or False))
        parser.error(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OrigenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
