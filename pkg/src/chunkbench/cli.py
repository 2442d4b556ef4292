"""Command-line entry point: ``chunkbench run | chunk | evaluate | report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import yaml

from .bench import RunConfig, run_phase1, run_phase2
from .chunkers import Services, build_registry, chunk_document, registry_map
from .chunkers.llm import MockBoundaryChat
from .corpus import load_documents
from .embedding import HttpEmbedder, MockEmbedder
from .errors import ChunkbenchError
from .llm import HttpChatProvider
from .report import write_report

logger = logging.getLogger("chunkbench")

# Flags that a config file may set for ``run``, mapped to RunConfig fields.
RUN_KEYS = {
    "docs": "docs",
    "queries": "queries",
    "out": "out",
    "strategies": "strategies",
    "embedder": "embedder",
    "embed_model": "embed_models",
    "judge": "judge",
    "judge_model": "judge_model",
    "llm": "llm",
    "k": "k",
    "workers": "workers",
    "ultradomain_adapter": "ultradomain_adapter",
    "registry": "registry",
    "abbreviations": "abbreviations",
    "cache_dir": "cache_dir",
    "deterministic": "deterministic",
    "ci": "ci",
    "seed": "seed",
}


def _split_list(value: Any) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [str(v) for v in value]


def load_config_file(path: str | Path) -> dict[str, Any]:
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    data = data or {}
    if not isinstance(data, dict):
        raise ChunkbenchError(f"{path}: config must be a mapping")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - set(RUN_KEYS)
    if unknown:
        raise ChunkbenchError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """Merge the optional config file with command-line flags; flags win."""
    merged: dict[str, Any] = load_config_file(args.config) if args.config else {}
    for key in RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            merged[key] = value
    missing = [k for k in ("docs", "queries", "out") if not merged.get(k)]
    if missing:
        raise ChunkbenchError(f"missing required settings: {', '.join('--' + m for m in missing)}")
    fields = {RUN_KEYS[k]: v for k, v in merged.items()}
    fields["strategies"] = _split_list(fields.get("strategies"))
    fields["embed_models"] = _split_list(fields.get("embed_models"))
    return RunConfig(**fields)


def _finish_report(run_dir: Path, formats: Sequence[str], deterministic: bool | None = None) -> list[Path]:
    manifest = json.loads((run_dir / "run.json").read_text(encoding="utf-8"))
    if deterministic is None:
        deterministic = bool(manifest["config"].get("deterministic"))
    phase1 = run_dir / "phase1.json"
    failed = json.loads(phase1.read_text(encoding="utf-8")).get("failed", []) if phase1.exists() else []
    records = run_phase2(run_dir)
    return write_report(records, run_dir, formats, deterministic=deterministic, manifest=manifest, failed=failed)


def cmd_run(args: argparse.Namespace) -> int:
    config = run_config_from_args(args)

    def progress(key, status):
        logger.info("%-7s %s / %s / %s", status, key.model_id, key.domain, key.strategy_id)

    summary = run_phase1(config, progress=progress)
    paths = _finish_report(config.out, ("csv", "json", "svg"), config.deterministic)
    print(
        f"{summary['completed']} cells run, {summary['skipped']} reused, {len(summary['failed'])} failed; "
        f"results in {config.out / 'results.csv'}"
    )
    for failure in summary["failed"]:
        print(f"  failed: {failure['model']} / {failure['domain']} / {failure['strategy']}: {failure['error']}")
    logger.debug("wrote %s", [str(p) for p in paths])
    return 1 if summary["failed"] and not summary["completed"] + summary["skipped"] else 0


def cmd_chunk(args: argparse.Namespace) -> int:
    registry = build_registry(args.registry)
    by_name = registry_map(registry)
    if args.strategy not in by_name:
        raise ChunkbenchError(f"unknown strategy {args.strategy!r}")
    embedder = MockEmbedder() if args.embedder == "mock" else HttpEmbedder(args.embed_model)
    llm = MockBoundaryChat() if args.llm == "mock" else HttpChatProvider(env_prefix="LLM")
    services = Services(embedder=embedder, llm=llm)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for doc in load_documents(args.docs, ultradomain_adapter=args.ultradomain_adapter):
            for chunk in chunk_document(by_name[args.strategy], doc, services, by_name):
                out.write(json.dumps(chunk.to_json(), ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    paths = _finish_report(Path(args.run), ("csv", "json"))
    print("\n".join(str(p) for p in paths))
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    paths = _finish_report(Path(args.run), _split_list(args.format))
    print("\n".join(str(p) for p in paths))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chunkbench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="chunk, index, retrieve, judge and report a full grid")
    run.add_argument("--config", help="YAML or JSON file with the same keys as the flags")
    run.add_argument("--docs")
    run.add_argument("--queries")
    run.add_argument("--out")
    run.add_argument("--strategies", help="comma-separated strategy names (default: all 36)")
    run.add_argument("--embedder", choices=("mock", "http"))
    run.add_argument("--embed-model", dest="embed_model", help="comma-separated embedding model names")
    run.add_argument("--judge", choices=("mock", "http"))
    run.add_argument("--judge-model", dest="judge_model")
    run.add_argument("--llm", choices=("mock", "http"), help="provider for the LLM-driven chunkers")
    run.add_argument("--k", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--ultradomain-adapter", dest="ultradomain_adapter", action="store_true")
    run.add_argument("--registry", help="YAML or JSON strategy parameter overrides")
    run.add_argument("--abbreviations", help="file of extra abbreviations, one per line")
    run.add_argument("--cache-dir", dest="cache_dir")
    run.add_argument("--ci", choices=("normal", "bootstrap"))
    run.add_argument("--seed", type=int)
    run.add_argument(
        "--deterministic",
        action="store_true",
        help="blank timing and memory columns so results.csv is byte-identical across runs",
    )
    run.set_defaults(func=cmd_run)

    chunk = sub.add_parser("chunk", help="dump one strategy's chunks as JSON-lines")
    chunk.add_argument("--strategy", required=True)
    chunk.add_argument("--docs", required=True)
    chunk.add_argument("--out")
    chunk.add_argument("--registry")
    chunk.add_argument("--embedder", choices=("mock", "http"), default="mock")
    chunk.add_argument("--embed-model", dest="embed_model")
    chunk.add_argument("--llm", choices=("mock", "http"), default="mock")
    chunk.add_argument("--ultradomain-adapter", dest="ultradomain_adapter", action="store_true")
    chunk.set_defaults(func=cmd_chunk)

    evaluate = sub.add_parser("evaluate", help="recompute pooled metrics for an existing run")
    evaluate.add_argument("--run", required=True)
    evaluate.set_defaults(func=cmd_evaluate)

    report = sub.add_parser("report", help="write report files for an existing run")
    report.add_argument("--run", required=True)
    report.add_argument("--format", default="csv,json,svg", help="comma-separated subset of csv, json, svg")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ChunkbenchError, ValueError, OSError) as exc:
        print(f"chunkbench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
