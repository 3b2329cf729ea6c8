"""Subcommand front-end wiring the pipeline stages together.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation. Every run writes a manifest with the resolved config, input
digests and stage timings; artifact paths are printed to stdout.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import sys
import time
from pathlib import Path

from . import assoc as assoc_mod
from . import cluster as cluster_mod
from . import evalkit, ingest, report as report_mod, seqmine, synth as synth_mod, topics
from .config import RunConfig, load_config
from .errors import BundleMinerError, DataError, UsageError

PRODUCERS = {
    "sequences.json": "ingest",
    "diagnoses_mapped.csv": "ingest",
    "workflow_matrix.csv": "mine",
    "workflow_vocab.csv": "mine",
    "phenotype_matrix.csv": "mine",
    "phenotype_vocab.csv": "mine",
    "workflow_model.json": "fit-topics or select-k",
    "phenotype_model.json": "fit-topics or select-k",
    "workflow_sweep.json": "select-k",
    "phenotype_sweep.json": "select-k",
    "association.csv": "associate",
    "clusters.json": "cluster",
}


def _artifact(out_dir: Path, name: str) -> Path:
    path = out_dir / name
    if not path.exists():
        producer = PRODUCERS.get(name, "an earlier stage")
        raise DataError(f"missing artifact {path}; run `bundleminer {producer}` first")
    return path


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class _Run:
    """Collects stage timings and input digests for the manifest."""

    def __init__(self, command: str, config: RunConfig, out_dir: Path):
        self.command = command
        self.config = config
        self.out_dir = out_dir
        self.inputs: dict[str, str] = {}
        self.stages: list[dict] = []
        self.artifacts: list[Path] = []

    def record_input(self, path: Path) -> None:
        self.inputs[str(path)] = _sha256(path)

    def stage(self, name: str):
        run = self

        class _Timer:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                if exc[0] is None:
                    run.stages.append(
                        {"name": name, "seconds": time.perf_counter() - self.start}
                    )

        return _Timer()

    def emit(self, path: Path) -> None:
        self.artifacts.append(path)

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "config": self.config.to_dict(),
            "inputs": self.inputs,
            "stages": self.stages,
        }
        manifest_path = self.out_dir / "manifest.json"
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
        for path in self.artifacts:
            print(path)


def _load_sequences(path: Path) -> list[ingest.PatientSequence]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return [ingest.PatientSequence(pid, tuple(labels)) for pid, labels in doc.items()]


def _load_mapped_diagnoses(path: Path) -> list[ingest.DiagnosisRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            records.append(
                ingest.DiagnosisRecord(row["patient_id"], row["code"], int(row["count"]))
            )
    return records


def _resolve_min_support(config: RunConfig, n_patients: int) -> int:
    if config.min_support is not None:
        return config.min_support
    from .config import DEFAULT_SUPPORT_FRACTION

    return max(1, math.ceil(DEFAULT_SUPPORT_FRACTION * n_patients))


# ---------------------------------------------------------------- stages


def stage_ingest(run: _Run) -> None:
    config = run.config
    if not config.events or not config.diagnoses:
        raise UsageError("ingest requires --events and --diagnoses")
    events_path, diagnoses_path = Path(config.events), Path(config.diagnoses)
    for p in (events_path, diagnoses_path):
        if not p.exists():
            raise DataError(f"input file not found: {p}")
        run.record_input(p)
    with run.stage("ingest"):
        events = ingest.parse_event_log(events_path)
        sequences = ingest.build_sequences(events)
        records = ingest.parse_diagnosis_records(diagnoses_path)
        if config.codemap:
            codemap_path = Path(config.codemap)
            if not codemap_path.exists():
                raise DataError(f"input file not found: {codemap_path}")
            run.record_input(codemap_path)
            code_map = ingest.load_code_map(codemap_path)
            records, unmapped = ingest.map_codes(records, code_map, config.unmapped_policy)
            if unmapped:
                print(f"warning: {unmapped} records had unmapped codes", file=sys.stderr)
        seq_path = run.out_dir / "sequences.json"
        with open(seq_path, "w", encoding="utf-8") as fh:
            json.dump({s.patient_id: list(s.labels) for s in sequences}, fh)
            fh.write("\n")
        diag_path = run.out_dir / "diagnoses_mapped.csv"
        with open(diag_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["patient_id", "code", "count"])
            for r in records:
                writer.writerow([r.patient_id, r.code, r.count])
    run.emit(seq_path)
    run.emit(diag_path)


def stage_mine(run: _Run) -> None:
    config = run.config
    sequences = _load_sequences(_artifact(run.out_dir, "sequences.json"))
    records = _load_mapped_diagnoses(_artifact(run.out_dir, "diagnoses_mapped.csv"))
    with run.stage("mine"):
        min_support = _resolve_min_support(config, len(sequences))
        vocab = seqmine.mine_frequent_subsequences(
            sequences, min_support, config.max_len, config.collapse_repeats
        )
        if not vocab:
            raise DataError(
                f"no subsequence reached min_support={min_support}; lower it"
            )
        workflow_matrix = seqmine.count_occurrences(
            sequences, vocab, config.collapse_repeats
        )
        workflow_matrix.save(
            run.out_dir / "workflow_matrix.csv", run.out_dir / "workflow_vocab.csv"
        )
        phenotype_matrix = seqmine.bag_to_matrix(records)
        phenotype_matrix.save(
            run.out_dir / "phenotype_matrix.csv", run.out_dir / "phenotype_vocab.csv"
        )
    for name in (
        "workflow_matrix.csv",
        "workflow_vocab.csv",
        "phenotype_matrix.csv",
        "phenotype_vocab.csv",
    ):
        run.emit(run.out_dir / name)


def _side_params(config: RunConfig, side: str) -> tuple[int, int]:
    if side == "workflow":
        return config.k_min, config.k_max
    return config.q_min, config.q_max


def _fit_side(run: _Run, side: str, sweep: bool) -> None:
    config = run.config
    matrix = seqmine.DocTermMatrix.load(
        _artifact(run.out_dir, f"{side}_matrix.csv"),
        _artifact(run.out_dir, f"{side}_vocab.csv"),
    )
    k_min, k_max = _side_params(config, side)
    if not sweep and k_min != k_max:
        raise UsageError(
            "fit-topics needs a fixed topic count; set the range to a single "
            "value or use select-k"
        )
    with run.stage(f"fit-{side}"):
        if k_min == k_max:
            chosen_k = k_max
            candidates: list = []
        else:
            result = topics.select_topic_count(
                matrix,
                k_min,
                k_max,
                config.alpha,
                config.beta,
                config.iterations,
                config.topics_seed,
            )
            chosen_k = result.chosen_k
            candidates = result.candidates
        model = topics.fit_lda(
            matrix,
            chosen_k,
            config.alpha,
            config.beta,
            config.iterations,
            topics.sweep_seed(config.topics_seed, chosen_k),
        )
        topics.save_model(model, run.out_dir / f"{side}_model.json")
        sweep_doc = {"candidates": candidates, "chosen_k": chosen_k}
        with open(run.out_dir / f"{side}_sweep.json", "w", encoding="utf-8") as fh:
            json.dump(sweep_doc, fh, sort_keys=True)
            fh.write("\n")
    run.emit(run.out_dir / f"{side}_model.json")
    run.emit(run.out_dir / f"{side}_sweep.json")


def stage_fit_topics(run: _Run, sweep: bool) -> None:
    _fit_side(run, "workflow", sweep)
    _fit_side(run, "phenotype", sweep)


def stage_associate(run: _Run) -> None:
    workflow = topics.load_model(_artifact(run.out_dir, "workflow_model.json"))
    phenotype = topics.load_model(_artifact(run.out_dir, "phenotype_model.json"))
    with run.stage("associate"):
        common = sorted(set(workflow.doc_ids) & set(phenotype.doc_ids))
        if not common:
            raise DataError("no patients shared between workflow and phenotype models")
        w_index = {pid: i for i, pid in enumerate(workflow.doc_ids)}
        p_index = {pid: i for i, pid in enumerate(phenotype.doc_ids)}
        w_rows = [w_index[pid] for pid in common]
        p_rows = [p_index[pid] for pid in common]
        matrix = assoc_mod.association(
            workflow.theta[w_rows].T,
            phenotype.theta[p_rows].T,
        )
        matrix.save(run.out_dir / "association.csv")
    run.emit(run.out_dir / "association.csv")


def stage_cluster(run: _Run) -> None:
    matrix = assoc_mod.AssociationMatrix.load(_artifact(run.out_dir, "association.csv"))
    config = run.config
    with run.stage("cluster"):
        graph = assoc_mod.build_topic_graph(matrix, config.weight_threshold)
        partition = cluster_mod.louvain(graph, config.louvain_seed)
        clusters = cluster_mod.extract_phenotype_clusters(partition, graph)
        clusters.save(run.out_dir / "clusters.json")
    run.emit(run.out_dir / "clusters.json")


def stage_report(run: _Run) -> None:
    config = run.config
    workflow = topics.load_model(_artifact(run.out_dir, "workflow_model.json"))
    phenotype = topics.load_model(_artifact(run.out_dir, "phenotype_model.json"))
    with open(_artifact(run.out_dir, "workflow_sweep.json"), encoding="utf-8") as fh:
        workflow_sweep = json.load(fh)
    with open(_artifact(run.out_dir, "phenotype_sweep.json"), encoding="utf-8") as fh:
        phenotype_sweep = json.load(fh)
    with open(_artifact(run.out_dir, "clusters.json"), encoding="utf-8") as fh:
        clusters = cluster_mod.ClusterReport.from_dict(json.load(fh))
    code_map = None
    if config.codemap and Path(config.codemap).exists():
        code_map = ingest.load_code_map(Path(config.codemap))

    with run.stage("report"):
        workflow_tables = {
            f"w{t}": report_mod.topic_table(workflow, t) for t in range(workflow.k)
        }
        phenotype_tables = {
            f"p{t}": report_mod.topic_table(phenotype, t, code_map=code_map)
            for t in range(phenotype.k)
        }
        dot_dir = run.out_dir / "dot"
        dot_dir.mkdir(exist_ok=True)
        for t in range(workflow.k):
            dot_path = dot_dir / f"workflow_topic_{t:02d}.dot"
            dot_path.write_text(
                report_mod.export_workflow_dot(workflow, t), encoding="utf-8"
            )
        doc, summary = report_mod.emit_pipeline_report(
            {
                "config": config.to_dict(),
                "workflow_sweep": workflow_sweep,
                "phenotype_sweep": phenotype_sweep,
                "workflow_topic_tables": workflow_tables,
                "phenotype_topic_tables": phenotype_tables,
                "association_matrix_path": str(run.out_dir / "association.csv"),
                "cluster_report": clusters,
            }
        )
        report_path = run.out_dir / "report.json"
        report_path.write_text(report_mod.dump_report_json(doc), encoding="utf-8")
        summary_path = run.out_dir / "summary.txt"
        summary_path.write_text(summary, encoding="utf-8")
        sys.stdout.write(summary)
    run.emit(report_path)
    run.emit(summary_path)
    run.emit(dot_dir)


def stage_synth(run: _Run, args) -> None:
    spec = synth_mod.PlantedSpec(
        n_bundles=args.bundles,
        workflow_topics_per_bundle=args.workflow_topics,
        phenotype_topics_per_bundle=args.phenotype_topics,
        patients_per_bundle=args.patients,
        action_vocab_size=args.action_vocab,
        code_vocab_size=args.code_vocab,
        tokens_per_patient_seq=args.tokens,
        codes_per_patient=args.codes,
        noise_rate=args.noise,
        seed=args.seed,
    )
    with run.stage("synth"):
        events_csv, diagnoses_csv, truth = synth_mod.generate_corpus(spec)
        events_path = run.out_dir / "events.csv"
        events_path.write_text(events_csv, encoding="utf-8")
        diagnoses_path = run.out_dir / "diagnoses.csv"
        diagnoses_path.write_text(diagnoses_csv, encoding="utf-8")
        truth_path = run.out_dir / "truth.json"
        truth.save(truth_path)
    run.emit(events_path)
    run.emit(diagnoses_path)
    run.emit(truth_path)


def stage_eval_survey(run: _Run, responses_path: str) -> None:
    path = Path(responses_path)
    if not path.exists():
        raise DataError(f"responses file not found: {path}")
    run.record_input(path)
    with run.stage("eval-survey"):
        responses = evalkit.load_responses(path)
        results = evalkit.anova_paired_arms(responses)
        out_path = run.out_dir / "anova.csv"
        evalkit.write_anova_csv(results, out_path)
    run.emit(out_path)


# ------------------------------------------------------------------ CLI


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="bundleminer")
    parser.add_argument("--config", help="flat key = value config file")
    sub = parser.add_subparsers(dest="command")

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("--out-dir", dest="out_dir")
        p.add_argument("--events")
        p.add_argument("--diagnoses")
        p.add_argument("--codemap")
        p.add_argument("--min-support", dest="min_support", type=int)
        p.add_argument("--max-len", dest="max_len", type=int)
        p.add_argument("--k-min", dest="k_min", type=int)
        p.add_argument("--k-max", dest="k_max", type=int)
        p.add_argument("--q-min", dest="q_min", type=int)
        p.add_argument("--q-max", dest="q_max", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--iterations", type=int)
        p.add_argument("--weight-threshold", dest="weight_threshold", type=float)
        p.add_argument("--topics-seed", dest="topics_seed", type=int)
        p.add_argument("--louvain-seed", dest="louvain_seed", type=int)
        p.add_argument("--unmapped-policy", dest="unmapped_policy")
        return p

    add("ingest")
    add("mine")
    add("fit-topics")
    add("select-k")
    add("associate")
    add("cluster")
    add("report")
    add("pipeline")
    synth_p = add("synth")
    synth_p.add_argument("--bundles", type=int, default=3)
    synth_p.add_argument("--workflow-topics", type=int, default=2)
    synth_p.add_argument("--phenotype-topics", type=int, default=2)
    synth_p.add_argument("--patients", type=int, default=200)
    synth_p.add_argument("--action-vocab", type=int, default=48)
    synth_p.add_argument("--code-vocab", type=int, default=60)
    synth_p.add_argument("--tokens", type=int, default=40)
    synth_p.add_argument("--codes", type=int, default=30)
    synth_p.add_argument("--noise", type=float, default=0.05)
    synth_p.add_argument("--seed", type=int, default=2016)
    eval_p = add("eval-survey")
    eval_p.add_argument("--responses", required=True)
    return parser


_CONFIG_KEYS = [f.name for f in dataclasses.fields(RunConfig)]


def _run_command(args) -> None:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    config = load_config(args.config, overrides)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = _Run(args.command, config, out_dir)

    if args.command == "ingest":
        stage_ingest(run)
    elif args.command == "mine":
        stage_mine(run)
    elif args.command == "fit-topics":
        stage_fit_topics(run, sweep=False)
    elif args.command == "select-k":
        stage_fit_topics(run, sweep=True)
    elif args.command == "associate":
        stage_associate(run)
    elif args.command == "cluster":
        stage_cluster(run)
    elif args.command == "report":
        stage_report(run)
    elif args.command == "synth":
        stage_synth(run, args)
    elif args.command == "eval-survey":
        stage_eval_survey(run, args.responses)
    elif args.command == "pipeline":
        stage_ingest(run)
        stage_mine(run)
        stage_fit_topics(run, sweep=True)
        stage_associate(run)
        stage_cluster(run)
        stage_report(run)
    run.finish()


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        _run_command(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except BundleMinerError as exc:
        print(f"bundleminer: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
