"""Batch drivers wiring the library stages to files on disk.

Each function implements one CLI command; ``run_pipeline`` chains
generate -> filter -> mct -> reverse -> features -> evaluate over a work
directory. All randomness flows from the configuration, so identical
inputs produce identical artifacts.
"""

from __future__ import annotations

import json
import logging
import random
from pathlib import Path

import numpy as np

from . import agents, datasets, evaluation, filtering, models, similarity, textfeat
from .agents import (
    DEFAULT_JUDGE_SYSTEM_PROMPT,
    HttpChatClient,
    JudgeOptions,
    LlmClient,
    MockLlmClient,
    RecordingClient,
    ToolExecutor,
    TranscriptLoggingClient,
)
from .config import PipelineConfig
from .embeddings import HashingEmbedder, HttpEmbedder, word_tokens
from .errors import ConfigError, ValidationError
from .fixtures import DemoLlmClient, FixtureToolExecutor
from .trajectory import WITH_ARGS, QuestionRecord, Trajectory

log = logging.getLogger(__name__)


def build_client(cfg: PipelineConfig) -> LlmClient:
    client_cfg = cfg.client
    if client_cfg.type == "mock":
        client: LlmClient = MockLlmClient.from_file(client_cfg.script)
    elif client_cfg.type == "http":
        client = HttpChatClient(
            endpoint=client_cfg.endpoint,
            model=client_cfg.models.get("assistant", "gpt-4o-mini"),
            api_key_env=client_cfg.api_key_env,
            retry_cap=client_cfg.retry_cap,
            concurrency=client_cfg.concurrency,
        )
    else:
        client = DemoLlmClient(seed=client_cfg.demo_seed)
    if client_cfg.record_script:
        client = RecordingClient(client)
    if client_cfg.transcript_log:
        client = TranscriptLoggingClient(client, client_cfg.transcript_log)
    return client


def _unwrap_recorder(client: LlmClient) -> RecordingClient | None:
    while client is not None:
        if isinstance(client, RecordingClient):
            return client
        client = getattr(client, "inner", None)
    return None


def finalize_client(cfg: PipelineConfig, client: LlmClient) -> None:
    recorder = _unwrap_recorder(client)
    if recorder is not None and cfg.client.record_script:
        recorder.save_script(cfg.client.record_script)
        log.info(
            "recorded %d script entries to %s", len(recorder.entries), cfg.client.record_script
        )


def build_executor(cfg: PipelineConfig) -> ToolExecutor:
    return FixtureToolExecutor()


def _http_embedder(cfg: PipelineConfig) -> HttpEmbedder:
    return HttpEmbedder(
        endpoint=cfg.embedding_endpoint,
        model=cfg.embedding_model,
        dim=cfg.embedding_dim,
        api_key_env=cfg.client.api_key_env,
        retry_cap=cfg.client.retry_cap,
        concurrency=cfg.client.concurrency,
    )


def trajectory_embedder(cfg: PipelineConfig) -> HashingEmbedder | HttpEmbedder:
    if cfg.embedding_provider == "http":
        return _http_embedder(cfg)
    return HashingEmbedder(dim=cfg.embedding_dim)


def question_embedder(cfg: PipelineConfig) -> HashingEmbedder | HttpEmbedder:
    if cfg.embedding_provider == "http":
        return _http_embedder(cfg)
    return HashingEmbedder(dim=cfg.embedding_dim, tokenizer=word_tokens)


def run_generate(cfg: PipelineConfig, seed_dataset, out_path, client, executor) -> Path:
    """Investigator stage: n questions per seed pair, against a trajectory
    sampled (by config seed) from the rest of the seed dataset."""
    records = datasets.read_records(seed_dataset)
    if not records:
        raise ValidationError(f"seed dataset {seed_dataset} is empty")
    rng = random.Random(cfg.seed)
    candidates: list[QuestionRecord] = []
    for record in records:
        others = [r for r in records if r.id != record.id] or [record]
        target = others[rng.randrange(len(others))]
        questions = agents.generate_questions(
            record.question,
            record.trajectory,
            target.trajectory,
            client,
            executor,
            n=cfg.questions_per_pair,
            temperature=cfg.temperatures["investigator"],
            retry_cap=cfg.retry_cap,
        )
        for number, question in enumerate(questions, start=1):
            candidates.append(
                QuestionRecord(
                    id=f"{record.id}.q{number}",
                    question=question,
                    trajectory=Trajectory(),
                )
            )
    datasets.write_records(out_path, candidates)
    log.info("generated %d candidate questions", len(candidates))
    return Path(out_path)


def run_filter(cfg: PipelineConfig, candidates, out_path, report_path) -> Path:
    records = datasets.read_records(candidates)
    drop_ids = datasets.read_drop_list(cfg.drop_list) if cfg.drop_list else ()
    kept, report = filtering.filter_pipeline(
        records,
        question_embedder(cfg),
        eps=cfg.eps,
        min_pts=cfg.min_pts,
        per_cluster=cfg.per_cluster,
        target_dim=cfg.target_dim,
        drop_ids=drop_ids,
    )
    datasets.write_records(out_path, kept)
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("id,cluster,distance,decision\n")
        for row in report:
            distance = "" if row.distance is None else str(row.distance)
            fh.write(f"{row.id},{row.cluster},{distance},{row.decision}\n")
    log.info("kept %d of %d questions", len(kept), len(records))
    return Path(out_path)


def run_mct(cfg: PipelineConfig, questions, out_path, client, executor) -> Path:
    """Assistant stage: answer each question ``mct_runs`` times and keep the
    most common trajectory with one sampled response."""
    records = datasets.read_records(questions)
    out = []
    for record in records:
        runs = [
            agents.answer_question(
                record.question,
                client,
                executor,
                step_cap=cfg.step_cap,
                temperature=cfg.temperatures["assistant"],
            )
            for _ in range(cfg.mct_runs)
        ]
        trajectory, response = agents.most_common_trajectory(
            runs, mode=WITH_ARGS, seed=cfg.seed
        )
        out.append(
            QuestionRecord(
                id=record.id,
                question=record.question,
                trajectory=trajectory,
                label=record.label,
                response=response,
            )
        )
    datasets.write_records(out_path, out)
    log.info("resolved most common trajectories for %d questions", len(out))
    return Path(out_path)


def _merge_labels(records: list[QuestionRecord], annotations) -> list[QuestionRecord]:
    labels = datasets.read_labels(annotations)
    merged = []
    for record in records:
        label = labels.get(record.id, record.label)
        merged.append(
            QuestionRecord(
                id=record.id,
                question=record.question,
                trajectory=record.trajectory,
                label=label,
                response=record.response,
            )
        )
    return merged


def run_reverse(
    cfg: PipelineConfig, dataset, out_path, client, executor, annotations=None
) -> Path:
    """Reverse-engineer stage: build one verification case per record."""
    records = datasets.read_records(dataset)
    annotations = annotations or cfg.annotations
    if annotations:
        records = _merge_labels(records, annotations)
    case_records = []
    for record in records:
        case = agents.build_verification_case(
            record,
            client,
            executor,
            n_alternates=cfg.n_alternates,
            min_alternates=cfg.min_alternates,
            step_cap=cfg.step_cap,
            retry_cap=cfg.retry_cap,
            reverse_temperature=cfg.temperatures["reverse_engineer"],
            assistant_temperature=cfg.temperatures["assistant"],
        )
        case_records.append(datasets.CaseRecord(id=record.id, case=case, label=record.label))
    datasets.write_cases(out_path, case_records)
    log.info("assembled %d verification cases", len(case_records))
    return Path(out_path)


def run_features(cfg: PipelineConfig, cases, out_path) -> Path:
    """Export the trajectory half of the feature vectors as a table.

    Question TF-IDF features are refit per cross-validation fold and are
    therefore computed inside ``evaluate``, not exported here.
    """
    case_records = datasets.read_cases(cases)
    X, names = similarity.feature_matrix(
        [r.case for r in case_records],
        mode=cfg.feature_mode,
        aggregation=cfg.aggregation,
        embedder=trajectory_embedder(cfg),
        ged_cap=cfg.ged_cap,
        ao_alignment=cfg.ao_alignment,
    )
    datasets.write_feature_table(
        out_path,
        [r.id for r in case_records],
        [r.label for r in case_records],
        X,
        names,
    )
    log.info("wrote %d feature rows (%d columns)", X.shape[0], X.shape[1])
    return Path(out_path)


def _labelled_cases(cfg: PipelineConfig, cases) -> list[datasets.CaseRecord]:
    case_records = datasets.read_cases(cases)
    if cfg.annotations and any(r.label is None for r in case_records):
        labels = datasets.read_labels(cfg.annotations)
        case_records = [
            datasets.CaseRecord(r.id, r.case, labels.get(r.id, r.label))
            for r in case_records
        ]
    return case_records


def run_train(cfg: PipelineConfig, cases, out_path, algorithm: str | None = None) -> Path:
    """Fit one classifier on the full dataset and persist it as a bundle
    (model + the TF-IDF fitted on all questions + feature settings)."""
    case_records = _labelled_cases(cfg, cases)
    specs = cfg.classifier_specs()
    if algorithm is not None:
        matches = [s for s in specs if s.label == algorithm]
        if not matches:
            raise ConfigError(f"no configured classifier named {algorithm!r}")
        spec = matches[0]
    else:
        spec = specs[0]
    labels = [r.label for r in case_records]
    if any(label is None for label in labels):
        raise ValidationError("training requires labels on every case")
    X_traj, _ = similarity.feature_matrix(
        [r.case for r in case_records],
        mode=cfg.feature_mode,
        aggregation=cfg.aggregation,
        embedder=trajectory_embedder(cfg),
        ged_cap=cfg.ged_cap,
        ao_alignment=cfg.ao_alignment,
    )
    tfidf = textfeat.fit_tfidf([r.case.question for r in case_records])
    question_features = np.vstack(
        [textfeat.transform_tfidf(tfidf, r.case.question) for r in case_records]
    )
    X = np.hstack([X_traj, question_features])
    model = models.train(spec, X, np.array(labels))
    bundle = {
        "model": models.model_to_dict(model),
        "tfidf": {
            "vocabulary": tfidf.vocabulary,
            "idf": tfidf.idf.tolist(),
            "corpus_size": tfidf.corpus_size,
        },
        "features": {
            "mode": cfg.feature_mode,
            "aggregation": cfg.aggregation,
            "ged_cap": cfg.ged_cap,
            "ao_alignment": cfg.ao_alignment,
            "embedding_dim": cfg.embedding_dim,
        },
    }
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(bundle, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("trained %s on %d cases", spec.label, len(case_records))
    return Path(out_path)


def _print_model_table(means: dict[str, dict[str, float]], order: list[str]) -> None:
    print(f"{'model':<22}{'accuracy':>10}{'f1_positive':>13}{'f1_macro':>10}")
    for name in order:
        row = means[name]
        print(
            f"{name:<22}{row['accuracy']:>10.4f}{row['f1_positive']:>13.4f}"
            f"{row['f1_macro']:>10.4f}"
        )


def run_evaluate(
    cfg: PipelineConfig, cases, report_path, summary_path
) -> evaluation.CvReport:
    case_records = _labelled_cases(cfg, cases)
    specs = cfg.classifier_specs()
    protocol = evaluation.CvProtocol(
        folds=cfg.folds,
        seeds=tuple(cfg.cv_seeds),
        mode=cfg.feature_mode,
        aggregation=cfg.aggregation,
        ao_alignment=cfg.ao_alignment,
        ged_cap=cfg.ged_cap,
    )
    report = evaluation.cross_validate(
        case_records, specs, protocol, embedder=trajectory_embedder(cfg)
    )
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    means = report.model_means()
    order = [spec.label for spec in specs]
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write("model,accuracy,f1_positive,f1_macro\n")
        for name in order:
            row = means[name]
            fh.write(
                f"{name},{row['accuracy']},{row['f1_positive']},{row['f1_macro']}\n"
            )
    _print_model_table(means, order)
    return report


def run_ablate(cfg: PipelineConfig, cases, report_path, table_path) -> evaluation.AblationReport:
    case_records = _labelled_cases(cfg, cases)
    report = evaluation.ablate_features(
        case_records,
        cfg.classifier_specs(),
        folds=cfg.ablation_folds,
        seeds=tuple(cfg.cv_seeds),
        embedder=trajectory_embedder(cfg),
        ged_cap=cfg.ged_cap,
        ao_alignment=cfg.ao_alignment,
    )
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    summary = report.summary()
    with open(table_path, "w", encoding="utf-8") as fh:
        fh.write("model,features,accuracy,f1_positive\n")
        for model_name, rows in summary.items():
            for row in rows:
                fh.write(
                    f"{model_name},{'+'.join(row['features'])},"
                    f"{row['accuracy']},{row['f1_positive']}\n"
                )
    for model_name, rows in summary.items():
        shown = ", ".join("+".join(row["features"]) for row in rows[:3]) or "(none)"
        print(f"{model_name}: best subsets across all seeds: {shown}")
    return report


def run_judge(cfg: PipelineConfig, dataset, exemplars_path, out_path, client) -> dict:
    records = datasets.read_records(dataset)
    exemplars_path = exemplars_path or cfg.exemplars
    if not exemplars_path:
        raise ConfigError("judge requires an exemplars file (one correct, one incorrect)")
    exemplars = datasets.read_records(exemplars_path)
    options = JudgeOptions(
        system_prompt_on=cfg.judge_system_prompt_on,
        system_prompt=DEFAULT_JUDGE_SYSTEM_PROMPT,
        label_order=cfg.judge_label_order,
        temperature=cfg.temperatures["judge"],
        retry_cap=cfg.retry_cap,
    )
    predictions = []
    for record in records:
        label, rationale = agents.judge_trajectory(record, client, exemplars, options)
        predictions.append({"id": record.id, "prediction": label, "rationale": rationale})
    with open(out_path, "w", encoding="utf-8") as fh:
        for row in predictions:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    metrics: dict = {"n": len(predictions)}
    if records and all(r.label is not None for r in records):
        gold = [r.label for r in records]
        pred = [row["prediction"] for row in predictions]
        metrics["accuracy"] = evaluation.accuracy(pred, gold)
        metrics["f1_positive"] = evaluation.f1(pred, gold, "positive_class")
        metrics["f1_macro"] = evaluation.f1(pred, gold, "macro")
        print(
            f"judge: accuracy={metrics['accuracy']:.4f} "
            f"f1_positive={metrics['f1_positive']:.4f} "
            f"f1_macro={metrics['f1_macro']:.4f}"
        )
    return metrics


def pipeline_paths(workdir) -> dict[str, Path]:
    workdir = Path(workdir)
    return {
        "candidates": workdir / "candidates.jsonl",
        "filter_report": workdir / "filter_report.csv",
        "filtered": workdir / "filtered.jsonl",
        "dataset": workdir / "dataset.jsonl",
        "cases": workdir / "cases.jsonl",
        "features": workdir / "features.csv",
        "cv_report": workdir / "cv_report.json",
        "cv_summary": workdir / "cv_summary.csv",
    }


def run_pipeline(cfg: PipelineConfig, seed_dataset, workdir, client, executor) -> dict[str, Path]:
    """Chain generate -> filter -> mct -> reverse -> features -> evaluate.

    Evaluation needs labels; they are merged from the configured annotations
    file. Without one the pipeline stops after the feature table (labels are
    a human annotation step) and reports that it did so.
    """
    paths = pipeline_paths(workdir)
    Path(workdir).mkdir(parents=True, exist_ok=True)
    run_generate(cfg, seed_dataset, paths["candidates"], client, executor)
    run_filter(cfg, paths["candidates"], paths["filtered"], paths["filter_report"])
    run_mct(cfg, paths["filtered"], paths["dataset"], client, executor)
    run_reverse(cfg, paths["dataset"], paths["cases"], client, executor)
    run_features(cfg, paths["cases"], paths["features"])
    if cfg.annotations:
        run_evaluate(cfg, paths["cases"], paths["cv_report"], paths["cv_summary"])
    else:
        print("pipeline: no annotations configured; stopping before evaluate")
        paths.pop("cv_report")
        paths.pop("cv_summary")
    return paths
