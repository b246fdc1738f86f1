"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. Expected values come from independent oracles (tests/oracles.py),
hand arithmetic frozen into the assertions, or constructed fixtures whose
stated properties are asserted before use.
"""

import json
import math
import time

import numpy as np
import pytest

from conftest import separable_case_records, traj
from oracles import (
    all_trajectories,
    ged_exhaustive,
    knn_oracle,
    lev_recursive,
    prefix_f1_brute,
)
from trajcheck.cli import main
from trajcheck.evaluation import (
    CvProtocol,
    ablate_feature_matrix,
    ablate_features,
    cohens_kappa,
    cross_validate,
    enumerate_feature_subsets,
    stratified_folds,
)
from trajcheck.models import ModelSpec, predict_batch, train
from trajcheck.similarity import (
    FEATURE_ORDER,
    argument_overlap,
    edit_distance,
    graph_edit_distance,
    lcss,
)
from trajcheck.textfeat import fit_tfidf, transform_tfidf
from trajcheck.trajectory import ToolCall, Trajectory


def _report(criterion: int, message: str) -> None:
    print(f"ACCEPTANCE {criterion} PASS: {message}")


def test_criterion_1_feature_oracles_full_enumeration():
    started = time.perf_counter()
    token_seqs = all_trajectories(("a", "b", "c"), 4)
    trajectories = {seq: Trajectory([ToolCall(t) for t in seq]) for seq in token_seqs}
    assert len(token_seqs) == 1 + 3 + 9 + 27 + 81
    pairs = 0
    for seq_a, traj_a in trajectories.items():
        for seq_b, traj_b in trajectories.items():
            assert edit_distance(traj_a, traj_b) == lev_recursive(seq_a, seq_b)
            assert graph_edit_distance(traj_a, traj_b) == ged_exhaustive(seq_a, seq_b)
            assert lcss(traj_a, traj_b) == prefix_f1_brute(seq_a, seq_b)
            pairs += 1
    elapsed = time.perf_counter() - started
    assert pairs == 121 * 121
    assert elapsed < 10.0, f"enumeration took {elapsed:.1f}s"
    _report(1, f"edit/graph-edit/lcss match exhaustive oracles on {pairs} pairs "
               f"in {elapsed:.1f}s")


def test_criterion_2_edit_distance_metric_axioms():
    rng = np.random.default_rng(1234)

    def random_trajectory():
        length = int(rng.integers(0, 6))
        return Trajectory(
            [ToolCall(f"t{int(rng.integers(0, 4))}", {"k": str(int(rng.integers(0, 3)))})
             for _ in range(length)]
        )

    for _ in range(10_000):
        x, y, z = random_trajectory(), random_trajectory(), random_trajectory()
        d_xy = edit_distance(x, y)
        d_xz = edit_distance(x, z)
        d_yz = edit_distance(y, z)
        assert edit_distance(x, x) == 0
        assert d_xy == edit_distance(y, x)
        assert d_xz <= d_xy + d_yz
    _report(2, "identity/symmetry/triangle hold on 10,000 random trajectory triples")


def test_criterion_3_hand_fixtures():
    ao = argument_overlap(
        traj("get_forecast:city=Boston,units=F"), traj("get_forecast:city=Boston")
    )
    assert ao == pytest.approx(2 / 3, abs=1e-9)

    lcss_value = lcss(traj("t1", "t2", "t3"), traj("t1", "t2", "t4"))
    assert lcss_value == pytest.approx(2 / 3, abs=1e-9)

    model = fit_tfidf(["a b", "a"])
    assert model.idf[model.vocabulary["a"]] == pytest.approx(1.0, abs=1e-9)
    assert model.idf[model.vocabulary["b"]] == pytest.approx(
        math.log(3 / 2) + 1.0, abs=1e-9
    )
    raw = np.array([2 * 1.0, 1 * (math.log(3 / 2) + 1.0)])
    expected = raw / math.sqrt(float(raw @ raw))
    got = transform_tfidf(model, "a a b")
    assert np.allclose(got, expected, atol=1e-9)

    assert cohens_kappa([0, 0, 1, 1], [0, 1, 1, 0]) == pytest.approx(0.0, abs=1e-9)
    assert cohens_kappa([0, 1, 0, 1], [0, 1, 0, 1]) == pytest.approx(1.0, abs=1e-9)
    _report(3, "AO=2/3, LCSS=2/3, TF-IDF and kappa hand fixtures match to 1e-9")


def test_criterion_4_knn_matches_brute_force_oracle():
    rng = np.random.default_rng(99)
    datasets = 0
    for _ in range(1000):
        n = int(rng.integers(2, 51))
        d = int(rng.integers(1, 11))
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, n)
        probes = rng.normal(size=(4, d))
        for k in (1, 4, 5):
            model = train(ModelSpec("knn", {"k": k}), X, y)
            got = predict_batch(model, probes)
            expected = knn_oracle(X, y, probes, k)
            assert np.array_equal(got, expected)
        datasets += 1
    _report(4, f"k-NN (k in 1/4/5) equals the brute-force oracle on {datasets} "
               "random datasets")


def test_criterion_5_stratification_on_30_15_labels():
    labels = [0] * 30 + [1] * 15
    for seed in (1, 2, 3):
        folds = stratified_folds(labels, 10, seed)
        assert len(folds) == 10
        all_indices = sorted(i for fold in folds for i in fold)
        assert all_indices == list(range(45))
        for fold in folds:
            zeros = sum(1 for i in fold if labels[i] == 0)
            ones = sum(1 for i in fold if labels[i] == 1)
            assert zeros == 3
            assert ones in (1, 2)
    _report(5, "every 10-fold split of the 30/15 fixture has 3 zeros and 1-2 ones "
               "per fold across seeds 1-3")


def test_criterion_6_separable_pipeline_sanity():
    records = separable_case_records(n_cases=40, n_positive=20)
    # fixture guard: the stated distance structure actually holds
    for record in records:
        distances = [
            edit_distance(record.case.trajectory, at)
            for at in record.case.alternate_trajectories
        ]
        if record.label == 1:
            assert max(distances) <= 1
        else:
            assert min(distances) >= 3
    protocol = CvProtocol(folds=10, seeds=(1, 2, 3), mode="with_args")
    report = cross_validate(records, ModelSpec("knn", {"k": 4}), protocol)
    mean_accuracy = report.model_means()["knn"]["accuracy"]
    assert mean_accuracy >= 0.90
    _report(6, f"cross-validated k-NN (k=4, with arguments) reaches mean accuracy "
               f"{mean_accuracy:.3f} >= 0.90 on the separable 40-case fixture")


def test_criterion_7_ablation_protocol():
    assert len(enumerate_feature_subsets()) == 63

    # the case-level operation enumerates the same 63 subsets end to end
    small = separable_case_records(n_cases=12, n_positive=6)
    small_report = ablate_features(small, [ModelSpec("gaussian_nb")], folds=3, seeds=(1,))
    assert len(small_report.subsets) == 63

    # one separating column (edit), all other columns pure noise
    rng = np.random.default_rng(0)
    labels = np.array([0, 1] * 20)
    X = rng.normal(size=(40, 6))
    edit_column = FEATURE_ORDER.index("edit")
    X[:, edit_column] = np.where(labels == 1, 0.5, 4.0) + rng.normal(0, 0.05, 40)
    specs = [
        ModelSpec("knn", {"k": 4}),
        ModelSpec("logistic_regression", {"iterations": 200}),
        ModelSpec("gaussian_nb"),
        ModelSpec("decision_tree"),
        ModelSpec("random_forest", {"n_trees": 20}),
    ]
    report = ablate_feature_matrix(X, labels, specs, folds=5, seeds=(1, 2, 3))
    assert len(report.subsets) == 63
    assert report.folds == 5 and report.seeds == (1, 2, 3)
    for spec in specs:
        best = report.best_subsets[spec.label]
        assert best, f"{spec.label}: no subset was best for every seed"
        assert all("edit" in subset for subset in best), spec.label
    _report(7, "63 subsets, 5-fold x 3 seeds; every model's best subsets all "
               "contain the edit-distance feature")


def _write_pipeline_inputs(tmp_path):
    seed_records = [
        {
            "id": "s1",
            "question": "What is the weather in Boston today?",
            "trajectory": [{"tool": "get_current_weather", "args": {"city": "Boston"}}],
            "response": "62F and cloudy in Boston.",
        },
        {
            "id": "s2",
            "question": "How many errors did paymentservice log in the last hour?",
            "trajectory": [
                {
                    "tool": "get_service_metrics",
                    "args": {"service": "paymentservice", "time_range": "last hour"},
                }
            ],
            "response": "paymentservice error rate was 2% over the last hour.",
        },
    ]
    seed_path = tmp_path / "seed.jsonl"
    seed_path.write_text("\n".join(json.dumps(r) for r in seed_records) + "\n")
    config_path = tmp_path / "config.json"
    config_path.write_text(
        json.dumps(
            {
                "seed": 1,
                "client": {"type": "demo"},
                "generation": {"questions_per_pair": 4, "mct_runs": 2, "step_cap": 6},
                "verification": {"n_alternates": 2},
                "filtering": {"eps": 1.2, "min_pts": 2, "per_cluster": 3},
                "evaluation": {"folds": 2, "seeds": [1, 2, 3]},
                "classifiers": [
                    {"algorithm": "knn", "hyperparameters": {"k": 3}},
                    {"algorithm": "decision_tree"},
                    {"algorithm": "random_forest", "hyperparameters": {"n_trees": 30}},
                ],
            }
        )
    )
    return seed_path, config_path


def test_criterion_8_pipeline_determinism_with_mock_client(tmp_path):
    seed_path, config_path = _write_pipeline_inputs(tmp_path)

    # pre-run with the deterministic offline client: records the mock script
    # and exposes the surviving case ids so they can be annotated
    script = tmp_path / "script.json"
    record_dir = tmp_path / "record"
    assert main([
        "--config", str(config_path), "--workdir", str(record_dir),
        "--record-script", str(script), "pipeline", str(seed_path),
    ]) == 0
    case_ids = [
        json.loads(line)["id"]
        for line in (record_dir / "cases.jsonl").read_text().strip().splitlines()
    ]
    annotations = tmp_path / "annotations.jsonl"
    annotations.write_text(
        "\n".join(json.dumps({"id": cid, "label": i % 2}) for i, cid in enumerate(case_ids))
        + "\n"
    )

    started = time.perf_counter()
    workdirs = []
    for run in range(3):
        workdir = tmp_path / f"run{run}"
        code = main([
            "--config", str(config_path), "--workdir", str(workdir),
            "--client-type", "mock", "--mock-script", str(script),
            "--annotations", str(annotations),
            "pipeline", str(seed_path),
        ])
        assert code == 0
        workdirs.append(workdir)
    elapsed = time.perf_counter() - started

    artifacts = sorted(p.name for p in workdirs[0].iterdir())
    assert "cv_report.json" in artifacts  # the chain reached evaluate
    assert "features.csv" in artifacts
    for other in workdirs[1:]:
        assert sorted(p.name for p in other.iterdir()) == artifacts
        for name in artifacts:
            assert (workdirs[0] / name).read_bytes() == (other / name).read_bytes(), name
    assert elapsed < 60.0, f"three pipeline runs took {elapsed:.1f}s"
    _report(8, f"3 scripted-mock pipeline runs produced byte-identical artifacts "
               f"({len(artifacts)} files, evaluate included) in {elapsed:.2f}s")


def test_criterion_9_no_test_fold_leakage():
    records = separable_case_records(n_cases=12, n_positive=6)
    protocol = CvProtocol(folds=3, seeds=(1,))
    spec = ModelSpec("knn", {"k": 1})

    baseline: dict[int, dict] = {}

    def capture_baseline(fit):
        baseline[fit.fold] = {
            "vocabulary": dict(fit.tfidf.vocabulary),
            "idf": fit.tfidf.idf.copy(),
            "train": fit.train_indices.copy(),
            "mean": fit.models["knn"].standardization.mean.copy(),
            "std": fit.models["knn"].standardization.std.copy(),
        }

    cross_validate(records, spec, protocol, fold_observer=capture_baseline)

    mutated_runs: dict[int, dict] = {}
    for fold_id in baseline:
        train_rows = set(baseline[fold_id]["train"].tolist())
        mutated = []
        for i, record in enumerate(records):
            case = record.case
            if i not in train_rows:  # rewrite every held-out question
                case = type(case)(
                    question="mutated heldout text " + case.question,
                    trajectory=case.trajectory,
                    response=case.response,
                    alternate_questions=case.alternate_questions,
                    alternate_trajectories=case.alternate_trajectories,
                )
            mutated.append(type(record)(record.id, case, record.label))

        captured: dict[int, dict] = {}

        def capture(fit):
            captured[fit.fold] = {
                "vocabulary": dict(fit.tfidf.vocabulary),
                "idf": fit.tfidf.idf.copy(),
                "mean": fit.models["knn"].standardization.mean.copy(),
                "std": fit.models["knn"].standardization.std.copy(),
            }

        cross_validate(mutated, spec, protocol, fold_observer=capture)
        mutated_runs[fold_id] = captured[fold_id]

    for fold_id, expected in baseline.items():
        got = mutated_runs[fold_id]
        assert got["vocabulary"] == expected["vocabulary"]
        assert np.array_equal(got["idf"], expected["idf"])
        assert np.array_equal(got["mean"], expected["mean"])
        assert np.array_equal(got["std"], expected["std"])
    _report(9, "mutating held-out questions left every fitted TF-IDF and "
               "standardization parameter bit-identical")
