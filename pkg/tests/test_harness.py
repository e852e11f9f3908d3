"""Tests of the experiment pipeline commands and the CLI surface."""

import csv
import json
import os

import numpy as np
import pytest

from wignet.cli import main
from wignet.harness import (
    ComparisonConfig,
    CorpusConfig,
    ExperimentConfig,
    MalformedRowError,
    RobustnessConfig,
    RobustnessReport,
    cmd_compare,
    cmd_curves,
    cmd_evaluate,
    cmd_generate,
    cmd_ingest,
    cmd_robustness,
    cmd_train,
    experimental_corpus_config,
    make_experimental_analog,
)
from wignet.mlp import TrainConfig, load_model
from wignet.sampling import QuadratureBatch
from wignet.wigner import wigner_min

MINI_CORPUS = CorpusConfig(mode_count=2, n_states=40, reps=30)
MINI_TRAIN = TrainConfig(seed=0, max_epochs=15, patience=15)


@pytest.fixture(scope="module")
def mini_dataset():
    dataset, manifest = cmd_generate(MINI_CORPUS, master_seed=77, workers=1)
    return dataset, manifest


@pytest.fixture(scope="module")
def mini_files(tmp_path_factory, mini_dataset):
    """Dataset, model, and history files of the mini experiment."""
    root = tmp_path_factory.mktemp("mini")
    dataset_path = root / "dataset.csv"
    from wignet.features import save_dataset

    save_dataset(mini_dataset[0], dataset_path)
    model_path = root / "model.json"
    history_path = root / "history.csv"
    cmd_train(dataset_path, MINI_TRAIN, model_path, history_path)
    return {"root": root, "dataset": dataset_path, "model": model_path, "history": history_path}


class TestCmdGenerate:
    def test_corpus_contents(self, mini_dataset):
        dataset, manifest = mini_dataset
        assert dataset.mode_count == 2
        assert manifest["n_generated"] == 40
        assert len(dataset) == manifest["n_kept"]
        assert manifest["n_kept"] + manifest["n_band_filtered"] == 40
        assert manifest["n_negative"] + manifest["n_positive"] == manifest["n_kept"]
        assert sum(manifest["operations"].values()) == 40
        for example in dataset.examples:
            assert example.features.shape == (30,)
            assert example.label == (1 if example.w_min < dataset.cutoff else 0)

    def test_split_assigned(self, mini_dataset):
        dataset, _ = mini_dataset
        names = set(dataset.split)
        assert names == {"train", "val"}

    def test_band_filter_applied(self, mini_dataset):
        dataset, _ = mini_dataset
        for example in dataset.examples:
            assert not (dataset.cutoff <= example.w_min < 0.0)

    def test_deterministic_across_worker_counts(self, tmp_path):
        config = CorpusConfig(mode_count=2, n_states=12, reps=10)
        serial = tmp_path / "serial.csv"
        parallel = tmp_path / "parallel.csv"
        cmd_generate(config, master_seed=5, out_path=serial, workers=1)
        cmd_generate(config, master_seed=5, out_path=parallel, workers=2)
        assert serial.read_bytes() == parallel.read_bytes()

    def test_manifest_written(self, tmp_path):
        config = CorpusConfig(mode_count=1, n_states=12, reps=10)
        out = tmp_path / "data.csv"
        cmd_generate(config, master_seed=1, out_path=out, workers=1)
        manifest = json.loads((tmp_path / "data.csv.manifest.json").read_text())
        assert manifest["master_seed"] == 1
        assert manifest["config"]["mode_count"] == 1


class TestTrainEvaluateCurves:
    def test_model_and_history_files(self, mini_files):
        model = load_model(mini_files["model"])
        assert model.layer_sizes == [30, 30, 20, 10, 1]
        record = json.loads(mini_files["model"].read_text())
        assert record["activations"] == ["relu", "relu", "relu", "sigmoid"]
        assert record["dataset_header"]["mode_count"] == 2
        lines = mini_files["history"].read_text().splitlines()
        assert lines[0] == "epoch,train_loss,val_loss,train_acc,val_acc"
        assert len(lines) >= 2

    def test_evaluate_returns_metrics(self, mini_files):
        metrics = cmd_evaluate(mini_files["model"], mini_files["dataset"])
        assert 0.0 <= metrics["accuracy"] <= 1.0
        assert metrics["split"] == "val"

    def test_retrain_is_bitwise_deterministic(self, mini_files, tmp_path):
        model_path = tmp_path / "model.json"
        cmd_train(mini_files["dataset"], MINI_TRAIN, model_path, tmp_path / "history.csv")
        assert model_path.read_bytes() == mini_files["model"].read_bytes()

    def test_curves_files(self, mini_files, tmp_path):
        roc_path = tmp_path / "roc.csv"
        pr_path = tmp_path / "pr.csv"
        roc, pr = cmd_curves(mini_files["model"], mini_files["dataset"], roc_path, pr_path)
        assert roc.thresholds.size == 101
        with open(roc_path) as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["threshold", "false_positive_rate", "true_positive_rate"]
        assert len(rows) == 102
        restored = np.array([float(r[2]) for r in rows[1:]])
        assert np.array_equal(restored, roc.true_positive_rate)


class TestCmdCompare:
    def test_mini_comparison(self, mini_files):
        comparison = ComparisonConfig(
            measurement_counts=(30, 10), batches=2, states_per_batch=4, photon_cutoff=3, iterations=5
        )
        model = load_model(mini_files["model"])
        result = cmd_compare(MINI_CORPUS, comparison, model, master_seed=13, workers=2)
        assert len(result.rows) == 2 * 2 * 2  # methods x ks x batches
        for row in result.rows:
            assert row["method"] in ("nn", "maxlik")
            assert row["k"] in (30, 10)
            assert 0.0 <= row["fraction_correct"] <= 1.0
        assert result.loglik_min_step >= -1e-9

    def test_csv_round_trip(self, mini_files, tmp_path):
        comparison = ComparisonConfig(
            measurement_counts=(10,), batches=1, states_per_batch=3, photon_cutoff=3, iterations=4
        )
        model = load_model(mini_files["model"])
        out = tmp_path / "cmp.csv"
        result = cmd_compare(MINI_CORPUS, comparison, model, master_seed=3, workers=1, out_path=out)
        with open(out) as handle:
            rows = list(csv.DictReader(handle))
        assert len(rows) == len(result.rows)
        for parsed, original in zip(rows, result.rows):
            assert parsed["method"] == original["method"]
            assert float(parsed["fraction_correct"]) == original["fraction_correct"]


class TestExperimentalAnalog:
    def test_analytic_minimum_in_reported_vicinity(self):
        rng = np.random.default_rng(0)
        form, batch = make_experimental_analog(rng, reps=20)
        scaled = (2 * np.pi) ** 2 * wigner_min(form)
        assert scaled < 0.0
        assert abs(scaled - (-0.03)) < 0.05
        assert len(batch) == 20 * 3 * 2

    def test_corpus_config_matches_experimental_parameters(self):
        config = experimental_corpus_config()
        assert config.cutoff == 0.0
        assert config.squeezing_max_db == 3.0
        assert config.family == "epr_subtracted"
        # uncertain parameters randomized around the calibrated values
        assert config.thermal_range[1] == 1.11
        assert config.loss_range[0] <= 0.12 <= config.loss_range[1]
        assert not config.band_filter

    def test_epr_family_requires_two_modes(self):
        with pytest.raises(ValueError, match="two-mode"):
            CorpusConfig(mode_count=3, family="epr_subtracted")


class TestCmdRobustness:
    def test_mini_robustness_report(self):
        rng = np.random.default_rng(8)
        _, base = make_experimental_analog(rng, reps=40)
        robust = RobustnessConfig(
            loss_grid=(0.0, 0.5),
            replicas=3,
            trainings=2,
            replica_reps=25,
            photon_cutoff=3,
            iterations=4,
        )
        corpus = experimental_corpus_config(n_states=30, reps=25)
        report = cmd_robustness(
            robust,
            base,
            master_seed=4,
            workers=2,
            corpus=corpus,
            train_config=TrainConfig(seed=0, max_epochs=6, patience=6),
        )
        assert report.fraction_negative.shape == (2, 2)
        assert np.all(report.fraction_negative + report.fraction_positive == 1.0)
        for negative_pct, positive_pct in zip(report.consensus_negative_pct(), report.consensus_positive_pct()):
            assert negative_pct + positive_pct <= 100.0
        assert len(report.maxlik_wmin_mean) == 2
        assert report.loglik_min_step >= -1e-9

    def test_report_json_round_trip(self, tmp_path):
        report = RobustnessReport(
            loss_levels=[0.0, 0.1],
            consensus=0.95,
            fraction_negative=np.array([[1.0, 0.9], [0.2, 0.1]]),
            fraction_positive=np.array([[0.0, 0.1], [0.8, 0.9]]),
            maxlik_wmin_mean=[-0.01, 0.02],
            maxlik_wmin_std=[0.005, 0.006],
            loglik_min_step=1e-4,
        )
        path = tmp_path / "report.json"
        report.save_json(path)
        restored = RobustnessReport.from_json_dict(json.loads(path.read_text()))
        assert restored.loss_levels == report.loss_levels
        assert np.array_equal(restored.fraction_negative, report.fraction_negative)
        assert restored.consensus_negative_pct() == report.consensus_negative_pct()
        # consensus accounting: negative + positive + inconclusive = trainings
        for i in range(2):
            negative = np.sum(restored.fraction_negative[i] >= 0.95)
            positive = np.sum(restored.fraction_positive[i] >= 0.95)
            inconclusive = restored.trainings - negative - positive
            assert negative + positive + inconclusive == restored.trainings


def write_ingest_csv(path, n_per_group=2500, modes=(1, 2), phases=(0.2, 1.2, 2.2)):
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["mode", "phase", "value"])
        rng = np.random.default_rng(0)
        for mode in modes:
            for phase in phases:
                for value in rng.standard_normal(n_per_group):
                    writer.writerow([mode, phase, repr(float(value))])


class TestCmdIngest:
    def test_fifteen_thousand_quadratures(self, tmp_path):
        """A 15000-row two-mode file maps onto 15 x 2 histogram features."""
        source = tmp_path / "experimental.csv"
        write_ingest_csv(source)
        out = tmp_path / "batch.csv"
        batch = cmd_ingest(source, out)
        assert len(batch) == 15_000
        assert set(np.unique(batch.mode)) == {1, 2}
        assert set(np.unique(batch.phase_index)) == {1, 2, 3}
        from wignet.features import bin_quadratures

        features = bin_quadratures(batch, 2)
        assert features.shape == (30,)
        assert QuadratureBatch.from_csv(out).value.shape == (15_000,)

    def test_slot_assignment_by_nearest_interval(self, tmp_path):
        source = tmp_path / "one.csv"
        write_ingest_csv(source, n_per_group=1, modes=(1,), phases=(0.1, 1.5, 3.0))
        batch = cmd_ingest(source)
        assert batch.phase_index.tolist() == [1, 2, 3]

    def test_phase_folding_warns(self, tmp_path):
        source = tmp_path / "fold.csv"
        with open(source, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["mode", "phase", "value"])
            writer.writerow([1, 7.0, 0.5])
        with pytest.warns(UserWarning, match="folded"):
            batch = cmd_ingest(source)
        assert batch.phase[0] == pytest.approx(7.0 - 2 * np.pi)

    def test_empty_file_rejected(self, tmp_path):
        source = tmp_path / "empty.csv"
        source.write_text("")
        with pytest.raises(ValueError, match="empty"):
            cmd_ingest(source)
        source.write_text("mode,phase,value\n")
        with pytest.raises(ValueError, match="no data rows"):
            cmd_ingest(source)

    def test_malformed_row_reports_line_number(self, tmp_path):
        source = tmp_path / "bad.csv"
        source.write_text("mode,phase,value\n1,0.2,0.5\n1,0.3,not-a-number\n")
        with pytest.raises(MalformedRowError, match="line 3"):
            cmd_ingest(source)

    def test_repetitions_count_per_group(self, tmp_path):
        source = tmp_path / "reps.csv"
        write_ingest_csv(source, n_per_group=4, modes=(1,), phases=(0.2,))
        batch = cmd_ingest(source)
        assert batch.repetition.tolist() == [1, 2, 3, 4]


class TestExperimentConfigFile:
    def test_json_round_trip(self, tmp_path):
        config = ExperimentConfig(
            corpus=CorpusConfig(mode_count=3, n_states=100, reps=50),
            train=TrainConfig(seed=4, learning_rate=3e-3),
            comparison=ComparisonConfig(batches=2),
            robustness=RobustnessConfig(trainings=5),
            master_seed=99,
            workers=2,
        )
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config.to_json_dict()))
        assert ExperimentConfig.from_json_file(path) == config


class TestCli:
    def test_generate_train_evaluate_curves(self, tmp_path):
        out = str(tmp_path)
        code = main(
            [
                "--out-dir", out, "--seed", "3", "--run-id", "t1",
                "generate", "--modes", "2", "--states", "14", "--reps", "10",
            ]
        )
        assert code == 0
        dataset = os.path.join(out, "generate_t1_dataset.csv")
        assert os.path.exists(dataset)
        assert os.path.exists(os.path.join(out, "generate_t1.manifest.json"))
        assert main(["--out-dir", out, "--run-id", "t2", "train", "--dataset", dataset]) == 0
        model = os.path.join(out, "train_t2_model.json")
        assert os.path.exists(model)
        assert main(["--out-dir", out, "--run-id", "t3", "evaluate", "--model", model, "--dataset", dataset]) == 0
        assert main(["--out-dir", out, "--run-id", "t4", "curves", "--model", model, "--dataset", dataset]) == 0
        assert os.path.exists(os.path.join(out, "curves_t4_roc.csv"))
        assert os.path.exists(os.path.join(out, "curves_t4_pr.csv"))

    def test_compare_and_robustness_commands(self, tmp_path, mini_files):
        config = {
            "corpus": {"mode_count": 2, "n_states": 20, "reps": 15},
            "train": {"max_epochs": 5, "patience": 5},
            "comparison": {
                "measurement_counts": [10],
                "batches": 1,
                "states_per_batch": 3,
                "photon_cutoff": 3,
                "iterations": 4,
            },
            "robustness": {
                "loss_grid": [0.0, 0.1],
                "replicas": 2,
                "trainings": 2,
                "replica_reps": 15,
                "iterations": 4,
                "train_states": 20,
                "train_reps": 15,
            },
            "master_seed": 5,
            "workers": 1,
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config))
        out = str(tmp_path)
        code = main(
            ["--config", str(config_path), "--out-dir", out, "--run-id", "c1",
             "compare", "--model", str(mini_files["model"])]
        )
        assert code == 0
        with open(os.path.join(out, "compare_c1_comparison.csv")) as handle:
            rows = list(csv.DictReader(handle))
        assert {row["method"] for row in rows} == {"nn", "maxlik"}
        code = main(
            ["--config", str(config_path), "--out-dir", out, "--run-id", "r1",
             "robustness", "--simulate-analog"]
        )
        assert code == 0
        report = json.loads((tmp_path / "robustness_r1_robustness.json").read_text())
        assert report["loss_levels"] == [0.0, 0.1]
        assert (tmp_path / "robustness_r1_base_batch.csv").exists()

    def test_ingest_command(self, tmp_path):
        source = tmp_path / "ext.csv"
        write_ingest_csv(source, n_per_group=3)
        code = main(["--out-dir", str(tmp_path), "--run-id", "ti", "ingest", "--input", str(source)])
        assert code == 0
        assert (tmp_path / "ingest_ti_batch.csv").exists()

    def test_missing_arguments_exit_one(self, capsys):
        assert main(["train"]) == 1
        assert main(["robustness"]) == 1  # needs --base or --simulate-analog

    def test_validation_error_exit_one(self, tmp_path):
        missing = str(tmp_path / "nope.csv")
        assert main(["--out-dir", str(tmp_path), "train", "--dataset", missing]) == 1

    def test_unknown_command_exit_one(self):
        assert main(["frobnicate"]) == 1
