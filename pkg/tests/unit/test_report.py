"""Tests for report tables, correlations and report files."""

import json

import numpy as np
import pandas as pd
import pytest

from tsmb.analysis.report import (
    REPORT_FILE,
    accuracy_table,
    compare_reports,
    correlation_matrix,
    load_reports,
    spearman,
    timing_report,
    write_reports,
)
from tsmb.core.entities import CvRow, EvalReport, TimingRecord
from tsmb.exceptions import ReportError


def _report(dataset, scheme, accuracy, reruns=1, spread=0.0):
    return EvalReport(
        dataset=dataset,
        n_classes=2,
        scheme=scheme,
        cv=[
            CvRow(
                hyperparams={"n_concepts": 3},
                label="3",
                fold_accuracies=[accuracy, accuracy, accuracy],
                fold_failures=[0, 0, 0],
                mean_accuracy=accuracy,
            )
        ],
        chosen={"n_concepts": 3},
        chosen_label="3",
        test_accuracy=accuracy,
        test_accuracy_min=accuracy - spread,
        test_accuracy_max=accuracy + spread,
        reruns=reruns,
        timings=[TimingRecord(scheme=scheme, size=3, seconds=0.5, iterations=10)],
    )


def _write(tmp_path, name, accuracies, scheme="fcm-1c"):
    reports = [_report(d, scheme, a) for d, a in accuracies.items()]
    out = tmp_path / name
    write_reports(reports, out)
    return out / REPORT_FILE


@pytest.fixture
def three_datasets():
    return [
        _report("D1", "hmm-1c", 0.9),
        _report("D2", "hmm-1c", 0.7),
        _report("D3", "hmm-1c", 0.5),
        _report("D1", "fcm-1c", 0.6),
        _report("D2", "fcm-1c", 0.8),
        _report("D3", "fcm-1c", 0.4),
    ]


class TestSpearman:
    def test_identical(self):
        assert spearman([1, 2, 3, 4], [1, 2, 3, 4]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_hand_computed(self):
        assert spearman([1, 2, 3, 4, 5], [2, 1, 4, 3, 5]) == pytest.approx(0.8)

    def test_ties_share_ranks(self):
        assert spearman([1, 1, 2], [1, 1, 2]) == pytest.approx(1.0)

    def test_constant_input(self):
        with pytest.raises(ReportError):
            spearman([0.5, 0.5, 0.5], [1, 2, 3])

    def test_unequal_lengths(self):
        with pytest.raises(ReportError):
            spearman([1, 2, 3], [1, 2])


class TestTables:
    def test_timing_report_groups(self):
        records = [
            TimingRecord(scheme="fcm-1c", size=3, seconds=1.0, iterations=10),
            TimingRecord(scheme="fcm-1c", size=3, seconds=3.0, iterations=20),
            TimingRecord(scheme="fcm-1c", size=5, seconds=2.0, iterations=30),
        ]
        table = timing_report(records)
        assert list(table["size"]) == [3, 5]
        assert list(table["models"]) == [2, 1]
        assert list(table["mean_seconds"]) == [2.0, 2.0]
        assert list(table["mean_iterations"]) == [15.0, 30.0]

    def test_empty_timing_report(self):
        assert timing_report([]).empty

    def test_accuracy_table(self, three_datasets):
        table = accuracy_table(three_datasets)
        assert list(table.columns) == [
            "dataset",
            "classes",
            "HMM 1C accuracy",
            "HMM 1C hpar",
            "FCM 1C accuracy",
            "FCM 1C hpar",
        ]
        assert list(table["dataset"]) == ["D1", "D2", "D3"]
        assert list(table["FCM 1C accuracy"]) == [0.6, 0.8, 0.4]

    def test_accuracy_table_with_reruns(self):
        table = accuracy_table([_report("D1", "hmm-nn", 0.8, reruns=5, spread=0.1)])
        assert "HMM NN min" in table.columns
        assert table["HMM NN max"].iloc[0] == pytest.approx(0.9)


class TestCorrelationMatrix:
    def test_symmetric_with_unit_diagonal(self):
        rng = np.random.default_rng(0)
        columns = {name: rng.random(6) for name in ("a", "b", "c")}
        matrix = correlation_matrix(columns)
        assert matrix.shape == (3, 3)
        np.testing.assert_allclose(np.diag(matrix), 1.0)
        np.testing.assert_allclose(matrix.to_numpy(), matrix.to_numpy().T)

    def test_undefined_pair(self):
        columns = {"a": [0.5, 0.5, 0.5], "b": [0.1, 0.2, 0.3]}
        with pytest.raises(ReportError, match="a vs b"):
            correlation_matrix(columns)
        assert np.isnan(correlation_matrix(columns, strict=False).loc["a", "b"])


class TestWriteReports:
    def test_file_set(self, tmp_path, three_datasets):
        written = write_reports(three_datasets, tmp_path, config={"seed": 3})
        names = sorted(p.name for p in written)
        assert names == [
            "accuracy.csv",
            "correlations.csv",
            "cv.csv",
            REPORT_FILE,
            "timings.csv",
        ]
        matrix = pd.read_csv(tmp_path / "correlations.csv", index_col=0)
        assert matrix.loc["HMM 1C", "FCM 1C"] == pytest.approx(0.5)

    def test_single_dataset_has_no_correlations(self, tmp_path):
        write_reports([_report("D1", "hmm-1c", 0.9), _report("D1", "fcm-1c", 0.8)], tmp_path)
        assert not (tmp_path / "correlations.csv").exists()

    def test_report_json_has_no_timings(self, tmp_path, three_datasets):
        write_reports(three_datasets, tmp_path, config={"seed": 3})
        data = json.loads((tmp_path / REPORT_FILE).read_text())
        assert data["config"] == {"seed": 3}
        assert "timings" not in data["reports"][0]

    def test_byte_identical_rewrites(self, tmp_path, three_datasets):
        write_reports(three_datasets, tmp_path / "a")
        write_reports(three_datasets, tmp_path / "b")
        assert (tmp_path / "a" / REPORT_FILE).read_bytes() == (
            tmp_path / "b" / REPORT_FILE
        ).read_bytes()

    def test_load_reports(self, tmp_path, three_datasets):
        write_reports(three_datasets, tmp_path)
        loaded = load_reports(tmp_path / REPORT_FILE)
        assert [r.test_accuracy for r in loaded] == [r.test_accuracy for r in three_datasets]

    def test_load_rejects_other_json(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"x": 1}')
        with pytest.raises(ReportError):
            load_reports(path)


class TestCompareReports:
    def test_self_comparison(self, tmp_path):
        accuracies = {"D1": 0.9, "D2": 0.5, "D3": 0.7}
        a = _write(tmp_path, "run1", accuracies)
        b = _write(tmp_path, "run2", accuracies)
        matrix = compare_reports([a, b])
        assert matrix.loc["run1:fcm-1c", "run2:fcm-1c"] == pytest.approx(1.0)

    def test_reversed_ranking(self, tmp_path):
        a = _write(tmp_path, "run1", {"D1": 0.9, "D2": 0.5, "D3": 0.7})
        b = _write(tmp_path, "run2", {"D1": 0.1, "D2": 0.5, "D3": 0.3})
        matrix = compare_reports([a, b])
        assert matrix.loc["run1:fcm-1c", "run2:fcm-1c"] == pytest.approx(-1.0)

    def test_three_reports(self, tmp_path):
        paths = [
            _write(tmp_path, f"run{i}", {"D1": 0.1 * i, "D2": 0.5, "D3": 0.9 - 0.1 * i})
            for i in range(1, 4)
        ]
        matrix = compare_reports(paths)
        assert matrix.shape == (3, 3)
        np.testing.assert_allclose(np.diag(matrix), 1.0)
        np.testing.assert_allclose(matrix.to_numpy(), matrix.to_numpy().T)

    def test_duplicate_names_are_suffixed(self, tmp_path):
        a = _write(tmp_path, "run", {"D1": 0.9, "D2": 0.5})
        matrix = compare_reports([a, a])
        assert list(matrix.columns) == ["run:fcm-1c", "run#2:fcm-1c"]

    def test_mismatched_datasets(self, tmp_path):
        a = _write(tmp_path, "run1", {"D1": 0.9, "D2": 0.5, "D3": 0.7})
        b = _write(tmp_path, "run2", {"D1": 0.9, "D2": 0.5, "D4": 0.7})
        with pytest.raises(ReportError, match="D4"):
            compare_reports([a, b])

    def test_single_column(self, tmp_path):
        a = _write(tmp_path, "run1", {"D1": 0.9, "D2": 0.5})
        with pytest.raises(ReportError):
            compare_reports([a])
