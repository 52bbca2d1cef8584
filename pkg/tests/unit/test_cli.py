"""Tests for the command-line interface."""

import json

import pytest

from tsmb.analysis.report import REPORT_FILE, write_reports
from tsmb.cli import build_parser, main
from tsmb.core.entities import EvalReport
from tsmb.data.dataset import save_csv
from tsmb.data.synthetic import make_sine_vs_ar1

FAST = [
    "--format",
    "csv",
    "--grid-states",
    "2",
    "--grid-cov",
    "diagonal",
    "--grid-concepts",
    "3",
    "--restarts",
    "2",
    "--de-maxiter",
    "5",
    "--jobs",
    "1",
]


@pytest.fixture(autouse=True)
def isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("TSMB_SEED", raising=False)


@pytest.fixture
def csv_files(tmp_path):
    dataset = make_sine_vs_ar1(n_train_per_class=4, n_test_per_class=3, length=40, seed=2)
    train = save_csv(dataset.train, tmp_path / "Sine_TRAIN.csv")
    test = save_csv(dataset.test, tmp_path / "Sine_TEST.csv")
    return str(train), str(test)


def _benchmark(csv_files, out, *extra):
    train, test = csv_files
    return main(
        ["benchmark", "--train", train, "--test", test, "-o", str(out), "--schemes", "hmm-1c"]
        + FAST
        + list(extra)
    )


class TestParser:
    def test_subcommands(self):
        args = build_parser().parse_args(["train", "--train", "x.ts", "--seed", "3"])
        assert args.command == "train"
        assert args.seed == 3
        assert args.znorm is None

    def test_version(self, capsys):
        assert main(["--version"]) == 0
        assert "tsmb" in capsys.readouterr().out

    def test_missing_command(self):
        assert main([]) == 2


class TestTrain:
    def test_writes_bundle(self, tmp_path, csv_files, capsys):
        out = tmp_path / "models"
        args = ["train", "--train", csv_files[0], "-o", str(out), "--schemes", "hmm-1c"]
        assert main(args + FAST) == 0
        bundle = out / "Sine_hmm-1c.json"
        assert bundle.exists()
        assert str(bundle) in capsys.readouterr().out
        data = json.loads(bundle.read_text())
        assert data["scheme"] == "hmm-1c"
        assert data["classes"] == ["ar1", "sine"]

    def test_inspect_bundle(self, tmp_path, csv_files, capsys):
        out = tmp_path / "models"
        main(["train", "--train", csv_files[0], "-o", str(out), "--schemes", "fcm-nn"] + FAST)
        capsys.readouterr()
        assert main(["inspect", str(out / "Sine_fcm-nn.json")]) == 0
        text = capsys.readouterr().out
        assert "fcm-nn" in text
        assert "8 models" in text

    def test_unknown_scheme(self, csv_files):
        assert main(["train", "--train", csv_files[0], "--schemes", "svm"] + FAST) == 2

    def test_unreadable_file(self, tmp_path):
        assert main(["train", "--train", str(tmp_path / "missing.csv")] + FAST) == 1

    def test_no_input(self):
        assert main(["train"] + FAST) == 2

    def test_bad_config_file(self, tmp_path, csv_files):
        config = tmp_path / "bad.yaml"
        config.write_text("folds: 1\n")
        assert main(["train", "--train", csv_files[0], "--config", str(config)] + FAST) == 2


class TestBenchmark:
    def test_requires_seed(self, tmp_path, csv_files):
        assert _benchmark(csv_files, tmp_path / "out") == 2

    def test_seed_from_environment(self, tmp_path, csv_files, monkeypatch):
        monkeypatch.setenv("TSMB_SEED", "11")
        assert _benchmark(csv_files, tmp_path / "out") == 0
        data = json.loads((tmp_path / "out" / REPORT_FILE).read_text())
        assert data["config"]["seed"] == 11

    def test_requires_test_file(self, tmp_path, csv_files):
        code = main(["benchmark", "--train", csv_files[0], "--seed", "1"] + FAST)
        assert code == 2

    def test_reproducible(self, tmp_path, csv_files):
        assert _benchmark(csv_files, tmp_path / "a", "--seed", "5") == 0
        assert _benchmark(csv_files, tmp_path / "b", "--seed", "5") == 0
        first = (tmp_path / "a" / REPORT_FILE).read_bytes()
        assert first == (tmp_path / "b" / REPORT_FILE).read_bytes()

    def test_summary_and_files(self, tmp_path, csv_files, capsys):
        assert _benchmark(csv_files, tmp_path / "out", "--seed", "1", "--reruns", "2") == 0
        line = capsys.readouterr().out.strip()
        assert line.startswith("Sine")
        assert "HMM 1C" in line
        assert "[" in line
        for name in ("accuracy.csv", "cv.csv", "timings.csv"):
            assert (tmp_path / "out" / name).exists()


class TestCompare:
    @pytest.fixture
    def report_paths(self, tmp_path):
        paths = []
        for run, accuracies in (("run1", [0.9, 0.5, 0.7]), ("run2", [0.8, 0.4, 0.6])):
            reports = [
                EvalReport(dataset=f"D{i}", n_classes=2, scheme="hmm-nn", test_accuracy=a)
                for i, a in enumerate(accuracies)
            ]
            write_reports(reports, tmp_path / run)
            paths.append(str(tmp_path / run / REPORT_FILE))
        return paths

    def test_prints_and_writes_matrix(self, tmp_path, report_paths, capsys):
        output = tmp_path / "corr.csv"
        assert main(["compare", *report_paths, "-o", str(output)]) == 0
        assert "run1:hmm-nn" in capsys.readouterr().out
        assert output.exists()

    def test_needs_two_reports(self, report_paths):
        assert main(["compare", report_paths[0]]) == 2

    def test_not_a_report(self, tmp_path, report_paths):
        junk = tmp_path / "junk.json"
        junk.write_text("[]")
        assert main(["compare", report_paths[0], str(junk)]) == 1
