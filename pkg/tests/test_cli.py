"""End-to-end command-line workflows, exit codes and reproducibility."""

import json
from pathlib import Path

import pytest

from viewfit.cli import main


def run(args):
    return main([str(a) for a in args])


def read_bytes_map(root: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(root.iterdir()) if p.is_file()}


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "corpus"
    code = run(["synth", "--mix", "gompertz:3,negexp:3", "--n", "100",
                "--noise", "0.01", "--seed", "21", "-o", out])
    assert code == 0
    return out


class TestSynthCommand:
    def test_writes_corpus_and_labels(self, tmp_path):
        out = tmp_path / "s"
        assert run(["synth", "--mix", "all:2", "--n", "40", "--seed", "7", "-o", out]) == 0
        assert (out / "series.csv").exists()
        assert (out / "metadata.csv").exists()
        assert (out / "labels.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["records"] == 14
        assert manifest["command"] == "synth"

    def test_repeat_invocation_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run(["synth", "--mix", "all:2", "--n", "40", "--noise", "0.02", "--seed", "9", "-o", a])
        run(["synth", "--mix", "all:2", "--n", "40", "--noise", "0.02", "--seed", "9", "-o", b])
        assert read_bytes_map(a) == read_bytes_map(b)

    def test_json_format(self, tmp_path):
        out = tmp_path / "j"
        assert run(["synth", "--mix", "negexp:2", "--format", "json", "-o", out]) == 0
        data = json.loads((out / "series.json").read_text())
        assert len(data) == 2

    def test_bad_mix_is_fatal(self, tmp_path):
        assert run(["synth", "--mix", "nosuchkind:3", "-o", tmp_path / "x"]) == 2


class TestFitCommand:
    def test_single_model_recovers_params(self, tmp_path, corpus):
        out = tmp_path / "fit"
        code = run(["fit", corpus / "series.csv", "--model", "gompertz", "-o", out])
        assert code == 0
        payload = json.loads((out / "fits.json").read_text())
        labels = (corpus / "labels.csv").read_text().splitlines()[1:]
        by_id = {line.split(",")[0]: line.split(",") for line in labels}
        for entry in payload["series"]:
            assert len(entry["fits"]) == 1
            fit = entry["fits"][0]
            assert fit["kind"] == "gompertz"
            if by_id[entry["id"]][1] == "gompertz":
                assert fit["mer"] < 0.05

    def test_all_models_gives_seven_fits(self, tmp_path, corpus):
        out = tmp_path / "fitall"
        assert run(["fit", corpus / "series.csv", "--model", "all", "-o", out]) == 0
        payload = json.loads((out / "fits.json").read_text())
        for entry in payload["series"]:
            assert len(entry["fits"]) == 7

    def test_curves_output(self, tmp_path, corpus):
        out = tmp_path / "fitc"
        assert run(["fit", corpus / "series.csv", "--model", "negexp",
                    "--curves", "-o", out]) == 0
        lines = (out / "curves.csv").read_text().splitlines()
        assert lines[0] == "id,kind,t,observed,fitted"
        assert len(lines) == 1 + 6 * 100

    def test_unreadable_path_exits_2(self, tmp_path):
        assert run(["fit", tmp_path / "missing.csv", "-o", tmp_path / "o"]) == 2


class TestClassifyCommand:
    def test_accuracy_line_and_outputs(self, tmp_path, corpus, capsys):
        out = tmp_path / "cls"
        code = run(["classify", corpus / "series.csv", "--labels", corpus / "labels.csv",
                    "-o", out])
        assert code == 0
        captured = capsys.readouterr()
        assert "accuracy:" in captured.out
        accuracy = float(captured.out.split("accuracy:")[1].split("%")[0])
        assert accuracy >= 95.0
        for name in ("classifications.json", "summary.csv", "distribution.csv",
                     "distribution_counts.csv", "mer_histogram.csv", "manifest.json"):
            assert (out / name).exists()

    def test_distribution_table_shape(self, tmp_path, corpus):
        out = tmp_path / "cls2"
        run(["classify", corpus / "series.csv", "--metadata", corpus / "metadata.csv",
             "--group-by", "popularity", "-o", out])
        lines = (out / "distribution.csv").read_text().splitlines()
        header = lines[0].split(",")
        assert header[0] == "model"
        assert len(header) >= 2  # one column per popularity class present

    def test_partial_exit_code_on_rejects(self, tmp_path, corpus):
        bad = tmp_path / "bad.csv"
        good_lines = (corpus / "series.csv").read_text().splitlines()
        bad.write_text("\n".join(good_lines + ["broken,1,5", "broken,2,3"]) + "\n")
        out = tmp_path / "cls3"
        code = run(["classify", bad, "-o", out])
        assert code == 1  # NON_MONOTONE record rejected, rest classified

    def test_empty_input_exits_2(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("id,t,y\n")
        assert run(["classify", empty, "-o", tmp_path / "x"]) == 2


class TestPredictCommand:
    def test_halflife_noiseless_perfect(self, tmp_path, capsys):
        corpus = tmp_path / "p"
        run(["synth", "--mix", "gompertz:2,modnegexp:2", "--n", "100", "--noise", "0",
             "--seed", "3", "--scale", "200:100000", "-o", corpus])
        out = tmp_path / "pred"
        assert run(["predict", corpus / "series.csv", "--scenario", "halflife",
                    "-o", out]) == 0
        agg = json.loads((out / "aggregate.json").read_text())["aggregate"]
        assert agg["all"]["soft_mean"] == pytest.approx(1.0)
        assert agg["all"]["soft_var"] == pytest.approx(0.0, abs=1e-20)

    def test_window7_table_shape(self, tmp_path):
        corpus = tmp_path / "p7"
        run(["synth", "--mix", "negexp:3", "--n", "120", "--noise", "0.01",
             "--seed", "5", "--scale", "120:50000", "-o", corpus])
        out = tmp_path / "pred7"
        assert run(["predict", corpus / "series.csv", "--scenario", "window7",
                    "-o", out]) == 0
        header = (out / "aggregate.csv").read_text().splitlines()[0]
        assert header == ("model,count,distribution_pct,hard_mean,hard_var,"
                          "hard_bounded_pct,soft_mean,soft_var,soft_bounded_pct")

    def test_young_corpus_skipped_for_fixed50(self, tmp_path):
        corpus = tmp_path / "py"
        run(["synth", "--mix", "gompertz:2,negexp:2", "--n", "100", "--noise", "0",
             "--seed", "6", "--scale", "200:100000", "-o", corpus])
        young = tmp_path / "young"
        run(["synth", "--mix", "gompertz:2", "--n", "100", "--noise", "0",
             "--seed", "7", "--scale", "30:1000", "-o", young])
        merged = tmp_path / "merged.csv"
        lines = (corpus / "series.csv").read_text().splitlines()
        young_lines = (young / "series.csv").read_text().splitlines()[1:]
        young_lines = [line.replace("synth-", "young-") for line in young_lines]
        merged.write_text("\n".join(lines + young_lines) + "\n")
        out = tmp_path / "predy"
        code = run(["predict", merged, "--scenario", "fixed50", "-o", out])
        assert code == 1  # partial: young records skipped
        skipped = (out / "skipped.csv").read_text().splitlines()[1:]
        assert len(skipped) == 2
        assert all("INELIGIBLE_AGE" in line for line in skipped)


class TestReportCommand:
    def test_report_from_classifications(self, tmp_path, corpus):
        cls = tmp_path / "cls"
        run(["classify", corpus / "series.csv", "-o", cls])
        out = tmp_path / "rep"
        assert run(["report", cls / "classifications.json", "-o", out]) == 0
        ci_lines = (out / "proportion_ci.csv").read_text().splitlines()
        assert ci_lines[0] == "model,successes,trials,low,point,high"
        assert len(ci_lines) >= 2


class TestPipelineDeterminism:
    def test_synth_classify_predict_byte_identical(self, tmp_path):
        def pipeline(root: Path) -> dict:
            run(["synth", "--mix", "gompertz:2,modnegexp:2,linear:1", "--n", "80",
                 "--noise", "0.01", "--seed", "31", "--scale", "160:20000",
                 "-o", root / "corpus"])
            run(["classify", root / "corpus" / "series.csv", "--seed", "31",
                 "-o", root / "cls"])
            run(["predict", root / "corpus" / "series.csv", "--scenario", "halflife",
                 "--seed", "31", "-o", root / "pred"])
            blobs = {}
            for sub in ("corpus", "cls", "pred"):
                for name, blob in read_bytes_map(root / sub).items():
                    blobs[f"{sub}/{name}"] = blob
            return blobs

        first = pipeline(tmp_path / "run1")
        second = pipeline(tmp_path / "run2")
        assert first.keys() == second.keys()
        for name in first:
            assert first[name] == second[name], f"{name} differs between runs"
