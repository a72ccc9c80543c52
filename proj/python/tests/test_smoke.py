import math

import pytest

import qoekit


def test_tokenize_round_trips():
    text = "Streaming text, one token at a time."
    tokens = qoekit.tokenize(text)
    assert "".join(tokens) == text
    assert tokens[:2] == ["Streaming", " text,"]
    assert qoekit.tokenize("你好世界", "zh") == ["你", "好", "世", "界"]


def test_schedule_matches_closed_form():
    times, total = qoekit.schedule_emission(["a", "b", "c", "d"], 0.05, 0.5, 3.0)
    assert times == [0.0, 0.05, 2 * 0.05 + 3.0, 3 * 0.05 + 3.0]
    assert total == times[-1]


def test_rank_statistics():
    assert qoekit.spearman([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-12)
    assert qoekit.kendall([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(1 / 3, abs=1e-12)
    assert qoekit.pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(qoekit.QoeError, match="degenerate-input"):
        qoekit.pearson([1, 1, 1], [1, 2, 3])


def test_pca_ratios_sum_to_one():
    samples = [[i % 2, (i // 2) % 2, 0.01 * (i % 3), 0.25 * (i % 4), 3 + 2 * (i % 3)] for i in range(24)]
    result = qoekit.pca(samples)
    assert math.isclose(sum(result["explained_variance_ratio"]), 1.0, abs_tol=1e-9)
    assert len(result["scores"]) == 24


def test_synth_process_train_predict():
    records = qoekit.synth_records(raters=21, conditions=216, seed=3)
    mos_csv, report = qoekit.process(records)
    assert mos_csv.startswith("question_id,")
    assert report["raters_in"] == 21
    assert "synth-r020" in report["rejected_by_srcc"] + report["rejected_by_z"]

    model, metrics = qoekit.train(records, "linear", seed=3)
    assert metrics["srcc"] >= 0.9
    raw, clamped = qoekit.predict(model, [1, 1, 0.01, 0.25, 3])
    worse, _ = qoekit.predict(model, [1, 0, 0.1, 0.25, 7])
    assert raw > worse
    assert 0.0 <= clamped <= 5.0


def test_cli_exit_codes(tmp_path):
    code, out, _ = qoekit.run_cli(["--help"])
    assert code == 0 and "process" in out
    code, _, err = qoekit.run_cli(["process", "--in", str(tmp_path / "missing.jsonl"), "--out", "x.csv"])
    assert code == 1 and "file-not-found" in err
    code, _, _ = qoekit.run_cli(["process", "--bogus"])
    assert code == 2
