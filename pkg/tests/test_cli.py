import json

import pytest

from semembed.cli import cli_main


@pytest.fixture(scope="module")
def synth(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert cli_main(["gensynth", "--classes", "4", "--per-class", "10", "--seed", "7",
                     "--out", str(out)]) == 0
    return out


def test_gensynth_is_byte_identical(synth, tmp_path):
    assert cli_main(["gensynth", "--classes", "4", "--per-class", "10", "--seed", "7",
                     "--out", str(tmp_path)]) == 0
    for name in ("train.tsv", "test.tsv", "labels.tsv"):
        assert (tmp_path / name).read_bytes() == (synth / name).read_bytes()


def test_train_eval_round(synth, tmp_path, capsys):
    ckpt = tmp_path / "m.ckpt"
    code = cli_main(["train", "--instances", str(synth / "train.tsv"), "--labels",
                     str(synth / "labels.tsv"), "--checkpoint", str(ckpt), "--epochs", "3",
                     "--disc-mode", "triplet", "--lambda2", "0", "--lambda3", "0", "--seed", "1"])
    assert code == 0
    assert "mode: rank-only baseline" in capsys.readouterr().out
    log = (tmp_path / "m.ckpt.log").read_text()
    assert log.startswith("# mode: rank-only baseline")
    assert log.count("\nepoch ") == 3

    out = tmp_path / "rep"
    assert cli_main(["eval", "--checkpoint", str(ckpt), "--test", str(synth / "test.tsv"),
                     "--labels", str(synth / "labels.tsv"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert 0.0 <= report["hit_at_k"]["1"] <= 1.0
    assert "hit@1=" in (out / "report.txt").read_text()


def test_train_config_file_and_resume(synth, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 2, "disc-mode": "contrastive"}))
    ckpt = tmp_path / "a.ckpt"
    base = ["train", "--instances", str(synth / "train.tsv"), "--labels",
            str(synth / "labels.tsv"), "--config", str(cfg)]
    assert cli_main(base + ["--checkpoint", str(ckpt)]) == 0
    assert cli_main(base + ["--checkpoint", str(tmp_path / "b.ckpt"), "--epochs", "4",
                            "--resume", str(ckpt)]) == 0
    assert (tmp_path / "b.ckpt").read_text().rstrip().endswith("\n4")
    cfg.write_text(json.dumps({"bogus": 1}))
    assert cli_main(base + ["--checkpoint", str(ckpt)]) == 2


def test_zeroshot_and_mine(tmp_path, synth):
    lines = (synth / "labels.tsv").read_text().splitlines()
    (tmp_path / "seen.tsv").write_text("\n".join(lines[:2]) + "\n")
    (tmp_path / "unseen.tsv").write_text("\n".join(lines[2:]) + "\n")
    unseen_ids = {ln.split("\t")[0] for ln in lines[2:]}
    rows = (synth / "test.tsv").read_text().splitlines()
    (tmp_path / "t.tsv").write_text(
        "\n".join(r for r in rows if r.split("\t")[1] in unseen_ids) + "\n")
    seen_ids = {ln.split("\t")[0] for ln in lines[:2]}
    train_rows = (synth / "train.tsv").read_text().splitlines()
    (tmp_path / "tr.tsv").write_text(
        "\n".join(r for r in train_rows if r.split("\t")[1] in seen_ids) + "\n")
    ckpt = tmp_path / "z.ckpt"
    assert cli_main(["train", "--instances", str(tmp_path / "tr.tsv"), "--labels",
                     str(tmp_path / "seen.tsv"), "--checkpoint", str(ckpt), "--epochs", "2"]) == 0
    common = ["zeroshot", "--checkpoint", str(ckpt), "--test", str(tmp_path / "t.tsv"),
              "--unseen", str(tmp_path / "unseen.tsv")]
    assert cli_main(common + ["--out", str(tmp_path / "z1"),
                              "--train-instances", str(tmp_path / "tr.tsv")]) == 0
    assert cli_main(common + ["--out", str(tmp_path / "z2"), "--seen",
                              str(tmp_path / "seen.tsv")]) == 0
    assert cli_main(common + ["--out", str(tmp_path / "z3"),
                              "--train-instances", str(synth / "train.tsv")]) == 2

    imgs = tmp_path / "imgs.tsv"
    imgs.write_text("img\ti1\ta\t1 0\nreg\tr1\t1 0\nreg\tr2\t0 1\n"
                    "img\ti2\tb\t0 1\nreg\tr1\t0 1\n")
    assert cli_main(["mine", "--images", str(imgs), "--out", str(tmp_path / "mined.tsv"),
                     "--epochs", "5"]) == 0
    assert len((tmp_path / "mined.tsv").read_text().splitlines()) == 2


def test_check_grad_exits_zero(capsys):
    assert cli_main(["check-grad", "--configs", "5"]) == 0
    assert capsys.readouterr().out.count("PASS") == 6


@pytest.mark.parametrize("argv", [[], ["train"], ["gensynth", "--classes", "x"], ["frobnicate"]])
def test_usage_errors_exit_one(argv):
    assert cli_main(argv) == 1


def test_data_errors_exit_two(tmp_path, synth):
    bad = tmp_path / "labels.tsv"
    bad.write_text("a\t1 0\na\t0 1\n")
    assert cli_main(["train", "--instances", str(synth / "train.tsv"), "--labels", str(bad),
                     "--checkpoint", str(tmp_path / "c")]) == 2
    assert cli_main(["eval", "--checkpoint", str(tmp_path / "missing"), "--test",
                     str(synth / "test.tsv"), "--labels", str(synth / "labels.tsv")]) == 2
