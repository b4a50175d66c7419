import subprocess
import sys

import pytest

from fofe_wsd import lm, wsd
from fofe_wsd.cli import main


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture()
def workspace(tmp_path):
    """Small self-contained corpus + labeled data + inventory + config."""
    corpus = _write(
        tmp_path / "corpus.txt",
        "the teller counted the money near the vault\n"
        "a canoe drifted down the muddy river water\n"
        "the teller kept money in the vault\n"
        "reeds grew along the muddy river shore\n"
        "my deposit earned interest at the branch\n"
        "the ferry crossed the river past the reeds\n" * 3,
    )
    train = _write(
        tmp_path / "train.tsv",
        "t1\tthe teller counted the blick near the vault\t4\tblick\tblick%1\n"
        "t2\ta canoe drifted down the blick water\t5\tblick\tblick%2\n"
        "t3\tthe teller kept blick in the vault\t3\tblick\tblick%1\n"
        "t4\treeds grew along the muddy blick shore\t5\tblick\tblick%2\n",
    )
    test = _write(
        tmp_path / "test.tsv",
        "q1\tmy blick earned interest at the branch\t1\tblick\tblick%1\n"
        "q2\tthe ferry crossed the blick past the reeds\t4\tblick\tblick%2\n",
    )
    inventory = _write(tmp_path / "inventory.tsv", "blick\tblick%1,blick%2\n")
    config = _write(
        tmp_path / "run.conf",
        f"corpus = {corpus}\n"
        f"train = {train}\n"
        f"test = {test}\n"
        f"inventory = {inventory}\n"
        f"checkpoint = {tmp_path / 'model.fofe'}\n"
        f"store = {tmp_path / 'store.fwsd'}\n"
        f"predictions = {tmp_path / 'pred.tsv'}\n"
        f"report = {tmp_path / 'report.tsv'}\n"
        "embed_dim = 8\n"
        "hidden_dims = 16\n"
        "order = 2\n"
        "epochs = 3\n"
        "seed = 2\n",
    )
    return tmp_path, config


class TestEncode:
    def test_printed_example(self, capsys):
        assert main(["encode", "--tokens", "a b c", "--alpha", "0.7", "--direction", "left"]) == 0
        assert capsys.readouterr().out.strip() == "0.49 0.7 1"

    def test_empty_tokens(self, capsys):
        assert main(["encode", "--tokens", ""]) == 0
        assert capsys.readouterr().out.strip() == ""

    def test_alpha_validation(self, capsys):
        assert main(["encode", "--tokens", "a", "--alpha", "1.5"]) == 1
        assert "alpha" in capsys.readouterr().err

    def test_right_direction_and_order(self, capsys):
        assert main(["encode", "--tokens", "a b c", "--alpha", "0.7", "--direction", "right"]) == 0
        assert capsys.readouterr().out.strip() == "1 0.7 0.49"

    def test_unknown_flag(self, capsys):
        assert main(["encode", "--tokens", "a", "--bogus", "x"]) == 1


class TestConfigHandling:
    def test_unknown_key_is_usage_error(self, tmp_path, capsys):
        config = _write(tmp_path / "c.conf", "alpa = 0.7\n")
        assert main(["train", "-c", str(config)]) == 1
        assert "unknown config key" in capsys.readouterr().err

    def test_malformed_line(self, tmp_path, capsys):
        config = _write(tmp_path / "c.conf", "alpha 0.7\n")
        assert main(["train", "-c", str(config)]) == 1

    def test_missing_paths_reported_before_compute(self, capsys):
        assert main(["train", "--epochs", "1"]) == 1
        err = capsys.readouterr().err
        assert "corpus" in err and "checkpoint" in err

    def test_flag_overrides_file(self, workspace):
        tmp_path, config = workspace
        assert main(["train", "-c", str(config), "--epochs", "0", "--alpha", "0.5"]) == 0
        model = lm.load_checkpoint(tmp_path / "model.fofe")
        assert model.config.fofe.alpha == 0.5

    def test_comments_and_blanks_ok(self, tmp_path, capsys):
        config = _write(tmp_path / "c.conf", "# comment\n\nalpha = 0.7\n")
        assert main(["train", "-c", str(config)]) == 1  # still missing paths
        assert "missing required path" in capsys.readouterr().err


class TestTrainCommand:
    def test_missing_corpus_file_is_data_error(self, tmp_path, capsys):
        assert (
            main(
                [
                    "train",
                    "--corpus", str(tmp_path / "nope.txt"),
                    "--checkpoint", str(tmp_path / "m.fofe"),
                ]
            )
            == 2
        )
        assert "cannot read corpus" in capsys.readouterr().err

    def test_epochs_zero_still_writes_checkpoint(self, workspace):
        tmp_path, config = workspace
        assert main(["train", "-c", str(config), "--epochs", "0"]) == 0
        model = lm.load_checkpoint(tmp_path / "model.fofe")
        assert len(model.vocab) > 1

    def test_writes_epoch_log(self, workspace):
        tmp_path, config = workspace
        assert main(["train", "-c", str(config)]) == 0
        log_lines = (tmp_path / "model.fofe.log").read_text().splitlines()
        assert len(log_lines) == 3
        assert log_lines[0].startswith("1\t")

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_exits_3(self, workspace, capsys):
        tmp_path, config = workspace
        code = main(
            ["train", "-c", str(config), "--optimizer", "sgd", "--learning-rate", "1e30"]
        )
        assert code == 3
        assert "non-finite" in capsys.readouterr().err

    def test_resume_appends(self, workspace):
        tmp_path, config = workspace
        assert main(["train", "-c", str(config)]) == 0
        first = (tmp_path / "model.fofe").read_bytes()
        assert main(["train", "-c", str(config), "--resume", "--epochs", "1"]) == 0
        assert (tmp_path / "model.fofe").read_bytes() != first
        assert "# resumed" in (tmp_path / "model.fofe.log").read_text()


class TestBuildPredictEval:
    def test_full_pipeline(self, workspace, capsys):
        tmp_path, config = workspace
        for command in ("train", "build", "predict", "eval"):
            assert main([command, "-c", str(config)]) == 0, command
        out = capsys.readouterr().out
        assert "micro_f1" in out
        report = (tmp_path / "report.tsv").read_text().splitlines()
        assert report[0].startswith("all\t2\t")
        predictions = wsd.read_predictions(tmp_path / "pred.tsv")
        assert list(predictions) == ["q1", "q2"]

    def test_build_rejects_unknown_sense_key(self, workspace, capsys):
        tmp_path, config = workspace
        _write(
            tmp_path / "train.tsv",
            "t1\tthe blick\t1\tblick\tblick%9\n",
        )
        assert main(["train", "-c", str(config), "--epochs", "0"]) == 0
        assert main(["build", "-c", str(config)]) == 2
        err = capsys.readouterr().err
        assert "blick%9" in err and "t1" in err

    def test_build_empty_labeled_file_warns(self, workspace, caplog):
        tmp_path, config = workspace
        _write(tmp_path / "train.tsv", "# no instances\n")
        assert main(["train", "-c", str(config), "--epochs", "0"]) == 0
        with caplog.at_level("WARNING"):
            assert main(["build", "-c", str(config)]) == 0
        assert any("empty" in message for message in caplog.messages)
        assert wsd.load_store(tmp_path / "store.fwsd").pairs == {}

    def test_predict_unknown_lemma_lists_ids(self, workspace, capsys):
        tmp_path, config = workspace
        assert main(["train", "-c", str(config), "--epochs", "0"]) == 0
        assert main(["build", "-c", str(config)]) == 0
        _write(
            tmp_path / "test.tsv",
            "q1\tthe ghost walked\t1\tghost\tg%1\n"
            "q2\tanother ghost\t1\tghost\tg%1\n",
        )
        assert main(["predict", "-c", str(config)]) == 2
        err = capsys.readouterr().err
        assert "q1" in err and "q2" in err

    def test_predict_backoff_for_unseen_lemma(self, workspace):
        tmp_path, config = workspace
        _write(tmp_path / "train.tsv", "# empty\n")
        _write(
            tmp_path / "inventory.tsv",
            "blick\tblick%1,blick%2\nrose\trose%2,rose%1\n",
        )
        _write(
            tmp_path / "test.tsv",
            "q1\tthe rose grew\t1\trose\trose%1\n"
            "q2\tthe blick rose\t1\tblick\tblick%2\n",
        )
        assert main(["train", "-c", str(config), "--epochs", "0"]) == 0
        assert main(["build", "-c", str(config)]) == 0
        assert main(["predict", "-c", str(config)]) == 0
        predictions = wsd.read_predictions(tmp_path / "pred.tsv")
        assert predictions == {"q1": "rose%2", "q2": "blick%1"}

    def test_predict_empty_test_file(self, workspace):
        tmp_path, config = workspace
        _write(tmp_path / "test.tsv", "# nothing here\n")
        assert main(["train", "-c", str(config), "--epochs", "0"]) == 0
        assert main(["build", "-c", str(config)]) == 0
        assert main(["predict", "-c", str(config)]) == 0
        assert (tmp_path / "pred.tsv").read_text(encoding="utf-8") == ""

    def test_duplicate_test_instance_id(self, workspace, capsys):
        tmp_path, config = workspace
        _write(
            tmp_path / "test.tsv",
            "q1\tthe blick\t1\tblick\tblick%1\nq1\tthe blick\t1\tblick\tblick%1\n",
        )
        assert main(["train", "-c", str(config), "--epochs", "0"]) == 0
        assert main(["build", "-c", str(config)]) == 0
        assert main(["predict", "-c", str(config)]) == 2
        assert "duplicate instance id" in capsys.readouterr().err

    def test_eval_missing_predictions_file(self, workspace, capsys):
        tmp_path, config = workspace
        assert main(["eval", "-c", str(config)]) == 2
        assert "cannot read predictions" in capsys.readouterr().err

    def test_eval_perfect_score(self, workspace, capsys):
        tmp_path, config = workspace
        _write(tmp_path / "pred.tsv", "q1\tblick%1\nq2\tblick%2\n")
        assert main(["eval", "-c", str(config)]) == 0
        assert "micro_f1 1.0000" in capsys.readouterr().out

    def test_window_cap_flows_into_build(self, workspace):
        import dataclasses

        import numpy as np

        from fofe_wsd.corpus import read_labeled_corpus

        tmp_path, config = workspace
        assert main(["train", "-c", str(config), "--window-cap", "1"]) == 0
        assert main(["build", "-c", str(config), "--window-cap", "1"]) == 0
        store = wsd.load_store(tmp_path / "store.fwsd")
        model = lm.load_checkpoint(tmp_path / "model.fofe")
        model.config = dataclasses.replace(model.config, window_cap=1)
        first = read_labeled_corpus(tmp_path / "train.tsv")[0]
        expected = lm.context_embedding(model, first.tokens, first.target_index)
        stored = store.pairs[first.lemma][0][1]
        assert np.allclose(stored, expected, atol=1e-6)


class TestGenSynthetic:
    def test_writes_all_files(self, tmp_path):
        outdir = tmp_path / "synth"
        assert main(["gen-synthetic", "--outdir", str(outdir), "--seed", "3"]) == 0
        for name in ("corpus.txt", "train.tsv", "test.tsv", "inventory.tsv", "run.conf"):
            assert (outdir / name).exists(), name
        assert len((outdir / "train.tsv").read_text().splitlines()) == 200
        assert len((outdir / "test.tsv").read_text().splitlines()) == 100

    def test_deterministic_per_seed(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["gen-synthetic", "--outdir", str(a), "--seed", "9"]) == 0
        assert main(["gen-synthetic", "--outdir", str(b), "--seed", "9"]) == 0
        assert (a / "corpus.txt").read_bytes() == (b / "corpus.txt").read_bytes()
        assert (a / "train.tsv").read_bytes() == (b / "train.tsv").read_bytes()

    def test_sizes_configurable(self, tmp_path):
        outdir = tmp_path / "synth"
        assert main(["gen-synthetic", "--outdir", str(outdir), "--train-n", "10", "--test-n", "4"]) == 0
        assert len((outdir / "train.tsv").read_text().splitlines()) == 10
        assert len((outdir / "test.tsv").read_text().splitlines()) == 4


class TestEntryPoints:
    def test_help_returns_zero(self):
        assert main(["--help"]) == 0

    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "fofe_wsd", "encode", "--tokens", "a b c", "--alpha", "0.7"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert proc.stdout.strip() == "0.49 0.7 1"

    def test_missing_subcommand(self, capsys):
        assert main([]) == 1
