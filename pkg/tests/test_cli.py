import json

import pytest

from nextstep.cli import run
from nextstep.core import save_taxonomy
from nextstep.evaluator import ScoreParams, detect_reorientations, evaluate, histogram_csv
from nextstep.ingest import write_corpus
from nextstep.predictor import FrequencyModel, Method, rank, train

from util import D, J, taxonomy, user

DT = taxonomy(D, 3)
JT = taxonomy(J, 5)


def small_corpus():
    return [
        user("u1", [("d", [0]), ("j", [4]), ("j", [0])], DT, JT),
        user("u2", [("d", [0]), ("j", [4]), ("j", [0])], DT, JT),
        user("u3", [("d", [0]), ("j", [1]), ("j", [3])], DT, JT),
        user("u4", [("d", [1]), ("j", [1]), ("j", [3])], DT, JT),
        user("u5", [("d", [0]), ("d", [1]), ("j", [0])], DT, JT),
    ]


@pytest.fixture
def data(tmp_path):
    """Corpus and taxonomy files plus the flags pointing at them."""
    dpath = tmp_path / "dtax.csv"
    jpath = tmp_path / "jtax.csv"
    cpath = tmp_path / "corpus.jsonl"
    save_taxonomy(DT, dpath)
    save_taxonomy(JT, jpath)
    write_corpus(small_corpus(), cpath)
    flags = [
        "--corpus", str(cpath),
        "--taxonomy-diploma", str(dpath),
        "--taxonomy-job", str(jpath),
    ]
    return tmp_path, flags


class TestTopLevel:
    def test_no_command_is_a_usage_error(self, capsys):
        assert run([]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_help_exits_zero(self, capsys):
        assert run(["-h"]) == 0
        assert run(["evaluate", "-h"]) == 0
        capsys.readouterr()

    def test_unknown_command(self, capsys):
        assert run(["transmogrify"]) == 1
        capsys.readouterr()

    def test_bad_choice_value(self, data, capsys):
        _, flags = data
        assert run(["evaluate", *flags, "--kind", "job", "--method", "bogus"]) == 1
        capsys.readouterr()


class TestGen:
    def test_deterministic_files(self, tmp_path, capsys):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        assert run(["gen", "--seed", "5", "--users", "12", "--out", str(a)]) == 0
        assert run(["gen", "--seed", "5", "--users", "12", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 12
        record = json.loads(lines[0])
        assert set(record) == {"user_id", "steps", "skills"}
        capsys.readouterr()

    def test_stdout_matches_file_output(self, tmp_path, capsys):
        out = tmp_path / "c.jsonl"
        assert run(["gen", "--seed", "5", "--users", "12", "--out", str(out)]) == 0
        assert run(["gen", "--seed", "5", "--users", "12"]) == 0
        assert capsys.readouterr().out == out.read_text(encoding="utf-8")

    def test_seed_changes_output(self, tmp_path, capsys):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        run(["gen", "--seed", "1", "--users", "10", "--out", str(a)])
        run(["gen", "--seed", "2", "--users", "10", "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()
        capsys.readouterr()


class TestIngest:
    def test_json_stats(self, data, capsys):
        _, flags = data
        assert run(["ingest", *flags, "--json"]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats == {
            "users": 5,
            "steps": 15,
            "diploma_steps": 6,
            "job_steps": 9,
            "mean_steps_per_user": 3.0,
            "dropped_profiles": 0,
            "dropped_steps": 0,
        }

    def test_text_stats(self, data, capsys):
        _, flags = data
        assert run(["ingest", *flags]) == 0
        out = capsys.readouterr().out
        assert "users" in out
        assert "3.000" in out  # floats printed with three decimals

    def test_dropped_profile_counted(self, data, capsys):
        tmp_path, flags = data
        corpus = small_corpus()
        short = user("u6", [("d", [0]), ("j", [1])], DT, JT)
        path = tmp_path / "with_short.jsonl"
        write_corpus(corpus + [short], path)
        flags = ["--corpus", str(path)] + flags[2:]
        assert run(["ingest", *flags, "--json"]) == 0
        stats = json.loads(capsys.readouterr().out)
        assert stats["dropped_profiles"] == 1
        assert stats["users"] == 5

    def test_missing_corpus_flag(self, data, capsys):
        _, flags = data
        assert run(["ingest", *flags[2:]]) == 1
        assert "corpus" in capsys.readouterr().err

    def test_missing_corpus_file(self, data, capsys):
        tmp_path, flags = data
        flags = ["--corpus", str(tmp_path / "nope.jsonl")] + flags[2:]
        assert run(["ingest", *flags]) == 2
        capsys.readouterr()

    def test_malformed_corpus_file(self, data, capsys):
        tmp_path, flags = data
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{not json\n", encoding="utf-8")
        flags = ["--corpus", str(bad)] + flags[2:]
        assert run(["ingest", *flags]) == 2
        assert "error" in capsys.readouterr().err


class TestTrain:
    def test_dump_matches_library(self, data, capsys):
        tmp_path, flags = data
        out = tmp_path / "model.json"
        argv = ["train", *flags, "--kind", "job", "--method", "previous",
                "--out", str(out)]
        assert run(argv) == 0
        expected = train(small_corpus(), J, Method.PREVIOUS_STEP).dump_json()
        assert out.read_text(encoding="utf-8") == expected
        capsys.readouterr()

    def test_stdout_and_determinism(self, data, capsys):
        _, flags = data
        argv = ["train", *flags, "--kind", "job", "--method", "previous"]
        assert run(argv) == 0
        first = capsys.readouterr().out
        assert run(argv) == 0
        assert capsys.readouterr().out == first
        FrequencyModel.load_json(first)  # parses back cleanly

    def test_missing_kind(self, data, capsys):
        _, flags = data
        assert run(["train", *flags, "--method", "previous"]) == 1
        assert "--kind" in capsys.readouterr().err

    def test_empty_corpus_is_a_data_error(self, data, capsys):
        tmp_path, flags = data
        empty = tmp_path / "empty.jsonl"
        empty.write_text("", encoding="utf-8")
        flags = ["--corpus", str(empty)] + flags[2:]
        assert run(["train", *flags, "--kind", "job", "--method", "previous"]) == 2
        capsys.readouterr()


class TestPredict:
    @pytest.fixture
    def model_file(self, data):
        tmp_path, flags = data
        out = tmp_path / "model.json"
        run(["train", *flags, "--kind", "job", "--method", "previous",
             "--out", str(out)])
        return out

    def test_json_from_model_file(self, data, model_file, capsys):
        _, flags = data
        argv = ["predict", "--model", str(model_file),
                "--taxonomy-job", flags[5],
                "--context", "diploma:0", "--json"]
        assert run(argv) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["target_kind"] == "job"
        assert body["backed_off"] is False
        assert [h["index"] for h in body["hypotheses"]] == [4, 1, 0, 3, 2]
        assert [h["rank"] for h in body["hypotheses"]] == [1, 2, 3, 4, 5]
        assert body["hypotheses"][0]["count"] == 2

    def test_json_from_corpus(self, data, capsys):
        _, flags = data
        argv = ["predict", *flags, "--kind", "job", "--method", "previous",
                "--context", "diploma:0", "--json"]
        assert run(argv) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["method"] == "previous"
        assert [h["index"] for h in body["hypotheses"]] == [4, 1, 0, 3, 2]

    def test_text_output(self, data, capsys):
        _, flags = data
        argv = ["predict", *flags, "--kind", "job", "--method", "previous",
                "--context", "diploma:0"]
        assert run(argv) == 0
        out = capsys.readouterr().out
        assert "  1. job-c4  (2)" in out
        assert "  2. job-c1  (1)" in out

    def test_backoff_note(self, data, capsys):
        _, flags = data
        argv = ["predict", *flags, "--kind", "job", "--method", "previous",
                "--context", "diploma:2"]
        assert run(argv) == 0
        assert "popularity" in capsys.readouterr().out

    def test_top_limits_the_list(self, data, capsys):
        _, flags = data
        argv = ["predict", *flags, "--kind", "job", "--method", "previous",
                "--top", "2", "--json"]
        assert run(argv) == 0
        body = json.loads(capsys.readouterr().out)
        assert len(body["hypotheses"]) == 2

    def test_top_must_be_positive(self, data, capsys):
        _, flags = data
        argv = ["predict", *flags, "--kind", "job", "--method", "previous",
                "--top", "0"]
        assert run(argv) == 1
        capsys.readouterr()

    def test_bad_context_strings(self, data, capsys):
        _, flags = data
        base = ["predict", *flags, "--kind", "job", "--method", "previous"]
        for bad in ("diploma", "degree:0", "diploma:9", "diploma:x"):
            assert run(base + ["--context", bad]) == 1
        capsys.readouterr()

    def test_method_required_without_model(self, data, capsys):
        _, flags = data
        assert run(["predict", *flags, "--kind", "job"]) == 1
        capsys.readouterr()


class TestEvaluate:
    def expected_report(self, method=Method.PREVIOUS_STEP, **kwargs):
        return evaluate(small_corpus(), J, method, ScoreParams(),
                        taxonomy=JT, **kwargs)

    def test_table_row_format(self, data, capsys):
        _, flags = data
        argv = ["evaluate", *flags, "--kind", "job", "--method", "previous"]
        assert run(argv) == 0
        out = capsys.readouterr().out
        report = self.expected_report()
        expected_row = (
            f"PreviousStep | {report.mean_rank:.1f} | {report.mrr:.3f} | "
            f"[{report.ci95[0]:.3f}, {report.ci95[1]:.3f}]"
        )
        assert expected_row in out
        assert out.splitlines()[0].startswith("Method")

    def test_json_single_method(self, data, capsys):
        _, flags = data
        argv = ["evaluate", *flags, "--kind", "job", "--method", "previous",
                "--json"]
        assert run(argv) == 0
        assert json.loads(capsys.readouterr().out) == self.expected_report().to_dict()

    def test_all_methods(self, data, capsys):
        _, flags = data
        argv = ["evaluate", *flags, "--kind", "job", "--method", "all", "--json"]
        assert run(argv) == 0
        body = json.loads(capsys.readouterr().out)
        assert [r["method"] for r in body["reports"]] == [m.value for m in Method]

    def test_method_defaults_to_all(self, data, capsys):
        _, flags = data
        assert run(["evaluate", *flags, "--kind", "job"]) == 0
        out = capsys.readouterr().out
        for name in ("Baseline", "PreviousStep", "NextStepIntent"):
            assert name in out

    def test_histogram_file(self, data, capsys):
        tmp_path, flags = data
        hist = tmp_path / "hist.csv"
        argv = ["evaluate", *flags, "--kind", "job", "--method", "previous",
                "--histogram", str(hist)]
        assert run(argv) == 0
        assert hist.read_text(encoding="utf-8") == histogram_csv(self.expected_report())
        capsys.readouterr()

    def test_histogram_requires_single_method(self, data, capsys):
        tmp_path, flags = data
        hist = tmp_path / "hist.csv"
        argv = ["evaluate", *flags, "--kind", "job", "--method", "all",
                "--histogram", str(hist)]
        assert run(argv) == 1
        capsys.readouterr()

    def test_jobs_flag_does_not_change_output(self, data, capsys):
        _, flags = data
        argv = ["evaluate", *flags, "--kind", "job", "--method", "previous",
                "--json"]
        assert run(argv + ["--jobs", "1"]) == 0
        serial = capsys.readouterr().out
        assert run(argv + ["--jobs", "8"]) == 0
        assert capsys.readouterr().out == serial

    def test_score_flags_are_passed_through(self, data, capsys):
        _, flags = data
        argv = ["evaluate", *flags, "--kind", "job", "--method", "previous",
                "--alpha", "0.3", "--pack-size", "4", "--pack-penalty", "0.5",
                "--rank-mode", "global", "--json"]
        assert run(argv) == 0
        body = json.loads(capsys.readouterr().out)
        params = ScoreParams(alpha=0.3, pack_size=4, pack_penalty=0.5,
                             rank_mode="global")
        expected = evaluate(small_corpus(), J, Method.PREVIOUS_STEP, params,
                            taxonomy=JT)
        assert body == expected.to_dict()

    def test_invalid_score_params_are_a_data_error(self, data, capsys):
        _, flags = data
        argv = ["evaluate", *flags, "--kind", "job", "--method", "previous",
                "--alpha", "0"]
        assert run(argv) == 2
        capsys.readouterr()


class TestReorient:
    def test_json_matches_library(self, data, capsys):
        _, flags = data
        argv = ["reorient", *flags, "--kind", "job", "--method", "previous",
                "--threshold", "1", "--json"]
        assert run(argv) == 0
        body = json.loads(capsys.readouterr().out)
        expected = detect_reorientations(
            small_corpus(), J, Method.PREVIOUS_STEP, ScoreParams(),
            threshold=1, taxonomy=JT,
        )
        assert body == [
            {
                "user_id": f.user_id,
                "step_index": f.step_index,
                "rank_of_truth": f.rank_of_truth,
                "threshold": f.threshold,
            }
            for f in expected
        ]

    def test_text_output(self, data, capsys):
        _, flags = data
        argv = ["reorient", *flags, "--kind", "job", "--method", "previous",
                "--threshold", "1"]
        assert run(argv) == 0
        assert "flagged step(s)" in capsys.readouterr().out


class TestConfigFile:
    def test_config_supplies_flags(self, data, capsys):
        tmp_path, flags = data
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "# evaluation defaults\n"
            "\n"
            f"corpus={flags[1]}\n"
            f"taxonomy-diploma={flags[3]}\n"
            f"taxonomy_job={flags[5]}\n"
            "kind=job\n"
            "method=previous\n"
            "json=true\n",
            encoding="utf-8",
        )
        assert run(["evaluate", "--config", str(cfg)]) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["method"] == "previous"
        assert body["target_kind"] == "job"

    def test_explicit_flags_override_config(self, data, capsys):
        tmp_path, flags = data
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            f"corpus={flags[1]}\n"
            f"taxonomy_diploma={flags[3]}\n"
            f"taxonomy_job={flags[5]}\n"
            "method=baseline\n"
            "json=true\n",
            encoding="utf-8",
        )
        argv = ["evaluate", "--config", str(cfg), "--kind", "job",
                "--method", "previous"]
        assert run(argv) == 0
        assert json.loads(capsys.readouterr().out)["method"] == "previous"

    def test_unknown_key_rejected(self, data, capsys):
        tmp_path, _ = data
        cfg = tmp_path / "run.cfg"
        cfg.write_text("velocity=9\n", encoding="utf-8")
        assert run(["ingest", "--config", str(cfg)]) == 1
        capsys.readouterr()

    def test_line_without_equals_rejected(self, data, capsys):
        tmp_path, _ = data
        cfg = tmp_path / "run.cfg"
        cfg.write_text("just a line\n", encoding="utf-8")
        assert run(["ingest", "--config", str(cfg)]) == 1
        capsys.readouterr()

    def test_missing_config_file(self, capsys):
        assert run(["ingest", "--config", "/no/such/file.cfg"]) == 1
        capsys.readouterr()

    def test_bad_boolean(self, data, capsys):
        tmp_path, _ = data
        cfg = tmp_path / "run.cfg"
        cfg.write_text("json=maybe\n", encoding="utf-8")
        assert run(["ingest", "--config", str(cfg)]) == 1
        capsys.readouterr()


class TestServe:
    def test_serve_invokes_uvicorn(self, data, monkeypatch):
        import uvicorn

        calls = {}

        def fake_run(app, host, port, log_level):
            calls["app"] = app
            calls["host"] = host
            calls["port"] = port
            calls["log_level"] = log_level

        monkeypatch.setattr(uvicorn, "run", fake_run)
        _, flags = data
        assert run(["serve", *flags, "--host", "0.0.0.0", "--port", "9999"]) == 0
        assert calls["host"] == "0.0.0.0"
        assert calls["port"] == 9999
        assert hasattr(calls["app"].state, "store")

    def test_serve_defaults(self, monkeypatch):
        import uvicorn

        calls = {}
        monkeypatch.setattr(
            uvicorn, "run",
            lambda app, host, port, log_level: calls.update(host=host, port=port),
        )
        assert run(["serve"]) == 0
        assert calls == {"host": "127.0.0.1", "port": 8000}
