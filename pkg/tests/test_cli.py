import json

import jsonschema
import pytest

from succinct_qma.cli import (
    CHECK_SUITES,
    ConfigError,
    RunConfig,
    dumps,
    ksv_separation,
    main,
    report_schema,
    run,
    validate_report,
)


def _braiding_rejections(report):
    return sum(report["counts"][t]["trials"] - report["counts"][t]["accepted"]
               for t in ("com", "anticom") if t in report["counts"])


class TestConfig:
    def test_defaults_validate(self):
        RunConfig().validate()

    def test_ini_roundtrip(self):
        cfg = RunConfig(seed=7, n=3, bias=0.25, strict_braiding=True, ns=(16, 64), checks=("gh", "dls"))
        again = RunConfig.from_ini(cfg.to_ini())
        assert again == cfg
        assert again.to_ini() == cfg.to_ini()

    def test_ini_partial_overrides_defaults(self):
        cfg = RunConfig.from_ini("[run]\nseed = 0x10\nns = 16..19\nliteral_ksv = yes\n")
        assert cfg.seed == 16 and cfg.ns == (16, 17, 18, 19) and cfg.literal_ksv
        assert cfg.trials == RunConfig().trials

    @pytest.mark.parametrize("text", [
        "[run]\nbias = 0\n", "[run]\nn = 0\n", "[run]\nhash = md5\n", "[run]\nchecks = nonsense\n",
        "[run]\nunknown_key = 1\n", "[run]\nstrict_braiding = maybe\n", "[run]\nsecparam = 12\n",
        "[run]\nprover = liar\n", "[run]\ntrials = -1\n",
    ])
    def test_rejects_bad_values(self, text):
        with pytest.raises(ConfigError):
            RunConfig.from_ini(text)

    def test_flags_override_file(self, tmp_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[run]\ntrials = 3\nseed = 5\n")
        out = tmp_path / "r.json"
        assert main(["bias-build", "--config", str(ini), "--seed", "9", "--report", str(out)]) == 0
        cfg = json.loads(out.read_text())["config"]
        assert cfg["trials"] == 3 and cfg["seed"] == 9

    def test_bad_flag_exit_code(self, tmp_path):
        assert main(["game", "--bias", "2", "--report", str(tmp_path / "r.json")]) == 2


class TestGame:
    def test_honest_n3_no_braiding_rejections(self):
        rep = run("game", RunConfig(n=3, trials=10_000))
        assert rep["ok"], rep["failures"]
        assert _braiding_rejections(rep) == 0
        assert sum(c["trials"] for c in rep["counts"].values()) == 10_000
        assert rep["exact"]["braiding"] == pytest.approx(1.0, abs=1e-9)

    def test_table_prover_reports_8_9(self):
        rep = run("game", RunConfig(prover="table", trials=50))
        assert rep["exact"]["ms_classical_row_column"] == pytest.approx(8 / 9, abs=1e-15)
        assert rep["exact"]["ms_classical_cell"] == pytest.approx(17 / 18, abs=1e-15)
        assert rep["ok"]

    def test_replay_bit_identical(self):
        cfg = RunConfig(seed=42, n=2, trials=300)
        assert dumps(run("game", cfg)) == dumps(run("game", cfg))

    def test_seed_changes_counts(self):
        a = run("game", RunConfig(seed=1, trials=300))["counts"]
        b = run("game", RunConfig(seed=2, trials=300))["counts"]
        assert a != b

    def test_workers_merge_order_independent(self):
        one = run("game", RunConfig(seed=3, trials=200))
        two = run("game", RunConfig(seed=3, trials=200, workers=2))
        assert one["counts"] == two["counts"]

    def test_strict_mode(self):
        rep = run("game", RunConfig(n=2, trials=300, strict_braiding=True))
        assert rep["ok"] and _braiding_rejections(rep) == 0


class TestCompiled:
    def test_honest_n3_no_braiding_rejections(self):
        rep = run("compiled", RunConfig(n=3, trials=10_000))
        assert rep["ok"], rep["failures"]
        assert _braiding_rejections(rep) == 0
        assert rep["exact"]["compiled_main"] == pytest.approx(rep["exact"]["uncompiled_main"], abs=1e-9)

    def test_table_prover(self):
        rep = run("compiled", RunConfig(prover="table", trials=50))
        assert rep["exact"]["ms_classical_row_column"] == pytest.approx(8 / 9)
        assert rep["exact"]["compiled_main"] == pytest.approx(rep["exact"]["uncompiled_main"], abs=1e-9)

    def test_replay_bit_identical(self):
        cfg = RunConfig(seed=11, trials=200)
        assert dumps(run("compiled", cfg)) == dumps(run("compiled", cfg))


class TestSuccinct:
    def test_fit_and_separation(self):
        rep = run("succinct", RunConfig(trials=10))
        assert rep["ok"], rep["failures"]
        assert rep["exact"]["fit_r2"] >= 0.95
        assert rep["exact"]["total_over_naive"] < 0.01
        assert rep["exact"]["ksv_separation"] >= 0.3
        assert set(rep["bytes"]) >= {"V->P", "P->V"}

    def test_separation_values(self):
        sep = ksv_separation(60)
        assert sep["ksv_yes"] == pytest.approx(0.908, abs=1e-3)
        assert sep["ksv_no"] == pytest.approx(0.110, abs=1e-3)
        # a single block barely separates
        assert ksv_separation(1)["ksv_separation"] < 0.3

    def test_hash_family_choice(self):
        rep = run("succinct", RunConfig(trials=4, hash="hmac-sha256"))
        assert rep["ok"]

    def test_replay_bit_identical(self):
        cfg = RunConfig(seed=5, trials=6)
        assert dumps(run("succinct", cfg)) == dumps(run("succinct", cfg))


class TestBuilders:
    def test_ham_build_recipe(self, tmp_path):
        out = tmp_path / "recipe.json"
        rep = run("ham-build", RunConfig(n=2, t=3, artifact_out=str(out)))
        assert rep["ok"]
        assert [r["step"] for r in rep["details"]["recipe"]] == ["mf", "ksv", "prg"]
        assert json.loads(out.read_text()) == rep["details"]["recipe"]

    def test_ham_build_fidelity_check(self):
        rep = run("ham-build", RunConfig(n=3))
        assert rep["checks"][0]["check"] == "prg_fidelity" and rep["checks"][0]["verdict"] == "pass"

    def test_bias_build(self, tmp_path):
        out = tmp_path / "set.txt"
        rep = run("bias-build", RunConfig(n=10, bias=0.25, artifact_out=str(out)))
        assert rep["ok"] and rep["exact"]["bias"] <= 0.25
        assert len(out.read_text().split()) == rep["exact"]["size"]


class TestChecks:
    def test_default_all_green(self):
        rep = run("checks", RunConfig())
        assert rep["ok"]
        suites = {c["parameters"]["suite"] for c in rep["checks"]}
        assert suites == set(CHECK_SUITES)

    def test_empty_suite(self):
        rep = run("checks", RunConfig(checks=()))
        assert rep["checks"] == [] and rep["ok"]

    def test_failure_injection(self, tmp_path):
        rep = run("checks", RunConfig(checks=("gh",), inject_failure=True))
        assert not rep["ok"]
        assert sum(c["verdict"] == "fail" for c in rep["checks"]) >= 1
        assert main(["checks", "--checks", "gh", "--inject-failure", "--report", str(tmp_path / "r.json")]) == 1


class TestReports:
    def test_schema_is_valid_draft(self):
        jsonschema.Draft202012Validator.check_schema(report_schema())

    @pytest.mark.parametrize("cmd", ["game", "compiled", "succinct", "ham-build", "bias-build", "checks"])
    def test_every_command_validates(self, cmd, tmp_path):
        out = tmp_path / "r.json"
        assert main([cmd, "--trials", "20", "--report", str(out)]) == 0
        validate_report(json.loads(out.read_text()))

    def test_schema_rejects_extra_field(self):
        rep = run("bias-build", RunConfig(n=4))
        rep["surprise"] = 1
        with pytest.raises(jsonschema.ValidationError):
            validate_report(rep)

    def test_timing_opt_in(self):
        assert "wall_clock_s" not in run("bias-build", RunConfig(n=4))
        assert run("bias-build", RunConfig(n=4, timing=True))["wall_clock_s"] >= 0
