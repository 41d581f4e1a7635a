from pathlib import Path

import pytest

from xmpusim.cli import main as cli_main
from xmpusim.errors import MissingGolden
from xmpusim.scenario import (RunOptions, ScenarioRunner, parse_scenario,
                              report_text, run_scenario)
from xmpusim.transcript import compare_transcript

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
GOLDEN_DIR = SCENARIO_DIR / "golden"

SHIPPED = sorted(p.name for p in SCENARIO_DIR.glob("*.scn")
                 if not p.name.startswith("_"))


def run(name, **kwargs):
    return run_scenario(SCENARIO_DIR / name, RunOptions(**kwargs) if kwargs else None)


# -- parsing ------------------------------------------------------------------

def test_empty_script_runs_clean(tmp_path):
    script = tmp_path / "empty.scn"
    script.write_text("# nothing but comments\n\n")
    result = run_scenario(script)
    assert result.exit_code == 0
    assert result.transcript == ""


def test_unknown_verb_is_a_parse_error(tmp_path):
    script = tmp_path / "bad.scn"
    script.write_text("# header\nfrobnicate 1 2 3\n")
    result = run_scenario(script)
    assert result.exit_code == 2
    assert "frobnicate" in result.error
    assert "bad.scn:2" in result.error


def test_missing_include_reports_location(tmp_path):
    script = tmp_path / "inc.scn"
    script.write_text("include nowhere.scn\n")
    result = run_scenario(script)
    assert result.exit_code == 2
    assert "inc.scn:1" in result.error


def test_assertion_failure_reports_first_failing_step(tmp_path):
    script = tmp_path / "fail.scn"
    script.write_text(
        "region R 0x1000 0x1000 DDR\n"
        "master APU 0x060 secure\n"
        "xmpu MPU 0x1000 0x1000\n"
        "assert_read APU 0x1000 == 0xDEAD0001\n"
        "say never reached\n")
    result = run_scenario(script)
    assert result.exit_code == 1
    assert "fail.scn:4" in result.error
    assert "never reached" not in result.transcript


def test_banner_preserves_leading_spaces(tmp_path):
    script = tmp_path / "banner.scn"
    script.write_text("banner    three leading spaces\nbanner\n")
    result = run_scenario(script)
    assert result.transcript == "   three leading spaces\n\n"


def test_expect_error_verb(tmp_path):
    script = tmp_path / "xerr.scn"
    script.write_text(
        "region R 0x1000 0x1000 DDR\n"
        "master APU 0x060 secure\n"
        "xmpu MPU 0x1000 0x1000\n"
        "expect_error Misaligned issue APU read 0x1002\n")
    assert run_scenario(script).exit_code == 0


def test_pid_seed_cannot_move_backwards(tmp_path):
    script = tmp_path / "seed.scn"
    script.write_text("pid_seed 2000\npid_seed 1500\n")
    result = run_scenario(script)
    assert result.exit_code == 1


# -- golden comparison ----------------------------------------------------------

def test_compare_transcript_identical(tmp_path):
    golden = tmp_path / "g.txt"
    golden.write_text("line one\nline two\n")
    assert compare_transcript("line one\nline two \n", golden) is None


def test_compare_transcript_single_flip(tmp_path):
    golden = tmp_path / "g.txt"
    golden.write_text("Reading X ...  PASS!\nReading Y ...  PASS!\n")
    diff = compare_transcript("Reading X ...  PASS!\nReading Y ...  FAILED!\n", golden)
    changed = [l for l in diff.splitlines() if l.startswith(("+Reading", "-Reading"))]
    assert len(changed) == 2  # one removed line, one added line


def test_compare_transcript_missing_golden(tmp_path):
    with pytest.raises(MissingGolden):
        compare_transcript("x", tmp_path / "nope.txt")


# -- shipped scenario library ------------------------------------------------------

@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scenario_passes(name):
    result = run(name)
    assert result.exit_code == 0, result.error


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scenario_matches_golden(name):
    result = run(name)
    golden = GOLDEN_DIR / (Path(name).stem + ".txt")
    assert compare_transcript(result.transcript, golden) is None


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_scenario_deterministic(name):
    first = run(name)
    second = run(name)
    assert first.transcript == second.transcript
    assert first.report == second.report


def test_scenario_library_covers_required_figures():
    stems = {Path(n).stem for n in SHIPPED}
    assert {"fig_a1_watermark", "fig_a2_denial", "fig_a3_disclosure",
            "fig_a4_full", "fig5_smid_swap", "pipeline_ffffffff",
            "pipeline_55555555"} <= stems
    assert {s for s in stems if s.startswith("mitigated_")} >= {
        "mitigated_fig_a2", "mitigated_fig_a3", "mitigated_fig5",
        "mitigated_pipeline", "mitigated_a11"}


def test_fig_a4_verdict_sequence_matches_published_figure():
    """PASS/FAILED sequence transcribed from the three-phase sweep figure."""
    result = run("fig_a4_full.scn")
    verdicts = []
    for line in result.transcript.splitlines():
        s = line.rstrip()
        if s.endswith("PASS!"):
            verdicts.append("P")
        elif s.endswith("FAILED!"):
            verdicts.append("F")
        elif s.endswith("collision!"):
            verdicts.append("S")
    phase1 = "PPPP" + "PPPPPP" + "PPPP" + "PPPSPP" + "PP" + "PPP" + "PPPP" + "P"
    phase2 = "FFFF" + "FFFFFF" + "PPPP" + "PPPSPP" + "PP" + "PPP" + "FFFF" + "P"
    assert "".join(verdicts) == phase1 + phase2 + phase1


def test_fig_a2_has_exactly_six_failed_lines():
    result = run("fig_a2_denial.scn")
    failed = [l for l in result.transcript.splitlines() if l.endswith("FAILED!")]
    assert len(failed) == 6


# -- reports ---------------------------------------------------------------------

def test_unmitigated_pipeline_report():
    report = run("pipeline_ffffffff.scn").report
    assert report["residue_words_disclosed"] == 131
    assert report["sanitize_cycles"] == 0
    assert report["profiles_matched"] == 1


def test_mitigated_pipeline_report():
    report = run("mitigated_pipeline.scn").report
    assert report["residue_words_disclosed"] == 0
    assert report["sanitize_cycles"] == 11577344
    assert report["profiles_matched"] == 0


def test_victim_active_run_counts_denials():
    report = run("fig_a2_denial.scn").report
    assert report["denials"] == 6


def test_policy_override_applies_to_identical_script():
    by_terminate = run("mitigated_pipeline.scn", policy="terminate")
    by_reassign = run("mitigated_pipeline.scn", policy="reassign")
    assert by_terminate.exit_code == 0
    assert by_reassign.exit_code == 0
    assert by_terminate.report == by_reassign.report


def test_report_text_formats():
    report = {"denials": 6, "residue_words_disclosed": 0,
              "sanitize_cycles": 0, "profiles_matched": 0}
    assert report_text(report, "structured").splitlines()[0] == "denials=6"
    assert report_text(report, "text").splitlines()[0] == "denials: 6"


# -- CLI -----------------------------------------------------------------------

def test_cli_run_and_verify(capsys):
    script = str(SCENARIO_DIR / "fig_a2_denial.scn")
    golden = str(GOLDEN_DIR / "fig_a2_denial.txt")
    assert cli_main(["run", script, "--quiet"]) == 0
    assert cli_main(["verify", script, "--golden", golden]) == 0
    assert capsys.readouterr().out.strip().endswith("OK")


def test_cli_verify_detects_drift(tmp_path, capsys):
    script = str(SCENARIO_DIR / "fig_a2_denial.scn")
    golden = tmp_path / "stale.txt"
    golden.write_text("something else\n")
    assert cli_main(["verify", script, "--golden", str(golden)]) == 1


def test_cli_report(capsys):
    script = str(SCENARIO_DIR / "fig_a2_denial.scn")
    assert cli_main(["report", script, "--format", "structured"]) == 0
    out = capsys.readouterr().out
    assert "denials=6" in out


def test_cli_parse_error_exit_code(tmp_path):
    script = tmp_path / "bad.scn"
    script.write_text("nonsense\n")
    assert cli_main(["run", str(script), "--quiet"]) == 2
