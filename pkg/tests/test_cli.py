import json
import subprocess
import sys

import pytest

from mebn import cli
from mebn.battlefield import BatchError, ScenarioConfig, dumps_reports, generate_scenario, read_truth
from mebn.battlefield import domain_kb_text
from mebn.bn import InconsistentEvidenceError

HEADER = "report_id,time_s,x_m,y_m,vehicle_type,type_conf,activity,activity_conf\n"


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def read_tsv(path):
    out = {}
    for line in path.read_text().splitlines():
        node, state, p = line.split("\t")
        out.setdefault(node, {})[state] = float(p)
    return out


@pytest.fixture(scope="module")
def one_company(tmp_path_factory):
    d = tmp_path_factory.mktemp("one")
    assert run_cli("simulate", "--out", d, "--companies", 1, "--noise", 0, "--miss-rate", 0,
                   "--clutter-rate", 0, "--seed", 4) == 0
    assert run_cli("run", "--reports", d / "reports.csv", "--out", d / "run", "--query", "CoSubType(?)") == 0
    return d


# -- validate ------------------------------------------------------------------------

def test_validate_bundled(capsys):
    assert run_cli("validate") == 0
    assert "OK" in capsys.readouterr().out


def test_validate_violation_and_io(tmp_path, capsys):
    bad = domain_kb_text() + "\nfragment FX (u:Unit) {\n  resident PltSubType(u) ;\n  cpt PltSubType : [0.25, 0.25, 0.25, 0.25] ;\n}\n"
    (tmp_path / "bad.txt").write_text(bad)
    assert run_cli("validate", tmp_path / "bad.txt") == 1
    assert capsys.readouterr().out.strip()
    assert run_cli("validate", tmp_path / "missing.txt") == 2
    (tmp_path / "garbled.txt").write_text("entity ;;; nonsense")
    assert run_cli("validate", tmp_path / "garbled.txt") == 2
    assert "line 1" in capsys.readouterr().err


# -- simulate --------------------------------------------------------------------------

def test_simulate_writes_files(tmp_path, capsys):
    assert run_cli("simulate", "--out", tmp_path, "--seed", 3) == 0
    out = capsys.readouterr().out
    assert out.startswith("companies=5 ")
    sc = generate_scenario(ScenarioConfig(seed=3))
    assert (tmp_path / "reports.csv").read_text() == dumps_reports(sc.reports)
    assert len(read_truth(tmp_path / "truth.txt").companies) == 5


def test_simulate_zero_companies_and_bad_args(tmp_path):
    assert run_cli("simulate", "--out", tmp_path, "--companies", 0) == 0
    assert (tmp_path / "reports.csv").read_text() == HEADER
    assert run_cli("simulate", "--out", tmp_path, "--noise", 1.5) == 2


# -- run -------------------------------------------------------------------------------

def test_run_outputs(one_company):
    run = one_company / "run"
    for name in ("cycles.log", "situation.txt", "situation.json", "posteriors.tsv", "query_1.tsv"):
        assert (run / name).exists(), name
    truth = read_truth(one_company / "truth.txt")
    est = read_truth(run / "situation.txt")
    assert len(est.companies) == 1
    q = read_tsv(run / "query_1.tsv")
    (node,) = q
    best = max(q[node], key=q[node].get)
    assert best == truth.companies[0].subtype
    assert sum(q[node].values()) == pytest.approx(1.0)
    log = (run / "cycles.log").read_text()
    assert log.startswith("CONFIG ") and "CYCLE 1 | suggestors_fired=platoon,company" in log
    assert "wall_ms" not in log


def test_run_is_deterministic(one_company, tmp_path):
    assert run_cli("run", "--reports", one_company / "reports.csv", "--out", tmp_path,
                   "--query", "CoSubType(?)") == 0
    for name in ("cycles.log", "situation.txt", "situation.json", "posteriors.tsv", "query_1.tsv"):
        assert (tmp_path / name).read_bytes() == (one_company / "run" / name).read_bytes()


def test_query_from_saved_situation(one_company, capsys):
    capsys.readouterr()
    assert run_cli("query", one_company / "run" / "situation.json", "--target", "CoSubType(?)") == 0
    out = capsys.readouterr().out
    assert out == (one_company / "run" / "query_1.tsv").read_text()


def test_tiny_prune_threshold_empties_situation(one_company, tmp_path):
    assert run_cli("run", "--reports", one_company / "reports.csv", "--out", tmp_path,
                   "--prune-threshold", 0.0001, "--query", "CoSubType(?)") == 0
    # only near-certain instances survive
    base = json.loads((one_company / "run" / "situation.json").read_text())["instances"]
    kept = json.loads((tmp_path / "situation.json").read_text())["instances"]
    assert len(kept.get("Unit", [])) < len(base["Unit"])
    assert len(read_truth(tmp_path / "situation.txt").platoons) < len(base["Unit"])


MICRO = HEADER + "".join(
    f"{i},{t},{x},{y},tank,0.9,moving,0.9\n"
    for i, (t, x, y) in enumerate(
        [(0, 0, 0), (0, 30, 0), (0, 0, 30), (0, 30, 30), (60, 400, 0), (60, 430, 0), (60, 400, 30), (60, 430, 30)], 1)
)


def test_micro_scenario_multi_mode_logs_candidates(tmp_path):
    (tmp_path / "r.csv").write_text(MICRO)
    assert run_cli("run", "--reports", tmp_path / "r.csv", "--out", tmp_path / "o",
                   "--association-mode", "multi") == 0
    log = (tmp_path / "o" / "cycles.log").read_text()
    assert "CYCLE 2" in log
    assert "ASSOC U(r2) candidates=u1,u2" in log


def test_guard_breach_exit_code(tmp_path, capsys):
    (tmp_path / "r.csv").write_text(MICRO)
    assert run_cli("run", "--reports", tmp_path / "r.csv", "--out", tmp_path / "o", "--max-iterations", 1) == 4
    assert "guard" in capsys.readouterr().err
    assert "GUARD" in (tmp_path / "o" / "cycles.log").read_text()
    assert (tmp_path / "o" / "situation.json").exists()


def test_inconsistent_batch_exit_code(tmp_path, monkeypatch, capsys):
    (tmp_path / "r.csv").write_text(MICRO)

    def boom(kb, reports, cfg, on_cycle):
        raise BatchError(2, InconsistentEvidenceError("P(evidence) = 0"))

    monkeypatch.setattr(cli, "run_pipeline", boom)
    assert run_cli("run", "--reports", tmp_path / "r.csv", "--out", tmp_path / "o") == 3
    assert "inconsistent evidence in batch 2" in capsys.readouterr().err


def test_query_contradictory_evidence_exit_code(one_company, tmp_path, capsys):
    # no platoon type can produce an "armor" report
    kb = domain_kb_text()
    for row, new in (("armor", "0.0, 0.9"), ("mech", "0.0, 0.9"), ("armorHQ", "0.0, 0.05, 0.9"),
                     ("mechHQ", "0.0, 0.05, 0.05, 0.9")):
        start = kb.index(f"cpt RepPltSubType | PltSubType={row} : [") + len(f"cpt RepPltSubType | PltSubType={row} : [")
        end = kb.index("]", start)
        tail = [x.strip() for x in kb[start:end].split(",")]
        vals = new.split(", ") + tail[len(new.split(", ")):]
        kb = kb[:start] + ", ".join(vals) + kb[end:]
    (tmp_path / "kb.txt").write_text(kb)
    assert run_cli("validate", tmp_path / "kb.txt") == 0
    sit = one_company / "run" / "situation.json"
    rid = json.loads(sit.read_text())["instances"]["Report"][0]
    args = ["query", sit, "--kb", tmp_path / "kb.txt", "--target", "CoSubType(?)",
            "--evidence", f"RepPltSubType({rid})=armor"]
    capsys.readouterr()
    assert run_cli(*args) == 3
    assert "error:" in capsys.readouterr().err


def test_run_config_file(one_company, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# settings\nreports = {one_company / 'reports.csv'} ;\nout = {tmp_path / 'o'} ;\n"
                   "gate_radius = 400 ; star_prior.Company = 0.3 ;\nassociation_mode = multi ;\n")
    assert run_cli("run", "--config", cfg, "--gate-radius", 450) == 0
    log = (tmp_path / "o" / "cycles.log").read_text()
    assert "CONFIG gate_radius=450.0" in log  # flag beats file
    assert "CONFIG association_mode=multi" in log and "CONFIG star_prior.Company=0.3" in log
    cfg.write_text("gate_radius = wide ;")
    assert run_cli("run", "--config", cfg) == 2
    cfg.write_text("bogus = 1 ;")
    assert run_cli("run", "--config", cfg) == 2


def test_parse_run_config():
    got = cli.parse_run_config("a_comment = 1 ; # ignored\n".replace("a_comment = 1 ;", "") +
                               "lazy_expansion = yes ; max_iterations = 3 ; star_prior.Unit = 0.2 ;")
    assert got == {"lazy_expansion": True, "max_iterations": 3, "star_priors": {"Unit": 0.2}}
    with pytest.raises(ValueError, match="statement 1"):
        cli.parse_run_config("gate_radius 3 ;")


def test_run_missing_inputs(tmp_path):
    assert run_cli("run", "--out", tmp_path) == 2
    assert run_cli("run", "--reports", tmp_path / "none.csv", "--out", tmp_path) == 2
    (tmp_path / "r.csv").write_text(MICRO)
    assert run_cli("run", "--reports", tmp_path / "r.csv", "--out", tmp_path, "--prune-threshold", 2) == 2


# -- score -----------------------------------------------------------------------------

def test_score_identity_and_empty(one_company, tmp_path, capsys):
    truth = one_company / "truth.txt"
    capsys.readouterr()
    assert run_cli("score", truth, truth) == 0
    rows = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert float(rows["detection_rate"]) == 1.0 and float(rows["subtype_accuracy"]) == 1.0
    (tmp_path / "empty.txt").write_text("")
    assert run_cli("score", tmp_path / "empty.txt", truth) == 0
    rows = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert float(rows["detection_rate"]) == 0.0
    assert run_cli("score", tmp_path / "nope.txt", truth) == 2
    assert run_cli("score", truth, truth, "--match-radius", 0) == 2


def test_entry_point_module():
    res = subprocess.run([sys.executable, "-m", "mebn.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate" in res.stdout
