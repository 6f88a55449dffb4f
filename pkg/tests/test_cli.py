import csv
import json
from fractions import Fraction
from pathlib import Path

import pytest

from soficperm.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def cfg(name: str) -> str:
    return str(CONFIGS / f"{name}.json")


def rows_of(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *argv, name="out.csv"):
    out = tmp_path / name
    code = main([*argv, "--out", str(out)])
    return code, out


def test_exact_moment_identity(tmp_path):
    code, out = run(tmp_path, "exact-moment", "--config", cfg("identity_spec"))
    assert code == 0
    (row,) = rows_of(out)
    assert row["exact"] == "1" and row["brute_force"] == "1"


def test_exact_moment_random_json(tmp_path):
    code, out = run(tmp_path, "exact-moment", "--config", cfg("random_specs"), "--seed", "11",
                    "--format", "json", name="o.json")
    assert code == 0
    rows = json.loads(out.read_text())["rows"]
    assert len(rows) == 50 and all(r["exact"] == r["brute_force"] for r in rows)
    assert all(r["spec_seed"].startswith("11:") for r in rows)


def test_mc_moment(tmp_path):
    code, out = run(tmp_path, "mc-moment", "--config", cfg("swap_spec"), "--seed", "3", "--samples", "500")
    assert code == 0
    (row,) = rows_of(out)
    assert row["samples"] == "500" and row["seed"].startswith("3:")


def test_bound_check_trace_zero(tmp_path):
    code, out = run(tmp_path, "bound-check", "--config", cfg("trace_zero"))
    assert code == 0
    rows = rows_of(out)
    # E tr(C U C^2 U*) with trace-zero cycles: 1/(d-1)
    assert [Fraction(r["exact"]) for r in rows] == [Fraction(1, 7), Fraction(1, 15), Fraction(1, 31)]
    assert all(r["trace_zero_ok"] == "true" for r in rows)


def test_partition_lemmas(tmp_path):
    code, out = run(tmp_path, "partition-lemmas", "--max-2n", "6", "--samples", "20", "--seed", "1")
    assert code == 0
    rows = rows_of(out)
    assert all(r["failures"] == "0" for r in rows)
    assert {r["check"] for r in rows} == {"rs1", "rs0", "half_join", "gamma_join", "s_sum_cap"}


def test_partition_lemmas_rejects_odd(tmp_path):
    assert run(tmp_path, "partition-lemmas", "--max-2n", "5")[0] == 2


def test_sofic_check_cyclic(tmp_path):
    code, out = run(tmp_path, "sofic-check", "--config", cfg("cyclic_action"))
    assert code == 0
    (row,) = rows_of(out)
    assert row["epsilon"] == "0" and row["min_dist_nontrivial"] == "1"


def test_sofic_check_truncated_shift(tmp_path):
    code, out = run(tmp_path, "sofic-check", "--config", cfg("truncated_shift"))
    assert code == 0
    for r in rows_of(out):
        assert Fraction(r["multiplicativity_defect"]) == Fraction(r["closed_form"]) == Fraction(6, int(r["degree"]))


def test_tile_check(tmp_path):
    code, out = run(tmp_path, "tile-check", "--config", cfg("interval_tile"))
    assert code == 0
    (row,) = rows_of(out)
    assert row["injective"] == row["covers"] == "true"


def test_amalgam_builtin(tmp_path):
    code, out = run(tmp_path, "amalgam", "--config", "builtin:infinite_dihedral", "--samples", "50")
    assert code == 0
    summary = json.loads(out.with_suffix(".summary.json").read_text())
    assert summary["pass"] and summary["z_sizes"] == [256] and summary["master_seed"] == 20240601


def test_freeness_sweep(tmp_path):
    code, out = run(tmp_path, "freeness-sweep", "--config", cfg("commutator_sweep"), "--samples", "300", "--seed", "4")
    assert code == 0
    rows = rows_of(out)
    assert [r["d"] for r in rows] == ["50", "200", "800"]


def test_family_checks(tmp_path):
    assert run(tmp_path, "family-check", "--config", cfg("cycle_family"))[0] == 0
    code, out = run(tmp_path, "family-check", "--config", cfg("transposition_family"), name="t.csv")
    assert code == 1
    traces = [r for r in rows_of(out) if r["kind"] == "trace"]
    assert {r["value"] for r in traces} >= {"3/4", "7/8"}


@pytest.mark.parametrize("argv, code", [
    (["exact-moment"], 2),
    (["no-such-command"], 2),
    (["mc-moment", "--config", cfg("identity_spec")], 2),
    (["exact-moment", "--config", "builtin:missing"], 2),
    (["amalgam", "--config", cfg("misaligned"), "--seed", "1"], 4),
])
def test_exit_codes(argv, code):
    assert main(argv) == code


def test_malformed_and_empty_word(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["exact-moment", "--config", str(bad)]) == 2
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"word": "x1 x1^-1", "degrees": [10]}))
    assert main(["freeness-sweep", "--config", str(empty), "--seed", "1"]) == 2


def test_budget_exit(tmp_path, monkeypatch):
    monkeypatch.setenv("SOFICPERM_BUDGET", "10")
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"degree": 12, "matrices": [list(range(12))] * 4}))
    assert main(["exact-moment", "--config", str(spec)]) == 3


@pytest.mark.parametrize("command, config, extra", [
    ("mc-moment", "random_specs", ["--samples", "200"]),
    ("freeness-sweep", "mixed_sweep", ["--samples", "200"]),
    ("amalgam", "builtin:infinite_dihedral", ["--samples", "40"]),
])
def test_worker_count_does_not_change_output(tmp_path, command, config, extra):
    ref = config if config.startswith("builtin:") else cfg(config)
    outs = []
    for w in ("1", "4"):
        out = tmp_path / f"w{w}.csv"
        main([command, "--config", ref, "--seed", "99", "--workers", w, "--out", str(out), *extra])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] and outs[0]


def test_sofic_check_serialized_table(tmp_path):
    code, out = run(tmp_path, "sofic-check", "--config", cfg("z3_table"))
    assert code == 0
    (row,) = rows_of(out)
    assert row["epsilon"] == "0" and row["F_size"] == "3"
    partial = tmp_path / "partial.json"
    data = json.loads(Path(cfg("z3_table")).read_text())
    partial.write_text(json.dumps({"quasi_action": {**data, "domain": [0, 1], "table": data["table"][:2]}}))
    # the quotient of 1 by 0 is 2, which the table does not cover
    assert main(["sofic-check", "--config", str(partial)]) == 2
