import json

import pytest

from divmeasure.config import ExperimentConfig
from divmeasure.experiments import ACCEPTANCE_SUITE, EXPERIMENTS, AcceptanceCase
from divmeasure.export import write_face_table
from divmeasure.flux import CubeLattice, FaceKey, SyntheticFlux, table_frame
from divmeasure.grid import GridSpec
from divmeasure.main import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, build_parser, main
from divmeasure.runner import ExperimentRunner

SMALL_GRID = "[grid]\nlo = -1, -1\nhi = 1, 1\nspacing = 0.03125\n"


def test_every_experiment_has_a_subcommand():
    parser = build_parser()
    for name in list(EXPERIMENTS) + ["all"]:
        args = parser.parse_args([name, "--resolution", "coarse", "--seed", "3"])
        assert args.command == name
        assert args.seed == 3


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["nonsense"])
    assert info.value.code == EXIT_USAGE


def test_bad_config_exits_with_usage_code(tmp_path, capsys):
    config = tmp_path / "bad.ini"
    config.write_text("[field]\nname = nope\n")
    assert main(["lax", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_USAGE
    assert "[field] name" in capsys.readouterr().err


def test_lax_run_writes_report(tmp_path):
    out = tmp_path / "lax"
    assert main(["lax", "--out", str(out)]) == EXIT_PASS
    report = json.loads((out / "report.json").read_text())
    assert report["experiment"] == "lax"
    assert report["status"] == "pass"
    assert report["result"]["forced_witness"]["value"] > 0
    assert (out / "lax.csv").exists()


def test_reports_are_reproducible(tmp_path):
    for name in ("a", "b"):
        assert main(["lax", "--out", str(tmp_path / name), "--seed", "7"]) == EXIT_PASS
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_synthetic_flux_breaking_the_area_bound(tmp_path):
    lattice = CubeLattice(GridSpec.from_bounds([-1.0, -1.0], [1.0, 1.0], 0.03125))
    entries = {key: 0.0 for j in range(2) for key in lattice.faces(j)}
    entries[FaceKey(1, (0, 3), 2)] = 0.01
    table = tmp_path / "faces.csv"
    write_face_table(table_frame(SyntheticFlux.from_entries(lattice, entries)), table)
    config = tmp_path / "flux.ini"
    config.write_text(SMALL_GRID + f"\n[flux]\ntable = {table}\nc_bound = 0\n")

    out = tmp_path / "out"
    assert main(["flux-axioms", "--config", str(config), "--out", str(out)]) == EXIT_FAIL
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "fail"
    assert report["result"]["axiom"] == "iii"


def test_synthetic_table_needs_a_constant(tmp_path):
    config = tmp_path / "flux.ini"
    config.write_text(SMALL_GRID + "\n[flux]\ntable = faces.csv\n")
    assert main(["flux-axioms", "--config", str(config), "--out", str(tmp_path / "out")]) == EXIT_USAGE


def test_suite_covers_the_corpus_pairs():
    labels = {case.label for case in ACCEPTANCE_SUITE}
    for shape in ("disk", "square", "annulus"):
        assert f"perimeter.{shape}" in labels
        assert f"coarea.{shape}" in labels
    for field in ("linear", "rotation", "radial_unit", "chen_frid"):
        for shape in ("disk", "square", "rotated_square"):
            assert f"gauss-green.{shape}.{field}" in labels
    assert "jump.disk.radial_unit" in labels
    cusp = [c for c in ACCEPTANCE_SUITE if c.label == "fatness.cusp"]
    assert cusp and cusp[0].expect_failure == "complement_fatness"
    assert all(case.experiment in EXPERIMENTS for case in ACCEPTANCE_SUITE)


def test_suite_counts_expected_failures(tmp_path):
    config = ExperimentConfig().apply_resolution("coarse")
    cases = (
        AcceptanceCase("lax"),
        AcceptanceCase("fatness", shape="cusp", expect_failure="complement_fatness"),
        AcceptanceCase("fatness", shape="disk", expect_failure="complement_fatness"),
    )
    runner = ExperimentRunner(config, out_dir=tmp_path, seed=0)
    summary = runner.run_all(cases)
    status = {r["case"]: r["status"] for r in summary["experiments"]}
    assert status == {"lax": "pass", "fatness.cusp": "pass", "fatness.disk": "fail"}
    assert not runner.passed
    cusp = json.loads((tmp_path / "fatness.cusp" / "report.json").read_text())
    assert cusp["parameters"]["shape"] == "cusp"
    assert cusp["result"]["fatness_violated"]
