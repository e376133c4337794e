import json

import pytest

from configuration import parse_config
from services.run_service import COMMANDS, RunService
from utilities.errors import ConfigurationError

FREE = """
model:
  alpha: 0.1
  beta: 0.0
discretization:
  N: 2
  n_k: 4
spectrum:
  inf_radii: 64
  inf_angles: 32
kernel:
  eps: 1.0e-2
  radii: [0.1, 0.5, 1.0, 2.0]
  lattice_check: false
"""

COUPLED = """
model:
  alpha: 0.1
  beta: 0.2
discretization:
  N: 3
  n_k: 4
spectrum:
  inf_radii: 128
  inf_angles: 64
feshbach:
  scaling_alphas: [0.1, 0.2]
kernel:
  eps: 1.0e-2
  radii: [0.1, 0.5, 1.0]
  lattice_check: false
"""

MULTILAYER = """
dispersion:
  kind: multilayer
  layers: 2
potential:
  shape: cosine
  half_width: 0.4
model:
  alpha: 0.1
  beta: 0.2
discretization:
  N: 2
  n_k: 4
spectrum:
  inf_radii: 64
  inf_angles: 32
kernel:
  eps: 1.0e-2
  radii: [0.1, 0.5, 1.0]
  lattice_check: false
"""


def make_service(text, out_dir, **overrides):
    return RunService(parse_config(text), out_dir=str(out_dir), **overrides)


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_free_verify_passes(tmp_path):
    result = make_service(FREE, tmp_path).run("verify")
    assert result.all_passed, result.failed
    names = {check.name for check in result.checks}
    assert {"free_gapless", "free_bands_symmetric", "coupling_free", "kernel_adjoint"} <= names
    assert "gap_inclusion" not in names

    verify = read_json(tmp_path / "verify.json")
    assert verify["all_passed"] is True
    manifest = read_json(tmp_path / "manifest.json")
    assert manifest["status"] == "complete"
    assert manifest["partial"] is False
    assert [entry["name"] for entry in manifest["files"]] == ["verify.json"]


def test_verify_output_is_deterministic(tmp_path):
    make_service(FREE, tmp_path / "first").run("verify")
    make_service(FREE, tmp_path / "second").run("verify")
    assert (tmp_path / "first" / "verify.json").read_bytes() == (tmp_path / "second" / "verify.json").read_bytes()


def test_coupled_verify_passes(tmp_path):
    result = make_service(COUPLED, tmp_path).run("verify")
    assert result.all_passed, result.failed
    names = {check.name for check in result.checks}
    assert {"gap_inclusion", "inf_lower_bound", "neumann_tail", "woodbury", "feshbach_gap_scan"} <= names
    assert {
        "flux_projection_idempotent",
        "flux_linear",
        "p0_block",
        "fiber_linear_in_beta",
        "certificate_sweep",
        "gap_symmetric",
        "gap_refinement_monotone",
        "coupling_alpha_slope",
        "free_resolvent_alpha_slope",
        "kernel_envelope",
        "kernel_tail",
    } <= names
    kinds = {check.name: check.kind for check in result.checks}
    assert kinds["kernel_eps_stability"] == "diagnostic"
    assert "kernel_lattice_sum" not in kinds


def test_certificate_sweep_covers_twenty_lambdas(tmp_path):
    result = make_service(COUPLED, tmp_path).run("verify")
    sweep = next(check for check in result.checks if check.name == "certificate_sweep")
    assert sweep.passed
    assert "20 lambdas" in sweep.target


def test_multilayer_verify_is_not_certified(tmp_path):
    result = make_service(MULTILAYER, tmp_path).run("verify")
    assert result.all_passed, result.failed
    kinds = {check.name: check.kind for check in result.checks}
    assert kinds["gap_certificate"] == "diagnostic"
    assert kinds["inf_lower_bound"] == "diagnostic"
    assert kinds["gap_inclusion"] == "diagnostic"
    assert "certificate_sweep" not in kinds
    assert "gap_symmetric" not in kinds
    assert "inf_lower_bound" not in result.failed


def test_multilayer_gap_is_not_certified(tmp_path):
    make_service(MULTILAYER, tmp_path).run("gap")
    gap = read_json(tmp_path / "gap.json")
    assert gap["gap_constants"]["certified"] is False
    assert gap["gap_constants"]["lambda0"] is None
    assert gap["certified_halfwidth"] is None
    assert gap["predicted_halfwidth"] >= 0.0
    assert gap["inf_check"]["certified"] is False
    assert gap["observed_halfwidth"] == pytest.approx(0.5 * gap["gap"]["width"])


def test_negative_seed_override_is_a_configuration_error(tmp_path):
    with pytest.raises(ConfigurationError, match="run.seed"):
        make_service(FREE, tmp_path, seed=-1)


def test_overrides_take_precedence(tmp_path):
    service = make_service(FREE, tmp_path, threads=2, seed=11)
    assert service.threads == 2
    assert service.seed == 11
    assert service.config.run.out_dir == str(tmp_path)


def test_bands_output(tmp_path):
    make_service(FREE, tmp_path).run("bands")
    lines = (tmp_path / "bands.csv").read_text().splitlines()
    assert lines[0] == "k1,k2,band_index,energy"
    # 16 grid points, 50 bands each; the touching point k = 0 is already on the grid
    assert len(lines) == 1 + 16 * 50
    bands = read_json(tmp_path / "bands.json")
    assert bands["n_seeded"] == 0
    assert bands["dim"] == 50


def test_gap_output(tmp_path):
    make_service(COUPLED, tmp_path).run("gap")
    gap = read_json(tmp_path / "gap.json")
    assert gap["gap"]["width"] > 0.0
    assert 0.5 < gap["gap"]["ratio"] < 1.5
    assert gap["gap_constants"]["exactly_linear"] is True
    assert gap["gap_constants"]["lambda0"] is None
    assert gap["inf_check"]["value"] >= gap["inf_check"]["lower_bound"]
    assert gap["gap_constants"]["certified"] is True
    assert gap["correction_constant"] == 0.0
    assert gap["certified_halfwidth"] == pytest.approx(gap["gap"]["predicted_halfwidth_leading"])
    assert gap["predicted_halfwidth"] == pytest.approx(gap["certified_halfwidth"])
    assert gap["certified_halfwidth"] <= gap["observed_halfwidth"]
    manifest = read_json(tmp_path / "manifest.json")
    assert "convergence" in manifest["diagnostics"]


def test_gap_without_transverse_flux_still_reports(tmp_path):
    text = COUPLED + "potential:\n  amplitudes: [1.0, 0.0, 0.0]\n"
    make_service(text, tmp_path).run("gap")
    gap = read_json(tmp_path / "gap.json")
    assert gap["gap_constants"] is None
    assert gap["gap"]["ratio"] is None


def test_sweep_with_empty_alpha_list(tmp_path):
    make_service("model:\n  alpha: []\n  beta: 0.2\n", tmp_path).run("sweep")
    assert (tmp_path / "sweep.csv").read_text() == "alpha,beta,N,n_k,width,ratio,runtime_s\n"
    fit = read_json(tmp_path / "sweep_fit.json")
    assert fit["C_fit"] is None
    assert fit["C_fit_valid"] is False
    assert fit["failed_cells"] == []


def test_feshbach_output(tmp_path):
    make_service(COUPLED, tmp_path).run("feshbach")
    for name in ("coupling_norms.csv", "feshbach_scan.csv", "remainder_scaling.csv", "feshbach.json"):
        assert (tmp_path / name).is_file()
    report = read_json(tmp_path / "feshbach.json")
    assert report["coupling"]["neumann_ok"] is True
    assert report["root_check"]["scan_ok"] is True
    assert len((tmp_path / "coupling_norms.csv").read_text().splitlines()) == 10
    assert report["coupling"]["truncation_change"] is not None
    assert report["coupling"]["sup_wru_2N"] > 0.0
    header = (tmp_path / "remainder_scaling.csv").read_text().splitlines()[0]
    assert header == "alpha,beta,BP0_norm,BP0_norm_2N,truncation_change,sup_wru,normalised,excluded"
    assert report["remainder"]["cutoff"] == 3
    assert report["remainder"]["truncation_ok"] in (True, False)
    assert report["remainder"]["max_truncation_change"] is not None


def test_feshbach_truncation_certificate_can_be_disabled(tmp_path):
    text = COUPLED.replace("  scaling_alphas: [0.1, 0.2]\n", "  scaling_alphas: [0.1, 0.2]\n  certify_truncation: false\n")
    make_service(text, tmp_path).run("feshbach")
    report = read_json(tmp_path / "feshbach.json")
    assert report["coupling"]["truncation_change"] is None
    assert report["remainder"]["truncation_ok"] is None


def test_feshbach_skips_couplings_for_smooth_bumps(tmp_path):
    text = COUPLED + "potential:\n  shape: cosine\n  half_width: 0.4\n"
    make_service(text, tmp_path).run("feshbach")
    report = read_json(tmp_path / "feshbach.json")
    assert "coupling" not in report
    assert not (tmp_path / "coupling_norms.csv").exists()


def test_kernel_output(tmp_path):
    make_service(COUPLED, tmp_path).run("kernel")
    lines = (tmp_path / "kernel_decay.csv").read_text().splitlines()
    assert lines[0] == "r,magnitude,envelope,ratio,quadrature_error"
    assert len(lines) == 4
    report = read_json(tmp_path / "kernel.json")
    assert report["eps_stability"]["radii"] == [1.0]
    assert report["eps_stability"]["max_relative_change"] <= 0.05


def test_multi_valued_alpha_is_rejected_and_manifest_marks_failure(tmp_path):
    service = make_service("model:\n  alpha: [0.1, 0.2]\n", tmp_path)
    with pytest.raises(ConfigurationError, match="single value"):
        service.run("gap")
    manifest = read_json(tmp_path / "manifest.json")
    assert manifest["status"] == "failed"
    assert manifest["partial"] is True
    assert "single value" in manifest["error"]


def test_unknown_command(tmp_path):
    with pytest.raises(ConfigurationError, match="unknown command"):
        make_service(FREE, tmp_path).run("plot")
    assert "plot" not in COMMANDS
