import json
import xml.etree.ElementTree as ET

import pytest

from lowdepth.cli import main
from lowdepth.core import TargetSpec
from lowdepth.harness import (
    AlgorithmError,
    ConfigError,
    ExperimentConfig,
    TrialReport,
    export_report,
    run_experiment,
    scaling_study,
    trial_report_from_json,
)


def quick_config(**overrides):
    base = dict(
        algorithm="type1",
        truth=0.3,
        target=TargetSpec(0.05, 0.1, 0.5),
        trials=50,
        master_seed=123,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError):
            quick_config(algorithm="quantum-leap")

    def test_truth_domain_checked(self):
        with pytest.raises(ConfigError):
            quick_config(truth=1.5)
        with pytest.raises(ConfigError):
            quick_config(algorithm="phase", truth=7.0)
        quick_config(algorithm="phase", truth=6.2)  # inside [0, 2 pi)

    def test_trials_positive(self):
        with pytest.raises(ConfigError):
            quick_config(trials=0)

    def test_unknown_constants_rejected(self):
        with pytest.raises(ConfigError):
            quick_config(constants={"mystery": 1.0})

    def test_provenance_includes_defaults(self):
        provenance = quick_config().provenance()
        assert provenance["constants"]["r"] == 0.05
        assert provenance["constants"]["s"] == pytest.approx(100 / 225)
        assert provenance["tolerances"]["grid_points_per_unit"] == 10_000


class TestRunExperiment:
    def test_monkey_demo_bias_exact_and_zero_variance(self):
        report = run_experiment(
            quick_config(algorithm="monkey-demo", truth=0.5, trials=20)
        )
        assert abs(report.empirical_bias - 0.05) <= 1e-15
        assert report.empirical_variance == 0.0
        assert report.empirical_success == 1.0  # offset sits exactly at epsilon

    def test_type1_success_above_half(self):
        report = run_experiment(quick_config(trials=300))
        assert report.empirical_success >= 0.5
        assert report.max_depth == max(report.trial_depths)
        assert report.total_queries == sum(report.trial_queries)

    def test_wall_time_measured_but_not_compared(self):
        report = run_experiment(quick_config(trials=5))
        assert report.wall_time is not None and report.wall_time > 0
        clone = TrialReport(
            config=report.config,
            estimates=report.estimates,
            empirical_success=report.empirical_success,
            empirical_bias=report.empirical_bias,
            empirical_variance=report.empirical_variance,
            max_depth=report.max_depth,
            total_queries=report.total_queries,
            trial_depths=report.trial_depths,
            trial_queries=report.trial_queries,
            wall_time=None,
        )
        assert clone == report

    def test_deterministic_reports(self):
        first = run_experiment(quick_config(trials=40))
        second = run_experiment(quick_config(trials=40))
        assert first == second

    def test_parallel_matches_serial(self):
        serial = run_experiment(quick_config(trials=24))
        parallel = run_experiment(quick_config(trials=24, parallel=True))
        assert serial == parallel

    def test_inner_error_carries_trial_index(self):
        config = quick_config(algorithm="type2", constants={"r": 0.7, "s": 0.4}, trials=3)
        with pytest.raises(AlgorithmError) as info:
            run_experiment(config)
        assert "trial 0" in str(info.value)

    def test_byte_identical_report_files(self, tmp_path):
        paths = [tmp_path / "a.json", tmp_path / "b.json"]
        for path in paths:
            run_experiment(quick_config(trials=25, output_path=str(path)))
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestHardwareWorkflow:
    def test_depth_cap_to_knob_to_estimate(self):
        # the motivating pipeline: a device depth cap fixes the knob, the
        # aggregate then reaches the target precision anyway
        from lowdepth.core import beta_from_hardware

        epsilon = 0.05
        beta = beta_from_hardware(hardware_depth=10, depth_constant=1.0, epsilon=epsilon)
        assert 0.0 < beta < 1.0  # device shallower than the target wants
        report = run_experiment(
            quick_config(target=TargetSpec(epsilon, 0.1, beta), trials=200)
        )
        assert report.empirical_success >= 0.5
        # per-run depth stays near the hardware budget (cost-model constants
        # and ceilings allowed for)
        assert report.max_depth <= 2 * 10

    def test_output_cap_above_one(self):
        config = quick_config(
            algorithm="type2",
            target=TargetSpec(0.05, 0.2, 0.5),
            constants={"C": 2.0},
            trials=40,
        )
        report = run_experiment(config)
        assert 1.0 - report.empirical_success <= 0.2 + 3 * (0.2 * 0.8 / 40) ** 0.5


class TestExport:
    def test_empty_report_gives_header_only_csv(self, tmp_path):
        report = TrialReport(
            config={"algorithm": "type1", "truth": 0.3},
            estimates=[],
            empirical_success=0.0,
            empirical_bias=0.0,
            empirical_variance=0.0,
            max_depth=0,
            total_queries=0,
            trial_depths=[],
            trial_queries=[],
        )
        path = export_report(report, "csv", tmp_path / "empty.csv")
        assert path.read_text() == "trial_index,estimate,abs_error,max_depth,total_queries\n"

    def test_csv_columns(self, tmp_path):
        report = run_experiment(quick_config(trials=4))
        path = export_report(report, "csv", tmp_path / "r.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "trial_index,estimate,abs_error,max_depth,total_queries"
        assert len(lines) == 5
        first = lines[1].split(",")
        assert int(first[0]) == 0
        assert abs(float(first[1]) - 0.3) < 0.2

    def test_json_round_trip(self, tmp_path):
        report = run_experiment(quick_config(trials=12))
        path = export_report(report, "json", tmp_path / "r.json")
        recovered = trial_report_from_json(path.read_text())
        assert recovered == report

    def test_svg_rejected_for_trial_reports(self, tmp_path):
        report = run_experiment(quick_config(trials=2))
        with pytest.raises(ConfigError):
            export_report(report, "svg", tmp_path / "r.svg")

    def test_unknown_format_rejected(self, tmp_path):
        report = run_experiment(quick_config(trials=2))
        with pytest.raises(ConfigError):
            export_report(report, "yaml", tmp_path / "r.yaml")

    def test_unwritable_path_reports_config_error(self, tmp_path):
        report = run_experiment(quick_config(trials=2))
        with pytest.raises(ConfigError):
            export_report(report, "json", tmp_path / "missing" / "r.json")


@pytest.fixture(scope="module")
def study():
    base = ExperimentConfig(
        "type1", 0.3, TargetSpec(0.05, 0.1, 0.5), trials=1, master_seed=5
    )
    return scaling_study(base, [0.1, 0.05, 0.02, 0.01], [0.0, 0.5, 1.0])


class TestScalingStudy:
    def test_rows_cover_grid(self, study):
        assert len(study.rows) == 12
        assert not study.partial

    def test_slopes_in_expected_ranges(self, study):
        assert abs(study.slopes[0.0]["depth"] - (-1.0)) <= 0.15
        assert abs(study.slopes[1.0]["depth"] - 0.0) <= 0.15
        assert abs(study.slopes[0.5]["queries"] - (-1.5)) <= 0.2
        for beta in (0.0, 0.5, 1.0):
            assert abs(study.slopes[beta]["product"] - (-2.0)) <= 0.2

    def test_partial_table_flagged(self):
        base = ExperimentConfig(
            "type2", 0.3, TargetSpec(0.05, 0.1, 0.5), constants={"r": 0.7, "s": 0.4},
            trials=1, master_seed=5,
        )
        study = scaling_study(base, [0.1, 0.05], [0.0])
        assert study.partial
        assert study.rows == []

    def test_exports(self, study, tmp_path):
        csv_path = export_report(study, "csv", tmp_path / "s.csv")
        assert csv_path.read_text().splitlines()[0] == (
            "epsilon,beta,max_depth,total_queries,depth_query_product"
        )
        json_path = export_report(study, "json", tmp_path / "s.json")
        payload = json.loads(json_path.read_text())
        assert payload["kind"] == "scaling_study"
        assert len(payload["rows"]) == 12
        svg_path = export_report(study, "svg", tmp_path / "s.svg")
        root = ET.fromstring(svg_path.read_text())  # well-formed XML
        assert root.tag.endswith("svg")

    def test_svg_deterministic(self, study, tmp_path):
        a = export_report(study, "svg", tmp_path / "a.svg").read_bytes()
        b = export_report(study, "svg", tmp_path / "b.svg").read_bytes()
        assert a == b

    def test_empty_grid_rejected(self):
        base = quick_config(trials=1)
        with pytest.raises(ConfigError):
            scaling_study(base, [], [0.5])


class TestCli:
    def test_run_writes_report(self, tmp_path, capsys):
        out = tmp_path / "cli.json"
        code = main(
            [
                "run",
                "--algorithm", "type1",
                "--truth", "0.3",
                "--epsilon", "0.05",
                "--delta", "0.1",
                "--beta", "0.5",
                "--trials", "20",
                "--seed", "9",
                "--out", str(out),
                "--format", "json",
            ]
        )
        assert code == 0
        assert out.exists()
        assert "success=" in capsys.readouterr().out

    def test_run_accepts_config_file(self, tmp_path, capsys):
        config_file = tmp_path / "exp.cfg"
        config_file.write_text(
            "algorithm = type1\ntruth = 0.3\nepsilon = 0.05\n"
            "delta = 0.1\nbeta = 0.5\ntrials = 10\nseed = 4\n"
        )
        assert main(["run", "--config", str(config_file)]) == 0

    def test_missing_required_flags_is_config_error(self, capsys):
        assert main(["run", "--epsilon", "0.05"]) == 2

    def test_config_file_typo_is_config_error(self, tmp_path, capsys):
        config_file = tmp_path / "typo.cfg"
        config_file.write_text("algorithm = type1\ntruth = 0.3\ntrails = 5\n")
        assert main(["run", "--config", str(config_file)]) == 2

    def test_bad_flag_value_exits_two(self, capsys):
        assert main(["run", "--algorithm", "bogus", "--truth", "0.3"]) == 2

    def test_inner_algorithm_error_exits_three(self, capsys):
        code = main(
            [
                "run",
                "--algorithm", "type2",
                "--truth", "0.3",
                "--r", "0.7",
                "--s", "0.4",
                "--trials", "2",
            ]
        )
        assert code == 3

    def test_params_prints_settings(self, capsys):
        assert main(["params", "--epsilon", "0.01", "--delta", "0.1", "--beta", "0.5"]) == 0
        output = capsys.readouterr().out
        assert "bias/variance plan" in output
        assert "runs=2952" in output
        assert "register phase estimator" in output

    def test_scale_writes_svg(self, tmp_path, capsys):
        out = tmp_path / "scale.svg"
        code = main(
            [
                "scale",
                "--epsilon-grid", "0.1,0.05",
                "--beta-grid", "0,1",
                "--seed", "3",
                "--out", str(out),
                "--format", "svg",
            ]
        )
        assert code == 0
        ET.fromstring(out.read_text())

    def test_parallel_flag_accepted(self, tmp_path, capsys):
        out = tmp_path / "par.json"
        code = main(
            [
                "run",
                "--algorithm", "type1",
                "--truth", "0.3",
                "--trials", "8",
                "--seed", "11",
                "--parallel",
                "--out", str(out),
            ]
        )
        assert code == 0 and out.exists()

    def test_bad_scale_grid_exits_two(self, capsys):
        assert main(["scale", "--epsilon-grid", "2,3", "--beta-grid", "0"]) == 2

    def test_selfcheck_passes(self, capsys):
        assert main(["selfcheck"]) == 0
        output = capsys.readouterr().out
        assert "PASS" in output and "FAIL" not in output
