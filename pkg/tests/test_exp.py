"""Harness tests: statistics helpers, run artifacts, aggregation, grid
search on stubbed runs, SVG geometry, CLI round trips."""

import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from qsaclab import cli, exp
from qsaclab.exp import (
    CurveSummary,
    RunConfig,
    aggregate_runs,
    config_hash,
    grid_search,
    load_records_csv,
    parse_metadata,
    plot_svg,
    run_experiment,
    smooth_curve,
    trailing_mean,
    write_records_csv,
)
from qsaclab.sac import AgentConfig, EpisodeRecord

TINY = AgentConfig(policy_kind="reuploading-vqc", n_layers=1, total_steps=600, warmup_steps=300)


def _records(returns):
    return [EpisodeRecord(i, 200 * (i + 1), r) for i, r in enumerate(returns)]


def _write_run(path, returns, hash_hex):
    write_records_csv(path, _records(returns), hash_hex)


# ---------------------------------------------------------------------------
# statistics helpers


def test_trailing_mean_constant_series():
    assert trailing_mean(_records([3.0] * 12)) == 3.0


def test_trailing_mean_arithmetic():
    assert trailing_mean(_records(list(range(1, 11))), k=10) == 5.5


def test_trailing_mean_too_few_episodes():
    with pytest.raises(ValueError):
        trailing_mean(_records([1.0] * 9), k=10)


def test_smooth_curve_constant_is_fixed_point():
    assert smooth_curve([2.0] * 5, 0.9) == [2.0] * 5


def test_smooth_curve_weight_zero_is_identity():
    assert smooth_curve([1.0, -3.0, 2.5], 0.0) == [1.0, -3.0, 2.5]


def test_smooth_curve_one_step_recursion():
    out = smooth_curve([0.0, 1.0], 0.9)
    assert out[0] == 0.0
    assert out[1] == pytest.approx(0.1)


def test_smooth_curve_rejects_empty():
    with pytest.raises(ValueError):
        smooth_curve([], 0.9)


# ---------------------------------------------------------------------------
# run artifacts


def test_run_experiment_writes_records_and_metadata(tmp_path):
    rc = RunConfig(TINY, seed=0, out_dir=str(tmp_path), label="tiny")
    records, csv_path, meta_path = run_experiment(rc)
    assert len(records) == 3  # 600 steps / 200
    hash_hex, episodes, steps, returns = load_records_csv(csv_path)
    assert hash_hex == config_hash(TINY)
    assert list(episodes) == [0, 1, 2]
    assert list(steps) == [200, 400, 600]
    assert np.array_equal(returns, [r.ret for r in records])
    # metadata round-trips to the same RunConfig
    parsed = parse_metadata(meta_path)
    assert parsed.agent == TINY
    assert parsed.seed == 0
    assert parsed.label == "tiny"
    assert parsed.out_dir == str(tmp_path)


def test_rerun_is_byte_identical(tmp_path):
    rc1 = RunConfig(TINY, seed=3, out_dir=str(tmp_path / "a"), label="run")
    rc2 = RunConfig(TINY, seed=3, out_dir=str(tmp_path / "b"), label="run")
    _, p1, _ = run_experiment(rc1)
    _, p2, _ = run_experiment(rc2)
    with open(p1, "rb") as f1, open(p2, "rb") as f2:
        assert f1.read() == f2.read()


def test_config_hash_ignores_seed_but_not_fields():
    assert config_hash(TINY) == config_hash(TINY)
    other = AgentConfig(**{**TINY.__dict__, "policy_lr": 0.1})
    assert config_hash(other) != config_hash(TINY)


# ---------------------------------------------------------------------------
# aggregation


def test_aggregate_identical_runs_zero_stderr(tmp_path):
    paths = []
    for k in range(10):
        p = str(tmp_path / f"run{k}.csv")
        _write_run(p, [-5.0, -4.0, -3.0], "aaaa")
        paths.append(p)
    summary = aggregate_runs(paths, str(tmp_path / "sum.csv"))
    assert np.allclose(summary.mean, [-5, -4, -3])
    assert np.all(summary.stderr == 0.0)
    assert summary.n_runs == 10


def test_aggregate_two_runs_hand_value(tmp_path):
    p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    _write_run(p1, [0.0], "h1")
    _write_run(p2, [2.0], "h1")
    summary = aggregate_runs([p1, p2])
    assert summary.mean[0] == pytest.approx(1.0)
    assert summary.stderr[0] == pytest.approx(1.0)  # std sqrt(2) over sqrt(2)


def test_aggregate_is_permutation_invariant(tmp_path):
    paths = []
    rng = np.random.default_rng(0)
    for k in range(4):
        p = str(tmp_path / f"r{k}.csv")
        _write_run(p, list(rng.uniform(-10, 0, 5)), "h2")
        paths.append(p)
    a = aggregate_runs(paths)
    b = aggregate_runs(paths[::-1])
    assert np.array_equal(a.mean, b.mean)
    assert np.array_equal(a.stderr, b.stderr)


def test_aggregate_single_run_warns_in_csv(tmp_path):
    p = str(tmp_path / "solo.csv")
    _write_run(p, [-1.0, -2.0], "h3")
    out = str(tmp_path / "sum.csv")
    summary = aggregate_runs([p], out)
    assert np.all(summary.stderr == 0.0)
    text = open(out).read()
    assert "warning" in text.splitlines()[1]
    assert "single_run" in text


def test_aggregate_rejects_mismatched_lengths(tmp_path):
    p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    _write_run(p1, [0.0, 1.0], "h4")
    _write_run(p2, [2.0], "h4")
    with pytest.raises(ValueError):
        aggregate_runs([p1, p2])


def test_aggregate_rejects_mixed_config_hashes(tmp_path):
    p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    _write_run(p1, [0.0], "h5")
    _write_run(p2, [1.0], "h6")
    with pytest.raises(ValueError):
        aggregate_runs([p1, p2])


# ---------------------------------------------------------------------------
# grid search (stubbed runs)


def _stub_run(table):
    def fn(cfg, seed):
        return _records([0.0] * 5 + [table[cfg.policy_lr]] * 10)

    return fn


def test_grid_search_single_lr():
    best, rows = grid_search(TINY, [1e-3], [0, 1], run_fn=_stub_run({1e-3: -100.0}))
    assert best == 1e-3
    assert rows[0][3] == "ok"


def test_grid_search_argmax_and_tie_break():
    table = {1e-1: -500.0, 1e-2: -100.0, 1e-3: -100.0, 3e-4: -200.0}
    best, rows = grid_search(TINY, list(table), [0, 1, 2], run_fn=_stub_run(table))
    assert best == 1e-3  # tie between 1e-2 and 1e-3 resolved to the smaller
    means = {lr: m for lr, m, _, _ in rows}
    assert means[1e-1] == pytest.approx(-500.0)


def test_grid_search_failed_cell_is_excluded(tmp_path):
    def fn(cfg, seed):
        if cfg.policy_lr == 1e-1:
            raise RuntimeError("diverged")
        return _records([-50.0] * 10)

    best, rows = grid_search(TINY, [1e-1, 1e-3], [0], out_dir=str(tmp_path), run_fn=fn)
    assert best == 1e-3
    status = {lr: s for lr, _, _, s in rows}
    assert status[1e-1] == "failed"
    table = open(tmp_path / "grid_reuploading-vqc_L1.csv").read()
    assert "failed" in table and "config_hash" in table


def test_grid_search_default_grid_is_the_six_point_set():
    assert exp.DEFAULT_LR_GRID == (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4)


def test_grid_search_empty_grid_rejected():
    with pytest.raises(ValueError):
        grid_search(TINY, [], [0])


# ---------------------------------------------------------------------------
# plotting


def _fixture_summary():
    return CurveSummary(
        episode=np.array([0, 1, 2]),
        mean=np.array([-10.0, -6.0, -2.0]),
        stderr=np.array([1.0, 2.0, 0.5]),
        n_runs=5,
        config_hash="cafe01234567",
    )


def test_plot_svg_is_wellformed_xml(tmp_path):
    out = str(tmp_path / "fig.svg")
    plot_svg([_fixture_summary()], ["demo"], out)
    root = ET.parse(out).getroot()
    assert root.tag.endswith("svg")
    text = open(out).read()
    assert "average return" in text and ">step<" in text
    assert "cafe01234567" in text


def test_plot_svg_rejects_empty_or_mismatched_labels(tmp_path):
    with pytest.raises(ValueError):
        plot_svg([_fixture_summary()], [], str(tmp_path / "x.svg"))
    with pytest.raises(ValueError):
        plot_svg([_fixture_summary()], ["a", "b"], str(tmp_path / "x.svg"))
    with pytest.raises(ValueError):
        plot_svg([], ["a"], str(tmp_path / "x.svg"))


def test_plot_band_half_width_equals_stderr_in_plot_coords(tmp_path):
    summary = _fixture_summary()
    out = str(tmp_path / "band.svg")
    plot_svg([summary], ["demo"], out, smooth_weight=0.9)
    root = ET.parse(out).getroot()
    ns = {"svg": "http://www.w3.org/2000/svg"}
    group = root.find("svg:g", ns)
    ymin, ymax = float(group.get("data-ymin")), float(group.get("data-ymax"))
    plot_h = float(group.get("data-height"))
    yscale = plot_h / (ymax - ymin)
    band = group.find("svg:polygon", ns)
    pts = [tuple(map(float, p.split(","))) for p in band.get("points").split()]
    n = len(summary.episode)
    upper, lower = pts[:n], pts[n:][::-1]
    for k in range(n):
        half_width_px = (lower[k][1] - upper[k][1]) / 2.0
        assert half_width_px == pytest.approx(summary.stderr[k] * yscale, abs=2e-3)


# ---------------------------------------------------------------------------
# CLI


def test_cli_train_aggregate_plot_round_trip(tmp_path):
    out = str(tmp_path / "runs")
    for seed in (0, 1):
        code = cli.main(
            [
                "train",
                "--agent",
                "qsac-reuploading",
                "--layers",
                "1",
                "--steps",
                "600",
                "--config",
                _tiny_config_file(tmp_path),
                "--seed",
                str(seed),
                "--out",
                out,
                "--label",
                f"demo_seed{seed}",
            ]
        )
        assert code == 0
    summary_path = str(tmp_path / "summary.csv")
    code = cli.main(
        ["aggregate", "--runs", f"{out}/demo_seed0.csv", f"{out}/demo_seed1.csv", "--out", summary_path]
    )
    assert code == 0
    svg_path = str(tmp_path / "fig.svg")
    code = cli.main(["plot", "--summaries", summary_path, "--labels", "demo", "--out", svg_path])
    assert code == 0
    assert os.path.exists(svg_path)
    ET.parse(svg_path)


def _tiny_config_file(tmp_path):
    path = str(tmp_path / "agent.cfg")
    with open(path, "w") as fh:
        fh.write("warmup_steps=300\n")
    return path


def test_cli_flags_override_config_file(tmp_path):
    path = str(tmp_path / "agent.cfg")
    with open(path, "w") as fh:
        fh.write("policy_kind=classical\nn_layers=4\npolicy_lr=0.01\n")
    import argparse

    args = argparse.Namespace(
        agent="qsac-vanilla", layers=None, policy_lr=None, critic_lr=None,
        steps=None, config=path, grad_method=None,
    )
    cfg = cli._resolve_agent(args)
    assert cfg.policy_kind == "vanilla-vqc"  # flag wins
    assert cfg.n_layers == 4  # file value survives
    assert cfg.policy_lr == 0.01
