"""Experiment harness: seed sweeps, step-size grid search, aggregation, plots.

File formats (all bit-reproducible for a given config and seed):

* run records   -- ``# config_hash=<hex>`` comment line, then CSV with
  columns ``episode,step,return`` (one row per finished episode, full
  float precision).
* run metadata  -- flat ``key=value`` text: every agent-config field plus
  seed, label, out_dir, config_hash, code_version, episode count, and
  wall-clock seconds.
* curve summary -- same hash comment, then ``episode,mean,stderr`` (plus a
  ``warning`` column flagging single-run summaries, whose stderr is
  undefined and emitted as 0).
* grid table    -- ``lr,mean,stderr,status`` rows over the step-size grid.

The config hash covers the agent configuration only (not the seed), so
runs of one configuration across seeds share a hash and can be
aggregated; mixing hashes is an error.  Acceptance statistics always use
raw returns; exponential smoothing is applied to plotted curves only.
"""

from __future__ import annotations

import dataclasses
import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__, pendulum, sac
from .sac import AgentConfig, EpisodeRecord

DEFAULT_LR_GRID = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4)
DEFAULT_SMOOTH_WEIGHT = 0.9
DEFAULT_SEEDS = tuple(range(10))
WORKERS_ENV_VAR = "QSAC_WORKERS"


@dataclass(frozen=True)
class RunConfig:
    agent: AgentConfig
    seed: int
    out_dir: str
    label: str = ""

    def resolved_label(self) -> str:
        if self.label:
            return self.label
        a = self.agent
        return f"{a.policy_kind}_L{a.n_layers}_plr{a.policy_lr:g}_seed{self.seed}"


@dataclass
class CurveSummary:
    episode: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_runs: int
    config_hash: str


def config_hash(agent: AgentConfig) -> str:
    text = "\n".join(
        f"{f.name}={getattr(agent, f.name)!r}" for f in dataclasses.fields(AgentConfig)
    )
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def worker_count() -> int:
    value = os.environ.get(WORKERS_ENV_VAR, "")
    return max(1, int(value)) if value else 1


# ---------------------------------------------------------------------------
# single runs


def run_experiment(rc: RunConfig) -> tuple[list[EpisodeRecord], str, str]:
    """Train one agent and persist its records CSV and metadata file."""
    rc.agent.validate()
    start = time.perf_counter()
    records = sac.train(rc.agent, rc.seed)
    wall = time.perf_counter() - start
    label = rc.resolved_label()
    try:
        os.makedirs(rc.out_dir, exist_ok=True)
        csv_path = os.path.join(rc.out_dir, label + ".csv")
        meta_path = os.path.join(rc.out_dir, label + ".meta")
        write_records_csv(csv_path, records, config_hash(rc.agent))
        _write_metadata(meta_path, rc, len(records), wall)
    except OSError as err:
        raise OSError(f"cannot write run outputs under {rc.out_dir!r}: {err}") from err
    return records, csv_path, meta_path


def run_many(run_configs, workers: int | None = None):
    """Execute independent runs, optionally across processes."""
    workers = worker_count() if workers is None else max(1, workers)
    if workers == 1 or len(run_configs) <= 1:
        return [run_experiment(rc) for rc in run_configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_experiment, run_configs))


def write_records_csv(path: str, records, hash_hex: str) -> None:
    lines = [f"# config_hash={hash_hex}", "episode,step,return"]
    lines += [f"{r.episode},{r.step},{float(r.ret)!r}" for r in records]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_records_csv(path: str):
    """Returns (config_hash, episodes, steps, returns)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("# config_hash="):
        raise ValueError(f"{path}: missing config_hash header")
    hash_hex = lines[0].split("=", 1)[1]
    if lines[1] != "episode,step,return":
        raise ValueError(f"{path}: unexpected header {lines[1]!r}")
    rows = [ln.split(",") for ln in lines[2:]]
    episodes = np.array([int(r[0]) for r in rows])
    steps = np.array([int(r[1]) for r in rows])
    returns = np.array([float(r[2]) for r in rows])
    return hash_hex, episodes, steps, returns


def _write_metadata(path: str, rc: RunConfig, n_episodes: int, wall_seconds: float) -> None:
    pairs = [(f.name, getattr(rc.agent, f.name)) for f in dataclasses.fields(AgentConfig)]
    pairs += [
        ("seed", rc.seed),
        ("label", rc.resolved_label()),
        ("out_dir", rc.out_dir),
        ("config_hash", config_hash(rc.agent)),
        ("code_version", __version__),
        ("episodes", n_episodes),
        ("wall_clock_seconds", round(wall_seconds, 3)),
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(f"{k}={v}" for k, v in pairs) + "\n")


def parse_key_value_file(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            if "=" not in ln:
                raise ValueError(f"{path}: malformed line {ln!r}")
            key, value = ln.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def agent_config_from_strings(values: dict[str, str], base: AgentConfig | None = None) -> AgentConfig:
    """Build an AgentConfig from string fields (config files, CLI merges)."""
    base = base or AgentConfig()
    kwargs = {}
    for f in dataclasses.fields(AgentConfig):
        if f.name in values:
            kwargs[f.name] = _coerce(values[f.name], getattr(base, f.name))
    return replace(base, **kwargs)


def _coerce(raw: str, default):
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_metadata(path: str) -> RunConfig:
    values = parse_key_value_file(path)
    agent = agent_config_from_strings(values)
    return RunConfig(
        agent=agent,
        seed=int(values["seed"]),
        out_dir=values["out_dir"],
        label=values["label"],
    )


# ---------------------------------------------------------------------------
# statistics


def trailing_mean(records, k: int = 10) -> float:
    """Mean return of the final k episodes (the headline statistic)."""
    returns = [r.ret if isinstance(r, EpisodeRecord) else float(r) for r in records]
    if len(returns) < k:
        raise ValueError(f"need at least {k} episodes, have {len(returns)}")
    return float(np.mean(returns[-k:]))


def smooth_curve(values, weight: float):
    """Exponential average for plotting: y_t = w*y_{t-1} + (1-w)*x_t."""
    if len(values) == 0:
        raise ValueError("cannot smooth an empty series")
    if not 0.0 <= weight < 1.0:
        raise ValueError("weight must be in [0, 1)")
    out = [float(values[0])]
    for x in values[1:]:
        out.append(weight * out[-1] + (1.0 - weight) * float(x))
    return out


def aggregate_runs(csv_paths, out_path: str | None = None) -> CurveSummary:
    """Per-episode mean and standard error across runs of one configuration."""
    if not csv_paths:
        raise ValueError("no run files given")
    hashes, curves = [], []
    episodes = None
    for path in csv_paths:
        hash_hex, eps, _, rets = load_records_csv(path)
        hashes.append(hash_hex)
        if episodes is None:
            episodes = eps
        elif len(eps) != len(episodes):
            raise ValueError(f"{path}: episode count {len(eps)} != {len(episodes)}")
        curves.append(rets)
    if len(set(hashes)) > 1:
        raise ValueError(f"runs mix different config hashes: {sorted(set(hashes))}")
    # canonical run order makes the float reductions exactly permutation-invariant
    curves.sort(key=lambda c: c.tobytes())
    data = np.stack(curves)  # [runs, episodes]
    n = data.shape[0]
    mean = data.mean(axis=0)
    stderr = data.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(data.shape[1])
    summary = CurveSummary(episodes, mean, stderr, n, hashes[0])
    if out_path is not None:
        write_summary_csv(out_path, summary)
    return summary


def write_summary_csv(path: str, summary: CurveSummary) -> None:
    single = summary.n_runs == 1
    header = "episode,mean,stderr" + (",warning" if single else "")
    lines = [f"# config_hash={summary.config_hash}", header]
    for i in range(len(summary.episode)):
        row = f"{summary.episode[i]},{float(summary.mean[i])!r},{float(summary.stderr[i])!r}"
        if single:
            row += ",single_run"
        lines.append(row)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_summary_csv(path: str) -> CurveSummary:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines[0].startswith("# config_hash="):
        raise ValueError(f"{path}: missing config_hash header")
    hash_hex = lines[0].split("=", 1)[1]
    single = lines[1].endswith(",warning")
    rows = [ln.split(",") for ln in lines[2:]]
    return CurveSummary(
        episode=np.array([int(r[0]) for r in rows]),
        mean=np.array([float(r[1]) for r in rows]),
        stderr=np.array([float(r[2]) for r in rows]),
        n_runs=1 if single else 2,  # exact count is not stored; 2 means ">1"
        config_hash=hash_hex,
    )


# ---------------------------------------------------------------------------
# grid search


def grid_search(base: AgentConfig, lrs, seeds, out_dir: str | None = None,
                run_fn=None, workers: int | None = None):
    """Sweep the policy step-size; returns (best_lr, rows).

    Each row is (lr, mean trailing return over seeds, stderr, status).
    A run error marks that lr's cell failed and removes it from the
    argmax; ties prefer the smaller step-size.
    """
    lrs = list(lrs)
    if not lrs:
        raise ValueError("empty step-size grid")
    seeds = list(seeds)
    jobs = [(lr, seed) for lr in lrs for seed in seeds]
    workers = worker_count() if workers is None else max(1, workers)
    outcomes = {}
    if run_fn is None and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(sac.train, replace(base, policy_lr=lr), seed): (lr, seed)
                for lr, seed in jobs
            }
            for fut, job in futures.items():
                try:
                    outcomes[job] = fut.result()
                except Exception as err:  # cell recorded as failed below
                    outcomes[job] = err
    else:
        fn = run_fn or sac.train
        for lr, seed in jobs:
            try:
                outcomes[(lr, seed)] = fn(replace(base, policy_lr=lr), seed)
            except Exception as err:  # cell recorded as failed below
                outcomes[(lr, seed)] = err
    rows = []
    for lr in lrs:
        tails, failed = [], False
        for seed in seeds:
            result = outcomes[(lr, seed)]
            if isinstance(result, Exception):
                failed = True
                break
            try:
                tails.append(trailing_mean(result))
            except ValueError:
                failed = True
                break
        if failed:
            rows.append((lr, float("nan"), float("nan"), "failed"))
        else:
            stderr = float(np.std(tails, ddof=1) / np.sqrt(len(tails))) if len(tails) > 1 else 0.0
            rows.append((lr, float(np.mean(tails)), stderr, "ok"))
    valid = [(m, -lr, lr) for lr, m, _, status in rows if status == "ok"]
    if not valid:
        raise RuntimeError("every grid cell failed")
    best_lr = max(valid)[2]
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"grid_{base.policy_kind}_L{base.n_layers}.csv")
        with open(path, "w") as fh:
            fh.write(f"# config_hash={config_hash(base)}\n")
            fh.write("# policy_lr swept over the grid below\n")
            fh.write("lr,mean,stderr,status\n")
            for lr, mean, stderr, status in rows:
                fh.write(f"{float(lr)!r},{float(mean)!r},{float(stderr)!r},{status}\n")
    return best_lr, rows


# ---------------------------------------------------------------------------
# plotting


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def plot_svg(summaries, labels, out_path: str, smooth_weight: float = DEFAULT_SMOOTH_WEIGHT) -> None:
    """Self-contained SVG learning-curve chart.

    Smoothed mean lines with one-standard-error bands; the value-to-pixel
    transform is recorded as data- attributes on the plot group so the
    geometry is checkable.
    """
    if not summaries:
        raise ValueError("need at least one summary")
    if not labels or len(labels) != len(summaries):
        raise ValueError("labels must be non-empty and match summaries")
    width, height = 720, 480
    left, top = 70.0, 20.0
    plot_w, plot_h = width - left - 30.0, height - top - 60.0

    curves = []
    for s in summaries:
        x = (s.episode + 1) * pendulum.EPISODE_STEPS
        y = np.array(smooth_curve(s.mean, smooth_weight))
        curves.append((x, y, s.stderr))
    xmin = min(c[0].min() for c in curves)
    xmax = max(c[0].max() for c in curves)
    ymin = min((c[1] - c[2]).min() for c in curves)
    ymax = max((c[1] + c[2]).max() for c in curves)
    pad = 0.05 * max(ymax - ymin, 1e-9)
    ymin, ymax = ymin - pad, ymax + pad
    if xmax == xmin:
        xmax = xmin + 1.0

    def px(x):
        return left + plot_w * (x - xmin) / (xmax - xmin)

    def py(y):
        return top + plot_h * (ymax - y) / (ymax - ymin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        "<metadata>"
        + " ".join(f"config_hash:{s.config_hash}" for s in summaries)
        + f" smooth_weight:{smooth_weight}"
        + "</metadata>",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<g class="plot" data-xmin="{float(xmin)!r}" data-xmax="{float(xmax)!r}" '
        f'data-ymin="{float(ymin)!r}" data-ymax="{float(ymax)!r}" data-left="{left!r}" '
        f'data-top="{top!r}" data-width="{plot_w!r}" data-height="{plot_h!r}">',
    ]
    for k, (x, y, err) in enumerate(curves):
        color = _PALETTE[k % len(_PALETTE)]
        upper = [(px(a), py(b + e)) for a, b, e in zip(x, y, err)]
        lower = [(px(a), py(b - e)) for a, b, e in zip(x, y, err)]
        pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in upper + lower[::-1])
        parts.append(f'<polygon class="band" fill="{color}" opacity="0.2" points="{pts}"/>')
        line = " ".join(f"{px(a):.3f},{py(b):.3f}" for a, b in zip(x, y))
        parts.append(
            f'<polyline class="mean" fill="none" stroke="{color}" stroke-width="1.5" points="{line}"/>'
        )
        parts.append(
            f'<text x="{left + 10}" y="{top + 16 + 16 * k}" fill="{color}" font-size="13">{labels[k]}</text>'
        )
    axis_y = top + plot_h
    parts.append(
        f'<line x1="{left}" y1="{axis_y}" x2="{left + plot_w}" y2="{axis_y}" stroke="black"/>'
    )
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{axis_y}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = xmin + frac * (xmax - xmin)
        yv = ymin + frac * (ymax - ymin)
        parts.append(
            f'<text x="{px(xv):.1f}" y="{axis_y + 18}" font-size="11" text-anchor="middle">{xv:.0f}</text>'
        )
        parts.append(
            f'<text x="{left - 8:.1f}" y="{py(yv) + 4:.1f}" font-size="11" text-anchor="end">{yv:.0f}</text>'
        )
    parts.append(
        f'<text x="{left + plot_w / 2:.1f}" y="{height - 12}" font-size="13" text-anchor="middle">step</text>'
    )
    parts.append(
        f'<text x="16" y="{top + plot_h / 2:.1f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + plot_h / 2:.1f})">average return</text>'
    )
    parts.append("</g>")
    parts.append("</svg>")
    with open(out_path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
