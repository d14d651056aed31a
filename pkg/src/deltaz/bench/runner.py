"""Learning runs, the robots x runs benchmark, and zero-shot transfer."""

from __future__ import annotations

import csv
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import policy as pol
from ..device import MockFirmware, ProtocolEnv, SimRobot, loopback
from ..dial_env import DialEnv, StepOutcome
from .config import ExperimentConfig, dump_config, load_config

CONVERGED = "converged"
MAX_UPDATES = "max_updates"
FAILED = "failed"

CURVE_COLUMNS = ("robot", "run", "update", "mean1", "mean2", "mean3", "mean4",
                 "std1", "std2", "std3", "std4", "batch_reward_mean", "successes", "status")
FINAL_COLUMNS = ("robot", "run", "status", "updates", "mean1", "mean2", "mean3", "mean4",
                 "final_batch_reward", "eval_successes", "eval_episodes")
SUMMARY_COLUMNS = ("robot", "runs", "converged", "convergence_rate", "final_reward_mean", "final_reward_se")
OVERLAP_COLUMNS = ("robot_i", "robot_j", "abs_diff", "bound", "overlap")

# spawn key reserved for evaluation episodes so they never share a stream with learning
_EVAL_KEY = 1


@dataclass(frozen=True)
class CurveRow:
    update: int
    mean: tuple[float, ...]
    std: tuple[float, ...]
    batch_reward_mean: float
    successes: int


@dataclass
class LearningCurve:
    robot: int
    run: int
    rows: list[CurveRow] = field(default_factory=list)
    status: str = MAX_UPDATES
    error: Optional[str] = None

    @property
    def updates(self) -> int:
        return self.rows[-1].update if self.rows else 0

    @property
    def final_mean(self) -> Optional[tuple[float, ...]]:
        return self.rows[-1].mean if self.rows else None

    @property
    def final_batch_reward(self) -> float:
        return self.rows[-1].batch_reward_mean if self.rows else math.nan


@dataclass
class RunResult:
    curve: LearningCurve
    eval_successes: int = 0
    eval_episodes: int = 0


@dataclass(frozen=True)
class RobotSummary:
    robot: int
    runs: int
    converged: int
    final_reward_mean: float
    final_reward_se: float

    @property
    def convergence_rate(self) -> float:
        return self.converged / self.runs if self.runs else 0.0


@dataclass(frozen=True)
class BenchSummary:
    robots: tuple[RobotSummary, ...]
    overlap: tuple[tuple[int, int, float, float, bool], ...]

    @property
    def all_overlap(self) -> bool:
        return all(o[4] for o in self.overlap)


def run_seed(cfg: ExperimentConfig, robot: int, run: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.seed_base, robot, run, *extra])


def make_env(cfg: ExperimentConfig, robot: int, seed):
    """The episodic env for one robot profile over the configured transport."""
    ws = cfg.workspace()
    imp = cfg.robots[robot]
    if cfg.transport == "protocol":
        env = DialEnv(cfg.env, cfg.geometry, ws, seed=seed)
        return ProtocolEnv(loopback(MockFirmware(env, cfg.geometry, imp)), env)
    return DialEnv(cfg.env, cfg.geometry, ws, robot=SimRobot(cfg.geometry, imp), seed=seed)


def episode(env, params, repeats: int = 1) -> StepOutcome:
    """Reset and execute ``params``; with repeats the reward is averaged and
    success requires every repetition to succeed."""
    outs = []
    for _ in range(repeats):
        env.reset()
        outs.append(env.step(params))
    if repeats == 1:
        return outs[0]
    return StepOutcome(outs[-1].final_angle, float(np.mean([o.reward for o in outs])),
                       all(o.success for o in outs), outs[-1].adc)


def _batch(env, policy, rng, n, repeats) -> list[pol.EpisodeRecord]:
    draws, params = pol.sample(policy, rng, n)
    out = []
    for d, p in zip(draws, params):
        o = episode(env, p, repeats)
        out.append(pol.EpisodeRecord(d, p, o.reward, o.final_angle, o.success))
    return out


def _row(update, policy, batch) -> CurveRow:
    return CurveRow(update, tuple(float(v) for v in policy.mean), tuple(float(v) for v in policy.std),
                    float(np.mean([r.reward for r in batch])), sum(bool(r.success) for r in batch))


def run_experiment(cfg: ExperimentConfig, robot_index: int, run_index: int) -> LearningCurve:
    """One learning run. Component errors end the run with status ``failed``."""
    reps = cfg.reps
    curve = LearningCurve(robot_index, run_index)
    policy_seed, env_seed = run_seed(cfg, robot_index, run_index).spawn(2)
    rng = np.random.default_rng(policy_seed)
    try:
        env = make_env(cfg, robot_index, env_seed)
        policy = pol.init_policy(reps)
        replay = _batch(env, policy, rng, reps.init_batch, reps.reward_repeats)
        curve.rows.append(_row(0, policy, replay))
        for update in range(1, reps.max_updates + 1):
            policy, _ = pol.reps_update(policy, replay, reps)
            batch = _batch(env, policy, rng, reps.batch, reps.reward_repeats)
            replay = (replay + batch)[-reps.replay_window:]
            curve.rows.append(_row(update, policy, batch))
            if pol.should_terminate(batch, reps):
                curve.status = CONVERGED
                break
    except Exception as exc:  # recorded, never dropped
        curve.status = FAILED
        curve.error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
    return curve


def evaluate(cfg: ExperimentConfig, robot_index: int, params, episodes: int, seed) -> int:
    """Successes of the deterministic parameters ``params`` over ``episodes`` episodes."""
    env = make_env(cfg, robot_index, seed)
    p = np.clip(np.asarray(params, dtype=float), -1.0, 1.0)
    return sum(bool(episode(env, p, cfg.reps.reward_repeats).success) for _ in range(episodes))


def _run_job(args) -> RunResult:
    cfg, robot, run = args
    curve = run_experiment(cfg, robot, run)
    result = RunResult(curve)
    if curve.status == CONVERGED and cfg.eval_episodes > 0:
        seed = run_seed(cfg, robot, run, _EVAL_KEY)
        result.eval_successes = evaluate(cfg, robot, curve.final_mean, cfg.eval_episodes, seed)
        result.eval_episodes = cfg.eval_episodes
    return result


def worker_count(n_jobs: int) -> int:
    cap = os.environ.get("BENCH_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_jobs))


def run_all(cfg: ExperimentConfig, workers: Optional[int] = None) -> list[RunResult]:
    """Every (robot, run) pair, merged in (robot, run) order."""
    jobs = [(cfg, r, k) for r in range(len(cfg.robots)) for k in range(cfg.runs_per_robot)]
    workers = worker_count(len(jobs)) if workers is None else workers
    if workers <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def standard_error(values: Sequence[float]) -> float:
    """Sample SD (ddof=1) over sqrt(n); defined as 0 for a single value."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(np.std(v, ddof=1) / math.sqrt(v.size))


def summarize(n_robots: int, final_rewards: dict, converged: dict) -> BenchSummary:
    """``final_rewards[r]`` lists each run's final-batch mean reward, in run order."""
    robots = []
    for r in range(n_robots):
        vals = np.asarray(final_rewards.get(r, []), dtype=float)
        vals = vals[np.isfinite(vals)]
        mean = float(np.mean(vals)) if vals.size else math.nan
        robots.append(RobotSummary(r, len(final_rewards.get(r, [])), converged.get(r, 0), mean, standard_error(vals)))
    overlap = []
    for i in range(n_robots):
        for j in range(i + 1, n_robots):
            a, b = robots[i], robots[j]
            diff = abs(a.final_reward_mean - b.final_reward_mean)
            bound = 2.0 * (a.final_reward_se + b.final_reward_se)
            overlap.append((i, j, diff, bound, bool(diff <= bound)))
    return BenchSummary(tuple(robots), tuple(overlap))


def summarize_results(n_robots: int, results: Sequence[RunResult]) -> BenchSummary:
    finals, conv = {}, {}
    for res in results:
        c = res.curve
        finals.setdefault(c.robot, []).append(c.final_batch_reward)
        conv[c.robot] = conv.get(c.robot, 0) + (c.status == CONVERGED)
    return summarize(n_robots, finals, conv)


def _f(v: float) -> str:
    return repr(float(v))


def curve_records(curve: LearningCurve) -> list[list[str]]:
    return [[str(curve.robot), str(curve.run), str(row.update), *map(_f, row.mean), *map(_f, row.std),
             _f(row.batch_reward_mean), str(row.successes), curve.status] for row in curve.rows]


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def curve_path(out: Path, robot: int, run: int) -> Path:
    return Path(out) / "curves" / f"robot{robot}_run{run}.csv"


def write_results(cfg: ExperimentConfig, results: Sequence[RunResult], summary: BenchSummary, out) -> None:
    out = Path(out)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dump_config(cfg))
    finals = []
    for res in results:
        c = res.curve
        _write_csv(curve_path(out, c.robot, c.run), CURVE_COLUMNS, curve_records(c))
        mean = c.final_mean or (math.nan,) * pol.DIM
        finals.append([str(c.robot), str(c.run), c.status, str(c.updates), *map(_f, mean),
                       _f(c.final_batch_reward), str(res.eval_successes), str(res.eval_episodes)])
    _write_csv(out / "final_means.csv", FINAL_COLUMNS, finals)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, [
        [str(s.robot), str(s.runs), str(s.converged), _f(s.convergence_rate), _f(s.final_reward_mean),
         _f(s.final_reward_se)] for s in summary.robots])
    _write_csv(out / "overlap.csv", OVERLAP_COLUMNS, [
        [str(i), str(j), _f(d), _f(b), "true" if ok else "false"] for i, j, d, b, ok in summary.overlap])
    errors = [f"robot {r.curve.robot} run {r.curve.run}: {r.curve.error}" for r in results if r.curve.error]
    if errors:
        (out / "errors.txt").write_text("\n".join(errors) + "\n")


def run_benchmark(cfg: ExperimentConfig, out=None, workers: Optional[int] = None,
                  plots: bool = True) -> tuple[BenchSummary, list[RunResult]]:
    results = run_all(cfg, workers)
    summary = summarize_results(len(cfg.robots), results)
    if out is not None:
        write_results(cfg, results, summary, out)
        if plots:
            from .plots import emit_plots
            emit_plots([r.curve for r in results], summary, out)
    return summary, results


# ---- reading a finished benchmark back -----------------------------------

def read_curve(path) -> LearningCurve:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"empty curve file {path}")
    curve = LearningCurve(int(rows[0]["robot"]), int(rows[0]["run"]), status=rows[0]["status"])
    for r in rows:
        curve.rows.append(CurveRow(int(r["update"]), tuple(float(r[f"mean{i}"]) for i in range(1, 5)),
                                   tuple(float(r[f"std{i}"]) for i in range(1, 5)),
                                   float(r["batch_reward_mean"]), int(r["successes"])))
    return curve


def read_curves(out) -> list[LearningCurve]:
    curves = [read_curve(p) for p in Path(out, "curves").glob("robot*_run*.csv")]
    return sorted(curves, key=lambda c: (c.robot, c.run))


def read_final_means(out) -> list[dict]:
    with open(Path(out) / "final_means.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def summary_from_dir(out) -> BenchSummary:
    """Recompute the summary from the curve files alone."""
    cfg = load_config(Path(out) / "config.ini")
    finals, conv = {}, {}
    for c in read_curves(out):
        finals.setdefault(c.robot, []).append(c.final_batch_reward)
        conv[c.robot] = conv.get(c.robot, 0) + (c.status == CONVERGED)
    return summarize(len(cfg.robots), finals, conv)


# ---- zero-shot transfer ---------------------------------------------------

@dataclass(frozen=True)
class TransferEntry:
    source_robot: int
    source_run: int
    target_robot: int
    success: bool
    final_angle: float


def zero_shot_transfer(cfg: ExperimentConfig, learned: Sequence[tuple[int, int, Sequence[float]]]) -> list[TransferEntry]:
    """Run each learned mean once, without sampling, on every robot profile.

    ``learned`` holds ``(robot, run, mean)`` triples. A failed episode is
    recorded as data; kinematic or device errors count as failure.
    """
    out = []
    for src, run, mean in learned:
        p = np.clip(np.asarray(mean, dtype=float), -1.0, 1.0)
        for tgt in range(len(cfg.robots)):
            try:
                env = make_env(cfg, tgt, run_seed(cfg, src, run, _EVAL_KEY, tgt))
                o = episode(env, p, 1)
                out.append(TransferEntry(src, run, tgt, bool(o.success), float(o.final_angle)))
            except Exception:
                out.append(TransferEntry(src, run, tgt, False, math.nan))
    return out


def converged_means(results: Sequence[RunResult]) -> list[tuple[int, int, tuple[float, ...]]]:
    return [(r.curve.robot, r.curve.run, r.curve.final_mean) for r in results if r.curve.status == CONVERGED]


def transfer_from_dir(out) -> list[TransferEntry]:
    cfg = load_config(Path(out) / "config.ini")
    learned = [(int(r["robot"]), int(r["run"]), tuple(float(r[f"mean{i}"]) for i in range(1, 5)))
               for r in read_final_means(out) if r["status"] == CONVERGED]
    entries = zero_shot_transfer(cfg, learned)
    _write_csv(Path(out) / "transfer.csv", ("source_robot", "source_run", "target_robot", "success", "final_angle"),
               [[str(e.source_robot), str(e.source_run), str(e.target_robot), "true" if e.success else "false",
                 _f(e.final_angle)] for e in entries])
    return entries
