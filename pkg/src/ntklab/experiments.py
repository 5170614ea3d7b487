"""Experiment orchestration: convergence comparison, width sweep, dynamics
audit, and plot emission. Every output is a headered CSV (byte-identical
on re-run) plus, for figures, an SVG rendering of the same data."""

from __future__ import annotations

import csv
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dynamics, metrics, network, ntk, optimizers
from .config import ExperimentConfig
from .data import Dataset
from .ntk import HyperParams, Method
from .optimizers import DivergenceError, OptimizerState, ResidualTrace

WORKERS_ENV = "NTKLAB_WORKERS"

TRACE_COLUMNS = ["t", "loss", "residual_norm", "max_dist", "pattern_ratio", "sup_flip_count"]
DECOMP_COLUMNS = [
    "t", "psi_norm", "phi_norm", "mu_norm", "phi_bound_pass_count",
    "envelope_bound", "envelope_value", "envelope_ok",
]


def worker_cap() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return min(4, os.cpu_count() or 1)


def _atomic_write_csv(path: Path, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    return v


def derive_hyperparams_for(ds: Dataset, method: Method, convention) -> HyperParams:
    ss = ntk.spectrum_summary(ntk.analytic_ntk(ds))
    return ntk.derive_hyperparams(ss, method, convention)


def single_run(
    ds: Dataset,
    hp: HyperParams,
    m: int,
    net_seed: int,
    T: int,
    stride: int,
    audit: bool = False,
) -> ResidualTrace:
    s = network.init(m, ds.d, net_seed)
    os_ = OptimizerState.fresh(hp, s)
    trace = optimizers.train(s, os_, ds, T, stride=stride, audit=audit)
    trace.final_state = s
    return trace


def write_trace_csv(trace: ResidualTrace, path: Path):
    rows = [
        [ms.t, ms.loss, ms.residual_norm, ms.max_dist, ms.pattern_ratio, ms.sup_flip_count]
        for ms in trace.metric_samples
    ]
    _atomic_write_csv(path, TRACE_COLUMNS, rows)


@dataclass
class RunResult:
    method: Method
    width: int
    seed: int
    trace: ResidualTrace | None = None
    error: str | None = None


def _run_grid(ds, jobs, cfg) -> list[RunResult]:
    """Run independent (method, width, seed) jobs, worker cap from the env."""
    hps = {
        method: derive_hyperparams_for(ds, method, cfg.lambda_convention)
        for method in {m for m, _, _ in jobs}
    }

    def one(job):
        method, width, seed = job
        res = RunResult(method=method, width=width, seed=seed)
        try:
            res.trace = single_run(ds, hps[method], width, seed, cfg.iterations, cfg.stride)
        except DivergenceError as exc:
            res.error = str(exc)
        return res

    cap = worker_cap()
    if cap == 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(one, jobs))


@dataclass
class ConvergenceSummary:
    iters: dict  # (method, seed) -> int | None
    diverged: list[RunResult] = field(default_factory=list)
    trace_files: list[Path] = field(default_factory=list)


def run_convergence(cfg: ExperimentConfig, ds: Dataset | None = None) -> ConvergenceSummary:
    """Train each method with each seed at the largest configured width and
    summarize loss curves plus iterations-to-threshold."""
    cfg.validate()
    ds = ds or cfg.load_dataset()
    width = max(cfg.widths)
    outdir = Path(cfg.outdir) / "converge"
    jobs = [(method, width, seed) for method in cfg.methods for seed in cfg.seeds]
    results = _run_grid(ds, jobs, cfg)

    summary = ConvergenceSummary(iters={})
    by_method: dict[Method, list[np.ndarray]] = {m: [] for m in cfg.methods}
    rows = []
    for res in results:
        if res.error:
            summary.diverged.append(res)
            rows.append([res.method.value, res.seed, "diverged", res.error])
            continue
        path = outdir / f"trace_{res.method.value}_s{res.seed}.csv"
        write_trace_csv(res.trace, path)
        summary.trace_files.append(path)
        hit = metrics.iters_to_threshold(res.trace.losses, cfg.threshold_frac)
        summary.iters[(res.method, res.seed)] = hit
        by_method[res.method].append(res.trace.losses)
        rows.append([res.method.value, res.seed, "" if hit is None else hit, ""])
    _atomic_write_csv(outdir / "summary.csv", ["method", "seed", "iters_to_threshold", "note"], rows)

    # mean/min/max loss bands per method, one row per iteration
    curve_rows = []
    methods_ok = [m for m in cfg.methods if by_method[m]]
    for t in range(cfg.iterations + 1):
        row = [t]
        for m in methods_ok:
            stack = np.array([ls[t] for ls in by_method[m]])
            row += [stack.mean(), stack.min(), stack.max()]
        curve_rows.append(row)
    header = ["t"] + [f"{m.value}_{k}" for m in methods_ok for k in ("mean", "min", "max")]
    _atomic_write_csv(outdir / "loss_curves.csv", header, curve_rows)
    return summary


@dataclass
class SweepSummary:
    final_values: dict  # (method, width) -> (median max_dist, median pattern_ratio)
    diverged: list[RunResult] = field(default_factory=list)
    outdir: Path | None = None


def run_width_sweep(cfg: ExperimentConfig, ds: Dataset | None = None) -> SweepSummary:
    """Train every configured method at every width, reporting per-width
    medians of the drift metrics over seeds."""
    cfg.validate()
    ds = ds or cfg.load_dataset()
    outdir = Path(cfg.outdir) / "sweep"
    jobs = [
        (method, width, seed)
        for method in cfg.methods for width in cfg.widths for seed in cfg.seeds
    ]
    results = _run_grid(ds, jobs, cfg)

    summary = SweepSummary(final_values={}, outdir=outdir)
    grouped: dict[tuple[Method, int], list[ResidualTrace]] = {}
    for res in results:
        if res.error:
            summary.diverged.append(res)
            continue
        grouped.setdefault((res.method, res.width), []).append(res.trace)

    traj_rows, final_rows = [], []
    for (method, width), traces in sorted(grouped.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        sample_ts = [ms.t for ms in traces[0].metric_samples]
        for k, t in enumerate(sample_ts):
            med_dist = float(np.median([tr.metric_samples[k].max_dist for tr in traces]))
            med_ratio = float(np.median([tr.metric_samples[k].pattern_ratio for tr in traces]))
            traj_rows.append([method.value, width, t, med_dist, med_ratio])
        final = (traj_rows[-1][3], traj_rows[-1][4])
        summary.final_values[(method, width)] = final
        final_rows.append([method.value, width, final[0], final[1]])
    _atomic_write_csv(
        outdir / "sweep_trajectories.csv",
        ["method", "width", "t", "median_max_dist", "median_pattern_ratio"],
        traj_rows,
    )
    _atomic_write_csv(
        outdir / "sweep_final.csv",
        ["method", "width", "final_median_max_dist", "final_median_pattern_ratio"],
        final_rows,
    )
    return summary


@dataclass
class AuditReport:
    hp: HyperParams
    envelope: dynamics.EnvelopeReport
    weight_distance: dynamics.WeightDistanceReport
    concentration: ntk.ConcentrationReport
    decompositions: list[dynamics.Decomposition]
    flip_checks: list[dynamics.FlipBoundCheck]
    predictor_deviation: np.ndarray
    trace: ResidualTrace

    @property
    def flip_pass_rate(self) -> float:
        total = sum(fc.per_index_ok.size for fc in self.flip_checks)
        passed = sum(int(fc.per_index_ok.sum()) for fc in self.flip_checks)
        return passed / total if total else 1.0


def run_dynamics_audit(cfg: ExperimentConfig, ds: Dataset | None = None) -> AuditReport:
    """One fully-instrumented NAG run: step-defect decomposition, flip-term
    bound checks, residual and weight-distance envelopes, init-time kernel
    concentration, and the homogeneous linear predictor's deviation."""
    cfg.validate()
    if Method.NAG not in cfg.methods:
        raise ValueError("dynamics audit requires NAG in the method set")
    ds = ds or cfg.load_dataset()
    width = max(cfg.widths)
    seed = cfg.seeds[0]
    outdir = Path(cfg.outdir) / "audit"

    hp = derive_hyperparams_for(ds, Method.NAG, cfg.lambda_convention)
    trace = single_run(ds, hp, width, seed, cfg.iterations, cfg.stride, audit=True)

    H0 = trace.gram_snapshots[0]
    Hbar = ntk.analytic_ntk(ds)
    cm = dynamics.build_companion(H0, hp)
    ep = dynamics.tuned_decay_bounds(hp.kappa_bar)

    decomps = dynamics.decompose_trace(trace, cm)
    rnorms = np.linalg.norm(trace.residuals, axis=1)
    flip_checks = [
        dynamics.check_flip_bound(
            dec, rnorms, int(trace.sup_flip_counts[dec.t + 1]), trace.m, hp.eta, hp.beta
        )
        for dec in decomps
    ]
    env = dynamics.residual_envelope(trace, ep)
    wd = dynamics.weight_distance_envelope(
        trace.max_dist_overall, hp.kappa_bar, hp.lam, ds.n, trace.m, trace.residual_norm(0)
    )
    conc = ntk.concentration_check(H0, Hbar)

    z0 = np.concatenate([trace.xi(0), trace.xi(-1)])
    horizon = min(100, cfg.iterations)
    pred = dynamics.linear_predictor(z0, cm, horizon)
    actual = np.array([trace.z_norm(t) for t in range(horizon + 1)])
    deviation = np.abs(pred - actual) / np.maximum(actual, 1e-300)

    report = AuditReport(
        hp=hp, envelope=env, weight_distance=wd, concentration=conc,
        decompositions=decomps, flip_checks=flip_checks,
        predictor_deviation=deviation, trace=trace,
    )

    fc_by_t = {fc.t: fc for fc in flip_checks}
    rows = []
    for dec in decomps:
        fc = fc_by_t[dec.t]
        rows.append([
            dec.t,
            float(np.linalg.norm(dec.psi)),
            float(np.linalg.norm(dec.phi)),
            float(np.linalg.norm(dec.mu)),
            int(fc.per_index_ok.sum()),
            float(env.bounds[dec.t]),
            float(env.values[dec.t]),
            bool(env.ok[dec.t]),
        ])
    _atomic_write_csv(outdir / "decomposition.csv", DECOMP_COLUMNS, rows)
    _atomic_write_csv(
        outdir / "predictor_deviation.csv",
        ["t", "predicted_norm", "actual_norm", "relative_deviation"],
        [[t, pred[t], actual[t], deviation[t]] for t in range(horizon + 1)],
    )
    _atomic_write_csv(
        outdir / "audit_summary.csv",
        ["key", "value"],
        [
            ["eta", hp.eta], ["beta", hp.beta], ["kappa_bar", hp.kappa_bar],
            ["envelope_pass_rate", env.pass_rate],
            ["weight_distance_bound", wd.bound],
            ["weight_distance_measured", wd.max_measured],
            ["weight_distance_ok", wd.ok],
            ["flip_bound_pass_rate", report.flip_pass_rate],
            ["concentration_fro_gap", conc.fro_gap],
            ["concentration_all_ok", conc.all_ok],
            ["kappa_H0_bounded", conc.kappa_ok],
        ],
    )
    write_trace_csv(trace, outdir / "trace_nag.csv")
    return report


def emit_plots(outdir: str | Path) -> list[Path]:
    """Render SVG figures from previously written CSVs under ``outdir``.

    Missing inputs are skipped with a warning; an empty directory yields no
    images and succeeds.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    images = []

    curves = outdir / "converge" / "loss_curves.csv"
    if curves.exists():
        with curves.open() as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        fig, ax = plt.subplots(figsize=(6, 4))
        t = body[:, 0]
        for k in range(1, len(header), 3):
            name = header[k].rsplit("_", 1)[0]
            ax.plot(t, body[:, k], label=name.upper())
            ax.fill_between(t, body[:, k + 1], body[:, k + 2], alpha=0.2)
        ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel("training loss")
        ax.legend()
        img = outdir / "converge" / "loss_curves.svg"
        fig.savefig(img)
        plt.close(fig)
        images.append(img)

    final = outdir / "sweep" / "sweep_final.csv"
    if final.exists():
        with final.open() as fh:
            rows = list(csv.reader(fh))[1:]
        series: dict[str, list[tuple[int, float, float]]] = {}
        for method, width, dist, ratio in rows:
            series.setdefault(method, []).append((int(width), float(dist), float(ratio)))
        for idx, ylabel in ((1, "final median max distance"), (2, "final median pattern ratio")):
            fig, ax = plt.subplots(figsize=(6, 4))
            for method, pts in sorted(series.items()):
                pts = sorted(pts)
                ax.plot([p[0] for p in pts], [p[idx] for p in pts], marker="o", label=method.upper())
            ax.set_xscale("log", base=2)
            ax.set_xlabel("width m")
            ax.set_ylabel(ylabel)
            ax.legend()
            img = outdir / "sweep" / f"sweep_{ylabel.split()[-2]}_{ylabel.split()[-1]}.svg"
            fig.savefig(img)
            plt.close(fig)
            images.append(img)

    dev = outdir / "audit" / "predictor_deviation.csv"
    if dev.exists():
        body = np.array(list(csv.reader(dev.open()))[1:], dtype=float)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(body[:, 0], body[:, 1], label="linear predictor")
        ax.plot(body[:, 0], body[:, 2], label="measured")
        ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel("stacked residual norm")
        ax.legend()
        img = outdir / "audit" / "predictor.svg"
        fig.savefig(img)
        plt.close(fig)
        images.append(img)

    return images
