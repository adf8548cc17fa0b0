"""CSV, text and PNG artifacts for experiment runs.

CSV floats are written with ``repr`` so reruns produce byte-identical files.
Plots are optional and use the non-interactive Agg backend.
"""

from __future__ import annotations

import csv
import math
import os

import numpy as np

from .correlation import CorrelationSeries, DecayModel
from .sbc import CorollaryReport, EnsembleReport

HIT_HEADER = ["trial", "seed", "system", "x0", "k", "r", "tau", "censored"]
HIT_SUMMARY_HEADER = ["trial", "seed", "slope_ls", "slope_upper", "slope_lower", "infinite"]
DIM_HEADER = ["seed", "x0", "k", "r", "mu_ball", "mode"]
DIM_SUMMARY_HEADER = ["seed", "x0", "d_ls", "d_upper", "d_lower"]
SBC_HEADER = ["trial", "seed", "N", "Z", "EZ", "ratio"]
SBC_VARIANCE_HEADER = ["seed", "N", "var_emp", "bound", "ratio"]
CORR_HEADER = ["seed", "n", "c_hat", "se", "used_in_fit"]
CORR_MODEL_HEADER = ["seed", "class", "param", "C", "quality"]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return " ".join(fmt(x) for x in v)
    return str(v)


def write_csv(path: str, header, rows) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_text(path: str, text: str) -> str:
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    _plt().close(fig)
    return path


# ---------------------------------------------------------------- hit


def hit_rows(trials, system: str, x0, ks):
    for t in trials:
        if t.estimate is None:
            continue
        for k, rec in zip(ks, t.estimate.records):
            yield (t.trial, t.seed, system, x0, int(k), rec.radius, rec.tau, rec.censored)


def hit_summary_rows(trials):
    for t in trials:
        e = t.estimate
        if e is None:
            yield (t.trial, t.seed, math.nan, math.nan, math.nan, False)
        else:
            yield (t.trial, t.seed, e.slope_ls, e.slope_upper, e.slope_lower, e.infinite)


def hit_report(trials, cfg) -> str:
    slopes = np.array([t.estimate.slope_ls for t in trials
                       if t.estimate is not None and not t.estimate.infinite])
    errors = [t for t in trials if t.estimate is None]
    lines = [f"experiment: {cfg.experiment} ({cfg.mode})",
             f"system: {cfg.raw['system']}", f"x0: {fmt(cfg.x0)}", f"ladder: {cfg.ladder}",
             f"tail window: {cfg.tail_window}", f"trials: {len(trials)}",
             f"finite estimates: {slopes.size}",
             f"infinite (censored tail): {sum(1 for t in trials if t.estimate and t.estimate.infinite)}",
             f"precision exhausted: {len(errors)}"]
    if slopes.size:
        q = np.quantile(slopes, [0.1, 0.5, 0.9])
        lines.append(f"slope_ls mean {slopes.mean():.4f} median {q[1]:.4f} "
                     f"10%-90% [{q[0]:.4f}, {q[2]:.4f}]")
    return "\n".join(lines) + "\n"


def hit_plots(trials, out: str) -> list[str]:
    plt = _plt()
    paths = []
    fig, ax = plt.subplots(figsize=(5, 4))
    for t in trials[:50]:
        e = t.estimate
        if e is None or e.infinite:
            continue
        ax.plot(e.points[:, 0], e.points[:, 1], lw=0.6, alpha=0.5)
    ax.set_xlabel("-log r")
    ax.set_ylabel("log tau")
    paths.append(_save(fig, os.path.join(out, "hit_curves.png")))
    slopes = [t.estimate.slope_ls for t in trials
              if t.estimate is not None and not t.estimate.infinite]
    fig, ax = plt.subplots(figsize=(5, 4))
    if slopes:
        ax.hist(slopes, bins=min(30, max(5, len(slopes) // 4)))
    ax.set_xlabel("least-squares slope")
    ax.set_ylabel("trials")
    paths.append(_save(fig, os.path.join(out, "hit_slopes.png")))
    return paths


# ---------------------------------------------------------------- dim


def dim_rows(seed, x0, ks, radii, mu, mode):
    for k, r, m in zip(ks, radii, mu):
        yield (seed, x0, int(k), float(r), float(m), mode)


def dim_plots(est, out: str) -> list[str]:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(est.points[:, 0], est.points[:, 1], "o-")
    ax.set_xlabel("log r")
    ax.set_ylabel("log mu(B(x0, r))")
    ax.set_title(f"slope {est.slope_ls:.3f}")
    return [_save(fig, os.path.join(out, "dim_scaling.png"))]


# ---------------------------------------------------------------- sbc


def sbc_rows(rep: EnsembleReport):
    for i, seed in enumerate(rep.seeds):
        for j, N in enumerate(rep.checkpoints):
            z, ez = rep.Z[i, j], rep.EZ[j]
            yield (i, seed, int(N), int(z), float(ez), float(z / ez) if ez > 0 else math.nan)


def sbc_variance_rows(rep: EnsembleReport, seed: int):
    for j, N in enumerate(rep.checkpoints):
        bound = rep.bound[j] if rep.bound is not None else math.nan
        ratio = rep.bound_ratio[j] if rep.bound_ratio is not None else math.nan
        yield (seed, int(N), float(rep.var_Z[j]), float(bound), float(ratio))


def sbc_report(rep: EnsembleReport, cor: CorollaryReport, cfg) -> str:
    lines = [f"experiment: sbc", f"system: {cfg.raw['system']}", f"x0: {fmt(cfg.x0)}",
             f"ladder: {cfg.ladder}", f"trials: {len(rep.seeds)}", f"verdict: {cor.verdict}",
             "checkpoint  mean_ratio  sd_ratio  var/bound"]
    for j, N in enumerate(rep.checkpoints):
        br = rep.bound_ratio[j] if rep.bound_ratio is not None else math.nan
        lines.append(f"{int(N):>10d}  {rep.mean_ratio[j]:10.5f}  {rep.sd_ratio[j]:8.5f}  {br:9.4g}")
    lines.append(f"variance within bound: {rep.within_bound}")
    return "\n".join(lines) + "\n"


def sbc_plots(rep: EnsembleReport, out: str) -> list[str]:
    plt = _plt()
    paths = []
    fig, ax = plt.subplots(figsize=(5, 4))
    N = rep.checkpoints
    ratios = rep.Z / rep.EZ
    for row in ratios[:50]:
        ax.plot(N, row, lw=0.5, alpha=0.4, color="grey")
    ax.plot(N, rep.mean_ratio, "k-", lw=1.5)
    ax.axhline(1.0, color="r", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("N")
    ax.set_ylabel("Z_N / E Z_N")
    paths.append(_save(fig, os.path.join(out, "sbc_ratio.png")))
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(N, rep.var_Z, "o-", label="empirical variance")
    if rep.bound is not None:
        ax.loglog(N, rep.bound, "s--", label="bound")
    ax.set_xlabel("N")
    ax.legend()
    paths.append(_save(fig, os.path.join(out, "sbc_variance.png")))
    return paths


# ---------------------------------------------------------------- corr


def corr_rows(series: CorrelationSeries, model: DecayModel | None, seed: int):
    used = set() if model is None else {int(n) for n in model.used_lags}
    for n, c, se in zip(series.lags, series.c_hat, series.se):
        yield (seed, int(n), float(c), float(se), int(n) in used)


def quality_text(q: dict) -> str:
    return ";".join(f"{k}={fmt(v)}" for k, v in sorted(q.items()))


def corr_report(series: CorrelationSeries, model: DecayModel | None, note: str, cfg) -> str:
    lines = [f"experiment: corr", f"system: {cfg.raw['system']}", f"observables: {series.label}",
             f"lags: {len(series.lags)}, above noise: {int(np.count_nonzero(series.above_noise))}"]
    if model is None:
        lines.append(f"decay: not fitted ({note})")
    else:
        lines.append(f"decay class: {model.cls}")
        lines.append(f"param: {model.param!r}  C: {model.C!r}")
        lines.append(f"quality: {quality_text(model.quality)}")
    return "\n".join(lines) + "\n"


def corr_plots(series: CorrelationSeries, model: DecayModel | None, out: str) -> list[str]:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 4))
    n = series.lags
    mag = np.abs(series.c_hat) / series.norm
    keep = mag > 0
    ax.semilogy(n[keep], mag[keep], ".", label="|c_hat| / norm")
    ax.semilogy(n, 3 * series.se / series.norm, "-", lw=0.8, label="3 se")
    if model is not None and model.cls in ("exponential", "polynomial"):
        ax.semilogy(n, model(n), "--", label=f"{model.cls} fit")
    ax.set_xscale("log")
    ax.set_xlabel("lag n")
    ax.legend()
    return [_save(fig, os.path.join(out, "corr_decay.png"))]
