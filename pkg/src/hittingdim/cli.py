"""``hittingdim`` command line: run an experiment, write CSV, report, manifest and plots."""

from __future__ import annotations

import argparse
import os
import sys
import warnings

from . import report as rp
from .config import EXPERIMENTS, OUT_ENV, parse_overrides, read_config_file, resolve
from .correlation import decay_fit
from .dimension import ball_measure, local_dimension
from .errors import (ConfigError, DivergenceWarning, InsufficientSample, InsufficientSignal,
                     UndeterminedDecay)
from .experiments import default_sampling, run_correlation, run_hitting_trials
from .sbc import build_targets, check_corollary, sbc_ensemble
from .systems import sample_measure
from .verify import run_all

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_VERIFY = 0, 2, 3, 4


class Degenerate(Exception):
    """The run finished but its result carries no information."""


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hittingdim", description=__doc__)
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="flat key = value file (a manifest works too)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key; may be repeated")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<experiment>)")
    p.add_argument("--jobs", type=int, help="worker processes (0 = all cores)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    return p


def _overrides(args) -> dict:
    out = parse_overrides(args.set)
    for key in ("out", "jobs", "seed"):
        val = getattr(args, key)
        if val is not None:
            out[key] = str(val)
    if args.no_plots:
        out["plots"] = "0"
    return out


def run_hit(cfg, out: str) -> list[str]:
    trials = run_hitting_trials(cfg.system, cfg.x0, cfg.ladder, cfg.trials, cfg.seed, cfg.n_max,
                                cfg.tail_window, cfg.mode == "recurrence", cfg.jobs)
    x0 = cfg.x0 if cfg.mode == "hitting" else "start"
    files = [rp.write_csv(os.path.join(out, "hit_trials.csv"), rp.HIT_HEADER,
                          rp.hit_rows(trials, cfg.raw["system"], x0, cfg.ladder.ks)),
             rp.write_csv(os.path.join(out, "hit_summary.csv"), rp.HIT_SUMMARY_HEADER,
                          rp.hit_summary_rows(trials)),
             rp.write_text(os.path.join(out, "report.txt"), rp.hit_report(trials, cfg))]
    if cfg.plots:
        files += rp.hit_plots(trials, out)
    if all(t.estimate is None or t.estimate.infinite for t in trials):
        raise Degenerate("every trial was censored in the tail window")
    return files


def run_dim(cfg, out: str) -> list[str]:
    sys_ = cfg.system
    if cfg.method is None and sys_.measure == "lebesgue_exact":
        measure, mode = sys_, "exact"
    else:
        method = cfg.method or default_sampling(sys_)
        measure, mode = sample_measure(sys_, cfg.M, cfg.seed, method), method
    radii = cfg.ladder.radii()
    mu = [ball_measure(measure, cfg.x0, float(r)) for r in radii]
    files = [rp.write_csv(os.path.join(out, "dim_balls.csv"), rp.DIM_HEADER,
                          rp.dim_rows(cfg.seed, cfg.x0, cfg.ladder.ks, radii, mu, mode))]
    try:
        est = local_dimension(measure, cfg.x0, cfg.ladder, cfg.tail_window)
    except InsufficientSample as exc:
        files.append(rp.write_text(os.path.join(out, "report.txt"),
                                   f"experiment: dim\nmode: {mode}\ninsufficient sample: {exc}\n"))
        raise Degenerate(str(exc)) from None
    files.append(rp.write_csv(os.path.join(out, "dim_summary.csv"), rp.DIM_SUMMARY_HEADER,
                              [(cfg.seed, cfg.x0, est.slope_ls, est.slope_upper, est.slope_lower)]))
    text = (f"experiment: dim\nsystem: {cfg.raw['system']}\nmode: {mode}\nx0: {rp.fmt(cfg.x0)}\n"
            f"ladder: {cfg.ladder}\ntail window: {est.tail_window}\n"
            f"d_ls: {est.slope_ls!r}\nd_upper: {est.slope_upper!r}\nd_lower: {est.slope_lower!r}\n"
            f"excluded radii: {rp.fmt(est.excluded)}\n")
    files.append(rp.write_text(os.path.join(out, "report.txt"), text))
    if cfg.plots:
        files += rp.dim_plots(est, out)
    return files


def run_sbc(cfg, out: str) -> list[str]:
    sys_ = cfg.system
    targets = build_targets(cfg.x0, cfg.ladder, cfg.shape)
    if sys_.measure == "lebesgue_exact":
        measure = sys_
    else:
        measure = sample_measure(sys_, cfg.M, cfg.seed, default_sampling(sys_))
    cor = check_corollary(targets, measure, cfg.decay, cfg.alpha, cfg.epsilon)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DivergenceWarning)
        rep = sbc_ensemble(sys_, targets, cfg.n_max, cfg.trials, cfg.seed, cfg.decay,
                           report=cor, measure_mode=measure, checkpoints=cfg.checkpoints,
                           jobs=cfg.jobs)
    files = [rp.write_csv(os.path.join(out, "sbc_trials.csv"), rp.SBC_HEADER, rp.sbc_rows(rep)),
             rp.write_csv(os.path.join(out, "sbc_variance.csv"), rp.SBC_VARIANCE_HEADER,
                          rp.sbc_variance_rows(rep, cfg.seed)),
             rp.write_text(os.path.join(out, "corollary.txt"), cor.as_text()),
             rp.write_text(os.path.join(out, "report.txt"), rp.sbc_report(rep, cor, cfg))]
    if cfg.plots:
        files += rp.sbc_plots(rep, out)
    if not rep.EZ[-1] > 0:
        raise Degenerate("target measures sum to zero up to n_max")
    return files


def run_corr(cfg, out: str) -> list[str]:
    series = run_correlation(cfg.system, cfg.phi, cfg.psi, cfg.M, cfg.seed, cfg.lags, cfg.method)
    try:
        model, note = decay_fit(series), ""
    except InsufficientSignal as exc:
        model, note = None, str(exc)
    files = [rp.write_csv(os.path.join(out, "corr_series.csv"), rp.CORR_HEADER,
                          rp.corr_rows(series, model, cfg.seed))]
    if model is not None:
        files.append(rp.write_csv(os.path.join(out, "corr_model.csv"), rp.CORR_MODEL_HEADER,
                                  [(cfg.seed, model.cls, model.param, model.C,
                                    rp.quality_text(model.quality))]))
    files.append(rp.write_text(os.path.join(out, "report.txt"),
                               rp.corr_report(series, model, note, cfg)))
    if cfg.plots:
        files += rp.corr_plots(series, model, out)
    if model is None:
        raise Degenerate(note)
    return files


def run_verify(out: str | None) -> int:
    checks = run_all()
    lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in checks]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if out:
        os.makedirs(out, exist_ok=True)
        rp.write_text(os.path.join(out, "verify.txt"), text)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


RUNNERS = {"hit": run_hit, "dim": run_dim, "sbc": run_sbc, "corr": run_corr}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args.experiment, read_config_file(args.config), _overrides(args))
    except (ConfigError, OSError) as exc:
        print(f"hittingdim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.experiment == "verify":
        return run_verify(args.out)
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    rp.write_text(os.path.join(out, "manifest.ini"), cfg.manifest())
    try:
        files = RUNNERS[cfg.experiment](cfg, out)
    except ConfigError as exc:
        print(f"hittingdim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Degenerate, InsufficientSample, InsufficientSignal, UndeterminedDecay) as exc:
        print(f"hittingdim: degenerate result: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
