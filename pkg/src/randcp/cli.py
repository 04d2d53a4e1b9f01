"""Command-line interface: ``randcp <subcommand> ...``.

Exit status 0 means the command ran; test decisions live in the JSON
output. Exit status 1 signals an error (bad input, unreadable file,
degenerate series).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, NoReturn, Sequence

import numpy as np

from randcp import __version__, asymptotics
from randcp.core import detect
from randcp.errors import RandcpError
from randcp.experiments import ExperimentResult, ExperimentSpec, Pipeline, load_spec, run_experiment
from randcp.expfam import MODEL_KINDS, ExpFamilyModel
from randcp.mc import EmpiricalDist, MonteCarloConfig, replicate_rng
from randcp.nonparam import DEFAULT_C, nonparam_test
from randcp.plots import histogram_edges, write_histogram_svg, write_path_svg
from randcp.schema import SCHEMA_VERSION
from randcp.simgen import ItoConfig, LocationLaw, SimConfig, gen_amoc_normal, gen_ito_path

FIGURES = ("vol-jump", "mean-jump", "deviation", "ar-dependent", "nonparam-vol")
HIST_BINS = 50
DEFAULT_ARGMAX_SAMPLES = 10_000


class CliError(Exception):
    """User-facing failure; the message is printed and the exit status is 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# -- input / output helpers ---------------------------------------------------------


def read_series(path: str | Path, *, header: bool = False) -> np.ndarray:
    """Read one observation per row; multivariate rows are comma separated."""
    p = Path(path)
    try:
        with p.open(encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(f"cannot read {p}: {exc.strerror}") from exc
    if header:
        rows = rows[1:]
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise CliError(f"{p}: no observations found")
    width = len(rows[0])
    try:
        data = np.array([[float(cell) for cell in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise CliError(f"{p}: cannot parse a number ({exc})") from exc
    except Exception as exc:
        raise CliError(f"{p}: rows must all have {width} columns") from exc
    if data.ndim != 2 or data.shape[1] != width:
        raise CliError(f"{p}: rows must all have {width} columns")
    if not np.all(np.isfinite(data)):
        raise CliError(f"{p}: observations must be finite")
    return data[:, 0] if width == 1 else data


def _fmt(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _human(value: Any) -> str:
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_human(v)}" for k, v in value.items()) + "}"
    if isinstance(value, list):
        return "[" + ", ".join(_human(v) for v in value) + "]"
    return _fmt(value)


def emit(doc: dict[str, Any], fmt: str) -> None:
    if fmt == "json":
        sys.stdout.write(json.dumps(doc, indent=2, allow_nan=False) + "\n")
    else:
        sys.stdout.write("".join(f"{key}: {_human(value)}\n" for key, value in doc.items()))


def _parse_cov(raw: str | None, m: int) -> np.ndarray:
    """Covariance from a CSV file of rows, or inline as ``"a,b;c,d"``."""
    if raw is None:
        return np.eye(m)
    if Path(raw).is_file():
        cov = read_series(raw)
        cov = cov.reshape(1, 1) if cov.ndim == 1 and m == 1 else cov
    else:
        try:
            cov = np.array([[float(x) for x in row.split(",")] for row in raw.split(";")], dtype=float)
        except ValueError as exc:
            raise CliError(f"--cov {raw!r} is neither a file nor rows separated by ';'") from exc
    if cov.shape != (m, m):
        raise CliError(f"--cov must be {m}x{m} to match the data, got shape {cov.shape}")
    return cov


def _model_for(args: argparse.Namespace, data: np.ndarray) -> ExpFamilyModel:
    if args.model == "mvnormal-mean":
        if data.ndim != 2:
            raise CliError("mvnormal-mean needs comma-separated multivariate rows")
        return ExpFamilyModel.mvnormal_mean(_parse_cov(args.cov, data.shape[1]))
    if data.ndim != 1:
        raise CliError(f"{args.model} needs one value per row, got {data.shape[1]} columns")
    return ExpFamilyModel.from_name(args.model, sigma2=args.sigma2)


def _argmax_dist(n_samples: int, seed: int, workers: int | None) -> EmpiricalDist:
    return asymptotics.sample_argmax_what(MonteCarloConfig(n_samples, seed, workers))


def _mc(args: argparse.Namespace, replications: int) -> MonteCarloConfig:
    return MonteCarloConfig(replications, args.seed, args.workers)


# -- subcommands ---------------------------------------------------------------------


def cmd_detect(args: argparse.Namespace) -> dict[str, Any]:
    data = read_series(args.input, header=args.header)
    if args.method == "nonparam":
        if data.ndim != 1:
            raise CliError("the nonparam method needs one increment per row")
        return nonparam_test(data, C=args.C, alpha=args.alpha).to_dict()
    model = _model_for(args, data)
    xi = _argmax_dist(args.argmax_samples, args.seed, args.workers) if args.ci else None
    report = detect(
        data,
        model,
        alpha=args.alpha,
        critical_value=args.method,
        xi=xi,
        mc=_mc(args, args.replications),
    )
    return report.to_dict()


def cmd_ci(args: argparse.Namespace) -> dict[str, Any]:
    data = read_series(args.input, header=args.header)
    model = _model_for(args, data)
    xi = _argmax_dist(args.argmax_samples, args.seed, args.workers)
    report = detect(data, model, alpha=args.alpha, xi=xi)
    if report.ci is None:
        raise CliError("estimated size of change is zero; there is no change to localize")
    q_low, q_high = xi.quantile(args.alpha / 2.0), xi.quantile(1.0 - args.alpha / 2.0)
    return {
        "schema_version": SCHEMA_VERSION,
        "k_hat": report.k_hat,
        "ci_low": report.ci[0],
        "ci_high": report.ci[1],
        "delta_hat_sq": report.delta_hat_sq,
        "alpha": report.alpha,
        "xi_low": q_low,
        "xi_high": q_high,
        "argmax_samples": xi.count,
        "n": report.n,
    }


def _sim_config(args: argparse.Namespace) -> SimConfig | ItoConfig:
    if args.kind == "ito":
        return ItoConfig(
            n=args.n,
            drift=args.drift,
            c=args.c,
            rho=args.rho,
            jump_size=args.jump_size,
            gamma=args.gamma,
            location_law=LocationLaw(args.law),
            kappa=args.kappa,
            seed=args.seed,
        )
    return SimConfig(
        n=args.n,
        mu1=args.mu1,
        mu2=args.mu2,
        sigma1=args.sigma1,
        sigma2=args.sigma2,
        gamma=args.gamma,
        location_law=LocationLaw(args.law),
        kappa=args.kappa,
        ar_coeff=args.ar,
        seed=args.seed,
    )


def _write_column(path: Path, header: str | None, values: np.ndarray) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow([header])
        for v in np.asarray(values, dtype=float):
            writer.writerow([repr(float(v))])


def cmd_simulate(args: argparse.Namespace) -> dict[str, Any]:
    cfg = _sim_config(args)
    if isinstance(cfg, ItoConfig):
        sim = gen_ito_path(cfg)
        values, k_star = sim.increments, sim.k_star
    else:
        sim = gen_amoc_normal(cfg)
        values, k_star = sim.data, sim.k_star
    out = Path(args.out)
    try:
        _write_column(out, None, values)
        sidecar = {
            "schema_version": SCHEMA_VERSION,
            "kind": args.kind,
            "k_star": int(k_star),
            "lambda_star": k_star / cfg.n,
            "n": cfg.n,
            "config": cfg.to_dict(),
        }
        Path(f"{out}.json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror}") from exc
    return sidecar


def cmd_critvals(args: argparse.Namespace) -> dict[str, Any]:
    rows = []
    for n in args.n:
        for d in args.d:
            for alpha in args.alpha:
                if args.method == "gumbel":
                    kappa = asymptotics.gumbel_critical_value(alpha, d, n)
                else:
                    kappa = asymptotics.sup_bridge_critical_value(alpha, d, n, _mc(args, args.replications))
                rows.append({"alpha": alpha, "d": d, "n": n, "critical_value": kappa})
    return {"schema_version": SCHEMA_VERSION, "method": args.method, "rows": rows}


def cmd_argmax_dist(args: argparse.Namespace) -> dict[str, Any]:
    dist = asymptotics.sample_argmax_what(_mc(args, args.replications), T=args.T, h=args.h, drift=args.drift)
    if args.samples_out:
        try:
            _write_column(Path(args.samples_out), "xi", dist.samples)
        except OSError as exc:
            raise CliError(f"cannot write {args.samples_out}: {exc.strerror}") from exc
    return {
        "schema_version": SCHEMA_VERSION,
        "replications": dist.count,
        "seed": args.seed,
        "T": args.T,
        "h": args.h,
        "drift": args.drift,
        "summary": dist.summary(),
    }


# -- replicate -------------------------------------------------------------------------


def _child_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint32)[0])


def figure_experiments(figure: str, n: int) -> tuple[list[tuple[str, ExperimentSpec, str]], SimConfig | ItoConfig]:
    """Experiments behind a figure id as ``(label, spec, metric)`` plus the path generator."""
    par, dev = Pipeline.PARAMETRIC_DETECT, Pipeline.DEVIATION_STAT
    if figure in ("vol-jump", "ar-dependent"):
        ar = 0.5 if figure == "ar-dependent" else 0.0
        null = SimConfig(n, ar_coeff=ar)
        alt = SimConfig(n, sigma2=1.1, ar_coeff=ar)
        exps = [("null", ExperimentSpec(null, par), "stat_root"), ("alternative", ExperimentSpec(alt, par), "stat_root")]
        if figure == "ar-dependent":
            exps.append(("deviation", ExperimentSpec(alt, dev), "deviation"))
        return exps, alt
    if figure == "mean-jump":
        null, alt = SimConfig(n), SimConfig(n, mu2=-12.0)
        return [("null", ExperimentSpec(null, par), "stat_root"), ("alternative", ExperimentSpec(alt, par), "stat_root")], alt
    if figure == "deviation":
        alt = SimConfig(n, mu2=-12.0)
        return [("deviation", ExperimentSpec(alt, dev), "deviation")], alt
    if figure == "nonparam-vol":
        np_ = Pipeline.NONPARAM_DETECT
        null, alt = ItoConfig(n, jump_size=0.0), ItoConfig(n)
        return [("null", ExperimentSpec(null, np_), "vn"), ("alternative", ExperimentSpec(alt, np_), "vn")], alt
    raise CliError(f"unknown figure {figure!r}; valid ids: {', '.join(FIGURES)}")


def _write_hist_csv(path: Path, values: np.ndarray, edges: np.ndarray) -> None:
    counts, _ = np.histogram(values, bins=edges)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            writer.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def _write_path(out: Path, gen: SimConfig | ItoConfig, seed: int, files: list[str]) -> None:
    rng = replicate_rng(seed, 0)
    path_csv = out / "path.csv"
    with path_csv.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if isinstance(gen, ItoConfig):
            ito = gen_ito_path(gen, rng)
            x, k_star = ito.path, ito.k_star
            t = np.arange(gen.n + 1) / gen.n
            writer.writerow(["t", "x", "sigma"])
            for row in zip(t, x, ito.sigma_path):
                writer.writerow([repr(float(v)) for v in row])
            series = {"X": x, "sigma": ito.sigma_path}
        else:
            sim = gen_amoc_normal(gen, rng)
            x, k_star = sim.partial_sums, sim.k_star
            t = np.arange(gen.n + 1) / gen.n
            writer.writerow(["t", "x"])
            for row in zip(t, x):
                writer.writerow([repr(float(v)) for v in row])
            series = {"X": x}
    write_path_svg(out / "path.svg", t, series, marker=k_star / gen.n, title=f"sample path, change after {k_star} steps")
    files += ["path.csv", "path.svg"]


def _write_group(
    out: Path, name: str, samples: dict[str, np.ndarray], xlabel: str, files: list[str]
) -> None:
    edges = histogram_edges(samples, HIST_BINS)
    for label, values in samples.items():
        _write_hist_csv(out / f"{label}_hist.csv", values, edges)
        _write_column(out / f"{label}_samples.csv", label, values)
        files += [f"{label}_hist.csv", f"{label}_samples.csv"]
    write_histogram_svg(out / f"{name}.svg", samples, edges, title=name, xlabel=xlabel)
    files.append(f"{name}.svg")


def _experiment_doc(res: ExperimentResult) -> dict[str, Any]:
    summary = res.summary()
    return {
        "spec": res.spec.to_dict(),
        "replications": res.replications,
        "master_seed": res.master_seed,
        "skip_count": summary["skip_count"],
        "skip_reasons": summary["skip_reasons"],
        "critical_value": summary["critical_value"],
        "metrics": summary["metrics"],
    }


def cmd_replicate(args: argparse.Namespace) -> dict[str, Any]:
    if (args.figure is None) == (args.config is None):
        raise CliError("replicate needs exactly one of --figure or --config")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc.strerror}") from exc
    files: list[str] = []
    experiments: dict[str, Any] = {}
    if args.config is not None:
        spec, mc = load_spec(args.config)
        if args.replications is not None:
            mc = replace(mc, replications=args.replications)
        if args.seed_given:
            mc = replace(mc, master_seed=args.seed)
        if args.workers is not None:
            mc = replace(mc, parallelism=args.workers)
        res = run_experiment(spec, mc)
        for name, values in res.raw.items():
            fname = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name) + ".csv"
            _write_column(out / fname, name, values)
            files.append(fname)
        experiments["config"] = _experiment_doc(res)
        seed, reps = mc.master_seed, mc.replications
    else:
        reps = 1000 if args.replications is None else args.replications
        seed = args.seed
        exps, path_gen = figure_experiments(args.figure, args.n)
        groups: dict[str, dict[str, np.ndarray]] = {}
        for idx, (label, spec, metric) in enumerate(exps):
            res = run_experiment(spec, MonteCarloConfig(reps, _child_seed(seed, idx), args.workers))
            experiments[label] = _experiment_doc(res)
            group = "deviation" if metric == "deviation" else "statistic"
            groups.setdefault(group, {})[label] = np.asarray(res.raw[metric])
        if "deviation" in groups:
            xi = asymptotics.argmax_what_draws(
                MonteCarloConfig(max(reps, args.argmax_samples), _child_seed(seed, len(exps)), args.workers)
            )
            groups["deviation"]["argmax"] = xi.samples
            experiments["argmax"] = {
                "spec": {"sampler": "argmax", "T": asymptotics.WHAT_T, "h": asymptotics.WHAT_H},
                "replications": xi.count,
                "skip_count": 0,
                "metrics": {"xi": xi.summary()},
            }
        for group, samples in groups.items():
            _write_group(out, group, samples, "value", files)
        _write_path(out, path_gen, _child_seed(seed, 10_000), files)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "figure": args.figure,
        "seed": seed,
        "replications": reps,
        "experiments": experiments,
        "files": sorted(files),
    }
    (out / "summary.json").write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return doc


# -- parser ----------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, *, seed: bool = True) -> None:
    p.add_argument("--format", choices=("json", "human"), default=argparse.SUPPRESS, help="output style (default json)")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: RANDCP_WORKERS or 1)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="CSV file, one observation per row")
    p.add_argument("--header", action="store_true", help="skip the first line")
    p.add_argument("--model", choices=MODEL_KINDS, default="normal-meanvar")
    p.add_argument("--sigma2", type=float, default=1.0, help="known variance for normal-mean")
    p.add_argument("--cov", default=None, help="covariance for mvnormal-mean: CSV file or inline 'a,b;c,d'")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--argmax-samples", type=int, default=DEFAULT_ARGMAX_SAMPLES)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="randcp", description="Change-point detection for exponential-family series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--format", choices=("json", "human"), default="json", help="output style (default json)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="test for a single change in a CSV series")
    _model_args(p)
    p.add_argument("--method", choices=("gumbel", "bridge", "nonparam"), default="gumbel")
    p.add_argument("--C", type=float, default=DEFAULT_C, help="block constant for the nonparam method")
    p.add_argument("--ci", action="store_true", help="add a confidence interval for the change location")
    p.add_argument("--replications", type=int, default=2000, help="Monte Carlo size for --method bridge")
    _common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("ci", help="confidence interval for the change location")
    _model_args(p)
    _common(p)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("simulate", help="write a synthetic series and a JSON sidecar")
    p.add_argument("--kind", choices=("amoc-normal", "ito"), default="amoc-normal")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--mu1", type=float, default=-2.0)
    p.add_argument("--mu2", type=float, default=-2.0)
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--ar", type=float, default=0.0, help="AR coefficient of the dependence transform")
    p.add_argument("--drift", type=float, default=-2.0)
    p.add_argument("--c", type=float, default=0.1, help="vol-of-vol for --kind ito")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--jump-size", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--kappa", type=float, default=-1.0)
    p.add_argument("--law", choices=[law.value for law in LocationLaw], default=LocationLaw.STOPPING_TIME.value)
    p.add_argument("--out", required=True, help="output CSV; the sidecar goes to <out>.json")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("critvals", help="table of critical values for the root statistic")
    p.add_argument("--alpha", type=float, nargs="+", default=[0.1, 0.05, 0.01])
    p.add_argument("--d", type=int, nargs="+", default=[2])
    p.add_argument("--n", type=int, nargs="+", default=[10_000])
    p.add_argument("--method", choices=("gumbel", "bridge"), default="gumbel")
    p.add_argument("--replications", type=int, default=2000)
    _common(p)
    p.set_defaults(func=cmd_critvals)

    p = sub.add_parser("argmax-dist", help="quantiles of the argmax of the drifted two-sided Brownian motion")
    p.add_argument("--replications", type=int, default=DEFAULT_ARGMAX_SAMPLES)
    p.add_argument("--T", type=float, default=asymptotics.WHAT_T)
    p.add_argument("--h", type=float, default=asymptotics.WHAT_H)
    p.add_argument("--drift", type=float, default=asymptotics.WHAT_DRIFT)
    p.add_argument("--samples-out", default=None, help="optional CSV of the sorted samples")
    _common(p)
    p.set_defaults(func=cmd_argmax_dist)

    p = sub.add_parser("replicate", help="rerun a simulation study and write figure data")
    p.add_argument("--figure", choices=FIGURES, default=None)
    p.add_argument("--config", default=None, help="INI experiment file instead of a figure id")
    p.add_argument("--replications", type=int, default=None, help="default 1000 for figures")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--argmax-samples", type=int, default=DEFAULT_ARGMAX_SAMPLES)
    p.add_argument("--out", required=True, help="output directory")
    _common(p, seed=False)
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0, or the config value)")
    p.set_defaults(func=cmd_replicate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replicate":
        args.seed_given = args.seed is not None
        if args.seed is None:
            args.seed = 0
    func: Callable[[argparse.Namespace], dict[str, Any]] = args.func
    try:
        doc = func(args)
        emit(doc, args.format)
    except (CliError, RandcpError) as exc:
        print(f"randcp {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"randcp {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
