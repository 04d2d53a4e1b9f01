"""Monte Carlo experiments built from a generator and an evaluation pipeline.

Replicate ``i`` of an experiment always draws from ``replicate_rng(master,
i)``, so results are identical for every worker count. Experiment specs can
be read from an INI file; see :func:`load_spec` for the layout.
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Union

import numpy as np

from randcp import asymptotics
from randcp.core import max_statistic, prefix_stats, resolve_critical_value, size_of_change
from randcp.errors import DegenerateMomentError, InvalidInputError
from randcp.expfam import ExpFamilyModel
from randcp.mc import EmpiricalDist, MonteCarloConfig, Skip, map_replicates
from randcp.nonparam import DEFAULT_C, nonparam_test
from randcp.simgen import ItoConfig, LocationLaw, SimConfig, gen_amoc_normal, gen_ito_path

if TYPE_CHECKING:
    from numpy.typing import NDArray

Generator = Union[SimConfig, ItoConfig]

DEFAULT_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
CRITICAL_MC_REPLICATIONS = 2000


class Pipeline(str, enum.Enum):
    PARAMETRIC_DETECT = "parametric-detect"
    NONPARAM_DETECT = "nonparam-detect"
    ZN_GRID = "zn-grid"
    DEVIATION_STAT = "deviation-stat"


def grid_metric(t: float, lam: float) -> str:
    """Metric name of the rescaled ``Z_n`` value at grid point ``(t, lam)``."""
    return f"z[{t:g},{lam:g}]"


_BASE_METRICS = {
    Pipeline.PARAMETRIC_DETECT: (
        "stat",
        "stat_root",
        "reject",
        "k_hat",
        "k_star",
        "lambda_hat",
        "lambda_star",
        "abs_lambda_error",
        "delta_hat_sq",
    ),
    Pipeline.NONPARAM_DETECT: ("vstar", "vn", "reject", "k_star"),
    Pipeline.DEVIATION_STAT: (
        "deviation",
        "deviation_hat",
        "k_hat",
        "k_star",
        "abs_lambda_error",
        "scaled_abs_error",
    ),
}


@dataclass(frozen=True)
class ExperimentSpec:
    """Generator configuration, pipeline and the metrics to keep.

    An empty ``metrics`` tuple keeps every metric the pipeline produces.
    ``critical_value`` is ``"gumbel"``, ``"bridge"`` or a number; it only
    affects the parametric pipeline.
    """

    generator: Generator
    pipeline: Pipeline
    metrics: tuple[str, ...] = ()
    model: str = "normal-meanvar"
    alpha: float = 0.05
    critical_value: str | float = "gumbel"
    nonparam_c: float = DEFAULT_C
    grid: tuple[float, ...] = DEFAULT_GRID

    def __post_init__(self) -> None:
        object.__setattr__(self, "pipeline", Pipeline(self.pipeline))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if not 0.0 < self.alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {self.alpha}")
        is_ito = isinstance(self.generator, ItoConfig)
        if self.pipeline is Pipeline.NONPARAM_DETECT and not is_ito:
            raise InvalidInputError("the nonparam-detect pipeline needs an Ito generator")
        if self.pipeline is not Pipeline.NONPARAM_DETECT and is_ito:
            raise InvalidInputError(f"the {self.pipeline.value} pipeline needs a normal generator")
        if self.pipeline is Pipeline.ZN_GRID:
            if self.generator.ar_coeff != 0.0:
                raise InvalidInputError("the zn-grid pipeline needs independent observations")
            if not all(0.0 < g < 1.0 for g in self.grid):
                raise InvalidInputError("grid points must lie in (0, 1)")
        if self.pipeline is not Pipeline.NONPARAM_DETECT:
            ExpFamilyModel.from_name(self.model)
        unknown = set(self.metrics) - set(self.available_metrics())
        if unknown:
            raise InvalidInputError(
                f"unknown metrics {sorted(unknown)} for pipeline {self.pipeline.value}; "
                f"available: {list(self.available_metrics())}"
            )

    def available_metrics(self) -> tuple[str, ...]:
        if self.pipeline is Pipeline.ZN_GRID:
            names = [grid_metric(t, lam) for t in self.grid for lam in self.grid]
            return tuple(names) + ("rn_sup",)
        return _BASE_METRICS[self.pipeline]

    def selected_metrics(self) -> tuple[str, ...]:
        return self.metrics or self.available_metrics()

    def get_model(self) -> ExpFamilyModel:
        return ExpFamilyModel.from_name(self.model)

    def to_dict(self) -> dict[str, Any]:
        return {
            "generator": {"type": _generator_type(self.generator), **self.generator.to_dict()},
            "pipeline": self.pipeline.value,
            "metrics": list(self.selected_metrics()),
            "model": self.model,
            "alpha": self.alpha,
            "critical_value": self.critical_value,
            "nonparam_c": self.nonparam_c,
            "grid": list(self.grid),
        }


def _generator_type(gen: Generator) -> str:
    return "ito" if isinstance(gen, ItoConfig) else "amoc-normal"


def scenario_alternative(cfg: SimConfig, model: ExpFamilyModel) -> asymptotics.AlternativeParams:
    """True pre/post parameters of a normal scenario as seen by ``model``.

    Away from the change the AR transform multiplies the mean by
    ``a + sqrt(1 - a**2)`` and keeps the variance.
    """
    gain = cfg.ar_coeff + math.sqrt(1.0 - cfg.ar_coeff**2)
    scale = gain / math.sqrt(cfg.n)
    m1, m2 = cfg.mu1 * scale, cfg.mu2 * scale
    if model.kind == "normal-meanvar":
        return asymptotics.alternative_from_moments(model, m1, m2, cfg.sigma1**2, cfg.sigma2**2)
    if model.m != 1:
        raise InvalidInputError("normal scenarios are univariate")
    return asymptotics.alternative_from_moments(model, m1, m2)


@dataclass(frozen=True)
class _Plan:
    """Everything a worker needs; computed once and shipped to each replicate."""

    spec: ExperimentSpec
    kappa: float
    sigma_delta_sq: float
    delta_sq: float
    ap: asymptotics.AlternativeParams | None


def _parametric(rng: np.random.Generator, plan: _Plan) -> dict[str, float]:
    cfg = plan.spec.generator
    sim = gen_amoc_normal(cfg, rng)
    ps = prefix_stats(sim.data, plan.spec.get_model(), center=True)
    stat, k_hat = max_statistic(ps)
    root = math.sqrt(stat)
    n = sim.n
    return {
        "stat": stat,
        "stat_root": root,
        "reject": float(root > plan.kappa),
        "k_hat": float(k_hat),
        "k_star": float(sim.k_star),
        "lambda_hat": k_hat / n,
        "lambda_star": sim.lambda_star,
        "abs_lambda_error": abs(k_hat - sim.k_star) / n,
        "delta_hat_sq": size_of_change(ps, k_hat),
    }


def _deviation(rng: np.random.Generator, plan: _Plan) -> dict[str, float]:
    cfg = plan.spec.generator
    sim = gen_amoc_normal(cfg, rng)
    ps = prefix_stats(sim.data, plan.spec.get_model(), center=True)
    _, k_hat = max_statistic(ps)
    err = k_hat - sim.k_star
    return {
        "deviation": plan.sigma_delta_sq * err,
        "deviation_hat": size_of_change(ps, k_hat) * err,
        "k_hat": float(k_hat),
        "k_star": float(sim.k_star),
        "abs_lambda_error": abs(err) / sim.n,
        "scaled_abs_error": plan.delta_sq * abs(err),
    }


def _nonparam(rng: np.random.Generator, plan: _Plan) -> dict[str, float]:
    path = gen_ito_path(plan.spec.generator, rng)
    rep = nonparam_test(path.increments, C=plan.spec.nonparam_c, alpha=plan.spec.alpha)
    return {"vstar": rep.vstar, "vn": rep.vn, "reject": float(rep.reject), "k_star": float(path.k_star)}


def _h_at(model: ExpFamilyModel, y: NDArray[np.float64]) -> float:
    val = float(model.h_values(y))
    if not math.isfinite(val):
        raise DegenerateMomentError("segment moment point is degenerate")
    return val


def two_stream_sn(
    cum1: NDArray[np.float64], cum2: NDArray[np.float64], k: int, k_star: int, model: ExpFamilyModel
) -> float:
    """``S_n(k)`` for the series that follows stream 1 up to ``k_star`` and stream 2 after.

    ``cum1`` and ``cum2`` are uncentered prefix sums of ``T`` (with a
    leading zero row) of the two full-length streams.
    """
    n = cum1.shape[0] - 1

    def cum(j: int) -> NDArray[np.float64]:
        return cum1[j] if j <= k_star else cum1[k_star] + cum2[j] - cum2[k_star]

    total = cum(n)
    head = cum(k)
    return (
        k * _h_at(model, head / k)
        + (n - k) * _h_at(model, (total - head) / (n - k))
        - n * _h_at(model, total / n)
    )


def _zn_grid(rng: np.random.Generator, plan: _Plan) -> dict[str, float]:
    cfg = plan.spec.generator
    model = plan.spec.get_model()
    ap = plan.ap
    n = cfg.n
    scale = 1.0 / math.sqrt(n)
    # one noise sequence for both regimes: moving k* only switches the law
    # of each observation, which is the coupling the limit covariance assumes
    eps = rng.standard_normal(n)
    x1 = cfg.mu1 * scale + cfg.sigma1 * eps
    x2 = cfg.mu2 * scale + cfg.sigma2 * eps
    t1, t2 = model.suff_stat(x1), model.suff_stat(x2)
    c1 = asymptotics.centered_prefix(t1, ap.tau1)
    c2 = asymptotics.centered_prefix(t2, ap.tau2)
    cum1 = asymptotics.centered_prefix(t1, np.zeros(model.d))
    cum2 = asymptotics.centered_prefix(t2, np.zeros(model.d))
    norm = math.sqrt(n * ap.delta_sq)
    out: dict[str, float] = {}
    r_sup = 0.0
    for t in plan.spec.grid:
        k = min(max(int(math.floor(t * n)), 1), n - 1)
        for lam in plan.spec.grid:
            k_star = min(max(int(math.floor(lam * n)), 1), n - 1)
            z = asymptotics.zn_value(c1, c2, k, k_star, ap, model)
            out[grid_metric(t, lam)] = z / norm
            r = two_stream_sn(cum1, cum2, k, k_star, model) - asymptotics.mu_n(k, k_star, n, ap, model) - z
            r_sup = max(r_sup, abs(r) / norm)
    out["rn_sup"] = r_sup
    return out


_WORKERS = {
    Pipeline.PARAMETRIC_DETECT: _parametric,
    Pipeline.NONPARAM_DETECT: _nonparam,
    Pipeline.ZN_GRID: _zn_grid,
    Pipeline.DEVIATION_STAT: _deviation,
}


def _run_one(rng: np.random.Generator, plan: _Plan) -> dict[str, float]:
    row = _WORKERS[plan.spec.pipeline](rng, plan)
    return {name: row[name] for name in plan.spec.selected_metrics()}


def _aux_seed(master_seed: int) -> int:
    # separate stream for auxiliary Monte Carlo (critical values)
    return int(np.random.SeedSequence([int(master_seed), 1]).generate_state(1, np.uint64)[0])


def make_plan(spec: ExperimentSpec, mc: MonteCarloConfig) -> _Plan:
    kappa = math.nan
    sigma_delta_sq = math.nan
    delta_sq = math.nan
    ap = None
    if spec.pipeline is Pipeline.PARAMETRIC_DETECT:
        aux = MonteCarloConfig(CRITICAL_MC_REPLICATIONS, _aux_seed(mc.master_seed), mc.parallelism)
        kappa, _ = resolve_critical_value(
            spec.critical_value, spec.alpha, spec.get_model().d, spec.generator.n, aux
        )
    elif spec.pipeline in (Pipeline.DEVIATION_STAT, Pipeline.ZN_GRID):
        ap = scenario_alternative(spec.generator, spec.get_model())
        if not ap.delta_sq > 0:
            raise InvalidInputError(f"the {spec.pipeline.value} pipeline needs a change in the scenario")
        delta_sq = ap.delta_sq
        sigma_delta_sq = ap.sigma_a_sq * delta_sq
    return _Plan(spec=spec, kappa=kappa, sigma_delta_sq=sigma_delta_sq, delta_sq=delta_sq, ap=ap)


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """Replicate-ordered metric arrays; skipped replicates are left out and listed."""

    spec: ExperimentSpec
    replications: int
    master_seed: int
    raw: dict[str, NDArray[np.float64]]
    skipped: tuple[tuple[int, str], ...] = field(default=())
    critical_value: float = math.nan

    @property
    def skip_count(self) -> int:
        return len(self.skipped)

    @property
    def metrics(self) -> tuple[str, ...]:
        return tuple(self.raw)

    def __getitem__(self, name: str) -> EmpiricalDist:
        if name not in self.raw:
            raise KeyError(f"unknown metric {name!r}; available: {list(self.raw)}")
        return EmpiricalDist(self.raw[name])

    def distributions(self) -> dict[str, EmpiricalDist]:
        return {name: self[name] for name in self.raw if self.raw[name].size}

    def summary(self) -> dict[str, Any]:
        return {
            "replications": self.replications,
            "master_seed": self.master_seed,
            "skip_count": self.skip_count,
            "skip_reasons": [{"replicate": i, "reason": r} for i, r in self.skipped],
            "critical_value": None if math.isnan(self.critical_value) else self.critical_value,
            "metrics": {name: dist.summary() for name, dist in self.distributions().items()},
        }


def run_experiment(spec: ExperimentSpec, mc: MonteCarloConfig) -> ExperimentResult:
    """Run ``mc.replications`` replicates of ``spec``."""
    plan = make_plan(spec, mc)
    rows = map_replicates(_run_one, mc, plan)
    names = spec.selected_metrics()
    kept = [row for row in rows if not isinstance(row, Skip)]
    skipped = tuple((i, row.reason) for i, row in enumerate(rows) if isinstance(row, Skip))
    raw = {name: np.array([row[name] for row in kept], dtype=float) for name in names}
    for arr in raw.values():
        arr.setflags(write=False)
    return ExperimentResult(
        spec=spec,
        replications=mc.replications,
        master_seed=mc.master_seed,
        raw=raw,
        skipped=skipped,
        critical_value=plan.kappa,
    )


# -- INI experiment files ---------------------------------------------------------

_SIM_FIELDS = {
    "n": int,
    "mu1": float,
    "mu2": float,
    "sigma1": float,
    "sigma2": float,
    "gamma": float,
    "location_law": LocationLaw,
    "kappa": float,
    "ar_coeff": float,
    "seed": int,
}
_ITO_FIELDS = {
    "n": int,
    "drift": float,
    "c": float,
    "rho": float,
    "jump_size": float,
    "gamma": float,
    "location_law": LocationLaw,
    "kappa": float,
    "seed": int,
}


def _parse_critical(raw: str) -> str | float:
    raw = raw.strip()
    try:
        return float(raw)
    except ValueError:
        return raw


def _csv_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def spec_from_config(parser: configparser.ConfigParser) -> tuple[ExperimentSpec, MonteCarloConfig]:
    if not parser.has_section("generator") or not parser.has_section("experiment"):
        raise InvalidInputError("experiment file needs [generator] and [experiment] sections")
    gen_sec = dict(parser["generator"])
    kind = gen_sec.pop("type", "amoc-normal").strip()
    if kind not in ("amoc-normal", "ito"):
        raise InvalidInputError(f"unknown generator type {kind!r}; use 'amoc-normal' or 'ito'")
    fields = _SIM_FIELDS if kind == "amoc-normal" else _ITO_FIELDS
    unknown = set(gen_sec) - set(fields)
    if unknown:
        raise InvalidInputError(f"unknown generator keys {sorted(unknown)}; allowed: {sorted(fields)}")
    if "n" not in gen_sec:
        raise InvalidInputError("[generator] needs n")
    try:
        kwargs = {key: fields[key](value.strip()) for key, value in gen_sec.items()}
    except ValueError as exc:
        raise InvalidInputError(f"bad generator value: {exc}") from exc
    generator: Generator = SimConfig(**kwargs) if kind == "amoc-normal" else ItoConfig(**kwargs)

    exp = parser["experiment"]
    allowed = {"pipeline", "metrics", "model", "alpha", "critical_value", "nonparam_c", "grid"}
    unknown = set(exp) - allowed
    if unknown:
        raise InvalidInputError(f"unknown experiment keys {sorted(unknown)}; allowed: {sorted(allowed)}")
    try:
        spec = ExperimentSpec(
            generator=generator,
            pipeline=Pipeline(exp.get("pipeline", "parametric-detect").strip()),
            metrics=tuple(_csv_list(exp.get("metrics", ""))),
            model=exp.get("model", "normal-meanvar").strip(),
            alpha=exp.getfloat("alpha", 0.05),
            critical_value=_parse_critical(exp.get("critical_value", "gumbel")),
            nonparam_c=exp.getfloat("nonparam_c", DEFAULT_C),
            grid=tuple(float(g) for g in _csv_list(exp.get("grid", ""))) or DEFAULT_GRID,
        )
        mc_sec = parser["monte_carlo"] if parser.has_section("monte_carlo") else {}
        workers = mc_sec.get("parallelism") if mc_sec else None
        mc = MonteCarloConfig(
            replications=int(mc_sec.get("replications", 1000)) if mc_sec else 1000,
            master_seed=int(mc_sec.get("seed", 0)) if mc_sec else 0,
            parallelism=int(workers) if workers else None,
        )
    except ValueError as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"bad experiment value: {exc}") from exc
    return spec, mc


def load_spec(path: str | Path) -> tuple[ExperimentSpec, MonteCarloConfig]:
    """Read an experiment from an INI file.

    Layout::

        [generator]
        type = amoc-normal        ; or ito
        n = 10000
        mu2 = -12

        [experiment]
        pipeline = deviation-stat
        model = normal-meanvar
        metrics = deviation, k_hat

        [monte_carlo]
        replications = 2000
        seed = 1
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    p = Path(path)
    try:
        with p.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read experiment file {p}: {exc.strerror}") from exc
    except configparser.Error as exc:
        raise InvalidInputError(f"cannot parse experiment file {p}: {exc}") from exc
    return spec_from_config(parser)

