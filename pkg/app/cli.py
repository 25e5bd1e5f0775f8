"""
Command-line front end.

    python -m app fit --config run.json --out results/
    python -m app select --config run.json --mode links --criterion bic
    python -m app simulate --config run.json --seed 7 --out sim/
    python -m app bootstrap --config run.json --seed 7 --jobs 4
    python -m app cv --config run.json --seed 7

Exit codes: 0 success, 1 input or feasibility error, 2 non-convergence.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from .core.config import settings
from .core.design import DesignSpec
from .core.exceptions import MultinomialLinkError, SingularMatrixError, SpecError
from .core.likelihood import Dataset
from .core.links import parse_links
from .core.structure import ModelSpec, reorder_counts
from .schemas.model import BootstrapConfig, CrossValidationConfig, RunConfig, SelectConfig
from .services import reporting
from .services.data import bootstrap_study, export, ingest, simulate
from .services.fitter import FitOptions, FitResult, fisher_scoring
from .services.inference import InferenceReport, build_report, lrt
from .services.selection import backward_mixture, cross_validate, link_search, two_group_search

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2

COMMANDS = ("fit", "select", "simulate", "bootstrap", "cv")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="python -m app", description="Fit and select multinomial link models")
    parser.add_argument("command", choices=COMMANDS, help="Workflow to run")
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--data", help="Override the dataset path of the config")
    parser.add_argument("--out", default="results", help="Output directory (default: results)")
    parser.add_argument("--seed", type=int, help="Base seed for simulate, bootstrap and cv")
    parser.add_argument("--jobs", type=int, help="Concurrent fits")
    parser.add_argument("--alpha", type=float, help="Significance level of the Wald intervals")
    parser.add_argument("--criterion", choices=("aic", "bic"), help="Selection criterion")
    parser.add_argument("--mode", choices=("mixture", "links", "two-group"), help="Search performed by select")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log every scoring iteration")
    return parser


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )


def load_config(args: argparse.Namespace) -> RunConfig:
    """Read the config file and apply command-line overrides"""
    config = RunConfig.from_file(args.config)
    values = config.model_dump()
    for key in ("data", "seed", "jobs", "alpha"):
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    if args.criterion is not None or args.mode is not None:
        select = values.get("select") or {}
        if args.criterion is not None:
            select["criterion"] = args.criterion
        if args.mode is not None:
            select["mode"] = args.mode
        values["select"] = select
    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        raise SpecError(f"Invalid command-line override: {str(e)}")


def load_data(config: RunConfig) -> Dataset:
    if config.data is None:
        raise SpecError("No dataset given; set data in the config or pass --data")
    data = ingest(config.data, config.format, config.categories, config.covariates)
    if config.working_order is not None:
        y = reorder_counts(data.y, config.categories, config.working_order)
        data = Dataset(data.x, y, data.covariates, tuple(config.working_order))
    return data


def build_model(config: RunConfig, covariates: Sequence[str]) -> Tuple[ModelSpec, DesignSpec, FitOptions]:
    spec = config.model.to_spec()
    design = config.design.to_design(spec.J, covariates)
    return spec, design, config.fit.to_options()


def _require_seed(config: RunConfig, command: str) -> int:
    if config.seed is None:
        raise SpecError(f"{command} needs an explicit seed (--seed or seed in the config)")
    return config.seed


def _inference(fit: FitResult, alpha: float) -> Optional[InferenceReport]:
    try:
        return build_report(fit, alpha)
    except SingularMatrixError as e:
        logger.warning(f"Reporting estimates without standard errors: {str(e)}")
        return None


def _exit_for(*fits: FitResult) -> int:
    return EXIT_OK if all(fit.converged for fit in fits) else EXIT_NOT_CONVERGED


def cmd_fit(config: RunConfig, out: Path) -> int:
    """Fit the configured model, optionally against a reduced design"""
    data = load_data(config)
    spec, design, options = build_model(config, data.covariates)
    fit = fisher_scoring(spec, design, data, options)
    inference = _inference(fit, config.alpha)
    report = reporting.render_fit_report(fit, inference)
    kv = reporting.fit_kv_items(fit, inference)
    fits = [fit]

    if config.drop:
        reduced_design = design
        for slot in config.drop:
            reduced_design = reduced_design.drop_term(slot.category, slot.term)
        reduced = fisher_scoring(spec, reduced_design, data, options)
        test = lrt(fit, reduced)
        dropped = ", ".join(f"{d.term} in category {d.category}" for d in config.drop)
        report += "\n" + reporting.render_fit_report(reduced, _inference(reduced, config.alpha),
                                                      title=f"Reduced fit without {dropped}")
        report += (f"\nLikelihood-ratio test: statistic = {test.statistic:.4f}, df = {test.df}, "
                   f"p = {test.p_value:.4g}\n")
        kv += [
            ("reduced.dropped", [f"{d.category}:{d.term}" for d in config.drop]),
            ("reduced.converged", reduced.converged),
            ("reduced.loglik", reduced.loglik),
            ("reduced.aic", reduced.aic),
            ("reduced.bic", reduced.bic),
            ("reduced.p", reduced.p),
            ("lrt.statistic", test.statistic),
            ("lrt.df", test.df),
            ("lrt.p_value", test.p_value),
        ]
        kv += [(f"reduced.theta.{i}", float(v)) for i, v in enumerate(reduced.theta, start=1)]
        fits.append(reduced)

    reporting.write_outputs(out, report, kv, reporting.trace_csv(fit))
    return _exit_for(*fits)


def cmd_select(config: RunConfig, out: Path) -> int:
    """Run the configured model search and write its ranking"""
    select = config.select or SelectConfig()
    data = load_data(config)
    spec, design, options = build_model(config, data.covariates)

    if select.mode == "mixture":
        trace = backward_mixture(spec, design, data, options, config.jobs)
        report = reporting.mixture_report(trace) + "\n" + reporting.render_fit_report(
            trace.fit, _inference(trace.fit, config.alpha), title="Selected model")
        kv: List[Tuple[str, object]] = [
            ("select.mode", "mixture"),
            ("select.initial_aic", trace.initial_aic),
            ("select.steps", len(trace.steps)),
            ("select.rejected_aic", trace.rejected_aic),
        ]
        for step in trace.steps:
            kv += [
                (f"step.{step.iteration}.term", step.term),
                (f"step.{step.iteration}.categories", [step.a, step.b]),
                (f"step.{step.iteration}.aic", step.aic),
            ]
        kv += reporting.fit_kv_items(trace.fit)
        reporting.write_outputs(out, report, kv, reporting.mixture_trace_csv(trace))
        return _exit_for(trace.fit)

    if select.mode == "links":
        if not select.candidate_links:
            raise SpecError("links mode needs select.candidate_links")
        criterion = select.criterion or "bic"
        result = link_search(spec, parse_links(select.candidate_links), design, data, criterion, options, config.jobs)
        title = f"Link search over {len(result.ranking)} fitted assignments"
    else:
        criterion = select.criterion or "aic"
        result = two_group_search(spec.J, design, data, criterion, spec.links, options, config.jobs)
        title = f"Two-group search over {len(result.ranking)} fitted structures"

    report = reporting.ranking_report(title, result.ranking, criterion) + "\n" + reporting.render_fit_report(
        result.fit, _inference(result.fit, config.alpha), title="Best model")
    kv = [("select.mode", select.mode)] + reporting.ranking_kv(result.ranking, criterion)
    kv += reporting.fit_kv_items(result.fit)
    reporting.write_outputs(out, report, kv, reporting.trace_csv(result.fit))
    return _exit_for(result.fit)


def cmd_simulate(config: RunConfig, out: Path) -> int:
    """Draw a dataset from the configured model and theta"""
    seed = _require_seed(config, "simulate")
    if config.simulate is None:
        raise SpecError("simulate needs a simulate section in the config")
    sim = config.simulate

    if sim.settings is not None:
        x_settings = np.asarray(sim.settings, dtype=float)
        covariates: Sequence[str] = config.design.covariates or ()
    else:
        data = load_data(config)
        x_settings, covariates = data.x, data.covariates
    spec, design, _ = build_model(config, covariates)

    if sim.theta is not None:
        theta = np.asarray(sim.theta, dtype=float)
    else:
        theta = reporting.theta_from_kv(reporting.read_kv(sim.result_file))

    dataset = simulate(spec, design, theta, x_settings, sim.n, seed=seed)
    target = out / sim.output
    export(dataset, target)
    report = (
        f"Simulated {dataset.total} observations at {dataset.m} settings from {spec.label}, "
        f"structure {design.structure.value}, seed {seed}\n"
        f"Data written to {sim.output}\n"
    )
    kv = [
        ("simulate.seed", seed),
        ("simulate.model", spec.label),
        ("simulate.m", dataset.m),
        ("simulate.total", dataset.total),
        ("simulate.file", sim.output),
    ]
    reporting.write_outputs(out, report, kv, None)
    return EXIT_OK


def cmd_bootstrap(config: RunConfig, out: Path) -> int:
    """Audit the fitter on observation-level bootstrap replicates"""
    seed = _require_seed(config, "bootstrap")
    boot = config.bootstrap or BootstrapConfig()
    data = load_data(config)
    spec, design, options = build_model(config, data.covariates)
    result = bootstrap_study(data, spec, design, boot.B, seed, options, config.jobs)
    kv: List[Tuple[str, object]] = [("bootstrap.seed", seed), ("bootstrap.model", spec.label)]
    kv += [(f"bootstrap.{key}", value) for key, value in result.summary().items()]
    reporting.write_outputs(
        out,
        reporting.bootstrap_report(result, spec.label, seed),
        kv,
        reporting.bootstrap_trace_csv(result),
    )
    return EXIT_OK


def cmd_cv(config: RunConfig, out: Path) -> int:
    """k-fold cross-validated cross-entropy of the configured model"""
    seed = _require_seed(config, "cv")
    cv = config.cv or CrossValidationConfig()
    data = load_data(config)
    spec, design, options = build_model(config, data.covariates)
    result = cross_validate(spec, design, data, cv.k, seed, cv.repeats, options, config.jobs)

    lines = [
        f"{cv.k}-fold cross-validation of {spec.label}, structure {design.structure.value}, seed {seed}",
        "",
        f"Mean cross-entropy loss over {result.repeats} repeats: {result.loss:.6f}",
        f"Excluded folds: {result.excluded_folds}",
    ]
    kv: List[Tuple[str, object]] = [
        ("cv.seed", seed),
        ("cv.k", result.k),
        ("cv.repeats", result.repeats),
        ("cv.loss", result.loss),
        ("cv.excluded_folds", result.excluded_folds),
    ]
    kv += [(f"cv.repeat.{r}.loss", loss) for r, loss in enumerate(result.losses, start=1)]
    trace = "repeat,loss\n" + "".join(f"{r},{loss!r}\n" for r, loss in enumerate(result.losses, start=1))
    reporting.write_outputs(out, "\n".join(lines) + "\n", kv, trace)
    return EXIT_OK


HANDLERS = {
    "fit": cmd_fit,
    "select": cmd_select,
    "simulate": cmd_simulate,
    "bootstrap": cmd_bootstrap,
    "cv": cmd_cv,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        config = load_config(args)
        code = HANDLERS[args.command](config, Path(args.out))
    except MultinomialLinkError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        print(f"error: {str(e)}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        logger.error(f"{args.command} failed on I/O: {str(e)}")
        print(f"error: {str(e)}", file=sys.stderr)
        return EXIT_INPUT
    if code == EXIT_NOT_CONVERGED:
        print("warning: Fisher scoring did not converge; the report shows the best iterate", file=sys.stderr)
    return code
