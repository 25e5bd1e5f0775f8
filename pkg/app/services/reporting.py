"""
Run outputs: a human-readable report.txt, a flat key=value result.kv and a
trace.csv, each written atomically (temporary file, then rename).
"""

import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..core.exceptions import DataError

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

REPORT_FILE = "report.txt"
KV_FILE = "result.kv"
TRACE_FILE = "trace.csv"


def atomic_write_text(path: PathLike, text: str) -> None:
    """
    Write text to path through a temporary file in the same directory

    Args:
        path: Destination file
        text: Content, written as UTF-8
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, target)
    except Exception as e:
        logger.error(f"Failed to write {target}: {str(e)}")
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    if value is None:
        return ""
    return str(value)


def render_kv(items: Iterable[Tuple[str, object]]) -> str:
    return "".join(f"{key}={_fmt(value)}\n" for key, value in items)


def read_kv(path: PathLike) -> Dict[str, str]:
    """Parse a key=value file written by render_kv"""
    values: Dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot read {path}: {str(e)}")
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if "=" not in line:
            raise DataError(f"{path}:{number} is not a key=value line")
        key, value = line.split("=", 1)
        values[key] = value
    return values


def theta_from_kv(values: Mapping[str, str]) -> np.ndarray:
    """theta.1 .. theta.p of a fit result"""
    try:
        p = int(values["fit.p"])
        return np.array([float(values[f"theta.{i}"]) for i in range(1, p + 1)])
    except (KeyError, ValueError) as e:
        raise DataError(f"Result file has no complete theta: {str(e)}")


def fit_kv_items(fit, inference=None) -> List[Tuple[str, object]]:
    items: List[Tuple[str, object]] = [
        ("model.family", fit.spec.family.value),
        ("model.J", fit.spec.J),
        ("model.k", fit.spec.k),
        ("model.s", fit.spec.s),
        ("model.links", [link.name for link in fit.spec.links]),
        ("design.structure", fit.design.structure.value),
        ("design.constraints", fit.design.describe_constraints()),
        ("fit.converged", fit.converged),
        ("fit.iterations", fit.iterations),
        ("fit.loglik", fit.loglik),
        ("fit.aic", fit.aic),
        ("fit.bic", fit.bic),
        ("fit.p", fit.p),
        ("fit.n", fit.n_total),
        ("fit.min_fitted_probability", fit.min_fitted_probability),
    ]
    for i, (label, value) in enumerate(zip(fit.labels, fit.theta), start=1):
        items.append((f"theta.{i}", float(value)))
        items.append((f"theta.{i}.label", label))
    if inference is not None:
        items.append(("inference.alpha", inference.alpha))
        for i, ci in enumerate(inference.coefficients, start=1):
            items.append((f"theta.{i}.se", ci.std_error))
            items.append((f"theta.{i}.lower", ci.lower))
            items.append((f"theta.{i}.upper", ci.upper))
        if inference.wald is not None:
            items.append(("wald.statistic", inference.wald.statistic))
            items.append(("wald.df", inference.wald.df))
            items.append(("wald.p_value", inference.wald.p_value))
    return items


def render_fit_report(fit, inference=None, title: str = "Fit") -> str:
    lines = [
        f"{title}: {fit.spec.label}, links {', '.join(l.name for l in fit.spec.links)}, "
        f"structure {fit.design.structure.value}",
        f"Converged: {'yes' if fit.converged else 'no'} after {fit.iterations} iterations",
        f"Log-likelihood: {fit.loglik:.6f}",
        f"AIC: {fit.aic:.4f}    BIC: {fit.bic:.4f}    p: {fit.p}    n: {fit.n_total}",
        f"Minimum fitted probability: {fit.min_fitted_probability:.6g}",
        "",
    ]
    if fit.design.constraints:
        lines.append(f"Equality constraints: {'; '.join(fit.design.describe_constraints())}")
        lines.append("")
    if inference is not None:
        level = int(round(100 * (1 - inference.alpha)))
        lines.append(f"{'coefficient':<24}{'estimate':>14}{'std.error':>14}{f'{level}% lower':>14}{f'{level}% upper':>14}")
        for ci in inference.coefficients:
            lines.append(f"{ci.label:<24}{ci.estimate:>14.6g}{ci.std_error:>14.6g}{ci.lower:>14.6g}{ci.upper:>14.6g}")
        if inference.wald is not None:
            lines.append("")
            lines.append(f"Wald test theta = 0: W = {inference.wald.statistic:.4f}, df = {inference.wald.df}, "
                         f"p = {inference.wald.p_value:.4g}")
    else:
        lines.append(f"{'coefficient':<24}{'estimate':>14}")
        for label, value in zip(fit.labels, fit.theta):
            lines.append(f"{label:<24}{value:>14.6g}")
    if fit.diagnostics:
        lines.append("")
        lines.append("Diagnostics:")
        lines.extend(f"  - {note}" for note in fit.diagnostics)
    return "\n".join(lines) + "\n"


def trace_csv(fit) -> str:
    frame = pd.DataFrame(
        [(t.iteration, t.loglik, t.step_norm, t.backtracks, t.shift) for t in fit.trace],
        columns=["iteration", "loglik", "step_norm", "backtracks", "shift"],
    )
    return frame.to_csv(index=False, float_format="%.17g")


def write_outputs(out_dir: PathLike, report: str, kv: List[Tuple[str, object]], trace: Optional[str]) -> None:
    """Write report.txt, result.kv and, when given, trace.csv under out_dir"""
    directory = Path(out_dir)
    atomic_write_text(directory / REPORT_FILE, report)
    atomic_write_text(directory / KV_FILE, render_kv(kv))
    if trace is not None:
        atomic_write_text(directory / TRACE_FILE, trace)
    logger.info(f"Wrote outputs to {directory}")


def ranking_report(title: str, ranking, criterion: str) -> str:
    lines = [title, "", f"{'rank':<6}{'model':<44}{criterion.upper():>14}  converged"]
    for rank, entry in enumerate(ranking, start=1):
        lines.append(f"{rank:<6}{entry.model_id:<44}{entry.criterion:>14.4f}  {'yes' if entry.converged else 'no'}")
    return "\n".join(lines) + "\n"


def ranking_kv(ranking, criterion: str) -> List[Tuple[str, object]]:
    items: List[Tuple[str, object]] = [("search.criterion", criterion), ("search.candidates", len(ranking))]
    for rank, entry in enumerate(ranking, start=1):
        items.append((f"rank.{rank}.model", entry.model_id))
        items.append((f"rank.{rank}.criterion", entry.criterion))
        items.append((f"rank.{rank}.links", list(entry.links)))
        items.append((f"rank.{rank}.converged", entry.converged))
    return items


def mixture_report(trace) -> str:
    lines = [
        "Backward po-npo mixture selection",
        "",
        f"Starting npo AIC: {trace.initial_aic:.4f}",
    ]
    for step in trace.steps:
        lines.append(f"  merge {step.iteration}: {step.term} shared by categories {step.a},{step.b} -> AIC {step.aic:.4f}")
    if trace.rejected_aic is not None:
        lines.append(f"  stopped: best further merge gives AIC {trace.rejected_aic:.4f}")
    lines.append(f"Final AIC: {trace.fit.aic:.4f}")
    lines.append(f"Constraints: {'; '.join(trace.constraints) or 'none'}")
    return "\n".join(lines) + "\n"


def mixture_trace_csv(trace) -> str:
    rows = [(0, "", "", "", trace.initial_aic)]
    rows += [(s.iteration, s.term, s.a, s.b, s.aic) for s in trace.steps]
    frame = pd.DataFrame(rows, columns=["iteration", "term", "a", "b", "aic"])
    return frame.to_csv(index=False, float_format="%.17g")


def bootstrap_report(report, spec_label: str, seed: int) -> str:
    summary = report.summary()
    lines = [f"Bootstrap feasibility study: {spec_label}, B = {report.B}, seed = {seed}", ""]
    lines.extend(f"{key.replace('_', ' ')}: {value}" for key, value in summary.items())
    return "\n".join(lines) + "\n"


def bootstrap_trace_csv(report) -> str:
    frame = pd.DataFrame(
        [(r.index, r.converged, r.feasible, r.min_fitted_probability, r.loglik, r.error or "")
         for r in report.replicates],
        columns=["replicate", "converged", "feasible", "min_fitted_probability", "loglik", "error"],
    )
    return frame.to_csv(index=False, float_format="%.17g")
