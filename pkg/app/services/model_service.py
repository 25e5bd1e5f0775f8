import logging
from typing import Any, Dict

import numpy as np

from ..core.exceptions import MultinomialLinkError, SingularMatrixError
from ..core.links import supported_link_names
from ..core.prob import check_feasible
from ..schemas.model import (
    CoefficientOut,
    FeasibilityRequest,
    FeasibilityResponse,
    FitRequest,
    FitResponse,
    SimulateRequest,
    SimulateResponse,
)
from .data import simulate
from .fitter import fisher_scoring
from .inference import wald_ci

logger = logging.getLogger(__name__)


class ModelService:
    def __init__(self):
        """
        Request-level facade over fitting, feasibility and simulation

        Keeps simple counters for the status endpoint.
        """
        self.requests = {"fit": 0, "feasibility": 0, "simulate": 0}
        self.failures = 0

    def fit(self, request: FitRequest) -> FitResponse:
        """
        Fit a model to inline summarized data

        Args:
            request: Model, design, options, data and alpha

        Returns:
            Estimates with Wald intervals when F is invertible
        """
        self.requests["fit"] += 1
        try:
            data = request.data.to_dataset()
            spec = request.model.to_spec()
            design = request.design.to_design(spec.J, data.covariates)
            result = fisher_scoring(spec, design, data, request.fit.to_options())
        except MultinomialLinkError as e:
            self.failures += 1
            logger.error(f"Failed to fit model: {str(e)}")
            raise

        try:
            coefficients = [CoefficientOut(**vars(ci)) for ci in wald_ci(result, request.alpha)]
        except SingularMatrixError as e:
            logger.warning(f"Returning estimates without intervals: {str(e)}")
            coefficients = [CoefficientOut(label=l, estimate=float(v)) for l, v in zip(result.labels, result.theta)]

        return FitResponse(
            status="converged" if result.converged else "not_converged",
            model=spec.label,
            links=[link.name for link in spec.links],
            converged=result.converged,
            iterations=result.iterations,
            loglik=result.loglik,
            aic=result.aic,
            bic=result.bic,
            coefficients=coefficients,
            fitted=result.pi.tolist(),
            diagnostics=list(result.diagnostics),
        )

    def feasibility(self, request: FeasibilityRequest) -> FeasibilityResponse:
        self.requests["feasibility"] += 1
        spec = request.model.to_spec()
        design = request.design.to_design(spec.J)
        report = check_feasible(spec, design, request.theta, np.asarray(request.settings, dtype=float),
                                generic=request.generic)
        return FeasibilityResponse(**report.to_dict())

    def simulate(self, request: SimulateRequest) -> SimulateResponse:
        self.requests["simulate"] += 1
        spec = request.model.to_spec()
        design = request.design.to_design(spec.J)
        try:
            data = simulate(spec, design, request.theta, np.asarray(request.settings, dtype=float),
                            request.n, seed=request.seed)
        except MultinomialLinkError as e:
            self.failures += 1
            logger.error(f"Failed to simulate: {str(e)}")
            raise
        return SimulateResponse(covariates=list(data.covariates), x=data.x.tolist(), y=data.y.tolist())

    def links(self) -> Dict[str, Any]:
        return {"links": supported_link_names()}

    def get_status(self) -> Dict[str, Any]:
        return {"requests": dict(self.requests), "failures": self.failures}
