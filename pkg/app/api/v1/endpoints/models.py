from fastapi import APIRouter, Depends, HTTPException, Request
from fastapi.concurrency import run_in_threadpool

from ....core.exceptions import (
    FitError,
    InfeasibleParameterError,
    MultinomialLinkError,
    SingularMatrixError,
)
from ....schemas.model import (
    FeasibilityRequest,
    FeasibilityResponse,
    FitRequest,
    FitResponse,
    SimulateRequest,
    SimulateResponse,
)
from ....services.model_service import ModelService

router = APIRouter()


def get_model_service(request: Request) -> ModelService:
    """
    Dependency returning the ModelService held in application state
    """
    return request.app.state.model_service


def _http_error(e: MultinomialLinkError, action: str) -> HTTPException:
    if isinstance(e, InfeasibleParameterError):
        return HTTPException(
            status_code=422,
            detail={
                "message": f"Failed to {action}: {str(e)}",
                "failures": [{"setting": i, "cause": cause} for i, cause in e.failures],
            },
        )
    status = 422 if isinstance(e, (FitError, SingularMatrixError)) else 400
    return HTTPException(status_code=status, detail=f"Failed to {action}: {str(e)}")


@router.post("/fit", response_model=FitResponse)
async def fit_model(
    request: FitRequest,
    service: ModelService = Depends(get_model_service)
):
    """
    Fit a multinomial link model by Fisher scoring

    - Takes summarized data inline
    - Returns estimates, Wald intervals, AIC/BIC and fitted probabilities
    """
    try:
        return await run_in_threadpool(service.fit, request)
    except MultinomialLinkError as e:
        raise _http_error(e, "fit model")


@router.post("/feasibility", response_model=FeasibilityResponse)
async def check_feasibility(
    request: FeasibilityRequest,
    service: ModelService = Depends(get_model_service)
):
    """
    Check whether theta gives valid probabilities at every setting
    """
    try:
        return await run_in_threadpool(service.feasibility, request)
    except MultinomialLinkError as e:
        raise _http_error(e, "check feasibility")


@router.post("/simulate", response_model=SimulateResponse)
async def simulate_counts(
    request: SimulateRequest,
    service: ModelService = Depends(get_model_service)
):
    """
    Draw multinomial counts from the model at the given settings
    """
    try:
        return await run_in_threadpool(service.simulate, request)
    except MultinomialLinkError as e:
        raise _http_error(e, "simulate")


@router.get("/links")
async def list_links(service: ModelService = Depends(get_model_service)):
    """
    Link names accepted in model specifications
    """
    return service.links()


@router.get("/status")
async def get_model_status(service: ModelService = Depends(get_model_service)):
    """
    Request counters of the model service
    """
    return {"status": "healthy", **service.get_status()}
