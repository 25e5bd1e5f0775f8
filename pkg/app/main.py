from contextlib import asynccontextmanager
from datetime import datetime
import logging
import time

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .core.config import settings
from .core.exceptions import MultinomialLinkError
from .core.links import supported_link_names
from .api.v1.api import api_router
from .services.fitter import FitOptions
from .services.model_service import ModelService

logging.basicConfig(
    level=logging.DEBUG if settings.DEBUG else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

VERSION = "1.0.0"


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Check the numerical defaults once before serving fits"""
    try:
        options = FitOptions.from_settings()
    except MultinomialLinkError as e:
        logger.error(f"Failed to build Fisher scoring defaults: {str(e)}")
        raise
    logger.info(
        f"Model service ready: tolerance={options.tolerance} max_iter={options.max_iter} "
        f"links={','.join(supported_link_names())}"
    )
    yield
    status = app.state.model_service.get_status()
    logger.info(f"Model service stopping after {status['requests']} requests, {status['failures']} failures")


app = FastAPI(
    title=settings.PROJECT_NAME,
    description="Fitting, feasibility checks and simulation for multinomial link models",
    version=VERSION,
    docs_url="/api/docs",
    redoc_url="/api/redoc",
    openapi_url="/api/openapi.json",
    lifespan=lifespan,
)

app.state.start_time = datetime.now()
app.state.request_count = 0
app.state.model_service = ModelService()

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.middleware("http")
async def track_requests(request: Request, call_next):
    app.state.request_count += 1
    start_time = time.perf_counter()
    response = await call_next(request)
    elapsed = time.perf_counter() - start_time
    response.headers["X-Process-Time"] = str(elapsed)
    if request.url.path.startswith(f"{settings.API_PREFIX}/models/"):
        logger.debug(f"{request.method} {request.url.path} -> {response.status_code} in {elapsed:.4f}s")
    return response


@app.exception_handler(MultinomialLinkError)
async def model_error_handler(request: Request, exc: MultinomialLinkError):
    logger.warning(f"Unhandled model error on {request.url.path}: {str(exc)}")
    return JSONResponse(status_code=400, content={"status": "error", "detail": str(exc)})


@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    logger.error(f"Global error handler caught: {str(exc)}", exc_info=exc)
    return JSONResponse(
        status_code=500,
        content={
            "status": "error",
            "message": "Internal server error",
            "detail": str(exc) if settings.DEBUG else "An error occurred"
        }
    )


@app.get("/")
async def health_check():
    """Liveness check"""
    return {
        "status": "healthy",
        "timestamp": datetime.now().isoformat(),
        "uptime": str(datetime.now() - app.state.start_time)
    }


@app.get("/status")
async def service_status():
    """Request counters, fit defaults and numerical guards"""
    return {
        "status": "healthy",
        "uptime": str(datetime.now() - app.state.start_time),
        "total_requests": app.state.request_count,
        "model_service": app.state.model_service.get_status(),
        "fit_defaults": settings.get_fit_defaults(),
        "guards": {
            "prob_clamp": settings.PROB_CLAMP,
            "singular_rcond": settings.SINGULAR_RCOND,
            "rank_tol": settings.RANK_TOL,
            "cov_singular_tol": settings.COV_SINGULAR_TOL,
        },
        "links": supported_link_names(),
        "version": VERSION,
    }


app.include_router(
    api_router,
    prefix=settings.API_PREFIX,
    responses={
        404: {"description": "Not found"},
        500: {"description": "Internal server error"}
    }
)
