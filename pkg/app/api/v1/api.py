from fastapi import APIRouter

from ...core.config import settings
from .endpoints import models

api_router = APIRouter()

api_router.include_router(
    models.router,
    prefix="/models",
    tags=["models"],
    responses={
        400: {"description": "Invalid specification or data"},
        422: {"description": "Infeasible parameters or failed fit"},
        500: {"description": "Internal server error"},
    }
)


@api_router.get("/health", tags=["health"])
async def health_check():
    return {"status": "healthy", "service": "multinomial_link_models"}


@api_router.get("/settings", tags=["settings"])
async def get_fit_settings():
    return {
        "fit_defaults": settings.get_fit_defaults(),
        "link_search_limit": settings.LINK_SEARCH_LIMIT,
        "default_jobs": settings.DEFAULT_JOBS,
    }
