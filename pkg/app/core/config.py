from pydantic_settings import BaseSettings
from pydantic import model_validator, Field
from typing import Dict, Any


class Settings(BaseSettings):
    PROJECT_NAME: str = Field(default="Multinomial Link Toolkit", description="Project name")
    DEBUG: bool = Field(default=False, description="Debug mode flag")
    LOG_LEVEL: str = Field(default="INFO", description="Root log level for CLI and service")
    API_PREFIX: str = Field(default="/api/v1", description="API route prefix")

    FIT_TOLERANCE: float = Field(
        default=1e-6,
        description="Relative tolerance for the step-size and improvement tests of Fisher scoring"
    )
    BACKTRACK_FACTOR: float = Field(
        default=0.5,
        description="Geometric backtracking factor applied to rejected scoring steps"
    )
    EIGEN_FLOOR: float = Field(
        default=1e-6,
        description="Smallest eigenvalue allowed in the Fisher information before it is shifted"
    )
    MAX_ITER: int = Field(default=200, description="Maximum number of accepted scoring iterations")
    MAX_BACKTRACK: int = Field(default=50, description="Maximum number of halvings per iteration")

    PROB_CLAMP: float = Field(
        default=1e-12,
        description="Inverse-link outputs are clamped to [PROB_CLAMP, 1 - PROB_CLAMP]"
    )
    SINGULAR_RCOND: float = Field(
        default=1e-14,
        description="Reciprocal condition number below which D_i counts as singular"
    )
    RANK_TOL: float = Field(
        default=1e-10,
        description="Relative singular value cutoff for rank decisions"
    )
    COV_SINGULAR_TOL: float = Field(
        default=1e-12,
        description="Eigenvalues of F below this fraction of its trace make F singular for inference"
    )

    LINK_SEARCH_LIMIT: int = Field(
        default=100_000,
        description="Maximum number of link assignments an exhaustive search may enumerate"
    )
    DEFAULT_JOBS: int = Field(default=1, description="Default number of concurrent fits")

    @model_validator(mode='after')
    def validate_numerics(self):
        """Validate numerical settings"""
        if not 0.0 < self.BACKTRACK_FACTOR < 1.0:
            raise ValueError(f"BACKTRACK_FACTOR must lie in (0, 1), got {self.BACKTRACK_FACTOR}")

        for name in ("FIT_TOLERANCE", "EIGEN_FLOOR", "PROB_CLAMP", "SINGULAR_RCOND", "RANK_TOL"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

        if self.PROB_CLAMP >= 0.5:
            raise ValueError("PROB_CLAMP must be below 0.5")

        if self.MAX_ITER < 1 or self.MAX_BACKTRACK < 1 or self.DEFAULT_JOBS < 1:
            raise ValueError("MAX_ITER, MAX_BACKTRACK and DEFAULT_JOBS must be at least 1")

        return self

    def get_fit_defaults(self) -> Dict[str, Any]:
        """Get default Fisher scoring options"""
        return {
            "tolerance": self.FIT_TOLERANCE,
            "backtrack_factor": self.BACKTRACK_FACTOR,
            "eigen_floor": self.EIGEN_FLOOR,
            "max_iter": self.MAX_ITER,
            "max_backtrack": self.MAX_BACKTRACK,
        }

    class Config:
        env_file = ".env"
        case_sensitive = True
        validate_assignment = True

settings = Settings()
