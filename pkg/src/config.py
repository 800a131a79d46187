"""
Configuration for the Markov kernel geometry toolkit.
All tolerances, step sizes and iteration caps are centralized here.
"""
from pydantic_settings import BaseSettings
from pydantic import Field


class Settings(BaseSettings):
    # Kernel / measure validation
    stochastic_tol: float = Field(
        default=1e-12,
        description="Max deviation of a kernel row sum (or a distribution) from 1"
    )
    stationary_tol: float = Field(
        default=1e-12,
        description="Max residual |pW - p| accepted from the stationary solver"
    )
    shift_invariance_tol: float = Field(
        default=1e-10,
        description="Max |in - out| marginal gap for an edge measure to count as shift-invariant"
    )
    quotient_tol: float = Field(
        default=1e-10,
        description="Sup-norm threshold for f1 - f2 to lie in F_A + constants"
    )

    # Perron-Frobenius solver
    max_iters: int = Field(
        default=100000,
        description="Iteration cap of the shifted power iteration"
    )
    power_tol: float = Field(
        default=1e-14,
        description="Successive-vector difference that stops the power iteration"
    )
    polish_steps: int = Field(
        default=3,
        description="Newton refinement steps applied to the Perron pair"
    )
    perron_residual_tol: float = Field(
        default=1e-12,
        description="Relative eigen-residual above which normalization fails"
    )

    # Finite differences
    gradient_step: float = Field(
        default=1e-5,
        description="Relative step for first derivatives (scaled by 1 + |theta|)"
    )
    hessian_step: float = Field(
        default=1e-3,
        description="Relative step for second differences of psi (one Richardson level)"
    )
    connection_step: float = Field(
        default=1e-4,
        description="Relative step for connection coefficient derivatives"
    )

    # Newton inversion eta -> theta
    newton_tol: float = Field(default=1e-10, description="Sup-norm moment residual target")
    newton_max_iters: int = Field(default=200, description="Newton iteration cap")
    newton_max_halvings: int = Field(default=30, description="Step halvings per Newton iteration")
    newton_max_step: float = Field(
        default=1.0,
        description="Largest |delta theta| entry of a damped Newton step"
    )
    newton_local_decrement: float = Field(
        default=1e-2,
        description="Newton decrement below which full steps are taken without line search"
    )
    newton_armijo: float = Field(
        default=1e-4,
        description="Sufficient-decrease constant of the line search on psi(theta) - theta . eta"
    )

    # Rank / membership decisions
    rank_tol: float = Field(
        default=1e-9,
        description="Singular value cutoff relative to the largest one"
    )
    membership_tol: float = Field(
        default=1e-8,
        description="Sup-norm residual for a kernel to count as a family member"
    )
    mle_shift_tol: float = Field(
        default=1e-8,
        description="Shift-invariance tolerance for MLE targets"
    )
    projection_max_iters: int = Field(
        default=200,
        description="Alternating projection cap for empirical edge measures"
    )

    # CLI
    verify_workers: int = Field(default=4, description="Worker threads used by verify")
    log_level: str = Field(default="WARNING", description="Logging level for the CLI")

    class Config:
        env_file = ".env"
        env_prefix = "MARKOV_INFOGEO_"


settings = Settings()
