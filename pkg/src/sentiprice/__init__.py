"""Sentiment-driven asset price model: simulation, estimation and option pricing."""

from .errors import (
    DataFormatError,
    DegenerateDenominatorError,
    DomainError,
    InsufficientDataError,
    InvalidMomentsError,
    MisalignedGridError,
    NumericalError,
    SentipriceError,
    SingularRegressionError,
    ValidationError,
)
from .model import (
    LevyLogNormal,
    ModelParams,
    MomentPair,
    integrated_info_moments,
    ip_moments,
    levy_params,
    log_price_moments,
    x_tau_deterministic,
)
from .simulate import (
    PathBundle,
    ReturnSample,
    SampledPath,
    build_return_sample,
    ingest_preaggregated,
    simulate_paths,
    terminal_prices,
)

__version__ = "0.1.0"
