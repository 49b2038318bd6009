"""Semi-static hedging of barrier options: hedging errors, parametrix hedge series, Monte Carlo oracles."""
from .errors import (
    ConfigError,
    ConsistencyError,
    DomainError,
    PreconditionError,
    QuadratureError,
    TimingHedgeError,
    UndefinedRatioError,
)
from .model import (
    BarrierContract,
    DiffusionSpec1D,
    GbmParams,
    PayoffSpec,
    lamperti_transform,
    payoff_pi,
    payoff_pi_perp,
    reflect,
)
from .density import (
    EulerDensityParams,
    GaussKernel1D,
    ReflectionHyperplane,
    euler_density,
    kernel_h,
    kernel_h_bound,
    normal_cdf,
    normal_pdf,
    reflection_symmetry_residual,
)
from .montecarlo import (
    McConfig,
    McEstimate,
    he1_mc,
    he2_mc,
    hedge_portfolio_mc,
    hitting_indicator,
    knockout_price_mc,
    replication_mc,
    simulate_terminal,
)
from .timing_risk import (
    FirstPassageSpec,
    carr_picron_residual,
    first_passage_cdf,
    timing_risk_value,
)
from .hedging_errors import (
    ErrorSurface,
    He2Quadrature,
    he1,
    he1_components,
    he2,
    ratio_gamma,
    sweep_surface,
)
from .parametrix import (
    GridFunction,
    SeriesBoundInputs,
    parametrix_identity_residual,
    s_op_1,
    s_op_n,
    series_bound,
    truncated_hedge_value,
)
from .kernels import BACKEND

__version__ = "0.1.0"
