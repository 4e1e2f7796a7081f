"""Hierarchical hidden Markov mark-recapture models with Dirichlet-process
random effects on detection and state-retention probabilities."""

__version__ = "0.1.0"

from .dp import (  # noqa: F401
    CrpDraw,
    DpState,
    crp_draw,
    murugiah_hyperparams,
    neal8_update,
    sample_eta,
    update_alpha,
    update_cluster_params_conjugate,
    update_cluster_params_mh,
)
from .engine import (  # noqa: F401
    ChainRunner,
    ChainState,
    Dataset,
    FixedEffects,
    McmcConfig,
    PosteriorSample,
    combine_chains,
    mcmc_iteration,
    retained_count,
    run_chain,
    run_chains,
)
from .errors import DataError, DomainError, DphmmError, NumericalError  # noqa: F401
from .hmm import (  # noqa: F401
    AWAY,
    DEAD,
    HERE,
    CaptureHistory,
    ObservationParams,
    SufficientStats,
    TransitionParams,
    backward_sample,
    backward_sample_many,
    build_transition_2state,
    build_transition_3state,
    emission_prob,
    forward_pass,
    sufficient_stats,
    year_boundary_distribution,
)
from .simulate import ContinuousSpec, GroupSpec, SimDesign  # noqa: F401
from .summary import summarize  # noqa: F401
