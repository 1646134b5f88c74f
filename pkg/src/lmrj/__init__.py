"""Bayesian latent Markov models for categorical panel data, with the number
of latent states sampled jointly with the parameters by reversible jump."""

from .bivariate import JointCellTable, invert_bivariate_margins, joint_cells
from .dataset import CovariateDesign, PanelDataset
from .errors import ConfigError, DataError, LmrjError, ModelError, TraceError
from .likelihood import (
    basic_emission_probs,
    build_likelihood,
    conditional_response_probs,
    cutpoint_emission_probs,
    forward_loglik,
)
from .params import (
    BasicMeasurement,
    CovariateMeasurement,
    CutpointMeasurement,
    ModelParams,
    ModelStructure,
    flat_dim,
    flat_names,
    unflatten,
)
from .priors import PriorSpec, log_prior, sample_prior
from .postprocess import (
    PosteriorSummary,
    hpd_interval,
    nested_hpd,
    occupancy_fractions,
    posterior_mode,
    posterior_of_k,
    relabel,
    summarize,
)
from .sampler import ChainState, RJSampler, SamplerConfig, frequency_start, run_chain
from .simulate import simulate_latent_paths, simulate_panel
from .trace import ChainTrace, TraceMeta

__version__ = "0.1.0"

__all__ = [
    "BasicMeasurement",
    "ChainState",
    "ChainTrace",
    "ConfigError",
    "CovariateDesign",
    "CovariateMeasurement",
    "CutpointMeasurement",
    "DataError",
    "JointCellTable",
    "LmrjError",
    "ModelError",
    "ModelParams",
    "ModelStructure",
    "PanelDataset",
    "PosteriorSummary",
    "PriorSpec",
    "RJSampler",
    "SamplerConfig",
    "TraceError",
    "TraceMeta",
    "basic_emission_probs",
    "build_likelihood",
    "conditional_response_probs",
    "cutpoint_emission_probs",
    "flat_dim",
    "flat_names",
    "forward_loglik",
    "frequency_start",
    "hpd_interval",
    "invert_bivariate_margins",
    "joint_cells",
    "log_prior",
    "nested_hpd",
    "occupancy_fractions",
    "posterior_mode",
    "posterior_of_k",
    "relabel",
    "run_chain",
    "sample_prior",
    "simulate_latent_paths",
    "simulate_panel",
    "summarize",
    "unflatten",
]
