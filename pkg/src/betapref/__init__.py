"""Beta-posterior in-context reward modelling on synthetic preference worlds."""

from .beta import UNIFORM_PRIOR, BetaParams, kl_beta
from .errors import DomainError, NumericFailure, OracleRangeError, PreconditionError, StructuralError
from .model import ModelParams, TrainConfig, World, forward, score_single, train
from .objective import HeadScores, LossConfig, VariationalOutput, icrm_loss, reparameterize
from .synth import ObjectiveVector, PreferenceTriple, build_context, gen_objective, reversed_objective

__version__ = "0.1.0"
