from .inference import (
    InferenceResult,
    NotATree,
    Potentials,
    Topology,
    chain_max_product,
    chain_sum_product,
    max_product,
    sum_product,
)
from .model import CrfModel, DimensionMismatch, compute_potentials
from .training import (
    Gradient,
    Instance,
    Mode,
    NonFiniteObjective,
    TrainConfig,
    aggregate_branch_predictions,
    gradient,
    log_likelihood,
    objective,
    predict,
    predict_many,
    train,
)
