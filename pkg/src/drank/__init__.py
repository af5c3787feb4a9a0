"""
drank - Distributional ranking loss with analytic gradients and an SGD trainer
"""

from .cli import main
from .drloss import (
    LossResult,
    LossSpec,
    all_pairs_loss,
    cross_entropy_loss,
    dr_loss,
    evaluate_loss,
    focal_loss,
    margin_check,
    neg_only_loss,
    worst_case_loss,
)
from .gradcheck import GradCheckReport, check
from .scores import DrParams, ImageScores, Prior, tuned_lambdas, validate
from .surrogate import SurrogateSpec
from .synth import GeneratorSpec, empirical_pdf, make_dataset, sample_scores
from .tilt import TiltedDistribution, tilt_negative, tilt_positive
from .trainer import Model, TrainerConfig, init_model, scaled_config, train

__version__ = "0.1.0"
__all__ = [
    "main",
    "ImageScores",
    "Prior",
    "DrParams",
    "validate",
    "tuned_lambdas",
    "TiltedDistribution",
    "tilt_negative",
    "tilt_positive",
    "SurrogateSpec",
    "LossResult",
    "LossSpec",
    "dr_loss",
    "neg_only_loss",
    "all_pairs_loss",
    "worst_case_loss",
    "cross_entropy_loss",
    "focal_loss",
    "margin_check",
    "evaluate_loss",
    "GradCheckReport",
    "check",
    "Model",
    "TrainerConfig",
    "init_model",
    "train",
    "scaled_config",
    "GeneratorSpec",
    "make_dataset",
    "sample_scores",
    "empirical_pdf",
]
