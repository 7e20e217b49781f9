from .losses import TrainSchedule, adversarial_losses, cosine_lr, l15_term
from .networks import (
    Discriminator,
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    discriminator_forward,
    generator_forward,
)
from .reface import reface
from .train import TrainResult, train
from .weights import ModelWeights, load_weights, save_weights

__all__ = [
    "Discriminator",
    "DiscriminatorConfig",
    "Generator",
    "GeneratorConfig",
    "ModelWeights",
    "TrainResult",
    "TrainSchedule",
    "adversarial_losses",
    "cosine_lr",
    "discriminator_forward",
    "generator_forward",
    "l15_term",
    "load_weights",
    "reface",
    "save_weights",
    "train",
]
