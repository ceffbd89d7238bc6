"""Gradient-free ADMM training of leaky integrate-and-fire spiking networks."""
from .admm_core import AdmmHyperparams, AdmmState, lagrangian, loss, residuals
from .errors import (ConfigError, DivergenceError, FormatError, IncompleteRoundError,
                     InvalidInputError, NumericalFailure)
from .model import NetworkConfig, accuracy, forward, heaviside, predict
from .trainer import MetricsRecord, TrainerConfig, initialize, iterate, train

__version__ = "0.1.0"
