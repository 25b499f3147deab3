"""Clipped-ReLU network training, spiking conversion and error analysis."""

from .convert import (ConversionReport, InitStrategy, ThresholdMode,
                      constant_fraction_init, convert, gaussian_random_init,
                      optimal_half_init, rescale_to_unit_thresholds,
                      uniform_random_init, weight_normalize_equivalence_check,
                      zero_init)
from .datasets import Dataset, ingest, make_blob_images
from .errors import (ConfigError, ConversionError, ParseError, ShapeError,
                     SimulationError, SnnConvertError, TrainingDivergedError)
from .modelio import load_network, save_network
from .network import (AnnNetwork, LayerSpec, avgpool, conv, desk_cnn, desk_mlp,
                      evaluate, flatten, forward, forward_batch, init_network,
                      linear)
from .opcount import (ENERGY_PER_FLOP_J, ENERGY_PER_SOP_J, OpCountReport,
                      count_flops, count_ops, fanout_map)
from .rng import Rng
from .simulator import (NeuronState, SimTrace, SnnNetwork, classify,
                        export_trace_csv, initial_state, simulate, step)
from .theory import (ErrorModel, FloorActivationParams, PiecewiseUniformSampler,
                     PointMassSampler, UniformSampler, expected_error_sweep,
                     expected_signed_error, expected_squared_error,
                     floor_activation, monte_carlo_error)
from .training import TrainConfig, batch_loss, loss_and_grads, train
from .verification import floor_form_check

__version__ = "0.1.0"
