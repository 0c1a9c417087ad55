"""Complex neural operators with learnable-order fractional Fourier layers."""
from .frft import frft, frft_convolve, fractional_matrix, get_plan
from .model import ConoConfig, ConoModel, fno_config, make_ablation
from .train import TrainConfig, rel_l2, train_loop

__version__ = "0.1.0"

__all__ = [
    "ConoConfig", "ConoModel", "TrainConfig", "fno_config", "fractional_matrix", "frft",
    "frft_convolve", "get_plan", "make_ablation", "rel_l2", "train_loop", "__version__",
]
