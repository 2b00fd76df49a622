"""Differentiable architecture search for cycle-consistent unpaired image
translation, small enough to run end to end on a CPU."""

from .autodiff import Tensor, check_gradients, no_grad
from .data import SyntheticTask, UnpairedDataset, generate_synthetic, load_unpaired
from .evaluation import best_of_k, proxy_frechet, train_discrete
from .losses import LossBreakdown, LossWeights
from .networks import (
    SupernetPair,
    build_baseline_generator,
    build_discriminator_supernet,
    build_generator_supernet,
    instantiate_discrete,
    model_size,
    scale_hidden_to_target,
)
from .optim import Adam
from .search import SearchConfig, SearchResult, one_step_search, run_search, two_step_search
from .space import (
    AlphaTable,
    ArchitectureSpec,
    CellSpec,
    CellType,
    decode_spec,
    discretize,
    encode_spec,
    mixture_weights,
    operation_set,
    search_space_size,
)

__version__ = "0.1.0"
