"""Evolutionary fine-tuning of trained networks via sparse masked mutations.

The genome is the flat parameter vector of a small feed-forward network.
Children are spawned by adding Gaussian noise restricted to random binary
subspaces (optionally mirrored and anti-random for variance reduction),
scored on validation accuracy, and the best are combined by weight
averaging or softmax ensembling. A KL-divergence probe budgets the
mutation hyperparameters.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .datasets import Dataset, SplitSpec, load_csv, make_spirals, save_csv, split
from .divergence import (
    DivergenceReport,
    GridSearchConfig,
    grid_search,
    kl_accuracy_curve,
    output_kl,
    output_mse,
)
from .evolution import (
    EvalReport,
    GenerationConfig,
    Population,
    average_weights,
    ensemble_predict,
    evaluate_fitness,
    run_ablation,
    run_generation,
    select_top_k,
    spawn_population,
)
from .metrics import MetricTriple, accuracy, ece, metric_triple
from .mutation import (
    Child,
    MutationParams,
    SparseMutation,
    apply,
    complement,
    compose,
    mirrored_quad,
    partition_masks,
    sample_mask,
    sample_noise,
    spawn_mutations,
)
from .network import (
    Network,
    NetworkSpec,
    ParamVector,
    forward,
    init_network,
    nll_loss,
    softmax,
)
from .training import TrainConfig, train_model

__version__ = "0.1.0"
