"""Online class-incremental continual learning with contrastive replay.

A self-contained numpy implementation of single-pass streaming training
over class-disjoint tasks: a reverse-mode autodiff tensor engine, a
supervised contrastive objective, reservoir-sampled replay memory,
nearest-class-mean and softmax classifiers, replay baselines, and a
deterministic benchmark harness.
"""

from .autodiff import (
    CHECK_DTYPE,
    TRAIN_DTYPE,
    GradCheckReport,
    Precision,
    Tensor,
    grad_check,
    sgd_step,
)
from .classifiers import (
    PrototypeSet,
    compute_prototypes,
    ncm_classify,
    ncm_classify_batch,
    softmax_classify,
    softmax_classify_batch,
)
from .config import ExperimentConfig, load_config, materialize, parse_config
from .data import (
    AugmentorSpec,
    Batch,
    Dataset,
    LabeledExample,
    TaskStream,
    augment,
    concat_batches,
    default_augmentor,
    gen_synthetic,
    load_dataset,
    read_clds1,
    save_dataset,
    split_blobs,
    split_tasks,
    write_clds1,
)
from .errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
    DtypeError,
    NoClassesError,
    NoPrototypesError,
    NumericError,
    ScreplayError,
    ShapeError,
    StalePrototypesError,
    StateError,
)
from .losses import MultiviewBatch, cross_entropy, scl_loss
from .memory import MemoryBuffer
from .metrics import (
    AccuracyMatrix,
    FcBiasReport,
    RunResult,
    average_accuracy,
    confusion_matrix,
    dominant_predicted_class,
    fc_bias_diagnostic,
)
from .model import (
    ModelConfig,
    ModelState,
    cast_state,
    encode,
    expand_head,
    init_model,
    load_model,
    logits,
    project,
    save_model,
)
from .training import (
    MethodConfig,
    er_train_step,
    finetune_step,
    offline_train,
    run_experiment,
    scr_train_step,
)

__version__ = "0.1.0"
