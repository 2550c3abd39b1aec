"""From-scratch convolutional classifier for normal/abnormal screening."""

from .augment import augment_image, augment_with_params, build_augmented_set
from .layers import (
    BatchNorm2d,
    Conv2d,
    Dense,
    Flatten,
    MaxPool2d,
    ReLU,
    cross_entropy,
    sgd_step,
    softmax_predict,
)
from .network import Network, NetworkConfig, load_checkpoint, save_checkpoint
from .train import (
    TrainConfig,
    extract_features,
    majority_vote,
    score_dataset,
    train,
    train_ensemble,
    write_history,
)

__all__ = [
    "BatchNorm2d", "Conv2d", "Dense", "Flatten", "MaxPool2d", "ReLU",
    "Network", "NetworkConfig", "TrainConfig",
    "augment_image", "augment_with_params", "build_augmented_set",
    "cross_entropy", "extract_features", "load_checkpoint", "majority_vote",
    "save_checkpoint", "score_dataset", "sgd_step", "softmax_predict",
    "train", "train_ensemble", "write_history",
]
