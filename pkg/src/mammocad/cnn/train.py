"""Training loop: stratified split, mini-batch SGD with momentum.

Dataset items are (image, label) pairs with label 1 for abnormal.
Runs are strictly sequential and reproducible for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..core import as_gray, resize_bilinear
from .augment import build_augmented_set
from .layers import cross_entropy, sgd_step, softmax_predict
from .network import Network, NetworkConfig


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 20
    batch_size: int = 32
    momentum: float = 0.9
    seed: int = 0
    augment: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("need at least one epoch")


def stratified_split(labels, test_fraction, rng):
    """Index split keeping the class ratio; at least one test item per class."""
    labels = np.asarray(labels)
    train_idx, test_idx = [], []
    for value in np.unique(labels):
        members = np.flatnonzero(labels == value)
        members = members[rng.permutation(len(members))]
        n_test = max(1, round(test_fraction * len(members))) if len(members) > 1 else 0
        test_idx.extend(members[:n_test])
        train_idx.extend(members[n_test:])
    return sorted(train_idx), sorted(test_idx)


def _sized(image, size):
    img = as_gray(image)
    if img.shape == (size, size):
        return img
    return resize_bilinear(img, size, size)


def _accuracy(network, images, labels):
    if not len(images):
        return None
    _, predicted = network.predict(images)
    return float((predicted == np.asarray(labels)).mean())


def train(dataset, network_config: NetworkConfig = NetworkConfig(),
          train_config: TrainConfig = TrainConfig()):
    """Fit the classifier; returns (network, history).

    The dataset is split 80/20 per class by the seed; history carries
    one record per epoch with the mean train loss and test accuracy.
    """
    items = [(as_gray(im), int(lab)) for im, lab in dataset]
    if not items:
        raise ValueError("empty dataset")
    labels = [lab for _, lab in items]
    if len(set(labels)) < 2:
        raise ValueError("training needs both classes present")

    rng = np.random.default_rng(train_config.seed)
    train_idx, test_idx = stratified_split(labels, 0.2, rng)
    train_items = [items[i] for i in train_idx]
    test_items = [items[i] for i in test_idx]
    size = network_config.input_size
    if train_config.augment:
        train_items = build_augmented_set(train_items, rng, size)
    train_images = [_sized(im, size) for im, _ in train_items]
    train_labels = np.array([lab for _, lab in train_items])
    test_images = [_sized(im, size) for im, _ in test_items]
    test_labels = [lab for _, lab in test_items]

    network = Network(network_config, seed=train_config.seed)
    velocity = None
    history = []
    n = len(train_images)
    for epoch in range(1, train_config.epochs + 1):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, train_config.batch_size):
            batch = order[start:start + train_config.batch_size]
            if len(batch) < 2:
                continue  # batch statistics need at least two samples
            x = np.stack([train_images[i] for i in batch])[:, None]
            y = train_labels[batch]
            logits = network.forward(x, train=True)
            probs, _ = softmax_predict(logits)
            loss, grad = cross_entropy(probs, y)
            network.backward(grad)
            params, velocity = sgd_step(
                network.named_params(), network.named_grads(),
                train_config.learning_rate, train_config.momentum, velocity)
            for name, value in params.items():
                network.set_tensor(name, value)
            losses.append(loss)
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(losses)) if losses else None,
            "test_accuracy": _accuracy(network, test_images, test_labels),
        })
    return network, history


def write_history(history, path) -> None:
    """One JSON record per line, one line per epoch."""
    with open(path, "w") as fh:
        for record in history:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def score_dataset(network: Network, items):
    """(abnormal probability, truth) pairs for metric computation."""
    images = [_sized(im, network.config.input_size) for im, _ in items]
    probs, _ = network.predict(images)
    return [(float(p[1]), bool(lab)) for p, (_, lab) in zip(probs, items)]


def extract_features(network: Network, image):
    """Feature-layer activations for one image."""
    return network.features(_sized(image, network.config.input_size))


def train_ensemble(dataset, network_config: NetworkConfig = NetworkConfig(),
                   train_config: TrainConfig = TrainConfig(), k: int = 1):
    """Train k models on the same split, seeds offset per member."""
    if k < 1:
        raise ValueError("ensemble needs at least one member")
    members, histories = [], []
    for member in range(k):
        cfg = TrainConfig(
            learning_rate=train_config.learning_rate, epochs=train_config.epochs,
            batch_size=train_config.batch_size, momentum=train_config.momentum,
            seed=train_config.seed + member, augment=train_config.augment)
        network, history = train(dataset, network_config, cfg)
        members.append(network)
        histories.append(history)
    return members, histories


def majority_vote(networks, images):
    """Per-image majority label across members; ties go to label 0."""
    if not networks:
        raise ValueError("empty ensemble")
    votes = np.stack([network.predict(
        [_sized(im, network.config.input_size) for im in images])[1]
        for network in networks])
    counts = votes.sum(axis=0)
    return (counts * 2 > len(networks)).astype(int)
