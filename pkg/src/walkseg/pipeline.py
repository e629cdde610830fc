"""End-to-end prediction paths shared by the CLI, the ablation harness,
and the acceptance suite.

Two pipelines exist. The model pipeline runs a trained checkpoint: feature
stack -> linear scores and learned affinities -> transition matrix ->
diffusion. The oracle pipeline bypasses learning entirely: affinities come
straight from ground-truth labels and the scores are corrupted one-hot
encodings, which isolates what diffusion itself can repair.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .features import per_channel_normalize, extract_features
from .graph import affinity_forward, build_sparsity, channel_distances, transition
from .metrics import onehot_probabilities, trimap_band
from .solver import SolverConfig, solve
from .synth import corrupt_unaries, oracle_affinity
from .training import ModelCheckpoint
from .walk import rw_step


@dataclass
class CorruptionConfig:
    band_width: int = 4
    flip_prob: float = 0.3
    blur_radius: int = 1
    seed: int = 0


def prepare_stack(image, bank):
    return per_channel_normalize(extract_features(image, bank))


def model_scores(ckpt: ModelCheckpoint, image):
    """Pre-diffusion class scores of a checkpointed model, (h*w, m)."""
    stack = prepare_stack(image, ckpt.bank)
    return stack.reshape(-1, ckpt.k) @ ckpt.unary.weights.T + ckpt.unary.bias


def model_transition(ckpt: ModelCheckpoint, image, radius: int,
                     metric: str = "euclidean"):
    stack = prepare_stack(image, ckpt.bank)
    pattern = build_sparsity(stack.shape[0], stack.shape[1], radius, metric)
    fdist = channel_distances(stack, pattern)
    return transition(pattern, affinity_forward(fdist, ckpt.theta))


def diffuse(a, f, steps, cfg: SolverConfig):
    """Run `steps` damped walk steps ("converge" for the configured solver)."""
    if steps == "converge":
        return solve(a, f, cfg)
    steps = int(steps)
    if steps < 0:
        raise InvalidInputError("steps must be >= 0")
    y = f
    for _ in range(steps):
        y = rw_step(a, f, y, cfg.alpha)
    return y


def predict(ckpt: ModelCheckpoint, image, steps="converge", radius: int = 5,
            solver_cfg: SolverConfig = None, metric: str = "euclidean"):
    """Checkpoint inference. Returns (label map, diffused scores)."""
    solver_cfg = solver_cfg or SolverConfig()
    f = model_scores(ckpt, image)
    if steps == 0:
        y = f
    else:
        a = model_transition(ckpt, image, radius, metric)
        y = diffuse(a, f, steps, solver_cfg)
    labels = np.argmax(y, axis=1).reshape(image.shape[0], image.shape[1])
    return labels, y


def oracle_scene(labels, corrupt: CorruptionConfig, num_classes: int = None):
    """Corrupted one-hot scores for a label map, plus the clean one-hots."""
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    clean = onehot_probabilities(labels, num_classes)
    band = trimap_band(labels, corrupt.band_width)
    damaged = corrupt_unaries(clean, band, corrupt.flip_prob,
                              corrupt.blur_radius, corrupt.seed)
    return damaged, clean


def oracle_transition(labels, radius: int, metric: str = "euclidean"):
    pattern = build_sparsity(labels.shape[0], labels.shape[1], radius, metric)
    return transition(pattern, oracle_affinity(labels, pattern))


def oracle_diffuse(labels, f, steps, radius: int, cfg: SolverConfig):
    """Diffuse scores with ground-truth-derived affinities."""
    return diffuse(oracle_transition(labels, radius), f, steps, cfg)


def argmax_labels(y, shape):
    return np.argmax(y, axis=1).reshape(shape)
