"""Sentence pooling over transformer hidden states.

Modes:

* ``cls``      the final layer's first-position vector
* ``last_avg`` masked token average of the final layer
* ``last2avg`` elementwise mean of the last two layers' masked averages

Padding positions never enter an average; special tokens such as [CLS]
and [SEP] do. ``hidden_states`` follows the Hugging Face convention: the
embedding output first, then one entry per encoder layer.
"""

from __future__ import annotations

import numpy as np

POOLING_MODES = ("cls", "last_avg", "last2avg")


def _masked_average(layer: np.ndarray, mask: np.ndarray) -> np.ndarray:
    # layer: (batch, tokens, hidden); mask: (batch, tokens) of 0/1
    weights = mask[:, :, None].astype(layer.dtype)
    counts = weights.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("a sequence has no unmasked tokens")
    return (layer * weights).sum(axis=1) / counts


def pool_hidden_states(hidden_states, attention_mask, mode: str) -> np.ndarray:
    """Pool a tuple of per-layer hidden states into one vector per sentence."""
    if mode not in POOLING_MODES:
        raise ValueError(f"unknown pooling mode {mode!r}; choose from {POOLING_MODES}")
    if len(hidden_states) < 3:
        raise ValueError("last2avg needs an encoder with at least 2 layers")
    layers = [np.asarray(h, dtype=np.float64) for h in hidden_states]
    mask = np.asarray(attention_mask)
    if mode == "cls":
        return layers[-1][:, 0, :]
    if mode == "last_avg":
        return _masked_average(layers[-1], mask)
    return 0.5 * (_masked_average(layers[-1], mask) + _masked_average(layers[-2], mask))
