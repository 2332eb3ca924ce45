"""Batch extraction of pooled sentence embeddings from an encoder."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .pooling import POOLING_MODES, pool_hidden_states
from .writer import write_embd


class ExtractionError(Exception):
    pass


def read_sentences(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        sentences = fh.read().splitlines()
    if not sentences:
        raise ExtractionError(f"{path}: no sentences")
    for index, sentence in enumerate(sentences):
        if not sentence.strip():
            raise ExtractionError(f"sentence {index} is empty")
    return sentences


def _load_encoder(model_id):
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ExtractionError(f"model {model_id!r} unavailable: {exc}") from exc
    model.eval()
    return tokenizer, model


def extract_embeddings(model_id, sentences_path, pooling: str, out_path,
                       max_len: int = 64, batch_size: int = 32) -> int:
    """Pool sentence embeddings and write an EMBD file.

    Output rows follow the input sentence order regardless of batching;
    truncation clips each sentence to ``max_len`` tokens and padding
    positions are excluded from averages. A copy of the sentences is
    echoed next to the output so downstream analyses stay aligned.
    Returns the number of rows written.
    """
    import torch

    if pooling not in POOLING_MODES:
        raise ExtractionError(f"unknown pooling mode {pooling!r}")
    sentences = read_sentences(sentences_path)
    tokenizer, model = _load_encoder(model_id)

    rows = []
    for start in range(0, len(sentences), batch_size):
        chunk = sentences[start:start + batch_size]
        try:
            encoded = tokenizer(chunk, padding=True, truncation=True,
                                max_length=max_len, return_tensors="pt")
        except Exception as exc:
            raise ExtractionError(
                f"tokenizer failed on sentences {start}..{start + len(chunk) - 1}: {exc}"
            ) from exc
        with torch.no_grad():
            output = model(**encoded, output_hidden_states=True)
        hidden = [h.numpy() for h in output.hidden_states]
        rows.append(pool_hidden_states(hidden, encoded["attention_mask"].numpy(), pooling))

    matrix = np.vstack(rows)
    write_embd(out_path, matrix, source_tag=pooling)
    echo = Path(str(out_path) + ".sentences.txt")
    with open(echo, "w", encoding="utf-8") as fh:
        for sentence in sentences:
            fh.write(sentence + "\n")
    return matrix.shape[0]
