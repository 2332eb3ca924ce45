import numpy as np
import pytest

from isoflow.diagnostics import norm_by_bucket, singular_spectrum
from isoflow.errors import IsoflowError
from isoflow.evaluation import evaluate_similarity
from isoflow.synth import SynthConfig, SynthData, generate, gold_oracle


def test_gold_oracle_trivial_cases():
    z = np.array([0.5, -1.0, 2.0])
    assert gold_oracle(z, z) == pytest.approx(5.0, abs=1e-12)
    assert gold_oracle(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(2.5)
    assert gold_oracle(z, -z) == pytest.approx(0.0, abs=1e-12)


def test_generate_is_deterministic():
    cfg = SynthConfig(n_sentences=200, n_pairs=100, seed=42)
    a, b = generate(cfg), generate(cfg)
    assert a.embeddings.matrix.tobytes() == b.embeddings.matrix.tobytes()
    assert a.pairs.gold.tobytes() == b.pairs.gold.tobytes()
    assert np.array_equal(a.frequency.ranks, b.frequency.ranks)
    assert a.sentences.sentences == b.sentences.sentences


def test_generate_shapes_and_ranges():
    cfg = SynthConfig(n_sentences=300, latent_dim=8, observed_dim=12, n_pairs=150, seed=1)
    data = generate(cfg)
    assert data.embeddings.matrix.shape == (300, 12)
    assert data.latent.shape == (300, 8)
    assert len(data.pairs) == 150
    assert len(data.frequency) == 300
    assert len(data.sentences) == 300
    assert data.pairs.gold.min() >= 0.0 and data.pairs.gold.max() <= 5.0
    assert data.frequency.ranks.min() >= 1
    # pairs are distinct and canonical
    seen = set(zip(data.pairs.index_a.tolist(), data.pairs.index_b.tolist()))
    assert len(seen) == 150
    assert all(a < b for a, b in seen)


def test_generate_rejects_too_many_pairs():
    with pytest.raises(IsoflowError, match="pairs"):
        generate(SynthConfig(n_sentences=5, n_pairs=11, seed=0))


def test_isotropic_case_is_orthogonal_transform():
    # kappa=1, no shift, no noise, square mixing: observed = orthogonal(latent)
    cfg = SynthConfig(n_sentences=5000, latent_dim=8, observed_dim=8,
                      condition_number=1.0, frequency_shift_strength=0.0,
                      noise_std=0.0, n_pairs=500, seed=42, with_sentences=False)
    data = generate(cfg)
    subset = data.latent[:500], data.embeddings.matrix[:500]
    gram_latent = subset[0] @ subset[0].T
    gram_observed = subset[1] @ subset[1].T
    np.testing.assert_allclose(gram_observed, gram_latent, atol=1e-8)
    spectrum = singular_spectrum(data.embeddings)
    assert spectrum[0] / spectrum[-1] < 1.5
    # observed cosine equals latent cosine, so the planted ranking is exact
    assert evaluate_similarity(data.embeddings, data.pairs).value == pytest.approx(1.0, abs=1e-10)


def test_flow_beats_raw_on_pure_anisotropy():
    # no frequency shift, large condition number: whitening alone must
    # recover a strictly better ranking than the raw stretched cosines
    from isoflow.flow import TrainConfig, train, transform

    data = generate(SynthConfig(seed=42, frequency_shift_strength=0.0,
                                with_sentences=False))
    raw_rho = evaluate_similarity(data.embeddings, data.pairs).value
    result = train(data.embeddings, TrainConfig(epochs=30.0, seed=42))
    flow_rho = evaluate_similarity(transform(data.embeddings, result.model),
                                   data.pairs).value
    assert flow_rho > raw_rho


def test_default_config_bucket_norms_increase_with_rarity():
    data = generate(SynthConfig(seed=42))
    table = norm_by_bucket(data.embeddings, data.frequency)
    assert len(table.means) >= 3
    assert all(b > a for a, b in zip(table.means, table.means[1:]))


def test_sentences_encode_shared_prefix_by_rarity():
    from isoflow.diagnostics import edit_distance
    from isoflow.synth import _SENTENCE_LEN, _TEMPLATE_CAP

    data = generate(SynthConfig(n_sentences=300, seed=3))
    sentences = data.sentences.sentences
    assert all(len(s) == _SENTENCE_LEN for s in sentences)
    # edit distance tracks the non-shared tail: correlated with the shorter
    # of the two template prefixes (i.e. the more frequent rank of the pair)
    logr = np.log(data.frequency.ranks.astype(float))
    prefix = np.minimum(1 + np.round(4.0 * logr), _TEMPLATE_CAP)
    rng = np.random.default_rng(0)
    dists, mins = [], []
    for _ in range(300):
        i, j = rng.integers(0, 300, size=2)
        if i == j:
            continue
        dists.append(edit_distance(sentences[i], sentences[j]))
        mins.append(min(prefix[i], prefix[j]))
    assert np.corrcoef(dists, mins)[0, 1] < -0.8


def test_generate_validates_config():
    with pytest.raises(IsoflowError):
        SynthConfig(latent_dim=40, observed_dim=32)
    with pytest.raises(IsoflowError):
        SynthConfig(condition_number=0.5)


def test_no_sentences_flag():
    data = generate(SynthConfig(n_sentences=50, n_pairs=20, with_sentences=False, seed=9))
    assert isinstance(data, SynthData)
    assert data.sentences is None
