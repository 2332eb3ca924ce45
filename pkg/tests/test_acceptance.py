"""Acceptance gate: every release criterion with its stated tolerance.

Each test prints one `[ACCEPTANCE] <criterion>: PASS` line (run with
``pytest tests/test_acceptance.py -v -s`` to see them live). The frozen
benchmark constants come from the reference run documented in the README:
default synthetic benchmark (seed 42) calibrated with the reference flow
schedule (epochs 100, lr 1e-3, batch 256, seed 42).
"""

import math
import time

import numpy as np
import pytest

from isoflow.baselines import natsv, standard_normalize
from isoflow.cli import run
from isoflow.diagnostics import (
    BucketSpec,
    edit_distance,
    knn_stats,
    lexical_correlation,
    norm_by_bucket,
    predicted_similarities,
    spectral_flatness,
)
from isoflow.evaluation import auc, cosine, evaluate_similarity, spearman
from isoflow.flow import ActNorm, FlowModel, TrainConfig, train, transform
from isoflow.numerics import Rng, svd
from isoflow.store import FrequencyTable
from isoflow.synth import SynthConfig, generate

LOG_2PI = math.log(2.0 * math.pi)

# Reference-run regression constants, x100 scale, +/-0.5 tolerance.
RAW_RHO_X100 = 7.273254
FLOW_RHO_X100 = 54.386590
RAW_EDIT_RHO_X100 = -92.700539
FLOW_EDIT_RHO_X100 = 9.139727
RHO_TOL_X100 = 0.5

REFERENCE_TRAIN = dict(epochs=100.0, learning_rate=1e-3, batch_size=256, seed=42)


def announce(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"[ACCEPTANCE] {name}: {status}{suffix}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def benchmark():
    """Default synthetic benchmark plus the reference trained flow."""
    data = generate(SynthConfig(seed=42))
    result = train(data.embeddings, TrainConfig(**REFERENCE_TRAIN))
    calibrated = transform(data.embeddings, result.model)
    return data, result.model, calibrated


def _randomized_model(dim, blocks, seed, scale=0.3, width=8):
    model = FlowModel.build(dim, levels=1, depth=blocks, width=width, rng=Rng(seed))
    noise = Rng(seed + 1000)
    for layer in model.layers:
        if isinstance(layer, ActNorm):
            layer.scale = 1.0 + scale * noise.standard_normal(dim)
            layer.bias = scale * noise.standard_normal(dim)
            layer.initialized = True
        elif hasattr(layer, "net"):
            for arr in layer.params().values():
                arr += scale * noise.standard_normal(*arr.shape)
    return model


def test_invertibility_suite(benchmark):
    start = time.perf_counter()
    data, trained32, _ = benchmark
    models = {"trained-32": trained32}

    untrained32 = FlowModel.build(32, rng=Rng(0))
    untrained32.init_actnorms(data.embeddings.matrix[:256])
    models["untrained-32"] = untrained32

    small = generate(SynthConfig(n_sentences=512, latent_dim=4, observed_dim=8,
                                 n_pairs=10, seed=1, with_sentences=False))
    models["trained-8"] = train(small.embeddings,
                                TrainConfig(epochs=3.0, seed=1)).model
    untrained8 = FlowModel.build(8, rng=Rng(2))
    untrained8.init_actnorms(small.embeddings.matrix[:256])
    models["untrained-8"] = untrained8

    worst_stack, worst_layer = 0.0, 0.0
    for name, model in models.items():
        vectors = Rng(7).standard_normal(1000, model.dim)
        z, _ = model.inverse(vectors)
        back, _ = model.forward(z)
        worst_stack = max(worst_stack, float(np.abs(back - vectors).max()))
        u, _ = model.forward(vectors)
        z2, _ = model.inverse(u)
        worst_stack = max(worst_stack, float(np.abs(z2 - vectors).max()))
        for layer in model.layers:
            y, _ = layer.forward(vectors)
            x, _ = layer.inverse(y)
            worst_layer = max(worst_layer, float(np.abs(x - vectors).max()))
    elapsed = time.perf_counter() - start
    announce("invertibility", worst_stack < 1e-9 and worst_layer < 1e-12 and elapsed < 10.0,
             f"stack {worst_stack:.2e}, layer {worst_layer:.2e}, {elapsed:.1f}s")


def test_logdet_matches_numeric_jacobian():
    start = time.perf_counter()
    h = 1e-6
    worst = 0.0
    for seed in range(20):
        dim = (4, 6, 8, 10, 12, 16)[seed % 6]
        model = _randomized_model(dim, 2, seed=seed)
        u = Rng(100 + seed).standard_normal(dim)
        _, analytic = model.inverse(u)
        jac = np.zeros((dim, dim))
        for j in range(dim):
            up, down = u.copy(), u.copy()
            up[j] += h
            down[j] -= h
            zu, _ = model.inverse(up)
            zd, _ = model.inverse(down)
            jac[:, j] = (zu - zd) / (2.0 * h)
        sign, numeric = np.linalg.slogdet(jac)
        assert sign != 0
        worst = max(worst, abs(analytic - numeric))
    elapsed = time.perf_counter() - start
    announce("logdet-vs-numeric-jacobian", worst < 1e-4 and elapsed < 30.0,
             f"max abs err {worst:.2e}, {elapsed:.1f}s")


def test_gradient_check_every_parameter():
    start = time.perf_counter()
    h = 1e-5
    model = _randomized_model(8, 2, seed=3, width=32)  # default coupling width
    batch = Rng(4).standard_normal(16, 8)
    _, grads = model.grad_nll(batch)
    params = model.parameters()
    worst = 0.0
    for key, grad in grads.items():
        arr = params[key]
        flat = arr.ravel()
        numeric = np.zeros(grad.size)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = model.nll(batch)
            flat[i] = keep - h
            down = model.nll(batch)
            flat[i] = keep
            numeric[i] = (up - down) / (2.0 * h)
        analytic = grad.ravel()
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
        worst = max(worst, float((np.abs(analytic - numeric) / denom).max()))
    elapsed = time.perf_counter() - start
    announce("gradient-check", worst < 1e-4 and elapsed < 60.0,
             f"max rel err {worst:.2e} over {sum(g.size for g in grads.values())} params, "
             f"{elapsed:.1f}s")


def test_nll_closed_forms():
    act = ActNorm(2)
    act.init_identity()
    identity = FlowModel(2, [act])
    origin_err = abs(identity.nll(np.zeros((1, 2))) - LOG_2PI)

    batch = Rng(5).standard_normal(64, 6) * np.array([4.0, 2.0, 1.0, 0.5, 0.2, 3.0]) + 1.0
    act6 = ActNorm(6)
    act6.init_from_batch(batch)
    model = FlowModel(6, [act6])
    mu, sigma = batch.mean(axis=0), batch.std(axis=0)
    oracle = float(np.mean(np.sum(
        0.5 * ((batch - mu) / sigma) ** 2 + 0.5 * LOG_2PI + np.log(sigma), axis=1)))
    oracle_err = abs(model.nll(batch) - oracle)
    announce("nll-closed-forms", origin_err < 1e-9 and oracle_err < 1e-8,
             f"origin {origin_err:.2e}, density oracle {oracle_err:.2e}")


def _oracle_ranks(values):
    return np.array([1.0 + sum(1 for w in values if w < v)
                     + (sum(1 for w in values if w == v) - 1) / 2.0 for v in values])


def _oracle_spearman(xs, ys):
    rx, ry = _oracle_ranks(xs), _oracle_ranks(ys)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    return float(np.sum(dx * dy) / np.sqrt(np.sum(dx * dx) * np.sum(dy * dy)))


def _oracle_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def test_metric_oracles():
    start = time.perf_counter()
    rng = Rng(6)
    checked = 0
    worst = 0.0
    while checked < 200:
        n = int(rng.integers(4, 51))
        xs = rng.integers(0, 10, size=n).astype(float)
        ys = rng.integers(0, 10, size=n).astype(float)
        labels = rng.integers(0, 2, size=n)
        if len(set(xs.tolist())) < 2 or len(set(ys.tolist())) < 2:
            continue
        if labels.min() == labels.max():
            continue
        worst = max(worst, abs(spearman(xs, ys) - _oracle_spearman(xs, ys)))
        worst = max(worst, abs(auc(xs, labels) - _oracle_auc(xs, labels)))
        checked += 1

    cosine_err = abs(cosine([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]) - 0.974631846)
    edit_ok = (edit_distance("kitten", "sitting") == 3
               and edit_distance("abc", "") == 3 and edit_distance("abc", "abc") == 0)

    m = rng.standard_normal(60, 5)
    freq = FrequencyTable(ranks=rng.zipf(1.3, 60))
    spec = BucketSpec()
    knn_ok = True
    for k in (1, 5):
        table = knn_stats(
            __import__("isoflow.store", fromlist=["EmbeddingMatrix"]).EmbeddingMatrix(matrix=m),
            freq, spec, k)
        oracle = {}
        per_row = []
        for i in range(60):
            dists = sorted(
                (float(np.linalg.norm(m[i] - m[j])), j) for j in range(60) if j != i)
            per_row.append(np.mean([d for d, _ in dists[:k]]))
        idx = spec.bucket_indices(freq.ranks)
        for b, label in enumerate(spec.labels()):
            mask = idx == b
            if mask.any():
                oracle[label] = float(np.asarray(per_row)[mask].mean())
        knn_ok &= table.as_dict() == pytest.approx(oracle, abs=1e-12)

    elapsed = time.perf_counter() - start
    announce("metric-oracles",
             worst <= 1e-12 and cosine_err < 1e-9 and edit_ok and knn_ok and elapsed < 30.0,
             f"spearman/auc max err {worst:.1e}, {elapsed:.1f}s")


def test_baseline_contracts(benchmark):
    data, _, _ = benchmark
    sn_out, _ = standard_normalize(data.embeddings)
    mean_err = float(np.abs(sn_out.matrix.mean(axis=0)).max())
    std_err = float(np.abs(sn_out.matrix.std(axis=0) - 1.0).max())

    k = 4
    out = natsv(data.embeddings, k)
    m = data.embeddings.matrix
    mu = m.mean(axis=0)
    v = svd(m - mu).v_basis[:, :k]
    proj_err = float(np.abs(out.matrix @ v).max())
    rebuilt = out.matrix + mu + ((m - mu) @ v) @ v.T
    recon_err = float(np.abs(rebuilt - m).max())
    announce("baseline-contracts",
             mean_err < 1e-10 and std_err < 1e-10 and proj_err < 1e-10 and recon_err < 1e-10,
             f"SN mean {mean_err:.1e} std {std_err:.1e}, NATSV proj {proj_err:.1e} "
             f"recon {recon_err:.1e}")


def test_end_to_end_synthetic_benchmark(benchmark):
    start = time.perf_counter()
    data, _, calibrated = benchmark

    raw_rho = evaluate_similarity(data.embeddings, data.pairs).value * 100.0
    flow_rho = evaluate_similarity(calibrated, data.pairs).value * 100.0

    table = norm_by_bucket(data.embeddings, data.frequency)
    buckets_increase = len(table.means) >= 3 and all(
        b > a for a, b in zip(table.means, table.means[1:]))

    flat_raw = spectral_flatness(data.embeddings)
    flat_cal = spectral_flatness(calibrated)
    flatness_improves = abs(1.0 - flat_cal) < abs(1.0 - flat_raw)

    raw_lex = lexical_correlation(
        data.sentences, data.pairs, predicted_similarities(data.embeddings, data.pairs))
    cal_lex = lexical_correlation(
        data.sentences, data.pairs, predicted_similarities(calibrated, data.pairs))
    raw_edit = raw_lex.rho_predicted_edit * 100.0
    cal_edit = cal_lex.rho_predicted_edit * 100.0

    elapsed = time.perf_counter() - start
    ok = (
        flow_rho > raw_rho
        and buckets_increase
        and flatness_improves
        and abs(cal_edit) <= abs(raw_edit)
        and abs(raw_rho - RAW_RHO_X100) <= RHO_TOL_X100
        and abs(flow_rho - FLOW_RHO_X100) <= RHO_TOL_X100
        and abs(raw_edit - RAW_EDIT_RHO_X100) <= RHO_TOL_X100
        and abs(cal_edit - FLOW_EDIT_RHO_X100) <= RHO_TOL_X100
        and elapsed < 180.0
    )
    announce("end-to-end-benchmark", ok,
             f"rho {raw_rho:.2f}->{flow_rho:.2f}, flatness {flat_raw:.4f}->{flat_cal:.4f}, "
             f"edit rho {raw_edit:.2f}->{cal_edit:.2f}, {elapsed:.1f}s")


def test_determinism_of_cli_artifacts(tmp_path):
    files = ("embeddings.embd", "pairs.tsv", "freq.txt", "sentences.txt")
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["synth", "--seed", "42", "--out", str(out),
                    "--n", "300", "--n-pairs", "150"]) == 0
    synth_ok = all((a / f).read_bytes() == (b / f).read_bytes() for f in files)

    model_a, model_b = tmp_path / "a.flow", tmp_path / "b.flow"
    for path in (model_a, model_b):
        assert run(["train-flow", "--embeddings", str(a / "embeddings.embd"),
                    "--seed", "42", "--epochs", "3", "--out", str(path)]) == 0
    train_ok = model_a.read_bytes() == model_b.read_bytes()

    report_a, report_b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    for path in (report_a, report_b):
        assert run(["eval", "--embeddings", str(a / "embeddings.embd"),
                    "--pairs", str(a / "pairs.tsv"), "--method", "flow",
                    "--model", str(model_a), "--machine", "--out", str(path)]) == 0
    eval_ok = report_a.read_bytes() == report_b.read_bytes()

    announce("determinism", synth_ok and train_ok and eval_ok,
             f"synth {synth_ok}, train {train_ok}, eval {eval_ok}")
