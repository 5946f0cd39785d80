"""Finite-difference verification of every autodiff op and the full pipeline.

Each op is probed through a scalar loss L(x) = sum(op(x) * R) with a fixed
random weighting R, and every input entry is perturbed by +-h (central
differences, double precision). The error measure is
|analytic - numeric| / (|analytic| + |numeric| + 1e-3), elementwise maxed;
the 1e-3 floor keeps exactly-zero gradients from dividing by zero.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor, backward
from .encoder import EncoderConfig, Vocabulary, encode, init_encoder_params
from .scorer import init_head, score_chart
from .training import margin_loss
from .trees import LabeledSpan, SpanSet

H = 1e-5


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.abs(a) + np.abs(b) + 1e-3
    return float((np.abs(a - b) / denom).max()) if a.size else 0.0


def fd_gradient(f, x: np.ndarray, h: float = H) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to every entry of x."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gf[i] = (up - down) / (2.0 * h)
    return g


def check_probe(build, inputs: list[Tensor], h: float = H) -> float:
    """Compare tape gradients of build(...) against finite differences."""
    with Tape() as tape:
        loss = build()
    grad_map = backward(tape, loss)
    worst = 0.0
    for t in inputs:
        numeric = fd_gradient(lambda: float(build().data), t.data, h)
        worst = max(worst, relative_error(grad_map.of(t), numeric))
    return worst


def _op_cases(rng: np.random.Generator):
    """One (name, inputs, probe) triple per op; probes weight outputs by R."""

    def weighted(op, *tensors):
        r = rng.normal(1.0, 0.5, size=op(*tensors).shape)
        return lambda: ad.tsum(ad.mul(op(*tensors), ad.tensor(r)))

    cases = []

    a = ad.parameter(rng.normal(size=(3, 4)))
    b = ad.parameter(rng.normal(size=(4,)))
    cases.append(("add", [a, b], weighted(ad.add, a, b)))

    a = ad.parameter(rng.normal(size=(3, 4)))
    b = ad.parameter(rng.normal(size=(4,)))
    cases.append(("mul", [a, b], weighted(ad.mul, a, b)))

    a = ad.parameter(rng.normal(size=(2, 5)))
    cases.append(("scale", [a], weighted(lambda t: ad.scale(t, -1.7), a)))

    a = ad.parameter(rng.normal(size=(2, 3)))
    b = ad.parameter(rng.normal(size=(3, 2)))
    cases.append(("matmul", [a, b], weighted(ad.matmul, a, b)))

    a = ad.parameter(rng.normal(size=(3, 2)))
    cases.append(("transpose", [a], weighted(ad.transpose, a)))

    a = ad.parameter(rng.normal(size=(2, 6)))
    cases.append(("relu", [a], weighted(ad.relu, a)))

    a = ad.parameter(rng.normal(size=(3, 4)))
    cases.append(("softmax", [a], weighted(ad.softmax, a)))

    a = ad.parameter(rng.normal(size=(3, 5)))
    cases.append(("layer_norm", [a], weighted(ad.layer_norm, a)))

    table = ad.parameter(rng.normal(size=(6, 3)))
    ids = rng.integers(0, 6, size=5)
    cases.append(("embedding_lookup", [table],
                  weighted(lambda t: ad.embedding_lookup(t, ids), table)))

    a = ad.parameter(rng.normal(size=(4, 5)))
    rows = rng.integers(0, 4, size=6)
    cols = rng.integers(0, 5, size=6)
    cases.append(("take_cells", [a],
                  weighted(lambda t: ad.take_cells(t, rows, cols), a)))

    a = ad.parameter(rng.normal(size=(3, 2)))
    b = ad.parameter(rng.normal(size=(3, 4)))
    cases.append(("concat", [a, b], weighted(lambda x, y: ad.concat([x, y]), a, b)))

    a = ad.parameter(rng.normal(size=(2, 4)))
    b = ad.parameter(rng.normal(size=(3, 4)))
    cases.append(("vstack", [a, b], weighted(lambda x, y: ad.vstack([x, y]), a, b)))

    a = ad.parameter(rng.normal(size=(3, 6)))
    cases.append(("slice_last", [a], weighted(lambda t: ad.slice_last(t, 1, 4), a)))

    a = ad.parameter(rng.normal(size=(3, 4)))
    mask = ad.make_dropout_mask(rng, (3, 4), 0.3)
    cases.append(("dropout", [a], weighted(lambda t: ad.dropout(t, mask), a)))

    a = ad.parameter(rng.normal(size=(2, 3)))
    cases.append(("tsum", [a], lambda: ad.tsum(a)))

    return cases


def op_battery(draws: int = 50, seed: int = 0) -> dict[str, float]:
    """Max relative error per op over ``draws`` random input draws."""
    worst: dict[str, float] = {}
    for draw in range(draws):
        rng = np.random.default_rng([seed, draw])
        for name, inputs, probe in _op_cases(rng):
            err = check_probe(probe, inputs)
            worst[name] = max(worst.get(name, 0.0), err)
    return worst


def _tiny_pipeline(rng: np.random.Generator):
    config = EncoderConfig(num_layers=1, d_model=8, num_heads=2, d_ff=16,
                           dropout=0.0, mode="scratch", max_len=16)
    vocab = Vocabulary(["blue", "cats", "sleep"])
    params = init_encoder_params(config, vocab, rng)
    head = init_head("xx", ["NP", "S", "VP"], config.d_model, 5, rng)
    words = ["cats", "sleep", "blue"]
    leaves = [(w, "XX") for w in words]
    gold = SpanSet((LabeledSpan(0, 3, "S"), LabeledSpan(0, 1, "NP"),
                    LabeledSpan(1, 3, "VP")), 3)
    all_params = dict(params)
    all_params.update(head.params())

    def build():
        boundary = encode(words, params, config, vocab)
        chart = score_chart(boundary, head)
        return margin_loss(chart, gold, leaves)

    return build, all_params


def pipeline_battery(draws: int = 50, seed: int = 0,
                     entries_per_param: int = 4) -> float:
    """Max relative error of d(margin loss)/d(parameter) across the pipeline.

    Finite differences over every parameter tensor, subsampling
    ``entries_per_param`` entries per tensor. The margin loss is piecewise
    linear in the chart: at a tie point the rival tree flips inside the +-h
    window and the central difference straddles a kink, so probes whose
    rival tree is not stable across the window are skipped (the gradient is
    specified only at non-tie points).
    """
    worst = 0.0
    checked = 0
    for draw in range(draws):
        rng = np.random.default_rng([seed, 1000 + draw])
        build, all_params = _tiny_pipeline(rng)
        with Tape() as tape:
            loss, base_tree = build()
        grad_map = backward(tape, loss)
        pick = np.random.default_rng([seed, 2000 + draw])
        for name, t in all_params.items():
            flat = t.data.reshape(-1)
            k = min(entries_per_param, flat.size)
            analytic = grad_map.of(t).reshape(-1)
            for i in sorted(pick.choice(flat.size, size=k, replace=False)):
                orig = flat[i]
                flat[i] = orig + H
                up_t, up_tree = build()
                flat[i] = orig - H
                down_t, down_tree = build()
                flat[i] = orig
                if up_tree != base_tree or down_tree != base_tree:
                    continue  # tie point
                numeric = (float(up_t.data) - float(down_t.data)) / (2.0 * H)
                worst = max(worst, relative_error(np.array(analytic[i]),
                                                  np.array(numeric)))
                checked += 1
    assert checked > 0, "every probe hit a tie point; enlarge the battery"
    return worst
