"""Training schedules: monolingual, joint multilingual, and paired fine-tuning.

Joint batches mix languages: each slot's language is drawn with probability
proportional to f^a (f = that language's share of the training data, a = 0.7
by default), then a sentence is drawn without replacement from that
language's epoch-local shuffle. Every sentence flows through the shared
encoder and its own language's head, so a step that contains no sentences of
some language leaves that language's head untouched.

The loss is a structured margin: the Hamming-augmented best rival tree must
trail the gold tree by its augmentation. Losses are averaged over the batch
in sentence order, optimized with Adam, and the best checkpoint is kept by
unweighted mean dev F1 across languages.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape, Tensor, adam_step, backward, clip_gradients
from .decoder import cky_decode, loss_augmented_decode_scored
from .encoder import (EncoderConfig, MissingVectors, Vocabulary, align_subwords,
                      build_vocab, encode, external_from_static,
                      init_encoder_params)
from .evaluation import labeled_prf
from .model import Model, load_model, save_model
from .scorer import LengthMismatch, ScoreChart, init_head, score_chart
from .trees import (SpanSet, Tree, collapse_unaries, expand_unaries,
                    load_treebank, tree_to_spans)
from .vectors import WordCountMismatch, load_static_vectors, read_ctxv1


class EmptyTreebank(ValueError):
    def __init__(self, lang: str):
        super().__init__(f"treebank for language {lang!r} has no sentences")
        self.lang = lang


class DivergedLoss(RuntimeError):
    pass


class MissingCell(KeyError):
    pass


@dataclass
class SamplerConfig:
    """Language sampling proportional to f^a over the training fractions f."""

    fractions: tuple[float, ...]
    exponent: float = 0.7
    seed: int = 0

    def __post_init__(self):
        f = np.asarray(self.fractions, dtype=np.float64)
        if (f <= 0).any():
            raise ValueError("fractions must be positive")
        if abs(float(f.sum()) - 1.0) > 1e-9:
            raise ValueError(f"fractions sum to {f.sum()!r}, expected 1")
        if self.exponent < 0:
            raise ValueError("exponent must be >= 0")

    def probabilities(self) -> np.ndarray:
        w = np.asarray(self.fractions, dtype=np.float64) ** self.exponent
        return w / w.sum()


def sample_language(sampler: SamplerConfig, rng: np.random.Generator) -> int:
    """Draw one language index with P(i) = f_i^a / sum_j f_j^a."""
    cum = np.cumsum(sampler.probabilities())
    return int(np.searchsorted(cum, rng.random(), side="right").clip(0, cum.size - 1))


class _Cursors:
    """Per-language without-replacement draw order, reshuffled when exhausted."""

    def __init__(self, sizes: list[int]):
        self.sizes = sizes
        self.orders: list[np.ndarray | None] = [None] * len(sizes)
        self.pos = [0] * len(sizes)

    def draw(self, lang: int, rng: np.random.Generator) -> int:
        if self.orders[lang] is None or self.pos[lang] >= self.sizes[lang]:
            self.orders[lang] = rng.permutation(self.sizes[lang])
            self.pos[lang] = 0
        idx = int(self.orders[lang][self.pos[lang]])
        self.pos[lang] += 1
        return idx


def make_joint_batch(treebanks, sampler: SamplerConfig, batch_size: int,
                     rng: np.random.Generator,
                     cursors: _Cursors | None = None) -> list[tuple[int, int]]:
    """Fill a batch of (language index, sentence index) slots.

    ``treebanks`` is one sequence of sentences per language; only lengths are
    consulted here. Languages are drawn via :func:`sample_language`, sentences
    uniformly without replacement within each language's epoch-local cursor.
    """
    sizes = [len(tb) for tb in treebanks]
    for lang, size in enumerate(sizes):
        if size == 0:
            raise EmptyTreebank(str(lang))
    if cursors is None:
        cursors = _Cursors(sizes)
    batch = []
    for _ in range(batch_size):
        lang = sample_language(sampler, rng)
        batch.append((lang, cursors.draw(lang, rng)))
    return batch


def margin_loss(chart: ScoreChart, gold: SpanSet,
                leaves: list[tuple[str, str]] | None = None) -> tuple[Tensor, Tree]:
    """max(0, s(T') + Delta(T', T*) - s(T*)) with T' the augmented argmax.

    Delta is the Hamming cost the rival tree accrued in the augmented chart
    (one unit per decomposition span whose label disagrees with gold, with
    absent spans counting as empty), recovered as augmented total minus
    s(T'). Gradients flow +1 into the chart cells of T' and -1 into those of
    T* (shared cells cancel); the loss is exactly zero when the augmented
    decode reproduces the gold span set.
    """
    if chart.tensor is None:
        raise ValueError("margin_loss needs a chart built by score_chart")
    if gold.length != chart.n:
        raise LengthMismatch(f"gold covers {gold.length} tokens, chart {chart.n}")
    predicted, augmented_total = loss_augmented_decode_scored(chart, gold, leaves)
    pred_spans = [s for s in tree_to_spans(predicted) if s.label != ""]
    gold_spans = [s for s in gold if s.label != ""]

    def cells(span_list):
        rows = [chart.row(s.start, s.end) for s in span_list]
        cols = [chart.label_index[s.label] for s in span_list]
        return ad.tsum(ad.take_cells(chart.tensor, rows, cols))

    s_pred = cells(pred_spans)
    s_gold = cells(gold_spans)
    hamming = round(augmented_total - s_pred.item())
    margin = ad.add(ad.sub(s_pred, s_gold), ad.tensor(float(hamming)))
    return ad.relu(margin), predicted


@dataclass
class LanguageSpec:
    code: str
    train_path: str
    dev_path: str | None = None
    static_vectors: str | None = None
    train_vectors: str | None = None  # CTXV1 for context_vectors mode
    dev_vectors: str | None = None


@dataclass
class TrainConfig:
    languages: list[LanguageSpec]
    out_dir: str
    mode: str = "mono"  # mono | joint | paired
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    d_hidden: int = 250
    batch_size: int | None = None  # default: 32 mono, 256 joint/paired
    lr: float | None = None  # default: 1e-3 scratch, 5e-5 vector modes
    epochs: int = 10
    eval_interval: int = 20  # steps
    seed: int = 0
    sampling_exponent: float = 0.7
    warmup_steps: int | None = None  # default: 160 scratch, 0 otherwise
    max_grad_norm: float | None = None
    target_f1: float | None = None  # stop early once mean dev F1 reaches this

    def __post_init__(self):
        if self.mode not in ("mono", "joint", "paired"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        n = len(self.languages)
        if self.mode == "mono" and n != 1:
            raise ValueError(f"mono mode needs exactly 1 language, got {n}")
        if self.mode == "paired" and n != 2:
            raise ValueError(f"paired mode needs exactly 2 languages, got {n}")
        if self.mode == "joint" and n < 2:
            raise ValueError(f"joint mode needs >= 2 languages, got {n}")
        codes = [l.code for l in self.languages]
        if len(set(codes)) != len(codes):
            raise ValueError(f"duplicate language codes: {codes}")

    @property
    def resolved_batch_size(self) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return 32 if self.mode == "mono" else 256

    @property
    def resolved_lr(self) -> float:
        if self.lr is not None:
            return self.lr
        return 1e-3 if self.encoder.mode == "scratch" else 5e-5

    @property
    def resolved_warmup(self) -> int:
        if self.warmup_steps is not None:
            return self.warmup_steps
        return 160 if self.encoder.mode == "scratch" else 0


@dataclass
class _Sentence:
    sid: str
    words: list[str]
    leaves: list[tuple[str, str]]
    gold_tree: Tree  # as read from the treebank (expanded form)
    gold_spans: SpanSet
    external: np.ndarray | None = None


@dataclass
class LogRow:
    step: int
    loss: float
    lang: str
    dev_f1: float

    def line(self) -> str:
        return f"step={self.step} loss={self.loss:.6f} lang={self.lang} devF1={self.dev_f1:.2f}"


@dataclass
class TrainResult:
    checkpoint_path: str
    log_path: str
    rows: list[LogRow]
    best_dev: dict[str, float]
    best_mean: float
    steps: int
    model: Model  # parameters of the saved (best) checkpoint


def _load_split(spec: LanguageSpec, path: str, vectors_path: str | None,
                cfg: EncoderConfig, static_table=None) -> list[_Sentence]:
    bank = load_treebank(path, spec.code)
    if len(bank) == 0:
        raise EmptyTreebank(spec.code)
    records = None
    if cfg.mode == "context_vectors":
        if vectors_path is None:
            raise MissingVectors(f"{spec.code}:{os.path.basename(path)}")
        d_ext, records = read_ctxv1(vectors_path)
        if d_ext != cfg.d_ext:
            raise ad.ShapeMismatch("context_vectors", d_ext, cfg.d_ext)
    sentences = []
    for sid, tree in bank.entries:
        leaves = [(leaf.word, leaf.pos_tag) for leaf in tree.leaves()]
        words = [w for w, _ in leaves]
        collapsed = collapse_unaries(tree)
        sent = _Sentence(sid, words, leaves, tree, tree_to_spans(collapsed))
        if cfg.mode == "static_vectors":
            sent.external = external_from_static(words, static_table, cfg.d_ext,
                                                 cfg.lowercase)
        elif cfg.mode == "context_vectors":
            rec = records.get(sid)
            if rec is None:
                raise MissingVectors(sid)
            if len(rec.word_end_indices) != len(words):
                raise WordCountMismatch(sid, len(rec.word_end_indices), len(words))
            sent.external = align_subwords(rec, "last")
        sentences.append(sent)
    return sentences


def _label_inventory(sentences: list[_Sentence]) -> list[str]:
    labels = set()
    for sent in sentences:
        for span in sent.gold_spans:
            labels.add(span.label)
    return sorted(labels)


def _evaluate(model_cfg: EncoderConfig, params, vocab, head,
              sentences: list[_Sentence]) -> float:
    golds, preds = [], []
    for sent in sentences:
        boundary = encode(sent.words, params, model_cfg, vocab,
                          external=sent.external, sentence_id=sent.sid)
        chart = score_chart(boundary, head)
        preds.append(expand_unaries(cky_decode(chart, sent.leaves)))
        golds.append(sent.gold_tree)
    return labeled_prf(golds, preds).f1


def train(config: TrainConfig) -> TrainResult:
    """Run one training job and leave the best checkpoint in ``out_dir``."""
    os.makedirs(config.out_dir, exist_ok=True)
    enc_cfg = config.encoder
    rng_init = np.random.default_rng([config.seed, 0])
    rng_batch = np.random.default_rng([config.seed, 1])
    rng_drop = np.random.default_rng([config.seed, 2])

    train_sets: list[list[_Sentence]] = []
    dev_sets: list[list[_Sentence] | None] = []
    for spec in config.languages:
        static_table = None
        if enc_cfg.mode == "static_vectors":
            dim, static_table = load_static_vectors(spec.static_vectors)
            if dim != enc_cfg.d_ext:
                raise ad.ShapeMismatch("static_vectors", dim, enc_cfg.d_ext)
        train_sets.append(_load_split(spec, spec.train_path, spec.train_vectors,
                                      enc_cfg, static_table))
        if spec.dev_path is not None:
            dev_sets.append(_load_split(spec, spec.dev_path, spec.dev_vectors,
                                        enc_cfg, static_table))
        else:
            dev_sets.append(None)

    needs_vocab = enc_cfg.mode == "scratch" or enc_cfg.add_word_embeddings
    if needs_vocab:
        vocab = build_vocab((s.words for sents in train_sets for s in sents),
                            enc_cfg.lowercase)
    else:
        vocab = Vocabulary([])

    params = init_encoder_params(enc_cfg, vocab, rng_init)
    heads = {}
    for spec, sents in zip(config.languages, train_sets):
        heads[spec.code] = init_head(spec.code, _label_inventory(sents),
                                     enc_cfg.d_model, config.d_hidden, rng_init)
    model = Model(enc_cfg, config.d_hidden, vocab, params, heads)
    all_params = model.all_params()

    sizes = [len(s) for s in train_sets]
    total = sum(sizes)
    sampler = SamplerConfig(tuple(n / total for n in sizes),
                            exponent=config.sampling_exponent, seed=config.seed)
    batch_size = config.resolved_batch_size
    steps_total = max(1, math.ceil(config.epochs * total / batch_size))
    warmup = config.resolved_warmup
    base_lr = config.resolved_lr
    adam = AdamState(lr=base_lr)
    cursors = _Cursors(sizes)

    ckpt_path = os.path.join(config.out_dir, "model.spck")
    log_path = os.path.join(config.out_dir, "train.log")
    rows: list[LogRow] = []
    best_mean = -1.0
    best_dev: dict[str, float] = {}
    saved = False
    has_dev = any(d is not None for d in dev_sets)

    def run_eval(step: int, loss_value: float) -> float:
        nonlocal best_mean, best_dev, saved
        f1s = {}
        for spec, dev in zip(config.languages, dev_sets):
            if dev is None:
                continue
            f1s[spec.code] = _evaluate(enc_cfg, params, vocab, heads[spec.code], dev)
            rows.append(LogRow(step, loss_value, spec.code, f1s[spec.code]))
        mean = sum(f1s.values()) / len(f1s) if f1s else 0.0
        if f1s and mean > best_mean:
            best_mean = mean
            best_dev = dict(f1s)
            save_model(ckpt_path, model, {"step": step, "mean_dev_f1": mean})
            saved = True
        return mean

    step = 0
    for step in range(1, steps_total + 1):
        adam.lr = base_lr * min(1.0, step / warmup) if warmup > 0 else base_lr
        batch = make_joint_batch(train_sets, sampler, batch_size, rng_batch, cursors)
        with Tape() as tape:
            total_loss = None
            for lang_idx, sent_idx in batch:
                sent = train_sets[lang_idx][sent_idx]
                boundary = encode(sent.words, params, enc_cfg, vocab,
                                  external=sent.external, dropout_rng=rng_drop,
                                  sentence_id=sent.sid)
                chart = score_chart(boundary, heads[config.languages[lang_idx].code])
                loss, _ = margin_loss(chart, sent.gold_spans, sent.leaves)
                total_loss = loss if total_loss is None else ad.add(total_loss, loss)
            mean_loss = ad.scale(total_loss, 1.0 / len(batch))
        loss_value = mean_loss.item()
        if not np.isfinite(loss_value):
            raise DivergedLoss(f"non-finite loss at step {step}")
        grad_map = backward(tape, mean_loss)
        grads = {name: grad_map.of(t) for name, t in all_params.items()
                 if grad_map.has(t)}
        if config.max_grad_norm is not None:
            clip_gradients(grads, config.max_grad_norm)
        adam_step(all_params, grads, adam)

        if has_dev and (step % config.eval_interval == 0 or step == steps_total):
            mean = run_eval(step, loss_value)
            if config.target_f1 is not None and mean >= config.target_f1:
                break
        elif step == steps_total:
            rows.append(LogRow(step, loss_value, "-", 0.0))

    if not saved:
        save_model(ckpt_path, model, {"step": step})
    with open(log_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(row.line() + "\n")
    from .reporting import plot_training_curves
    plot_training_curves(rows, os.path.join(config.out_dir, "training_curve.png"))
    return TrainResult(ckpt_path, log_path, rows, best_dev, best_mean, step,
                       load_model(ckpt_path))


@dataclass
class DeltaReport:
    """Change in dev F1 from paired vs. individual fine-tuning."""

    languages: list[str]
    deltas: np.ndarray  # [tested, auxiliary]
    row_avg: np.ndarray
    col_avg: np.ndarray
    best: list[tuple[str | None, float]]  # per tested language


def paired_delta_report(mono_f1: dict[str, float],
                        paired_f1: dict[tuple[str, str], float],
                        languages: list[str] | None = None) -> DeltaReport:
    """cell[t][aux] = F1 of t fine-tuned with aux, minus mono F1 of t."""
    langs = languages if languages is not None else sorted(mono_f1)
    k = len(langs)
    deltas = np.zeros((k, k))
    for ti, tested in enumerate(langs):
        if tested not in mono_f1:
            raise MissingCell(f"missing mono F1 for {tested!r}")
        for ai, aux in enumerate(langs):
            if tested == aux:
                continue
            key = (tested, aux)
            if key not in paired_f1:
                raise MissingCell(f"missing paired F1 for {key!r}")
            deltas[ti, ai] = paired_f1[key] - mono_f1[tested]
    best = []
    for ti in range(k):
        off = [(deltas[ti, ai], ai) for ai in range(k) if ai != ti]
        top_delta, top_ai = max(off)
        if top_delta <= 0.0:
            best.append((None, 0.0))
        else:
            best.append((langs[top_ai], float(top_delta)))
    return DeltaReport(langs, deltas, deltas.mean(axis=1), deltas.mean(axis=0), best)
