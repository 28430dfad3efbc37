"""Log-linear ordering models.

A model scores an ordering of a head and its dependents as the dot product
of a sparse weight vector with the feature counts of that ordering.  The
normalizer is computed exactly by enumerating all n! orderings in
Steinhaus-Johnson-Trotter order, maintaining the score incrementally across
each adjacent swap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, Iterable, Sequence

import numpy as np

from . import features
from .features import ExtendedSequence, identity_order, pair_groups, span_name
from .sjt import MAX_N, sjt_enumerate
from .treebank import HEAD_RELATION, LocalConfig, local_configs

MODEL_FORMAT_VERSION = 1
LN2 = math.log(2.0)


@dataclass
class TrainingMeta:
    """Convergence record for one optimization run.

    `objective` is the mean log-likelihood per training configuration at the
    final weights; `converged` is False when the iteration cap stopped the
    run first.
    """

    iterations: int
    objective: float
    grad_inf_norm: float
    converged: bool
    dropped_configs: int = 0
    objective_history: list[float] = field(default_factory=list)


@dataclass
class OrderingModel:
    """Weights for one (language, POS class) pair plus its H-feature whitelist.

    Features absent from `weights` have weight 0.  H features outside
    `h_whitelist` never fire for this model.
    """

    language: str
    pos_class: str
    weights: dict[str, float]
    h_whitelist: frozenset[str] = frozenset()
    training_meta: TrainingMeta | None = None


def uniform_model(language: str = "", pos_class: str = "N") -> OrderingModel:
    """All-zero weights: every ordering of a configuration is equally likely."""
    return OrderingModel(language, pos_class, {}, frozenset())


def score(model: OrderingModel, config: LocalConfig, order: tuple[int, ...]) -> float:
    """Log of the unnormalized probability of one ordering."""
    counts = features.extract(config, order, model.h_whitelist)
    w = model.weights
    return sum(w.get(name, 0.0) * c for name, c in counts.items())


def _affected_pairs(n: int, p: int) -> list[tuple[int, int]]:
    # Slot pairs whose features can change when slots p and p+1 swap.
    out = [(p, p + 1)]
    for k in range(0, n + 2):
        if k == p or k == p + 1:
            continue
        out.append((min(k, p), max(k, p)))
        out.append((min(k, p + 1), max(k, p + 1)))
    return out


def _affected_spans(n: int, p: int) -> list[tuple[int, int]]:
    # Contiguous 3..5-slot spans overlapping the swapped slots.
    out = []
    for length in range(features.H_MIN_SPAN, features.H_MAX_SPAN + 1):
        for i in range(max(0, p - length), min(p + 1, n + 1 - length) + 1):
            out.append((i, i + length))
    return out


def enumerate_scores(model: OrderingModel, config: LocalConfig
                     ) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """All n! orderings in SJT order with incrementally maintained scores.

    The first ordering is the identity (the configuration's observed order).
    """
    n = config.n
    if n > MAX_N:
        raise ValueError(f"configuration size {n} exceeds {MAX_N}")
    seq = ExtendedSequence.from_config(config, identity_order(n))
    slots = list(seq.slots)
    head_slot = seq.head_slot
    w = model.weights
    wl = model.h_whitelist

    # pair_groups memoizes its name tuples, so they key per-model weight sums
    pair_cache: dict = {}
    span_cache: dict[str, float] = {}

    def pair_sum(i: int, j: int, h: int) -> float:
        groups = pair_groups(slots, h, i, j)
        total = pair_cache.get(groups)
        if total is None:
            total = 0.0
            for group in groups:
                for name in group:
                    total += w.get(name, 0.0)
            pair_cache[groups] = total
        return total

    def span_sum(i: int, j: int) -> float:
        name = span_name(slots, i, j)
        total = span_cache.get(name)
        if total is None:
            total = w.get(name, 0.0) if name in wl else 0.0
            span_cache[name] = total
        return total

    current = 0.0
    for i in range(n + 1):
        for j in range(i + 1, n + 2):
            current += pair_sum(i, j, head_slot)
            if features.H_MIN_SPAN <= j - i <= features.H_MAX_SPAN:
                current += span_sum(i, j)

    orders: list[tuple[int, ...]] = []
    scores = np.empty(math.factorial(n))
    for k, (perm, swapped) in enumerate(sjt_enumerate(n)):
        if swapped is not None:
            p = swapped + 1
            pairs = _affected_pairs(n, p)
            spans = _affected_spans(n, p)
            before = sum(pair_sum(i, j, head_slot) for i, j in pairs)
            before += sum(span_sum(i, j) for i, j in spans)
            slots[p], slots[p + 1] = slots[p + 1], slots[p]
            if head_slot == p:
                head_slot = p + 1
            elif head_slot == p + 1:
                head_slot = p
            after = sum(pair_sum(i, j, head_slot) for i, j in pairs)
            after += sum(span_sum(i, j) for i, j in spans)
            current += after - before
        orders.append(perm)
        scores[k] = current
    return orders, scores


def _logsumexp(scores: np.ndarray) -> float:
    m = float(scores.max())
    return m + math.log(float(np.exp(scores - m).sum()))


def log_partition(model: OrderingModel, config: LocalConfig) -> float:
    _, scores = enumerate_scores(model, config)
    return _logsumexp(scores)


def _pair_names(slots, head_slot, i, j) -> list[str]:
    return [name for group in pair_groups(slots, head_slot, i, j) for name in group]


def log_partition_and_expectation(model: OrderingModel, config: LocalConfig
                                  ) -> tuple[float, dict[str, float]]:
    """Exact log normalizer and expected feature vector for one configuration.

    Walks the orderings twice in SJT order: once maintaining scores
    incrementally, once accumulating the expectation from per-swap feature
    deltas weighted by probability suffix sums.
    """
    n = config.n
    _, scores = enumerate_scores(model, config)
    logz = _logsumexp(scores)
    probs = np.exp(scores - logz)
    suffix = np.cumsum(probs[::-1])[::-1]

    wl = model.h_whitelist
    seq = ExtendedSequence.from_config(config, identity_order(n))
    slots = list(seq.slots)
    head_slot = seq.head_slot
    expected: dict[str, float] = {
        name: float(count)
        for name, count in features.extract(config, identity_order(n), wl).items()
    }
    k = 0
    for _, swapped in sjt_enumerate(n):
        if swapped is None:
            k += 1
            continue
        p = swapped + 1
        pairs = _affected_pairs(n, p)
        spans = _affected_spans(n, p)
        weight = float(suffix[k])

        def apply(sign: float) -> None:
            for i, j in pairs:
                for name in _pair_names(slots, head_slot, i, j):
                    expected[name] = expected.get(name, 0.0) + sign * weight
            for i, j in spans:
                name = span_name(slots, i, j)
                if name in wl:
                    expected[name] = expected.get(name, 0.0) + sign * weight

        apply(-1.0)
        slots[p], slots[p + 1] = slots[p + 1], slots[p]
        if head_slot == p:
            head_slot = p + 1
        elif head_slot == p + 1:
            head_slot = p
        apply(+1.0)
        k += 1
    return logz, expected


def log_likelihood(model: OrderingModel, config: LocalConfig) -> float:
    """Log probability (nats) of the configuration's observed order."""
    _, scores = enumerate_scores(model, config)
    return float(scores[0]) - _logsumexp(scores)


def mean_log_likelihood(model: OrderingModel, configs: Sequence[LocalConfig]) -> float:
    if not configs:
        raise ValueError("no configurations")
    return sum(log_likelihood(model, c) for c in configs) / len(configs)


@dataclass
class TrainHyper:
    """Full-batch gradient ascent with backtracking line search."""

    max_iterations: int = 200
    grad_tolerance: float = 1e-5
    max_train_size: int = 6  # configurations with more elements are dropped


class _CompiledCorpus:
    """Deduplicated training configurations with precomputed feature matrices."""

    def __init__(self, configs: Iterable[LocalConfig],
                 whitelist: AbstractSet[str] | None):
        self.name_index: dict[str, int] = {}
        self.groups: list[tuple[int, np.ndarray, np.ndarray, np.ndarray, int]] = []
        seen: dict[tuple, int] = {}
        order_counts: list[int] = []
        for config in configs:
            key = tuple(features.normalize_symbol(t, r) for t, r in config.elements)
            if key in seen:
                order_counts[seen[key]] += 1
                continue
            seen[key] = len(order_counts)
            order_counts.append(1)
            rows, cols, vals = [], [], []
            for k, (perm, _) in enumerate(sjt_enumerate(config.n)):
                for name, count in features.extract(config, perm, whitelist).items():
                    idx = self.name_index.setdefault(name, len(self.name_index))
                    rows.append(k)
                    cols.append(idx)
                    vals.append(float(count))
            self.groups.append((math.factorial(config.n),
                                np.asarray(rows, dtype=np.int32),
                                np.asarray(cols, dtype=np.int32),
                                np.asarray(vals, dtype=float), seen[key]))
        self.multiplicities = order_counts
        self.total = sum(order_counts)

    @property
    def n_features(self) -> int:
        return len(self.name_index)

    def objective_and_gradient(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        """Mean log-likelihood per configuration and its gradient.

        The per-configuration mean has the same maximizer as the plain sum
        but keeps the line search well conditioned on large corpora.
        """
        total = 0.0
        grad = np.zeros(len(self.name_index))
        for n_perms, rows, cols, vals, group_id in self.groups:
            mult = self.multiplicities[group_id] / self.total
            s = np.bincount(rows, weights=vals * theta[cols], minlength=n_perms)
            m = s.max()
            logz = m + math.log(np.exp(s - m).sum())
            p = np.exp(s - logz)
            total += mult * (s[0] - logz)
            obs = rows == 0
            grad += np.bincount(cols[obs], weights=mult * vals[obs],
                                minlength=len(grad))
            grad -= np.bincount(cols, weights=mult * p[rows] * vals,
                                minlength=len(grad))
        return total, grad


def train(configs: Sequence[LocalConfig],
          whitelist: AbstractSet[str] | None = None,
          hyper: TrainHyper | None = None,
          language: str = "",
          pos_class: str = "N") -> OrderingModel:
    """Maximum-likelihood weights for the observed orders of `configs`.

    Each configuration's element order is its observed ordering.
    Configurations larger than `hyper.max_train_size` are dropped.  When
    `whitelist` is None it is derived from the observed orders with
    `build_h_whitelist`.  The objective is concave; gradient ascent with
    backtracking runs until the gradient infinity norm falls below tolerance
    or the iteration cap is hit (recorded in `training_meta`).
    """
    hyper = hyper or TrainHyper()
    usable = [c for c in configs if c.n <= hyper.max_train_size]
    dropped = len(configs) - len(usable)
    if not usable:
        raise ValueError("no usable training configurations")
    if whitelist is None:
        whitelist = features.build_h_whitelist(usable)

    corpus = _CompiledCorpus(usable, whitelist)
    theta = np.zeros(corpus.n_features)
    value, grad = corpus.objective_and_gradient(theta)
    history = [value]
    step = 1.0
    iterations = 0
    converged = bool(np.max(np.abs(grad), initial=0.0) <= hyper.grad_tolerance)
    while not converged and iterations < hyper.max_iterations:
        iterations += 1
        gg = float(grad @ grad)
        while True:
            candidate = theta + step * grad
            new_value, new_grad = corpus.objective_and_gradient(candidate)
            if new_value >= value + 1e-4 * step * gg or step < 1e-12:
                break
            step /= 2.0
        if new_value <= value and step < 1e-12:
            break  # no achievable ascent direction at float precision
        theta, value, grad = candidate, new_value, new_grad
        history.append(value)
        step *= 2.0
        converged = bool(np.max(np.abs(grad)) <= hyper.grad_tolerance)

    names = sorted(corpus.name_index, key=corpus.name_index.get)
    weights = {name: float(theta[corpus.name_index[name]])
               for name in names if theta[corpus.name_index[name]] != 0.0}
    meta = TrainingMeta(iterations, float(value),
                        float(np.max(np.abs(grad), initial=0.0)), converged,
                        dropped_configs=dropped, objective_history=history)
    return OrderingModel(language, pos_class, weights, frozenset(whitelist), meta)


def interpolate(superstrate: OrderingModel, substrate: OrderingModel,
                lam: float = 0.05) -> OrderingModel:
    """Per-feature blend (1-lam)*superstrate + lam*substrate over the sparse union.

    The H whitelists are unioned.  lam=0 reproduces the superstrate weights,
    lam=1 the substrate weights.
    """
    if superstrate.pos_class != substrate.pos_class:
        raise ValueError(
            f"POS class mismatch: {superstrate.pos_class!r} vs {substrate.pos_class!r}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"interpolation weight must be in [0, 1], got {lam}")
    blended: dict[str, float] = {}
    for name, w in superstrate.weights.items():
        blended[name] = (1.0 - lam) * w
    for name, w in substrate.weights.items():
        blended[name] = blended.get(name, 0.0) + lam * w
    blended = {name: w for name, w in blended.items() if w != 0.0}
    language = f"{substrate.language}~{superstrate.language}@{superstrate.pos_class}"
    return OrderingModel(language, superstrate.pos_class, blended,
                         superstrate.h_whitelist | substrate.h_whitelist)


def freeness(model_n: OrderingModel, model_v: OrderingModel,
             trees: Sequence) -> float:
    """Cross-entropy of the models on observed orders relative to uniform.

    Averages -log2 p(observed order) over every N and V head in the trees and
    divides by the matching average of log2 n!.  Heads with no dependents
    contribute zero to both sums.  Near 0 means rigid order, 1 means the
    models do no better than uniform.
    """
    numerator = 0.0
    denominator = 0.0
    nodes = 0
    for tree in trees:
        for pos_class, model in (("N", model_n), ("V", model_v)):
            for config in local_configs(tree, pos_class):
                nodes += 1
                if config.n == 1:
                    continue
                _, scores = enumerate_scores(model, config)
                logz = _logsumexp(scores)
                numerator += (logz - float(scores[0])) / LN2
                denominator += math.log(math.factorial(config.n)) / LN2
    if nodes == 0 or denominator == 0.0:
        raise ValueError("freeness undefined: no head with two or more elements")
    return numerator / denominator


def model_to_text(model: OrderingModel) -> str:
    """Line-oriented model file: header, then feature weights in name order.

    Whitelisted H features are written even at weight zero so the whitelist
    survives a round trip.  Weights are printed with full precision.
    """
    entries = {name: w for name, w in model.weights.items() if w != 0.0}
    for name in model.h_whitelist:
        entries.setdefault(name, model.weights.get(name, 0.0))
    lines = [f"#lang {model.language}",
             f"#pos {model.pos_class}",
             f"#version {MODEL_FORMAT_VERSION}"]
    for name in sorted(entries):
        lines.append(f"{name}\t{entries[name]!r}")
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> OrderingModel:
    language = ""
    pos_class = ""
    weights: dict[str, float] = {}
    whitelist: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#lang "):
            language = line[len("#lang "):].strip()
        elif line.startswith("#pos "):
            pos_class = line[len("#pos "):].strip()
        elif line.startswith("#version "):
            version = line[len("#version "):].strip()
            if version != str(MODEL_FORMAT_VERSION):
                raise ValueError(f"unsupported model format version {version!r}")
        elif line.startswith("#"):
            raise ValueError(f"line {lineno}: unknown header {line!r}")
        else:
            name, sep, value = line.partition("\t")
            if not sep:
                raise ValueError(f"line {lineno}: expected <name>\\t<weight>")
            weights[name] = float(value)
            if name.startswith("H."):
                whitelist.add(name)
    if not pos_class:
        raise ValueError("model file lacks a #pos header")
    return OrderingModel(language, pos_class, weights, frozenset(whitelist))


def save_model(model: OrderingModel, path: str | Path) -> None:
    Path(path).write_text(model_to_text(model), encoding="utf-8")


def load_model(path: str | Path) -> OrderingModel:
    return model_from_text(Path(path).read_text(encoding="utf-8"))
