"""Synthetic treebank generation.

A synthesized language keeps a substrate treebank's tokens, dominance
structure, and labels, but resamples the left-to-right order of noun and/or
verb dependents from models trained on superstrate languages.  Output
directories are named `<sub>`, `<sub>~<rN>@N`, `<sub>~<rV>@V`, or
`<sub>~<rN>@N~<rV>@V`, each holding `<dirname>-ud-{train,dev,test}.conllu`
plus a `manifest.tsv` of key/value lines.
"""

from __future__ import annotations

import hashlib
import random
import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .model import OrderingModel, enumerate_scores, interpolate, load_model
from .sjt import MAX_N
from .treebank import (DepTree, LocalConfig, Token, HEAD_RELATION,
                       NOUN_CLASS_TAGS, VERB_CLASS_TAGS, children_map,
                       generation_drop_reason, parse_conllu, serialize_conllu)

DEFAULT_SEED = 0
DEFAULT_LAMBDA = 0.05
SPLITS = ("train", "dev", "test")

_LANG_ID = re.compile(r"^[A-Za-z0-9_]+$")
_DEPS_ENTRY = re.compile(r"^(\d+):(.+)$")


class SpecError(ValueError):
    """Invalid language spec string or missing model for a spec."""


@dataclass(frozen=True)
class LanguageSpec:
    """What to synthesize: substrate, per-class superstrates, blend, seed."""

    substrate: str
    superstrate_n: str | None = None
    superstrate_v: str | None = None
    lam: float = DEFAULT_LAMBDA
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        for lang in (self.substrate, self.superstrate_n, self.superstrate_v):
            if lang is not None and not _LANG_ID.match(lang):
                raise SpecError(f"bad language id {lang!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise SpecError(f"interpolation weight must be in [0, 1], got {self.lam}")

    @property
    def dirname(self) -> str:
        name = self.substrate
        if self.superstrate_n is not None:
            name += f"~{self.superstrate_n}@N"
        if self.superstrate_v is not None:
            name += f"~{self.superstrate_v}@V"
        return name

    @classmethod
    def parse(cls, name: str, lam: float = DEFAULT_LAMBDA,
              seed: int = DEFAULT_SEED) -> "LanguageSpec":
        parts = name.split("~")
        substrate = parts[0]
        superstrates: dict[str, str] = {}
        for part in parts[1:]:
            lang, sep, pos_class = part.rpartition("@")
            if not sep or pos_class not in ("N", "V") or pos_class in superstrates:
                raise SpecError(f"bad spec fragment {part!r} in {name!r}")
            superstrates[pos_class] = lang
        spec = cls(substrate, superstrates.get("N"), superstrates.get("V"),
                   lam, seed)
        if spec.dirname != name:
            raise SpecError(f"spec {name!r} is not in canonical form "
                            f"(expected {spec.dirname!r})")
        return spec


class RngStream:
    """Deterministic, platform-independent random stream.

    The state is a Mersenne Twister seeded from the SHA-256 hash of the
    derivation key, so equal keys give equal draw sequences everywhere.
    """

    VERSION = "sha256-mt19937/1"

    def __init__(self, *key_parts):
        self.key = "\x1f".join(str(p) for p in key_parts)
        digest = hashlib.sha256(self.key.encode("utf-8")).digest()
        self._rng = random.Random(int.from_bytes(digest[:16], "big"))

    @classmethod
    def for_sentence(cls, seed: int, dirname: str, split: str,
                     ordinal: int) -> "RngStream":
        """Stream for one sentence: (seed, spec dirname, split, 0-based ordinal)."""
        return cls(seed, dirname, split, ordinal)

    def uniform(self) -> float:
        """One draw from [0, 1)."""
        return self._rng.random()


def sample_ordering(model: OrderingModel, config: LocalConfig,
                    rng: RngStream) -> tuple[int, ...]:
    """Exact sample from the model's distribution over the n! orderings.

    Walks the orderings in SJT order accumulating normalized probabilities
    and returns the first whose cumulative probability reaches a single
    uniform draw.  A one-element configuration returns the identity without
    consuming a draw.
    """
    n = config.n
    if n > MAX_N:
        raise ValueError(f"configuration size {n} exceeds {MAX_N}")
    if n == 1:
        return (1,)
    orders, scores = enumerate_scores(model, config)
    weights = np.exp(scores - scores.max())
    probs = weights / weights.sum()
    u = rng.uniform()
    cumulative = 0.0
    for order, p in zip(orders, probs):
        cumulative += p
        if cumulative >= u:
            return order
    return orders[-1]


def _class_of(upos: str) -> str | None:
    if upos in NOUN_CLASS_TAGS:
        return "N"
    if upos in VERB_CLASS_TAGS:
        return "V"
    return None


def _append_misc(misc: str, key: str, value) -> str:
    entry = f"{key}={value}"
    return entry if misc == "_" else f"{misc}|{entry}"


def _remap_deps(deps: str, index_map: dict[int, int]) -> str:
    # Whole field is cleared unless every entry is plain <digits>:<relation>
    # with a remappable head.
    if deps == "_":
        return "_"
    out = []
    for entry in deps.split("|"):
        m = _DEPS_ENTRY.match(entry)
        if not m or int(m.group(1)) not in index_map:
            return "_"
        out.append(f"{index_map[int(m.group(1))]}:{m.group(2)}")
    return "|".join(out)


def permute_tree(tree: DepTree, model_n: OrderingModel | None,
                 model_v: OrderingModel | None, rng: RngStream) -> DepTree:
    """Resample dependent order at every noun/verb head of a filtered tree.

    Nodes are visited depth-first from the root with children in their
    original surface order; that order fixes how random draws are consumed.
    Subtrees move as units, so the output is projective by construction.
    Indices are reassigned left to right, heads remapped, and every token's
    misc field gains `OrigIdx=<original index>`.  A None model leaves that
    class in its original order.  Multiword range lines do not survive
    reordering and are dropped.
    """
    reason = generation_drop_reason(tree)
    if reason is not None:
        raise ValueError(f"tree {tree.source_id!r} not eligible for generation "
                         f"({reason})")
    dependents = children_map(tree)
    plans: dict[int, tuple[list[Token], tuple[int, ...]]] = {}

    def plan(head: Token) -> None:
        deps = dependents.get(head.index, [])
        units = sorted(deps + [head], key=lambda t: t.index)
        model = {"N": model_n, "V": model_v, None: None}[_class_of(head.upos)]
        if model is not None and len(units) > 1:
            elements = tuple(
                (u.upos, HEAD_RELATION if u.index == head.index else u.deprel)
                for u in units)
            config = LocalConfig(head.upos, head.deprel, elements,
                                 (tree.source_id, head.index))
            order = sample_ordering(model, config, rng)
        else:
            order = tuple(range(1, len(units) + 1))
        plans[head.index] = (units, order)
        for dep in deps:
            plan(dep)

    root = tree.root
    plan(root)

    linearized: list[Token] = []

    def emit(head: Token) -> None:
        units, order = plans[head.index]
        for pos in order:
            unit = units[pos - 1]
            if unit.index == head.index:
                linearized.append(unit)
            else:
                emit(unit)

    emit(root)

    index_map = {0: 0}
    for new_index, tok in enumerate(linearized, start=1):
        index_map[tok.index] = new_index
    tokens = tuple(
        replace(tok,
                index=index_map[tok.index],
                head=index_map[tok.head],
                deps=_remap_deps(tok.deps, index_map),
                misc=_append_misc(tok.misc, "OrigIdx", tok.index))
        for tok in linearized)
    return DepTree(tokens, tree.comments, (), tree.source_id)


def load_language_models(model_dir: str | Path, language: str
                         ) -> tuple[OrderingModel, OrderingModel]:
    """Load the N and V models of one language from `<lang>-<class>.model` files."""
    model_dir = Path(model_dir)
    models = []
    for pos_class in ("N", "V"):
        path = model_dir / f"{language}-{pos_class}.model"
        if not path.exists():
            raise SpecError(f"missing model file {path}")
        model = load_model(path)
        if model.pos_class != pos_class:
            raise SpecError(f"{path} declares POS class {model.pos_class!r}")
        models.append(model)
    return models[0], models[1]


def _blended_model(spec: LanguageSpec, pos_class: str, superstrate: str | None,
                   model_dir: Path) -> OrderingModel | None:
    if superstrate is None:
        return None
    sup = load_language_models(model_dir, superstrate)[0 if pos_class == "N" else 1]
    sub = load_language_models(model_dir, spec.substrate)[0 if pos_class == "N" else 1]
    return interpolate(sup, sub, spec.lam)


def synthesize_language(spec: LanguageSpec, substrate_dir: str | Path,
                        model_dir: str | Path, out_root: str | Path,
                        mode: str = "lenient",
                        tool_version: str | None = None) -> Path:
    """Produce the three splits of one synthetic language plus its manifest.

    Reads `<substrate>-ud-{train,dev,test}.conllu` from `substrate_dir`,
    drops non-projective and high-fanout trees, permutes the rest with the
    interpolated models, and writes byte-deterministic output under
    `out_root/<spec dirname>`.
    """
    from . import __version__
    substrate_dir = Path(substrate_dir)
    model_dir = Path(model_dir)
    out_dir = Path(out_root) / spec.dirname
    out_dir.mkdir(parents=True, exist_ok=True)

    model_n = _blended_model(spec, "N", spec.superstrate_n, model_dir)
    model_v = _blended_model(spec, "V", spec.superstrate_v, model_dir)

    manifest: list[tuple[str, str]] = [
        ("spec", spec.dirname),
        ("substrate", spec.substrate),
        ("superstrate_n", spec.superstrate_n or "-"),
        ("superstrate_v", spec.superstrate_v or "-"),
        ("lambda", repr(spec.lam)),
        ("seed", str(spec.seed)),
        ("rng", RngStream.VERSION),
        ("rng_derivation",
         "per-sentence stream keyed on seed, spec dirname, split, 0-based ordinal"),
        ("tool_version", tool_version or __version__),
    ]
    for split in SPLITS:
        in_path = substrate_dir / f"{spec.substrate}-ud-{split}.conllu"
        if not in_path.exists():
            raise FileNotFoundError(f"missing split file {in_path}")
        trees = parse_conllu(in_path.read_text(encoding="utf-8"), mode)
        out_trees: list[DepTree] = []
        dropped: dict[str, list[str]] = {"nonprojective": [], "fanout": []}
        mwt_dropped = 0
        deps_cleared = 0
        for ordinal, tree in enumerate(trees):
            reason = generation_drop_reason(tree)
            if reason is not None:
                dropped[reason].append(tree.source_id)
                continue
            rng = RngStream.for_sentence(spec.seed, spec.dirname, split, ordinal)
            permuted = permute_tree(tree, model_n, model_v, rng)
            mwt_dropped += len(tree.ranges)
            # remapping never invents a deps value, so cleared = lost count
            deps_cleared += (sum(1 for t in tree.tokens if t.deps != "_")
                             - sum(1 for t in permuted.tokens if t.deps != "_"))
            out_trees.append(permuted)
        out_path = out_dir / f"{spec.dirname}-ud-{split}.conllu"
        out_path.write_text(serialize_conllu(out_trees), encoding="utf-8")
        manifest.extend([
            (f"{split}_input_sentences", str(len(trees))),
            (f"{split}_kept", str(len(out_trees))),
            (f"{split}_dropped_nonprojective", str(len(dropped["nonprojective"]))),
            (f"{split}_dropped_fanout", str(len(dropped["fanout"]))),
            (f"{split}_dropped_ids",
             ",".join(dropped["nonprojective"] + dropped["fanout"]) or "-"),
            (f"{split}_multiword_lines_dropped", str(mwt_dropped)),
            (f"{split}_deps_fields_cleared", str(deps_cleared)),
        ])
    manifest_path = out_dir / "manifest.tsv"
    manifest_path.write_text(
        "".join(f"{k}\t{v}\n" for k, v in manifest), encoding="utf-8")
    return out_dir


def cross_product_specs(languages: list[str]) -> list[str]:
    """Every spec name over the given substrates with each superstrate slot
    ranging over the languages plus "leave unpermuted"."""
    choices: list[str | None] = [None] + list(languages)
    names = []
    for substrate in languages:
        for sup_n in choices:
            for sup_v in choices:
                names.append(LanguageSpec(substrate, sup_n, sup_v).dirname)
    return names
