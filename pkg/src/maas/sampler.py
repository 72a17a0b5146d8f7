"""Per-query architecture sampling and DAG construction.

Layer by layer, the controller scores every operator against the query and
the previously selected layers, then selects a subset (stochastic in train
mode, deterministic in eval mode). Selecting the early-exit operator stops
sampling at that layer: co-selected operators are discarded and, when the
exit fires at the very first layer, the architecture degenerates to a single
direct-io call so the query still gets answered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from .embedding import layer_feature
from .errors import StaleArchitecture

SOURCE = "__source__"
SINK = "__sink__"

MODE_TRAIN = "train"
MODE_EVAL = "eval"


@dataclass
class Architecture:
    layers: list  # list of lists of operator ids, in drawn order
    selections: list  # raw per-layer drawn index sequences (incl. exit draws)
    exit_layer: int | None
    edges: list  # (from node, to node) pairs; nodes are "L{layer}:{op_id}"
    log_prob: float
    params_version: int
    per_layer_scores: list = field(default_factory=list)

    def node_name(self, layer_number: int, op_id: str) -> str:
        return f"L{layer_number}:{op_id}"

    def to_dict(self):
        return {
            "layers": self.layers,
            "selections": self.selections,
            "exit_layer": self.exit_layer,
            "edges": [list(e) for e in self.edges],
            "log_prob": self.log_prob,
            "params_version": self.params_version,
            "per_layer_scores": self.per_layer_scores,
        }


def _layer_sums(registry, embedder, layers):
    sums = []
    for ids in layers:
        total = np.zeros(embedder.dim, dtype=np.float64)
        for op_id in ids:
            total += embedder.embed(registry.get(op_id).profile_text)
        sums.append(total)
    return sums


def sample_architecture(
    state: ctl.SupernetState,
    registry,
    query: str,
    thres: float,
    mode: str,
    rng: np.random.Generator | None = None,
    embedder=None,
    record_scores: bool = False,
) -> Architecture:
    if mode not in (MODE_TRAIN, MODE_EVAL):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == MODE_TRAIN and rng is None:
        raise ValueError("train mode needs an rng")
    if embedder is None:
        from .embedding import HashingEmbedder

        embedder = HashingEmbedder(state.embed_dim)

    ids = registry.ids()
    exit_idx = registry.index_of(registry.early_exit_id)
    query_vec = embedder.embed(query)

    layers: list[list[str]] = []
    selections: list[list[int]] = []
    score_log: list[list[float]] = []
    exit_layer = None
    log_prob = 0.0

    for ell in range(1, state.num_layers + 1):
        feature = layer_feature(query_vec, _layer_sums(registry, embedder, layers))
        score_vec = ctl.score_layer(state, ell, feature)
        if record_scores:
            score_log.append(score_vec.scores.tolist())
        if mode == MODE_TRAIN:
            selected, lp = ctl.sample_selection(score_vec, thres, rng)
        else:
            selected = ctl.select_deterministic(score_vec, thres)
            lp = ctl.selection_log_prob(score_vec, selected)
        selections.append(list(selected))
        log_prob += lp
        if exit_idx in selected:
            exit_layer = ell
            if ell == 1:
                layers.append([registry.direct_io_id])
            break
        layers.append([ids[i] for i in selected])

    arch = Architecture(
        layers=layers,
        selections=selections,
        exit_layer=exit_layer,
        edges=[],
        log_prob=log_prob,
        params_version=state.version,
        per_layer_scores=score_log,
    )
    arch.edges = build_dag(arch, registry)
    return arch


def architecture_log_prob(
    state: ctl.SupernetState, registry, query: str, arch: Architecture, embedder=None
) -> float:
    """Recompute the architecture's selection log-probability from scratch."""
    if arch.params_version != state.version:
        raise StaleArchitecture(
            f"architecture sampled at version {arch.params_version},"
            f" parameters now at {state.version}"
        )
    if embedder is None:
        from .embedding import HashingEmbedder

        embedder = HashingEmbedder(state.embed_dim)
    query_vec = embedder.embed(query)
    executed = arch.layers if arch.exit_layer != 1 else []
    log_prob = 0.0
    for ell, selected in enumerate(arch.selections, start=1):
        feature = layer_feature(
            query_vec, _layer_sums(registry, embedder, executed[: ell - 1])
        )
        score_vec = ctl.score_layer(state, ell, feature)
        log_prob += ctl.selection_log_prob(score_vec, selected)
    return log_prob


def build_dag(arch: Architecture, registry) -> list:
    """Source into layer 1, complete bipartite between consecutive layers,
    final layer into the sink; rewire-flagged operators get an extra skip
    edge from the source."""
    edges = []
    if not arch.layers:
        return edges
    numbered = list(enumerate(arch.layers, start=1))
    for op_id in arch.layers[0]:
        edges.append((SOURCE, arch.node_name(1, op_id)))
    for (num_a, layer_a), (num_b, layer_b) in zip(numbered, numbered[1:]):
        for a in layer_a:
            for b in layer_b:
                edges.append((arch.node_name(num_a, a), arch.node_name(num_b, b)))
    last_num, last_layer = numbered[-1]
    for op_id in last_layer:
        edges.append((arch.node_name(last_num, op_id), SINK))
    if registry.rewire_ids:
        for num, layer in numbered[1:]:
            for op_id in layer:
                if op_id in registry.rewire_ids:
                    edges.append((SOURCE, arch.node_name(num, op_id)))
    return edges
