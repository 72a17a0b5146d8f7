"""Joint supernet optimization.

Each training step samples K architectures for one query, executes them,
weights each sample by normalized utility minus a cost-penalty term, and
takes one likelihood-ratio ascent step on the controller parameters. On a
fixed cadence the operator set itself is revised through textual patches:
either a deterministic mock mutator (used by all automated tests) or an
LLM-backed mutator that proposes prompt/temperature/structure edits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import controller as ctl
from . import sampler
from .embedding import HashingEmbedder, layer_feature
from .errors import (
    MutatorUnavailable,
    NonpositiveCost,
    ShapeMismatch,
    StaleArchitecture,
    UnparseableMutation,
)
from .executor import execute, live_call
from .registry import KIND_EARLY_EXIT, OperatorPatch

MOCK_PATCH_SENTENCE = "\nDouble-check each intermediate step before answering."
TEMPERATURE_STEP = 0.1
TEMPERATURE_TARGET = 0.5


@dataclass
class BatchSample:
    traces: list
    log_prob_grads: list  # per trace: list of LayerGrad, one per sampled layer


@dataclass
class TrainConfig:
    num_layers: int = 4
    thres: float = 0.3
    cost_lambda: float = 5e-3
    samples_k: int = 4
    lr: float = 0.05
    iterations: int = 1
    seed: int = 0
    patch_every: int | None = 10
    embed_dim: int = 64
    hidden_dim: int = 64
    mutator: str = "mock"

    def validate(self):
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if not 0.0 < self.thres < 1.0:
            raise ValueError("thres must be in (0, 1)")
        if self.cost_lambda < 0.0:
            raise ValueError("cost_lambda must be >= 0")
        if self.samples_k < 2:
            raise ValueError("samples_k must be >= 2")
        if self.lr <= 0.0:
            raise ValueError("lr must be > 0")

    def to_dict(self):
        return {
            "num_layers": self.num_layers,
            "thres": self.thres,
            "cost_lambda": self.cost_lambda,
            "samples_k": self.samples_k,
            "lr": self.lr,
            "iterations": self.iterations,
            "seed": self.seed,
            "patch_every": self.patch_every,
            "embed_dim": self.embed_dim,
            "hidden_dim": self.hidden_dim,
            "mutator": self.mutator,
        }

    @classmethod
    def from_dict(cls, d):
        cfg = cls(**d)
        cfg.validate()
        return cfg


def importance_weights(utilities, costs, cost_lambda):
    """m_k = u_k / sum(u) - lambda * c_k / sum(c); all-failure batches use a
    uniform 1/K utility term so cost pressure survives."""
    utilities = [float(u) for u in utilities]
    costs = [float(c) for c in costs]
    if any(c <= 0.0 for c in costs):
        raise NonpositiveCost("all costs must be positive")
    k = len(utilities)
    u_sum = sum(utilities)
    c_sum = sum(costs)
    if u_sum > 0.0:
        u_terms = [u / u_sum for u in utilities]
    else:
        u_terms = [1.0 / k] * k
    return [u_terms[i] - cost_lambda * costs[i] / c_sum for i in range(k)]


def trace_gradients(state, registry, query_text, arch, embedder=None):
    """Per-layer log-probability gradients for one sampled architecture."""
    if arch.params_version != state.version:
        raise StaleArchitecture("parameters changed since sampling")
    if embedder is None:
        embedder = HashingEmbedder(state.embed_dim)
    query_vec = embedder.embed(query_text)
    executed = arch.layers if arch.exit_layer != 1 else []
    grads = []
    for ell, selected in enumerate(arch.selections, start=1):
        feature = layer_feature(
            query_vec, sampler._layer_sums(registry, embedder, executed[: ell - 1])
        )
        grads.append(ctl.grad_log_prob(state, ell, feature, selected))
    return grads


def update_distribution(state: ctl.SupernetState, batch: BatchSample, weights, lr):
    """Ascent on the weighted selection log-likelihood: parameters move by
    (lr / K) * sum_k m_k * grad log p(arch_k)."""
    if len(weights) != len(batch.traces) or len(weights) != len(batch.log_prob_grads):
        raise ShapeMismatch("weights / traces / gradients length mismatch")
    k = len(weights)
    deltas = {}
    for m_k, grads in zip(weights, batch.log_prob_grads):
        for g in grads:
            acc = deltas.get(g.layer_index)
            if acc is None:
                deltas[g.layer_index] = g.scaled(m_k)
            else:
                acc.W1 += m_k * g.W1
                acc.b1 += m_k * g.b1
                acc.W2 += m_k * g.W2
                acc.b2 += m_k * g.b2
    scale = lr / k
    for layer_index, g in deltas.items():
        ctrl = state.layer(layer_index)
        if ctrl.W1.shape != g.W1.shape or ctrl.W2.shape != g.W2.shape:
            raise ShapeMismatch(f"gradient shape mismatch at layer {layer_index}")
        ctrl.W1 += scale * g.W1
        ctrl.b1 += scale * g.b1
        ctrl.W2 += scale * g.W2
        ctrl.b2 += scale * g.b2
    state.bump_version()
    return state


def _success_rates(registry, traces):
    stats = {}
    for trace in traces:
        seen = {op_id for layer in trace.architecture.layers for op_id in layer}
        for op_id in seen:
            if op_id not in registry:
                continue  # merged away since this trace was recorded
            total, hits = stats.get(op_id, (0, 0))
            stats[op_id] = (total + 1, hits + (1 if trace.utility > 0 else 0))
    return {
        op_id: hits / total for op_id, (total, hits) in stats.items() if total > 0
    }


def mock_mutator(registry, traces):
    """Deterministic patch rule: take the executed operator with the lowest
    empirical success rate (ties to the lowest registry index), append a
    fixed double-check sentence to its prompt, and move its temperature one
    0.1 step toward 0.5. No-op patches are suppressed."""
    rates = _success_rates(registry, traces)
    if not rates:
        return []
    target_id = min(rates, key=lambda op_id: (rates[op_id], registry.index_of(op_id)))
    spec = registry.get(target_id)
    if spec.kind == KIND_EARLY_EXIT:
        return []
    new_prompt = None
    if MOCK_PATCH_SENTENCE not in spec.prompt:
        new_prompt = spec.prompt + MOCK_PATCH_SENTENCE
    new_temperature = None
    if abs(spec.temperature - TEMPERATURE_TARGET) > 1e-9:
        if spec.temperature > TEMPERATURE_TARGET:
            stepped = max(spec.temperature - TEMPERATURE_STEP, TEMPERATURE_TARGET)
        else:
            stepped = min(spec.temperature + TEMPERATURE_STEP, TEMPERATURE_TARGET)
        new_temperature = round(stepped, 10)
    if new_prompt is None and new_temperature is None:
        return []
    return [
        OperatorPatch(
            target_id=target_id,
            new_prompt=new_prompt,
            new_temperature=new_temperature,
            rationale=(
                f"lowest empirical success rate ({rates[target_id]:.3f}) over"
                f" {len(traces)} recent traces"
            ),
        )
    ]


MUTATOR_PROMPT = """\
# Overview
You are an expert machine learning researcher specializing in designing \
agentic systems. Your objective is to improve the building blocks (prompts, \
temperatures, and operator structure) of a layered multi-agent system so it \
performs better on the observed failures.

# Current operator archive
{archive}

# Recent failure summary
{failures}

# Output instruction
Reply with a single JSON object with keys "thought" (your analysis), \
"target_id" (the operator to revise), and any of "new_prompt", \
"new_temperature", "structure_action" (one of "none", "split", "merge", \
"rewire"), "merge_with_id". Propose prompt, temperature, or structure \
changes only; do not propose executable code.
"""


class LLMMutator:
    """Textual-gradient mutator backed by a chat-completions endpoint."""

    def __init__(self, model="default", base_url=None, api_key=None, transport=None):
        import os

        self.model = model
        self.base_url = (base_url or os.environ.get("MAAS_BASE_URL", "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("MAAS_API_KEY", "")
        self._transport = transport

    def __call__(self, registry, traces):
        if not self.base_url:
            raise MutatorUnavailable("no base URL configured for the LLM mutator")
        rates = _success_rates(registry, traces)
        failures = [
            {"operator_id": op_id, "success_rate": round(rate, 4)}
            for op_id, rate in sorted(rates.items(), key=lambda kv: kv[1])
        ]
        prompt = MUTATOR_PROMPT.format(
            archive=json.dumps(
                [s.to_dict() for s in registry.specs()], indent=2
            ),
            failures=json.dumps(failures, indent=2),
        )

        class _PromptSpec:
            id = "mutator"
            model_binding = self.model
            temperature = 1.0
            prompt = "{input}"
            tools = ()

        content, _, _ = live_call(
            _PromptSpec,
            prompt,
            base_url=self.base_url,
            api_key=self.api_key,
            transport=self._transport,
        )
        return [parse_mutation(content)]


def parse_mutation(reply_text) -> OperatorPatch:
    """Validate an LLM mutator reply into a patch; code fields are ignored."""
    try:
        data = json.loads(reply_text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise UnparseableMutation(f"reply is not JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UnparseableMutation("reply is not a JSON object")
    target = data.get("target_id") or data.get("target")
    if not target:
        raise UnparseableMutation("reply lacks target_id")
    temperature = data.get("new_temperature", data.get("temperature"))
    patch = OperatorPatch(
        target_id=str(target),
        new_prompt=data.get("new_prompt", data.get("prompt")),
        new_temperature=float(temperature) if temperature is not None else None,
        structure_action=data.get("structure_action", "none") or "none",
        merge_with_id=data.get("merge_with_id"),
        rationale=str(data.get("thought", data.get("rationale", ""))),
    )
    try:
        patch.validate()
    except Exception as exc:
        raise UnparseableMutation(str(exc)) from exc
    return patch


def textual_gradient(registry, traces, mutator="mock"):
    """Produce operator patches from a window of execution traces."""
    if not traces:
        return []
    if mutator == "mock":
        return mock_mutator(registry, traces)
    if callable(mutator):
        return mutator(registry, traces)
    raise MutatorUnavailable(f"unknown mutator {mutator!r}")


class Trainer:
    """Stateful training loop over (controller parameters, operator registry)."""

    def __init__(self, state, registry, env, config: TrainConfig, rng, embedder=None,
                 mutator=None):
        config.validate()
        self.state = state
        self.registry = registry
        self.env = env
        self.config = config
        self.rng = rng
        self.embedder = embedder if embedder is not None else HashingEmbedder(config.embed_dim)
        self.mutator = mutator if mutator is not None else config.mutator
        self.step_count = 0
        self.window = []

    def step(self, query) -> dict:
        cfg = self.config
        traces = []
        grads = []
        for _ in range(cfg.samples_k):
            arch = sampler.sample_architecture(
                self.state,
                self.registry,
                query.query,
                cfg.thres,
                sampler.MODE_TRAIN,
                self.rng,
                self.embedder,
            )
            trace = execute(arch, query, self.env, self.registry, self.rng)
            grads.append(
                trace_gradients(
                    self.state, self.registry, query.query, arch, self.embedder
                )
            )
            traces.append(trace)

        weights = importance_weights(
            [t.utility for t in traces], [t.cost for t in traces], cfg.cost_lambda
        )
        update_distribution(
            self.state, BatchSample(traces, grads), weights, cfg.lr
        )
        self.window.extend(traces)
        self.step_count += 1

        patches_applied = 0
        if (
            self.mutator != "none"
            and cfg.patch_every is not None
            and self.step_count % cfg.patch_every == 0
        ):
            patches_applied = self._apply_patches()
            self.window.clear()

        histogram = {}
        for t in traces:
            key = str(t.architecture.exit_layer) if t.architecture.exit_layer else "none"
            histogram[key] = histogram.get(key, 0) + 1
        return {
            "step": self.step_count,
            "query_id": query.id,
            "mean_utility": sum(t.utility for t in traces) / len(traces),
            "mean_cost": sum(t.cost for t in traces) / len(traces),
            "exit_histogram": histogram,
            "patches_applied": patches_applied,
        }

    def _apply_patches(self) -> int:
        applied = 0
        for patch in textual_gradient(self.registry, self.window, self.mutator):
            try:
                change = self.registry.apply_patch(patch)
            except UnparseableMutation:
                continue
            if change is not None:
                if change.action == "split":
                    self.state.split_output(change.parent_index, self.rng)
                elif change.action == "merge":
                    self.state.merge_output(change.removed_index)
            applied += 1
        return applied
