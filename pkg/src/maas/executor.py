"""Architecture execution against synthetic and live environments.

The synthetic environment is a seeded stand-in for LLM execution: each
operator carries a success profile (base rate, difficulty slope, a bonus
when a predecessor already produced the right answer) and a fixed unit
cost. It makes end-to-end training behavior testable on a desk. The live
environment calls any OpenAI-compatible chat-completions endpoint and
accounts cost in tokens.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BackendUnavailable,
    DataError,
    EmptyArchitecture,
    MalformedResponse,
)
from .sampler import SOURCE, SINK


@dataclass(frozen=True)
class QueryRecord:
    id: str
    query: str
    answer: str
    domain: str = ""
    difficulty: float = 0.0

    def validate(self):
        if not 0.0 <= self.difficulty <= 1.0:
            raise DataError(
                f"difficulty {self.difficulty} outside [0, 1] for {self.id!r}"
            )


@dataclass
class ExecutionTrace:
    architecture: object
    node_outputs: dict
    final_answer: str
    utility: float
    cost: float
    llm_calls: int
    query_id: str = ""


@dataclass(frozen=True)
class SyntheticOperatorProfile:
    operator_id: str
    base_success: float
    difficulty_slope: float
    unit_cost: float
    combine_bonus: float = 0.0

    def validate(self):
        if not 0.0 <= self.base_success <= 1.0:
            raise DataError(f"base_success outside [0, 1] for {self.operator_id!r}")
        if self.unit_cost <= 0.0:
            raise DataError(f"unit_cost must be positive for {self.operator_id!r}")
        if not 0.0 <= self.combine_bonus <= 1.0:
            raise DataError(f"combine_bonus outside [0, 1] for {self.operator_id!r}")

    @classmethod
    def from_dict(cls, d):
        prof = cls(
            operator_id=d["operator_id"],
            base_success=float(d["base_success"]),
            difficulty_slope=float(d["difficulty_slope"]),
            unit_cost=float(d["unit_cost"]),
            combine_bonus=float(d.get("combine_bonus", 0.0)),
        )
        prof.validate()
        return prof


@dataclass(frozen=True)
class PromptSuccessOverride:
    """Replace an operator's base success rate when its current prompt
    contains a marker substring. Lets prompt patches change synthetic
    behavior, which is what the mutator ablation exercises."""

    operator_id: str
    substring: str
    base_success: float


class SyntheticEnv:
    def __init__(self, profiles, overrides=(), checker="exact_match"):
        self.profiles = {p.operator_id: p for p in profiles}
        self.overrides = list(overrides)
        self.checker = checker

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        if isinstance(data, list):  # bare profile array
            data = {"profiles": data}
        profiles = [SyntheticOperatorProfile.from_dict(d) for d in data["profiles"]]
        overrides = [
            PromptSuccessOverride(
                operator_id=d["operator_id"],
                substring=d["substring"],
                base_success=float(d["base_success"]),
            )
            for d in data.get("prompt_success_overrides", ())
        ]
        return cls(profiles, overrides, data.get("checker", "exact_match"))

    def profile_for(self, spec) -> SyntheticOperatorProfile:
        if spec.id in self.profiles:
            return self.profiles[spec.id]
        # split clones ("x-b") inherit the parent profile
        base = spec.id.rsplit("-", 1)[0]
        if base in self.profiles:
            return self.profiles[base]
        raise DataError(f"no synthetic profile for operator {spec.id!r}")

    def _effective_base(self, spec, profile):
        for ov in self.overrides:
            if ov.operator_id == profile.operator_id and ov.substring in spec.prompt:
                return ov.base_success
        return profile.base_success

    def run_node(self, spec, query: QueryRecord, predecessor_outputs, rng):
        profile = self.profile_for(spec)
        base = self._effective_base(spec, profile)
        bonus = profile.combine_bonus if any(
            out == query.answer for out in predecessor_outputs
        ) else 0.0
        p = base - profile.difficulty_slope * query.difficulty + bonus
        p = min(max(p, 0.0), 1.0)
        if rng.random() < p:
            output = query.answer
        else:
            output = "WRONG:" + spec.id
        return output, profile.unit_cost, spec.agent_count

    def score(self, final_answer: str, query: QueryRecord) -> float:
        return evaluate_answer(final_answer, query.answer, self.checker)


class LiveEnv:
    """Executes operators through an OpenAI-compatible chat endpoint."""

    def __init__(self, base_url=None, api_key=None, checker="exact_match",
                 transport=None, sleep=time.sleep, max_attempts=3, backoff_base=1.0):
        self.base_url = (base_url or os.environ.get("MAAS_BASE_URL", "")).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("MAAS_API_KEY", "")
        self.checker = checker
        self._transport = transport if transport is not None else _requests_transport
        self._sleep = sleep
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base

    def run_node(self, spec, query: QueryRecord, predecessor_outputs, rng):
        prompt = render_prompt(spec, query.query, predecessor_outputs)
        content, prompt_tokens, completion_tokens = live_call(
            spec,
            prompt,
            base_url=self.base_url,
            api_key=self.api_key,
            transport=self._transport,
            sleep=self._sleep,
            max_attempts=self.max_attempts,
            backoff_base=self.backoff_base,
        )
        return content.strip(), float(prompt_tokens + completion_tokens), spec.agent_count

    def score(self, final_answer: str, query: QueryRecord) -> float:
        return evaluate_answer(final_answer, query.answer, self.checker)


def render_prompt(spec, query_text, predecessor_outputs):
    prompt = spec.prompt.replace("{input}", query_text) if spec.prompt else query_text
    if spec.tools:
        prompt += "\n\nAvailable tools: " + ", ".join(spec.tools)
    if predecessor_outputs:
        prompt += "\n\nCandidate answers from earlier agents:\n" + "\n".join(
            f"- {out}" for out in predecessor_outputs
        )
    return prompt


def live_call(spec, rendered_prompt, base_url, api_key, transport=None,
              sleep=time.sleep, max_attempts=3, backoff_base=1.0):
    """POST a chat completion with retries; returns (content, prompt_tokens,
    completion_tokens)."""
    if transport is None:
        transport = _requests_transport
    url = base_url + "/v1/chat/completions"
    payload = {
        "model": spec.model_binding,
        "temperature": spec.temperature,
        "messages": [{"role": "user", "content": rendered_prompt}],
    }
    headers = {"Authorization": f"Bearer {api_key}"}
    last_error = None
    for attempt in range(max_attempts):
        try:
            status, body = transport(url, payload, headers)
            if status != 200:
                raise BackendUnavailable(f"chat endpoint returned {status}")
            return _parse_chat_response(body)
        except MalformedResponse:
            raise
        except Exception as exc:
            last_error = exc
            if attempt < max_attempts - 1:
                sleep(backoff_base * (2**attempt))
    raise BackendUnavailable(f"chat endpoint failed after {max_attempts} attempts: {last_error}")


def _parse_chat_response(body):
    try:
        content = body["choices"][0]["message"]["content"]
        usage = body.get("usage", {})
        return (
            content,
            int(usage.get("prompt_tokens", 0)),
            int(usage.get("completion_tokens", 0)),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"bad chat completion payload: {exc}") from exc


def _requests_transport(url, payload, headers):
    import requests

    resp = requests.post(url, json=payload, headers=headers, timeout=120)
    return resp.status_code, resp.json()


def evaluate_answer(final: str, oracle: str, checker: str = "exact_match") -> float:
    if checker == "exact_match":
        return 1.0 if final == oracle else 0.0
    if checker == "numeric":
        a = _parse_decimal(final)
        b = _parse_decimal(oracle)
        if a is None or b is None:
            return 0.0
        return 1.0 if abs(a - b) <= 1e-6 else 0.0
    raise DataError(f"unknown checker {checker!r}")


def _parse_decimal(text):
    try:
        return float(text.strip().lstrip("+"))
    except (ValueError, AttributeError):
        return None


def _majority_vote(outputs, registry, layer_ids):
    """Majority over exact strings; ties go to the output of the operator
    with the lowest registry index."""
    counts = {}
    for out in outputs:
        counts[out] = counts.get(out, 0) + 1
    best_count = max(counts.values())
    tied = {out for out, c in counts.items() if c == best_count}
    if len(tied) == 1:
        return next(iter(tied))
    for op_id in sorted(layer_ids, key=registry.index_of):
        out = outputs[layer_ids.index(op_id)]
        if out in tied:
            return out
    return outputs[0]


def execute(arch, query: QueryRecord, env, registry, rng) -> ExecutionTrace:
    """Topologically execute the architecture's DAG; each node sees the query
    plus all predecessor outputs, and the sink majority-votes the final
    layer."""
    if not arch.layers:
        raise EmptyArchitecture("architecture has no layers")
    predecessors = {}
    for src, dst in arch.edges:
        predecessors.setdefault(dst, []).append(src)

    node_outputs = {}
    total_cost = 0.0
    llm_calls = 0
    for number, layer_ids in enumerate(arch.layers, start=1):
        for op_id in layer_ids:
            node = arch.node_name(number, op_id)
            preds = [
                node_outputs[p] for p in predecessors.get(node, []) if p != SOURCE
            ]
            spec = registry.get(op_id)
            output, cost, calls = env.run_node(spec, query, preds, rng)
            node_outputs[node] = output
            total_cost += cost
            llm_calls += calls

    last_number = len(arch.layers)
    last_ids = arch.layers[-1]
    final_outputs = [node_outputs[arch.node_name(last_number, i)] for i in last_ids]
    final_answer = _majority_vote(final_outputs, registry, last_ids)
    utility = env.score(final_answer, query)
    return ExecutionTrace(
        architecture=arch,
        node_outputs=node_outputs,
        final_answer=final_answer,
        utility=utility,
        cost=total_cost,
        llm_calls=llm_calls,
        query_id=query.id,
    )
