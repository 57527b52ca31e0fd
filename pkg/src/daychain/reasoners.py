"""Pluggable reasoner backends for the five-stage decision loop.

The heuristic backend is a deterministic rule table: it makes the whole
engine runnable and testable offline. The external backend talks to an
HTTP chat-completion endpoint with a two-step call per stage (exploratory
reasoning at the higher temperature, then a format-forcing extraction at
the lower one) and falls back to the heuristic rules when the endpoint
returns unparseable output.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

log = logging.getLogger(__name__)

STAGES = ("S1", "S2", "S3", "S4", "S5")

_STAGE_PROMPT_FILES = {
    "S1": "stage1.txt",
    "S2": "stage2.txt",
    "S3": "stage3.txt",
    "S4": "stage4.txt",
    "S5": "stage5.txt",
}

_STAGE_SCHEMAS = {
    "S1": '{"summary": "<one paragraph situation summary>"}',
    "S2": '{"constraints": ["<constraint>", ...], "time_budget_min": <number>, "radius_m": <number>}',
    "S3": '{"options": ["<candidate id>", ...]}',
    "S4": '{"scores": {"<candidate id>": <0..1>, ...}}',
    "S5": '{"choice": "<candidate id>"}',
}


class EndpointUnreachableError(RuntimeError):
    pass


class BudgetExceededError(RuntimeError):
    pass


@dataclass
class ReasonerConfig:
    backend: str = "heuristic"  # heuristic | external_llm
    reasoning_temperature: float = 0.7
    output_temperature: float = 0.1
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "DAYCHAIN_API_KEY"
    max_retries: int = 2
    token_budget: int = 200_000
    seed: int = 0
    trace: bool = False

    def validate(self) -> None:
        for t in (self.reasoning_temperature, self.output_temperature):
            if not 0.0 < t <= 1.0:
                raise ValueError(f"temperatures must lie in (0, 1], got {t}")


def load_prompt(name: str) -> str:
    return resources.files("daychain.prompts").joinpath(name).read_text(encoding="utf-8")


def stage_prompt(stage: str, persona_doc: dict, inputs: dict) -> str:
    template = load_prompt(_STAGE_PROMPT_FILES[stage])
    return template.format(
        persona=json.dumps(persona_doc, sort_keys=True, indent=1),
        inputs=json.dumps(inputs, sort_keys=True, indent=1, default=str),
    )


class HeuristicReasoner:
    """Deterministic rule-table backend."""

    backend_name = "heuristic"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def propose(self, stage: str, inputs: dict) -> dict:
        if stage == "S1":
            env = inputs.get("environment", {})
            hour = int(inputs.get("now_min", 0)) // 60 % 24
            summary = (
                f"{hour:02d}:00h, at {inputs.get('location_name', 'current location')}, "
                f"weather {env.get('weather', {}).get('condition', 'unknown')}, "
                f"crowd {env.get('density', 0):.2f}, "
                f"{len(inputs.get('remaining_blocks', []))} blocks remaining"
            )
            return {"summary": summary, "backend": self.backend_name}
        if stage == "S2":
            window = inputs["window"]
            budget = inputs["time_budget_min"]
            constraints = [
                f"activity window [{window[0]}, {window[1]}) minutes",
                f"travel budget {budget} min",
                f"search radius {inputs['radius_m']:.0f} m",
                "venue must be open for the whole visit",
            ]
            constraints.extend(inputs.get("extra_constraints", []))
            return {
                "constraints": constraints,
                "time_budget_min": budget,
                "radius_m": inputs["radius_m"],
                "backend": self.backend_name,
            }
        if stage == "S3":
            return {"options": [c["id"] for c in inputs["candidates"]], "backend": self.backend_name}
        if stage == "S4":
            weights = inputs["factor_weights"]
            scores = {}
            for cand in inputs["candidates"]:
                factors = cand["factors"]
                total_w = sum(weights.values()) or 1.0
                scores[cand["id"]] = sum(weights[f] * factors[f] for f in weights) / total_w
            return {"scores": scores, "backend": self.backend_name}
        if stage == "S5":
            scores = inputs["scores"]
            choice = max(sorted(scores), key=lambda cid: scores[cid])
            return {"choice": choice, "consequences": inputs.get("consequences", {}), "backend": self.backend_name}
        raise ValueError(f"unknown stage {stage!r}")


def _default_transport(url: str, body: dict, headers: dict, timeout: float) -> dict:
    import requests

    try:
        resp = requests.post(url, json=body, headers=headers, timeout=timeout)
        resp.raise_for_status()
        return resp.json()
    except requests.RequestException as exc:
        raise EndpointUnreachableError(str(exc)) from exc


def extract_json_block(text: str) -> Optional[dict]:
    """First parseable JSON object embedded in the text, if any."""
    for match in re.finditer(r"\{", text):
        depth = 0
        for end in range(match.start(), len(text)):
            if text[end] == "{":
                depth += 1
            elif text[end] == "}":
                depth -= 1
                if depth == 0:
                    try:
                        doc = json.loads(text[match.start() : end + 1])
                        if isinstance(doc, dict):
                            return doc
                    except json.JSONDecodeError:
                        break
                    break
    return None


def _valid_stage_output(stage: str, doc: dict) -> bool:
    if stage == "S1":
        return isinstance(doc.get("summary"), str)
    if stage == "S2":
        return isinstance(doc.get("constraints"), list)
    if stage == "S3":
        return isinstance(doc.get("options"), list)
    if stage == "S4":
        return isinstance(doc.get("scores"), dict) and all(
            isinstance(v, (int, float)) for v in doc["scores"].values()
        )
    if stage == "S5":
        return isinstance(doc.get("choice"), str)
    return False


class LlmReasoner:
    """External chat-completion backend with heuristic fallback per stage."""

    backend_name = "external_llm"

    def __init__(
        self,
        config: ReasonerConfig,
        transport: Optional[Callable] = None,
        fallback: Optional[HeuristicReasoner] = None,
        timeout: float = 30.0,
    ):
        config.validate()
        if not config.endpoint:
            raise ValueError("external reasoner needs an endpoint URL")
        self.config = config
        self.transport = transport or _default_transport
        self.fallback = fallback or HeuristicReasoner(config.seed)
        self.timeout = timeout
        self.tokens_used = 0
        self.trace: list = []

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _chat(self, messages: list, temperature: float) -> str:
        if self.tokens_used >= self.config.token_budget:
            raise BudgetExceededError(f"token budget {self.config.token_budget} exhausted")
        body = {"model": self.config.model, "messages": messages, "temperature": temperature}
        response = self.transport(self.config.endpoint, body, self._headers(), self.timeout)
        if self.config.trace:
            self.trace.append({"request": body, "response": response})
            log.debug("llm request %s -> %s", body, response)
        usage = response.get("usage", {})
        content = response["choices"][0]["message"]["content"]
        self.tokens_used += int(usage.get("total_tokens", max(1, len(content) // 4)))
        return content

    def propose(self, stage: str, inputs: dict) -> dict:
        persona_doc = inputs.get("persona", {})
        prompt = stage_prompt(stage, persona_doc, {k: v for k, v in inputs.items() if k != "persona"})
        extract_template = load_prompt("extract.txt").format(schema=_STAGE_SCHEMAS[stage])
        for _ in range(self.config.max_retries + 1):
            reasoning = self._chat(
                [{"role": "user", "content": prompt}], self.config.reasoning_temperature
            )
            extraction = self._chat(
                [
                    {"role": "user", "content": prompt},
                    {"role": "assistant", "content": reasoning},
                    {"role": "user", "content": extract_template},
                ],
                self.config.output_temperature,
            )
            parsed = extract_json_block(extraction)
            if parsed is not None and _valid_stage_output(stage, parsed):
                parsed["backend"] = self.backend_name
                parsed.setdefault("rationale", reasoning)
                return parsed
        out = self.fallback.propose(stage, inputs)
        out["backend"] = "heuristic_fallback"
        return out


def build_reasoner(config: Optional[ReasonerConfig] = None, transport: Optional[Callable] = None):
    config = config or ReasonerConfig()
    config.validate()
    if config.backend == "heuristic":
        return HeuristicReasoner(config.seed)
    if config.backend == "external_llm":
        return LlmReasoner(config, transport=transport)
    raise ValueError(f"unknown reasoner backend {config.backend!r}")
