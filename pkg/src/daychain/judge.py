"""Optional external judge client scoring chains against the rubric.

Carries the four-dimension rubric as prompt text; no claim is made of
reproducing any particular judge model's scores.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from daychain.reasoners import EndpointUnreachableError, _default_transport, extract_json_block, load_prompt

DIMENSIONS = (
    "time_logic_consistency",
    "activity_purpose_coherence",
    "persona_matching",
    "activity_authenticity",
)


class UnparseableResponseError(RuntimeError):
    pass


@dataclass
class JudgeConfig:
    endpoint: str = ""
    model: str = ""
    api_key_env: str = "DAYCHAIN_JUDGE_KEY"
    max_retries: int = 2
    weights: dict = field(default_factory=lambda: {d: 0.25 for d in DIMENSIONS})


class JudgeClient:
    def __init__(self, config: JudgeConfig, transport: Optional[Callable] = None, timeout: float = 30.0):
        if not config.endpoint:
            raise ValueError("judge client needs an endpoint URL")
        if abs(sum(config.weights.values()) - 1.0) > 1e-9:
            raise ValueError("dimension weights must sum to 1")
        self.config = config
        self.transport = transport or _default_transport
        self.timeout = timeout
        self.rubric = load_prompt("judge_rubric.txt")

    def _prompt(self, chain_doc: dict, persona_doc: Optional[dict]) -> str:
        # The rubric template contains literal JSON braces, so substitute
        # the two slots directly instead of str.format.
        text = self.rubric.replace("{chain}", json.dumps(chain_doc, sort_keys=True))
        return text.replace("{persona}", json.dumps(persona_doc or {}, sort_keys=True))

    def score(self, chain_doc: dict, persona_doc: Optional[dict] = None) -> dict:
        """Per-dimension 1-10 scores plus the weighted comprehensive score."""
        body_prompt = self._prompt(chain_doc, persona_doc)
        last_problem = "no response"
        for _ in range(self.config.max_retries + 1):
            response = self.transport(
                self.config.endpoint,
                {
                    "model": self.config.model,
                    "messages": [{"role": "user", "content": body_prompt}],
                    "temperature": 0.0,
                },
                {"Content-Type": "application/json"},
                self.timeout,
            )
            content = response["choices"][0]["message"]["content"]
            doc = extract_json_block(content)
            if doc is None:
                last_problem = "no JSON object in response"
                continue
            try:
                scores = {d: float(doc[d]) for d in DIMENSIONS}
            except (KeyError, TypeError, ValueError):
                last_problem = f"missing or non-numeric dimensions in {sorted(doc)}"
                continue
            if any(not 1.0 <= s <= 10.0 for s in scores.values()):
                last_problem = f"scores out of the 1-10 range: {scores}"
                continue
            comprehensive = sum(self.config.weights[d] * scores[d] for d in DIMENSIONS)
            return {"dimensions": scores, "comprehensive": comprehensive}
        raise UnparseableResponseError(last_problem)
