"""Persona-configured tool-calling agent loop over a pluggable chat backend.

The loop is deliberately boring: send the message history and tool
declarations to a backend; if it answers with tool calls, execute them
against the registry, append the results, and go around again; if it answers
with text, that text is the final answer. Two backends ship — a deterministic
scripted mock for offline runs and tests, and an HTTP client for any
OpenAI-style chat-completion endpoint with function calling.

Transcripts carry logical sequence numbers rather than wall-clock times, so
a mock-backed run is byte-identical across invocations.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import requests

from .errors import (
    BackendError,
    DataError,
    MockScriptExhausted,
    SoilCopilotError,
    ToolArgumentError,
    UnknownTool,
)
from .knowledge import KnowledgeIndex
from .store import AgroStore, canonical_county, display_county

DEFAULT_MAX_ITERATIONS = 8
DEFAULT_TIMEOUT_S = 60.0
DEFAULT_RETRIES = 2
DEFAULT_BACKOFF_S = 0.5


# -- personas -----------------------------------------------------------------

@dataclass(frozen=True)
class Persona:
    role: str
    system_prompt: str


AGRONOMIST_PROMPT = (
    "You are an AI assistant specialized in agronomy, with a focus on soil "
    "health and crop productivity. You have access to tools that analyze "
    "soil organic carbon (SOC) as a proxy for soil health, along with "
    "county-level data on drought, wildfire, and cropland conditions. You "
    "provide insights and recommendations for optimizing soil management "
    "and enhancing agricultural sustainability."
)

FARM_CONSULTANT_PROMPT = (
    "You are an AI assistant acting as a farm consultant, helping farmers "
    "make informed decisions about land management. You have access to "
    "tools that assess soil organic carbon (SOC) as a key indicator of soil "
    "health, alongside data on drought, wildfire, and cropland conditions "
    "at the county level. You offer actionable advice to improve farm "
    "productivity and resilience."
)

POLICYMAKER_PROMPT = (
    "You are an AI assistant supporting policy makers in developing and "
    "implementing agricultural policies. You use tools that evaluate soil "
    "organic carbon (SOC) as a proxy for soil health, combined with "
    "county-level data on drought, wildfire, and cropland conditions. You "
    "provide data-driven insights to inform policies that promote "
    "sustainable land use and agricultural practices."
)

DEFAULT_PROMPT = (
    "You are an AI assistant for soil organic carbon analysis. You have "
    "access to tools that report soil organic carbon (SOC) predictions, "
    "drought, wildfire, cropland, tillage, and farm-practice records at the "
    "county level, plus a scientific-literature search. Ground every "
    "numeric claim in tool results and cite retrieved literature when you "
    "use it."
)

PERSONAS: dict[str, Persona] = {
    "agronomist": Persona("agronomist", AGRONOMIST_PROMPT),
    "farm_consultant": Persona("farm_consultant", FARM_CONSULTANT_PROMPT),
    "policymaker": Persona("policymaker", POLICYMAKER_PROMPT),
    "default": Persona("default", DEFAULT_PROMPT),
}


def get_persona(role: str) -> Persona:
    persona = PERSONAS.get(str(role).strip().lower())
    if persona is None:
        raise DataError(
            f"unknown persona {role!r}; valid roles: "
            f"{', '.join(PERSONAS)}"
        )
    return persona


# -- tool registry ------------------------------------------------------------

_PARAM_CHECKS = {
    "string": lambda v: isinstance(v, str),
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float))
    and not isinstance(v, bool),
}


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: dict[str, dict]
    handler: Callable[[dict], dict] = field(compare=False)

    def validate_args(self, args) -> dict:
        if not isinstance(args, dict):
            raise ToolArgumentError(
                f"{self.name}: arguments must be an object, got "
                f"{type(args).__name__}"
            )
        for key in args:
            if key not in self.parameters:
                raise ToolArgumentError(
                    f"{self.name}: unexpected argument {key!r}")
        for key, schema in self.parameters.items():
            if key not in args:
                if schema.get("required", False):
                    raise ToolArgumentError(
                        f"{self.name}: missing required argument {key!r}")
                continue
            kind = schema["type"]
            if not _PARAM_CHECKS[kind](args[key]):
                raise ToolArgumentError(
                    f"{self.name}: argument {key!r} must be a {kind}, got "
                    f"{type(args[key]).__name__}"
                )
        return dict(args)

    def wire_spec(self) -> dict:
        """OpenAI-style function declaration sent to chat backends."""
        properties = {
            key: {"type": schema["type"],
                  "description": schema.get("description", "")}
            for key, schema in self.parameters.items()
        }
        required = [key for key, schema in self.parameters.items()
                    if schema.get("required", False)]
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {
                    "type": "object",
                    "properties": properties,
                    "required": required,
                },
            },
        }


class ToolRegistry:
    """Ordered name → ToolSpec map with schema-checked dispatch."""

    def __init__(self):
        self._tools: dict[str, ToolSpec] = {}

    def register(self, spec: ToolSpec):
        if spec.name in self._tools:
            raise ValueError(f"duplicate tool name {spec.name!r}")
        self._tools[spec.name] = spec

    def names(self) -> list[str]:
        return list(self._tools)

    def get(self, name: str) -> ToolSpec:
        spec = self._tools.get(name)
        if spec is None:
            raise UnknownTool(name, self.names())
        return spec

    def specs(self) -> list[dict]:
        return [spec.wire_spec() for spec in self._tools.values()]

    def describe(self) -> list[dict]:
        return [
            {"name": spec.name, "description": spec.description,
             "parameters": spec.parameters}
            for spec in self._tools.values()
        ]

    def invoke(self, name: str, args: dict) -> dict:
        spec = self.get(name)
        return spec.handler(spec.validate_args(args))


_COUNTY_PARAM = {
    "county": {
        "type": "string",
        "required": True,
        "description": "County name, e.g. 'Merced' or 'San Joaquin County'.",
    }
}


def build_tool_registry(store: AgroStore, knowledge_index: KnowledgeIndex,
                        tillage_outputs: dict[str, float] | None = None,
                        ) -> ToolRegistry:
    """The six copilot tools, bound to a store and a literature index.

    tillage_outputs optionally maps county names to tillage scales produced
    by the change-detection pipeline; it answers tillage_scale queries for
    counties the tillage CSV does not cover.
    """
    detected = {canonical_county(k): float(v)
                for k, v in (tillage_outputs or {}).items()}

    def soc_prediction(args):
        soc_2016, soc_2023 = store.soc_prediction(args["county"])
        return {"county": store.display_name(args["county"]),
                "soc_2016_pct": soc_2016, "soc_2023_pct": soc_2023}

    def drought_conditions(args):
        events = store.drought_conditions(args["county"])
        return {"county": store.display_name(args["county"]),
                "events": [e.to_dict() for e in events]}

    def wildfire_incidents(args):
        incidents = store.wildfire_incidents(args["county"])
        return {"county": store.display_name(args["county"]),
                "incidents": [i.to_dict() for i in incidents]}

    def crop_types_and_years(args):
        groups = store.crop_types(args["county"])
        return {"county": store.display_name(args["county"]),
                "years": [{"year": year,
                           "crops": [c.to_dict() for c in crops]}
                          for year, crops in groups]}

    def tillage_scale(args):
        county = args["county"]
        year = args.get("year")
        try:
            got_year, scale = store.tillage_scale(county, year)
            return {"county": store.display_name(county), "year": got_year,
                    "tillage_scale": scale}
        except DataError:
            key = canonical_county(county)
            if key in detected and (year is None or year == 2019):
                return {"county": display_county(county), "year": 2019,
                        "tillage_scale": detected[key],
                        "source": "coherence_detection"}
            raise

    def support_arguments(args):
        hits = knowledge_index.support_arguments(
            args["query"], topic_filter=args.get("topic"),
            k=args.get("k", 4))
        return {"query": args["query"], "topic": args.get("topic"),
                "results": [h.to_dict() for h in hits]}

    registry = ToolRegistry()
    registry.register(ToolSpec(
        name="soc_prediction",
        description=("Always use this tool to get the soil organic carbon "
                     "prediction in 2016 and 2023 in a county."),
        parameters=_COUNTY_PARAM,
        handler=soc_prediction,
    ))
    registry.register(ToolSpec(
        name="drought_conditions",
        description="Provides the drought conditions of a county.",
        parameters=_COUNTY_PARAM,
        handler=drought_conditions,
    ))
    registry.register(ToolSpec(
        name="wildfire_incidents",
        description="Provides the wildfire incidents that occurred in a county.",
        parameters=_COUNTY_PARAM,
        handler=wildfire_incidents,
    ))
    registry.register(ToolSpec(
        name="crop_types_and_years",
        description="Provides the crop types and corresponding years in a county.",
        parameters=_COUNTY_PARAM,
        handler=crop_types_and_years,
    ))
    registry.register(ToolSpec(
        name="tillage_scale",
        description=("Provides the tillage in 2019 in a county on a scale "
                     "of 0 to 1 where 0 is no till, 1 is conventional "
                     "tilling."),
        parameters={
            **_COUNTY_PARAM,
            "year": {"type": "integer", "required": False,
                     "description": "Optional year; defaults to the latest "
                                    "available."},
        },
        handler=tillage_scale,
    ))
    registry.register(ToolSpec(
        name="support_arguments",
        description=("Use this tool to find arguments to support your "
                     "hypothesis with topics related to wildfire, drought, "
                     "agricultural practices, or crops."),
        parameters={
            "query": {"type": "string", "required": True,
                      "description": "Search terms for the article corpus."},
            "topic": {"type": "string", "required": False,
                      "description": "Restrict to one topic: Drought, "
                                     "Wildfire, Crop, or Practices."},
            "k": {"type": "integer", "required": False,
                  "description": "Number of passages to return (default 4)."},
        },
        handler=support_arguments,
    ))
    return registry


# -- transcripts ----------------------------------------------------------------

TURN_KINDS = ("system", "user", "assistant_text", "tool_call", "tool_result")


@dataclass(frozen=True)
class AgentTurn:
    seq: int
    kind: str
    payload: dict

    def __post_init__(self):
        if self.kind not in TURN_KINDS:
            raise ValueError(f"unknown turn kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "payload": self.payload}


@dataclass
class Transcript:
    session_id: str
    persona: str
    turns: list[AgentTurn] = field(default_factory=list)
    truncated: bool = False
    # Full chat-protocol message list after this exchange (prior context
    # included).  Lets a session feed its history into the next exchange;
    # excluded from serialization, which covers this exchange's turns only.
    wire_messages: list[dict] = field(default_factory=list, repr=False,
                                      compare=False)

    @property
    def answer(self) -> str:
        for turn in reversed(self.turns):
            if turn.kind == "assistant_text":
                return turn.payload["text"]
        raise ValueError("transcript has no final answer")

    def tool_trace(self) -> list[dict]:
        """tool_call/tool_result pairs, flattened in execution order."""
        trace = []
        for turn in self.turns:
            if turn.kind == "tool_call":
                trace.append({
                    "call_id": turn.payload["call_id"],
                    "name": turn.payload["name"],
                    "arguments": turn.payload["arguments"],
                })
            elif turn.kind == "tool_result":
                entry = trace[-1]
                if "error" in turn.payload:
                    entry["error"] = turn.payload["error"]
                else:
                    entry["result"] = turn.payload["result"]
        return trace

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "persona": self.persona,
            "truncated": self.truncated,
            "turns": [t.to_dict() for t in self.turns],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# -- chat backends --------------------------------------------------------------

class ChatBackend(Protocol):
    def complete(self, messages: list[dict],
                 tool_specs: list[dict]) -> dict: ...


class MockBackend:
    """Replays a scripted list of steps; each is {"tool_calls": [...]} or
    {"text": ...}. Completely deterministic and offline."""

    def __init__(self, steps: list[dict]):
        self.steps = [self._check_step(i, s) for i, s in enumerate(steps)]
        self._cursor = 0

    @staticmethod
    def _check_step(i: int, step) -> dict:
        where = f"mock script step {i}"
        if not isinstance(step, dict):
            raise DataError(f"{where}: step must be an object")
        has_calls = "tool_calls" in step
        has_text = "text" in step
        if has_calls == has_text:
            raise DataError(
                f"{where}: step needs exactly one of 'tool_calls' or 'text'")
        if has_text:
            if not isinstance(step["text"], str):
                raise DataError(f"{where}: 'text' must be a string")
            return {"text": step["text"]}
        calls = step["tool_calls"]
        if not isinstance(calls, list) or not calls:
            raise DataError(f"{where}: 'tool_calls' must be a non-empty list")
        cleaned = []
        for j, call in enumerate(calls):
            if not isinstance(call, dict) or not isinstance(
                    call.get("name"), str):
                raise DataError(f"{where}: tool call {j} needs a 'name'")
            args = call.get("args", {})
            if not isinstance(args, dict):
                raise DataError(
                    f"{where}: tool call {j} 'args' must be an object")
            cleaned.append({"name": call["name"], "arguments": args})
        return {"tool_calls": cleaned}

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        path = Path(path)
        if not path.exists():
            raise DataError(f"missing mock script: {path}")
        try:
            steps = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"unparsable mock script {path}: {exc}") from exc
        if not isinstance(steps, list):
            raise DataError(f"mock script {path} must be a JSON list of steps")
        return cls(steps)

    def complete(self, messages, tool_specs) -> dict:
        if self._cursor >= len(self.steps):
            raise MockScriptExhausted(
                f"mock script exhausted after {len(self.steps)} steps")
        step = self.steps[self._cursor]
        self._cursor += 1
        return step


class HttpBackend:
    """Client for an OpenAI-style chat-completions endpoint with function
    calling. Transport failures and 5xx responses are retried with
    exponential backoff; 4xx responses fail immediately."""

    def __init__(self, endpoint_url: str, api_key: str | None = None,
                 model: str | None = None,
                 timeout_s: float = DEFAULT_TIMEOUT_S,
                 max_retries: int = DEFAULT_RETRIES,
                 backoff_s: float = DEFAULT_BACKOFF_S,
                 session: requests.Session | None = None):
        if not endpoint_url:
            raise ValueError("endpoint_url is required")
        self.endpoint_url = endpoint_url
        self.api_key = api_key
        self.model = model
        self.timeout_s = float(timeout_s)
        self.max_retries = int(max_retries)
        self.backoff_s = float(backoff_s)
        self._session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    def _post(self, body: dict):
        last_error = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                response = self._session.post(
                    self.endpoint_url, json=body, headers=self._headers(),
                    timeout=self.timeout_s)
            except requests.RequestException as exc:
                last_error = f"transport error: {exc}"
                continue
            if response.status_code >= 500:
                last_error = f"server error {response.status_code}"
                continue
            if response.status_code >= 400:
                raise BackendError(
                    f"chat endpoint rejected request "
                    f"({response.status_code}): {response.text[:500]}"
                )
            return response
        raise BackendError(
            f"chat endpoint unreachable after {self.max_retries + 1} "
            f"attempts: {last_error}"
        )

    def complete(self, messages, tool_specs) -> dict:
        body: dict = {"messages": messages}
        if self.model:
            body["model"] = self.model
        if tool_specs:
            body["tools"] = tool_specs
            body["tool_choice"] = "auto"
        response = self._post(body)
        try:
            message = response.json()["choices"][0]["message"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(
                f"malformed completion response: {exc}") from exc
        calls = message.get("tool_calls")
        if calls:
            cleaned = []
            for call in calls:
                try:
                    fn = call["function"]
                    cleaned.append({
                        "name": fn["name"],
                        "arguments": json.loads(fn.get("arguments") or "{}"),
                    })
                except (KeyError, TypeError, json.JSONDecodeError) as exc:
                    raise BackendError(
                        f"malformed tool call in response: {exc}") from exc
            return {"tool_calls": cleaned}
        content = message.get("content")
        if not isinstance(content, str):
            raise BackendError(
                "completion response has neither tool calls nor text content")
        return {"text": content}


# -- the loop -------------------------------------------------------------------

def _truncation_notice(max_iterations: int, executed: int) -> str:
    return (
        f"[truncated] The tool-call budget of {max_iterations} was reached "
        f"after {executed} executed calls, so this answer is based on "
        f"partial results. Re-ask a narrower question or raise the budget."
    )


def run_agent(user_prompt: str, persona: Persona, backend: ChatBackend,
              registry: ToolRegistry,
              max_iterations: int = DEFAULT_MAX_ITERATIONS,
              session_id: str = "local",
              prior_messages: list[dict] | None = None) -> Transcript:
    """Run one conversation exchange to completion and return its transcript.

    ``prior_messages`` carries the full chat-protocol history of earlier
    exchanges in the same session (starting with their system message); when
    given, the new user message is appended to that context instead of a
    fresh system+user pair, and the transcript records only the new turns.
    """
    if max_iterations < 1:
        raise ValueError(f"max_iterations must be >= 1, got {max_iterations}")
    if not user_prompt or not user_prompt.strip():
        raise DataError("user prompt is empty")

    transcript = Transcript(session_id=session_id, persona=persona.role)

    def add(kind: str, payload: dict):
        transcript.turns.append(AgentTurn(len(transcript.turns), kind, payload))

    if prior_messages is None:
        add("system", {"text": persona.system_prompt})
        messages = [{"role": "system", "content": persona.system_prompt}]
    else:
        messages = [dict(m) for m in prior_messages]
    add("user", {"text": user_prompt})
    messages.append({"role": "user", "content": user_prompt})

    executed = 0
    final_text = None
    while final_text is None:
        response = backend.complete(messages, registry.specs())
        if "text" in response:
            final_text = response["text"]
            break
        calls = response.get("tool_calls")
        if not calls:
            raise BackendError(
                "backend response has neither text nor tool calls")

        wire_calls = []
        results = []
        for call in calls:
            if executed >= max_iterations:
                transcript.truncated = True
                break
            call_id = f"call_{executed}"
            executed += 1
            add("tool_call", {"call_id": call_id, "name": call["name"],
                              "arguments": call["arguments"]})
            try:
                result = registry.invoke(call["name"], call["arguments"])
                payload = {"call_id": call_id, "name": call["name"],
                           "result": result}
            except (SoilCopilotError, ValueError) as exc:
                payload = {"call_id": call_id, "name": call["name"],
                           "error": {"type": type(exc).__name__,
                                     "message": str(exc)}}
            add("tool_result", payload)
            wire_calls.append({
                "id": call_id,
                "type": "function",
                "function": {
                    "name": call["name"],
                    "arguments": json.dumps(call["arguments"],
                                            sort_keys=True),
                },
            })
            results.append(payload)

        if wire_calls:
            messages.append({"role": "assistant", "content": None,
                             "tool_calls": wire_calls})
            for payload in results:
                content = {k: v for k, v in payload.items()
                           if k in ("result", "error")}
                messages.append({
                    "role": "tool",
                    "tool_call_id": payload["call_id"],
                    "name": payload["name"],
                    "content": json.dumps(content, sort_keys=True),
                })
        if transcript.truncated:
            final_text = _truncation_notice(max_iterations, executed)

    add("assistant_text", {"text": final_text})
    messages.append({"role": "assistant", "content": final_text})
    transcript.wire_messages = messages
    return transcript
