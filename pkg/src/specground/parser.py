"""Property parsing: a deterministic rule engine and a chat-model client.

Both backends produce the same structured result: the object phrases to
locate and exactly one supported action. The rule backend is driven by an
editable trigger lexicon; the chat-model backend sends a fixed system
prompt and parses the model's JSON reply. Recorded fixtures make the model
backend replayable offline.
"""
from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import requests

from .core import (
    ACTIONS_BY_DOMAIN,
    AUDIO_ACTIONS,
    IMAGE_ACTIONS,
    TABULAR_ACTIONS,
    SemanticSpec,
    action_domain,
)
from .errors import (
    ConflictingActions,
    FixtureMiss,
    MalformedResponse,
    NoActionFound,
    NoObjectFound,
    TransportError,
    UnsupportedAction,
)

PROMPT_TEMPLATES = ("visual", "tabular")
PARSE_MODES = ("detailed", "minimal")

# Action vocabulary reachable from each prompt template. The visual template
# covers the perceptual domains (image and audio share the parsing path).
TEMPLATE_ACTIONS = {
    "visual": frozenset(IMAGE_ACTIONS | AUDIO_ACTIONS),
    "tabular": frozenset(TABULAR_ACTIONS),
}


@dataclass(frozen=True)
class ParserConfig:
    backend: str = "rules"          # "rules" | "llm"
    mode: str = "detailed"          # "detailed" | "minimal"
    prompt_template_id: str = "visual"
    llm_endpoint: str = ""
    llm_model: str = ""
    llm_api_key_env: str = ""
    timeout: float = 30.0
    lexicon_path: Optional[str] = None
    synonyms_path: Optional[str] = None

    def __post_init__(self):
        if self.backend not in ("rules", "llm"):
            raise ValueError(f"unknown parser backend: {self.backend!r}")
        if self.mode not in PARSE_MODES:
            raise ValueError(f"unknown parser mode: {self.mode!r}")
        if self.prompt_template_id not in PROMPT_TEMPLATES:
            raise ValueError(f"unknown prompt template: {self.prompt_template_id!r}")


@dataclass(frozen=True)
class ParseResult:
    spec: SemanticSpec
    raw_response: str
    latency: float

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError("latency must be non-negative")


@dataclass(frozen=True)
class RangeOverride:
    """Explicit raw-unit bound lifted from the property text, e.g. 'younger than 50'."""

    raw_lower: Optional[float] = None
    raw_upper: Optional[float] = None


# ---- bound expressions -------------------------------------------------------
# Comparatives followed by a number are constraint qualifiers, not actions:
# they are stripped before trigger matching and recovered as a RangeOverride.

_NUM = r"(\d+(?:\.\d+)?)"
_UPPER_BOUND_RES = [
    re.compile(rf"\b(?:younger|less|fewer|lower|smaller|shorter)\s+than\s+{_NUM}\b"),
    re.compile(rf"\b(?:below|under)\s+{_NUM}\b"),
    re.compile(rf"\bat\s+most\s+{_NUM}\b"),
    re.compile(rf"\bno\s+more\s+than\s+{_NUM}\b"),
]
_LOWER_BOUND_RES = [
    re.compile(rf"\b(?:older|greater|more|higher|larger|bigger|longer)\s+than\s+{_NUM}\b"),
    re.compile(rf"\b(?:above|over)\s+{_NUM}\b"),
    re.compile(rf"\bat\s+least\s+{_NUM}\b"),
    re.compile(rf"\bno\s+less\s+than\s+{_NUM}\b"),
]


def extract_range_override(property_text: str) -> Optional[RangeOverride]:
    """Pick up an explicit numeric bound from the property text, if any."""
    text = property_text.lower()
    upper = lower = None
    for rx in _UPPER_BOUND_RES:
        m = rx.search(text)
        if m:
            upper = float(m.group(1))
            break
    for rx in _LOWER_BOUND_RES:
        m = rx.search(text)
        if m:
            lower = float(m.group(1))
            break
    if upper is None and lower is None:
        return None
    return RangeOverride(raw_lower=lower, raw_upper=upper)


def strip_bound_expressions(text: str) -> str:
    for rx in _UPPER_BOUND_RES + _LOWER_BOUND_RES:
        text = rx.sub(" ", text)
    return text


# ---- lexicon -----------------------------------------------------------------

def _data_text(filename: str) -> str:
    return resources.files("specground.data").joinpath(filename).read_text(encoding="utf-8")


def _parse_tabbed_lexicon(text: str) -> list[tuple[str, str]]:
    """Parse '<key> <TAB> <comma-separated phrases>' lines into (key, phrase) pairs."""
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "\t" not in line:
            raise ValueError(f"lexicon line {lineno} has no tab separator: {line!r}")
        key, phrases = line.split("\t", 1)
        key = key.strip()
        for phrase in phrases.split(","):
            phrase = phrase.strip().lower()
            if phrase:
                pairs.append((key, phrase))
    return pairs


def load_lexicon(path: Optional[str] = None) -> list[tuple[str, str]]:
    """Action trigger rules as (action, trigger) pairs; '+' joins co-required parts."""
    text = open(path, encoding="utf-8").read() if path else _data_text("lexicon.txt")
    pairs = _parse_tabbed_lexicon(text)
    for action, _ in pairs:
        action_domain(action)  # raises on unknown action names
    return pairs


def load_attribute_synonyms(path: Optional[str] = None) -> list[tuple[str, str]]:
    text = open(path, encoding="utf-8").read() if path else _data_text("attribute_synonyms.txt")
    pairs = _parse_tabbed_lexicon(text)
    # the canonical name itself is always a valid mention
    canon = {name for name, _ in pairs}
    pairs.extend((name, name.lower()) for name in canon)
    return pairs


def _word_re(phrase: str) -> re.Pattern:
    return re.compile(rf"\b{re.escape(phrase)}\b")


def _match_trigger(text: str, trigger: str) -> Optional[tuple[int, int]]:
    """Span of the trigger's final component if all components occur, else None."""
    span = None
    for part in trigger.split("+"):
        m = _word_re(part.strip()).search(text)
        if m is None:
            return None
        if span is None or m.start() > span[0]:
            span = (m.start(), m.end())
    return span


# ---- rule backend --------------------------------------------------------------

_DETERMINERS = {
    "both", "all", "the", "a", "an", "its", "his", "her", "their",
    "my", "our", "your", "every", "each", "some", "any",
}
_TRAILING_FILLER = {
    "is", "are", "was", "were", "be", "being", "been", "not",
    "has", "have", "had", "get", "gets", "got", "getting",
    "become", "becomes", "became",
    "fully", "partially", "completely", "very", "too", "slightly",
    "heavily", "totally", "entirely", "all",
}
_PREPOSITIONS = {"in", "on", "at", "of", "near", "under", "above", "behind", "inside"}

_CLAUSE_OPENER_RE = re.compile(r"\b(?:even\s+if|if|when|whenever|while|that|where)\b")
_PROP_OF_RE = re.compile(
    r"\b(?:the\s+)?(?:brightness|contrast|noise|size|sharpness|volume|color|colour)"
    r"\s+of\s+(.+?)\s+(?:is|are|was|were|gets?|got|being|becomes?)\b"
)


def _strip_determiners(phrase: str) -> str:
    words = phrase.split()
    while words and words[0] in _DETERMINERS:
        words.pop(0)
    return " ".join(words)


def _head_noun(phrase: str) -> str:
    words = phrase.split()
    for i, w in enumerate(words):
        if w in _PREPOSITIONS and i > 0:
            words = words[:i]
            break
    return words[-1] if words else phrase


def _split_phrases(segment: str) -> list[str]:
    parts = re.split(r"\s+and\s+|\s*,\s*", segment)
    phrases = []
    for p in parts:
        p = _strip_determiners(p.strip())
        if p:
            phrases.append(p)
    return phrases


def _noun_phrases_around(text: str, trigger_span: tuple[int, int]) -> list[str]:
    """Object phrases governed by the action trigger at ``trigger_span``."""
    m = _PROP_OF_RE.search(text)
    if m:
        return _split_phrases(m.group(1))

    before = text[: trigger_span[0]]
    opener_end = 0
    for om in _CLAUSE_OPENER_RE.finditer(before):
        opener_end = om.end()
    segment = before[opener_end:]
    words = segment.split()
    while words and words[-1] in _TRAILING_FILLER:
        words.pop()
    phrases = _split_phrases(" ".join(words))
    if phrases:
        return phrases

    # imperative form: the objects follow the trigger
    after = text[trigger_span[1]:]
    after = re.split(r",| if | when | then | so ", after)[0]
    return _split_phrases(after.strip())


def parse_rules(property_text: str, config: ParserConfig,
                lexicon: Optional[list[tuple[str, str]]] = None,
                synonyms: Optional[list[tuple[str, str]]] = None) -> ParseResult:
    """Deterministic keyword/synonym parse of a property text."""
    if not property_text.strip():
        raise NoObjectFound("empty property text")
    t0 = time.perf_counter()
    lexicon = lexicon if lexicon is not None else load_lexicon(config.lexicon_path)
    text = property_text.strip().lower().rstrip("?.!")
    stripped = strip_bound_expressions(text)

    allowed = TEMPLATE_ACTIONS[config.prompt_template_id]
    hits: dict[str, tuple[int, int]] = {}
    for action, trigger in lexicon:
        if action not in allowed or action in hits:
            continue
        span = _match_trigger(stripped, trigger)
        if span is not None:
            hits[action] = span
    if not hits:
        raise NoActionFound(f"no action trigger matched: {property_text!r}")
    if len(hits) > 1:
        raise ConflictingActions(f"multiple action triggers matched: {sorted(hits)}")
    action, span = next(iter(hits.items()))
    domain = action_domain(action)

    if domain == "tabular":
        synonyms = synonyms if synonyms is not None else load_attribute_synonyms(config.synonyms_path)
        found: list[tuple[int, str]] = []
        for attr, phrase in synonyms:
            m = _word_re(phrase).search(text)
            if m and attr not in (a for _, a in found):
                found.append((m.start(), attr))
        if not found:
            raise NoObjectFound(f"no known attribute mentioned: {property_text!r}")
        objects = [attr for _, attr in sorted(found)]
    else:
        phrases = _noun_phrases_around(stripped, span)
        if not phrases:
            raise NoObjectFound(f"no object phrase found: {property_text!r}")
        if config.mode == "minimal":
            phrases = [_head_noun(p) for p in phrases]
        objects = phrases

    spec = SemanticSpec(tuple(objects), action, domain)
    key = "attribute" if domain == "tabular" else "object"
    raw = json.dumps({key: " . ".join(objects), "action": action})
    return ParseResult(spec, raw, time.perf_counter() - t0)


# ---- chat-model backend ---------------------------------------------------------

_MODE_RULES = {
    "detailed": '- Use only noun phrases (e.g., "all cars", "the left cat").',
    "minimal": '- Use only object names (e.g., "car", "cat").',
}
_MODE_WHEELS = {"detailed": "front wheels", "minimal": "wheels"}


def build_system_prompt(template_id: str, mode: str) -> str:
    if template_id == "tabular":
        return _data_text("prompt_tabular.txt")
    text = _data_text("prompt_visual.txt")
    return (text
            .replace("%MODE_RULE%", _MODE_RULES[mode])
            .replace("%MODE_WHEELS%", _MODE_WHEELS[mode]))


def llm_fixture_load(path: str) -> dict[str, str]:
    """Load a replay table mapping sha256(user prompt) -> recorded response."""
    try:
        with open(path, encoding="utf-8") as fh:
            table = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedResponse(f"cannot load fixture file {path}: {exc}") from exc
    if not isinstance(table, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in table.items()
    ):
        raise MalformedResponse(f"fixture file {path} is not a string->string map")
    return table


def prompt_key(property_text: str) -> str:
    return hashlib.sha256(property_text.encode("utf-8")).hexdigest()


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def strip_code_fences(text: str) -> str:
    m = _FENCE_RE.search(text)
    return m.group(1).strip() if m else text.strip()


def _decode_response(raw: str) -> dict:
    body = strip_code_fences(raw)
    try:
        data = json.loads(body)
    except json.JSONDecodeError:
        m = re.search(r"\{.*\}", body, re.DOTALL)
        if not m:
            raise MalformedResponse(f"no JSON object in response: {raw[:200]!r}")
        try:
            data = json.loads(m.group(0))
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"unparsable JSON in response: {raw[:200]!r}") from exc
    if not isinstance(data, dict):
        raise MalformedResponse(f"response is not a JSON object: {raw[:200]!r}")
    return data


def parse_llm(property_text: str, config: ParserConfig,
              fixture: Optional[dict[str, str]] = None) -> ParseResult:
    """Send the property to the chat model (or fixture table) and decode its reply."""
    if not property_text.strip():
        raise NoObjectFound("empty property text")
    system = build_system_prompt(config.prompt_template_id, config.mode)

    t0 = time.perf_counter()
    if fixture is not None:
        key = prompt_key(property_text)
        if key not in fixture:
            raise FixtureMiss(f"no recorded response for prompt key {key}")
        raw = fixture[key]
    else:
        import os
        headers = {}
        if config.llm_api_key_env:
            api_key = os.environ.get(config.llm_api_key_env, "")
            if api_key:
                headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": config.llm_model,
            "system": system,
            "user": property_text,
            "temperature": 0,
        }
        try:
            resp = requests.post(config.llm_endpoint, json=payload,
                                 headers=headers, timeout=config.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"chat endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"chat endpoint returned {resp.status_code}")
        raw = resp.text
    latency = time.perf_counter() - t0

    data = _decode_response(raw)
    obj_field = "attribute" if config.prompt_template_id == "tabular" else "object"
    if "action" not in data or obj_field not in data:
        raise MalformedResponse(f"response missing {obj_field!r}/'action': {raw[:200]!r}")
    action = str(data["action"]).strip()
    if action not in TEMPLATE_ACTIONS[config.prompt_template_id]:
        raise UnsupportedAction(f"action {action!r} not in the supported set")
    objects = tuple(o.strip() for o in str(data[obj_field]).split(" . ") if o.strip())
    if not objects:
        raise MalformedResponse(f"empty object field in response: {raw[:200]!r}")
    spec = SemanticSpec(objects, action, action_domain(action))
    return ParseResult(spec, raw, latency)


@dataclass
class Parser:
    """Configured parser facade; immutable after construction."""

    config: ParserConfig
    fixture: Optional[dict[str, str]] = None
    _lexicon: list = field(default_factory=list)
    _synonyms: list = field(default_factory=list)

    def __post_init__(self):
        self._lexicon = load_lexicon(self.config.lexicon_path)
        self._synonyms = load_attribute_synonyms(self.config.synonyms_path)

    def parse(self, property_text: str) -> ParseResult:
        if self.config.backend == "rules":
            return parse_rules(property_text, self.config, self._lexicon, self._synonyms)
        return parse_llm(property_text, self.config, self.fixture)
