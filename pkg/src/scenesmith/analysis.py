"""Structured analysis of compositional prompts.

Turns a text prompt into objects, attributes, relations, and a routing
category.  The rule-based path is a deterministic offline stand-in for
the agent decomposition; its grammar covers conjunction chains of
attributed noun phrases, numeric quantifiers, spatial patterns, and
``X <verb>ing Y`` non-spatial patterns.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import UnparseablePrompt
from .lexicon import ATTRIBUTE_WORDS, Lexicons, attribute_kind

SPATIAL_KINDS = ("left", "right", "above", "below", "on_top", "next_to")

_DETERMINERS = {"a", "an", "the"}
_COUNT_WORDS = {
    "one": 1,
    "two": 2,
    "three": 3,
    "four": 4,
    "five": 5,
    "six": 6,
    "seven": 7,
    "eight": 8,
    "nine": 9,
    "ten": 10,
}
_VOWELS = "aeiou"


def singularize(noun: str) -> str:
    """Naive plural stripping for counted nouns ("hot dogs" -> "hot dog")."""
    head = noun.split()
    last = head[-1]
    if last.endswith("ies") and len(last) > 3:
        last = last[:-3] + "y"
    elif last.endswith(("ses", "xes", "ches", "shes")):
        last = last[:-2]
    elif last.endswith("s") and not last.endswith("ss"):
        last = last[:-1]
    head[-1] = last
    return " ".join(head)


def pluralize(noun: str) -> str:
    head = noun.split()
    last = head[-1]
    if last.endswith("y") and len(last) > 1 and last[-2] not in _VOWELS:
        last = last[:-1] + "ies"
    elif last.endswith(("s", "x", "ch", "sh")):
        last = last + "es"
    else:
        last = last + "s"
    head[-1] = last
    return " ".join(head)


def indefinite_article(phrase_head: str) -> str:
    return "an" if phrase_head[:1].lower() in _VOWELS else "a"


@dataclass(frozen=True)
class Attribute:
    """One attribute of an object: kind in {color, shape, texture, other}."""

    kind: str
    value: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", self.value.strip().lower())


@dataclass
class AttributedObject:
    """A noun phrase with its head noun, attributes, and instance count."""

    phrase: str
    noun: str
    attributes: list[Attribute] = field(default_factory=list)
    count: int = 1

    def __post_init__(self) -> None:
        if not self.phrase:
            raise ValueError("phrase must be non-empty")
        if self.noun not in self.phrase:
            raise ValueError(f"noun {self.noun!r} not contained in phrase {self.phrase!r}")
        if self.count < 1:
            raise ValueError("count must be >= 1")

    def to_dict(self) -> dict:
        return {
            "phrase": self.phrase,
            "noun": self.noun,
            "attributes": [{"kind": a.kind, "value": a.value} for a in self.attributes],
            "count": self.count,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AttributedObject":
        return cls(
            phrase=data["phrase"],
            noun=data["noun"],
            attributes=[Attribute(a["kind"], a["value"]) for a in data.get("attributes", [])],
            count=data.get("count", 1),
        )


@dataclass
class Relation:
    """A binary relation between two objects, spatial or non-spatial."""

    subject_index: int
    object_index: int
    kind: str
    raw_text: str = ""

    def __post_init__(self) -> None:
        if self.subject_index == self.object_index:
            raise ValueError("relation subject and object must differ")

    @property
    def is_spatial(self) -> bool:
        return self.kind in SPATIAL_KINDS

    def to_dict(self) -> dict:
        return {
            "subject_index": self.subject_index,
            "object_index": self.object_index,
            "kind": self.kind,
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Relation":
        return cls(data["subject_index"], data["object_index"], data["kind"], data.get("raw_text", ""))


class Category(str, Enum):
    """Routing category driving tool selection."""

    ATTRIBUTE_ONLY = "attribute-only"
    RELATION_ONLY = "relationship-only"
    BOTH = "both"
    SIMPLE = "simple"


@dataclass
class PromptAnalysis:
    raw_prompt: str
    objects: list[AttributedObject]
    relations: list[Relation] = field(default_factory=list)
    category: Category = Category.SIMPLE

    def __post_init__(self) -> None:
        for rel in self.relations:
            if not (0 <= rel.subject_index < len(self.objects)):
                raise ValueError(f"relation subject index {rel.subject_index} out of range")
            if not (0 <= rel.object_index < len(self.objects)):
                raise ValueError(f"relation object index {rel.object_index} out of range")

    @property
    def instance_count(self) -> int:
        return sum(obj.count for obj in self.objects)

    def to_dict(self) -> dict:
        return {
            "raw_prompt": self.raw_prompt,
            "objects": [o.to_dict() for o in self.objects],
            "relations": [r.to_dict() for r in self.relations],
            "category": self.category.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PromptAnalysis":
        return cls(
            raw_prompt=data["raw_prompt"],
            objects=[AttributedObject.from_dict(o) for o in data["objects"]],
            relations=[Relation.from_dict(r) for r in data.get("relations", [])],
            category=Category(data.get("category", "simple")),
        )


# --- noun phrase grammar ------------------------------------------------------


def _tokenize(text: str) -> list[str]:
    text = text.lower().replace(",", " , ")
    text = re.sub(r"[^\w\s,'-]", " ", text)
    return text.split()


def parse_noun_phrase(text: str) -> AttributedObject:
    """Parse one noun phrase into an AttributedObject.

    Grammar: [determiner|quantifier] adjective* noun+.  Words in the fixed
    attribute lexicons are adjectives; an unknown word is treated as an
    adjective (kind=other) only when a known adjective follows it, otherwise
    it folds into a compound noun ("hot dog").
    """
    tokens = [t for t in _tokenize(text) if t not in {",", "of"}]
    count = 1
    while tokens and (tokens[0] in _DETERMINERS or tokens[0] in _COUNT_WORDS or tokens[0].isdigit()):
        head = tokens.pop(0)
        if head in _COUNT_WORDS:
            count = _COUNT_WORDS[head]
        elif head.isdigit():
            count = max(1, int(head))
    if not tokens:
        raise UnparseablePrompt(f"no noun found in {text!r}")

    known = [i for i, tok in enumerate(tokens) if tok in ATTRIBUTE_WORDS]
    # Everything up to the last known adjective is an adjective; the rest is
    # the (possibly compound) noun.  Never consume the final token as an
    # adjective: "a fabric" is a noun, not a dangling attribute.
    last_adj = -1
    for i in known:
        if i < len(tokens) - 1:
            last_adj = i
    adjectives = tokens[: last_adj + 1]
    noun_tokens = tokens[last_adj + 1 :]
    noun = " ".join(noun_tokens)
    if count > 1:
        noun = singularize(noun)

    attributes = [Attribute(attribute_kind(adj), adj) for adj in adjectives]
    adj_text = " ".join(adjectives)
    core = f"{adj_text} {noun}".strip()
    phrase = f"{indefinite_article(core)} {core}"
    return AttributedObject(phrase=phrase, noun=noun, attributes=attributes, count=count)


# --- relation templates -------------------------------------------------------

_COPULA = r"(?:\s+(?:was|were|is|are))?"
_SPATIAL_PATTERNS: list[tuple[re.Pattern, str]] = [
    (re.compile(rf"^(?P<s>.+?){_COPULA}\s+on\s+the\s+(?P<d>left|right)(?:\s+side)?\s+of\s+(?P<o>.+)$"), "d"),
    (re.compile(rf"^(?P<s>.+?){_COPULA}\s+to\s+the\s+(?P<d>left|right)\s+of\s+(?P<o>.+)$"), "d"),
    (re.compile(rf"^(?P<s>.+?){_COPULA}\s+on\s+top\s+of\s+(?P<o>.+)$"), "on_top"),
    (re.compile(rf"^(?P<s>.+?){_COPULA}\s+(?P<d>above|over)\s+(?P<o>.+)$"), "above"),
    (re.compile(rf"^(?P<s>.+?){_COPULA}\s+(?P<d>below|under|beneath|underneath)\s+(?P<o>.+)$"), "below"),
    (re.compile(rf"^(?P<s>.+?){_COPULA}\s+(?:next\s+to|beside)\s+(?P<o>.+)$"), "next_to"),
]
_NON_SPATIAL = re.compile(rf"^(?P<s>.+?){_COPULA}\s+(?P<v>\w+ing)\s+(?P<o>.+)$")
_WITH_ON_IT = re.compile(r"^(?P<o>.+?)\s+with\s+(?P<s>.+?)\s+on\s+(?:it|them)$")
_CONJUNCTION = re.compile(r"\s+and\s+|\s*,\s*")


def _normalize_prompt(prompt: str) -> str:
    text = prompt.strip().lower()
    text = re.sub(r"[.!?]+$", "", text).strip()
    text = re.sub(r"^there\s+(?:is|are)\s+", "", text)
    return text


def _parse_phrase_list(text: str, objects: list[AttributedObject], relations: list[Relation]) -> list[int]:
    """Parse a conjunction chain of noun phrases, returning their indices.

    A chunk of the form "Y with Z on it" yields both objects plus an
    on_top(Z, Y) relation; only the head object Y joins any outer relation.
    """
    indices: list[int] = []
    for chunk in _CONJUNCTION.split(text):
        chunk = re.sub(r"^with\s+", "", chunk.strip())
        if not chunk:
            continue
        with_match = _WITH_ON_IT.match(chunk)
        if with_match:
            base_idx = _add_object(with_match.group("o"), objects)
            top_idx = _add_object(with_match.group("s"), objects)
            relations.append(Relation(top_idx, base_idx, "on_top", chunk))
            indices.append(base_idx)
            continue
        indices.append(_add_object(chunk, objects))
    return indices


def _add_object(phrase_text: str, objects: list[AttributedObject]) -> int:
    objects.append(parse_noun_phrase(phrase_text))
    return len(objects) - 1


def decompose_rule_based(prompt: str, lexicons: Lexicons | None = None) -> PromptAnalysis:
    """Deterministically decompose a prompt via the template grammar.

    Raises UnparseablePrompt when no template matches; callers fall back to
    the agent completion path or a Simple single-object analysis.
    """
    if not prompt or not prompt.strip():
        raise UnparseablePrompt("empty prompt")
    lexicons = lexicons or Lexicons.default()
    text = _normalize_prompt(prompt)

    objects: list[AttributedObject] = []
    relations: list[Relation] = []

    matched = False
    for pattern, kind_key in _SPATIAL_PATTERNS:
        match = pattern.match(text)
        if not match:
            continue
        kind = match.group("d") if kind_key == "d" else kind_key
        subject_ids = _parse_phrase_list(match.group("s"), objects, relations)
        object_ids = _parse_phrase_list(match.group("o"), objects, relations)
        for sid in subject_ids:
            for oid in object_ids:
                relations.append(Relation(sid, oid, kind, match.group(0)))
        matched = True
        break

    if not matched:
        match = _NON_SPATIAL.match(text)
        if match:
            # A false verb match ("a painting and a ring") leaves an
            # unparseable subject; fall through to the conjunction grammar.
            try:
                subject_ids = _parse_phrase_list(match.group("s"), objects, relations)
                object_ids = _parse_phrase_list(match.group("o"), objects, relations)
            except UnparseablePrompt:
                objects.clear()
                relations.clear()
            else:
                verb = match.group("v")
                for sid in subject_ids:
                    for oid in object_ids:
                        relations.append(Relation(sid, oid, verb, match.group(0)))
                matched = True

    if not matched:
        _parse_phrase_list(text, objects, relations)

    if not objects:
        raise UnparseablePrompt(f"no objects extracted from {prompt!r}")

    category = classify(objects, relations, lexicons)
    return PromptAnalysis(raw_prompt=prompt, objects=objects, relations=relations, category=category)


def classify(
    objects: list[AttributedObject],
    relations: list[Relation],
    lexicons: Lexicons | None = None,
) -> Category:
    """Decide the routing category from attribute/relation triviality.

    AttributeOnly: at least one non-trivial attribute, all relations trivial.
    RelationOnly: at least one non-trivial relation, all attributes trivial.
    Both / Simple fill the remaining quadrants.
    """
    if not objects:
        raise ValueError("classify requires at least one object")
    lexicons = lexicons or Lexicons.default()

    nontrivial_attr = any(
        not lexicons.attribute_is_trivial(attr.value, obj.noun)
        for obj in objects
        for attr in obj.attributes
    )
    nontrivial_rel = any(not lexicons.relation_is_trivial(rel.kind) for rel in relations)

    if nontrivial_attr and nontrivial_rel:
        return Category.BOTH
    if nontrivial_attr:
        return Category.ATTRIBUTE_ONLY
    if nontrivial_rel:
        return Category.RELATION_ONLY
    return Category.SIMPLE


def simple_fallback_analysis(prompt: str) -> PromptAnalysis:
    """Treat an unparseable prompt as one Simple object covering the text."""
    text = _normalize_prompt(prompt) or prompt.strip()
    phrase = text if text.split()[:1] in (["a"], ["an"]) else f"{indefinite_article(text)} {text}"
    noun = text
    return PromptAnalysis(
        raw_prompt=prompt,
        objects=[AttributedObject(phrase=phrase, noun=noun)],
        relations=[],
        category=Category.SIMPLE,
    )
