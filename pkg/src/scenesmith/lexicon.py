"""Word lists for attribute tagging and the configurable triviality lexicons.

Attribute kinds are decided by fixed word lists (colors, shapes,
materials/textures).  Unknown adjectives fall back to kind ``other``.
Triviality of attributes and relations is configured through small text
files: one term or ``adjective noun`` pair per line, ``#`` comments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

# Fixed color vocabulary: the 16 CSS basic colors plus brown, gold, silver
# shades used by the mock renderer's name table.
COLOR_WORDS = frozenset(
    {
        "black",
        "silver",
        "gray",
        "grey",
        "white",
        "maroon",
        "red",
        "purple",
        "fuchsia",
        "green",
        "lime",
        "olive",
        "yellow",
        "navy",
        "blue",
        "teal",
        "aqua",
        "brown",
        "gold",
        "orange",
        "pink",
    }
)

SHAPE_WORDS = frozenset(
    {
        "round",
        "circular",
        "oval",
        "square",
        "rectangular",
        "triangular",
        "cubic",
        "spherical",
        "conical",
        "cylindrical",
        "long",
        "short",
        "tall",
        "big",
        "large",
        "small",
        "tiny",
        "huge",
        "curved",
        "flat",
        "pointed",
    }
)

TEXTURE_WORDS = frozenset(
    {
        "wooden",
        "metallic",
        "metal",
        "fabric",
        "leather",
        "glass",
        "plastic",
        "rubber",
        "fluffy",
        "furry",
        "soft",
        "rough",
        "smooth",
        "shiny",
        "glossy",
        "matte",
        "striped",
        "checkered",
        "knitted",
        "woven",
        "ceramic",
        "stone",
        "velvet",
        "silk",
        "denim",
        "fuzzy",
    }
)

ATTRIBUTE_WORDS = COLOR_WORDS | SHAPE_WORDS | TEXTURE_WORDS


def attribute_kind(word: str) -> str:
    """Tag an adjective as color, shape, texture, or other."""
    word = word.lower()
    if word in COLOR_WORDS:
        return "color"
    if word in SHAPE_WORDS:
        return "shape"
    if word in TEXTURE_WORDS:
        return "texture"
    return "other"


def _parse_lexicon_lines(lines: list[str]) -> set[str]:
    terms: set[str] = set()
    for line in lines:
        line = line.split("#", 1)[0].strip().lower()
        if line:
            terms.add(" ".join(line.split()))
    return terms


def load_lexicon_file(path: str | Path) -> set[str]:
    """Read a lexicon file: one term or 'adjective noun' pair per line."""
    return _parse_lexicon_lines(Path(path).read_text(encoding="utf-8").splitlines())


def _load_asset_lexicon(name: str) -> set[str]:
    text = resources.files("scenesmith.assets.lexicons").joinpath(name).read_text("utf-8")
    return _parse_lexicon_lines(text.splitlines())


@dataclass(frozen=True)
class Lexicons:
    """Triviality lexicons driving prompt classification.

    ``trivial_attributes`` holds plain adjectives and ``adjective noun``
    pairs deemed naive enough that the layout-to-image branch can render
    them; ``trivial_relations`` holds relation kinds the customization
    branch can handle on its own.
    """

    trivial_attributes: frozenset[str] = field(default_factory=frozenset)
    trivial_relations: frozenset[str] = field(default_factory=frozenset)

    @classmethod
    def default(cls) -> "Lexicons":
        return cls(
            trivial_attributes=frozenset(_load_asset_lexicon("trivial_attributes.txt")),
            trivial_relations=frozenset(_load_asset_lexicon("trivial_relations.txt")),
        )

    @classmethod
    def from_files(cls, attributes_path: str | Path, relations_path: str | Path) -> "Lexicons":
        return cls(
            trivial_attributes=frozenset(load_lexicon_file(attributes_path)),
            trivial_relations=frozenset(load_lexicon_file(relations_path)),
        )

    def attribute_is_trivial(self, value: str, noun: str) -> bool:
        value = value.lower().strip()
        pair = f"{value} {noun.lower().strip()}"
        return value in self.trivial_attributes or pair in self.trivial_attributes

    def relation_is_trivial(self, kind: str) -> bool:
        return kind.lower() in self.trivial_relations
