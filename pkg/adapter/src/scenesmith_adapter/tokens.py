"""Character-span to token-index mapping for backend tokenizers.

The engine communicates word positions as character ranges into the
prompt; backends need token indices.  The reference tokenizer splits on
whitespace; a real backend substitutes its own offsets and reuses the
same overlap rule.
"""

from __future__ import annotations


def tokenize_with_offsets(text: str) -> list[tuple[str, int, int]]:
    """Whitespace tokens with [start, end) character offsets."""
    tokens: list[tuple[str, int, int]] = []
    index = 0
    length = len(text)
    while index < length:
        while index < length and text[index].isspace():
            index += 1
        if index >= length:
            break
        start = index
        while index < length and not text[index].isspace():
            index += 1
        tokens.append((text[start:index], start, index))
    return tokens


def span_to_token_indices(text: str, start: int, end: int) -> list[int]:
    """Token indices overlapping the character range [start, end).

    Total on non-empty text: a span falling entirely inside whitespace
    maps to the nearest following token (or the last token at the end).
    """
    if not text.strip():
        return []
    tokens = tokenize_with_offsets(text)
    start = max(0, min(start, len(text)))
    end = max(start, min(end, len(text)))
    overlapping = [
        i for i, (_, tok_start, tok_end) in enumerate(tokens) if tok_start < end and tok_end > start
    ]
    if overlapping:
        return overlapping
    for i, (_, tok_start, _) in enumerate(tokens):
        if tok_start >= end:
            return [i]
    return [len(tokens) - 1]
