"""Rule-based post-OCR text correction for retail bills.

Pipeline order is fixed: whitespace and non-printable cleanup, per-token
contextual character substitution, per-token keyword repair, then per-line
currency and date normalization. Every applied rule is recorded so a
correction run can be replayed and audited.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .distance import edit_distance

__all__ = [
    "CorrectionRuleSet",
    "CorrectedText",
    "clean_text",
    "context_substitute",
    "correct_keywords",
    "normalize_currency",
    "normalize_date",
    "correct",
    "replay",
    "load_rules",
]

# OCR confusion pairs: digit-looking letters and letter-looking digits.
_TO_LETTER = {"0": "O", "1": "I", "5": "S"}
_TO_DIGIT = {"O": "0", "I": "1", "S": "5"}

_MONTHS = {
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "may": 5, "jun": 6,
    "jul": 7, "aug": 8, "sep": 9, "oct": 10, "nov": 11, "dec": 12,
}

_ISO_DATE = re.compile(r"\b(\d{4})-(\d{1,2})-(\d{1,2})\b")
_TEXT_DATE = re.compile(
    r"\b(\d{1,2})\s+(jan|feb|mar|apr|may|jun|jul|aug|sep|oct|nov|dec)[a-z]*\.?\s+(\d{4})\b",
    re.IGNORECASE,
)
_DOTTED_DATE = re.compile(r"\b(\d{1,2})\.(\d{1,2})\.(\d{4})\b")


@dataclass(frozen=True)
class CorrectionRuleSet:
    """Substitution, keyword, currency and date rules with their bounds."""

    letter_substitutions: dict[str, str] = field(default_factory=lambda: dict(_TO_LETTER))
    digit_substitutions: dict[str, str] = field(default_factory=lambda: dict(_TO_DIGIT))
    keywords: tuple[str, ...] = ("Total", "Invoice", "Subtotal", "Discount", "Receipt")
    currency_markers: tuple[str, ...] = ("RM", "Rs.", "INR", "USD")
    keyword_distance: int = 1
    min_keyword_length: int = 4

    def __post_init__(self) -> None:
        if not self.keywords:
            raise ValueError("keyword list must be non-empty")
        if self.keyword_distance < 0:
            raise ValueError("keyword distance bound must be >= 0")


@dataclass(frozen=True)
class CorrectedText:
    """Corrected text plus the ordered (rule id, position) audit trail."""

    text: str
    applied_rules: tuple[tuple[str, int], ...]


def clean_text(s: str) -> str:
    """Strip non-printable characters, collapse space/tab runs, trim each line.

    Characters below U+0020 other than newline, plus U+007F, are removed.
    """
    kept = []
    for ch in s:
        if ch == "\n" or not (ord(ch) < 0x20 or ord(ch) == 0x7F):
            kept.append(ch)
    lines = "".join(kept).split("\n")
    return "\n".join(re.sub(r"[ \t]+", " ", line).strip() for line in lines)


def _alnum_counts(token: str) -> tuple[int, int]:
    letters = sum(ch.isalpha() for ch in token)
    digits = sum(ch.isdigit() for ch in token)
    return letters, digits


def context_substitute(token: str, rules: CorrectionRuleSet | None = None) -> str:
    """Fix confusable characters by token context.

    Letter-majority tokens get digits turned into letters (0->O, 1->I, 5->S);
    digit-majority tokens the reverse. Majority is judged over the token's
    alphanumeric characters; ties leave the token unchanged.
    """
    rules = rules or CorrectionRuleSet()
    letters, digits = _alnum_counts(token)
    if letters > digits:
        table = rules.letter_substitutions
    elif digits > letters:
        table = rules.digit_substitutions
    else:
        return token
    return "".join(table.get(ch, ch) for ch in token)


def _split_punct(token: str) -> tuple[str, str, str]:
    """Split a token into leading punctuation, alphanumeric core, trailing punctuation."""
    start = 0
    end = len(token)
    while start < end and not token[start].isalnum():
        start += 1
    while end > start and not token[end - 1].isalnum():
        end -= 1
    return token[:start], token[start:end], token[end:]


def _match_casing(replacement: str, original: str) -> str:
    if original.isupper() and len(original) > 1:
        return replacement.upper()
    if original[:1].isupper():
        return replacement.capitalize()
    if original.islower():
        return replacement.lower()
    return replacement


def correct_keywords(token: str, rules: CorrectionRuleSet | None = None) -> str:
    """Snap near-miss tokens onto retail keywords.

    The token core (surrounding punctuation preserved) must be at least
    `min_keyword_length` long and within `keyword_distance` case-insensitive
    edits of a keyword; the nearest keyword wins, ties go to list order.
    """
    rules = rules or CorrectionRuleSet()
    head, core, tail = _split_punct(token)
    if len(core) < rules.min_keyword_length:
        return token
    lowered = core.lower()
    best: tuple[int, int] | None = None  # (distance, keyword index)
    for idx, keyword in enumerate(rules.keywords):
        d = edit_distance(lowered, keyword.lower())
        if d <= rules.keyword_distance and (best is None or d < best[0]):
            best = (d, idx)
    if best is None:
        return token
    return head + _match_casing(rules.keywords[best[1]], core) + tail


def _currency_patterns(markers: tuple[str, ...]) -> list[tuple[re.Pattern, str]]:
    patterns: list[tuple[re.Pattern, str]] = []
    plain = [m for m in markers if not m.endswith(".")]
    for marker in (m[:-1] for m in markers if m.endswith(".")):
        # canonicalize: optional dot, optional space, then an amount
        patterns.append(
            (re.compile(rf"\b{re.escape(marker)}\.?\s*(?=\d)"), f"{marker}. ")
        )
    if plain:
        alt = "|".join(re.escape(m) for m in plain)
        patterns.append((re.compile(rf"\b({alt})(?=\d)"), r"\1 "))
        patterns.append((re.compile(rf"(\d)({alt})\b"), r"\1 \2"))
    return patterns


def normalize_currency(line: str, rules: CorrectionRuleSet | None = None) -> str:
    """Insert the separating space between currency markers and amounts;
    canonicalize dotted markers (Rs -> Rs.). Amount digits are untouched."""
    rules = rules or CorrectionRuleSet()
    for pattern, repl in _currency_patterns(rules.currency_markers):
        line = pattern.sub(repl, line)
    return line


def _valid_dmy(day: int, month: int, year: int) -> bool:
    return 1 <= day <= 31 and 1 <= month <= 12 and year >= 1


def _fmt(day: int, month: int, year: int) -> str:
    return f"{day:02d}/{month:02d}/{year:04d}"


def normalize_date(line: str) -> str:
    """Rewrite recognized date forms to DD/MM/YYYY; leave anything ambiguous alone.

    Handled forms: YYYY-MM-DD, "D Mon YYYY" with English month names, D.M.YYYY.
    """

    def iso(m: re.Match) -> str:
        year, month, day = int(m.group(1)), int(m.group(2)), int(m.group(3))
        return _fmt(day, month, year) if _valid_dmy(day, month, year) else m.group(0)

    def text(m: re.Match) -> str:
        day, year = int(m.group(1)), int(m.group(3))
        month = _MONTHS[m.group(2).lower()]
        return _fmt(day, month, year) if _valid_dmy(day, month, year) else m.group(0)

    def dotted(m: re.Match) -> str:
        day, month, year = int(m.group(1)), int(m.group(2)), int(m.group(3))
        return _fmt(day, month, year) if _valid_dmy(day, month, year) else m.group(0)

    line = _ISO_DATE.sub(iso, line)
    line = _TEXT_DATE.sub(text, line)
    return _DOTTED_DATE.sub(dotted, line)


def correct(text: str, rules: CorrectionRuleSet | None = None) -> CorrectedText:
    """Run the full correction pipeline and record which rules fired where.

    Positions in the audit trail are global token indices for token rules and
    line indices for line rules, counted on the cleaned text.
    """
    rules = rules or CorrectionRuleSet()
    applied: list[tuple[str, int]] = []

    cleaned = clean_text(text)
    if cleaned != text:
        applied.append(("clean", 0))

    lines = [line.split(" ") if line else [] for line in cleaned.split("\n")]

    token_index = 0
    for tokens in lines:
        for i, token in enumerate(tokens):
            new = context_substitute(token, rules)
            if new != token:
                applied.append(("substitute", token_index))
                tokens[i] = new
            token_index += 1

    token_index = 0
    for tokens in lines:
        for i, token in enumerate(tokens):
            new = correct_keywords(token, rules)
            if new != token:
                applied.append((f"keyword:{_split_punct(new)[1]}", token_index))
                tokens[i] = new
            token_index += 1

    out_lines = [" ".join(tokens) for tokens in lines]
    for li, line in enumerate(out_lines):
        new = normalize_currency(line, rules)
        if new != line:
            applied.append(("currency", li))
            out_lines[li] = new
    for li, line in enumerate(out_lines):
        new = normalize_date(line)
        if new != line:
            applied.append(("date", li))
            out_lines[li] = new

    return CorrectedText(text="\n".join(out_lines), applied_rules=tuple(applied))


def replay(text: str, applied_rules: tuple[tuple[str, int], ...], rules: CorrectionRuleSet | None = None) -> str:
    """Re-apply an audit trail to the original input; reproduces `correct(...).text`."""
    rules = rules or CorrectionRuleSet()
    current = text
    for rule_id, pos in applied_rules:
        if rule_id == "clean":
            current = clean_text(current)
            continue
        if rule_id in ("currency", "date"):
            out_lines = current.split("\n")
            if rule_id == "currency":
                out_lines[pos] = normalize_currency(out_lines[pos], rules)
            else:
                out_lines[pos] = normalize_date(out_lines[pos])
            current = "\n".join(out_lines)
            continue
        # token-scoped rule
        lines = [line.split(" ") if line else [] for line in current.split("\n")]
        idx = 0
        for tokens in lines:
            for i in range(len(tokens)):
                if idx == pos:
                    if rule_id == "substitute":
                        tokens[i] = context_substitute(tokens[i], rules)
                    else:
                        tokens[i] = correct_keywords(tokens[i], rules)
                idx += 1
        current = "\n".join(" ".join(tokens) for tokens in lines)
    return current


def load_rules(path: str | Path) -> CorrectionRuleSet:
    """Load keyword/currency/bound overrides from a plain key=value file."""
    overrides: dict[str, object] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "keywords":
            overrides["keywords"] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key == "currency_markers":
            overrides["currency_markers"] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key == "keyword_distance":
            overrides["keyword_distance"] = int(value)
        elif key == "min_keyword_length":
            overrides["min_keyword_length"] = int(value)
        else:
            raise ValueError(f"unknown rule key {key!r}")
    return CorrectionRuleSet(**overrides)  # type: ignore[arg-type]
