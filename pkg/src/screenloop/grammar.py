"""Grammar-based recognition of high-variation concept mentions.

Rules live in a plain-text file so the lexicon can be extended between
annotation rounds without code changes. Matching is leftmost-longest and
non-overlapping; phrases are normalized (lowercase, hyphens as spaces,
punctuation stripped, whitespace collapsed) for counting.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources

TOKEN_RE = re.compile(r"[a-z0-9]+")

DEFAULT_RULES_RESOURCE = "long_covid.rules"


class GrammarError(ValueError):
    """Raised for rule-file syntax or reference errors."""


def tokenize(text: str) -> list[tuple[str, int, int]]:
    """Lowercased alphanumeric tokens with (token, start, end) char spans."""
    return [(m.group(0), m.start(), m.end()) for m in TOKEN_RE.finditer(text.lower())]


def normalize(text: str) -> str:
    """Canonical phrase form: lowercase tokens joined by single spaces."""
    return " ".join(tok for tok, _, _ in tokenize(text))


@dataclass(frozen=True)
class Mention:
    doc_id: str | None
    field: str | None
    char_start: int
    char_end: int
    surface: str
    normalized: str
    rule: str


@dataclass(frozen=True)
class Slot:
    class_name: str
    optional: bool


class GrammarRuleSet:
    """Compiled token classes and rules ready for matching."""

    def __init__(
        self,
        token_classes: dict[str, list[tuple[str, ...]]],
        rules: dict[str, list[Slot]],
        provenance: dict[str, list[str]],
    ):
        self.token_classes = token_classes
        self.rules = rules
        self.provenance = provenance  # class name -> per-alternative source tag

    def match_rule(self, rule_name: str, tokens: list[str], start: int) -> int | None:
        """Longest end index (exclusive) for a rule match at ``start``."""
        positions = {start}
        for slot in self.rules[rule_name]:
            nxt = set(positions) if slot.optional else set()
            alts = self.token_classes[slot.class_name]
            for pos in positions:
                for alt in alts:
                    end = pos + len(alt)
                    if end <= len(tokens) and tuple(tokens[pos:end]) == alt:
                        nxt.add(end)
            positions = nxt
            if not positions:
                return None
        best = max(positions)
        return best if best > start else None

    def expansions(self, max_per_rule: int = 10000) -> dict[str, list[str]]:
        """Enumerate every full phrase each rule can match (for auditing)."""
        out: dict[str, list[str]] = {}
        for name, slots in self.rules.items():
            phrases: list[tuple[str, ...]] = [()]
            for slot in slots:
                alts = self.token_classes[slot.class_name]
                nxt = [p + a for p in phrases for a in alts]
                if slot.optional:
                    nxt.extend(phrases)
                phrases = nxt
                if len(phrases) > max_per_rule:
                    raise GrammarError(f"rule {name}: too many expansions")
            out[name] = sorted({" ".join(p) for p in phrases if p})
        return out


_CLASS_RE = re.compile(r"^class\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+)$")
_RULE_RE = re.compile(r"^rule\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+)$")


def _strip_comment(line: str) -> str:
    # '#' starts a comment unless inside quotes
    out = []
    in_quote = False
    for ch in line:
        if ch == '"':
            in_quote = not in_quote
        if ch == "#" and not in_quote:
            break
        out.append(ch)
    return "".join(out).strip()


def compile_grammar_text(text: str, name: str = "<string>") -> GrammarRuleSet:
    """Compile rule-file text. See the bundled file for the syntax."""
    raw_classes: dict[str, list[str]] = {}  # value: quoted phrase or bare include
    raw_rules: dict[str, list[Slot]] = {}
    class_sources: dict[str, str] = {}
    current_source = "unspecified"

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        stripped = raw_line.strip()
        if stripped.startswith("#@ source:"):
            current_source = stripped[len("#@ source:"):].strip()
            continue
        line = _strip_comment(raw_line)
        if not line:
            continue
        m = _CLASS_RE.match(line)
        if m:
            cname, body = m.group(1), m.group(2)
            alts = [a.strip() for a in body.split("|")]
            if any(not a for a in alts):
                raise GrammarError(f"line {line_no}: empty alternative in class {cname}")
            raw_classes.setdefault(cname, []).extend(alts)
            class_sources[cname] = current_source
            continue
        m = _RULE_RE.match(line)
        if m:
            rname, body = m.group(1), m.group(2)
            slots = []
            for part in body.split():
                optional = part.endswith("?")
                ref = part[:-1] if optional else part
                slots.append(Slot(class_name=ref, optional=optional))
            if not slots:
                raise GrammarError(f"line {line_no}: empty rule {rname}")
            raw_rules[rname] = slots
            continue
        raise GrammarError(f"line {line_no}: cannot parse: {line!r}")

    # Resolve class includes (bare identifiers) with cycle detection.
    resolved: dict[str, list[tuple[str, ...]]] = {}
    provenance: dict[str, list[str]] = {}
    resolving: set[str] = set()

    def resolve(cname: str) -> list[tuple[str, ...]]:
        if cname in resolved:
            return resolved[cname]
        if cname in resolving:
            raise GrammarError(f"cycle in class includes at {cname}")
        if cname not in raw_classes:
            raise GrammarError(f"undefined class: {cname}")
        resolving.add(cname)
        alts: list[tuple[str, ...]] = []
        tags: list[str] = []
        for alt in raw_classes[cname]:
            if alt.startswith('"'):
                if not alt.endswith('"') or len(alt) < 2:
                    raise GrammarError(f"class {cname}: unterminated string {alt!r}")
                tokens = tuple(t for t, _, _ in tokenize(alt[1:-1]))
                if not tokens:
                    raise GrammarError(f"class {cname}: empty token sequence")
                alts.append(tokens)
                tags.append(class_sources.get(cname, "unspecified"))
            else:
                included = resolve(alt)
                alts.extend(included)
                tags.extend(provenance[alt])
        resolving.discard(cname)
        resolved[cname] = alts
        provenance[cname] = tags
        return alts

    for cname in raw_classes:
        resolve(cname)

    for rname, slots in raw_rules.items():
        for slot in slots:
            if slot.class_name not in resolved:
                raise GrammarError(
                    f"rule {rname}: undefined token class {slot.class_name}"
                )

    return GrammarRuleSet(resolved, raw_rules, provenance)


def compile_grammar(rule_file) -> GrammarRuleSet:
    with open(rule_file, encoding="utf-8") as fh:
        return compile_grammar_text(fh.read(), name=str(rule_file))


def default_rules() -> GrammarRuleSet:
    """The bundled Long Covid rule set."""
    text = (
        resources.files("screenloop.data")
        .joinpath(DEFAULT_RULES_RESOURCE)
        .read_text(encoding="utf-8")
    )
    return compile_grammar_text(text, name=DEFAULT_RULES_RESOURCE)


def find_mentions(
    text: str,
    rules: GrammarRuleSet,
    doc_id: str | None = None,
    field: str | None = None,
) -> list[Mention]:
    """Leftmost-longest non-overlapping matches over one text field."""
    spans = tokenize(text)
    tokens = [t for t, _, _ in spans]
    mentions: list[Mention] = []
    i = 0
    n = len(tokens)
    while i < n:
        best_end = None
        best_rule = None
        for rname in rules.rules:
            end = rules.match_rule(rname, tokens, i)
            if end is not None and (best_end is None or end > best_end):
                best_end, best_rule = end, rname
        if best_end is None:
            i += 1
            continue
        char_start = spans[i][1]
        char_end = spans[best_end - 1][2]
        surface = text[char_start:char_end]
        mentions.append(
            Mention(
                doc_id=doc_id,
                field=field,
                char_start=char_start,
                char_end=char_end,
                surface=surface,
                normalized=" ".join(tokens[i:best_end]),
                rule=best_rule,
            )
        )
        i = best_end
    return mentions


def doc_mentions(doc, rules: GrammarRuleSet) -> list[Mention]:
    """All mentions for one document across title, abstract and full text."""
    mentions = find_mentions(doc.title, rules, doc_id=doc.id, field="title")
    if doc.abstract:
        mentions += find_mentions(doc.abstract, rules, doc_id=doc.id, field="abstract")
    if doc.full_text:
        mentions += find_mentions(doc.full_text, rules, doc_id=doc.id, field="full_text")
    return mentions


NAMES_DIRECTLY = "names long covid"
ALTERNATIVE_TERM = "alternative term"
NO_TERM = "no identifiable term"

DIRECT_PHRASE = "long covid"


@dataclass
class TermFrequencyReport:
    counts: list[tuple[str, int]]  # descending count, ties by phrase
    doc_status: dict[str, str]
    zipf_points: list[tuple[int, float]]  # (rank, log10 frequency)


def term_frequency_report(corpus, rules: GrammarRuleSet) -> TermFrequencyReport:
    """Ranked normalized-phrase counts plus per-document naming status."""
    counter: Counter[str] = Counter()
    doc_status: dict[str, str] = {}
    for doc in corpus:
        mentions = doc_mentions(doc, rules)
        counter.update(m.normalized for m in mentions)
        phrases = {m.normalized for m in mentions}
        if DIRECT_PHRASE in phrases:
            doc_status[doc.id] = NAMES_DIRECTLY
        elif phrases:
            doc_status[doc.id] = ALTERNATIVE_TERM
        else:
            doc_status[doc.id] = NO_TERM
    counts = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    zipf = [(rank, math.log10(count)) for rank, (_, count) in enumerate(counts, start=1)]
    return TermFrequencyReport(counts=counts, doc_status=doc_status, zipf_points=zipf)
