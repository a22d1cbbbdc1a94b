"""Verb lexicon ingestion and positive-constraint generation.

Parses verb class resources (VerbNet-style XML, FrameNet lexical-unit XML,
or a plain line-oriented class map) into a uniform verb -> classes mapping,
and derives the set of unordered same-class verb pairs used as positive
training constraints.
"""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

logger = logging.getLogger(__name__)

LEXICON_FORMATS = ("verbnet-xml", "framenet-lu", "generic-class-map")


class LexiconError(Exception):
    """Raised for unparseable or empty lexicon inputs."""


class LexiconParseError(LexiconError):
    """Malformed lexicon file; message carries a line/element locus."""


@dataclass(frozen=True)
class VerbPair:
    """Unordered verb pair; canonical form keeps members lexicographically sorted."""

    first: str
    second: str
    label: str = "positive"

    def __post_init__(self):
        if self.first == self.second:
            raise ValueError(f"degenerate pair ({self.first!r}, {self.second!r})")

    def canonical(self) -> "VerbPair":
        a, b = sorted((self.first, self.second))
        if (a, b) == (self.first, self.second):
            return self
        return VerbPair(a, b, self.label)

    @property
    def key(self) -> tuple[str, str]:
        return tuple(sorted((self.first, self.second)))


@dataclass
class VerbLexicon:
    """Mapping from lowercased verb lemma to the set of class ids it belongs to."""

    entries: dict[str, set[str]]
    resource_name: str = "unknown"
    language: str = "en"

    def classes(self) -> dict[str, set[str]]:
        """Invert entries into class id -> member lemmas."""
        out: dict[str, set[str]] = {}
        for lemma, cids in self.entries.items():
            for cid in cids:
                out.setdefault(cid, set()).add(lemma)
        return out

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class ConstraintSet:
    """Deduplicated set of positive verb pairs, keyed by canonical unordered form."""

    pairs: set[VerbPair]
    source: str = "unknown"

    def __post_init__(self):
        self.pairs = {p.canonical() for p in self.pairs}

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, pair) -> bool:
        if isinstance(pair, VerbPair):
            pair = pair.key
        return VerbPair(*sorted(pair)) in self.pairs if pair[0] != pair[1] else False

    def sorted_pairs(self) -> list[VerbPair]:
        return sorted(self.pairs, key=lambda p: (p.first, p.second))

    def lemmas(self) -> set[str]:
        out = set()
        for p in self.pairs:
            out.add(p.first)
            out.add(p.second)
        return out

    def save_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for p in self.sorted_pairs():
                fh.write(f"{p.first}\t{p.second}\n")

    @classmethod
    def load_tsv(cls, path, source: str = "unknown") -> "ConstraintSet":
        pairs = set()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line:
                    continue
                cols = line.split("\t")
                if len(cols) != 2:
                    raise LexiconParseError(f"{path}:{lineno}: expected 2 columns, got {len(cols)}")
                pairs.add(VerbPair(cols[0], cols[1]))
        return cls(pairs=pairs, source=source)


_SENSE_SUFFIX = re.compile(r"(?:\.(?:[a-z]{1,4}|\d+)|_\d+)$")


def normalize_lemma(raw: str) -> str:
    """Lowercase and strip trailing sense/POS suffixes like 'run.v' or 'run_02'.

    Underscores between words ('break_down') are kept: they join multiword lemmas.
    """
    lemma = raw.strip().lower()
    m = _SENSE_SUFFIX.search(lemma)
    if m and m.start() > 0:
        lemma = lemma[: m.start()]
    return lemma


def load_lexicon(path, format: str, language: str = "en", resource_name: str | None = None) -> VerbLexicon:
    """Parse a lexicon file into a VerbLexicon.

    Formats: 'verbnet-xml' (a VerbNet class file or a directory of them,
    subclasses flattened into their top-level class), 'framenet-lu' (a
    lexical-unit index XML; non-verb lexical units are dropped), and
    'generic-class-map' (one class per line: ``class_id: lemma lemma ...``).
    """
    path = Path(path)
    if not path.exists():
        raise LexiconError(f"lexicon path does not exist: {path}")
    if format not in LEXICON_FORMATS:
        raise LexiconError(f"unknown lexicon format {format!r}; expected one of {LEXICON_FORMATS}")
    if resource_name is None:
        resource_name = path.stem

    if format == "generic-class-map":
        entries = _parse_class_map(path)
    elif format == "verbnet-xml":
        entries = _parse_verbnet(path)
    else:
        entries = _parse_framenet_lu(path)

    if not entries:
        raise LexiconError(f"no verbs found in {path} (format {format})")
    return VerbLexicon(entries=entries, resource_name=resource_name, language=language)


def _parse_class_map(path: Path) -> dict[str, set[str]]:
    entries: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise LexiconParseError(f"{path}:{lineno}: missing ':' class separator")
            class_id, _, members = line.partition(":")
            class_id = class_id.strip()
            if not class_id:
                raise LexiconParseError(f"{path}:{lineno}: empty class id")
            lemmas = {normalize_lemma(tok) for tok in members.split()} - {""}
            if not lemmas:
                logger.warning("%s:%d: class %r has no members, dropped", path, lineno, class_id)
                continue
            for lemma in lemmas:
                entries.setdefault(lemma, set()).add(class_id)
    return entries


def _top_level_class_id(class_id: str) -> str:
    """Flatten a VerbNet subclass id ('free-80-1-1') into its main class ('free-80')."""
    m = re.match(r"^(.*?-\d+)(?:-\d+)*$", class_id)
    return m.group(1) if m else class_id


def _parse_verbnet(path: Path) -> dict[str, set[str]]:
    files = sorted(path.glob("*.xml")) if path.is_dir() else [path]
    entries: dict[str, set[str]] = {}
    for f in files:
        try:
            root = ET.parse(f).getroot()
        except ET.ParseError as exc:
            raise LexiconParseError(f"{f}: {exc}") from exc
        for cls in root.iter("VNCLASS"):
            _collect_vnclass(cls, entries, f)
        if root.tag == "VNSUBCLASS":
            _collect_vnclass(root, entries, f)
    return entries


def _collect_vnclass(cls_elem, entries: dict[str, set[str]], f: Path) -> None:
    cid = cls_elem.get("ID")
    if cid is None:
        raise LexiconParseError(f"{f}: <{cls_elem.tag}> without ID attribute")
    top = _top_level_class_id(cid)
    # subclass members are flattened into the top-level class
    for member in cls_elem.iter("MEMBER"):
        name = member.get("name")
        if not name:
            raise LexiconParseError(f"{f}: <MEMBER> without name in class {cid}")
        lemma = normalize_lemma(name)
        if lemma:
            entries.setdefault(lemma, set()).add(top)


def _parse_framenet_lu(path: Path) -> dict[str, set[str]]:
    try:
        root = ET.parse(path).getroot()
    except ET.ParseError as exc:
        raise LexiconParseError(f"{path}: {exc}") from exc
    entries: dict[str, set[str]] = {}
    for lu in root.iter():
        if not lu.tag.endswith("lu"):
            continue
        name = lu.get("name")
        frame = lu.get("frameName") or lu.get("frame")
        if name is None or frame is None:
            continue
        # only verb lexical units; FrameNet names carry a '.pos' suffix
        if not name.endswith(".v"):
            continue
        lemma = normalize_lemma(name)
        if lemma:
            entries.setdefault(lemma, set()).add(frame)
    return entries


def generate_positive_pairs(lex: VerbLexicon) -> ConstraintSet:
    """All unique unordered same-class verb pairs, deduplicated across classes."""
    if not lex.entries:
        raise LexiconError("cannot generate pairs from an empty lexicon")
    pairs: set[VerbPair] = set()
    for members in lex.classes().values():
        for a, b in combinations(sorted(members), 2):
            pairs.add(VerbPair(a, b))
    return ConstraintSet(pairs=pairs, source=f"{lex.resource_name}:{lex.language}")


@dataclass
class LexiconStats:
    class_count: int
    lemma_count: int
    member_histogram: dict[int, int] = field(default_factory=dict)
    pair_forecast: int = 0

    def format(self) -> str:
        lines = [
            f"classes: {self.class_count}",
            f"lemmas: {self.lemma_count}",
            f"unique positive pairs: {self.pair_forecast}",
            "class size histogram:",
        ]
        for size in sorted(self.member_histogram):
            lines.append(f"  {size}: {self.member_histogram[size]}")
        return "\n".join(lines)


def lexicon_stats(lex: VerbLexicon) -> LexiconStats:
    """Class/member statistics plus an exact forecast of unique pair count."""
    classes = lex.classes()
    hist: dict[int, int] = {}
    for members in classes.values():
        hist[len(members)] = hist.get(len(members), 0) + 1
    seen: set[tuple[str, str]] = set()
    for members in classes.values():
        for a, b in combinations(sorted(members), 2):
            seen.add((a, b))
    return LexiconStats(
        class_count=len(classes),
        lemma_count=len(lex.entries),
        member_histogram=hist,
        pair_forecast=len(seen),
    )
