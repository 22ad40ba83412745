"""Troubleshooting-manual corpus handling.

Parses manuals into procedure records, renders them to a canonical plain-text
form, splits documents into indexed chunks, applies knowledge-base ablations,
and generates synthetic corpora for offline testing.
"""

from __future__ import annotations

import string
import xml.etree.ElementTree as ET
from dataclasses import dataclass, replace
from enum import Enum
from random import Random
from typing import Iterable, Optional, Sequence

from .errors import MalformedDocument, MissingField, UnknownProcedure

RECORD_SEPARATOR = "---\n"

_SYMPTOM_PREFIX = "SYMPTOM:"
_CAUSE_PREFIX = "CAUSE:"
_ACTION_PREFIX = "ACTION:"


@dataclass(frozen=True)
class Procedure:
    """One manual record: a failure symptom paired with its resolution."""

    procedure_id: str
    document_id: str
    failure_symptom: str
    possible_cause: str
    troubleshooting_action: str


@dataclass(frozen=True)
class Document:
    """An ordered collection of procedure records plus its canonical text."""

    document_id: str
    title: str
    raw_text: str
    procedures: tuple[Procedure, ...]

    @classmethod
    def assemble(
        cls,
        document_id: str,
        title: str,
        procedures: Sequence[Procedure],
    ) -> "Document":
        """Build a Document, deriving raw_text from the records."""
        procs = tuple(procedures)
        return cls(
            document_id=document_id,
            title=title,
            raw_text=render_document_text(procs),
            procedures=procs,
        )


@dataclass(frozen=True)
class Chunk:
    """A non-overlapping span of a document's raw text; the retrieval unit."""

    chunk_id: str
    document_id: str
    ordinal: int
    char_start: int
    char_end: int
    text: str


class AblationKind(str, Enum):
    FULL = "full"
    NO_RESPONSE = "no_response"
    NO_ENTRY = "no_entry"
    NO_KB = "no_kb"


@dataclass(frozen=True)
class KBConfiguration:
    """Which knowledge-base content state to build.

    no_response keeps the target procedure's symptom but drops its action;
    no_entry removes the target record entirely; no_kb empties the corpus.
    """

    kind: AblationKind
    target_procedure_id: Optional[str] = None

    def __post_init__(self) -> None:
        needs_target = self.kind in (AblationKind.NO_RESPONSE, AblationKind.NO_ENTRY)
        if needs_target and not self.target_procedure_id:
            raise ValueError(f"{self.kind.value} requires target_procedure_id")

    def key(self) -> str:
        if self.target_procedure_id:
            return f"{self.kind.value}:{self.target_procedure_id}"
        return self.kind.value


@dataclass(frozen=True)
class FieldSpans:
    """Character spans of one record's fields within the document raw_text."""

    procedure_id: str
    symptom: tuple[int, int]
    cause: Optional[tuple[int, int]]
    action: Optional[tuple[int, int]]


# --- rendering --------------------------------------------------------------


def render_procedure(proc: Procedure) -> str:
    """Render one record in the canonical plain form (trailing newline).

    Empty cause/action fields are omitted so ablated records render cleanly.
    """
    lines = [f"{_SYMPTOM_PREFIX} {proc.failure_symptom}"]
    if proc.possible_cause:
        lines.append(f"{_CAUSE_PREFIX} {proc.possible_cause}")
    if proc.troubleshooting_action:
        lines.append(f"{_ACTION_PREFIX} {proc.troubleshooting_action}")
    return "\n".join(lines) + "\n"


def render_document_text(procedures: Sequence[Procedure]) -> str:
    """Concatenate rendered records with the record separator."""
    return RECORD_SEPARATOR.join(render_procedure(p) for p in procedures)


def document_field_spans(doc: Document) -> tuple[FieldSpans, ...]:
    """Locate every record field inside doc.raw_text.

    Offsets mirror render_document_text exactly; the returned spans index
    the field *values* (prefix and separator excluded).
    """
    spans = []
    pos = 0
    for i, proc in enumerate(doc.procedures):
        if i:
            pos += len(RECORD_SEPARATOR)
        symptom_start = pos + len(_SYMPTOM_PREFIX) + 1
        symptom = (symptom_start, symptom_start + len(proc.failure_symptom))
        pos = symptom[1] + 1  # newline
        cause = None
        if proc.possible_cause:
            start = pos + len(_CAUSE_PREFIX) + 1
            cause = (start, start + len(proc.possible_cause))
            pos = cause[1] + 1
        action = None
        if proc.troubleshooting_action:
            start = pos + len(_ACTION_PREFIX) + 1
            action = (start, start + len(proc.troubleshooting_action))
            pos = action[1] + 1
        spans.append(
            FieldSpans(
                procedure_id=proc.procedure_id,
                symptom=symptom,
                cause=cause,
                action=action,
            )
        )
    return tuple(spans)


def action_spans(corpus: Iterable[Document]) -> dict[str, tuple[str, int, int]]:
    """Map procedure_id -> (document_id, action_start, action_end) corpus-wide."""
    out: dict[str, tuple[str, int, int]] = {}
    for doc in corpus:
        for fs in document_field_spans(doc):
            if fs.action is not None:
                out[fs.procedure_id] = (doc.document_id, fs.action[0], fs.action[1])
    return out


def render_manual(doc: Document, format: str = "plain") -> bytes:
    """Serialize a Document back to manual file bytes ('plain' or 'xml')."""
    if format == "plain":
        return doc.raw_text.encode("utf-8")
    if format == "xml":
        root = ET.Element("manual", id=doc.document_id, title=doc.title)
        for proc in doc.procedures:
            rec = ET.SubElement(root, "procedure", id=proc.procedure_id)
            ET.SubElement(rec, "symptom").text = proc.failure_symptom
            if proc.possible_cause:
                ET.SubElement(rec, "cause").text = proc.possible_cause
            ET.SubElement(rec, "action").text = proc.troubleshooting_action
        return ET.tostring(root, encoding="utf-8", xml_declaration=True)
    raise ValueError(f"unknown manual format: {format!r}")


# --- parsing ----------------------------------------------------------------


def parse_manual(
    source: bytes,
    format: str = "xml",
    document_id: Optional[str] = None,
    title: Optional[str] = None,
) -> Document:
    """Parse manual file bytes into a Document.

    ``document_id``/``title`` override values found in the file; plain-format
    files carry neither, so callers typically pass the file stem.
    """
    if format == "xml":
        return _parse_xml(source, document_id, title)
    if format == "plain":
        return _parse_plain(source, document_id, title)
    raise ValueError(f"unknown manual format: {format!r}")


def _parse_xml(source: bytes, document_id: Optional[str], title: Optional[str]) -> Document:
    try:
        root = ET.fromstring(source)
    except ET.ParseError as exc:
        raise MalformedDocument(f"not well-formed XML: {exc}") from exc
    if root.tag != "manual":
        raise MalformedDocument(f"expected <manual> root, found <{root.tag}>")

    doc_id = document_id or root.get("id") or "manual"
    doc_title = title if title is not None else (root.get("title") or doc_id)

    procedures = []
    for ordinal, rec in enumerate(root.findall("procedure")):
        symptom = _xml_field(rec, "symptom", ordinal, required=True)
        cause = _xml_field(rec, "cause", ordinal, required=False)
        action = _xml_field(rec, "action", ordinal, required=True)
        proc_id = rec.get("id") or f"{doc_id}#{ordinal}"
        procedures.append(
            Procedure(
                procedure_id=proc_id,
                document_id=doc_id,
                failure_symptom=symptom,
                possible_cause=cause,
                troubleshooting_action=action,
            )
        )
    return Document.assemble(doc_id, doc_title, procedures)


def _xml_field(rec: ET.Element, tag: str, ordinal: int, required: bool) -> str:
    found = rec.findall(tag)
    if len(found) > 1:
        raise MalformedDocument(f"record {ordinal} has {len(found)} <{tag}> elements")
    value = (found[0].text or "").strip() if found else ""
    if required and not value:
        raise MissingField(f"record {ordinal} lacks a {tag}", record_ordinal=ordinal)
    return value


def _parse_plain(source: bytes, document_id: Optional[str], title: Optional[str]) -> Document:
    try:
        text = source.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedDocument(f"not valid UTF-8: {exc}") from exc

    doc_id = document_id or "manual"
    doc_title = title if title is not None else doc_id

    records: list[list[str]] = [[]]
    for line in text.splitlines():
        if line == "---":
            records.append([])
        else:
            records[-1].append(line)

    procedures = []
    ordinal = 0
    for block in records:
        fields = _parse_plain_record(block, ordinal)
        if fields is None:
            continue
        symptom, cause, action = fields
        procedures.append(
            Procedure(
                procedure_id=f"{doc_id}#{ordinal}",
                document_id=doc_id,
                failure_symptom=symptom,
                possible_cause=cause,
                troubleshooting_action=action,
            )
        )
        ordinal += 1
    return Document.assemble(doc_id, doc_title, procedures)


def _parse_plain_record(lines: list[str], ordinal: int) -> Optional[tuple[str, str, str]]:
    """Parse one separator-delimited block; None for an all-blank block."""
    fields: dict[str, list[str]] = {}
    current: Optional[str] = None
    for line in lines:
        matched = False
        for name, prefix in (
            ("symptom", _SYMPTOM_PREFIX),
            ("cause", _CAUSE_PREFIX),
            ("action", _ACTION_PREFIX),
        ):
            if line.startswith(prefix):
                if name in fields:
                    raise MalformedDocument(f"record {ordinal} repeats {prefix}")
                fields[name] = [line[len(prefix):].strip()]
                current = name
                matched = True
                break
        if matched:
            continue
        if current is not None:
            fields[current].append(line)
        elif line.strip():
            raise MalformedDocument(f"record {ordinal}: unexpected content {line!r}")

    if not fields:
        return None

    def joined(name: str) -> str:
        return "\n".join(fields.get(name, [])).strip()

    symptom, cause, action = joined("symptom"), joined("cause"), joined("action")
    if not symptom:
        raise MissingField(f"record {ordinal} lacks a symptom", record_ordinal=ordinal)
    if not action:
        raise MissingField(f"record {ordinal} lacks an action", record_ordinal=ordinal)
    return symptom, cause, action


# --- chunking ---------------------------------------------------------------


def chunk_document(doc: Document, chunk_size: int) -> list[Chunk]:
    """Split a document into non-overlapping chunks of at most chunk_size chars.

    Each chunk ends at the last whitespace boundary at or before the size
    limit; a single token longer than chunk_size is hard-cut.  Leading and
    trailing whitespace never enters a chunk, so the union of chunk spans
    covers exactly the non-whitespace characters of the document.
    """
    if chunk_size < 50:
        raise ValueError(f"chunk_size must be >= 50, got {chunk_size}")
    text = doc.raw_text
    n = len(text)
    chunks: list[Chunk] = []
    pos = 0
    while True:
        while pos < n and text[pos].isspace():
            pos += 1
        if pos >= n:
            break
        limit = pos + chunk_size
        if limit >= n:
            end = n
        elif text[limit].isspace():
            end = limit
        else:
            ws = _last_whitespace(text, pos, limit)
            end = ws if ws is not None else limit  # hard cut: one oversized token
        while end > pos and text[end - 1].isspace():
            end -= 1
        ordinal = len(chunks)
        chunks.append(
            Chunk(
                chunk_id=f"{doc.document_id}:{ordinal:05d}",
                document_id=doc.document_id,
                ordinal=ordinal,
                char_start=pos,
                char_end=end,
                text=text[pos:end],
            )
        )
        pos = end
    return chunks


def _last_whitespace(text: str, start: int, stop: int) -> Optional[int]:
    for i in range(stop - 1, start, -1):
        if text[i].isspace():
            return i
    return None


def chunk_corpus(corpus: Iterable[Document], chunk_size: int) -> list[Chunk]:
    out: list[Chunk] = []
    for doc in corpus:
        out.extend(chunk_document(doc, chunk_size))
    return out


# --- ablation ---------------------------------------------------------------


def apply_ablation(corpus: Sequence[Document], cfg: KBConfiguration) -> list[Document]:
    """Return a new corpus with the configured content removal applied.

    The input corpus is never modified; unaffected documents are returned
    as the same objects so their chunkings stay byte-identical.
    """
    if cfg.kind is AblationKind.FULL:
        return list(corpus)
    if cfg.kind is AblationKind.NO_KB:
        return []

    target = cfg.target_procedure_id
    out = []
    found = False
    for doc in corpus:
        if not any(p.procedure_id == target for p in doc.procedures):
            out.append(doc)
            continue
        found = True
        if cfg.kind is AblationKind.NO_RESPONSE:
            procs = tuple(
                replace(p, troubleshooting_action="") if p.procedure_id == target else p
                for p in doc.procedures
            )
        else:  # NO_ENTRY: drop the whole record
            procs = tuple(p for p in doc.procedures if p.procedure_id != target)
        out.append(Document.assemble(doc.document_id, doc.title, procs))
    if not found:
        raise UnknownProcedure(f"procedure {target!r} not in corpus")
    return out


# --- synthetic corpus -------------------------------------------------------

_COMPONENTS = [
    "feed pump", "booster compressor", "desalinator control panel",
    "main condenser", "fire prevention valve", "hydraulic actuator",
    "bilge separator", "fuel transfer pump", "cooling water circuit",
    "emergency generator", "steering gear unit", "air handling unit",
    "ballast control valve", "lubrication oil module", "exhaust gas fan",
]

_PARTS = [
    "accelerometer", "touch screen", "sealing ring", "filter cartridge",
    "relay board", "terminal block", "pressure switch", "flow sensor",
    "level transmitter", "solenoid coil",
]

# Shared across documents on purpose: real manuals repeat symptom phrasing,
# which is what makes retrieval hard.
_COMMON_SYMPTOM_PHRASES = [
    "the vibration values are not present on the console",
    "a loose or uneven connection is visible at the flange",
    "drips of fluid appear near the lower fittings",
    "the pressure reading stays below the minimum threshold",
    "the temperature alarm has been raised repeatedly",
    "the status indicator does not turn green after startup",
    "an error message is displayed on the control screen",
    "the unit does not start from the remote console",
]

_SYMPTOM_TEMPLATES = [
    "During operation of the {component}, {clause}",
    "When starting the {component}, {clause}",
    "While the {component} is running, {clause}",
    "After maintenance of the {component}, {clause}",
]

_SPECIFIC_CLAUSES = [
    "the {part} readout for circuit {num} fluctuates erratically",
    "the {part} output drops to zero within seconds",
    "audible knocking comes from the {part} housing",
    "the {part} reports intermittent communication faults",
]

_CAUSE_TEMPLATES = [
    "The signal cable from the {part} to the automation system is not properly connected or is damaged.",
    "The {part} is faulty.",
    "Residue has accumulated inside the {part}.",
    "The configured threshold for the {part} is incorrect.",
]

_ACTION_TEMPLATES = [
    "Check that the connection cable from the {part} to the automation system is correctly connected and not damaged. Restore if necessary.",
    "Replace the faulty {part}.",
    "Clean the {part} and verify that the readings return to the nominal range.",
    "Recalibrate the {part} and restart the {component} from the local panel.",
]


def _alpha_suffix(j: int) -> str:
    letters = string.ascii_uppercase
    if j < 26:
        return letters[j]
    return letters[j // 26 - 1] + letters[j % 26]


def generate_synthetic_corpus(
    n_documents: int,
    procedures_per_doc: int,
    seed: int,
) -> list[Document]:
    """Generate a deterministic corpus with overlapping symptom phrasing."""
    if n_documents < 1 or procedures_per_doc < 1:
        raise ValueError("n_documents and procedures_per_doc must be >= 1")
    rng = Random(seed)
    corpus = []
    for i in range(n_documents):
        doc_id = f"doc-{i + 1:03d}"
        component = rng.choice(_COMPONENTS)
        title = f"{component.capitalize()} troubleshooting manual"
        procedures = []
        for j in range(procedures_per_doc):
            part = rng.choice(_PARTS)
            if rng.random() < 0.6:
                clause = rng.choice(_COMMON_SYMPTOM_PHRASES)
            else:
                clause = rng.choice(_SPECIFIC_CLAUSES).format(
                    part=part, num=rng.randint(1, 9)
                )
            symptom = rng.choice(_SYMPTOM_TEMPLATES).format(
                component=component, clause=clause
            )
            cause = rng.choice(_CAUSE_TEMPLATES).format(part=part)
            act = rng.choice(_ACTION_TEMPLATES).format(part=part, component=component)
            procedures.append(
                Procedure(
                    procedure_id=f"{i + 1}-{_alpha_suffix(j)}",
                    document_id=doc_id,
                    failure_symptom=symptom,
                    possible_cause=cause,
                    troubleshooting_action=act,
                )
            )
        corpus.append(Document.assemble(doc_id, title, procedures))
    return corpus
