"""Hash-chained append-only ownership ledger.

Stands in for the blockchain transaction store: each NDJSON record carries
the SHA-256 of its predecessor's exact line bytes, and a sidecar head file
pins the digest of the final line so edits anywhere in the store, including
the last record, are detectable. Competing claims over the same fingerprint
resolve to the earliest (lowest-seq) record.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import phash
from .errors import ClockSkewError, CorruptionError, InvalidInputError

GENESIS_DIGEST = "0" * 64

_P_HEX = re.compile(r"^[0-9a-f]{16}$")
_DIGEST = re.compile(r"^[0-9a-f]{64}$")
_TIMESTAMP = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}Z$")


@dataclass(frozen=True)
class LedgerRecord:
    seq: int
    timestamp: str
    owner_id: str
    p_hex: str
    prev_digest: str
    note: str = ""

    def canonical_line(self) -> bytes:
        """The exact bytes digested by the successor record (no newline)."""
        return json.dumps(
            {
                "seq": self.seq,
                "timestamp": self.timestamp,
                "owner_id": self.owner_id,
                "p_hex": self.p_hex,
                "prev_digest": self.prev_digest,
                "note": self.note,
            },
            separators=(",", ":"),
            ensure_ascii=False,
        ).encode("utf-8")


def fingerprint_bind(trigger_img: np.ndarray, owner_fp_img: np.ndarray) -> int:
    """XOR of the trigger image's and the owner fingerprint image's hashes."""
    return phash.xor(phash.phash_image(trigger_img), phash.phash_image(owner_fp_img))


def _line_digest(line: bytes) -> str:
    return hashlib.sha256(line).hexdigest()


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class OwnershipLedger:
    """One NDJSON file plus a `<path>.head` sidecar holding the tail digest."""

    def __init__(self, path: str | os.PathLike):
        self.path = Path(path)
        self.head_path = Path(str(path) + ".head")

    # -- reading ------------------------------------------------------------

    def _raw_lines(self) -> list[bytes]:
        if not self.path.exists():
            return []
        data = self.path.read_bytes()
        if not data:
            return []
        return data.split(b"\n")[:-1] if data.endswith(b"\n") else data.split(b"\n")

    def records(self) -> list[LedgerRecord]:
        """Parse every record; raises CorruptionError on malformed lines."""
        out = []
        for i, line in enumerate(self._raw_lines()):
            out.append(self._parse_line(i + 1, line))
        return out

    @staticmethod
    def _parse_line(seq: int, line: bytes) -> LedgerRecord:
        try:
            obj = json.loads(line.decode("utf-8"))
            record = LedgerRecord(
                seq=obj["seq"],
                timestamp=obj["timestamp"],
                owner_id=obj["owner_id"],
                p_hex=obj["p_hex"],
                prev_digest=obj["prev_digest"],
                note=obj.get("note", ""),
            )
        except (ValueError, KeyError, TypeError, UnicodeDecodeError) as exc:
            raise CorruptionError(f"record {seq}: unparseable line ({exc})") from exc
        if record.seq != seq:
            raise CorruptionError(f"record {seq}: seq field says {record.seq}")
        if not isinstance(record.p_hex, str) or not _P_HEX.match(record.p_hex):
            raise CorruptionError(f"record {seq}: malformed p_hex")
        if not isinstance(record.prev_digest, str) or not _DIGEST.match(record.prev_digest):
            raise CorruptionError(f"record {seq}: malformed prev_digest")
        if not isinstance(record.timestamp, str) or not _TIMESTAMP.match(record.timestamp):
            raise CorruptionError(f"record {seq}: malformed timestamp")
        return record

    # -- verification ---------------------------------------------------------

    def verify_chain(self) -> int | None:
        """Return None when intact, else the seq of the first bad record.

        Checks every record's well-formedness, its prev_digest against the
        recomputed digest of its predecessor's line bytes, and the final
        line against the sidecar head digest.
        """
        lines = self._raw_lines()
        if not lines:
            # a head sidecar without records means the store was emptied
            return 1 if self.head_path.exists() else None
        prev = GENESIS_DIGEST
        for i, line in enumerate(lines):
            seq = i + 1
            try:
                record = self._parse_line(seq, line)
            except CorruptionError:
                return seq
            if record.prev_digest != prev:
                return seq
            prev = _line_digest(line)
        if not self.head_path.exists():
            return len(lines)
        head = self.head_path.read_text(encoding="utf-8").strip()
        if head != prev:
            return len(lines)
        return None

    # -- writing --------------------------------------------------------------

    def append(self, owner_id: str, p: int | str, note: str = "") -> LedgerRecord:
        """Append one record and fsync both files before returning."""
        p_hex = phash.to_hex(p) if isinstance(p, int) else p
        if not _P_HEX.match(p_hex):
            raise InvalidInputError(f"p must be 16 lowercase hex characters, got {p_hex!r}")
        bad = self.verify_chain()
        if bad is not None:
            raise CorruptionError(f"ledger fails chain verification at record {bad}")

        lines = self._raw_lines()
        prev = _line_digest(lines[-1]) if lines else GENESIS_DIGEST
        now = _utc_now()
        if lines:
            last = self._parse_line(len(lines), lines[-1])
            if now < last.timestamp:
                raise ClockSkewError(
                    f"clock {now} is earlier than last record at {last.timestamp}"
                )
        record = LedgerRecord(
            seq=len(lines) + 1,
            timestamp=now,
            owner_id=owner_id,
            p_hex=p_hex,
            prev_digest=prev,
            note=note,
        )
        line = record.canonical_line()
        with open(self.path, "ab") as fh:
            fh.write(line + b"\n")
            fh.flush()
            os.fsync(fh.fileno())
        with open(self.head_path, "wb") as fh:
            fh.write((_line_digest(line) + "\n").encode("ascii"))
            fh.flush()
            os.fsync(fh.fileno())
        return record

    # -- ownership queries ------------------------------------------------------

    def earliest_claim(self, p: int | str) -> LedgerRecord | None:
        """Lowest-seq record storing this fingerprint, or None."""
        p_hex = phash.to_hex(p) if isinstance(p, int) else p
        bad = self.verify_chain()
        if bad is not None:
            raise CorruptionError(f"ledger fails chain verification at record {bad}")
        for record in self.records():
            if record.p_hex == p_hex:
                return record
        return None

    def verify_ownership(
        self, trigger_img: np.ndarray, owner_fp_img: np.ndarray
    ) -> LedgerRecord | None:
        """Recompute the bound fingerprint and look up the earliest claim."""
        return self.earliest_claim(fingerprint_bind(trigger_img, owner_fp_img))
