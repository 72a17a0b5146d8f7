"""Dataset loading and the 1:4 train/test split."""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import DuplicateQueryId, ParseError, TooFewRecords
from .executor import QueryRecord

REQUIRED_FIELDS = ("id", "query", "answer", "domain", "difficulty")


def load_dataset(path) -> list[QueryRecord]:
    """Read a JSONL dataset; one record per line, file order preserved."""
    records = []
    seen = set()
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, f"invalid JSON: {exc}") from exc
            for field in REQUIRED_FIELDS:
                if field not in obj:
                    raise ParseError(line_no, f"missing field {field!r}")
            try:
                record = QueryRecord(
                    id=str(obj["id"]),
                    query=str(obj["query"]),
                    answer=str(obj["answer"]),
                    domain=str(obj["domain"]),
                    difficulty=float(obj["difficulty"]),
                )
                record.validate()
            except (TypeError, ValueError) as exc:
                raise ParseError(line_no, str(exc)) from exc
            except Exception as exc:
                raise ParseError(line_no, str(exc)) from exc
            if record.id in seen:
                raise DuplicateQueryId(f"duplicate query id {record.id!r}")
            seen.add(record.id)
            records.append(record)
    return records


def split_dataset(records, seed):
    """Seeded shuffle, then the first ceil(n/5) records train and the rest
    test (a 1:4 ratio)."""
    n = len(records)
    if n < 5:
        raise TooFewRecords(f"need at least 5 records, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train = math.ceil(n / 5)
    train = [records[i] for i in perm[:n_train]]
    test = [records[i] for i in perm[n_train:]]
    return train, test
