"""Black-box scoring backends: synthetic additive models, exact replay
tables, external child processes speaking line-delimited JSON, and a
memoizing cache with query statistics.
"""

from __future__ import annotations

import json
import os
import select
import subprocess
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import ClassLabels, ConceptSet, Vocabulary, argmax_class

TIMEOUT_ENV_VAR = "CONCEPTDNF_ORACLE_TIMEOUT"


class OracleError(RuntimeError):
    """Base class for scoring-backend failures."""


class UnknownKeyError(OracleError):
    """Query not answerable by this backend (unknown instance/class/subset)."""


class ProtocolError(OracleError):
    """External adapter sent a malformed or error response."""


class OracleTimeout(OracleError):
    """External adapter did not answer in time."""


@dataclass(frozen=True)
class ScoreQuery:
    instance_id: str
    class_id: int
    subset: ConceptSet


@dataclass
class OracleStats:
    query_count: int = 0
    cache_hits: int = 0


class Oracle:
    """Scoring interface: deterministic, non-negative-free f_class(x_subset)."""

    def score(self, q: ScoreQuery) -> float:
        raise NotImplementedError

    def score_batch(self, qs: Sequence[ScoreQuery]) -> list[float]:
        return [self.score(q) for q in qs]


# ---------------------------------------------------------------------------
# Synthetic additive model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticModel:
    """Additive per-class concept weights; with ``monotone`` all weights are
    non-negative, so subset scores grow monotonically with the subset."""

    weights: tuple[tuple[float, ...], ...]  # [class][concept]
    monotone: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValueError("model needs at least one class")
        widths = {len(row) for row in self.weights}
        if len(widths) != 1:
            raise ValueError("ragged weight matrix")
        if self.monotone and any(w < 0 for row in self.weights for w in row):
            raise ValueError("monotone model requires non-negative weights")

    @property
    def num_classes(self) -> int:
        return len(self.weights)

    @property
    def vocab_size(self) -> int:
        return len(self.weights[0])

    def class_score(self, class_id: int, subset: ConceptSet) -> float:
        row = self.weights[class_id]
        return sum(row[i] for i in subset.ids())

    def save(self, path: str | Path, vocab: Vocabulary, labels: ClassLabels) -> None:
        payload = {
            "weights": {
                labels.name_of(c): {
                    vocab.name_of(i): w for i, w in enumerate(row) if w != 0.0
                }
                for c, row in enumerate(self.weights)
            },
            "monotone": self.monotone,
            "seed": self.seed,
        }
        Path(path).write_text(json.dumps(payload) + "\n")

    @classmethod
    def load(
        cls, path: str | Path, vocab: Vocabulary, labels: ClassLabels
    ) -> "SyntheticModel":
        obj = json.loads(Path(path).read_text())
        rows = [[0.0] * len(vocab) for _ in range(len(labels))]
        for cname, per_concept in obj["weights"].items():
            c = labels.id_of(cname)
            for name, w in per_concept.items():
                rows[c][vocab.id_of(name)] = float(w)
        return cls(tuple(tuple(r) for r in rows), bool(obj["monotone"]), int(obj["seed"]))


def synthetic_predict(model: SyntheticModel, objects: ConceptSet) -> int:
    """Argmax class of the additive score; ties break to the lowest class id."""
    if objects.is_empty:
        raise ValueError("cannot predict on an empty object set")
    return argmax_class([model.class_score(c, objects) for c in range(model.num_classes)])


class SyntheticOracle(Oracle):
    def __init__(self, model: SyntheticModel):
        self.model = model

    def score(self, q: ScoreQuery) -> float:
        if not 0 <= q.class_id < self.model.num_classes:
            raise UnknownKeyError(f"unknown class id {q.class_id}")
        return self.model.class_score(q.class_id, q.subset)


# ---------------------------------------------------------------------------
# Table-backed oracle
# ---------------------------------------------------------------------------


class TableOracle(Oracle):
    """Exact replay of externally computed scores; no interpolation."""

    def __init__(self, table: dict[tuple[str, int, int], float]):
        self._table = dict(table)

    def score(self, q: ScoreQuery) -> float:
        key = (q.instance_id, q.class_id, q.subset.mask)
        try:
            return self._table[key]
        except KeyError:
            raise UnknownKeyError(
                f"no table entry for instance {q.instance_id!r}, class {q.class_id}, "
                f"subset {q.subset.ids()}"
            ) from None


def load_table_oracle(
    path: str | Path, vocab: Vocabulary, labels: ClassLabels
) -> TableOracle:
    table: dict[tuple[str, int, int], float] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                subset = ConceptSet.of(vocab.id_of(n) for n in obj["objects"])
                key = (obj["id"], labels.id_of(obj["class"]), subset.mask)
                score = float(obj["score"])
            except (KeyError, ValueError, json.JSONDecodeError) as exc:
                raise OracleError(f"{path}:{lineno}: bad table entry: {exc}") from None
            if key in table:
                raise OracleError(f"{path}:{lineno}: duplicate table key {key}")
            table[key] = score
    return TableOracle(table)


# ---------------------------------------------------------------------------
# External process oracle
# ---------------------------------------------------------------------------


def default_timeout() -> float:
    return float(os.environ.get(TIMEOUT_ENV_VAR, "30"))


class ExternalOracle(Oracle):
    """Child process speaking one JSON request/response pair per line.

    Requests are serialized through a single dispatcher lock, so callers may
    still query concurrently.
    """

    def __init__(
        self,
        command: Sequence[str],
        vocab: Vocabulary,
        labels: ClassLabels,
        timeout: float | None = None,
    ):
        self._vocab = vocab
        self._labels = labels
        self._timeout = default_timeout() if timeout is None else timeout
        self._lock = threading.Lock()
        self._buf = b""
        self._proc = subprocess.Popen(
            list(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
        )

    def close(self) -> None:
        if self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalOracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _read_line(self) -> bytes:
        assert self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buf:
            ready, _, _ = select.select([fd], [], [], self._timeout)
            if not ready:
                raise OracleTimeout(f"no response within {self._timeout}s")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise OracleError("oracle process closed its stdout")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def score(self, q: ScoreQuery) -> float:
        request = {
            "id": q.instance_id,
            "class": self._labels.name_of(q.class_id),
            "objects": q.subset.names(self._vocab),
        }
        with self._lock:
            if self._proc.poll() is not None:
                raise OracleError(
                    f"oracle process exited with code {self._proc.returncode}"
                )
            assert self._proc.stdin is not None
            try:
                self._proc.stdin.write((json.dumps(request) + "\n").encode())
                self._proc.stdin.flush()
            except BrokenPipeError:
                raise OracleError("oracle process closed its stdin") from None
            line = self._read_line()
        try:
            response = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolError(f"malformed response line: {line[:200]!r}") from None
        if not isinstance(response, dict):
            raise ProtocolError(f"response is not an object: {response!r}")
        if "error" in response:
            raise ProtocolError(f"adapter error: {response['error']}")
        if "score" not in response:
            raise ProtocolError(f"response missing 'score': {response!r}")
        return float(response["score"])


def external_oracle(
    command: Sequence[str],
    vocab: Vocabulary,
    labels: ClassLabels,
    timeout: float | None = None,
) -> ExternalOracle:
    return ExternalOracle(command, vocab, labels, timeout)


# ---------------------------------------------------------------------------
# Memoizing cache
# ---------------------------------------------------------------------------


class CachedOracle(Oracle):
    """Transparent memoizing wrapper keyed by (instance, class, canonical
    subset). Unbounded by default; LRU eviction with ``max_entries``."""

    def __init__(self, inner: Oracle, max_entries: int | None = None):
        self.inner = inner
        self.stats = OracleStats()
        self._max_entries = max_entries
        self._cache: OrderedDict[tuple[str, int, int], float] = OrderedDict()
        self._lock = threading.Lock()

    def score(self, q: ScoreQuery) -> float:
        key = (q.instance_id, q.class_id, q.subset.mask)
        with self._lock:
            if key in self._cache:
                self.stats.cache_hits += 1
                self._cache.move_to_end(key)
                return self._cache[key]
        value = self.inner.score(q)
        with self._lock:
            if key not in self._cache:
                self.stats.query_count += 1
                self._cache[key] = value
                if self._max_entries is not None and len(self._cache) > self._max_entries:
                    self._cache.popitem(last=False)
        return value


def cached(inner: Oracle, max_entries: int | None = None) -> CachedOracle:
    return CachedOracle(inner, max_entries)
