"""Citation corpus ingestion and the frozen columnar graph.

A corpus is an immutable directed citation graph: publications carry a
calendar year, ``cites`` maps citing -> cited and ``cited_by`` is its exact
transpose. Both adjacencies are stored CSR-style over dense internal
indices, each list sorted by (year, id) of the endpoint, which makes
expanding-window queries prefix slices.

Window semantics are year-granular. A citation from q to p enters the
window t when ``effective_lag(q, p) <= t`` with
``effective_lag = max(0, year(q) - year(p))``: same-year citations land at
t = 0, and backward-in-time citations (citer older than the cited record,
which real data contains) are clamped to t = 0 rather than dropped, so
window counts stay monotone and totals reconcile with the raw edge list.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NotFoundError, ParseError, SnapshotFormatError

#: Window sentinel: use every citation in the dataset, no year cap.
FINAL = "final"

_SNAPSHOT_MAGIC = b"DCSNAP\x00\x01"
_SNAPSHOT_VERSION = 1


def effective_lag(citer_year: int, cited_year: int) -> int:
    """Whole years from the cited publication to the citation, clamped at 0."""
    return max(0, int(citer_year) - int(cited_year))


@dataclass(frozen=True)
class IngestConfig:
    """Ingestion options and sanity bounds for publication years."""

    min_year: int = 1000
    max_year: int = 2100
    has_header: bool = False


@dataclass(frozen=True)
class IngestStats:
    """Counts accumulated while loading and validating a corpus."""

    publications_loaded: int
    edges_loaded: int
    self_citations_dropped: int
    dangling_edges_dropped: int
    duplicate_edges_dropped: int
    duplicate_publications_dropped: int
    backward_in_time_edges: int

    def to_dict(self) -> dict:
        return asdict(self)


class Corpus:
    """Frozen citation graph with year-indexed adjacency.

    Instances are built by :func:`load_corpus` or :meth:`Corpus.load`; the
    arrays are marked read-only and the object is safe to share across
    threads. Publication ids are opaque unsigned 64-bit integers; internally
    they map to dense indices in ascending id order.
    """

    def __init__(self, ids, years, citing_idx, cited_idx):
        ids = np.ascontiguousarray(ids, dtype=np.uint64)
        years = np.ascontiguousarray(years, dtype=np.int32)
        if ids.ndim != 1 or ids.shape != years.shape:
            raise ValueError("ids and years must be equal-length 1-D arrays")
        if ids.size > 1 and not (ids[1:] > ids[:-1]).all():
            raise ValueError("ids must be strictly ascending")
        n = ids.size
        citing_idx = np.ascontiguousarray(citing_idx, dtype=np.int64)
        cited_idx = np.ascontiguousarray(cited_idx, dtype=np.int64)

        self.ids = ids
        self.years = years
        self.ref_indptr, self.ref_indices = self._build_csr(n, citing_idx, cited_idx, years)
        self.cit_indptr, self.cit_indices = self._build_csr(n, cited_idx, citing_idx, years)
        # Citer years aligned with cit_indices; sorted within each slice.
        self.cit_years = self.years[self.cit_indices] if self.cit_indices.size else np.empty(0, np.int32)
        self.end_year = int(years.max()) if n else 0
        for arr in (self.ids, self.years, self.ref_indptr, self.ref_indices,
                    self.cit_indptr, self.cit_indices, self.cit_years):
            arr.flags.writeable = False
        self._frozen = True

    @staticmethod
    def _build_csr(n, src, dst, years):
        # Sort edges by (src, year(dst), dst) so every adjacency slice is
        # ordered by (year, id) ascending, the order window queries rely on.
        if src.size:
            order = np.lexsort((dst, years[dst], src))
            src = src[order]
            dst = dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return indptr, dst.astype(np.int32)

    # -- basic shape ---------------------------------------------------

    @property
    def n_publications(self) -> int:
        return int(self.ids.size)

    @property
    def n_edges(self) -> int:
        return int(self.ref_indices.size)

    def __len__(self) -> int:
        return self.n_publications

    def __contains__(self, pub_id) -> bool:
        i = int(np.searchsorted(self.ids, np.uint64(pub_id)))
        return i < self.ids.size and int(self.ids[i]) == int(pub_id)

    # -- id <-> index --------------------------------------------------

    def index_of(self, pub_id: int) -> int:
        """Dense internal index for a publication id."""
        i = int(np.searchsorted(self.ids, np.uint64(pub_id)))
        if i >= self.ids.size or int(self.ids[i]) != int(pub_id):
            raise NotFoundError(int(pub_id))
        return i

    def id_of(self, index: int) -> int:
        return int(self.ids[index])

    def year_of(self, index: int) -> int:
        return int(self.years[index])

    # -- adjacency accessors (internal indices) -------------------------

    def refs_of(self, index: int):
        """Indices of publications cited by ``index``, (year, id) ascending."""
        return self.ref_indices[self.ref_indptr[index]:self.ref_indptr[index + 1]]

    def citers_of(self, index: int):
        """Indices of publications citing ``index``, (year, id) ascending."""
        return self.cit_indices[self.cit_indptr[index]:self.cit_indptr[index + 1]]

    def citer_years(self, index: int):
        return self.cit_years[self.cit_indptr[index]:self.cit_indptr[index + 1]]

    def citer_lags(self, index: int):
        """Clamped citation lags for ``index``, ascending."""
        return np.maximum(self.citer_years(index) - self.years[index], 0)

    # -- spec-level counting ops ----------------------------------------

    def reference_count(self, pub_id: int) -> int:
        """Number of (validated, deduplicated) cited references."""
        i = self.index_of(pub_id)
        return int(self.ref_indptr[i + 1] - self.ref_indptr[i])

    def citation_count(self, pub_id: int, window=FINAL) -> int:
        """Citations received within an expanding window of ``window`` years.

        ``window`` is elapsed whole years (0 counts same-or-earlier-year
        citers) or :data:`FINAL` for every citation in the dataset.
        """
        i = self.index_of(pub_id)
        lo, hi = self.cit_indptr[i], self.cit_indptr[i + 1]
        if window is FINAL or window == FINAL:
            return int(hi - lo)
        t = int(window)
        if t < 0:
            raise ValueError("window must be >= 0 years")
        cutoff = self.years[i] + t
        return int(np.searchsorted(self.cit_years[lo:hi], cutoff, side="right"))

    # -- serialization ---------------------------------------------------

    def _canonical_bytes(self) -> bytes:
        buf = io.BytesIO()
        self._write(buf)
        return buf.getvalue()

    def digest(self) -> str:
        """SHA-256 of the canonical snapshot serialization."""
        return hashlib.sha256(self._canonical_bytes()).hexdigest()

    def _write(self, fh) -> None:
        header = {
            "n": self.n_publications,
            "m": self.n_edges,
            "end_year": self.end_year,
            "arrays": ["ids:u8", "years:i4", "ref_indptr:i8", "ref_indices:i4",
                       "cit_indptr:i8", "cit_indices:i4"],
        }
        hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        fh.write(_SNAPSHOT_MAGIC)
        fh.write(np.uint32(_SNAPSHOT_VERSION).tobytes())
        fh.write(np.uint32(len(hbytes)).tobytes())
        fh.write(hbytes)
        for arr in (self.ids, self.years, self.ref_indptr, self.ref_indices,
                    self.cit_indptr, self.cit_indices):
            fh.write(np.ascontiguousarray(arr).tobytes())

    def save(self, path) -> None:
        """Write the versioned binary snapshot atomically (temp + rename)."""
        path = os.fspath(path)
        tmp = path + ".tmp"
        with open(tmp, "wb") as fh:
            self._write(fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "Corpus":
        """Load a snapshot written by :meth:`save`."""
        path = os.fspath(path)
        with open(path, "rb") as fh:
            magic = fh.read(len(_SNAPSHOT_MAGIC))
            if magic != _SNAPSHOT_MAGIC:
                raise SnapshotFormatError(f"{path}: not a corpus snapshot (bad magic)")
            version = int(np.frombuffer(fh.read(4), np.uint32)[0])
            if version != _SNAPSHOT_VERSION:
                raise SnapshotFormatError(f"{path}: unsupported snapshot version {version}")
            hlen = int(np.frombuffer(fh.read(4), np.uint32)[0])
            header = json.loads(fh.read(hlen).decode())
            n, m = header["n"], header["m"]
            ids = np.frombuffer(fh.read(8 * n), np.uint64)
            years = np.frombuffer(fh.read(4 * n), np.int32)
            ref_indptr = np.frombuffer(fh.read(8 * (n + 1)), np.int64)
            ref_indices = np.frombuffer(fh.read(4 * m), np.int32)
            fh.read(8 * (n + 1))  # cit_indptr, rebuilt below
            fh.read(4 * m)        # cit_indices, rebuilt below
        citing = np.repeat(np.arange(n, dtype=np.int64), np.diff(ref_indptr))
        return cls(ids, years, citing, ref_indices.astype(np.int64))


def _parse_pubs(path: str, config: IngestConfig):
    years_by_id: dict[int, int] = {}
    dup_pubs = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if lineno == 1 and config.has_header:
                continue
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected 'id<TAB>year', got {len(parts)} fields")
            try:
                pid = int(parts[0])
                year = int(parts[1])
            except ValueError:
                raise ParseError(path, lineno, f"non-integer field in {line!r}") from None
            if not (0 <= pid < 2 ** 64):
                raise ParseError(path, lineno, f"id {pid} outside unsigned 64-bit range")
            if not (config.min_year <= year <= config.max_year):
                raise ParseError(
                    path, lineno,
                    f"year {year} outside sanity bounds [{config.min_year}, {config.max_year}]")
            prev = years_by_id.get(pid)
            if prev is None:
                years_by_id[pid] = year
            elif prev != year:
                raise ParseError(path, lineno, f"publication {pid} already loaded with year {prev}, got {year}")
            else:
                dup_pubs += 1
    return years_by_id, dup_pubs


def _parse_edges(path: str, config: IngestConfig):
    citing: list[int] = []
    cited: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if lineno == 1 and config.has_header:
                continue
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected 'citing_id<TAB>cited_id', got {len(parts)} fields")
            try:
                a = int(parts[0])
                b = int(parts[1])
            except ValueError:
                raise ParseError(path, lineno, f"non-integer field in {line!r}") from None
            citing.append(a)
            cited.append(b)
    return citing, cited


def load_corpus(pubs_path, edges_path, config: IngestConfig | None = None):
    """Parse, validate, and freeze a corpus from tab-separated files.

    Self-citations and edges with an unknown endpoint are dropped and
    counted; duplicate edges collapse to one; backward-in-time edges
    (citer year before cited year) are retained and counted. Returns the
    frozen :class:`Corpus` and an :class:`IngestStats`.
    """
    config = config or IngestConfig()
    pubs_path = os.fspath(pubs_path)
    edges_path = os.fspath(edges_path)

    years_by_id, dup_pubs = _parse_pubs(pubs_path, config)
    ids = np.fromiter(years_by_id.keys(), dtype=np.uint64, count=len(years_by_id))
    order = np.argsort(ids, kind="stable")
    ids = ids[order]
    years = np.fromiter(years_by_id.values(), dtype=np.int32, count=len(years_by_id))[order]

    raw_citing, raw_cited = _parse_edges(edges_path, config)
    citing = np.asarray(raw_citing, dtype=np.uint64) if raw_citing else np.empty(0, np.uint64)
    cited = np.asarray(raw_cited, dtype=np.uint64) if raw_cited else np.empty(0, np.uint64)

    # Resolve endpoints against the sorted id table; unknowns are dangling.
    pos_citing = np.searchsorted(ids, citing).clip(0, max(len(ids) - 1, 0))
    pos_cited = np.searchsorted(ids, cited).clip(0, max(len(ids) - 1, 0))
    if len(ids):
        known = (ids[pos_citing] == citing) & (ids[pos_cited] == cited)
    else:
        known = np.zeros(len(citing), dtype=bool)
    dangling = int(len(citing) - known.sum())
    pos_citing = pos_citing[known].astype(np.int64)
    pos_cited = pos_cited[known].astype(np.int64)

    self_loop = pos_citing == pos_cited
    self_dropped = int(self_loop.sum())
    pos_citing = pos_citing[~self_loop]
    pos_cited = pos_cited[~self_loop]

    if pos_citing.size:
        pairs = np.stack([pos_citing, pos_cited], axis=1)
        pairs = np.unique(pairs, axis=0)
        duplicates = int(pos_citing.size - pairs.shape[0])
        pos_citing, pos_cited = pairs[:, 0], pairs[:, 1]
    else:
        duplicates = 0

    backward = int((years[pos_citing] < years[pos_cited]).sum()) if pos_citing.size else 0

    corpus = Corpus(ids, years, pos_citing, pos_cited)
    stats = IngestStats(
        publications_loaded=len(ids),
        edges_loaded=int(pos_citing.size),
        self_citations_dropped=self_dropped,
        dangling_edges_dropped=dangling,
        duplicate_edges_dropped=duplicates,
        duplicate_publications_dropped=dup_pubs,
        backward_in_time_edges=backward,
    )
    return corpus, stats
