"""Disruption values over expanding citation windows.

For a focal publication the index splits its in-window citers into
"exclusive" ones (citing none of its references) and "overlapping" ones
(citing it and at least one reference), and normalizes by the publications
that cite only the references:

    d = (n_f - n_b) / (n_f + n_b + n_r)

A value exists only when the publication clears the eligibility rule
(minimum reference count, minimum in-window citations); otherwise the cell
is null. Cells are computed per elapsed year t, from t = 0 (same-year
citations) to the dataset horizon.

Three routes produce the same numbers: :func:`compute_d` (one cell, plain
sets), :func:`sweep_trajectories` (all publications, all windows, parallel
kernel), and :func:`extend_window` (append one year incrementally). They
must agree exactly; the test suite also checks all of them against the
deliberately naive implementations in :mod:`discite.oracle`.
"""

from __future__ import annotations

import math
import os
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .corpus import FINAL, Corpus
from .errors import WindowContractError
from .validation import check_corpus

TRAJECTORY_COLUMNS = ("pub_id", "t", "n_f", "n_b", "n_r", "d")


@dataclass(frozen=True)
class EligibilityRule:
    """Minimum reference and in-window citation counts for a D value."""

    min_refs: int = 5
    min_cites: int = 5

    def __post_init__(self):
        if self.min_refs < 0 or self.min_cites < 0:
            raise ValueError("eligibility thresholds must be >= 0")


@dataclass(frozen=True)
class DComponents:
    """Window counts behind one D cell.

    ``n_f``: citers of the focal publication citing none of its references.
    ``n_b``: citers citing the focal publication and at least one reference.
    ``n_r``: publications at/after the focal year citing >= 1 reference but
    not the focal publication itself.
    """

    n_f: int
    n_b: int
    n_r: int


@dataclass(frozen=True)
class DValue:
    """A disruption value in [-1, 1], or null with a reason."""

    value: float | None
    null_reason: str | None = None  # 'ineligible' | 'zero_denominator'

    @property
    def is_null(self) -> bool:
        return self.value is None


def _make_dvalue(n_refs: int, n_f: int, n_b: int, n_r: int, rule: EligibilityRule) -> DValue:
    if n_refs < rule.min_refs or (n_f + n_b) < rule.min_cites:
        return DValue(None, "ineligible")
    denom = n_f + n_b + n_r
    if denom == 0:
        return DValue(None, "zero_denominator")
    return DValue((n_f - n_b) / denom)


def _resolve_window(corpus: Corpus, index: int, window) -> int:
    if window is FINAL or window == FINAL:
        return max(0, corpus.end_year - int(corpus.years[index]))
    t = int(window)
    if t < 0:
        raise ValueError("citation window must be >= 0 years")
    return t


def compute_d(corpus: Corpus, pub_id: int, window=FINAL,
              rule: EligibilityRule = EligibilityRule(),
              nr_strictly_after: bool = False):
    """Compute one (DValue, DComponents) cell for a publication.

    ``window`` is elapsed years or :data:`FINAL`. With
    ``nr_strictly_after`` the reference-only citers must be published
    strictly after the focal publication; by default same-year ones count,
    matching the lag-0 window that includes same-year citers.
    """
    idx = corpus.index_of(pub_id)
    y = int(corpus.years[idx])
    t = _resolve_window(corpus, idx, window)

    refs = corpus.refs_of(idx)
    refs_set = set(refs.tolist())

    citers = corpus.citers_of(idx)
    cyears = corpus.citer_years(idx)
    in_window = int(np.searchsorted(cyears, y + t, side="right"))
    n_f = 0
    n_b = 0
    for q in citers[:in_window].tolist():
        if refs_set and not refs_set.isdisjoint(corpus.refs_of(q).tolist()):
            n_b += 1
        else:
            n_f += 1

    citer_all = set(citers.tolist())
    candidates: set[int] = set()
    side = "right" if nr_strictly_after else "left"
    for r in refs.tolist():
        ryears = corpus.citer_years(r)
        lo = int(np.searchsorted(ryears, y, side=side))
        hi = int(np.searchsorted(ryears, y + t, side="right"))
        for q in corpus.citers_of(r)[lo:hi].tolist():
            if q == idx or q in citer_all:
                continue
            candidates.add(q)
    n_r = len(candidates)

    comps = DComponents(n_f, n_b, n_r)
    return _make_dvalue(len(refs_set), n_f, n_b, n_r, rule), comps


class DTrajectory:
    """Yearly D series for one publication, from t = 0 to its horizon.

    ``d`` holds NaN where no value exists. ``final`` is the value at the
    last computed index. Instances are value-like; incremental extension
    state is private and rebuilt on demand.
    """

    def __init__(self, pub_id, year, end_year, n_f, n_b, n_r, d, n_refs,
                 rule=None, nr_strictly_after=False, _inc=None):
        self.pub_id = int(pub_id)
        self.year = int(year)
        self.end_year = int(end_year)
        self.n_f = np.asarray(n_f, dtype=np.int32)
        self.n_b = np.asarray(n_b, dtype=np.int32)
        self.n_r = np.asarray(n_r, dtype=np.int32)
        self.d = np.asarray(d, dtype=np.float64)
        self.n_refs = int(n_refs)
        self.rule = rule
        self.nr_strictly_after = bool(nr_strictly_after)
        self._inc = _inc

    def __len__(self) -> int:
        return len(self.d)

    @property
    def t_last(self) -> int:
        return len(self.d) - 1

    @property
    def final(self) -> float | None:
        v = self.d[-1]
        return None if math.isnan(v) else float(v)

    def d_at(self, t: int) -> float | None:
        v = self.d[t]
        return None if math.isnan(v) else float(v)

    def components_at(self, t: int) -> DComponents:
        return DComponents(int(self.n_f[t]), int(self.n_b[t]), int(self.n_r[t]))

    def value_at(self, t: int) -> DValue:
        if self.rule is not None:
            return _make_dvalue(self.n_refs, int(self.n_f[t]), int(self.n_b[t]),
                                int(self.n_r[t]), self.rule)
        v = self.d[t]
        return DValue(None) if math.isnan(v) else DValue(float(v))

    @property
    def first_defined(self) -> int | None:
        """Smallest t with a non-null value, or None for all-null series."""
        defined = ~np.isnan(self.d)
        if not defined.any():
            return None
        return int(defined.argmax())


def compute_trajectory(corpus: Corpus, pub_id: int,
                       rule: EligibilityRule = EligibilityRule(),
                       t_max: int | None = None,
                       nr_strictly_after: bool = False) -> DTrajectory:
    """Build one trajectory by evaluating :func:`compute_d` per window."""
    idx = corpus.index_of(pub_id)
    y = int(corpus.years[idx])
    horizon = max(0, corpus.end_year - y)
    if t_max is not None:
        horizon = min(horizon, int(t_max))
    n_f = np.zeros(horizon + 1, np.int32)
    n_b = np.zeros(horizon + 1, np.int32)
    n_r = np.zeros(horizon + 1, np.int32)
    d = np.full(horizon + 1, np.nan)
    for t in range(horizon + 1):
        dv, comps = compute_d(corpus, pub_id, t, rule, nr_strictly_after)
        n_f[t], n_b[t], n_r[t] = comps.n_f, comps.n_b, comps.n_r
        if dv.value is not None:
            d[t] = dv.value
    return DTrajectory(pub_id, y, corpus.end_year, n_f, n_b, n_r, d,
                       corpus.reference_count(pub_id), rule, nr_strictly_after)


class _IncState:
    """Citer/candidate bookkeeping carried between window extensions."""

    def __init__(self, refs_set, citer_all, cand_seen):
        self.refs_set = refs_set
        self.citer_all = citer_all
        self.cand_seen = cand_seen

    def copy(self) -> "_IncState":
        return _IncState(self.refs_set, set(self.citer_all), set(self.cand_seen))


def _build_inc_state(corpus: Corpus, idx: int, through_t: int,
                     nr_strictly_after: bool) -> _IncState:
    y = int(corpus.years[idx])
    refs_set = set(corpus.refs_of(idx).tolist())
    citer_all = set(corpus.citers_of(idx).tolist())
    cand_seen: set[int] = set()
    side = "right" if nr_strictly_after else "left"
    for r in refs_set:
        ryears = corpus.citer_years(r)
        lo = int(np.searchsorted(ryears, y, side=side))
        hi = int(np.searchsorted(ryears, y + through_t, side="right"))
        for q in corpus.citers_of(r)[lo:hi].tolist():
            if q != idx and q not in citer_all:
                cand_seen.add(q)
    return _IncState(refs_set, citer_all, cand_seen)


def extend_window(corpus: Corpus, traj: DTrajectory, t: int) -> DTrajectory:
    """Append window year ``t`` to a trajectory valid through ``t - 1``.

    Only citers and reference-citers whose lag equals ``t`` are processed;
    the appended cell is bit-identical to :func:`compute_d` at ``t``.
    """
    if traj.rule is None:
        raise WindowContractError("trajectory carries no eligibility rule; cannot extend")
    if t != traj.t_last + 1:
        raise WindowContractError(
            f"next extension index is {traj.t_last + 1}, got {t}")
    idx = corpus.index_of(traj.pub_id)
    y = traj.year
    if t > corpus.end_year - y:
        raise WindowContractError(
            f"window {t} exceeds the dataset horizon {corpus.end_year - y} "
            f"for publication {traj.pub_id}")

    state = (traj._inc or _build_inc_state(corpus, idx, t - 1, traj.nr_strictly_after)).copy()

    new_f = 0
    new_b = 0
    cyears = corpus.citer_years(idx)
    lo = int(np.searchsorted(cyears, y + t, side="left"))
    hi = int(np.searchsorted(cyears, y + t, side="right"))
    for q in corpus.citers_of(idx)[lo:hi].tolist():
        if state.refs_set and not state.refs_set.isdisjoint(corpus.refs_of(q).tolist()):
            new_b += 1
        else:
            new_f += 1

    new_r = 0
    for r in state.refs_set:
        ryears = corpus.citer_years(r)
        rlo = int(np.searchsorted(ryears, y + t, side="left"))
        rhi = int(np.searchsorted(ryears, y + t, side="right"))
        for q in corpus.citers_of(r)[rlo:rhi].tolist():
            if q == idx or q in state.citer_all or q in state.cand_seen:
                continue
            state.cand_seen.add(q)
            new_r += 1

    n_f = int(traj.n_f[-1]) + new_f
    n_b = int(traj.n_b[-1]) + new_b
    n_r = int(traj.n_r[-1]) + new_r
    dv = _make_dvalue(traj.n_refs, n_f, n_b, n_r, traj.rule)
    return DTrajectory(
        traj.pub_id, y, traj.end_year,
        np.append(traj.n_f, np.int32(n_f)),
        np.append(traj.n_b, np.int32(n_b)),
        np.append(traj.n_r, np.int32(n_r)),
        np.append(traj.d, np.nan if dv.value is None else dv.value),
        traj.n_refs, traj.rule, traj.nr_strictly_after, _inc=state)


class TrajectorySet(Mapping):
    """Columnar store of every publication's trajectory.

    Maps publication id -> :class:`DTrajectory`; the flat arrays back the
    metric and report layers without materializing per-publication objects.
    """

    def __init__(self, ids, years, end_year, offsets, n_f, n_b, n_r, d,
                 ref_counts=None, rule=None, nr_strictly_after=False):
        self.ids = np.asarray(ids, dtype=np.uint64)
        self.years = np.asarray(years, dtype=np.int32)
        self.end_year = int(end_year)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.n_f = np.asarray(n_f, dtype=np.int32)
        self.n_b = np.asarray(n_b, dtype=np.int32)
        self.n_r = np.asarray(n_r, dtype=np.int32)
        self.d = np.asarray(d, dtype=np.float64)
        self.ref_counts = None if ref_counts is None else np.asarray(ref_counts, np.int32)
        self.rule = rule
        self.nr_strictly_after = bool(nr_strictly_after)
        self.lengths = np.diff(self.offsets)

    # -- mapping protocol ------------------------------------------------

    def __len__(self) -> int:
        return int(self.ids.size)

    def __iter__(self):
        return (int(i) for i in self.ids)

    def __getitem__(self, pub_id: int) -> DTrajectory:
        i = int(np.searchsorted(self.ids, np.uint64(pub_id)))
        if i >= self.ids.size or int(self.ids[i]) != int(pub_id):
            raise KeyError(pub_id)
        return self.at_index(i)

    def at_index(self, i: int) -> DTrajectory:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        n_refs = 0 if self.ref_counts is None else int(self.ref_counts[i])
        return DTrajectory(self.ids[i], self.years[i], self.end_year,
                           self.n_f[lo:hi], self.n_b[lo:hi], self.n_r[lo:hi],
                           self.d[lo:hi], n_refs, self.rule, self.nr_strictly_after)

    # -- columnar views ----------------------------------------------------

    @property
    def max_t(self) -> int:
        return int(self.lengths.max()) - 1 if len(self) else -1

    @property
    def final_d(self):
        """Value at each trajectory's last index (NaN where null)."""
        return self.d[self.offsets[1:] - 1]

    def persisted_cells(self, t: int):
        """Cell index per publication for window t, frozen at each horizon.

        Publications whose horizon ends before ``t`` keep their last cell:
        the dataset simply has no citations left to add, so the windowed
        value equals the final one.
        """
        return self.offsets[:-1] + np.minimum(t, self.lengths - 1)

    def persisted_d(self, t: int):
        return self.d[self.persisted_cells(t)]

    def observed_pubs(self, t: int):
        """Publication indices whose horizon actually reaches window t."""
        return np.flatnonzero(self.lengths > t)

    def observed_cells(self, t: int):
        pubs = self.observed_pubs(t)
        return pubs, self.offsets[:-1][pubs] + t

    # -- CSV wire format ---------------------------------------------------

    def to_frame(self) -> pd.DataFrame:
        total = int(self.offsets[-1])
        t_col = np.arange(total, dtype=np.int64) - np.repeat(self.offsets[:-1], self.lengths)
        return pd.DataFrame({
            "pub_id": np.repeat(self.ids, self.lengths),
            "t": t_col.astype(np.int32),
            "n_f": self.n_f,
            "n_b": self.n_b,
            "n_r": self.n_r,
            "d": self.d,
        })

    def write_csv(self, path) -> None:
        """Dump rows ``pub_id,t,n_f,n_b,n_r,d`` in (pub_id, t) order."""
        path = os.fspath(path)
        tmp = path + ".tmp"
        self.to_frame().to_csv(tmp, index=False, na_rep="", lineterminator="\n")
        os.replace(tmp, path)

    @classmethod
    def read_csv(cls, path, corpus: Corpus) -> "TrajectorySet":
        """Rebuild a set from a dump; years come from the corpus."""
        df = pd.read_csv(
            path,
            dtype={"pub_id": np.uint64, "t": np.int32, "n_f": np.int32,
                   "n_b": np.int32, "n_r": np.int32, "d": np.float64})
        pub_col = df["pub_id"].to_numpy()
        boundaries = np.flatnonzero(df["t"].to_numpy() == 0)
        if len(df) and (boundaries.size == 0 or boundaries[0] != 0):
            raise ValueError("trajectory dump must start each publication at t=0")
        ids = pub_col[boundaries]
        offsets = np.concatenate([boundaries, [len(df)]]).astype(np.int64)
        pos = np.searchsorted(corpus.ids, ids)
        if pos.size and not (corpus.ids[pos] == ids).all():
            raise ValueError("trajectory dump references publications missing from the corpus")
        years = corpus.years[pos] if pos.size else np.empty(0, np.int32)
        ref_counts = np.diff(corpus.ref_indptr)[pos].astype(np.int32) if pos.size else None
        return cls(ids, years, corpus.end_year, offsets,
                   df["n_f"].to_numpy(), df["n_b"].to_numpy(), df["n_r"].to_numpy(),
                   df["d"].to_numpy(), ref_counts=ref_counts)


def sweep_trajectories(corpus: Corpus, rule: EligibilityRule = EligibilityRule(),
                       t_max: int | None = None, nr_strictly_after: bool = False,
                       n_threads: int | None = None,
                       progress=None) -> TrajectorySet:
    """Compute every publication's trajectory for windows t = 0..horizon.

    ``t_max`` caps the horizon (default: dataset end). ``n_threads`` bounds
    the worker count; output is identical for any thread count. ``progress``
    is an optional callable receiving (publications_done, total).
    """
    import numba

    from . import _kernels

    n = corpus.n_publications
    if t_max is not None and t_max < 0:
        raise ValueError("t_max must be >= 0")
    t_caps = (corpus.end_year - corpus.years).astype(np.int64)
    if n:
        t_caps = np.maximum(t_caps, 0)
        if t_max is not None:
            t_caps = np.minimum(t_caps, int(t_max))
    lengths = t_caps + 1
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    total = int(offsets[-1])

    out_nf = np.zeros(total, np.int32)
    out_nb = np.zeros(total, np.int32)
    out_nr = np.zeros(total, np.int32)
    out_d = np.full(total, np.nan)

    prev_threads = numba.get_num_threads()
    if n_threads is not None:
        numba.set_num_threads(max(1, min(int(n_threads), numba.config.NUMBA_NUM_THREADS)))
    try:
        active = numba.get_num_threads()
        ref_mark = np.zeros((active, n), np.int32)
        cit_mark = np.zeros((active, n), np.int32)
        cand_mark = np.zeros((active, n), np.int32)
        if n:
            _kernels.sweep_kernel(
                corpus.years,
                corpus.ref_indptr, corpus.ref_indices,
                corpus.cit_indptr, corpus.cit_indices,
                t_caps.astype(np.int32), offsets,
                rule.min_refs, rule.min_cites, nr_strictly_after,
                out_nf, out_nb, out_nr, out_d,
                ref_mark, cit_mark, cand_mark)
        if progress is not None:
            progress(n, n)
    finally:
        numba.set_num_threads(prev_threads)

    return TrajectorySet(corpus.ids, corpus.years, corpus.end_year, offsets,
                         out_nf, out_nb, out_nr, out_d,
                         ref_counts=np.diff(corpus.ref_indptr).astype(np.int32),
                         rule=rule, nr_strictly_after=nr_strictly_after)


class DisruptionSweeper(BaseEstimator, TransformerMixin):
    """Estimator wrapper around the trajectory sweep.

    ``fit`` runs the sweep over a frozen :class:`Corpus` and stores the
    result as ``trajectories_``; ``transform`` returns it (recomputing when
    handed a different corpus). Composes with scikit-learn tooling via
    ``get_params`` / ``set_params``.
    """

    def __init__(self, min_refs=5, min_cites=5, t_max=None,
                 nr_strictly_after=False, n_threads=None):
        self.min_refs = min_refs
        self.min_cites = min_cites
        self.t_max = t_max
        self.nr_strictly_after = nr_strictly_after
        self.n_threads = n_threads

    def _rule(self) -> EligibilityRule:
        return EligibilityRule(self.min_refs, self.min_cites)

    def fit(self, X, y=None):
        X = check_corpus(X)
        self.corpus_ = X
        self.trajectories_ = sweep_trajectories(
            X, self._rule(), t_max=self.t_max,
            nr_strictly_after=self.nr_strictly_after, n_threads=self.n_threads)
        return self

    def transform(self, X) -> TrajectorySet:
        if not hasattr(self, "trajectories_"):
            raise NotFittedError(
                "This DisruptionSweeper instance is not fitted yet. "
                "Call 'fit' before 'transform'.")
        X = check_corpus(X)
        if X is self.corpus_:
            return self.trajectories_
        return sweep_trajectories(
            X, self._rule(), t_max=self.t_max,
            nr_strictly_after=self.nr_strictly_after, n_threads=self.n_threads)
