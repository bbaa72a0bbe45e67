"""Input validation helpers for the estimator-facing API."""

from __future__ import annotations


def check_corpus(X):
    """Validate that ``X`` is a frozen :class:`~discite.corpus.Corpus`."""
    from .corpus import Corpus

    if not isinstance(X, Corpus):
        raise TypeError(
            f"expected a Corpus, got {type(X).__name__}; load one with "
            "discite.load_corpus or Corpus.load")
    if not getattr(X, "_frozen", False):
        raise TypeError("corpus is not frozen")
    return X


def check_trajectories(X):
    """Validate that ``X`` is a :class:`~discite.engine.TrajectorySet`."""
    from .engine import TrajectorySet

    if not isinstance(X, TrajectorySet):
        raise TypeError(
            f"expected a TrajectorySet, got {type(X).__name__}; build one "
            "with sweep_trajectories or DisruptionSweeper")
    return X
