"""Pattern-based chart quality metrics.

A pattern is an 8-frame onset window (note present / absent per frame),
so there are 256 possible patterns. The overall pattern score of a chart
is the percentage of those 256 patterns it actually uses; richer charts
use more of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chart import ChartError, FrameSequence

PATTERN_FRAMES = 8
PATTERN_UNIVERSE = 2 ** PATTERN_FRAMES


@dataclass(frozen=True)
class PatternSet:
    """Distinct 8-frame onset patterns occurring in a sequence.

    Each pattern is an int in 0..255; the most significant bit is the
    earliest frame of the window.
    """

    patterns: frozenset[int]
    universe_size: int = PATTERN_UNIVERSE

    def bitstrings(self) -> list[str]:
        return sorted(format(p, "08b") for p in self.patterns)


def extract_patterns(seq: FrameSequence) -> PatternSet:
    """Collect the distinct 8-frame onset patterns of a sequence.

    The sequence is binarized (any note kind counts as an onset) and an
    8-frame window slides with stride 1; a sequence of length L yields
    L - 7 windows.
    """
    n = len(seq)
    if n < PATTERN_FRAMES:
        raise ChartError(f"need at least {PATTERN_FRAMES} frames, got {n}")
    onsets = (seq.labels != 0).astype(np.int64)
    weights = 1 << np.arange(PATTERN_FRAMES - 1, -1, -1)
    windows = np.lib.stride_tricks.sliding_window_view(onsets, PATTERN_FRAMES)
    codes = windows @ weights
    return PatternSet(patterns=frozenset(int(c) for c in codes))


def overall_pattern_score(seq: FrameSequence) -> float:
    """Percentage of the 256 possible patterns used, in (0, 100]."""
    found = extract_patterns(seq)
    return len(found.patterns) / PATTERN_UNIVERSE * 100.0


def note_accuracy(predicted: FrameSequence, reference: FrameSequence) -> float:
    """Fraction of frames whose class labels match exactly."""
    if len(predicted) != len(reference):
        raise ChartError(
            f"length mismatch: predicted {len(predicted)} vs reference {len(reference)}"
        )
    return float(np.mean(predicted.labels == reference.labels))
