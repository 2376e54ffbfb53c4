"""Cluster-capitalization weights for the selected representatives."""

import numpy as np

from indexfund.benchmarks import resolve_row


def cluster_cap_from_caps(solution, caps):
    """Weight of representative j = total cap of its cluster / total cap of the universe."""
    caps = np.asarray(caps, dtype=float)
    assignment = np.asarray(solution.assignment)
    totals = np.bincount(assignment, weights=caps, minlength=len(caps))
    weights = np.zeros(len(caps))
    sel = list(solution.selected)
    weights[sel] = totals[sel] / caps.sum()
    # clusters partition the universe, so no renormalization is applied
    assert abs(weights.sum() - 1.0) < 1e-10, weights.sum()
    return weights


def cluster_cap_weights(solution, caps, asof):
    return cluster_cap_from_caps(solution, caps.caps[resolve_row(caps.dates, asof)])
