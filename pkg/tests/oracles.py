"""Slow, obviously-correct reference computations used only by the tests."""
import itertools

import numpy as np

from t2dm_risk.nn import bce_loss, forward

MASK64 = (1 << 64) - 1


def auroc_pairs(probs, labels):
    """O(m*n) Mann-Whitney count with exact rational arithmetic."""
    pos = [p for p, y in zip(probs, labels) if y == 1]
    neg = [p for p, y in zip(probs, labels) if y == 0]
    twice = 0
    for a in pos:
        for b in neg:
            twice += 2 if a > b else 1 if a == b else 0
    return twice / (2 * len(pos) * len(neg))


def placements(probs, labels):
    """DeLong structural components by explicit pair loops."""
    pos = [p for p, y in zip(probs, labels) if y == 1]
    neg = [p for p, y in zip(probs, labels) if y == 0]
    psi = lambda a, b: 1.0 if a > b else 0.5 if a == b else 0.0
    v10 = [np.mean([psi(a, b) for b in neg]) for a in pos]
    v01 = [np.mean([psi(a, b) for a in pos]) for b in neg]
    return np.array(v10), np.array(v01)


def average_precision_sweep(probs, labels):
    """Average precision by sweeping every distinct threshold from high to low."""
    probs, labels = np.asarray(probs), np.asarray(labels)
    m = labels.sum()
    ap, prev_recall = 0.0, 0.0
    for t in sorted(set(probs.tolist()), reverse=True):
        called = probs >= t
        tp = np.sum(called & (labels == 1))
        recall, precision = tp / m, tp / called.sum()
        ap += (recall - prev_recall) * precision
        prev_recall = recall
    return ap


def quantile_linear(values, q):
    """Linear interpolation between order statistics at position q*(n-1)."""
    s = sorted(values)
    pos = q * (len(s) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


def youden_scan(probs, labels):
    probs, labels = np.asarray(probs), np.asarray(labels)
    best_j, best_t = -np.inf, None
    for t in sorted(set(probs.tolist()) | {np.inf}):
        called = probs >= t
        sens = np.sum(called & (labels == 1)) / np.sum(labels == 1)
        spec = np.sum(~called & (labels == 0)) / np.sum(labels == 0)
        j = sens + spec - 1
        if j > best_j + 1e-12:
            best_j, best_t = j, t
    return best_t, best_j


def numeric_gradients(params, inputs, labels, h=1e-5):
    """Central differences of the eval-mode batch-mean BCE for every parameter."""

    def loss():
        p, _ = forward(params, inputs, train=False)
        return float(np.mean(bce_loss(p, labels)))

    grads = []
    for tensor in params.weights + params.biases:
        g = np.zeros_like(tensor)
        it = np.nditer(tensor, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            old = tensor[ix]
            tensor[ix] = old + h
            up = loss()
            tensor[ix] = old - h
            down = loss()
            tensor[ix] = old
            g[ix] = (up - down) / (2 * h)
        grads.append(g)
    nw = len(params.weights)
    return grads[:nw], grads[nw:]


def max_relative_error(analytic, numeric, floor=1e-7):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        err = np.abs(a - n) / np.maximum(np.abs(a) + np.abs(n), floor)
        worst = max(worst, float(err.max()))
    return worst


class ReferenceXoshiro:
    """Straight transcription of the xoshiro256** and SplitMix64 reference C code."""

    def __init__(self, seed=None, state=None):
        if state is not None:
            self.s = list(state)
        else:
            x = seed & MASK64
            self.s = []
            for _ in range(4):
                x = (x + 0x9E3779B97F4A7C15) & MASK64
                z = x
                z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
                z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
                self.s.append(z ^ (z >> 31))

    @staticmethod
    def _rotl(x, k):
        return ((x << k) | (x >> (64 - k))) & MASK64

    def next(self):
        s = self.s
        result = (self._rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = self._rotl(s[3], 45)
        return result


def enumerate_bootstrap_variance(stat, labels):
    """Exact variance of ``stat(idx)`` over all n**n resamples containing both classes."""
    labels = np.asarray(labels)
    n = labels.size
    vals = []
    for idx in itertools.product(range(n), repeat=n):
        idx = np.array(idx)
        if 0 < labels[idx].sum() < n:
            vals.append(stat(idx))
    return float(np.var(vals))
