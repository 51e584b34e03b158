"""Independent re-implementations used as test oracles."""

import numpy as np


def reference_actions(residuals, n_switch=5):
    """Actions of the combined controller for a given residual sequence.

    Written index-by-index: the decision for iteration ``i`` (1-based) sees
    residuals ``r[0] .. r[i-2]`` only. Returns a list of ``(action, restart)``
    pairs, one per residual, where ``action`` is ``"AA"`` or ``"OR"``.
    """
    out = []
    relaxing = False
    for i in range(1, len(residuals) + 1):
        known = residuals[: i - 1]
        restart = False
        if not relaxing:
            if len(known) >= 2 and known[-1] > known[-2]:
                relaxing = True
                action = "OR"
            else:
                action = "AA"
        else:
            ok = len(known) >= n_switch + 1
            if ok:
                for k in range(len(known) - n_switch, len(known)):
                    if known[k] > known[k - 1]:
                        ok = False
                        break
            if ok:
                relaxing = False
                restart = True
                action = "AA"
            else:
                action = "OR"
        out.append((action, restart))
    return out


def synthetic_sequences(count=100, seed=2024):
    """Residual sequences: oscillate-then-decrease, monotone, and random walks."""
    rng = np.random.default_rng(seed)
    seqs = []
    # oscillation followed by a steady decrease
    seqs.append([1.0, 0.5, 0.8, 0.3, 0.6, 0.2, 0.4] + [0.1 * 0.7**k for k in range(12)])
    seqs.append([1.0 * 0.5**k for k in range(15)])
    seqs.append([1.0, 2.0] * 8)
    seqs.append([1.0] * 12)
    while len(seqs) < count:
        n = int(rng.integers(3, 40))
        kind = rng.integers(3)
        if kind == 0:
            r = np.exp(np.cumsum(rng.normal(-0.2, 0.5, n)))
        elif kind == 1:
            k = int(rng.integers(1, n))
            r = np.concatenate([np.exp(rng.normal(0, 0.3, k)), np.exp(-0.3 * np.arange(1, n - k + 1))])
        else:
            # coarse values so that ties occur
            r = rng.integers(1, 4, n).astype(float)
        seqs.append(list(r))
    return seqs
