"""Independent reference implementations used only by the tests."""
import numpy as np


def ap_oracle(scores, targets):
    """Mean over positives of precision at that positive's rank; stable ties."""
    scores, targets = list(scores), list(targets)
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    tp, total, npos = 0, 0.0, 0
    for rank, i in enumerate(order, 1):
        if targets[i] == 1:
            tp += 1
            total += tp / rank
            npos += 1
    return total / npos


def ap_literal_oracle(scores, targets):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    tp, total = 0, 0.0
    for rank, i in enumerate(order, 1):
        tp += targets[i] == 1
        total += tp / rank
    return total / len(scores)


def auc_oracle(scores, targets):
    """Exhaustive pair count; ties count one half."""
    pos = [s for s, y in zip(scores, targets) if y == 1]
    neg = [s for s, y in zip(scores, targets) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))


def batches_oracle(ts, gap):
    """Sequential scan producing lists of indices."""
    out, cur = [], []
    for i, t in enumerate(ts):
        if cur and t - ts[cur[0]] > gap:
            out.append(cur)
            cur = []
        cur.append(i)
    if cur:
        out.append(cur)
    return out


def neighbors_oracle(rows, node, kind, t, length):
    """Full scan: every interaction of ``node`` strictly before ``t``, top by time.

    ``rows`` are dense ``(p, s, label, ts)`` tuples in log order; ties in time
    keep log order. Returns a list of ``(id, label, time)`` of the kept
    neighbors in ascending time order.
    """
    own, other = (0, 1) if kind == "passenger" else (1, 0)
    hist = [(r[3], i, r[other], r[2]) for i, r in enumerate(rows) if r[own] == node and r[3] < t]
    hist.sort()
    kept = hist[-(length - 1):] if length > 1 else []
    return [(nid, lab, ts) for ts, _, nid, lab in kept]


def cooccurrence_oracle(seq_a, seq_b):
    """Double loop over ``(kind, id)`` entries; ``None`` marks padding."""
    def count(x, seq):
        return sum(1 for y in seq if y is not None and y == x)
    out = []
    for x in seq_a:
        out.append([0, 0] if x is None else [count(x, seq_a), count(x, seq_b)])
    return out


def matmul_oracle(A, B):
    n, k = A.shape
    m = B.shape[1]
    C = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += A[i, t] * B[t, j]
            C[i, j] = s
    return C
