"""Independent reference implementations used as test oracles.

Everything here is written as straight-line plain-Python (loops, no
shared code with the library) so library bugs cannot hide in a shared
helper. Also holds the planted-geometry update builders used by the
defense tests.
"""

import numpy as np

from snowball_sim.layered import LayeredVector
from snowball_sim.updates import CandidateUpdate


def lloyd_replay(points, init, max_iter=100, tol=1e-6):
    """Plain-loop replay of Lloyd iterations from given centroids.

    Same contract as the library kmeans: no re-seeding except for empty
    clusters (replaced by the point farthest from the empty centroid),
    stop on max centroid shift < tol. Returns (labels, inertia trace).
    """
    points = [list(map(float, p)) for p in points]
    cents = [list(map(float, c)) for c in init]
    k = len(cents)

    def sq(a, b):
        return sum((x - y) ** 2 for x, y in zip(a, b))

    def assign():
        labels = [min(range(k), key=lambda c: (sq(p, cents[c]), c)) for p in points]
        taken = set()
        for c in range(k):
            if c in labels:
                continue
            dists = [sq(p, cents[c]) for p in points]
            for used in taken:
                dists[used] = -1.0
            far = max(range(len(points)), key=lambda i: (dists[i], -i))
            taken.add(far)
            cents[c] = list(points[far])
            labels = [min(range(k), key=lambda cc: (sq(p, cents[cc]), cc)) for p in points]
        return labels

    inertias = []
    for _ in range(max_iter):
        labels = assign()
        new_cents = []
        for c in range(k):
            members = [p for p, l in zip(points, labels) if l == c]
            if members:
                new_cents.append([sum(col) / len(members) for col in zip(*members)])
            else:
                new_cents.append(list(cents[c]))
        shift = max(np.sqrt(sq(a, b)) for a, b in zip(cents, new_cents))
        cents[:] = new_cents
        labels = [min(range(k), key=lambda c: (sq(p, cents[c]), c)) for p in points]
        inertias.append(sum(sq(p, cents[l]) for p, l in zip(points, labels)))
        if shift < tol:
            break
    return assign(), inertias


def ch_oracle(points, labels):
    """Calinski-Harabasz by direct summation; inf on degenerate splits."""
    points = [list(map(float, p)) for p in points]
    present = sorted(set(labels))
    k, n = len(present), len(points)
    if k < 2 or n <= k:
        return float("inf")
    overall = [sum(col) / n for col in zip(*points)]
    between = within = 0.0
    for c in present:
        members = [p for p, l in zip(points, labels) if l == c]
        mu = [sum(col) / len(members) for col in zip(*members)]
        between += len(members) * sum((a - b) ** 2 for a, b in zip(mu, overall))
        within += sum(sum((a - b) ** 2 for a, b in zip(p, mu)) for p in members)
    if within == 0.0:
        return float("inf")
    return (between / (k - 1)) / (within / (n - k))


def minmax_oracle(scores):
    finite = [s for s in scores if np.isfinite(s)]
    top = max(finite) if finite else 1.0
    s = [x if np.isfinite(x) else top for x in scores]
    lo, hi = min(s), max(s)
    if hi == lo:
        return [1.0] * len(s)
    return [(x - lo) / (hi - lo) for x in s]


def election_oracle(updates, n_selectees, k, layer_ids):
    """Straight-line vote arithmetic: centroid pick, Lloyd, CH, min-max, votes.

    updates: list of (client_id, {layer_id: 1-D array}); returns the
    selectee id list (ascending).
    """
    updates = sorted(updates, key=lambda u: u[0])
    ids = [cid for cid, _ in updates]
    counters = {cid: 0.0 for cid in ids}
    for m in layer_ids:
        slices = [np.asarray(by_layer[m], dtype=float) for _, by_layer in updates]
        points = [s.tolist() for s in slices]
        chs, assignments = [], []
        for vi in range(len(ids)):
            ranked = sorted(
                (j for j in range(len(ids)) if j != vi),
                key=lambda j: (-float(((slices[j] - slices[vi]) ** 2).sum()), ids[j]),
            )
            cents = [points[j] for j in ranked[:k - 1]] + [[0.0] * len(points[0])]
            labels, _ = lloyd_replay(points, cents)
            assignments.append(labels)
            chs.append(ch_oracle(points, labels))
        weights = minmax_oracle(chs)
        for vi in range(len(ids)):
            mine = assignments[vi][vi]
            for j in range(len(ids)):
                if assignments[vi][j] == mine:
                    counters[ids[j]] += weights[vi]
    ranked = sorted(ids, key=lambda cid: (-counters[cid], cid))
    return sorted(ranked[:n_selectees])


def planted_updates(rng, n, n_infected, layer_dims=(6, 4), benign_spread=0.3,
                    infected_shift=4.0, infected_spread=0.5):
    """Synthetic update population: benign cluster + shifted infected cluster.

    Returns (candidate updates, infected id set). Infected ids are chosen
    from the middle of the id range so id-based tie rules cannot mask a
    broken election.
    """
    gen = rng.generator()
    base = [gen.standard_normal(d) for d in layer_dims]
    shift_dir = [gen.standard_normal(d) for d in layer_dims]
    nrm = np.sqrt(sum(float(v @ v) for v in shift_dir))
    shift_dir = [v / nrm * infected_shift for v in shift_dir]
    infected_ids = set(int(i) for i in gen.choice(n, size=n_infected, replace=False))
    updates = []
    for cid in range(n):
        layers = []
        for li, d in enumerate(layer_dims):
            v = base[li] + gen.standard_normal(d) * benign_spread
            if cid in infected_ids:
                v = v + shift_dir[li] + gen.standard_normal(d) * infected_spread
            layers.append(v)
        updates.append(CandidateUpdate(cid, LayeredVector.from_arrays(layers), 10))
    return updates, infected_ids
