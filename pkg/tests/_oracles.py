"""Independent brute-force oracles, frozen before the implementations.

Everything here recomputes expected values by the most literal route
available (explicit loops, full enumeration, eigendecomposition) and is
never imported by the package itself.
"""

import itertools
import math
from collections import defaultdict

import numpy as np


def naive_matmul(a, b):
    """Triple-loop matrix product."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def singular_values_via_gram(a):
    """Singular values from the eigenvalues of A^T A (or A A^T), descending."""
    a = np.asarray(a, dtype=float)
    gram = a.T @ a if a.shape[0] >= a.shape[1] else a @ a.T
    evals = np.linalg.eigvalsh(gram)
    return np.sqrt(np.clip(evals, 0.0, None))[::-1]


def nuclear_norm_via_gram(a):
    return float(singular_values_via_gram(a).sum())


def cox_loss_enumerated(theta, times, events):
    """Negative Cox log partial likelihood with explicitly enumerated risk sets."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    times = np.asarray(times, dtype=float).reshape(-1)
    events = np.asarray(events).reshape(-1)
    total = 0.0
    for i in range(len(times)):
        if events[i] != 1:
            continue
        risk = [math.exp(theta[j]) for j in range(len(times)) if times[j] >= times[i]]
        total -= theta[i] - math.log(sum(risk))
    return total


def concordance_enumerated(theta, times, events):
    """Harrell's C by literal pair enumeration.

    Comparable: (i, j) with E_i = 1 and t_i < t_j, plus t_i = t_j with
    E_i = 1 and E_j = 0. Concordant when theta_i > theta_j; risk ties 0.5.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    times = np.asarray(times, dtype=float).reshape(-1)
    events = np.asarray(events).reshape(-1)
    num = 0.0
    den = 0
    for i in range(len(times)):
        if events[i] != 1:
            continue
        for j in range(len(times)):
            if j == i:
                continue
            comparable = times[i] < times[j] or (times[i] == times[j] and events[j] == 0)
            if not comparable:
                continue
            den += 1
            if theta[i] > theta[j]:
                num += 1.0
            elif theta[i] == theta[j]:
                num += 0.5
    if den == 0:
        raise ZeroDivisionError("no comparable pairs")
    return num / den


def _u_statistic(a, b):
    """U for sample a: count of (x, y) pairs with x > y, ties as 0.5."""
    u = 0.0
    for x in a:
        for y in b:
            if x > y:
                u += 1.0
            elif x == y:
                u += 0.5
    return u


def mwu_exact_enumeration_small(a, b):
    """Two-sided exact Mann-Whitney p by literal enumeration of assignments.

    Feasible up to roughly C(12, 6) combined arrangements.
    """
    a = list(a)
    b = list(b)
    pooled = a + b
    n_a = len(a)
    u_obs = _u_statistic(a, b)
    mu = n_a * len(b) / 2.0
    lo, hi = min(u_obs, 2 * mu - u_obs), max(u_obs, 2 * mu - u_obs)
    count = 0
    total = 0
    for idx in itertools.combinations(range(len(pooled)), n_a):
        total += 1
        sel = set(idx)
        ga = [pooled[i] for i in idx]
        gb = [pooled[i] for i in range(len(pooled)) if i not in sel]
        u = _u_statistic(ga, gb)
        if u <= lo + 1e-12 or u >= hi - 1e-12:
            count += 1
    return min(1.0, count / total)


def mwu_exact_meet_in_the_middle(a, b):
    """Two-sided exact Mann-Whitney p at nA = nB = 15 via split enumeration.

    Uses the midrank identity U_A = R_A - nA*(nA+1)/2: midranks depend only
    on the pooled multiset, which is fixed across group assignments, so U is
    a sum of fixed per-element weights over the chosen subset. Split the
    pooled sample into two halves, enumerate every subset of each half into
    a (size, doubled rank-sum) count table, and convolve the tables. Doubled
    quantities keep everything integer under half-point ties.
    """
    pooled = sorted(list(a) + list(b))
    n = len(pooled)
    n_a = len(a)
    n_b = len(b)
    doubled_midranks = []
    i = 0
    while i < n:
        j = i
        while j < n and pooled[j] == pooled[i]:
            j += 1
        # ranks i+1 .. j (1-based); midrank = (i+1+j)/2; doubled = i+1+j
        for _ in range(i, j):
            doubled_midranks.append(i + 1 + j)
        i = j
    u_obs = _u_statistic(a, b)
    doubled_u_obs = int(round(2 * u_obs))

    def subset_table(weights):
        table = {(0, 0): 1}
        for w in weights:
            for (k, s), c in list(table.items()):
                key = (k + 1, s + w)
                table[key] = table.get(key, 0) + c
        return table

    half = n // 2
    t1 = subset_table(doubled_midranks[:half])
    t2 = subset_table(doubled_midranks[half:])
    # distribution of doubled rank-sum of sample A over all C(n, nA) subsets
    dist = {}
    t2_by_size = defaultdict(list)
    for (k, s), c in t2.items():
        t2_by_size[k].append((s, c))
    for (k1, s1), c1 in t1.items():
        for s2, c2 in t2_by_size.get(n_a - k1, ()):
            dist[s1 + s2] = dist.get(s1 + s2, 0) + c1 * c2
    # doubled U = doubled rank-sum - nA*(nA+1)
    shift = n_a * (n_a + 1)
    mu2 = n_a * n_b  # doubled mean of U
    lo = min(doubled_u_obs, 2 * mu2 - doubled_u_obs)
    hi = max(doubled_u_obs, 2 * mu2 - doubled_u_obs)
    count = 0
    total = 0
    for s, c in dist.items():
        du = s - shift
        total += c
        if du <= lo or du >= hi:
            count += c
    return min(1.0, count / total)


def km_table(times, events):
    """Kaplan-Meier by literal risk-set counting at each distinct event time."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(int)
    event_times = sorted(set(times[events == 1]))
    surv = []
    s = 1.0
    for t in event_times:
        n_at_risk = int(np.sum(times >= t))
        d = int(np.sum((times == t) & (events == 1)))
        s *= 1.0 - d / n_at_risk
        surv.append(s)
    return event_times, surv


def logrank_chi2(times_a, events_a, times_b, events_b):
    """Two-group log-rank chi-square from the literal O/E hypergeometric table."""
    times_a = np.asarray(times_a, dtype=float)
    times_b = np.asarray(times_b, dtype=float)
    events_a = np.asarray(events_a).astype(int)
    events_b = np.asarray(events_b).astype(int)
    all_times = np.concatenate([times_a, times_b])
    all_events = np.concatenate([events_a, events_b])
    event_times = sorted(set(all_times[all_events == 1]))
    o_minus_e = 0.0
    var = 0.0
    for t in event_times:
        n1 = int(np.sum(times_a >= t))
        n2 = int(np.sum(times_b >= t))
        n = n1 + n2
        d = int(np.sum((all_times == t) & (all_events == 1)))
        d1 = int(np.sum((times_a == t) & (events_a == 1)))
        o_minus_e += d1 - d * n1 / n
        if n > 1:
            var += d * (n1 / n) * (n2 / n) * (n - d) / (n - 1)
    return o_minus_e**2 / var
