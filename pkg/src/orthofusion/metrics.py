"""Survival evaluation statistics.

Pure numpy, stateless. Risk scores enter as 1-d arrays; survival outcomes
as anything ``as_survival`` accepts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .validation import ConfigError, NumericError, as_survival, check_vector

_Z_95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str


@dataclass(frozen=True)
class KMCurve:
    """Kaplan-Meier estimate tabulated at every distinct observed time.

    ``survival`` is S(t) just after each time; it only drops at rows with
    events. Patients censored at t remain at risk for an event at t.
    """

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    censored: np.ndarray


@dataclass(frozen=True)
class HazardRatio:
    hazard_ratio: float
    ci_low: float
    ci_high: float
    log_hr: float
    se: float


def chi2_1_sf(x: float) -> float:
    """Survival function of the chi-square distribution with 1 dof."""
    if x < 0:
        raise ConfigError("chi-square statistic must be nonnegative")
    return math.erfc(math.sqrt(x / 2.0))


def normal_sf_two_sided(z: float) -> float:
    return math.erfc(abs(z) / math.sqrt(2.0))


def concordance_index(theta, survival) -> float:
    """Harrell's concordance index.

    Comparable pairs (i, j): E_i = 1 with t_i < t_j, or t_i = t_j with
    E_i = 1 and E_j = 0. Concordant when theta_i > theta_j; ties in theta
    count 0.5.
    """
    sb = as_survival(survival)
    risk = check_vector(theta, "theta", length=sb.n)
    if sb.n < 2:
        raise ConfigError("concordance index needs at least 2 patients")
    t = sb.times
    e = sb.events
    event_i = e[:, None] == 1
    comparable = event_i & (
        (t[:, None] < t[None, :])
        | ((t[:, None] == t[None, :]) & (e[None, :] == 0))
    )
    higher = risk[:, None] > risk[None, :]
    tied = risk[:, None] == risk[None, :]
    total = int(comparable.sum())
    if total == 0:
        raise ConfigError("no comparable pairs: concordance index is undefined")
    score = (comparable & higher).sum() + 0.5 * (comparable & tied).sum()
    return float(score / total)


def km_estimate(survival) -> KMCurve:
    """Product-limit survival estimate S(t) = prod (1 - d_i / n_i)."""
    sb = as_survival(survival)
    times = np.unique(sb.times)
    at_risk = np.empty(times.shape[0], dtype=np.int64)
    events = np.empty_like(at_risk)
    censored = np.empty_like(at_risk)
    surv = np.empty(times.shape[0])
    s = 1.0
    for i, t in enumerate(times):
        at_risk[i] = int(np.sum(sb.times >= t))
        events[i] = int(np.sum((sb.times == t) & (sb.events == 1)))
        censored[i] = int(np.sum((sb.times == t) & (sb.events == 0)))
        if events[i] > 0:
            s *= 1.0 - events[i] / at_risk[i]
        surv[i] = s
    return KMCurve(times=times, survival=surv, at_risk=at_risk, events=events,
                   censored=censored)


def log_rank_test(group_a, group_b) -> TestResult:
    """Two-group log-rank test: chi-square (O - E)^2 / V with 1 dof.

    V is the usual hypergeometric variance accumulated over distinct event
    times. A zero variance with events present carries no discriminating
    information; the statistic is reported as 0 with p = 1.
    """
    a = as_survival(group_a)
    b = as_survival(group_b)
    all_times = np.concatenate([a.times, b.times])
    all_events = np.concatenate([a.events, b.events])
    event_times = np.unique(all_times[all_events == 1])
    if event_times.size == 0:
        raise ConfigError("log-rank test requires at least one event")
    o_minus_e = 0.0
    variance = 0.0
    for t in event_times:
        n1 = int(np.sum(a.times >= t))
        n2 = int(np.sum(b.times >= t))
        n = n1 + n2
        d = int(np.sum((all_times == t) & (all_events == 1)))
        d1 = int(np.sum((a.times == t) & (a.events == 1)))
        o_minus_e += d1 - d * (n1 / n)
        if n > 1:
            variance += d * (n1 / n) * (n2 / n) * (n - d) / (n - 1)
    if variance == 0.0:
        return TestResult(statistic=0.0, p_value=1.0, method="log-rank")
    chi2 = o_minus_e * o_minus_e / variance
    return TestResult(statistic=float(chi2), p_value=chi2_1_sf(chi2), method="log-rank")


def hazard_ratio(labels, survival, max_iter: int = 100, tol: float = 1e-10) -> HazardRatio:
    """Univariate Cox fit on a binary group label, Breslow tie handling.

    Newton-Raphson on the partial likelihood; HR = exp(beta) with a Wald
    95% confidence interval.
    """
    sb = as_survival(survival)
    x = np.asarray(labels).reshape(-1)
    if x.shape[0] != sb.n:
        raise ConfigError("labels and survival batch must have equal length")
    if not np.isin(x, (0, 1)).all():
        raise ConfigError("labels must be binary (0/1)")
    x = x.astype(float)
    event_idx = np.flatnonzero(sb.events == 1)
    if not ((x[event_idx] == 1).any() and (x[event_idx] == 0).any()):
        raise ConfigError("hazard ratio requires at least one event in each group")

    risk_mask = sb.times[None, :] >= sb.times[event_idx][:, None]
    n1_at_risk = (risk_mask & (x[None, :] == 1)).sum(axis=1).astype(float)
    n0_at_risk = (risk_mask & (x[None, :] == 0)).sum(axis=1).astype(float)
    x_events = x[event_idx]

    beta = 0.0
    for _ in range(max_iter):
        w1 = n1_at_risk * math.exp(beta)
        pi = w1 / (w1 + n0_at_risk)
        score = float(np.sum(x_events - pi))
        info = float(np.sum(pi * (1.0 - pi)))
        if info <= 0:
            raise NumericError("hazard ratio fit failed: zero information")
        step = score / info
        beta += step
        if abs(beta) > 30.0:
            raise NumericError(
                "hazard ratio fit failed: monotone likelihood (groups separate completely)"
            )
        if abs(step) < tol:
            se = 1.0 / math.sqrt(info)
            return HazardRatio(
                hazard_ratio=math.exp(beta),
                ci_low=math.exp(beta - _Z_95 * se),
                ci_high=math.exp(beta + _Z_95 * se),
                log_hr=beta,
                se=se,
            )
    raise NumericError(f"hazard ratio fit did not converge in {max_iter} iterations")


def _mwu_statistic(a: np.ndarray, b: np.ndarray) -> float:
    gt = (a[:, None] > b[None, :]).sum()
    eq = (a[:, None] == b[None, :]).sum()
    return float(gt) + 0.5 * float(eq)


def _mwu_exact_p(a: np.ndarray, b: np.ndarray, u_obs: float) -> float:
    """Exact two-sided p over all group assignments, ties handled.

    Dynamic program over tie groups of the pooled sample in increasing value
    order. Choosing k elements of a tie group (size c, with j of the other
    group's members already placed below) adds 2*k*b_below + k*(c - k) to the
    doubled U statistic; counts multiply by C(c, k).
    """
    pooled = np.sort(np.concatenate([a, b]))
    n = pooled.shape[0]
    n_a = a.shape[0]
    group_sizes = [len(list(g)) for g in _runs(pooled)]
    # dp[(a_used, doubled_u)] = number of assignments
    dp = {(0, 0): 1}
    placed = 0
    for c in group_sizes:
        nxt: dict[tuple[int, int], int] = {}
        for (used, du), cnt in dp.items():
            b_below = placed - used
            for k in range(0, min(c, n_a - used) + 1):
                key = (used + k, du + 2 * k * b_below + k * (c - k))
                nxt[key] = nxt.get(key, 0) + cnt * math.comb(c, k)
        dp = nxt
        placed += c
    dist = {du: cnt for (used, du), cnt in dp.items() if used == n_a}
    total = sum(dist.values())
    du_obs = int(round(2 * u_obs))
    mirror = 2 * n_a * (n - n_a) - du_obs
    lo, hi = min(du_obs, mirror), max(du_obs, mirror)
    tail = sum(cnt for du, cnt in dist.items() if du <= lo or du >= hi)
    return min(1.0, tail / total)


def _runs(sorted_values: np.ndarray):
    start = 0
    for i in range(1, sorted_values.shape[0] + 1):
        if i == sorted_values.shape[0] or sorted_values[i] != sorted_values[start]:
            yield sorted_values[start:i]
            start = i


def mann_whitney_u(sample_a, sample_b) -> TestResult:
    """Mann-Whitney U test (U for sample A), two-sided.

    Exact permutation p-value whenever nA * nB <= 400; otherwise the
    tie-corrected normal approximation without continuity correction.
    """
    a = check_vector(sample_a, "sample_a")
    b = check_vector(sample_b, "sample_b")
    if a.size == 0 or b.size == 0:
        raise ConfigError("both samples must be non-empty")
    u = _mwu_statistic(a, b)
    n_a, n_b = a.shape[0], b.shape[0]
    if n_a * n_b <= 400:
        return TestResult(statistic=u, p_value=_mwu_exact_p(a, b, u), method="exact")
    n = n_a + n_b
    mu = n_a * n_b / 2.0
    _, tie_counts = np.unique(np.concatenate([a, b]), return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (n * (n - 1))
    sigma_sq = (n_a * n_b / 12.0) * ((n + 1) - tie_term)
    if sigma_sq <= 0:
        return TestResult(statistic=u, p_value=1.0, method="normal-approximation")
    z = (u - mu) / math.sqrt(sigma_sq)
    return TestResult(statistic=u, p_value=normal_sf_two_sided(z), method="normal-approximation")


def assign_risk_groups(theta) -> np.ndarray:
    """Binary risk groups: 1 (high) iff the risk score is strictly positive."""
    risk = check_vector(theta, "theta")
    return (risk > 0).astype(np.int64)
