"""Slow, obviously-correct reference implementations used as test oracles."""

from __future__ import annotations


def brute_c_index(risks, time, event):
    """O(n^2) Harrell's C. Returns None when no pair is comparable."""
    num = 0.0
    den = 0
    n = len(risks)
    for i in range(n):
        if not event[i]:
            continue
        for j in range(n):
            if time[i] < time[j]:
                den += 1
                if risks[i] > risks[j]:
                    num += 1.0
                elif risks[i] == risks[j]:
                    num += 0.5
    return None if den == 0 else num / den


def km_oracle(time, event):
    """Product-limit estimate as {event_time: S(t)} by explicit counting."""
    out = {}
    s = 1.0
    for t in sorted({t for t, e in zip(time, event) if e}):
        at_risk = sum(1 for u in time if u >= t)
        deaths = sum(1 for u, e in zip(time, event) if e and u == t)
        s *= 1.0 - deaths / at_risk
        out[t] = s
    return out


def na_oracle(time, event):
    out = {}
    h = 0.0
    for t in sorted({t for t, e in zip(time, event) if e}):
        at_risk = sum(1 for u in time if u >= t)
        deaths = sum(1 for u, e in zip(time, event) if e and u == t)
        h += deaths / at_risk
        out[t] = h
    return out


def logrank_oracle(t1, e1, t2, e2):
    """Row-by-row log-rank table, as one would lay it out in a spreadsheet."""
    times = sorted({t for t, e in zip(t1 + t2, e1 + e2) if e})
    o_minus_e = 0.0
    var = 0.0
    for t in times:
        n1 = sum(1 for u in t1 if u >= t)
        n2 = sum(1 for u in t2 if u >= t)
        d1 = sum(1 for u, e in zip(t1, e1) if e and u == t)
        d2 = sum(1 for u, e in zip(t2, e2) if e and u == t)
        n, d = n1 + n2, d1 + d2
        o_minus_e += d1 - d * n1 / n
        if n > 1:
            var += d * (n1 / n) * (n2 / n) * (n - d) / (n - 1)
    return 0.0 if var <= 0 else o_minus_e**2 / var


def failure_truth(progressed, discontinued, adverse, modified, died, hospice):
    """The composite failure definition written out literally."""
    if progressed and discontinued:
        return True
    if adverse and modified:
        return True
    return bool(died or hospice)


def metrics_at_oracle(surv, time, event, t, threshold):
    """Composite mean(accuracy, F1 failure, F1 non-failure) at one time point."""
    tp = fp = tn = fn = 0
    for s, u, e in zip(surv, time, event):
        if u <= t and not e:
            continue
        y = 1 if (e and u <= t) else 0
        p = 1 if s < threshold else 0
        if p and y:
            tp += 1
        elif p:
            fp += 1
        elif y:
            fn += 1
        else:
            tn += 1
    n = tp + fp + tn + fn
    if n == 0:
        return 0.0
    acc = (tp + tn) / n
    f_pos = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    f_neg = 2 * tn / (2 * tn + fn + fp) if (2 * tn + fn + fp) else 0.0
    return (acc + f_pos + f_neg) / 3
