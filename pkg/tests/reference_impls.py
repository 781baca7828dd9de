"""Independent naive reference implementations used by the test suite.

Everything here is written as plain loops over scalars, deliberately
avoiding the vectorized formulations in the package, so that agreement
between the two is meaningful evidence of correctness.
"""

import math

import numpy as np


# ------------------------------------------------------------- metrics ----


def loop_rmse(truth, pred):
    t = np.asarray(truth, dtype=float).ravel()
    p = np.asarray(pred, dtype=float).ravel()
    acc = 0.0
    for a, b in zip(t, p):
        acc += (b - a) ** 2
    return math.sqrt(acc / len(t))


def loop_mae(truth, pred):
    t = np.asarray(truth, dtype=float).ravel()
    p = np.asarray(pred, dtype=float).ravel()
    acc = 0.0
    for a, b in zip(t, p):
        acc += abs(b - a)
    return acc / len(t)


def loop_pearson(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sxx = syy = 0.0
    for a, b in zip(x, y):
        sxy += (a - mx) * (b - my)
        sxx += (a - mx) ** 2
        syy += (b - my) ** 2
    return sxy / math.sqrt(sxx * syy)


def loop_rmspe_cells(truth, pred):
    """truth/pred shaped (time, cells): per-cell temporal RMSE over truth
    range, averaged over cells with nonzero range; returns (value, n_valid)."""
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    vals = []
    for c in range(truth.shape[1]):
        t = truth[:, c]
        p = pred[:, c]
        rng = max(t) - min(t)
        if rng == 0.0:
            continue
        vals.append(loop_rmse(t, p) / rng)
    if not vals:
        return float("nan"), 0
    return sum(vals) / len(vals), len(vals)


def loop_pearson_cells(truth, pred):
    truth = np.asarray(truth, dtype=float)
    pred = np.asarray(pred, dtype=float)
    vals = []
    for c in range(truth.shape[1]):
        t = truth[:, c]
        p = pred[:, c]
        if max(t) == min(t) or max(p) == min(p):
            continue
        vals.append(loop_pearson(t, p))
    if not vals:
        return float("nan"), 0
    return sum(vals) / len(vals), len(vals)


# ---------------------------------------------------------------- Adam ----


def scalar_adam_trace(theta0, grads, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8):
    """Scalar parameter updated by hand; returns the list of
    (m_hat, v_hat, theta) after each step."""
    theta = float(theta0)
    m = 0.0
    v = 0.0
    out = []
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        theta = theta - lr * m_hat / (math.sqrt(v_hat) + eps)
        out.append((m_hat, v_hat, theta))
    return out


# ----------------------------------------------------------- attention ----


def loop_softmax(row):
    m = max(row)
    e = [math.exp(x - m) for x in row]
    s = sum(e)
    return [x / s for x in e]


def loop_attention(x, wq, wk, wv, wo, bo, heads):
    """Per-head scaled dot-product attention with explicit Python loops.

    x: (batch, tokens, width); weight matrices (width, width); bo (width,).
    """
    x = np.asarray(x, dtype=float)
    b, n, width = x.shape
    hd = width // heads
    out = np.zeros((b, n, width))
    for bi in range(b):
        q = x[bi] @ wq
        k = x[bi] @ wk
        v = x[bi] @ wv
        ctx = np.zeros((n, width))
        for h in range(heads):
            sl = slice(h * hd, (h + 1) * hd)
            qh, kh, vh = q[:, sl], k[:, sl], v[:, sl]
            for i in range(n):
                scores = [float(qh[i] @ kh[j]) / math.sqrt(hd) for j in range(n)]
                weights = loop_softmax(scores)
                for j in range(n):
                    ctx[i, sl] += weights[j] * vh[j]
        out[bi] = ctx @ wo + bo
    return out


def loop_positional(n, width):
    pe = np.zeros((n, width))
    for pos in range(n):
        for i in range(0, width, 2):
            angle = pos / (10000.0 ** (i / width))
            pe[pos, i] = math.sin(angle)
            if i + 1 < width:
                pe[pos, i + 1] = math.cos(angle)
    return pe


def loop_batchnorm_train(x, gamma, beta, eps=1e-5):
    """Feature-wise batch normalization statistics computed per column."""
    x = np.asarray(x, dtype=float)
    m, d = x.shape
    out = np.zeros_like(x)
    means = np.zeros(d)
    variances = np.zeros(d)
    for j in range(d):
        col = x[:, j]
        mu = sum(col) / m
        var = sum((c - mu) ** 2 for c in col) / m
        means[j] = mu
        variances[j] = var
        for i in range(m):
            out[i, j] = gamma[j] * (x[i, j] - mu) / math.sqrt(var + eps) + beta[j]
    return out, means, variances


# ------------------------------------------------- finite differences ----


def fd_gradient(f, x, eps=1e-6):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    flat = x.ravel()
    gflat = g.ravel()
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f(x)
        flat[i] = old - eps
        fm = f(x)
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * eps)
    return g


# ----------------------------------------------------------- formulas ----


def loop_pressure(h, p0=1013.25, scale=8000.0):
    return p0 * math.exp(-h / scale)


def loop_decompose(speed, direction_deg):
    rad = math.radians(direction_deg)
    return -speed * math.sin(rad), -speed * math.cos(rad)


def loop_haversine(lat1, lon1, lat2, lon2, radius=6371.0):
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = math.radians(lat2 - lat1)
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * radius * math.asin(math.sqrt(a))


def loop_quantiles(sample, n_q):
    """Linear-interpolation quantiles at n_q evenly spaced probabilities."""
    s = sorted(float(x) for x in sample)
    n = len(s)
    out = []
    for i in range(n_q):
        q = i / (n_q - 1)
        pos = q * (n - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, n - 1)
        frac = pos - lo
        out.append(s[lo] * (1 - frac) + s[hi] * frac)
    return out
