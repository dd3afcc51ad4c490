"""Pure numpy versions of the compiled kernels.

Same signatures and results as ``_kernels.pyx``: sums are accumulated in
the same order (``np.bincount`` and ``np.cumsum`` are sequential), so the
two backends agree bit for bit.
"""

import numpy as np


def node_sums(node, g, h, n_nodes):
    keep = node >= 0
    k = node[keep]
    G = np.bincount(k, weights=g[keep], minlength=n_nodes).astype(np.float64)
    H = np.bincount(k, weights=h[keep], minlength=n_nodes).astype(np.float64)
    C = np.bincount(k, minlength=n_nodes).astype(np.int64)
    return G, H, C


def _gain(GL, HL, G, H, lam, gamma):
    GR = G - GL
    HR = H - HL
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)) - gamma


def _midpoint(a, b):
    m = (a + b) * 0.5
    return b if m <= a else m


def best_splits_exact(vals, order, node, g, h, G, H, features, lam, gamma, mcw):
    k_nodes = G.shape[0]
    best = np.full(k_nodes, -np.inf)
    feat = np.full(k_nodes, -1, dtype=np.int32)
    thr = np.zeros(k_nodes)
    for f in features:
        o = order[f]
        k = node[o]
        keep = k >= 0
        o, k, fv = o[keep], k[keep], vals[f][keep]
        s = np.argsort(k, kind="stable")
        o, k, fv = o[s], k[s], fv[s]
        bounds = np.searchsorted(k, np.arange(k_nodes + 1))
        for j in range(k_nodes):
            a, b = bounds[j], bounds[j + 1]
            if b - a < 2:
                continue
            v = fv[a:b]
            cand = np.flatnonzero(v[:-1] != v[1:])
            if cand.size == 0:
                continue
            GL = np.cumsum(g[o[a:b]])[cand]
            HL = np.cumsum(h[o[a:b]])[cand]
            gain = _gain(GL, HL, G[j], H[j], lam, gamma)
            gain[(HL < mcw) | (H[j] - HL < mcw)] = -np.inf
            i = int(np.argmax(gain))
            if gain[i] > best[j]:
                best[j] = gain[i]
                feat[j] = f
                thr[j] = _midpoint(v[cand[i]], v[cand[i] + 1])
    return best, feat, thr


def best_splits_hist(bins, nbins, cuts, node, g, h, G, H, C, features, lam, gamma, mcw):
    k_nodes = G.shape[0]
    maxb = cuts.shape[1] + 1
    best = np.full(k_nodes, -np.inf)
    feat = np.full(k_nodes, -1, dtype=np.int32)
    thr = np.zeros(k_nodes)
    keep = node >= 0
    k = node[keep].astype(np.int64)
    gk, hk = g[keep], h[keep]
    size = k_nodes * maxb
    for f in features:
        idx = k * maxb + bins[keep, f]
        HG = np.bincount(idx, weights=gk, minlength=size).reshape(k_nodes, maxb)
        HH = np.bincount(idx, weights=hk, minlength=size).reshape(k_nodes, maxb)
        HC = np.bincount(idx, minlength=size).reshape(k_nodes, maxb)
        nb = nbins[f] - 1
        if nb < 1:
            continue
        GL = np.cumsum(HG, axis=1)[:, :nb]
        HL = np.cumsum(HH, axis=1)[:, :nb]
        CL = np.cumsum(HC, axis=1)[:, :nb]
        gain = _gain(GL, HL, G[:, None], H[:, None], lam, gamma)
        bad = (CL == 0) | (CL == C[:, None]) | (HL < mcw) | (H[:, None] - HL < mcw)
        gain[bad] = -np.inf
        i = np.argmax(gain, axis=1)
        top = gain[np.arange(k_nodes), i]
        better = top > best
        best[better] = top[better]
        feat[better] = f
        thr[better] = cuts[f, i[better]]
    return best, feat, thr


def partition(X, node, feat, thr, left, right):
    out = np.full(node.shape[0], -1, dtype=np.int32)
    active = node >= 0
    active[active] = left[node[active]] >= 0
    r = np.flatnonzero(active)
    k = node[r]
    go_left = X[r, feat[k]] < thr[k]
    out[r] = np.where(go_left, left[k], right[k])
    return out


def predict_trees(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    out = np.zeros(n)
    rows = np.arange(n)
    for root in roots:
        j = np.full(n, root, dtype=np.int64)
        internal = feature[j] >= 0
        while internal.any():
            r = rows[internal]
            jr = j[r]
            go_left = X[r, feature[jr]] < threshold[jr]
            j[r] = np.where(go_left, left[jr], right[jr])
            internal[r] = feature[j[r]] >= 0
        out += value[j]
    return out
