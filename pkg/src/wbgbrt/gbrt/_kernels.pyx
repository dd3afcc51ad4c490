# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled split-finding, partitioning and prediction kernels.

Every reduction runs in the same order as the numpy fallback in
``_fallback.py`` so both backends grow bit-identical trees.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int32_t i32
ctypedef cnp.int64_t i64
ctypedef cnp.uint16_t u16

cdef double NEG_INF = -np.inf


cdef inline double _gain(double GL, double HL, double G, double H, double lam, double gamma) nogil:
    cdef double GR = G - GL
    cdef double HR = H - HL
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)) - gamma


cdef inline double _midpoint(double a, double b) nogil:
    cdef double m = (a + b) * 0.5
    if m <= a:
        m = b
    return m


def node_sums(const i32[::1] node, const f64[::1] g, const f64[::1] h, Py_ssize_t n_nodes):
    cdef Py_ssize_t r, k, n = node.shape[0]
    G_ = np.zeros(n_nodes)
    H_ = np.zeros(n_nodes)
    C_ = np.zeros(n_nodes, dtype=np.int64)
    cdef f64[::1] G = G_
    cdef f64[::1] H = H_
    cdef i64[::1] C = C_
    with nogil:
        for r in range(n):
            k = node[r]
            if k < 0:
                continue
            G[k] += g[r]
            H[k] += h[r]
            C[k] += 1
    return G_, H_, C_


def best_splits_exact(const f64[:, ::1] vals, const i32[:, ::1] order, const i32[::1] node,
                      const f64[::1] g, const f64[::1] h,
                      const f64[::1] G, const f64[::1] H, const i32[::1] features,
                      double lam, double gamma, double mcw):
    """Best (gain, feature, threshold) per node by exact greedy enumeration.

    ``order[f]`` lists all rows sorted by feature ``f`` and ``vals[f]`` the
    matching values.  Candidates are midpoints between consecutive distinct
    values inside a node; ties keep the earlier feature and the lower
    threshold.
    """
    cdef Py_ssize_t k_nodes = G.shape[0]
    cdef Py_ssize_t n = order.shape[1]
    cdef Py_ssize_t fi, f, p, r, k
    cdef double v, gain, HL
    best_ = np.full(k_nodes, NEG_INF)
    feat_ = np.full(k_nodes, -1, dtype=np.int32)
    thr_ = np.zeros(k_nodes)
    cdef f64[::1] best = best_
    cdef i32[::1] feat = feat_
    cdef f64[::1] thr = thr_
    cdef f64[::1] GL = np.zeros(k_nodes)
    cdef f64[::1] HLs = np.zeros(k_nodes)
    cdef f64[::1] last = np.zeros(k_nodes)
    cdef cnp.uint8_t[::1] seen = np.zeros(k_nodes, dtype=np.uint8)
    with nogil:
        for fi in range(features.shape[0]):
            f = features[fi]
            for k in range(k_nodes):
                GL[k] = 0.0
                HLs[k] = 0.0
                seen[k] = 0
            for p in range(n):
                r = order[f, p]
                k = node[r]
                if k < 0:
                    continue
                v = vals[f, p]
                if seen[k] and v != last[k]:
                    HL = HLs[k]
                    if HL >= mcw and H[k] - HL >= mcw:
                        gain = _gain(GL[k], HL, G[k], H[k], lam, gamma)
                        if gain > best[k]:
                            best[k] = gain
                            feat[k] = <i32>f
                            thr[k] = _midpoint(last[k], v)
                GL[k] += g[r]
                HLs[k] += h[r]
                last[k] = v
                seen[k] = 1
    return best_, feat_, thr_


def best_splits_hist(const u16[:, ::1] bins, const i32[::1] nbins, const f64[:, ::1] cuts,
                     const i32[::1] node, const f64[::1] g, const f64[::1] h,
                     const f64[::1] G, const f64[::1] H, const i64[::1] C,
                     const i32[::1] features, double lam, double gamma, double mcw):
    """Histogram variant: candidates are the bin cut points ``cuts[f, b]``.

    Each bin holds (gradient sum, hessian sum, count) side by side.
    """
    cdef Py_ssize_t k_nodes = G.shape[0]
    cdef Py_ssize_t n = bins.shape[0]
    cdef Py_ssize_t nf = features.shape[0]
    cdef Py_ssize_t maxb = cuts.shape[1] + 1
    cdef Py_ssize_t fi, f, b, r, k
    cdef double gl, hl, gain, gr, hr
    cdef double cl
    hist_ = np.zeros((k_nodes, nf, maxb, 3))
    cdef f64[:, :, :, ::1] hist = hist_
    best_ = np.full(k_nodes, NEG_INF)
    feat_ = np.full(k_nodes, -1, dtype=np.int32)
    thr_ = np.zeros(k_nodes)
    cdef f64[::1] best = best_
    cdef i32[::1] feat = feat_
    cdef f64[::1] thr = thr_
    with nogil:
        for r in range(n):
            k = node[r]
            if k < 0:
                continue
            gr = g[r]
            hr = h[r]
            for fi in range(nf):
                b = bins[r, features[fi]]
                hist[k, fi, b, 0] += gr
                hist[k, fi, b, 1] += hr
                hist[k, fi, b, 2] += 1.0
        for k in range(k_nodes):
            for fi in range(nf):
                f = features[fi]
                gl = 0.0
                hl = 0.0
                cl = 0.0
                for b in range(nbins[f] - 1):
                    gl += hist[k, fi, b, 0]
                    hl += hist[k, fi, b, 1]
                    cl += hist[k, fi, b, 2]
                    if cl == 0.0 or cl == <double>C[k]:
                        continue
                    if hl >= mcw and H[k] - hl >= mcw:
                        gain = _gain(gl, hl, G[k], H[k], lam, gamma)
                        if gain > best[k]:
                            best[k] = gain
                            feat[k] = <i32>f
                            thr[k] = cuts[f, b]
    return best_, feat_, thr_


def partition(const f64[:, ::1] X, const i32[::1] node, const i32[::1] feat, const f64[::1] thr,
              const i32[::1] left, const i32[::1] right):
    """Route rows to next-level node indices; rows of unsplit nodes get -1."""
    cdef Py_ssize_t r, k, n = node.shape[0]
    out_ = np.empty(n, dtype=np.int32)
    cdef i32[::1] out = out_
    with nogil:
        for r in range(n):
            k = node[r]
            if k < 0 or left[k] < 0:
                out[r] = -1
            elif X[r, feat[k]] < thr[k]:
                out[r] = left[k]
            else:
                out[r] = right[k]
    return out_


def predict_trees(const f64[:, ::1] X, const i32[::1] feature, const f64[::1] threshold,
                  const i32[::1] left, const i32[::1] right, const f64[::1] value,
                  const i64[::1] roots):
    """Sum of raw tree outputs per row, trees added in order."""
    cdef Py_ssize_t r, t, j, n = X.shape[0], n_trees = roots.shape[0]
    cdef double acc
    out_ = np.zeros(n)
    cdef f64[::1] out = out_
    with nogil:
        for r in range(n):
            acc = 0.0
            for t in range(n_trees):
                j = roots[t]
                while feature[j] >= 0:
                    if X[r, feature[j]] < threshold[j]:
                        j = left[j]
                    else:
                        j = right[j]
                acc += value[j]
            out[r] = acc
    return out_
