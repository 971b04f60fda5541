"""Hot numeric kernels, JIT-compiled with numba when available.

Every kernel has two implementations: a ``*_numpy`` reference path and a
``@njit`` path. The active path is picked once at import time; setting the
environment variable ``CHUNKSEEK_NUMBA=0`` forces the numpy path even when
numba is installed. Both paths stay importable so the equivalence tests and
``benchmarks/bench_kernels.py`` can compare them directly.

Dense matrix products (the query MLP) are deliberately *not* jitted: BLAS
beats a naive loop there. The kernels below are the window/pooling loops,
the batched cosine scorer, the fused soft-match forward/backward, and the
sequential FNV-1a checksum, where a compiled loop pays off.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def decorator(fn):
            return fn

        return decorator


NUMBA_ENABLED = HAVE_NUMBA and os.environ.get("CHUNKSEEK_NUMBA", "1") != "0"

#: Guard added to cosine denominators; a zero vector scores 0 instead of NaN.
COSINE_EPS = 1e-12

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF


# ---------------------------------------------------------------------------
# Window-mean pooling: (frames, h, w, dim) -> (frames, h/s, w/s, dim)
# ---------------------------------------------------------------------------


def window_mean_numpy(frames: np.ndarray, stride: int) -> np.ndarray:
    m, h, w, d = frames.shape
    hb, wb = h // stride, w // stride
    return frames.reshape(m, hb, stride, wb, stride, d).mean(axis=(2, 4))


@njit(cache=True)
def _window_mean_jit(frames, stride):
    m, h, w, d = frames.shape
    hb = h // stride
    wb = w // stride
    out = np.zeros((m, hb, wb, d), dtype=np.float64)
    inv = 1.0 / (stride * stride)
    for t in range(m):
        for i in range(hb):
            for j in range(wb):
                for a in range(stride):
                    for b in range(stride):
                        for k in range(d):
                            out[t, i, j, k] += frames[t, i * stride + a, j * stride + b, k]
                for k in range(d):
                    out[t, i, j, k] *= inv
    return out


# ---------------------------------------------------------------------------
# Chunk token pooling: (frames, h, w, dim) -> (h*w + frames, dim)
# Rows 0..h*w-1: per-position temporal means, row-major over the grid.
# Rows h*w..:    per-frame spatial means, in time order.
# ---------------------------------------------------------------------------


def pool_tokens_numpy(down: np.ndarray) -> np.ndarray:
    m, hb, wb, d = down.shape
    n = hb * wb
    spatial = down.mean(axis=0).reshape(n, d)
    per_frame = down.reshape(m, n, d).mean(axis=1)
    return np.concatenate([spatial, per_frame], axis=0)


@njit(cache=True)
def _pool_tokens_jit(down):
    m, hb, wb, d = down.shape
    n = hb * wb
    out = np.zeros((n + m, d), dtype=np.float64)
    inv_m = 1.0 / m
    inv_n = 1.0 / n
    for t in range(m):
        for i in range(hb):
            for j in range(wb):
                pos = i * wb + j
                for k in range(d):
                    v = down[t, i, j, k]
                    out[pos, k] += v * inv_m
                    out[n + t, k] += v * inv_n
    return out


# ---------------------------------------------------------------------------
# Batched cosine similarity of one query against a bank of row vectors.
# ---------------------------------------------------------------------------


def cosine_scores_numpy(query: np.ndarray, reps: np.ndarray) -> np.ndarray:
    qn = np.sqrt(query @ query)
    vn = np.sqrt(np.einsum("ld,ld->l", reps, reps))
    denom = np.maximum(qn * vn, COSINE_EPS)
    return np.clip(reps @ query / denom, -1.0, 1.0)


@njit(cache=True)
def _cosine_scores_jit(query, reps):
    n, d = reps.shape
    qq = 0.0
    for k in range(d):
        qq += query[k] * query[k]
    qn = np.sqrt(qq)
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        dot = 0.0
        vv = 0.0
        for k in range(d):
            dot += reps[i, k] * query[k]
            vv += reps[i, k] * reps[i, k]
        denom = qn * np.sqrt(vv)
        if denom < COSINE_EPS:
            denom = COSINE_EPS
        s = dot / denom
        if s > 1.0:
            s = 1.0
        elif s < -1.0:
            s = -1.0
        out[i] = s
    return out


# ---------------------------------------------------------------------------
# Fused soft-match forward/backward.
#
# loss(q) = -cos(q, vbar),  vbar = sum_j softmax(s)_j * reps_j,
# s_j = cos(q, reps_j). The returned gradient is the total derivative in q,
# flowing through both the outer cosine and the softmax weights.
# Cosines here are left unclipped so the function stays smooth. At the
# epsilon-guard point (query or weighted combination effectively zero) the
# loss is not differentiable; the gradient there is defined as zero, the
# same flat convention used for ReLU at zero.
# ---------------------------------------------------------------------------


def soft_match_numpy(query: np.ndarray, reps: np.ndarray) -> tuple[float, np.ndarray]:
    qn = np.sqrt(query @ query)
    qn2 = max(qn * qn, COSINE_EPS)
    vn = np.sqrt(np.einsum("ld,ld->l", reps, reps))
    denom = np.maximum(qn * vn, COSINE_EPS)
    scores = reps @ query / denom

    shifted = np.exp(scores - scores.max())
    weights = shifted / shifted.sum()
    vbar = weights @ reps

    vbn2 = float(vbar @ vbar)
    vbn = np.sqrt(vbn2)
    outer_denom = max(qn * vbn, COSINE_EPS)
    cos_out = float(query @ vbar) / outer_denom

    if qn * qn <= COSINE_EPS or vbn2 <= COSINE_EPS:
        return -cos_out, np.zeros_like(query)

    # d cos / dq holding vbar fixed
    grad_direct = vbar / outer_denom - cos_out * query / qn2
    # d cos / d vbar
    grad_vbar = query / outer_denom - cos_out * vbar / vbn2
    # chain through the softmax weights
    avals = reps @ grad_vbar
    abar = float(weights @ avals)
    dcos_dscore = weights * (avals - abar)
    grad_soft = reps.T @ (dcos_dscore / denom) - float(dcos_dscore @ scores) * query / qn2

    return -cos_out, -(grad_direct + grad_soft)


@njit(cache=True)
def _soft_match_jit(query, reps):
    n, d = reps.shape
    qq = 0.0
    for k in range(d):
        qq += query[k] * query[k]
    qn = np.sqrt(qq)
    qn2 = qq if qq > COSINE_EPS else COSINE_EPS

    scores = np.empty(n, dtype=np.float64)
    denom = np.empty(n, dtype=np.float64)
    for i in range(n):
        dot = 0.0
        vv = 0.0
        for k in range(d):
            dot += reps[i, k] * query[k]
            vv += reps[i, k] * reps[i, k]
        dn = qn * np.sqrt(vv)
        if dn < COSINE_EPS:
            dn = COSINE_EPS
        denom[i] = dn
        scores[i] = dot / dn

    smax = scores[0]
    for i in range(1, n):
        if scores[i] > smax:
            smax = scores[i]
    weights = np.empty(n, dtype=np.float64)
    wsum = 0.0
    for i in range(n):
        e = np.exp(scores[i] - smax)
        weights[i] = e
        wsum += e
    vbar = np.zeros(d, dtype=np.float64)
    for i in range(n):
        weights[i] /= wsum
        for k in range(d):
            vbar[k] += weights[i] * reps[i, k]

    vbn2 = 0.0
    qdotv = 0.0
    for k in range(d):
        vbn2 += vbar[k] * vbar[k]
        qdotv += query[k] * vbar[k]
    vbn = np.sqrt(vbn2)
    outer_denom = qn * vbn
    if outer_denom < COSINE_EPS:
        outer_denom = COSINE_EPS
    cos_out = qdotv / outer_denom

    if qq <= COSINE_EPS or vbn2 <= COSINE_EPS:
        return -cos_out, np.zeros(d, dtype=np.float64)

    avals = np.empty(n, dtype=np.float64)
    abar = 0.0
    for i in range(n):
        acc = 0.0
        for k in range(d):
            acc += reps[i, k] * (query[k] / outer_denom - cos_out * vbar[k] / vbn2)
        avals[i] = acc
        abar += weights[i] * acc

    grad = np.empty(d, dtype=np.float64)
    for k in range(d):
        grad[k] = vbar[k] / outer_denom - cos_out * query[k] / qn2
    score_dot = 0.0
    for i in range(n):
        coef = weights[i] * (avals[i] - abar)
        score_dot += coef * scores[i]
        ci = coef / denom[i]
        for k in range(d):
            grad[k] += ci * reps[i, k]
    for k in range(d):
        grad[k] -= score_dot * query[k] / qn2
        grad[k] = -grad[k]

    return -cos_out, grad


# ---------------------------------------------------------------------------
# FNV-1a 64-bit checksum over a byte payload.
# ---------------------------------------------------------------------------


def fnv1a64_numpy(payload: bytes) -> int:
    h = _FNV_OFFSET
    for b in payload:
        h ^= b
        h = (h * _FNV_PRIME) & _U64_MASK
    return h


@njit(cache=True)
def _fnv1a64_jit(payload):
    h = np.uint64(_FNV_OFFSET)
    prime = np.uint64(_FNV_PRIME)
    for i in range(payload.size):
        h = np.uint64(h ^ np.uint64(payload[i]))
        h = np.uint64(h * prime)
    return h


def _fnv1a64_via_jit(payload: bytes) -> int:
    arr = np.frombuffer(payload, dtype=np.uint8)
    return int(_fnv1a64_jit(arr))


# The scoring and soft-match kernels lean on BLAS in the numpy path, which
# overtakes the jitted loops once the representation bank is large (the
# crossover sits near 8k elements on commodity hardware; see the benchmark).
# The pooling and checksum kernels have no BLAS equivalent and the jitted
# loops win at every size.
_LOOP_CUTOFF = 8192


def _cosine_scores_auto(query: np.ndarray, reps: np.ndarray) -> np.ndarray:
    if reps.size <= _LOOP_CUTOFF:
        return _cosine_scores_jit(query, reps)
    return cosine_scores_numpy(query, reps)


def _soft_match_auto(query: np.ndarray, reps: np.ndarray):
    if reps.size <= _LOOP_CUTOFF:
        return _soft_match_jit(query, reps)
    return soft_match_numpy(query, reps)


if NUMBA_ENABLED:
    window_mean = _window_mean_jit
    pool_tokens = _pool_tokens_jit
    cosine_scores = _cosine_scores_auto
    soft_match = _soft_match_auto
    fnv1a64 = _fnv1a64_via_jit
else:
    window_mean = window_mean_numpy
    pool_tokens = pool_tokens_numpy
    cosine_scores = cosine_scores_numpy
    soft_match = soft_match_numpy
    fnv1a64 = fnv1a64_numpy
