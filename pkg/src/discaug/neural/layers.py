"""Differentiable building blocks, each with a batched forward/backward pair.

Batched tensors are laid out (batch, time, features).  ``mask`` arrays are
boolean (batch, time) with True marking real tokens; sequences are
right-padded.  The single-example helpers (``lstm_cell``, ``bilstm_encode``,
``attention``, ``classify_head``, ``conv_maxpool``) wrap the batched code.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit

GATES = ("f", "i", "o", "c")
CLIP_EPS = 1e-12


def _require_finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name}: non-finite input")


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=float)
    shifted = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


@dataclass
class LstmParams:
    W_f: np.ndarray
    W_i: np.ndarray
    W_o: np.ndarray
    W_c: np.ndarray
    U_f: np.ndarray
    U_i: np.ndarray
    U_o: np.ndarray
    U_c: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    def __post_init__(self):
        H, d = self.W_f.shape
        for g in GATES:
            if getattr(self, f"W_{g}").shape != (H, d):
                raise ValueError(f"W_{g} must be {(H, d)}")
            if getattr(self, f"U_{g}").shape != (H, H):
                raise ValueError(f"U_{g} must be {(H, H)}")
            if getattr(self, f"b_{g}").shape != (H,):
                raise ValueError(f"b_{g} must be {(H,)}")

    @property
    def hidden_size(self):
        return self.W_f.shape[0]

    @property
    def input_size(self):
        return self.W_f.shape[1]

    @classmethod
    def init(cls, d, H, rng, scale=0.08):
        kw = {}
        for g in GATES:
            kw[f"W_{g}"] = rng.uniform(-scale, scale, size=(H, d))
            kw[f"U_{g}"] = rng.uniform(-scale, scale, size=(H, H))
            kw[f"b_{g}"] = np.zeros(H)
        return cls(**kw)

    @classmethod
    def zeros(cls, d, H):
        return cls(**{f.name: np.zeros((H, d) if f.name[0] == "W" else (H, H) if f.name[0] == "U" else H)
                      for f in fields(cls)})

    def as_dict(self, prefix=""):
        return {prefix + f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, params, prefix=""):
        return cls(**{f.name: params[prefix + f.name] for f in fields(cls)})

    def stacked(self):
        W = np.concatenate([getattr(self, f"W_{g}") for g in GATES])
        U = np.concatenate([getattr(self, f"U_{g}") for g in GATES])
        b = np.concatenate([getattr(self, f"b_{g}") for g in GATES])
        return W, U, b


def _lstm_step(x, h_prev, c_prev, W, U, b):
    H = h_prev.shape[-1]
    a = x @ W.T + h_prev @ U.T + b
    f = expit(a[..., :H])
    i = expit(a[..., H:2 * H])
    o = expit(a[..., 2 * H:3 * H])
    g = np.tanh(a[..., 3 * H:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (f, i, o, g, tc)


def lstm_cell(x_t, h_prev, c_prev, p: LstmParams):
    """One LSTM step; works on a single vector or a (batch, d) block."""
    x_t, h_prev, c_prev = (np.asarray(a, dtype=float) for a in (x_t, h_prev, c_prev))
    if x_t.shape[-1] != p.input_size or h_prev.shape[-1] != p.hidden_size \
            or c_prev.shape != h_prev.shape:
        raise ValueError("lstm_cell: shape mismatch")
    _require_finite("lstm_cell", x_t, h_prev, c_prev)
    h, c, _ = _lstm_step(x_t, h_prev, c_prev, *p.stacked())
    return h, c


def lstm_forward(x, p: LstmParams):
    """Run a unidirectional LSTM over (B, T, d) from zero initial state."""
    B, T, _ = x.shape
    H = p.hidden_size
    W, U, b = p.stacked()
    h = np.zeros((B, H), dtype=x.dtype)
    c = np.zeros((B, H), dtype=x.dtype)
    hs = np.empty((B, T, H), dtype=x.dtype)
    steps = []
    for t in range(T):
        h_prev, c_prev = h, c
        h, c, gates = _lstm_step(x[:, t], h_prev, c_prev, W, U, b)
        hs[:, t] = h
        steps.append((h_prev, c_prev, gates))
    return hs, (x, W, U, steps)


def lstm_backward(dhs, cache):
    """Backpropagate through time; returns (dx, grads keyed like LstmParams)."""
    x, W, U, steps = cache
    B, T, _ = x.shape
    H = U.shape[1]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(W.shape[0], dtype=W.dtype)
    dx = np.empty_like(x)
    dh_next = np.zeros((B, H), dtype=x.dtype)
    dc_next = np.zeros((B, H), dtype=x.dtype)
    for t in reversed(range(T)):
        h_prev, c_prev, (f, i, o, g, tc) = steps[t]
        dh = dhs[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        da = np.concatenate([
            dc * c_prev * f * (1.0 - f),
            dc * g * i * (1.0 - i),
            dh * tc * o * (1.0 - o),
            dc * i * (1.0 - g * g),
        ], axis=1)
        dW += da.T @ x[:, t]
        dU += da.T @ h_prev
        db += da.sum(axis=0)
        dx[:, t] = da @ W
        dh_next = da @ U
        dc_next = dc * f
    grads = {}
    for k, gname in enumerate(GATES):
        rows = slice(k * H, (k + 1) * H)
        grads[f"W_{gname}"] = dW[rows]
        grads[f"U_{gname}"] = dU[rows]
        grads[f"b_{gname}"] = db[rows]
    return dx, grads


def reverse_index(mask):
    """Per-row index that reverses the unpadded prefix and fixes the padding.

    The map is an involution, so it also undoes itself.
    """
    B, T = mask.shape
    lengths = mask.sum(axis=1)
    t = np.arange(T)[None, :]
    return np.where(t < lengths[:, None], lengths[:, None] - 1 - t, t)


def _gather_time(a, idx):
    return np.take_along_axis(a, idx[:, :, None], axis=1)


def bilstm_forward(x, mask, fwd: LstmParams, bwd: LstmParams):
    """Concatenate forward states with backward states of each position."""
    if x.shape[1] < 1:
        raise ValueError("bilstm: empty sequence")
    rev = reverse_index(mask)
    hf, cache_f = lstm_forward(x, fwd)
    hb_rev, cache_b = lstm_forward(_gather_time(x, rev), bwd)
    hb = _gather_time(hb_rev, rev)
    return np.concatenate([hf, hb], axis=2), (rev, fwd.hidden_size, cache_f, cache_b)


def bilstm_backward(dh, cache):
    rev, H, cache_f, cache_b = cache
    dx_f, g_f = lstm_backward(dh[:, :, :H], cache_f)
    dx_b_rev, g_b = lstm_backward(_gather_time(dh[:, :, H:], rev), cache_b)
    dx = dx_f + _gather_time(dx_b_rev, rev)
    return dx, g_f, g_b


def _full_mask(T):
    return np.ones((1, T), dtype=bool)


def bilstm_encode(x, fwd: LstmParams, bwd: LstmParams, pad_mask=None):
    """Encode a single (T, d) sequence into (T, 2H) states.

    ``pad_mask`` marks PAD positions (True = padding); their states are
    computed but carry no meaning downstream.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError("bilstm_encode: expected a non-empty (T, d) sequence")
    mask = _full_mask(x.shape[0]) if pad_mask is None else ~np.asarray(pad_mask, bool)[None, :]
    h, _ = bilstm_forward(x[None], mask, fwd, bwd)
    return h[0]


@dataclass
class AttentionParams:
    W_h: np.ndarray
    W_v: np.ndarray
    b: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        d_a = self.W_h.shape[0]
        if self.W_v.shape != (d_a, d_a) or self.b.shape != (d_a,) or self.v.shape != (d_a,):
            raise ValueError("attention parameter shapes are inconsistent")

    @classmethod
    def init(cls, in_dim, d_a, rng, scale=0.08, v_scale=0.1):
        return cls(
            W_h=rng.uniform(-scale, scale, size=(d_a, in_dim)),
            W_v=rng.uniform(-scale, scale, size=(d_a, d_a)),
            b=np.zeros(d_a),
            v=rng.uniform(-v_scale, v_scale, size=d_a),
        )

    def as_dict(self, prefix=""):
        return {prefix + f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, params, prefix=""):
        return cls(**{f.name: params[prefix + f.name] for f in fields(cls)})


def attention_forward(h, mask, p: AttentionParams):
    """Score e_i = sum(tanh(W_h h_i + W_v v + b)), softmax over real tokens."""
    if not np.all(mask.any(axis=1)):
        raise ValueError("attention: every position is masked")
    shift = p.W_v @ p.v + p.b
    z = np.tanh(h @ p.W_h.T + shift)
    scores = z.sum(axis=2)
    scores = np.where(mask, scores, -np.inf)
    alpha = np.exp(scores - scores.max(axis=1, keepdims=True))
    alpha /= alpha.sum(axis=1, keepdims=True)
    c = np.einsum("bt,btk->bk", alpha, h)
    return c, alpha, (h, z, alpha, p)


def attention_backward(dc, cache):
    h, z, alpha, p = cache
    dalpha = np.einsum("btk,bk->bt", h, dc)
    dh = alpha[:, :, None] * dc[:, None, :]
    de = alpha * (dalpha - np.sum(alpha * dalpha, axis=1, keepdims=True))
    dz = de[:, :, None] * (1.0 - z * z)
    dshift = dz.sum(axis=(0, 1))
    dh += dz @ p.W_h
    grads = {
        "W_h": np.einsum("bta,btk->ak", dz, h),
        "W_v": np.outer(dshift, p.v),
        "b": dshift,
        "v": p.W_v.T @ dshift,
    }
    return dh, grads


def attention(h, p: AttentionParams, pad_mask=None):
    """Pool a single (T, 2H) sequence; returns (context, weights)."""
    h = np.asarray(h, dtype=float)
    mask = _full_mask(h.shape[0]) if pad_mask is None else ~np.asarray(pad_mask, bool)[None, :]
    c, alpha, _ = attention_forward(h[None], mask, p)
    return c[0], alpha[0]


@dataclass
class HeadParams:
    W_s: np.ndarray
    b_s: np.ndarray

    def __post_init__(self):
        if self.W_s.ndim != 2 or self.b_s.shape != (self.W_s.shape[0],):
            raise ValueError("head parameter shapes are inconsistent")

    @classmethod
    def init(cls, in_dim, rng, n_classes=2, scale=0.08):
        return cls(rng.uniform(-scale, scale, size=(n_classes, in_dim)), np.zeros(n_classes))

    def as_dict(self, prefix=""):
        return {prefix + "W_s": self.W_s, prefix + "b_s": self.b_s}

    @classmethod
    def from_dict(cls, params, prefix=""):
        return cls(params[prefix + "W_s"], params[prefix + "b_s"])


def classify_head(c, p: HeadParams):
    c = np.asarray(c, dtype=float)
    _require_finite("classify_head", c)
    return softmax(c @ p.W_s.T + p.b_s)


def cross_entropy(y, label) -> float:
    return float(-np.log(max(float(y[label]), CLIP_EPS)))


def softmax_xent_forward(logits, labels):
    """Mean cross-entropy of softmax(logits); returns (loss, probs, dlogits)."""
    probs = softmax(logits)
    n = logits.shape[0]
    picked = np.maximum(probs[np.arange(n), labels], CLIP_EPS)
    loss = float(-np.mean(np.log(picked)))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, probs, dlogits / n


def conv_maxpool_forward(x, mask, filters):
    """ReLU(max over valid windows) for each filter bank, concatenated.

    ``filters`` maps width -> (W (F, w, d), b (F,)).  A window is valid when
    it lies inside max(length, max width) of its row, so batching never
    changes a row's features.
    """
    B, T, d = x.shape
    max_w = max(filters)
    if T < max_w:
        x = np.concatenate([x, np.zeros((B, max_w - T, d), dtype=x.dtype)], axis=1)
        mask = np.concatenate([mask, np.zeros((B, max_w - T), dtype=bool)], axis=1)
        T = max_w
    eff_len = np.maximum(mask.sum(axis=1), max_w)
    feats, caches = [], []
    for w in sorted(filters):
        W, b = filters[w]
        P = T - w + 1
        windows = np.lib.stride_tricks.sliding_window_view(x, w, axis=1)  # (B, P, d, w)
        windows = windows.transpose(0, 1, 3, 2).reshape(B, P, w * d)
        resp = windows @ W.reshape(W.shape[0], -1).T + b
        valid = np.arange(P)[None, :] <= (eff_len - w)[:, None]
        resp = np.where(valid[:, :, None], resp, -np.inf)
        arg = resp.argmax(axis=1)  # (B, F)
        pooled = np.take_along_axis(resp, arg[:, None, :], axis=1)[:, 0]
        feats.append(np.maximum(pooled, 0.0))
        caches.append((w, windows, arg, pooled))
    return np.concatenate(feats, axis=1), (x.shape, filters, caches)


def conv_maxpool_backward(dfeat, cache, T_in):
    """Returns (dx trimmed to the caller's length, {width: (dW, db)})."""
    (B, T, d), filters, caches = cache
    dx = np.zeros((B, T, d), dtype=dfeat.dtype)
    grads = {}
    offset = 0
    for w, windows, arg, pooled in caches:
        W, _ = filters[w]
        F = W.shape[0]
        dpooled = dfeat[:, offset:offset + F] * (pooled > 0)
        offset += F
        win_at = np.take_along_axis(windows, arg[:, :, None], axis=1)  # (B, F, w*d)
        dW = np.einsum("bf,bfk->fk", dpooled, win_at).reshape(W.shape)
        grads[w] = (dW, dpooled.sum(axis=0))
        dwin = dpooled[:, :, None] * W.reshape(F, -1)[None]  # (B, F, w*d)
        dwin = dwin.reshape(B, F, w, d)
        rows = np.repeat(np.arange(B), F)
        for k in range(w):
            np.add.at(dx, (rows, (arg + k).ravel()), dwin[:, :, k].reshape(B * F, d))
    return dx[:, :T_in], grads


def conv_maxpool(x, filters, widths=None, pad_mask=None):
    """Single-sequence convolution + global max pooling."""
    x = np.asarray(x, dtype=float)
    if widths is not None:
        filters = {w: filters[w] for w in widths}
    mask = _full_mask(x.shape[0]) if pad_mask is None else ~np.asarray(pad_mask, bool)[None, :]
    feats, _ = conv_maxpool_forward(x[None], mask, filters)
    return feats[0]


def dropout_mask(shape, rate, rng):
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


def dropout(x, rate, rng, training=True):
    """Inverted dropout; the identity when not training or rate == 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    x = np.asarray(x, dtype=float)
    if not training or rate == 0.0:
        return x
    return x * dropout_mask(x.shape, rate, rng)
