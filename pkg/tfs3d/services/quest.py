"""Query-support transferring attention (the trainable prototype adjustment).

Forward, for one episode with frozen encoder features:

  1. a shared FC stack: (norm + ReLU) then fc_depth x (linear + norm + ReLU),
     normalization statistics taken over the points of each cloud
  2. local max pooling over the point axis -> M' statistics per channel
  3. channel-as-token cross attention, per query q, class n and shot k:
        Qm = Pq^T Wq, Km = Ps^T Wk      (D x M')
        V  = protos Wv                   ((N+1) x D)
        A  = softmax_rows(Qm Km^T / sqrt(D))
        adjusted[q, n] = protos[n] + combine_k(W (A V[n]))
  4. cosine similarity of the FC'd query points against the adjusted
     prototypes, cross-entropy on gamma * S over the valid classes

Every step has a hand-written backward pass; `quest_loss` returns the loss
and the gradient of every parameter tensor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from tfs3d.errors import QuestError, TrainingError
from tfs3d.models.prototypes import PrototypeSet
from tfs3d.schemas.head import HeadConfig
from tfs3d.schemas.quest import CombineMode, QuestConfig
from tfs3d.services.fewshot_head import NORM_EPS, compute_prototypes, l2_normalize

logger = logging.getLogger(__name__)

ATTENTION_TENSORS = ("w_q", "w_k", "w_v", "w_out")


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class QuestParameters:
    """Learnable tensors in a fixed order, plus the optimizer state."""
    tensors: dict[str, np.ndarray]
    adam: AdamState = field(default_factory=AdamState)

    @property
    def dim(self) -> int:
        return int(self.tensors["w_v"].shape[0])

    @property
    def pooled_len(self) -> int:
        return int(self.tensors["w_q"].shape[0])

    @property
    def fc_depth(self) -> int:
        return sum(1 for name in self.tensors if name.endswith(".weight"))

    def copy(self) -> QuestParameters:
        return QuestParameters(
            tensors={k: v.copy() for k, v in self.tensors.items()},
            adam=AdamState(
                step=self.adam.step,
                m={k: v.copy() for k, v in self.adam.m.items()},
                v={k: v.copy() for k, v in self.adam.v.items()},
            ),
        )

    def num_parameters(self) -> int:
        return sum(int(t.size) for t in self.tensors.values())


def fc_tensor_names(depth: int) -> list[str]:
    names = ["fc0.scale", "fc0.shift"]
    for stage in range(1, depth + 1):
        names += [f"fc{stage}.weight", f"fc{stage}.scale", f"fc{stage}.shift"]
    return names


def init_parameters(dim: int, pooled_len: int, cfg: QuestConfig) -> QuestParameters:
    """Seeded initialization.

    Linear and projection matrices are uniform in +-1/sqrt(fan_in); norm
    scales are 1, shifts 0; the output matrix W starts at zero so the
    adjusted prototypes initially equal the original ones.
    """
    rng = np.random.default_rng(cfg.seed)

    def uniform(fan_in: int, shape: tuple[int, int]) -> np.ndarray:
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    tensors: dict[str, np.ndarray] = {}
    for name in fc_tensor_names(cfg.fc_depth):
        if name.endswith(".weight"):
            tensors[name] = uniform(dim, (dim, dim))
        elif name.endswith(".scale"):
            tensors[name] = np.ones(dim)
        else:
            tensors[name] = np.zeros(dim)
    tensors["w_q"] = uniform(pooled_len, (pooled_len, pooled_len))
    tensors["w_k"] = uniform(pooled_len, (pooled_len, pooled_len))
    tensors["w_v"] = uniform(dim, (dim, dim))
    tensors["w_out"] = np.zeros((dim, dim))
    return QuestParameters(tensors=tensors)


def check_parameters(params: QuestParameters, dim: int, pooled_len: int, cfg: QuestConfig) -> None:
    expected = set(fc_tensor_names(cfg.fc_depth)) | set(ATTENTION_TENSORS)
    if set(params.tensors) != expected:
        raise QuestError(
            f"parameter names {sorted(params.tensors)} do not match fc_depth={cfg.fc_depth}"
        )
    if params.dim != dim:
        raise QuestError(f"parameters are for D={params.dim}, features have D={dim}")
    if params.pooled_len != pooled_len:
        raise QuestError(
            f"parameters are for M'={params.pooled_len}, pooling yields M'={pooled_len}"
        )


# ---------------------------------------------------------------------------
# FC stack
# ---------------------------------------------------------------------------

@dataclass
class _NormCache:
    x_hat: np.ndarray
    inv_std: np.ndarray
    relu_mask: np.ndarray


@dataclass
class _FCCache:
    inputs: list[np.ndarray]      # input of each linear stage
    norms: list[_NormCache]


def _norm_relu(x: np.ndarray, scale: np.ndarray, shift: np.ndarray, eps: float):
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    pre = x_hat * scale + shift
    mask = pre > 0
    return np.where(mask, pre, 0.0), _NormCache(x_hat, inv_std, mask)


def _norm_relu_backward(grad: np.ndarray, cache: _NormCache, scale: np.ndarray):
    grad_pre = np.where(cache.relu_mask, grad, 0.0)
    d_shift = grad_pre.sum(axis=0)
    d_scale = (grad_pre * cache.x_hat).sum(axis=0)
    g_hat = grad_pre * scale
    n = grad.shape[0]
    d_x = cache.inv_std / n * (
        n * g_hat - g_hat.sum(axis=0) - cache.x_hat * (g_hat * cache.x_hat).sum(axis=0)
    )
    return d_x, d_scale, d_shift


def _fc_forward_cached(feats: np.ndarray, params: QuestParameters, cfg: QuestConfig):
    t = params.tensors
    out, norm = _norm_relu(feats, t["fc0.scale"], t["fc0.shift"], cfg.norm_eps)
    cache = _FCCache(inputs=[], norms=[norm])
    for stage in range(1, cfg.fc_depth + 1):
        cache.inputs.append(out)
        out, norm = _norm_relu(
            out @ t[f"fc{stage}.weight"], t[f"fc{stage}.scale"], t[f"fc{stage}.shift"],
            cfg.norm_eps,
        )
        cache.norms.append(norm)
    return out, cache


def _fc_backward(grad: np.ndarray, cache: _FCCache, params: QuestParameters,
                 cfg: QuestConfig, grads: dict[str, np.ndarray]) -> None:
    t = params.tensors
    for stage in range(cfg.fc_depth, 0, -1):
        d_lin, d_scale, d_shift = _norm_relu_backward(
            grad, cache.norms[stage], t[f"fc{stage}.scale"]
        )
        grads[f"fc{stage}.scale"] += d_scale
        grads[f"fc{stage}.shift"] += d_shift
        grads[f"fc{stage}.weight"] += cache.inputs[stage - 1].T @ d_lin
        grad = d_lin @ t[f"fc{stage}.weight"].T
    _, d_scale, d_shift = _norm_relu_backward(grad, cache.norms[0], t["fc0.scale"])
    grads["fc0.scale"] += d_scale
    grads["fc0.shift"] += d_shift


def fc_forward(feats: np.ndarray, params: QuestParameters, cfg: QuestConfig) -> np.ndarray:
    """Shared FC stack on one cloud's features (P x D).

    Normalization uses the statistics of the current input.
    """
    out, _ = _fc_forward_cached(np.asarray(feats, dtype=np.float64), params, cfg)
    return out


# ---------------------------------------------------------------------------
# Local max pooling
# ---------------------------------------------------------------------------

def _window_starts(n_points: int, stride: int) -> range:
    return range(0, n_points, stride)


def local_max_pool_with_argmax(feats: np.ndarray, kernel: int, stride: int):
    """Per-channel max over windows [w*stride, w*stride + kernel) of the point axis.

    Returns the pooled statistics (M' x D) and the absolute row of each max
    (first occurrence on ties).
    """
    feats = np.asarray(feats, dtype=np.float64)
    n_points = feats.shape[0]
    if n_points < 1:
        raise QuestError("cannot pool an empty feature matrix")
    starts = _window_starts(n_points, stride)
    pooled = np.empty((len(starts), feats.shape[1]))
    argmax = np.empty((len(starts), feats.shape[1]), dtype=np.int64)
    for w, start in enumerate(starts):
        window = feats[start:start + kernel]
        local = window.argmax(axis=0)
        argmax[w] = start + local
        pooled[w] = window[local, np.arange(feats.shape[1])]
    return pooled, argmax


def local_max_pool(feats: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    return local_max_pool_with_argmax(feats, kernel, stride)[0]


def _max_pool_backward(grad: np.ndarray, argmax: np.ndarray, n_points: int) -> np.ndarray:
    out = np.zeros((n_points, grad.shape[1]))
    cols = np.broadcast_to(np.arange(grad.shape[1]), argmax.shape)
    np.add.at(out, (argmax, cols), grad)
    return out


def support_statistics(pooled_support: np.ndarray) -> np.ndarray:
    """(N, K, M', D) pooled support clouds -> (N+1, K, M', D).

    Row 0 (background) is the mean over the N classes for each shot.
    """
    background = pooled_support.mean(axis=0, keepdims=True)
    return np.concatenate([background, pooled_support], axis=0)


# ---------------------------------------------------------------------------
# Cross attention
# ---------------------------------------------------------------------------

@dataclass
class _AttentionCache:
    support_pooled: np.ndarray   # (N+1, K, M', D)
    query_pooled: np.ndarray     # (Q, M', D)
    protos: np.ndarray           # (N+1, D)
    q_mat: np.ndarray            # (Q, D, M')
    k_mat: np.ndarray            # (N+1, K, D, M')
    values: np.ndarray           # (N+1, D)


def _combine_factor(cfg: QuestConfig, k_shot: int) -> float:
    return 1.0 / k_shot if cfg.combine_mode == CombineMode.mean else 1.0


def attention_matrix(q_mat: np.ndarray, k_mat: np.ndarray) -> np.ndarray:
    dim = q_mat.shape[0]
    return softmax(q_mat @ k_mat.T / np.sqrt(dim), axis=1)


def _quest_forward_cached(support_pooled, query_pooled, protos, params, cfg):
    t = params.tensors
    n_classes, k_shot, pooled_len, dim = support_pooled.shape
    if query_pooled.shape[1:] != (pooled_len, dim):
        raise QuestError(
            f"query statistics {query_pooled.shape[1:]} do not match support {(pooled_len, dim)}"
        )
    if protos.shape != (n_classes, dim):
        raise QuestError(f"prototypes {protos.shape} do not match {(n_classes, dim)}")
    if t["w_q"].shape != (pooled_len, pooled_len) or t["w_v"].shape != (dim, dim):
        raise QuestError(
            f"parameters are for M'={t['w_q'].shape[0]}, D={t['w_v'].shape[0]}; "
            f"features have M'={pooled_len}, D={dim}"
        )

    q_mat = np.einsum("qmd,me->qde", query_pooled, t["w_q"])
    k_mat = np.einsum("nkmd,me->nkde", support_pooled, t["w_k"])
    values = protos @ t["w_v"]
    factor = _combine_factor(cfg, k_shot)

    adjusted = np.broadcast_to(protos, (query_pooled.shape[0],) + protos.shape).copy()
    for q in range(query_pooled.shape[0]):
        for n in range(n_classes):
            for k in range(k_shot):
                attn = attention_matrix(q_mat[q], k_mat[n, k])
                adjusted[q, n] += factor * (t["w_out"] @ (attn @ values[n]))
    cache = _AttentionCache(support_pooled, query_pooled, protos, q_mat, k_mat, values)
    return adjusted, cache


def quest_forward(
    support_pooled: np.ndarray,
    query_pooled: np.ndarray,
    protos: PrototypeSet | np.ndarray,
    params: QuestParameters,
    cfg: QuestConfig,
) -> np.ndarray:
    """Adjusted prototypes (Q, N+1, D) from pooled statistics.

    support_pooled: (N+1, K, M', D), query_pooled: (Q, M', D).
    """
    proto_rows = protos.prototypes if isinstance(protos, PrototypeSet) else protos
    adjusted, _ = _quest_forward_cached(
        np.asarray(support_pooled, dtype=np.float64),
        np.asarray(query_pooled, dtype=np.float64),
        np.asarray(proto_rows, dtype=np.float64),
        params, cfg,
    )
    return adjusted


def _quest_backward(grad_adjusted: np.ndarray, cache: _AttentionCache,
                    params: QuestParameters, cfg: QuestConfig,
                    grads: dict[str, np.ndarray]):
    """Returns gradients w.r.t. (support_pooled, query_pooled, protos)."""
    t = params.tensors
    n_classes, k_shot, _, dim = cache.support_pooled.shape
    factor = _combine_factor(cfg, k_shot)
    scale = 1.0 / np.sqrt(dim)

    d_q_mat = np.zeros_like(cache.q_mat)
    d_k_mat = np.zeros_like(cache.k_mat)
    d_values = np.zeros_like(cache.values)
    d_protos = grad_adjusted.sum(axis=0)

    for q in range(grad_adjusted.shape[0]):
        for n in range(n_classes):
            v_n = cache.values[n]
            for k in range(k_shot):
                attn = attention_matrix(cache.q_mat[q], cache.k_mat[n, k])
                y = attn @ v_n
                g_z = factor * grad_adjusted[q, n]
                grads["w_out"] += np.outer(g_z, y)
                g_y = t["w_out"].T @ g_z
                d_values[n] += attn.T @ g_y
                # softmax backward, using sum_j A_ij v_j = y_i
                d_scores = g_y[:, None] * attn * (v_n[None, :] - y[:, None]) * scale
                d_q_mat[q] += d_scores @ cache.k_mat[n, k]
                d_k_mat[n, k] += d_scores.T @ cache.q_mat[q]

    grads["w_v"] += cache.protos.T @ d_values
    d_protos += d_values @ t["w_v"].T
    grads["w_q"] += np.einsum("qmd,qde->me", cache.query_pooled, d_q_mat)
    grads["w_k"] += np.einsum("nkmd,nkde->me", cache.support_pooled, d_k_mat)
    d_query_pooled = np.einsum("me,qde->qmd", t["w_q"], d_q_mat)
    d_support_pooled = np.einsum("me,nkde->nkmd", t["w_k"], d_k_mat)
    return d_support_pooled, d_query_pooled, d_protos


# ---------------------------------------------------------------------------
# Episode forward / loss
# ---------------------------------------------------------------------------

@dataclass
class QuestTrace:
    """Everything the backward pass needs from one forward pass."""
    support_fc: np.ndarray               # (N, K, M, D)
    query_fc: np.ndarray                 # (Q, M, D)
    support_labels: np.ndarray           # (N, K, M)
    prototypes: PrototypeSet
    adjusted: np.ndarray                 # (Q, N+1, D)
    support_caches: list[_FCCache] = field(default_factory=list)
    query_caches: list[_FCCache] = field(default_factory=list)
    support_argmax: np.ndarray | None = None
    query_argmax: np.ndarray | None = None
    attention: _AttentionCache | None = None

    def kink_signature(self) -> bytes:
        """ReLU patterns and pooling winners; equal signatures share one linear region."""
        parts = [c.relu_mask.tobytes() for caches in (self.support_caches, self.query_caches)
                 for fc in caches for c in fc.norms]
        for arr in (self.support_argmax, self.query_argmax):
            if arr is not None:
                parts.append(arr.tobytes())
        return b"".join(parts)


def quest_adjust(
    support_feats: np.ndarray,
    support_labels: np.ndarray,
    query_feats: np.ndarray,
    params: QuestParameters,
    cfg: QuestConfig,
) -> QuestTrace:
    """FC stack, prototypes and attention adjustment for one episode's features.

    support_feats: (N, K, M, D) frozen encoder features, support_labels in
    episode space; query_feats: (Q, M, D).
    """
    support_feats = np.asarray(support_feats, dtype=np.float64)
    query_feats = np.asarray(query_feats, dtype=np.float64)
    if support_feats.ndim != 4 or query_feats.ndim != 3:
        raise QuestError("support features must be (N, K, M, D) and query features (Q, M, D)")
    if support_feats.shape[-1] != query_feats.shape[-1]:
        raise QuestError(
            f"support D={support_feats.shape[-1]} differs from query D={query_feats.shape[-1]}"
        )
    n_way, k_shot = support_feats.shape[:2]

    support_caches: list[_FCCache] = []
    query_caches: list[_FCCache] = []
    if cfg.use_fc:
        support_fc = np.empty_like(support_feats)
        for n in range(n_way):
            for k in range(k_shot):
                support_fc[n, k], cache = _fc_forward_cached(support_feats[n, k], params, cfg)
                support_caches.append(cache)
        query_fc = np.empty_like(query_feats)
        for q in range(query_feats.shape[0]):
            query_fc[q], cache = _fc_forward_cached(query_feats[q], params, cfg)
            query_caches.append(cache)
    else:
        support_fc, query_fc = support_feats, query_feats

    protos = compute_prototypes(support_fc, support_labels, n_way)
    trace = QuestTrace(
        support_fc=support_fc,
        query_fc=query_fc,
        support_labels=np.asarray(support_labels),
        prototypes=protos,
        adjusted=np.broadcast_to(
            protos.prototypes, (query_feats.shape[0],) + protos.prototypes.shape
        ).copy(),
        support_caches=support_caches,
        query_caches=query_caches,
    )
    if not cfg.use_attention:
        return trace

    pooled_s = np.empty((n_way, k_shot, cfg.pooled_length(support_fc.shape[2]),
                         support_fc.shape[3]))
    argmax_s = np.empty(pooled_s.shape, dtype=np.int64)
    for n in range(n_way):
        for k in range(k_shot):
            pooled_s[n, k], argmax_s[n, k] = local_max_pool_with_argmax(
                support_fc[n, k], cfg.pool_kernel, cfg.pool_stride
            )
    pooled_q = np.empty((query_fc.shape[0],) + pooled_s.shape[2:])
    argmax_q = np.empty(pooled_q.shape, dtype=np.int64)
    for q in range(query_fc.shape[0]):
        pooled_q[q], argmax_q[q] = local_max_pool_with_argmax(
            query_fc[q], cfg.pool_kernel, cfg.pool_stride
        )

    adjusted, attention = _quest_forward_cached(
        support_statistics(pooled_s), pooled_q, protos.prototypes, params, cfg
    )
    trace.adjusted = adjusted
    trace.support_argmax = argmax_s
    trace.query_argmax = argmax_q
    trace.attention = attention
    return trace


def _cosine_backward(d_scores: np.ndarray, x: np.ndarray, x_hat: np.ndarray,
                     contract: np.ndarray, spec: str) -> np.ndarray:
    """Gradient w.r.t. the unnormalized rows x given dL/dS with S = x_hat . other_hat."""
    d_hat = np.einsum(spec, d_scores, contract)
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    radial = (d_hat * x_hat).sum(axis=-1, keepdims=True)
    return np.divide(d_hat - x_hat * radial, norm, out=np.zeros_like(x), where=norm > NORM_EPS)


def quest_loss(
    support_feats: np.ndarray,
    support_labels: np.ndarray,
    query_feats: np.ndarray,
    query_labels: np.ndarray,
    params: QuestParameters,
    cfg: QuestConfig,
    head_cfg: HeadConfig,
    with_grad: bool = True,
) -> tuple[float, dict[str, np.ndarray], QuestTrace]:
    """Mean softmax cross-entropy over labeled query points and its gradients.

    Logits are gamma * S over the valid classes; invalid classes are left
    out of the softmax. Query labels are in episode space, -1 is ignored.
    """
    query_labels = np.asarray(query_labels, dtype=np.int64)
    labeled = query_labels >= 0
    n_labeled = int(labeled.sum())
    if n_labeled == 0:
        raise TrainingError("no labeled query points to compute a loss on")

    trace = quest_adjust(support_feats, support_labels, query_feats, params, cfg)
    valid = trace.prototypes.valid_mask
    if not valid[query_labels[labeled]].all():
        raise QuestError("query points carry a label whose class has no support points")

    q_hat = l2_normalize(trace.query_fc)
    p_hat = l2_normalize(trace.adjusted)
    scores = np.einsum("qmd,qnd->qmn", q_hat, p_hat)
    logits = head_cfg.gamma * scores
    logits[..., ~valid] = -np.inf
    log_norm = logsumexp(logits, axis=-1)
    safe_labels = np.where(labeled, query_labels, 0)
    picked = np.take_along_axis(logits, safe_labels[..., None], axis=-1)[..., 0]
    loss = float(((log_norm - picked) * labeled).sum() / n_labeled)

    grads = {name: np.zeros_like(value) for name, value in params.tensors.items()}
    if not with_grad:
        return loss, grads, trace

    probs = np.exp(logits - log_norm[..., None])
    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, safe_labels[..., None], 1.0, axis=-1)
    d_scores = head_cfg.gamma * (probs - onehot) * labeled[..., None] / n_labeled

    d_query_fc = _cosine_backward(d_scores, trace.query_fc, q_hat, p_hat, "qmn,qnd->qmd")
    d_adjusted = _cosine_backward(
        np.swapaxes(d_scores, 1, 2), trace.adjusted, p_hat, q_hat, "qnm,qmd->qnd"
    )

    d_support_fc = np.zeros_like(trace.support_fc)
    if cfg.use_attention:
        d_support_stats, d_query_pooled, d_protos = _quest_backward(
            d_adjusted, trace.attention, params, cfg, grads
        )
        n_way = trace.support_fc.shape[0]
        d_pooled_support = d_support_stats[1:] + d_support_stats[:1] / n_way
        n_points = trace.support_fc.shape[2]
        for n in range(n_way):
            for k in range(trace.support_fc.shape[1]):
                d_support_fc[n, k] += _max_pool_backward(
                    d_pooled_support[n, k], trace.support_argmax[n, k], n_points
                )
        for q in range(trace.query_fc.shape[0]):
            d_query_fc[q] += _max_pool_backward(
                d_query_pooled[q], trace.query_argmax[q], trace.query_fc.shape[1]
            )
    else:
        d_protos = d_adjusted.sum(axis=0)

    # masked-average prototypes
    labels = trace.support_labels
    background = labels == 0
    if valid[0]:
        d_support_fc[background] += d_protos[0] / background.sum()
    for n in range(1, valid.shape[0]):
        if valid[n]:
            mask = labels[n - 1] == n
            d_support_fc[n - 1][mask] += d_protos[n] / mask.sum()

    if cfg.use_fc:
        for idx, cache in enumerate(trace.support_caches):
            n, k = divmod(idx, trace.support_fc.shape[1])
            _fc_backward(d_support_fc[n, k], cache, params, cfg, grads)
        for q, cache in enumerate(trace.query_caches):
            _fc_backward(d_query_fc[q], cache, params, cfg, grads)

    return loss, grads, trace
