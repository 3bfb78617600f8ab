"""Similarity-based segmentation head.

Masked-average prototypes, cosine similarity against the prototypes and the
exponential activation phi(x) = exp(-gamma * (1 - x)). Class 0 is the
background; predictions are in episode label space.
"""

from __future__ import annotations

import logging

import numpy as np

from tfs3d.models.prototypes import PrototypeSet
from tfs3d.schemas.head import HeadConfig

logger = logging.getLogger(__name__)

NORM_EPS = 1e-12


def compute_prototypes(
    support_feats: np.ndarray, support_labels: np.ndarray, n_way: int | None = None
) -> PrototypeSet:
    """Masked average pooling over the support set.

    support_feats: (N, K, M, D); support_labels: (N, K, M) in {-1, 0..N}.
    The background prototype pools every support cloud; the prototype of
    class n >= 1 pools only the shots of class n. A class without a single
    matching point gets an all-zero row and valid_mask False.
    """
    feats = np.asarray(support_feats, dtype=np.float64)
    labels = np.asarray(support_labels)
    n_way = feats.shape[0] if n_way is None else n_way
    n_classes = n_way + 1
    dim = feats.shape[-1]

    prototypes = np.zeros((n_classes, dim), dtype=np.float64)
    valid = np.zeros(n_classes, dtype=bool)

    background = labels == 0
    counts = np.empty(n_classes, dtype=np.int64)
    counts[0] = int(background.sum())
    if counts[0] > 0:
        prototypes[0] = feats[background].sum(axis=0) / counts[0]
        valid[0] = True

    for n in range(1, n_classes):
        mask = labels[n - 1] == n
        counts[n] = int(mask.sum())
        if counts[n] > 0:
            prototypes[n] = feats[n - 1][mask].sum(axis=0) / counts[n]
            valid[n] = True

    if not valid.all():
        logger.warning("prototype classes without support points: %s",
                       np.flatnonzero(~valid).tolist())
    return PrototypeSet(
        prototypes=prototypes,
        label_onehot=np.eye(n_classes),
        valid_mask=valid,
    )


def l2_normalize(x: np.ndarray) -> np.ndarray:
    """Row-normalize along the last axis; zero rows stay zero."""
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.divide(x, norm, out=np.zeros_like(x), where=norm > NORM_EPS)


def cosine_scores(query_feats: np.ndarray, protos: PrototypeSet | np.ndarray,
                  valid_mask: np.ndarray | None = None) -> np.ndarray:
    """Cosine similarity of every query point to every prototype.

    query_feats: (Q, M, D). `protos` is either a PrototypeSet shared by all
    queries or a per-query array (Q, N+1, D). Invalid classes score -inf.
    """
    q_hat = l2_normalize(np.asarray(query_feats, dtype=np.float64))
    if isinstance(protos, PrototypeSet):
        valid_mask = protos.valid_mask
        p_hat = l2_normalize(protos.prototypes)
        scores = np.einsum("qmd,nd->qmn", q_hat, p_hat)
    else:
        p_hat = l2_normalize(np.asarray(protos, dtype=np.float64))
        scores = np.einsum("qmd,qnd->qmn", q_hat, p_hat)
    scores = np.clip(scores, -1.0, 1.0)
    if valid_mask is not None:
        scores[..., ~np.asarray(valid_mask, dtype=bool)] = -np.inf
    return scores


def phi(x: np.ndarray, gamma: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.exp(-gamma * (1.0 - x))


def predict(scores: np.ndarray, head_cfg: HeadConfig,
            label_onehot: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """logits = phi(S L^P) and labels = argmax (ties go to the lowest class).

    L^P is the identity, so the product is skipped unless a label matrix is
    passed explicitly.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if label_onehot is not None:
        finite = np.where(np.isfinite(scores), scores, 0.0)
        mixed = finite @ label_onehot
        mixed[~np.isfinite(scores)] = -np.inf
        scores = mixed
    logits = phi(scores, head_cfg.gamma)
    # argmax over raw scores: phi underflows to 0 for low similarities at large gamma
    labels = np.argmax(scores, axis=-1)
    return logits, labels
