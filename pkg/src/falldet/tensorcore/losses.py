import numpy as np

from .layers import softmax


def softmax_cross_entropy(logits, labels, n_classes=None):
    """Mean cross-entropy of softmax(logits) against integer labels.

    Returns ``(loss, grad_logits)`` where ``grad_logits = (p - onehot) / N``.
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ValueError(f"logits must be (N, K), got {logits.shape}")
    n, k = logits.shape
    if n_classes is not None and k != n_classes:
        raise ValueError(f"expected {n_classes} logits per row, got {k}")
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    if labels.size and (labels.min() < 0 or labels.max() >= k or not np.issubdtype(labels.dtype, np.integer)):
        raise ValueError(f"labels must be integers in [0, {k})")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = np.mean(log_norm - shifted[rows, labels])
    # keep extended precision intact for finite-difference oracles
    loss = loss if loss.dtype == np.longdouble else float(loss)
    grad = softmax(logits)
    grad[rows, labels] -= 1
    grad /= n
    return loss, grad
