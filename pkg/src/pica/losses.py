"""InfoNCE objectives for pseudo-word alignment and their analytic gradients.

All similarities are cosines scaled by a shared learnable temperature. The
gradient code differentiates through the cosine normalization, the linear
projection and ``log(tau)``; it is checked against central finite
differences in the test suite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from pica.core import row_normalize
from pica.head import ProjectionHead

PSEUDO_WORD_MODES = ("both", "clean_only", "aug_only")
DEFAULT_LAMBDA_CURR = 1.0


class NonFiniteGradientError(FloatingPointError):
    pass


@dataclass
class LossBreakdown:
    l_curr: float
    l_ground: float
    l_total: float
    lambda_curr: float
    ground_degenerate: bool = False


@dataclass
class GradientSet:
    dW: np.ndarray
    db: np.ndarray
    dlog_tau: float

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dW.ravel(), self.db, [self.dlog_tau]])

    def __add__(self, other: "GradientSet") -> "GradientSet":
        return GradientSet(self.dW + other.dW, self.db + other.db, self.dlog_tau + other.dlog_tau)

    def scaled(self, c: float) -> "GradientSet":
        return GradientSet(c * self.dW, c * self.db, c * self.dlog_tau)

    @classmethod
    def zeros_like(cls, head: ProjectionHead) -> "GradientSet":
        return cls(np.zeros_like(head.W), np.zeros_like(head.b), 0.0)


@dataclass
class _NCEResult:
    loss: float
    dA: np.ndarray
    dC: np.ndarray
    dlog_tau: float


def _info_nce(
    A: np.ndarray,
    C: np.ndarray,
    tau: float,
    targets: np.ndarray | None = None,
    n_grad: int | None = None,
) -> _NCEResult:
    """Cross-entropy of softmax(cos(A, C) / tau) against ``targets`` (default: matched index).

    Only the first ``n_grad`` candidate rows receive gradients (default: all).
    """
    n = len(A)
    A_hat, a_norm = row_normalize(A)
    C_hat, c_norm = row_normalize(C)
    if targets is None:
        targets = np.arange(n)
    inv_tau = 1.0 / tau
    P = (A_hat * inv_tau) @ C_hat.T  # logits, turned into probabilities in place
    pos = np.einsum("ij,ij->i", A_hat, C_hat[targets]) * inv_tau
    shift = P.max(axis=1, keepdims=True)
    P -= shift
    np.exp(P, out=P)
    Z = P.sum(axis=1, keepdims=True)
    loss = float(np.mean(np.log(Z[:, 0]) + shift[:, 0] - pos))

    # d loss / d logits = (P - Y) / n ; d logits / d cos = 1 / tau
    P *= 1.0 / (n * Z)
    dA_hat = P @ C_hat
    dA_hat -= C_hat[targets] / n
    m = len(C) if n_grad is None else n_grad
    dC_hat = P[:, :m].T @ A_hat
    if m:
        np.add.at(dC_hat, targets[targets < m], -A_hat[targets < m] / n)
    # logits = cos / tau, so d loss / d log(tau) = -sum(dL/dlogits * logits)
    dlog_tau = -float(np.vdot(dA_hat, A_hat)) * inv_tau
    dA_hat *= inv_tau
    dC_hat *= inv_tau
    C_hat, c_norm = C_hat[:m], c_norm[:m]
    dA = (dA_hat - A_hat * np.einsum("ij,ij->i", dA_hat, A_hat)[:, None]) / a_norm[:, None]
    dC = (dC_hat - C_hat * np.einsum("ij,ij->i", dC_hat, C_hat)[:, None]) / c_norm[:, None]
    return _NCEResult(max(loss, 0.0), dA, dC, dlog_tau)


def info_nce(anchors, candidates, tau: float) -> float:
    """Mean InfoNCE loss where candidate ``i`` is the positive for anchor ``i``.

    Candidates beyond ``len(anchors)`` act as extra negatives.
    """
    A = np.atleast_2d(np.asarray(anchors, dtype=np.float64))
    C = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    if len(A) < 2:
        raise ValueError("InfoNCE needs at least two pairs")
    if len(C) < len(A):
        raise ValueError("every anchor needs a matched candidate")
    if tau <= 0:
        raise ValueError("tau must be positive")
    return _info_nce(A, C, tau).loss


def curriculum_loss(selected, f_aug, w, w_aug, tau: float, queue=None) -> float:
    """Bidirectional InfoNCE over the selected regions.

    ``f_aug`` must already be in text space. The queue, if given, extends the
    candidate set of the first (augmented feature -> pseudo-word) term.
    """
    sel = np.asarray(selected, dtype=np.int64)
    if len(sel) < 2:
        raise ValueError("curriculum loss needs at least two selected regions")
    x = np.asarray(f_aug, dtype=np.float64)[sel]
    cands = np.asarray(w, dtype=np.float64)[sel]
    if queue is not None and len(queue):
        cands = np.concatenate([cands, queue])
    t1 = _info_nce(x, cands, tau).loss
    t2 = _info_nce(np.asarray(w_aug, dtype=np.float64)[sel], x, tau).loss
    return 0.5 * (t1 + t2)


def grounding_loss(w, labels, text_protos, tau: float) -> tuple[float, bool]:
    """InfoNCE of pseudo-words against category prototypes.

    ``labels`` index rows of ``text_protos``; negative labels are ignored.
    Returns ``(loss, degenerate)``; degenerate cases (no labeled region, a
    single prototype) give loss 0.
    """
    w = np.atleast_2d(np.asarray(w, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    keep = labels >= 0
    protos = np.atleast_2d(np.asarray(text_protos, dtype=np.float64))
    if not keep.any() or len(protos) < 2:
        warnings.warn("grounding loss is degenerate (no labeled regions or a single category)", stacklevel=2)
        return 0.0, True
    return _info_nce(w[keep], protos, tau, labels[keep]).loss, False


def total_loss(l_ground: float, l_curr: float, lambda_curr: float = DEFAULT_LAMBDA_CURR) -> LossBreakdown:
    """Grounding loss plus the weighted curriculum loss."""
    vals = np.array([l_ground, l_curr, lambda_curr], dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ValueError("loss components must be finite")
    return LossBreakdown(
        l_curr=float(l_curr),
        l_ground=float(l_ground),
        l_total=float(l_ground + lambda_curr * l_curr),
        lambda_curr=float(lambda_curr),
    )


@dataclass
class LossInputs:
    """Everything the objective needs for one batch besides the head.

    ``x_aug`` is the text-space view of ``f_aug``. ``labels`` index rows of
    ``ground_protos`` (-1 = unlabeled).
    """

    f: np.ndarray
    f_aug: np.ndarray
    x_aug: np.ndarray
    labels: np.ndarray
    ground_protos: np.ndarray
    queue: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    pseudo_word_mode: str = "both"
    queue_in_second_term: bool = False

    def __post_init__(self):
        if self.pseudo_word_mode not in PSEUDO_WORD_MODES:
            raise ValueError(f"pseudo_word_mode must be one of {PSEUDO_WORD_MODES}")


def pseudo_words(head: ProjectionHead, inputs: LossInputs) -> tuple[np.ndarray, np.ndarray]:
    """(w, w_aug) under the configured pseudo-word mode."""
    w_clean = inputs.f @ head.W.T + head.b
    w_aug = inputs.f_aug @ head.W.T + head.b
    if inputs.pseudo_word_mode == "clean_only":
        return w_clean, w_clean
    if inputs.pseudo_word_mode == "aug_only":
        return w_aug, w_aug
    return w_clean, w_aug


def objective(
    head: ProjectionHead,
    inputs: LossInputs,
    selected,
    lambda_curr: float = DEFAULT_LAMBDA_CURR,
    need_grad: bool = True,
) -> tuple[LossBreakdown, GradientSet | None]:
    """Total loss and its gradient with respect to (W, b, log tau)."""
    tau = head.tau
    sel = np.asarray(selected, dtype=np.int64)
    mode = inputs.pseudo_word_mode
    grad = GradientSet.zeros_like(head)

    # grounding branch on clean pseudo-words of labeled regions
    keep = inputs.labels >= 0
    l_ground, degenerate = 0.0, True
    if keep.any() and len(inputs.ground_protos) >= 2:
        f_l = inputs.f[keep]
        res = _info_nce(f_l @ head.W.T + head.b, inputs.ground_protos, tau, inputs.labels[keep], n_grad=0)
        l_ground, degenerate = res.loss, False
        grad.dW += res.dA.T @ f_l
        grad.db += res.dA.sum(axis=0)
        grad.dlog_tau += res.dlog_tau

    l_curr = 0.0
    if len(sel) >= 2:
        f_sel, fa_sel, x = inputs.f[sel], inputs.f_aug[sel], inputs.x_aug[sel]
        src_w = fa_sel if mode == "aug_only" else f_sel
        src_wa = f_sel if mode == "clean_only" else fa_sel
        w = src_w @ head.W.T + head.b
        wa = src_wa @ head.W.T + head.b
        queue = inputs.queue if len(inputs.queue) else None
        c1 = w if queue is None else np.concatenate([w, queue])
        r1 = _info_nce(x, c1, tau, n_grad=len(sel))
        c2 = x if (queue is None or not inputs.queue_in_second_term) else np.concatenate([x, queue])
        r2 = _info_nce(wa, c2, tau, n_grad=0)
        l_curr = 0.5 * (r1.loss + r2.loss)
        g_w = 0.5 * lambda_curr * r1.dC[: len(sel)]
        g_wa = 0.5 * lambda_curr * r2.dA
        grad.dW += g_w.T @ src_w + g_wa.T @ src_wa
        grad.db += g_w.sum(axis=0) + g_wa.sum(axis=0)
        grad.dlog_tau += 0.5 * lambda_curr * (r1.dlog_tau + r2.dlog_tau)

    breakdown = total_loss(l_ground, l_curr, lambda_curr)
    breakdown.ground_degenerate = degenerate
    if not need_grad:
        return breakdown, None
    flat = grad.flat()
    if not np.all(np.isfinite(flat)):
        bad = np.flatnonzero(~np.isfinite(flat))
        raise NonFiniteGradientError(
            f"non-finite gradient entries at flat indices {bad[:5].tolist()} (tau={tau}, loss={breakdown.l_total})"
        )
    return breakdown, grad


def gradients(
    head: ProjectionHead, inputs: LossInputs, selected, lambda_curr: float = DEFAULT_LAMBDA_CURR
) -> GradientSet:
    return objective(head, inputs, selected, lambda_curr)[1]
