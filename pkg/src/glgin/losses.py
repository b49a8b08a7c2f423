"""Joint training objective."""

from __future__ import annotations

import torch
import torch.nn.functional as F

EPS = 1e-12


def intent_loss(scores: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Binary cross-entropy summed over real tokens and all intent labels.

    Every real token is supervised with its sentence's intent set.
    scores: [B, n, N_I] in (0, 1); targets: [B, N_I]; mask: [B, n].
    """
    # 1 - 1e-12 rounds to 1 in float32, so the clamp widens to the dtype's eps
    eps = max(EPS, torch.finfo(scores.dtype).eps)
    p = scores.clamp(eps, 1.0 - eps)
    t = targets.unsqueeze(1).to(p.dtype)
    ce = t * torch.log(p) + (1.0 - t) * torch.log(1.0 - p)
    return -(ce * mask.unsqueeze(-1).to(p.dtype)).sum()


def slot_loss(y: torch.Tensor, gold_slot_ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Categorical cross-entropy of softmax rows ``y`` [B, n, N_S] against
    slot vocabulary ids (class = id - 1), summed over real tokens."""
    target = (gold_slot_ids - 1).clamp(min=0)
    p = y.gather(-1, target.unsqueeze(-1)).squeeze(-1).clamp(min=EPS)
    return -(torch.log(p) * mask.to(p.dtype)).sum()


def joint_loss(l1: torch.Tensor, l2: torch.Tensor, alpha: float = 1.0, beta: float = 1.0) -> torch.Tensor:
    return alpha * l1 + beta * l2


def slot_loss_from_logits(logits: torch.Tensor, gold_slot_ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Same quantity as :func:`slot_loss` computed with log-softmax, which
    keeps gradients alive when a gold probability underflows."""
    target = (gold_slot_ids - 1).clamp(min=0)
    logp = torch.log_softmax(logits, dim=-1).gather(-1, target.unsqueeze(-1)).squeeze(-1)
    return -(logp * mask.to(logp.dtype)).sum()


def intent_loss_from_logits(logits: torch.Tensor, targets: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """:func:`intent_loss` evaluated on pre-sigmoid logits (numerically stable)."""
    t = targets.unsqueeze(1).expand_as(logits).to(logits.dtype)
    ce = F.binary_cross_entropy_with_logits(logits, t, reduction="none")
    return (ce * mask.unsqueeze(-1).to(logits.dtype)).sum()
