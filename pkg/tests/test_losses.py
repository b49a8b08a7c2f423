import math

import pytest
import torch

from glgin.losses import intent_loss, intent_loss_from_logits, joint_loss, slot_loss, slot_loss_from_logits

pytestmark = pytest.mark.usefixtures("float64")


def loop_intent_loss(scores, targets, mask):
    total = 0.0
    B, n, K = scores.shape
    for b in range(B):
        for i in range(n):
            if not mask[b, i]:
                continue
            for k in range(K):
                p, t = float(scores[b, i, k]), float(targets[b, k])
                total -= t * math.log(p) + (1 - t) * math.log(1 - p)
    return total


def loop_slot_loss(y, gold, mask):
    total = 0.0
    for b in range(y.shape[0]):
        for i in range(y.shape[1]):
            if mask[b, i]:
                total -= math.log(float(y[b, i, int(gold[b, i]) - 1]))
    return total


def random_case(seed=0, B=3, n=5, K=4, S=6):
    g = torch.Generator().manual_seed(seed)
    lengths = torch.tensor([5, 2, 4])[:B]
    mask = torch.arange(n) < lengths[:, None]
    logits = torch.randn(B, n, K, generator=g)
    targets = (torch.rand(B, K, generator=g) < 0.4).double()
    slot_logits = torch.randn(B, n, S, generator=g)
    gold = torch.randint(1, S + 1, (B, n), generator=g) * mask
    return logits, targets, mask, slot_logits, gold


class TestIntentLoss:
    def test_half_scores_closed_form(self):
        loss = intent_loss(torch.full((1, 1, 1), 0.5), torch.ones(1, 1), torch.ones(1, 1, dtype=torch.bool))
        assert loss.item() == pytest.approx(math.log(2), abs=1e-12)
        assert round(loss.item(), 4) == 0.6931

    def test_perfect_scores_near_zero(self):
        targets = torch.tensor([[1.0, 0.0]])
        scores = torch.tensor([[[1.0, 0.0]]])
        loss = intent_loss(scores, targets, torch.ones(1, 1, dtype=torch.bool))
        assert 0 <= loss.item() < 1e-10

    def test_matches_loop_oracle(self):
        logits, targets, mask, _, _ = random_case()
        scores = logits.sigmoid()
        got = intent_loss(scores, targets, mask).item()
        assert abs(got - loop_intent_loss(scores, targets, mask)) < 1e-8

    def test_logits_variant_agrees(self):
        logits, targets, mask, _, _ = random_case(1)
        a = intent_loss(logits.sigmoid(), targets, mask)
        b = intent_loss_from_logits(logits, targets, mask)
        assert abs(a.item() - b.item()) < 1e-8


class TestSlotLoss:
    def test_gold_probability_one(self):
        y = torch.tensor([[[0.0, 1.0, 0.0]]])
        assert slot_loss(y, torch.tensor([[2]]), torch.ones(1, 1, dtype=torch.bool)).item() == 0.0

    @pytest.mark.parametrize("n_slots", [2, 3, 7])
    def test_uniform_closed_form(self, n_slots):
        y = torch.full((1, 4, n_slots), 1.0 / n_slots)
        mask = torch.tensor([[True, True, True, False]])
        loss = slot_loss(y, torch.tensor([[1, 2, 1, 0]]), mask)
        assert loss.item() == pytest.approx(3 * math.log(n_slots), abs=1e-12)

    def test_matches_loop_oracle(self):
        _, _, mask, slot_logits, gold = random_case(2)
        y = slot_logits.softmax(-1)
        assert abs(slot_loss(y, gold, mask).item() - loop_slot_loss(y, gold, mask)) < 1e-8

    def test_logits_variant_agrees(self):
        _, _, mask, slot_logits, gold = random_case(3)
        a = slot_loss(slot_logits.softmax(-1), gold, mask)
        assert abs(a.item() - slot_loss_from_logits(slot_logits, gold, mask).item()) < 1e-8

    def test_non_negative(self):
        _, _, mask, slot_logits, gold = random_case(4)
        assert slot_loss(slot_logits.softmax(-1), gold, mask) >= 0


class TestJointLoss:
    def test_weights(self):
        assert joint_loss(torch.tensor(2.0), torch.tensor(3.0)).item() == 5.0
        assert joint_loss(torch.tensor(2.0), torch.tensor(3.0), alpha=1.0, beta=0.0).item() == 2.0
