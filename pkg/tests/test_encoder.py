import math

import pytest
import torch

from conftest import gradient_errors
from glgin.encoder import SelfAttentiveEncoder, self_attention

pytestmark = pytest.mark.usefixtures("float64")


def loop_attention(x, mask, wq, wk, wv):
    """softmax(QK^T/sqrt(d))V with explicit loops over batch, query and key."""
    B, n, _ = x.shape
    d = wq.shape[0]
    out = torch.zeros(B, n, wv.shape[0])
    for b in range(B):
        keys = [j for j in range(n) if mask[b, j]]
        for i in range(n):
            q = wq @ x[b, i]
            logits = [float(q @ (wk @ x[b, j])) / math.sqrt(d) for j in keys]
            top = max(logits)
            ws = [math.exp(l - top) for l in logits]
            z = sum(ws)
            for w, j in zip(ws, keys):
                out[b, i] += (w / z) * (wv @ x[b, j])
    return out


@pytest.fixture
def rng():
    return torch.Generator().manual_seed(0)


class TestSelfAttention:
    def test_single_token(self, rng):
        x = torch.randn(1, 1, 3, generator=rng)
        wq, wk, wv = (torch.randn(4, 3, generator=rng) for _ in range(3))
        c, w = self_attention(x, torch.ones(1, 1, dtype=torch.bool), wq, wk, wv)
        assert w[0].tolist() == [[1.0]]
        torch.testing.assert_close(c[0, 0], wv @ x[0, 0])

    def test_identical_tokens_split_evenly(self, rng):
        x = torch.randn(1, 1, 3, generator=rng).expand(1, 2, 3).contiguous()
        wq, wk, wv = (torch.randn(4, 3, generator=rng) for _ in range(3))
        _, w = self_attention(x, torch.ones(1, 2, dtype=torch.bool), wq, wk, wv)
        torch.testing.assert_close(w[0], torch.full((2, 2), 0.5))

    def test_matches_loop_oracle(self, rng):
        x = torch.randn(2, 3, 5, generator=rng)
        mask = torch.tensor([[True, True, True], [True, True, False]])
        wq, wk, wv = (torch.randn(4, 5, generator=rng) for _ in range(3))
        c, w = self_attention(x, mask, wq, wk, wv)
        expected = loop_attention(x, mask, wq, wk, wv)
        assert (c - expected).abs().max() < 1e-6

    def test_rows_normalize_over_real_keys(self, rng):
        x = torch.randn(3, 6, 5, generator=rng)
        lengths = torch.tensor([6, 2, 4])
        mask = torch.arange(6) < lengths[:, None]
        wq, wk, wv = (torch.randn(4, 5, generator=rng) for _ in range(3))
        _, w = self_attention(x, mask, wq, wk, wv)
        sums = w.sum(-1)
        assert ((sums - 1).abs() < 1e-6).all()
        assert (w[~mask.unsqueeze(1).expand_as(w)] == 0).all()

    def test_all_masked_row_rejected(self, rng):
        x = torch.randn(1, 2, 3, generator=rng)
        w = torch.randn(2, 3, generator=rng)
        with pytest.raises(ValueError):
            self_attention(x, torch.zeros(1, 2, dtype=torch.bool), w, w, w)


def make_encoder(**kw):
    torch.manual_seed(0)
    args = dict(vocab_size=12, d_emb=4, d_lstm=3, d_attn=5, dropout=0.0)
    args.update(kw)
    return SelfAttentiveEncoder(**args).double().eval()


def batch_of(ids_rows):
    n = max(len(r) for r in ids_rows)
    ids = torch.zeros(len(ids_rows), n, dtype=torch.long)
    for b, r in enumerate(ids_rows):
        ids[b, : len(r)] = torch.tensor(r)
    lengths = torch.tensor([len(r) for r in ids_rows])
    return ids, lengths, torch.arange(n) < lengths[:, None]


class TestEncoder:
    def test_output_width(self):
        enc = SelfAttentiveEncoder(vocab_size=10, d_emb=128, d_lstm=256)
        ids, lengths, mask = batch_of([[2, 3, 4]])
        out = enc.eval()(ids, lengths, mask)
        assert enc.d_attn == 512
        assert out.E.shape == (1, 3, 2 * 256 + 512)
        torch.testing.assert_close(out.E, torch.cat([out.H, out.C], -1))

    def test_padding_invariance(self):
        enc = make_encoder()
        ids, lengths, mask = batch_of([[2, 3, 4]])
        short = enc(ids, lengths, mask).E
        ids2, lengths2, mask2 = batch_of([[2, 3, 4], [5, 6, 7, 8, 9, 10]])
        padded = enc(ids2, lengths2, mask2).E
        assert (padded[0, :3] - short[0]).abs().max() < 1e-5

    def test_batch_permutation_equivariance(self):
        enc = make_encoder()
        rows = [[2, 3], [4, 5, 6, 7], [8]]
        ids, lengths, mask = batch_of(rows)
        E = enc(ids, lengths, mask).E
        perm = [2, 0, 1]
        ids_p, lengths_p, mask_p = batch_of([rows[i] for i in perm])
        E_p = enc(ids_p, lengths_p, mask_p).E
        assert (E_p - E[perm][:, : E_p.shape[1]]).abs().max() < 1e-12

    def test_gradient_check(self):
        enc = make_encoder()
        ids, lengths, mask = batch_of([[2, 3, 4], [5, 6]])
        params = [(n, p) for n, p in enc.named_parameters()
                  if n.startswith(("embedding", "query", "key", "value"))]
        errors = gradient_errors(lambda: enc(ids, lengths, mask).E.sum(), params)
        assert max(errors.values()) < 1e-4, errors
