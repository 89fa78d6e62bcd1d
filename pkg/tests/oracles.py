"""Independent numerical oracles used by several test modules."""

import numpy as np
import torch


def central_difference(fn, tensors, h=1e-6, max_entries=None, rng=None):
    """Central finite differences of scalar ``fn()`` w.r.t. entries of ``tensors``.

    Returns ``(numeric, index_list)`` where entries are perturbed in place and
    restored. ``max_entries`` limits the work per tensor by random subsampling.
    """
    rng = rng or np.random.default_rng(0)
    numeric, where = [], []
    with torch.no_grad():
        for ti, t in enumerate(tensors):
            flat = t.view(-1)
            idx = np.arange(flat.numel())
            if max_entries is not None and idx.size > max_entries:
                idx = rng.choice(idx, max_entries, replace=False)
            for j in idx:
                old = flat[j].item()
                flat[j] = old + h
                up = float(fn())
                flat[j] = old - h
                down = float(fn())
                flat[j] = old
                numeric.append((up - down) / (2 * h))
                where.append((ti, int(j)))
    return np.array(numeric), where


def relative_error(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300))


def randomize_(*nets, seed=0, scale=0.3):
    """Redraw weights from N(0, scale) so gradients sit well above round-off.

    BatchNorm scales stay positive and shifts sit at +0.5, which keeps the
    following ReLUs alive in eval mode; otherwise a small net can be dead and
    every gradient is trivially zero.
    """
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for net in nets:
            for m in net.modules():
                if isinstance(m, torch.nn.modules.batchnorm._BatchNorm):
                    m.weight.copy_(0.5 + torch.rand(m.weight.shape, generator=gen, dtype=m.weight.dtype))
                    m.bias.fill_(0.5)
                    continue
                for p in m.parameters(recurse=False):
                    p.copy_(torch.randn(p.shape, generator=gen, dtype=p.dtype) * scale)
