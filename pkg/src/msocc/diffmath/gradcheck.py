"""Finite-difference verification of reverse-mode gradients."""

import numpy as np

from .tensor import NumericalError, no_grad, set_debug_checks


def gradient_check(f, params, step=1e-3, max_entries=None, seed=0):
    """Max relative error between reverse-mode and central differences.

    f: zero-argument callable returning a scalar Tensor, deterministic.
    params: tensors to perturb. Error per entry is
    |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|); the max over all checked
    entries is returned. max_entries caps the entries checked per tensor
    (seeded subsample) so large parameters stay tractable. Finiteness is
    enforced on every op while the check runs; violations raise
    NumericalError naming the op.
    """
    set_debug_checks(True)
    try:
        for p in params:
            p.grad = None
        out = f()
        out.backward()
        gads = []
        for p in params:
            if p.grad is None:
                gads.append(np.zeros_like(p.data))
            else:
                gads.append(np.array(p.grad, copy=True))
        rng = np.random.default_rng(seed)
        worst = 0.0
        with no_grad():
            for p, gad in zip(params, gads):
                flat = p.data.reshape(-1)
                gflat = gad.reshape(-1)
                n = flat.size
                if max_entries is not None and n > max_entries:
                    idxs = np.sort(rng.choice(n, size=max_entries, replace=False))
                else:
                    idxs = range(n)
                for i in idxs:
                    orig = flat[i]
                    hi = np.float32(orig + step)
                    lo = np.float32(orig - step)
                    flat[i] = hi
                    f1 = f().item()
                    flat[i] = lo
                    f0 = f().item()
                    flat[i] = orig
                    g_fd = (f1 - f0) / float(hi - lo)
                    g_ad = float(gflat[i])
                    rel = abs(g_ad - g_fd) / max(1e-8, abs(g_ad) + abs(g_fd))
                    if rel > worst:
                        worst = rel
        return worst
    finally:
        set_debug_checks(False)
