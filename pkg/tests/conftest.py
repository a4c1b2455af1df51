import numpy as np
import pytest

from hdtomo.geometry import ImageGrid, ParallelGeometry
from hdtomo.phantoms import PhantomSpec


@pytest.fixture(scope="session")
def grid64():
    return ImageGrid(64, 64)


@pytest.fixture(scope="session")
def grid128():
    return ImageGrid(128, 128)


@pytest.fixture(scope="session")
def shepp128(grid128):
    return PhantomSpec.shepp_logan(grid128.radius)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rel_err(a, b):
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) / np.linalg.norm(np.ravel(b)))


def fd_check(fn, tensors, n_probe=12, h=1e-6, seed=0):
    """Worst relative gap between autograd and central differences of scalar ``fn()``.

    Entries are probed at random. Exactly-zero gradients (biases ahead of a norm
    layer) would turn round-off into huge relative errors, so the denominator is
    floored at a small fraction of the largest gradient.
    """
    import torch

    g = torch.Generator().manual_seed(seed)
    grads = torch.autograd.grad(fn(), tensors)
    floor = 1e-3 * max(gr.abs().max().item() for gr in grads)
    worst = 0.0
    for t, gr in zip(tensors, grads):
        flat = t.data.view(-1)
        idx = torch.randint(0, flat.numel(), (min(n_probe, flat.numel()),), generator=g)
        for i in idx.tolist():
            old = flat[i].item()
            flat[i] = old + h
            up = fn().item()
            flat[i] = old - h
            down = fn().item()
            flat[i] = old
            fd = (up - down) / (2 * h)
            an = gr.reshape(-1)[i].item()
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), floor))
    return worst


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance")
        for idx in sorted(results):
            terminalreporter.write_line(results[idx])
