"""Shared test helpers: finite-difference gradient checking and micro configs."""

import numpy as np
import pytest

import fndiff.adcore as ad
from fndiff.adcore import Tape


def rel_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    """Element-wise relative error with the denominator floored."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def gradcheck(build_loss, tensors, h: float = 1e-5, tol: float = 1e-4, max_coords: int = 0):
    """Compare tape gradients of build_loss() against central differences.

    `build_loss` must construct the loss from the current .data of `tensors`
    (a dict name -> Tensor). Checks every coordinate unless max_coords caps
    the per-tensor sweep. Returns the worst relative error.
    """
    tape = Tape()
    with tape:
        loss = build_loss()
    grads = ad.backward(loss, tape)
    worst = 0.0
    for name, t in tensors.items():
        g = grads.get(t)
        assert g is not None, f"no gradient reached {name}"
        flat = t.data.ravel()
        if max_coords and flat.size > max_coords:
            picker = np.random.default_rng(abs(hash(name)) % 2**32)
            coords = picker.choice(flat.size, size=max_coords, replace=False)
        else:
            coords = range(flat.size)
        for i in coords:
            keep = flat[i]
            flat[i] = keep + h
            up = build_loss().item()
            flat[i] = keep - h
            down = build_loss().item()
            flat[i] = keep
            numeric = (up - down) / (2.0 * h)
            err = rel_error(g.ravel()[i], numeric)
            worst = max(worst, err)
            assert err < tol, (
                f"{name}[{i}]: analytic {g.ravel()[i]:.6e} vs numeric {numeric:.6e} "
                f"(rel {err:.2e} >= {tol})"
            )
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
