"""Step-length safeguards shared by the interior-point solvers."""

from __future__ import annotations

import numpy as np


def fraction_to_boundary(v, dv, tau: float) -> float:
    """Largest ``alpha`` in (0, 1] with ``v + alpha*dv >= (1 - tau)*v``.

    ``v`` must be strictly positive; ``tau = 1`` gives the step to the boundary.
    """
    v = np.asarray(v, dtype=np.float64)
    dv = np.asarray(dv, dtype=np.float64)
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    with np.errstate(over="ignore"):  # tiny dv overflows to inf, which min() discards
        return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))
