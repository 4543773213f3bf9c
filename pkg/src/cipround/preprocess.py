"""Normalization to ``a_min >= 1`` and ``delta1 >= 1``.

Three steps, in order: clamp any coefficient above its row's RHS down to
that RHS; divide every row with ``a_k < 1`` (row and RHS) by ``a_k``; if the
largest column l1 norm is below 1, divide the whole system by it. None of
the steps changes which integer vectors are feasible, and ``gamma`` can only
shrink.

All scalings divide rather than multiply by a reciprocal, so a coefficient
equal to its divisor lands on exactly 1.0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cipround.model import CipInstance, compute_metrics


@dataclass(frozen=True, eq=False)
class NormalizationCertificate:
    """What ``normalize`` did.

    ``row_divisors[k]`` divided row k and ``a_k`` (1 when untouched);
    ``global_divisor`` then divided the whole system; ``clamped`` lists the
    ``(k, i)`` entries lowered to ``a_k`` beforehand.
    """

    row_divisors: np.ndarray
    global_divisor: float
    clamped: tuple

    @property
    def row_scales(self) -> np.ndarray:
        return 1.0 / self.row_divisors

    @property
    def global_scale(self) -> float:
        return 1.0 / self.global_divisor

    @property
    def is_identity(self) -> bool:
        return not self.clamped and self.global_divisor == 1.0 and bool(np.all(self.row_divisors == 1.0))

    def apply(self, inst: CipInstance) -> CipInstance:
        """Replay the recorded transform on ``inst``."""
        clamp = set(self.clamped)
        rows_k = np.repeat(np.arange(inst.m), np.diff(inst.indptr))
        data = inst.data.copy()
        for j, (k, i) in enumerate(zip(rows_k, inst.indices)):
            if (int(k), int(i)) in clamp:
                data[j] = inst.a[k]
        data = data / self.row_divisors[rows_k]
        a = inst.a / self.row_divisors
        if self.global_divisor != 1.0:
            data = np.minimum(data / self.global_divisor, 1.0)
            a = a / self.global_divisor
        return CipInstance(inst.n, inst.m, inst.indptr, inst.indices, data, a, inst.d, inst.objectives)

    def map_solution(self, x):
        """Integral solutions carry over unchanged."""
        return np.asarray(x)


def normalize(inst: CipInstance):
    """Return ``(normalized_instance, certificate)``."""
    compute_metrics(inst)  # rejects degenerate matrices
    rows_k = np.repeat(np.arange(inst.m), np.diff(inst.indptr))
    data = inst.data.copy()
    over = data > inst.a[rows_k]
    clamped = tuple((int(k), int(i)) for k, i in zip(rows_k[over], inst.indices[over]))
    data[over] = inst.a[rows_k[over]]

    divisors = np.where(inst.a < 1.0, inst.a, 1.0)
    data = data / divisors[rows_k]
    a = inst.a / divisors

    l1 = np.bincount(inst.indices, weights=data, minlength=inst.n)
    delta1 = float(l1.max())
    gdiv = 1.0
    if delta1 < 1.0:
        gdiv = delta1
        # the rescaled column sum can round to just below 1; shrink the divisor by ulps
        while True:
            scaled = np.minimum(data / gdiv, 1.0)
            if np.bincount(inst.indices, weights=scaled, minlength=inst.n).max() >= 1.0:
                break
            gdiv = float(np.nextafter(gdiv, 0.0))
        data = scaled
        a = a / gdiv
    out = CipInstance(inst.n, inst.m, inst.indptr, inst.indices, data, a, inst.d, inst.objectives)
    return out, NormalizationCertificate(divisors, gdiv, clamped)


def is_normalized(inst: CipInstance) -> bool:
    met = compute_metrics(inst)
    return met.a_min >= 1.0 and met.delta1 >= 1.0
