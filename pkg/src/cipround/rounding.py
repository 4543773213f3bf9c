"""Rounding of arbitrary fractional points via theta-quantization.

Each ``xhat_i`` splits into ``v_i`` whole quanta of size ``theta`` plus a
remainder ``F_i``. Whole quanta become whole units outright; a remainder of
at least ``1/alpha`` is rounded up to one more unit (``G_i = 1``); smaller
remainders go to the resampling relaxation against the residual demand.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cipround import kernels
from cipround.model import CipInstance, integral_solution
from cipround.relaxation import (RoundingParams, ResampleTrace, _log_inv_s, _xvec,
                                 default_cap)
from cipround.rng import bit_generator

SNAP = 1e-12


@dataclass(frozen=True, eq=False)
class QuantizedSolution:
    v: np.ndarray
    F: np.ndarray
    G: np.ndarray
    xprime_hat: np.ndarray
    a_resid: np.ndarray

    @property
    def base(self) -> np.ndarray:
        """Units fixed before any randomness: ``v + G``."""
        return self.v + self.G


def _split(x: np.ndarray, theta: float):
    v = np.floor(x / theta)
    F = x - v * theta
    scale = SNAP * np.maximum(1.0, x)
    up = (theta - F < scale) & (x > 0)
    v = np.where(up, v + 1, v)
    F = np.where(up | (F < scale), 0.0, F)
    return v.astype(np.int64), np.maximum(F, 0.0)


def multiplicity_cap(xhat_i: float, params: RoundingParams) -> int:
    """``ceil(xhat_i / theta)``, the most units rounding can give variable i."""
    v, F = _split(np.array([float(xhat_i)]), params.theta)
    return int(v[0] + (F[0] > 0))


def multiplicity_caps(xhat, params: RoundingParams) -> np.ndarray:
    v, F = _split(_xvec(xhat), params.theta)
    return v + (F > 0)


def quantize(xhat, inst: CipInstance, params: RoundingParams, check: bool = True) -> QuantizedSolution:
    x = _xvec(xhat, inst.n)
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("xhat must be finite and nonnegative")
    v, F = _split(x, params.theta)
    G = (F >= 1.0 / params.alpha).astype(np.int64)
    xp = np.where(G == 1, 0.0, F)
    a_resid = inst.a - inst.activity(v + G)
    q = QuantizedSolution(v, F, G, xp, a_resid)
    if check and inst.m:
        # residual never looks worse to the resampling bound than the original
        lhs = _log_inv_s(CipInstance(inst.n, inst.m, inst.indptr, inst.indices, inst.data,
                                     a_resid, inst.d, inst.objectives), xp, params)
        rhs = _log_inv_s(inst, x, params)
        tol = 1e-9 * np.maximum(1.0, np.abs(rhs))
        if np.any(lhs < rhs - tol):
            k = int(np.flatnonzero(lhs < rhs - tol)[0])
            raise AssertionError(f"residual bound worse than original on row {k}")
    return q


def _stack_csr(parts):
    indptr, indices, data, rhs = [np.zeros(1, dtype=np.int64)], [], [], []
    off = 0
    for ip, ix, dt, r in parts:
        indptr.append(np.asarray(ip[1:], dtype=np.int64) + off)
        off += int(ip[-1])
        indices.append(np.asarray(ix, dtype=np.int64))
        data.append(np.asarray(dt, dtype=np.float64))
        rhs.append(np.asarray(r, dtype=np.float64))
    return (np.concatenate(indptr), np.concatenate(indices),
            np.concatenate(data), np.concatenate(rhs))


class RoundingPlan:
    """Quantize once, then draw as many independent roundings as needed.

    ``fixed`` adds units that are pinned outside the rounding (zero columns
    of ``inst``); ``also_cover`` lists further instances whose rows must end
    up covered too. Their rows are checked after those of ``inst`` and are
    met by construction up to floating-point noise.
    """

    def __init__(self, inst: CipInstance, xhat, params: RoundingParams,
                 fixed=None, also_cover=(), cap: int | None = None):
        self.inst = inst
        self.params = params
        self.xhat = _xvec(xhat, inst.n)
        self.q = quantize(self.xhat, inst, params)
        self.fixed = (np.zeros(inst.n, dtype=np.int64) if fixed is None
                      else np.asarray(fixed, dtype=np.int64))
        self.base = np.ascontiguousarray(self.q.base + self.fixed)
        self.p = np.ascontiguousarray(params.alpha * self.q.xprime_hat)
        parts = [(inst.indptr, inst.indices, inst.data, inst.a)]
        parts += [(o.indptr, o.indices, o.data, o.a) for o in also_cover]
        self.indptr, self.indices, self.data, self.rhs = _stack_csr(parts)
        self.m_total = len(self.rhs)
        self.cap = default_cap(self.m_total) if cap is None else cap
        self.caps = self.q.v + (self.q.F > 0) + self.fixed

    def draw(self, seed: int, stream: int = 0, record: bool = False, backend=None):
        """One rounding; returns ``(x, events, trace_or_None)``."""
        impl = kernels.get_backend(backend)
        bits, events, trace, initial = impl.relax(
            self.indptr, self.indices, self.data, self.rhs, self.base, self.p,
            self.params.sigma, bit_generator(seed, stream), self.cap, record)
        x = self.base + bits
        rt = ResampleTrace(initial, trace, events, seed, stream) if record else None
        return x, events, rt


def round_solution(xhat, inst: CipInstance, params: RoundingParams, seed: int,
                   stream: int = 0, cap: int | None = None):
    """Round a feasible fractional point; returns ``(IntegralSolution, ResampleTrace)``.

    The trace's bits are the relaxation's bits on top of ``v + G``.
    """
    plan = RoundingPlan(inst, xhat, params, cap=cap)
    x, _, trace = plan.draw(seed, stream, record=True)
    return integral_solution(inst, x), trace


def rounding_mean_bounds(inst: CipInstance, xhat, params: RoundingParams) -> np.ndarray:
    """Per-variable bound on ``E[x_i]`` using ``a_k`` in place of ``A_k.xhat``."""
    x = _xvec(xhat, inst.n)
    if inst.m == 0:
        return params.alpha * x
    L = params.sigma * params.alpha * inst.a - inst.a * params.log_decay
    w = (1.0 / np.expm1(L)) @ inst.to_dense()
    return params.alpha * x * (1.0 + params.sigma * w)


def rounding_events_bound(inst: CipInstance, params: RoundingParams) -> float:
    if inst.m == 0:
        return 0.0
    L = params.sigma * params.alpha * inst.a - inst.a * params.log_decay
    return float((1.0 / np.expm1(L)).sum())
