"""Partial-resampling rounding of small fractional points, plus its bounds.

Each variable starts as an independent Bernoulli(``alpha * xhat_i``) draw.
While some covering row is violated, the lowest-indexed violated row picks a
random subset ``Y`` of its zero variables (membership probability
``sigma * A_ki``) and redraws each member as Bernoulli(``alpha * xhat_i``).
Variables only ever flip from 0 to 1.

The analytic helpers return the quantities that bound this process: the
witness weight of a resampled set, the per-row ratio ``s_k``, the expected
number of resampling events, and the per-variable marginal bound.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from cipround import kernels
from cipround.model import CipInstance, FractionalSolution, IntegralSolution, integral_solution
from cipround.rng import bit_generator


@dataclass(frozen=True)
class RoundingParams:
    """Resampling probability ``sigma`` and inflation ``alpha``."""

    sigma: float
    alpha: float

    def __post_init__(self):
        s, a = float(self.sigma), float(self.alpha)
        if not (0.0 < s < 1.0):
            raise ValueError(f"sigma={s} must lie in (0,1)")
        if not math.isfinite(a) or a <= -math.log1p(-s) / s:
            raise ValueError(f"alpha={a} must exceed -ln(1-sigma)/sigma={-math.log1p(-s) / s}")
        object.__setattr__(self, "sigma", s)
        object.__setattr__(self, "alpha", a)

    @property
    def theta(self) -> float:
        """Quantization step ``-ln(1-sigma) / (alpha*sigma)``; ``theta * alpha >= 1``."""
        return -math.log1p(-self.sigma) / (self.alpha * self.sigma)

    @property
    def log_decay(self) -> float:
        """``-ln(1 - sigma)``."""
        return -math.log1p(-self.sigma)


@dataclass(eq=False)
class ResampleTrace:
    """Replayable record of one run.

    ``events[j] = (k, Y, new_bits)`` with ``Y`` the resampled set and
    ``new_bits`` the members that came up 1.
    """

    initial_bits: np.ndarray
    events: list = field(default_factory=list)
    total_events: int = 0
    seed: int | None = None
    stream: int | None = None

    def to_jsonl(self, fh) -> None:
        """One header line, then one line per event."""
        head = {"kind": "init", "seed": self.seed, "stream": self.stream,
                "initial_bits": [int(b) for b in self.initial_bits],
                "total_events": self.total_events}
        fh.write(json.dumps(head) + "\n")
        for k, ys, new in self.events:
            fh.write(json.dumps({"kind": "event", "k": int(k), "Y": list(map(int, ys)),
                                 "new": list(map(int, new))}) + "\n")

    @classmethod
    def from_jsonl(cls, lines) -> "ResampleTrace":
        it = (json.loads(ln) for ln in lines if ln.strip())
        head = next(it)
        if head.get("kind") != "init":
            raise ValueError("trace must start with an init line")
        events = [(e["k"], e["Y"], e["new"]) for e in it]
        return cls(np.array(head["initial_bits"], dtype=np.int8), events,
                   head.get("total_events", len(events)), head.get("seed"), head.get("stream"))

    def final_bits(self) -> np.ndarray:
        x = self.initial_bits.astype(np.int64).copy()
        for _, _, new in self.events:
            x[list(new)] = 1
        return x

    def replay_check(self, inst: CipInstance, base=None) -> list[str]:
        """Re-run the bookkeeping against ``inst`` and list any broken rule.

        Checks that each event's row was the lowest violated one, that new
        bits lie in ``Y``, that ``Y`` only holds zero variables of the row,
        that no variable turns twice, and that the final state covers.
        """
        problems = []
        base = np.zeros(inst.n, dtype=np.int64) if base is None else np.asarray(base, dtype=np.int64)
        x = self.initial_bits.astype(np.int64).copy()
        turned = set()
        for j, (k, ys, new) in enumerate(self.events):
            act = inst.activity(base + x)
            viol = np.flatnonzero(act < inst.a)
            if viol.size == 0 or viol[0] != k:
                problems.append(f"event {j}: row {k} is not the lowest violated row")
            cols = set(inst.row(k)[0].tolist())
            if not set(ys) <= cols or any(x[i] for i in ys):
                problems.append(f"event {j}: Y holds a variable outside the row or already 1")
            if not set(new) <= set(ys):
                problems.append(f"event {j}: new bits outside Y")
            if turned & set(new):
                problems.append(f"event {j}: a variable turned twice")
            turned |= set(new)
            x[list(new)] = 1
        if np.any(inst.activity(base + x) < inst.a):
            problems.append("final state violates a covering row")
        if len(self.events) != self.total_events:
            problems.append("event count mismatch")
        return problems


def default_cap(m: int) -> int:
    return 1000 * m + 1000


def _xvec(xhat, n=None) -> np.ndarray:
    x = xhat.x if isinstance(xhat, FractionalSolution) else xhat
    x = np.asarray(x, dtype=np.float64)
    if n is not None and x.shape != (n,):
        raise ValueError(f"xhat has shape {x.shape}, expected ({n},)")
    return x


def _log_inv_s(inst, x, params) -> np.ndarray:
    """``-ln s_k = sigma*alpha*A_k.x + a_k ln(1-sigma)`` for every row."""
    ax = inst.to_dense() @ x if inst.m else np.zeros(0)
    return params.sigma * params.alpha * ax - inst.a * params.log_decay


def s_bounds(inst: CipInstance, xhat, params: RoundingParams) -> np.ndarray:
    return np.exp(-_log_inv_s(inst, _xvec(xhat, inst.n), params))


def s_bound(inst: CipInstance, xhat, params: RoundingParams, k: int) -> float:
    """``(1-sigma)^(-a_k) exp(-sigma alpha A_k.xhat)``."""
    return float(s_bounds(inst, xhat, params)[k])


def _event_terms(log_inv_s) -> np.ndarray:
    if np.any(log_inv_s <= 0):
        k = int(np.flatnonzero(log_inv_s <= 0)[0])
        raise ValueError(f"s_{k} >= 1: the resampling bound does not apply")
    return 1.0 / np.expm1(log_inv_s)


def expected_resample_bound(inst: CipInstance, xhat, params: RoundingParams) -> float:
    """Sum over rows of ``1 / (exp(sigma alpha A_k.xhat) (1-sigma)^a_k - 1)``."""
    if inst.m == 0:
        return 0.0
    return float(_event_terms(_log_inv_s(inst, _xvec(xhat, inst.n), params)).sum())


def marginal_bounds(inst: CipInstance, xhat, params: RoundingParams) -> np.ndarray:
    x = _xvec(xhat, inst.n)
    if inst.m == 0:
        return params.alpha * x
    terms = _event_terms(_log_inv_s(inst, x, params))
    weight = terms @ inst.to_dense()
    return params.alpha * x * (1.0 + params.sigma * weight)


def marginal_bound(inst: CipInstance, xhat, params: RoundingParams, i: int) -> float:
    """Upper bound on ``P(x_i = 1)`` after the run."""
    return float(marginal_bounds(inst, xhat, params)[i])


def f_weight(inst: CipInstance, xhat, params: RoundingParams, k: int, Z) -> float:
    """Witness weight of resampled set ``Z`` on row ``k``."""
    x = _xvec(xhat, inst.n)
    cols, vals = inst.row(k)
    coef = dict(zip(cols.tolist(), vals.tolist()))
    s = params.sigma
    out = math.exp(inst.a[k] * params.log_decay)
    for v in vals:
        out *= 1.0 - v * s
    for i in Z:
        v = coef.get(int(i), 0.0)
        if v == 0.0:
            return 0.0
        den = 1.0 - v * s
        num = (1.0 - params.alpha * x[i]) * v * s
        if den == 0.0:
            if num != 0.0:
                raise ZeroDivisionError(f"A[{k},{i}]*sigma = 1")
            return 0.0
        out *= num / den
    return out


def relax_round(xhat, inst: CipInstance, params: RoundingParams, seed: int,
                cap: int | None = None, stream: int = 0, check: bool = True):
    """Round ``xhat`` (every entry below ``1/alpha``) to a 0/1 cover.

    Returns ``(IntegralSolution, ResampleTrace)``. Raises
    ResampleCapExceeded after ``cap`` events (default ``1000 m + 1000``).
    """
    x = _xvec(xhat, inst.n)
    if np.any(x < 0) or np.any(params.alpha * x >= 1.0):
        raise ValueError("relax_round needs 0 <= xhat_i < 1/alpha")
    if check and inst.m:
        live = inst.a > 0
        if np.any(_log_inv_s(inst, x, params)[live] <= 0):
            raise ValueError("some row has s_k >= 1; xhat is too small for these params")
    p = params.alpha * x
    bits, events, trace, initial = kernels.relax(
        inst.indptr, inst.indices, inst.data, inst.a, np.zeros(inst.n, dtype=np.int64), p,
        params.sigma, bit_generator(seed, stream), default_cap(inst.m) if cap is None else cap,
        True)
    rt = ResampleTrace(initial, trace, events, seed, stream)
    return integral_solution(inst, bits.astype(np.int64)), rt
