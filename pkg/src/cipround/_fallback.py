"""Pure-Python resampling core, used when the compiled extension is absent.

Stream order (shared with ``_kernels.pyx``):

1. one ``next_double`` per variable, in index order, for the initial
   Bernoulli(p_i) draw;
2. per resampling event on row k: one draw per zero-valued variable in the
   row's support (stored column order) deciding membership in Y with
   probability ``sigma * A_ki``; then one draw per member of Y, in the same
   order, deciding Bernoulli(p_i).

Row activities are plain left-to-right float sums so they agree bit for bit
with the compiled version.
"""
import numpy as np

from cipround.errors import ResampleCapExceeded


def _activity(cols, vals, tot):
    s = 0.0
    for i, v in zip(cols, vals):
        s += v * tot[i]
    return s


def relax(indptr, indices, data, rhs, base, p, sigma, bitgen, cap, record=False):
    """Resample rows of ``sum_i A_ki (base_i + x_i) >= rhs_k`` until all hold.

    Returns ``(x, events, trace, initial_bits)``; ``trace`` and
    ``initial_bits`` are None unless ``record``.
    """
    n = len(p)
    m = len(rhs)
    nd = bitgen.ctypes.next_double
    state = bitgen.ctypes.state
    plist = [float(v) for v in p]
    x = [1 if nd(state) < plist[i] else 0 for i in range(n)]
    initial = np.array(x, dtype=np.int8) if record else None
    base = [int(b) for b in base]
    tot = [float(b + xi) for b, xi in zip(base, x)]

    rows = []
    for k in range(m):
        lo, hi = int(indptr[k]), int(indptr[k + 1])
        rows.append(([int(i) for i in indices[lo:hi]], [float(v) for v in data[lo:hi]]))
    rhs = [float(v) for v in rhs]

    trace = [] if record else None
    events = 0
    k = 0
    while True:
        while k < m and _activity(rows[k][0], rows[k][1], tot) >= rhs[k]:
            k += 1
        if k >= m:
            break
        if events >= cap:
            raise ResampleCapExceeded(f"cap exceeded: more than {cap} resampling events")
        cols, vals = rows[k]
        ys = [i for i, v in zip(cols, vals) if x[i] == 0 and nd(state) < sigma * v]
        new = []
        for i in ys:
            if nd(state) < plist[i]:
                x[i] = 1
                tot[i] = float(base[i] + 1)
                new.append(i)
        events += 1
        if record:
            trace.append((k, ys, new))
    return np.array(x, dtype=np.int8), events, trace, initial


def row_activity(indptr, indices, data, x):
    """Sequential per-row sums ``sum_j data[j] * x[indices[j]]``."""
    m = len(indptr) - 1
    xf = [float(v) for v in x]
    out = np.empty(m, dtype=np.float64)
    for k in range(m):
        lo, hi = int(indptr[k]), int(indptr[k + 1])
        s = 0.0
        for j in range(lo, hi):
            s += float(data[j]) * xf[indices[j]]
        out[k] = s
    return out
