"""Idealized one-round motion of a single card.

A card that starts a round at depth ``b`` (depths measured as fractions
1/n, 2/n, ..., 1 of the deck, top to bottom) and is reinserted at a uniform
position ``u`` lands, in the large-deck limit, at ``g(b, u)``:

    g(b, u) = e^(1-b) * u                              for u <= u0(b)
    g(b, u) = e^(e^(-b) * (1-u)) - (1-u) * e^(1-b)     for u >  u0(b)

with breakpoint ``u0(b) = 1 - (1-b) * e^b``.  Both branches meet at the
breakpoint and ``g(b, .)`` is a continuous, strictly increasing bijection of
[0, 1].  Its inverse (computed here by a warm-started Newton sweep) is the
CDF of the landing position, so the row of the discretized transition
matrix ``B(n)`` for start depth ``a = i/n`` is the vector of CDF increments

    b[i, j] = ginv(a, j/n) - ginv(a, (j-1)/n).

This module builds ``B(n)`` densely, applies its symmetric part
``S = (B + B^T)/2`` and skew part ``D = (B - B^T)/2`` matrix-free in O(n)
memory, and provides the exact moments/distribution of the auxiliary
upward-drift chain Y used to control the single-card motion:

    Y_0 = a,   Y_{t+1} = Y_t + 1/n with probability Y_t, else Y_t.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NumericError",
    "GridKernel",
    "u0",
    "g",
    "g_prime",
    "g_inverse",
    "build_kernel",
    "apply_b",
    "apply_bt",
    "apply_sym",
    "apply_skew",
    "y_moments",
    "y_distribution",
    "kernel_to_csv",
    "kernel_to_binary",
    "kernel_from_binary",
]


class NumericError(RuntimeError):
    """An iterative numeric routine failed to reach its tolerance."""


KERNEL_MAGIC = b"CCRKERN1"

# 8-point Gauss-Legendre nodes/weights on (0, 1), for the cell-averaged rows.
_GAUSS8_NODES = np.array([
    0.019855071751231884, 0.101666761293186630, 0.237233795041835507,
    0.408282678752175097, 0.591717321247824903, 0.762766204958164493,
    0.898333238706813370, 0.980144928248768116,
])
_GAUSS8_WEIGHTS = np.array([
    0.050614268145188130, 0.111190517226687235, 0.156853322938943644,
    0.181341891689180991, 0.181341891689180991, 0.156853322938943644,
    0.111190517226687235, 0.050614268145188130,
])


def _check_unit(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError(f"{name} must lie in [0, 1]")
    return x


def u0(b):
    """Breakpoint of the landing map: u0(b) = 1 - (1-b) e^b.

    Monotone from u0(0) = 0 to u0(1) = 1; a uniform reinsertion above the
    breakpoint lands the card on the first branch of g.
    """
    b = _check_unit("b", b)
    out = 1.0 - (1.0 - b) * np.exp(b)
    return float(out) if out.ndim == 0 else out


def g(b, u):
    """Idealized landing position of a card from depth b reinserted at u.

    Evaluated in the single-expression form min(branch1, branch2), which
    equals the piecewise definition on the whole unit square.
    """
    b = _check_unit("b", b)
    u = _check_unit("u", u)
    e1b = np.exp(1.0 - b)
    out = np.minimum(e1b * u, np.exp(np.exp(-b) * (1.0 - u)) - (1.0 - u) * e1b)
    return float(out) if out.ndim == 0 else out


def g_prime(b, u, side="auto"):
    """du-derivative of g(b, .), piecewise.

    The derivative jumps at u0(b).  ``side`` selects the branch exactly at
    the breakpoint: "left" forces the linear branch, "right" the second
    branch; "auto" uses u <= u0(b) (left-continuous).
    """
    if side not in ("auto", "left", "right"):
        raise ValueError("side must be auto, left or right")
    b = _check_unit("b", b)
    u = _check_unit("u", u)
    e1b = np.exp(1.0 - b)
    second = e1b - np.exp(-b) * np.exp(np.exp(-b) * (1.0 - u))
    if side == "left":
        low = u <= u0(np.asarray(b))
    elif side == "right":
        low = u < u0(np.asarray(b))
    else:
        low = u <= u0(np.asarray(b))
    out = np.where(low, e1b, second)
    return float(out) if out.ndim == 0 else out


def _ginv_newton(a, z, u_start, tol, maxiter=100):
    """Vector Newton solve of g(a, u) = z, warm-started at u_start.

    a is a scalar depth; z and u_start are same-shape arrays.  Falls back
    to bisection for any entry that has not met ``tol`` after ``maxiter``
    Newton steps (never observed for tol >= 1e-12, but guaranteed to
    terminate because g(a, .) is strictly increasing).
    """
    u = np.array(u_start, dtype=float, copy=True)
    e1a = np.exp(1.0 - a)
    ema = np.exp(-a)
    breakpt = 1.0 - (1.0 - a) * np.exp(a)
    for _ in range(maxiter):
        s = np.minimum(e1a * u, np.exp(ema * (1.0 - u)) - (1.0 - u) * e1a) - z
        bad = np.abs(s) > tol
        if not bad.any():
            return u
        deriv = np.where(u <= breakpt, e1a, e1a - ema * np.exp(ema * (1.0 - u)))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(bad, s / deriv, 0.0)
        step[~np.isfinite(step)] = 0.0
        u -= step
        np.clip(u, 0.0, 1.0, out=u)
    return _ginv_bisect(a, z, u, tol)


def _ginv_bisect(a, z, u, tol, sweeps=200):
    """Monotone bisection cleanup for entries Newton left unconverged."""
    e1a = np.exp(1.0 - a)
    ema = np.exp(-a)

    def f(x):
        return np.minimum(e1a * x, np.exp(ema * (1.0 - x)) - (1.0 - x) * e1a)

    s = f(u) - z
    bad = np.abs(s) > tol
    if not bad.any():
        return u
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    for _ in range(sweeps):
        mid = 0.5 * (lo + hi)
        below = f(mid) < z
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo < 1e-17):
            break
    cand = 0.5 * (lo + hi)
    u = np.where(bad, cand, u)
    if np.any(np.abs(f(u) - z) > max(tol, 1e-11)):
        raise NumericError("g_inverse failed to converge")
    return u


def g_inverse(b, z, tol=1e-12):
    """Inverse of g(b, .): the u with |g(b, u) - z| <= tol.

    Scalar b with scalar or vector z.  This is also the CDF of the landing
    position of a card started at depth b.
    """
    b = float(b)
    if not 0.0 <= b <= 1.0:
        raise ValueError("b must lie in [0, 1]")
    z_arr = _check_unit("z", z)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    u = _ginv_newton(b, z_arr, z_arr, tol)
    return float(u[0]) if scalar else u


@dataclass
class GridKernel:
    """Dense one-round transition matrix on the depth grid {1/n, ..., 1}.

    Row i gives the landing distribution of a card starting at depth
    a = i/n exactly ("endpoint" rule) or averaged over the cell
    ((i-1)/n, i/n) ("cell-average" rule, under which the matrix is doubly
    stochastic up to quadrature error).
    """

    n: int
    probs: np.ndarray
    row_rule: str = "endpoint"

    def row_sums(self):
        return self.probs.sum(axis=1)

    def col_sums(self):
        return self.probs.sum(axis=0)

    def matvec(self, v):
        return self.probs @ v

    def rmatvec(self, v):
        return self.probs.T @ v

    def sym_matvec(self, v):
        return 0.5 * (self.probs @ v + self.probs.T @ v)

    def skew_matvec(self, v):
        return 0.5 * (self.probs @ v - self.probs.T @ v)

    def validate(self, row_tol=1e-9, col_slack=30.0):
        """Check stochasticity: rows to row_tol, columns to col_slack/n.

        Endpoint rows carry a top-corner boundary layer whose column-sum
        deviation decays like ~0.4 n^(-1/2), so col_slack/n is the right
        envelope only up to n of a few thousand; widen it (or build with
        the cell-average rule) beyond that.
        """
        if np.any(self.probs < -1e-15):
            raise NumericError("kernel has negative entries")
        if np.abs(self.row_sums() - 1.0).max() > row_tol:
            raise NumericError("kernel rows do not sum to 1")
        if np.abs(self.col_sums() - 1.0).max() > col_slack / self.n:
            raise NumericError("kernel column sums deviate too much from 1")
        return self


_BUILD_BLOCK = 512  # rows per warm-start block; fixed so results never depend
                    # on the thread count


def _build_rows(n, row_rule, tol, lo_row, hi_row, out):
    """Fill rows lo_row..hi_row-1 (0-based) of ``out`` with kernel rows."""
    z = np.arange(n + 1) / n
    if row_rule == "endpoint":
        u = z.copy()
        for i in range(lo_row + 1, hi_row + 1):
            u = _ginv_newton(i / n, z, u, tol)
            np.subtract(u[1:], u[:-1], out=out[i - 1])
    else:
        us = [z.copy() for _ in range(len(_GAUSS8_NODES))]
        for i in range(lo_row + 1, hi_row + 1):
            lo = (i - 1) / n
            row = np.zeros(n)
            for k, (node, wt) in enumerate(zip(_GAUSS8_NODES, _GAUSS8_WEIGHTS)):
                us[k] = _ginv_newton(lo + node / n, z, us[k], tol)
                row += wt * np.diff(us[k])
            out[i - 1] = row


def build_kernel(n, row_rule="endpoint", tol=1e-12, threads=1, progress=None):
    """Build the n x n landing-distribution matrix B(n).

    Each row is a sweep of CDF values ginv(a, j/n), j = 0..n, differenced;
    sweeps warm-start row to row inside fixed blocks of rows, so the build
    takes a handful of Newton iterations per row and is bitwise identical
    for every thread count.  ``row_rule`` picks the depth convention
    ("endpoint": a = i/n exactly; "cell-average": a averaged over the cell
    with an 8-point Gauss rule, under which the kernel is doubly
    stochastic up to quadrature error).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if row_rule not in ("endpoint", "cell-average"):
        raise ValueError("row_rule must be 'endpoint' or 'cell-average'")
    probs = np.empty((n, n))
    blocks = [(lo, min(lo + _BUILD_BLOCK, n)) for lo in range(0, n, _BUILD_BLOCK)]
    if threads > 1 and len(blocks) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = [
                pool.submit(_build_rows, n, row_rule, tol, lo, hi, probs)
                for lo, hi in blocks
            ]
            for k, f in enumerate(futs):
                f.result()
                if progress is not None:
                    progress(min((k + 1) * _BUILD_BLOCK, n), n)
    else:
        for k, (lo, hi) in enumerate(blocks):
            _build_rows(n, row_rule, tol, lo, hi, probs)
            if progress is not None:
                progress(hi, n)
    np.clip(probs, 0.0, None, out=probs)
    return GridKernel(n=n, probs=probs, row_rule=row_rule)


def _row_sweep(n, x, sign, tol=1e-12):
    """Shared core of the matrix-free applies.

    Accumulates y = (B x + sign * B^T x) / 2 one row at a time: row i is
    recovered from the warm-started CDF sweep, contributes its dot with x
    to y[i] (the B x part) and x[i] times itself to y (the B^T x part).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a length-{n} vector")
    z = np.arange(n + 1) / n
    u = z.copy()
    y = np.zeros(n)
    for i in range(1, n + 1):
        u = _ginv_newton(i / n, z, u, tol)
        r = np.diff(u)
        y[i - 1] += r @ x
        y += (sign * x[i - 1]) * r
    return 0.5 * y


def apply_b(n, x, tol=1e-12):
    """Matrix-free B(n) @ x (endpoint rows), O(n) memory."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a length-{n} vector")
    z = np.arange(n + 1) / n
    u = z.copy()
    y = np.empty(n)
    for i in range(1, n + 1):
        u = _ginv_newton(i / n, z, u, tol)
        y[i - 1] = np.diff(u) @ x
    return y


def apply_bt(n, x, tol=1e-12):
    """Matrix-free B(n).T @ x (endpoint rows), O(n) memory."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValueError(f"expected a length-{n} vector")
    z = np.arange(n + 1) / n
    u = z.copy()
    y = np.zeros(n)
    for i in range(1, n + 1):
        u = _ginv_newton(i / n, z, u, tol)
        y += x[i - 1] * np.diff(u)
    return y


def apply_sym(n, x, tol=1e-12):
    """Matrix-free (B + B^T)/2 @ x, O(n) memory."""
    return _row_sweep(n, x, +1.0, tol)


def apply_skew(n, x, tol=1e-12):
    """Matrix-free (B - B^T)/2 @ x, O(n) memory."""
    return _row_sweep(n, x, -1.0, tol)


def y_moments(n, a, t):
    """Mean, closed-form variance bound, and exact variance of Y_t.

    Mean is (1 + 1/n)^t * a.  The exact variance follows the recursion
    v_{t+1} = (c^2 - 1/n^2) v_t + (c^t a / n^2)(1 - c^t a) with c = 1 + 1/n,
    v_0 = 0.  The returned bound is the solved form
    (a/n^2) sum_{j=t-1}^{2t-2} c^j - (a^2/n^2)(t-1) c^(2t-2) for t >= 1.
    The exact variance always stays below 2/(5n).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < a <= 1.0:
        raise ValueError("a must lie in (0, 1]")
    if t < 0 or t > round(n * (1.0 - a)) + 1e-9:
        raise ValueError("t must lie in [0, n(1-a)]")
    t = int(t)
    c = 1.0 + 1.0 / n
    mean = c**t * a
    var = 0.0
    for s in range(t):
        var = (c * c - 1.0 / n**2) * var + (c**s * a / n**2) * (1.0 - c**s * a)
    assert var < 0.4 / n  # holds for every admissible (n, a, t)
    if t == 0:
        bound = 0.0
    else:
        s = t - 1
        js = np.arange(s, 2 * s + 1)
        bound = (a / n**2) * np.sum(c**js) - (a * a / n**2) * s * c ** (2 * s)
    return mean, float(bound), var


def y_distribution(n, a, t, max_n=500):
    """Exact law of Y_t by forward dynamic programming.

    Returns (values, probs): the support {a, a + 1/n, ..., a + t/n} and the
    probability of each point.  Intended for n <= max_n (the DP is
    O(t^2)); use y_moments alone for larger n.
    """
    if n > max_n:
        raise ValueError(f"y_distribution is limited to n <= {max_n}")
    if not 0.0 < a <= 1.0:
        raise ValueError("a must lie in (0, 1]")
    k0 = round(a * n)
    if abs(k0 / n - a) > 1e-12:
        raise ValueError("a must be a grid point i/n")
    if t < 0 or k0 + t > n:
        raise ValueError("t must lie in [0, n(1-a)]")
    t = int(t)
    probs = np.zeros(t + 1)
    probs[0] = 1.0
    for step in range(t):
        vals = (k0 + np.arange(step + 1)) / n
        nxt = np.zeros(t + 1)
        nxt[: step + 1] = probs[: step + 1] * (1.0 - vals)
        nxt[1 : step + 2] += probs[: step + 1] * vals
        probs = nxt
    values = (k0 + np.arange(t + 1)) / n
    return values, probs


def kernel_to_csv(kernel, path):
    """Write the kernel row-major as CSV, one row per line, full precision."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in kernel.probs:
            fh.write(",".join(f"{x:.17g}" for x in row))
            fh.write("\n")


def kernel_to_binary(kernel, path):
    """Write magic + uint64 n header + row-major float64 payload."""
    with open(path, "wb") as fh:
        fh.write(KERNEL_MAGIC)
        fh.write(struct.pack("<Q", kernel.n))
        fh.write(np.ascontiguousarray(kernel.probs, dtype="<f8").tobytes())


def kernel_from_binary(path):
    """Read a kernel written by kernel_to_binary."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != KERNEL_MAGIC:
            raise ValueError("not a kernel file (bad magic)")
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError("kernel file truncated")
    return GridKernel(n=int(n), probs=data.reshape(int(n), int(n)).copy())
