"""Complex log-domain arithmetic used by the product evaluation.

A complex number w is carried as ``log w``; ``-inf`` real part encodes 0 and
``+inf`` encodes infinity.  Imaginary parts are arguments on an arbitrary
branch.
"""
from __future__ import annotations

import numpy as np

LOG_INF = complex(np.inf, 0.0)
LOG_ZERO = complex(-np.inf, 0.0)


def log1p(u: np.ndarray) -> np.ndarray:
    """Accurate complex log(1 + u); numpy's complex log1p loses the real part."""
    u = np.asarray(u, dtype=complex)
    small = np.abs(u) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.log(1.0 + u)
    s = np.where(small, u, 0.0)
    series = s * (1 - s * (1 / 2 - s * (1 / 3 - s * (1 / 4 - s * (1 / 5 - s / 6)))))
    return np.where(small, series, big)


def log1m_exp(x: np.ndarray) -> np.ndarray:
    """log(1 - e^x) for complex x, stable for very large and very small |e^x|."""
    x = np.asarray(x, dtype=complex)
    out = np.empty_like(x)
    re = x.real
    small = re < -36.0
    big = re > 36.0
    mid = ~(small | big)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        out[small] = -np.exp(x[small])
        xb = x[big]
        out[big] = xb + 1j * np.pi - np.exp(-xb)
        xm = x[mid]
        # log(-expm1) rounds 1 - e^x to 1 when |e^x| is tiny; log1p keeps it
        tiny = xm.real < -0.7
        out_mid = np.log(-np.expm1(xm))
        out_mid[tiny] = log1p(-np.exp(xm[tiny]))
        out[mid] = out_mid
    # e^x == 1 exactly (x on the lattice 2 pi i Z) gives log 0
    out[np.isnan(out.real) & mid] = LOG_ZERO
    inf_big = big & np.isinf(re)
    out[inf_big] = LOG_INF
    out[small & np.isinf(re)] = 0.0
    return out


def loglog1m_exp(x: np.ndarray) -> np.ndarray:
    """log(log(1 - e^x)); exact in the regime where log(1 - e^x) underflows."""
    x = np.asarray(x, dtype=complex)
    small = x.real < -36.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log(log1m_exp(np.where(small, 0.0, x)))
    return np.where(small, x + 1j * np.pi, direct)


def signed_logsumexp(logs: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """log(sum_k s_k e^{logs_k}) along axis 0."""
    logs = np.asarray(logs, dtype=complex)
    m = np.max(logs.real, axis=0)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        terms = np.exp(logs - m) * np.asarray(signs, dtype=float).reshape((-1,) + (1,) * (logs.ndim - 1))
        total = terms.sum(axis=0)
        out = m + np.log(total)
    return out


def logsub(lx: np.ndarray, ly) -> np.ndarray:
    """log(e^lx - e^ly), broadcasting; handles encoded 0 and infinity."""
    lx = np.asarray(lx, dtype=complex)
    ly = np.broadcast_to(np.asarray(ly, dtype=complex), lx.shape)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        first = lx.real >= ly.real
        d = np.where(first, ly - lx, lx - ly)
        d = np.where(np.isfinite(d.real), d, complex(-np.inf, 0.0))
        corr = log1p(-np.exp(d))
        out = np.where(first, lx + corr, ly + 1j * np.pi + corr)
        out = np.where(np.isneginf(ly.real), lx, out)
        out = np.where(np.isneginf(lx.real) & ~np.isneginf(ly.real), ly + 1j * np.pi, out)
        out = np.where(np.isposinf(lx.real), LOG_INF, out)
    return out


def expm1_over(L: np.ndarray) -> np.ndarray:
    """log((e^L - 1) / L) for |L| <= 1 (returns 0 where L == 0)."""
    L = np.asarray(L, dtype=complex)
    tiny = np.abs(L) < 1e-6
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(tiny, 1.0 + L / 2.0 + L * L / 6.0, np.expm1(L) / np.where(tiny, 1.0, L))
    return np.log(ratio)
