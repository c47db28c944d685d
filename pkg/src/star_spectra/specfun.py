"""Modified Bessel functions I0, I1, K0, K1 for real positive arguments.

Power series are used for ``z <= 2`` and Steed's continued fraction (the
Temme form for order zero) for ``z > 2``. Both paths are accurate to a few
ulp on ``[1e-12, 700]``. Above ``UNDERFLOW_Z`` the K functions are reported
as zero together with an underflow flag.

Each kernel exists as a numba-compiled scalar loop and a vectorised numpy
routine; :mod:`star_spectra._backend` picks one at import time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import USE_NUMBA, njit

EULER_GAMMA = 0.57721566490153286061
LN2_MINUS_GAMMA = math.log(2.0) - EULER_GAMMA
SERIES_SWITCH = 2.0
UNDERFLOW_Z = 700.0
_EPS = 1e-17
_MAX_CF_ITER = 500


@dataclass(frozen=True)
class K0Split:
    """Exact decomposition ``K0(z) = log_coefficient * ln(z) + smooth_part``."""

    z: float
    log_coefficient: float
    smooth_part: float

    def value(self) -> float:
        return self.log_coefficient * math.log(self.z) + self.smooth_part


# ---------------------------------------------------------------------------
# numba kernels


@njit
def _series_scalar(x):
    """Return (I0, I1, K0, K1, R) by power series; R = K0 + I0*ln(x)."""
    y = 0.25 * x * x
    t0 = 1.0  # y^k / (k!)^2
    t1 = 1.0  # y^k / (k! (k+1)!)
    i0 = 1.0
    i1s = 1.0
    hsum = 0.0  # sum_{k>=1} H_k t0_k
    k1sum = -2.0 * 0.57721566490153286061 + 1.0  # psi(1) + psi(2)
    hk = 0.0
    k = 0
    while k < 2000:
        k += 1
        hk += 1.0 / k
        t0 *= y / (k * k)
        t1 *= y / (k * (k + 1.0))
        i0 += t0
        i1s += t1
        hsum += hk * t0
        k1sum += (-2.0 * 0.57721566490153286061 + 2.0 * hk + 1.0 / (k + 1.0)) * t1
        if t0 * (hk + 1.0) < 1e-17 * i0 and t1 * (hk + 1.0) < 1e-17 * i1s:
            break
    i1 = 0.5 * x * i1s
    r = (0.6931471805599453 - 0.57721566490153286061) * i0 + hsum
    if x > 0.0:
        lnx = math.log(x)
        k0 = r - i0 * lnx
        k1 = 1.0 / x + (lnx - 0.6931471805599453) * i1 - 0.25 * x * k1sum
    else:
        k0 = math.inf
        k1 = math.inf
    return i0, i1, k0, k1, r


@njit
def _cf_scalar(x):
    """Return (K0, K1) for x > 2 by Steed's continued fraction."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 500):
        a -= 2.0 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels) < 1e-17 * abs(s):
            break
    h = a1 * h
    k0 = math.sqrt(math.pi / (2.0 * x)) * math.exp(-x) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


@njit
def _k0k1_numba(z, k0_out, k1_out):
    for j in range(z.shape[0]):
        x = z[j]
        if x > 700.0:
            k0_out[j] = 0.0
            k1_out[j] = 0.0
        elif x <= 2.0:
            _, _, k0, k1, _ = _series_scalar(x)
            k0_out[j] = k0
            k1_out[j] = k1
        else:
            k0, k1 = _cf_scalar(x)
            k0_out[j] = k0
            k1_out[j] = k1


@njit
def _k0_numba(z, out):
    for j in range(z.shape[0]):
        x = z[j]
        if x > 700.0:
            out[j] = 0.0
        elif x <= 2.0:
            out[j] = _series_scalar(x)[2]
        else:
            out[j] = _cf_scalar(x)[0]


@njit
def _split_numba(z, i0_out, r_out):
    for j in range(z.shape[0]):
        i0, _, _, _, r = _series_scalar(z[j])
        i0_out[j] = i0
        r_out[j] = r


@njit
def _i0i1_numba(z, i0_out, i1_out):
    for j in range(z.shape[0]):
        i0, i1, _, _, _ = _series_scalar(z[j])
        i0_out[j] = i0
        i1_out[j] = i1


# ---------------------------------------------------------------------------
# numpy kernels


def _series_numpy(x):
    x = np.asarray(x, dtype=float)
    y = 0.25 * x * x
    t0 = np.ones_like(x)
    t1 = np.ones_like(x)
    i0 = np.ones_like(x)
    i1s = np.ones_like(x)
    hsum = np.zeros_like(x)
    k1sum = np.full_like(x, 1.0 - 2.0 * EULER_GAMMA)
    hk = 0.0
    for k in range(1, 2000):
        hk += 1.0 / k
        t0 = t0 * y / (k * k)
        t1 = t1 * y / (k * (k + 1.0))
        i0 += t0
        i1s += t1
        hsum += hk * t0
        k1sum += (-2.0 * EULER_GAMMA + 2.0 * hk + 1.0 / (k + 1.0)) * t1
        if np.all(t0 * (hk + 1.0) < _EPS * i0) and np.all(t1 * (hk + 1.0) < _EPS * i1s):
            break
    i1 = 0.5 * x * i1s
    r = LN2_MINUS_GAMMA * i0 + hsum
    with np.errstate(divide="ignore"):
        lnx = np.log(x)
        k0 = r - i0 * lnx
        k1 = 1.0 / x + (lnx - math.log(2.0)) * i1 - 0.25 * x * k1sum
    return i0, i1, k0, k1, r


def _cf_numpy(x):
    x = np.asarray(x, dtype=float)
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = np.full_like(x, -a1)
    s = 1.0 + q * delh
    active = np.ones(x.shape, dtype=bool)
    for i in range(2, _MAX_CF_ITER):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        a[idx] -= 2.0 * (i - 1)
        c[idx] = -a[idx] * c[idx] / i
        qnew = (q1[idx] - b[idx] * q2[idx]) / a[idx]
        q1[idx] = q2[idx]
        q2[idx] = qnew
        q[idx] += c[idx] * qnew
        b[idx] += 2.0
        d[idx] = 1.0 / (b[idx] + a[idx] * d[idx])
        delh[idx] = (b[idx] * d[idx] - 1.0) * delh[idx]
        h[idx] += delh[idx]
        dels = q[idx] * delh[idx]
        s[idx] += dels
        active[idx] = np.abs(dels) >= _EPS * np.abs(s[idx])
    h = a1 * h
    k0 = np.sqrt(math.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def _k0k1_numpy(z):
    k0 = np.zeros_like(z)
    k1 = np.zeros_like(z)
    small = z <= SERIES_SWITCH
    mid = (z > SERIES_SWITCH) & (z <= UNDERFLOW_Z)
    if small.any():
        _, _, k0[small], k1[small], _ = _series_numpy(z[small])
    if mid.any():
        k0[mid], k1[mid] = _cf_numpy(z[mid])
    return k0, k1


# ---------------------------------------------------------------------------
# dispatch


def _as_positive(z, allow_zero=False):
    arr = np.asarray(z, dtype=float)
    bad = ~(arr >= 0.0) if allow_zero else ~(arr > 0.0)
    if np.any(bad):
        raise ValueError("Bessel argument must be positive, got %r" % (arr[bad].ravel()[0],))
    return arr


def _ret(arr, like):
    return float(arr.reshape(())) if np.ndim(like) == 0 else arr


def k0_k1_array(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """K0 and K1 on a flat float array without validation."""
    z = np.ascontiguousarray(z, dtype=float)
    if USE_NUMBA:
        k0 = np.empty_like(z)
        k1 = np.empty_like(z)
        _k0k1_numba(z, k0, k1)
        return k0, k1
    return _k0k1_numpy(z)


def k0_array(z: np.ndarray) -> np.ndarray:
    """K0 on a flat float array without validation."""
    z = np.ascontiguousarray(z, dtype=float)
    if USE_NUMBA:
        out = np.empty_like(z)
        _k0_numba(z, out)
        return out
    return _k0k1_numpy(z)[0]


def log_split_array(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(I0(z), R(z))`` with ``K0(z) = -I0(z) ln z + R(z)``; ``z = 0`` allowed."""
    z = np.ascontiguousarray(z, dtype=float)
    if USE_NUMBA:
        i0 = np.empty_like(z)
        r = np.empty_like(z)
        _split_numba(z, i0, r)
        return i0, r
    i0, _, _, _, r = _series_numpy(z)
    return i0, r


def bessel_k0(z, *, with_underflow: bool = False):
    """K0(z) for z > 0. Returns 0 (and flags underflow) for z > 700."""
    arr = _as_positive(z)
    flat = arr.ravel()
    out = k0_array(flat).reshape(arr.shape)
    val = _ret(out, z)
    if with_underflow:
        flag = arr > UNDERFLOW_Z
        return val, (bool(flag) if np.ndim(z) == 0 else flag)
    return val


def bessel_k1(z, *, with_underflow: bool = False):
    """K1(z) for z > 0. Returns 0 (and flags underflow) for z > 700."""
    arr = _as_positive(z)
    out = k0_k1_array(arr.ravel())[1].reshape(arr.shape)
    val = _ret(out, z)
    if with_underflow:
        flag = arr > UNDERFLOW_Z
        return val, (bool(flag) if np.ndim(z) == 0 else flag)
    return val


def _i0i1(arr):
    flat = np.ascontiguousarray(arr.ravel(), dtype=float)
    if np.any(flat > UNDERFLOW_Z):
        raise ValueError("I0/I1 overflow beyond z = %g" % UNDERFLOW_Z)
    if USE_NUMBA:
        i0 = np.empty_like(flat)
        i1 = np.empty_like(flat)
        _i0i1_numba(flat, i0, i1)
    else:
        i0, i1 = _series_numpy(flat)[:2]
    return i0.reshape(arr.shape), i1.reshape(arr.shape)


def bessel_i0(z):
    arr = _as_positive(z, allow_zero=True)
    return _ret(_i0i1(arr)[0], z)


def bessel_i1(z):
    arr = _as_positive(z, allow_zero=True)
    return _ret(_i0i1(arr)[1], z)


def k0_log_split(z: float, z_max: float = 2.0) -> K0Split:
    """Split K0 into its logarithmic and entire parts.

    ``K0(z) = -I0(z) ln z + R(z)`` where ``R(z) = (ln 2 - gamma) I0(z) +
    sum_k H_k (z/2)^(2k) / (k!)^2`` is entire. The range is capped at
    ``z_max`` because reassembly cancels catastrophically for large z.
    """
    z = float(z)
    if not (0.0 < z <= z_max):
        raise ValueError("k0_log_split needs 0 < z <= %g, got %r" % (z_max, z))
    i0, r = log_split_array(np.array([z]))
    return K0Split(z=z, log_coefficient=-float(i0[0]), smooth_part=float(r[0]))
