"""Finite-difference and quadrature helpers on uniform structured grids."""

from __future__ import annotations

import numpy as np


def diff1(arr: np.ndarray, spacing: float, axis: int = -1, periodic: bool = True) -> np.ndarray:
    """Second-order centered first derivative along ``axis``.

    Periodic axes wrap; bounded axes use one-sided second-order stencils at
    the two end planes (as np.gradient does).
    """
    if periodic:
        return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2.0 * spacing)
    return np.gradient(arr, spacing, axis=axis, edge_order=2)


def diff2(arr: np.ndarray, spacing: float, axis: int = -1, periodic: bool = True) -> np.ndarray:
    """Compact three-point second derivative along ``axis``."""
    if periodic:
        return (np.roll(arr, -1, axis=axis) - 2.0 * arr + np.roll(arr, 1, axis=axis)) / spacing**2
    out = np.empty_like(arr)
    inner = (np.take(arr, range(2, arr.shape[axis]), axis=axis)
             - 2.0 * np.take(arr, range(1, arr.shape[axis] - 1), axis=axis)
             + np.take(arr, range(0, arr.shape[axis] - 2), axis=axis)) / spacing**2
    sl = [slice(None)] * arr.ndim
    sl[axis] = slice(1, -1)
    out[tuple(sl)] = inner
    # one-sided second-order at the ends
    first = [slice(None)] * arr.ndim
    last = [slice(None)] * arr.ndim
    first[axis] = 0
    last[axis] = arr.shape[axis] - 1

    def take(i):
        s = [slice(None)] * arr.ndim
        s[axis] = i
        return arr[tuple(s)]

    n = arr.shape[axis]
    out[tuple(first)] = (2 * take(0) - 5 * take(1) + 4 * take(2) - take(3)) / spacing**2
    out[tuple(last)] = (2 * take(n - 1) - 5 * take(n - 2) + 4 * take(n - 3) - take(n - 4)) / spacing**2
    return out


def trapezoid(arr: np.ndarray, spacing: float, axis: int = -1, periodic: bool = True) -> np.ndarray:
    """Trapezoid-rule integral; on periodic grids this is the rectangle sum."""
    if periodic:
        return np.sum(arr, axis=axis) * spacing
    return np.trapz(arr, dx=spacing, axis=axis)


def cumtrapz(arr: np.ndarray, spacing: float, axis: int = -1) -> np.ndarray:
    """Cumulative trapezoid integral starting at zero on the first plane."""
    arr = np.moveaxis(arr, axis, -1)
    out = np.zeros_like(arr)
    out[..., 1:] = np.cumsum(0.5 * spacing * (arr[..., 1:] + arr[..., :-1]), axis=-1)
    return np.moveaxis(out, -1, axis)


def cumtrapz_affine(g: np.ndarray, c: np.ndarray, spacing: float, axis: int = -1) -> np.ndarray:
    """March ``f' = g + c*f`` from ``f=0`` with the implicit trapezoid rule.

    Used to integrate balance equations that are affine in the unknown; for
    ``c == 0`` this reduces to plain cumulative trapezoid quadrature.
    """
    g = np.moveaxis(np.asarray(g, dtype=float), axis, -1)
    c = np.moveaxis(np.broadcast_to(c, g.shape).astype(float), axis, -1)
    f = np.zeros_like(g)
    h = 0.5 * spacing
    for j in range(1, g.shape[-1]):
        rhs = f[..., j - 1] * (1.0 + h * c[..., j - 1]) + h * (g[..., j] + g[..., j - 1])
        f[..., j] = rhs / (1.0 - h * c[..., j])
    return np.moveaxis(f, -1, axis)


def interior_slice(shape, width: int = 1, axes=None):
    """Slice tuple selecting the interior, trimming ``width`` planes per side."""
    if axes is None:
        axes = range(len(shape))
    sl = [slice(None)] * len(shape)
    for ax in axes:
        sl[ax] = slice(width, shape[ax] - width)
    return tuple(sl)


def fit_order(spacings, errors) -> float:
    """Least-squares slope of log(error) against log(spacing)."""
    x = np.log(np.asarray(spacings, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    return float(np.polyfit(x, y, 1)[0])
