"""Discrete bilinear operators ``T``, ``T_1^*`` and ``T_2^*``.

All three are read off one trilinear form

    Lam(phi0, phi1, phi2) = h^{3n} sum K(z0, z1, z2) m(z0, z1, z2) phi0(z0) phi1(z1) phi2(z2)

by freeing one slot: ``T`` frees slot 0, ``T_1^*`` frees slot 1 and ``T_2^*``
frees slot 2.  ``m`` drops cells with ``|z0 - z1| < h`` or ``|z0 - z2| < h``.
The partial adjoints are therefore exact discrete transposes of ``T``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .grid import GridError, GridFunction
from .kernels import KernelSpec

__all__ = ["apply_T", "apply_partial_adjoint", "evaluate_at", "trilinear_form", "set_threads", "get_threads"]

_THREADS = int(os.environ.get("HPFACT_THREADS", "1"))

# kernel values evaluated per chunk; fixed so chunking never depends on threads
_CHUNK_BUDGET = 1 << 21


def set_threads(n: int) -> None:
    """Worker threads for quadrature; affects speed only, never values."""
    global _THREADS
    if int(n) < 1:
        raise ValueError("threads must be >= 1")
    _THREADS = int(n)


def get_threads() -> int:
    return _THREADS


def _sum_box(funcs: Sequence[GridFunction]):
    lo = tuple(min(f.lo[k] for f in funcs) for k in range(funcs[0].spec.dim))
    hi = tuple(max(f.hi[k] for f in funcs) for k in range(funcs[0].spec.dim))
    return lo, hi


def _contract(K: KernelSpec, out_slot: int, u: GridFunction, w: GridFunction, px: np.ndarray, threads):
    """Values of the free-slot sum at the rows of ``px`` plus the excluded-cell count."""
    spec = u.spec
    pu, vu = u.nonzero()
    pw, vw = w.nonzero()
    if vu.size == 0 or vw.size == 0 or px.shape[0] == 0:
        return np.zeros(px.shape[0]), 0
    h2 = spec.spacing**2
    na, nb = vu.size, vw.size
    cx = max(1, _CHUNK_BUDGET // (na * nb))
    starts = list(range(0, px.shape[0], cx))
    A = pu[None, :, None, :]
    B = pw[None, None, :, :]
    others = [k for k in range(3) if k != out_slot]

    def work(s):
        X = px[s : s + cx][:, None, None, :]
        slots = [None, None, None]
        slots[out_slot] = X
        slots[others[0]] = A
        slots[others[1]] = B
        d01 = np.sum((slots[0] - slots[1]) ** 2, axis=-1)
        d02 = np.sum((slots[0] - slots[2]) ** 2, axis=-1)
        masked = (d01 < h2) | (d02 < h2)
        with np.errstate(divide="ignore", invalid="ignore"):
            kv = K(slots[0], slots[1], slots[2])
        kv = np.broadcast_to(kv, (X.shape[0], na, nb))
        skipped = 0
        if masked.any():
            masked = np.broadcast_to(masked, kv.shape)
            skipped = int(masked.sum())
            kv = np.where(masked, 0.0, kv)
        inner = np.einsum("xij,j->xi", kv, vw)
        return np.einsum("xi,i->x", inner, vu), skipped

    nthreads = _THREADS if threads is None else int(threads)
    if nthreads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    vals = np.concatenate([p[0] for p in parts]) * spec.cell_volume**2
    return vals, sum(p[1] for p in parts)


def _check_inputs(K: KernelSpec, u: GridFunction, w: GridFunction):
    if u.spec != w.spec:
        raise GridError("inputs live on different grids")
    if K.dim != u.spec.dim:
        raise GridError("kernel and grid dimensions differ")


def _free_slot(
    K: KernelSpec,
    out_slot: int,
    u: GridFunction,
    w: GridFunction,
    box: tuple[Sequence[int], Sequence[int]] | None,
    threads: int | None,
    report: dict | None,
) -> GridFunction:
    """Evaluate ``Lam`` with ``out_slot`` free on an index box; ``u``/``w`` fill the other slots in order."""
    _check_inputs(K, u, w)
    spec = u.spec
    if box is None:
        nonempty = [f for f in (u, w) if not f.is_empty_box]
        if not nonempty:
            if report is not None:
                report["skipped_cells"] = 0
            return GridFunction.zeros(spec)
        box = _sum_box(nonempty)
    lo, hi = tuple(int(v) for v in box[0]), tuple(int(v) for v in box[1])
    shape = tuple(max(0, b - a) for a, b in zip(lo, hi))
    if 0 in shape:
        if report is not None:
            report["skipped_cells"] = 0
        return GridFunction.zeros(spec)
    px = spec.box_points(lo, hi).reshape(-1, spec.dim)
    vals, skipped = _contract(K, out_slot, u, w, px, threads)
    if report is not None:
        report["skipped_cells"] = skipped
    return GridFunction(spec, vals.reshape(shape), lo)


def _slot_args(l: int, f1: GridFunction, f2: GridFunction):
    if l == 0:
        return 0, f1, f2
    if l == 1:
        return 1, f1, f2
    if l == 2:
        return 2, f2, f1
    raise ValueError(f"slot must be 1 or 2, got {l}")


def evaluate_at(K: KernelSpec, l: int, f1: GridFunction, f2: GridFunction, points, threads=None) -> np.ndarray:
    """Off-grid point values of ``T`` (``l = 0``) or ``T_l^*`` with the same quadrature.

    Used for the denominator at an atom center, which need not be a grid point.
    """
    _check_inputs(K, f1, f2)
    slot, u, w = _slot_args(l, f1, f2)
    px = np.asarray(points, dtype=float).reshape(-1, f1.spec.dim)
    return _contract(K, slot, u, w, px, threads)[0]


def apply_T(
    K: KernelSpec,
    f1: GridFunction,
    f2: GridFunction,
    eval_support=None,
    threads: int | None = None,
    report: dict | None = None,
) -> GridFunction:
    """``T(f1, f2)(x) = h^{2n} sum K(x, y1, y2) f1(y1) f2(y2)`` over the support boxes.

    ``eval_support`` is an index box ``(lo, hi)``; by default the union of the
    input support boxes.  If ``report`` is a dict, the number of excluded
    near-singular cells is stored under ``"skipped_cells"``.
    """
    return _free_slot(K, 0, f1, f2, eval_support, threads, report)


def apply_partial_adjoint(
    K: KernelSpec,
    l: int,
    f1: GridFunction,
    f2: GridFunction,
    eval_support=None,
    threads: int | None = None,
    report: dict | None = None,
) -> GridFunction:
    """Exact discrete transposes of :func:`apply_T`.

    ``T_1^*(f1, f2)(x) = h^{2n} sum K(y1, x, y2) f1(y1) f2(y2)`` and
    ``T_2^*(f1, f2)(x) = h^{2n} sum K(y2, y1, x) f1(y1) f2(y2)``.
    """
    if l not in (1, 2):
        raise ValueError(f"slot must be 1 or 2, got {l}")
    slot, u, w = _slot_args(l, f1, f2)
    return _free_slot(K, slot, u, w, eval_support, threads, report)


def trilinear_form(K: KernelSpec, phi0: GridFunction, phi1: GridFunction, phi2: GridFunction) -> float:
    """``Lam(phi0, phi1, phi2)``, summed through ``T`` on the support of ``phi0``."""
    out = apply_T(K, phi1, phi2, eval_support=phi0.support)
    return float(np.sum(out.box_values(phi0.lo, phi0.hi) * phi0.samples)) * phi0.spec.cell_volume
