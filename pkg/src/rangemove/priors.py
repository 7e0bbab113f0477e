"""Pairwise priors ``g`` and their generalized Huber extensions ``h``.

A prior is stored as two lookup tables indexed by the signed label
difference ``a = x_i - x_j`` in ``[-(L-1), L-1]``; index ``a + L - 1``.

``g`` is convex on ``[-T, T]`` and arbitrary (flat or concave) outside.
``h`` agrees with ``g`` on ``[-T, T]``, continues linearly beyond it and is
convex everywhere with ``h >= g``.  For the analytic kinds the linear piece
is the tangent of the convex part at ``T`` (for the truncated quadratic this
is the classical Huber function ``2T|x| - T^2``); tabulated priors have no
derivative, so their extension is the smallest discrete convex continuation
that still dominates ``g``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, PriorConstructionError

CONVEXITY_TOL = 1e-9


class PriorKind(str, enum.Enum):
    TRUNCATED_LINEAR = "tl"
    TRUNCATED_QUADRATIC = "tq"
    CAUCHY = "cauchy"
    TABULATED = "tab"

    @classmethod
    def parse(cls, name: "str | PriorKind") -> "PriorKind":
        if isinstance(name, PriorKind):
            return name
        key = name.strip().lower().replace("-", "_")
        aliases = {
            "tl": cls.TRUNCATED_LINEAR,
            "truncated_linear": cls.TRUNCATED_LINEAR,
            "truncatedlinear": cls.TRUNCATED_LINEAR,
            "tq": cls.TRUNCATED_QUADRATIC,
            "truncated_quadratic": cls.TRUNCATED_QUADRATIC,
            "truncatedquadratic": cls.TRUNCATED_QUADRATIC,
            "cauchy": cls.CAUCHY,
            "tab": cls.TABULATED,
            "tabulated": cls.TABULATED,
            "tabulatedconvexpart": cls.TABULATED,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ContractViolation(f"unknown prior {name!r}; expected one of tl, tq, cauchy, tab") from None


def is_discretely_convex(table, lo: int | None = None, hi: int | None = None,
                         offset: int | None = None, tol: float = CONVEXITY_TOL) -> bool:
    """True iff ``2 f(a) <= f(a-1) + f(a+1) + tol`` at every interior ``a`` of ``[lo, hi]``.

    ``table[a + offset]`` holds ``f(a)``.  With the defaults the table is
    taken to be centred (``offset = len(table) // 2``) and the whole table is
    checked.
    """
    f = np.asarray(table, dtype=float)
    if offset is None:
        offset = len(f) // 2
    if lo is None:
        lo = -offset
    if hi is None:
        hi = len(f) - 1 - offset
    if lo + offset < 0 or hi + offset > len(f) - 1:
        raise ContractViolation(f"range [{lo}, {hi}] outside table bounds")
    if hi - lo < 2:
        return True
    seg = f[lo + offset: hi + offset + 1]
    d2 = seg[:-2] - 2.0 * seg[1:-1] + seg[2:]
    scale = max(1.0, float(np.max(np.abs(seg))))
    return bool(np.all(d2 >= -tol * scale))


def _analytic_g(kind: PriorKind, T: int, a: np.ndarray) -> np.ndarray:
    a = a.astype(float)
    if kind is PriorKind.TRUNCATED_LINEAR:
        return np.minimum(np.abs(a), T)
    if kind is PriorKind.TRUNCATED_QUADRATIC:
        return np.minimum(a * a, float(T * T))
    if kind is PriorKind.CAUCHY:
        return 0.5 * T * T * np.log1p((a / T) ** 2)
    raise AssertionError(kind)


def _tangent_slope(kind: PriorKind, T: int) -> float:
    # left derivative of the convex part at +T
    if kind is PriorKind.TRUNCATED_LINEAR:
        return 1.0
    if kind is PriorKind.TRUNCATED_QUADRATIC:
        return 2.0 * T
    if kind is PriorKind.CAUCHY:
        return T / 2.0
    raise AssertionError(kind)


def _greedy_extension(g: np.ndarray, start: int, stop: int, step: int) -> np.ndarray:
    """Smallest convex continuation of ``g`` past ``start`` that stays >= g."""
    h = g.copy()
    slope = g[start] - g[start - step]
    for k in range(start + step, stop, step):
        h[k] = max(h[k - step] + slope, g[k])
        slope = h[k] - h[k - step]
    return h


@dataclass(frozen=True)
class Prior:
    kind: PriorKind
    trunc: int
    label_count: int
    g: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)

    @property
    def offset(self) -> int:
        return self.label_count - 1

    @property
    def is_truncated_flat(self) -> bool:
        """True when every difference beyond ``T`` already costs the global maximum of ``g``.

        This is what makes freezing over-threshold edges safe: whatever labels
        the endpoints take next, that edge cannot cost more than it does now.
        """
        T = min(self.trunc, self.offset)
        if T >= self.offset:
            return True
        top = float(np.max(self.g))
        tol = CONVEXITY_TOL * max(1.0, abs(top))
        lo = self.g[: self.offset - T]
        hi = self.g[self.offset + T + 1:]
        outer = np.concatenate([lo, hi])
        return bool(np.all(np.abs(outer - top) <= tol))

    def table(self, mode: str) -> np.ndarray:
        if mode in ("g", "G"):
            return self.g
        if mode in ("h", "H"):
            return self.h
        raise ValueError(f"prior mode must be 'g' or 'h', not {mode!r}")

    def g_at(self, diff):
        return self.g[np.asarray(diff) + self.offset]

    def h_at(self, diff):
        return self.h[np.asarray(diff) + self.offset]

    def second_difference(self, a: int) -> float:
        """``h(a+1) - 2 h(a) + h(a-1)``; nonnegative, zero past ``T``."""
        if abs(a) > self.label_count - 2:
            raise ContractViolation(f"difference {a} outside [-(L-2), L-2]")
        k = a + self.offset
        return float(self.h[k + 1] - 2.0 * self.h[k] + self.h[k - 1])

    def second_differences(self) -> np.ndarray:
        """Second differences of ``h`` for every interior difference, noise snapped to zero."""
        h = self.h
        d2 = h[:-2] - 2.0 * h[1:-1] + h[2:]
        scale = max(1.0, float(np.max(np.abs(h))))
        d2[np.abs(d2) <= 1e-12 * scale] = 0.0
        return d2


def make_prior(kind, trunc: int, label_count: int, table=None) -> Prior:
    """Build a prior over ``label_count`` labels with convexity threshold ``trunc``.

    For ``kind="tab"`` pass ``table``: the values of ``g`` on
    ``-(L-1) .. L-1`` in order.
    """
    kind = PriorKind.parse(kind)
    T = int(trunc)
    L = int(label_count)
    if T < 1:
        raise ContractViolation(f"truncation T must be >= 1, got {trunc}")
    if L < 2:
        raise ContractViolation(f"label count must be >= 2, got {label_count}")
    off = L - 1
    diffs = np.arange(-off, off + 1)

    if kind is PriorKind.TABULATED:
        if table is None:
            raise ContractViolation("tabulated prior needs a table of length 2L-1")
        g = np.asarray(table, dtype=float).copy()
        if g.shape != (2 * L - 1,):
            raise ContractViolation(f"tabulated prior table must have length {2 * L - 1}")
        if not np.all(np.isfinite(g)):
            raise PriorConstructionError("tabulated prior has non-finite entries")
    else:
        if table is not None:
            raise ContractViolation(f"{kind.value} prior does not take a table")
        g = _analytic_g(kind, T, diffs)

    Tc = min(T, off)
    if not is_discretely_convex(g, -Tc, Tc, offset=off):
        raise PriorConstructionError(f"{kind.value} prior is not convex on [-{Tc}, {Tc}]")

    if Tc >= off:
        h = g.copy()
    elif kind is PriorKind.TABULATED:
        h = _greedy_extension(g, off + Tc, 2 * L - 1, 1)
        h = _greedy_extension(h, off - Tc, -1, -1)
    else:
        slope = _tangent_slope(kind, T)
        beyond = np.abs(diffs) > Tc
        h = g.copy()
        h[beyond] = g[off + Tc] + slope * (np.abs(diffs[beyond]) - Tc)

    if np.any(h < g - CONVEXITY_TOL * max(1.0, float(np.max(np.abs(g))))):
        raise PriorConstructionError("extension of the convex part falls below g")
    if not is_discretely_convex(h, offset=off):
        raise PriorConstructionError("extension of the convex part is not convex")

    g.setflags(write=False)
    h.setflags(write=False)
    return Prior(kind=kind, trunc=T, label_count=L, g=g, h=h)
