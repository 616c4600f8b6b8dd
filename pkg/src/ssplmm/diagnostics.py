"""Error norms, convergence tables, total variation and the efficiency ratio."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyTrajectory, LengthMismatch

__all__ = [
    "l1_error",
    "total_variation",
    "efficiency_ratio",
    "step_statistics",
    "ConvergenceTable",
    "fmt",
]


def fmt(x) -> str:
    """17 significant digits, so CSV values round-trip exactly."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def l1_error(u, exact_samples, dx: float) -> float:
    """Discrete L1 norm ``sum |u_i - exact_i| dx``."""
    u = np.asarray(u, dtype=float).ravel()
    e = np.asarray(exact_samples, dtype=float).ravel()
    if u.shape != e.shape:
        raise LengthMismatch(f"length {u.size} != {e.size}")
    return float(np.sum(np.abs(u - e)) * dx)


def total_variation(u, periodic: bool = False) -> float:
    """``sum |u_{i+1} - u_i|``, plus the wrap-around term when periodic."""
    u = np.asarray(u, dtype=float).ravel()
    tv = float(np.sum(np.abs(np.diff(u))))
    if periodic and u.size > 1:
        tv += abs(float(u[0] - u[-1]))
    return tv


def step_statistics(trajectory):
    """``(N, h_min, h_avg)`` over the multistep phase of a run.

    ``h_avg`` is ``(T - sum of starting steps) / N``. A last step shortened
    to land on the final time is counted in ``N`` but left out of ``h_min``.
    """
    lmm = [r for r in trajectory.records if r.method_tag == "lmm"]
    if not lmm:
        raise EmptyTrajectory("trajectory has no multistep steps")
    start = sum(r.h for r in trajectory.records if r.method_tag != "lmm")
    span = trajectory.records[-1].t - trajectory.t0
    N = len(lmm)
    candidates = [r.h for r in lmm if not r.final_clip] or [r.h for r in lmm]
    return N, min(candidates), (span - start) / N


def efficiency_ratio(trajectory) -> float:
    """``s = h_min / h_avg``: the cost of a variable run relative to a fixed-step
    run that must use the smallest step throughout."""
    _, h_min, h_avg = step_statistics(trajectory)
    return h_min / h_avg


@dataclass
class ConvergenceTable:
    method: str
    resolutions: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def add(self, resolution: int, error: float):
        self.resolutions.append(int(resolution))
        self.errors.append(float(error))

    @property
    def orders(self) -> list:
        """``log2(err_{r-1} / err_r)`` scaled for the actual refinement factor."""
        out = [None]
        for r in range(1, len(self.errors)):
            ratio = self.resolutions[r] / self.resolutions[r - 1]
            out.append(math.log(self.errors[r - 1] / self.errors[r]) / math.log(ratio))
        return out

    def rows(self):
        return list(zip(self.resolutions, self.errors, self.orders))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["resolution", "error", "order"])
            for n, e, p in self.rows():
                w.writerow([n, fmt(e), fmt(p)])

    @classmethod
    def read_csv(cls, path, method=""):
        table = cls(method)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                table.add(int(row["resolution"]), float(row["error"]))
        return table

    def format(self) -> str:
        lines = [f"{self.method}", f"{'N':>6}  {'L1 error':>10}  {'order':>5}"]
        for n, e, p in self.rows():
            lines.append(f"{n:>6}  {e:10.3e}  {'' if p is None else format(p, '5.2f'):>5}")
        return "\n".join(lines)


def observed_orders(errors: Sequence[float]) -> list:
    """Orders for a dyadic sequence of errors."""
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]
