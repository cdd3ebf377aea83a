"""Shared errors, tolerances and the work budget."""

import math
import os

import numpy as np

DEFAULT_BUDGET = 10**9
TOL_GEO_REL = 1e-3


class DomainError(ValueError):
    """Argument outside the domain an operation is defined on."""


class DegenerateInputError(ValueError):
    pass


class WorkBudgetExceeded(RuntimeError):
    pass


class ResolutionError(RuntimeError):
    """A discretization is too coarse for the requested accuracy."""


class PreconditionError(ValueError):
    pass


def work_budget(budget=None):
    """Resolve the elementary-operation budget.

    An explicit argument wins, then ``FROSTMAN_LAB_BUDGET``, then 1e9.
    """
    if budget is not None:
        return int(budget)
    env = os.environ.get("FROSTMAN_LAB_BUDGET")
    if env:
        return int(float(env))
    return DEFAULT_BUDGET


def check_budget(work, budget=None, what="operation"):
    limit = work_budget(budget)
    if work > limit:
        raise WorkBudgetExceeded(f"{what} needs ~{work:.3g} elementary steps, budget is {limit:.3g}")


def tol_geo(delta):
    return delta * TOL_GEO_REL


def dyadic_level(delta):
    """Return k with delta == 2**-k, rejecting anything else."""
    if delta <= 0 or delta > 1:
        raise DomainError(f"delta={delta!r} must lie in (0, 1]")
    k = int(round(-math.log2(delta)))
    if 2.0**-k != delta:
        raise DomainError(f"delta={delta!r} is not a dyadic width 2**-k")
    return k


def loglog_slope(x, y):
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])
