"""Front door for conic solves with a pluggable backend registry."""

from __future__ import annotations

from typing import Callable

from ..errors import InvalidArgument
from .admm import solve_admm
from .ipm import solve_ipm
from .program import ConicProgram, ConicSolution

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = {"ipm": 100, "admm": 50000}

_SOLVERS: dict[str, Callable[..., ConicSolution]] = {
    "ipm": solve_ipm,
    "admm": solve_admm,
}


def register_solver(name: str, fn: Callable[..., ConicSolution]) -> None:
    """Make an external backend available as ``solve_conic(..., method=name)``.

    ``fn(program, tol=..., max_iter=...)`` must return a :class:`ConicSolution`
    with duals in the program's block order.
    """
    if not callable(fn):
        raise InvalidArgument("solver must be callable")
    _SOLVERS[name] = fn


def available_solvers():
    return sorted(_SOLVERS)


def solve_conic(program, tol=DEFAULT_TOL, max_iter=None, method="ipm"):
    """Solve ``min c'x s.t. b_i - A_i x in K_i``.

    Parameters
    ----------
    program : ConicProgram
    tol : float
        Bound on the relative primal, dual and gap residuals for ``optimal``.
    max_iter : int, optional
        Iteration cap; defaults depend on the method (100 for the
        interior-point method, 50 000 for the splitting method).
    method : {"ipm", "admm"} or a registered name

    Returns
    -------
    ConicSolution
        ``status == "max_iter"`` carries the last iterate; callers should treat
        it as a failure.
    """
    if not isinstance(program, ConicProgram):
        raise InvalidArgument("expected a ConicProgram")
    if not tol > 0:
        raise InvalidArgument("tol must be positive")
    try:
        fn = _SOLVERS[method]
    except KeyError:
        raise InvalidArgument(f"unknown solver {method!r}; available: {available_solvers()}") from None
    if max_iter is None:
        max_iter = DEFAULT_MAX_ITER.get(method, 50000)
    if int(max_iter) < 1:
        raise InvalidArgument("max_iter must be >= 1")
    return fn(program, tol=tol, max_iter=int(max_iter))
