"""Joint choice of filter length ``m`` and hash count ``k``.

Minimizes ``m`` subject to ``false_positive_prob(m, k, n) <= delta_hat``
with ``m, k >= 1`` integers.  The integer problem is attacked through its
real relaxation:

* ``m_of_k`` inverts the false-positive formula for real ``k``, giving the
  smallest real ``m`` meeting the target.  Note the exponent on
  ``delta_hat`` is ``+1/k``; the ``-1/k`` form drives the base negative.
* the stationary point of ``m_of_k`` is the root of
  ``x*log(delta_hat) - k*T*log(T)`` with ``x = delta_hat**(1/k)`` and
  ``T = 1 - x``, located by bisection over ``k`` in ``[1, 1000]``.
* ``solve_fo`` repairs the relaxed optimum to integers by scanning ``m``
  upward from ``floor(m~*)`` for ``k`` in ``{floor(k~*), ceil(k~*)}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bloom import _fp_base, false_positive_prob

K_BRACKET = (1.0, 1000.0)
BISECT_TOL = 1e-9
BISECT_MAX_ITER = 200
SCAN_CAP_FACTOR = 16
_GRID_POINTS = 64


class OptimizerError(ValueError):
    """The filter optimization has no admissible answer for these inputs."""


class BracketError(OptimizerError):
    pass


class InfeasibleError(OptimizerError):
    pass


@dataclass(frozen=True)
class FoProblem:
    n: int
    delta_hat: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not 0.0 < self.delta_hat < 1.0:
            raise ValueError(f"delta_hat must lie in (0, 1), got {self.delta_hat}")


@dataclass(frozen=True)
class FoSolution:
    n: int
    delta_hat: float
    m_star: int
    k_star: int
    k_tilde_star: float
    m_tilde_star: float
    delta_at_solution: float

    @property
    def payload_bytes(self) -> int:
        return (self.m_star + 7) // 8

    @property
    def bits_per_element(self) -> float:
        return self.m_star / self.n


def false_positive_prob_real(m: float, k: float, n: float) -> float:
    """Real-valued extension of ``false_positive_prob`` (same log1p form)."""
    if m < 1 or k <= 0:
        raise ValueError(f"need m >= 1 and k > 0, got m={m}, k={k}")
    return _fp_base(m, k * n) ** k


def m_of_k(k_tilde: float, problem: FoProblem) -> float:
    """Real filter length at which ``k_tilde`` hashes hit ``delta_hat`` exactly."""
    if k_tilde < 1:
        raise ValueError(f"k_tilde must be >= 1, got {k_tilde}")
    x = problem.delta_hat ** (1.0 / k_tilde)
    if x >= 1.0:
        return math.inf
    # 1 - T**(1/(k n)) with T = 1 - x, kept away from cancellation
    denom = -math.expm1(math.log1p(-x) / (k_tilde * problem.n))
    return math.inf if denom == 0.0 else 1.0 / denom


def root_equation(k_tilde: float, delta_hat: float) -> float:
    x = delta_hat ** (1.0 / k_tilde)
    t = 1.0 - x
    if t <= 0.0:
        return x * math.log(delta_hat)
    return x * math.log(delta_hat) - k_tilde * t * math.log(t)


def optimal_k_reference(delta_hat: float) -> float:
    """Closed-form ``log2(1/delta_hat)``; an oracle for :func:`solve_relaxed`."""
    return math.log(1.0 / delta_hat) / math.log(2.0)


def bisect(f, lo: float, hi: float, tol: float = BISECT_TOL, max_iter: int = BISECT_MAX_ITER) -> float:
    flo = f(lo)
    if flo == 0.0:
        return lo
    fhi = f(hi)
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise BracketError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _sign_brackets(f, lo: float, hi: float) -> list[tuple[float, float]]:
    # Geometric grid so small-k roots (loose targets) get fine resolution.
    ratio = (hi / lo) ** (1.0 / (_GRID_POINTS - 1))
    grid = [lo * ratio**i for i in range(_GRID_POINTS - 1)] + [hi]
    values = [f(g) for g in grid]
    out = []
    for (a, fa), (b, fb) in zip(zip(grid, values), zip(grid[1:], values[1:])):
        if fa == 0.0:
            out.append((a, a))
        elif (fa > 0) != (fb > 0) and fb != 0.0:
            out.append((a, b))
    if values[-1] == 0.0:
        out.append((hi, hi))
    return out


def solve_relaxed(problem: FoProblem) -> tuple[float, float]:
    """Relaxed optimum ``(m~*, k~*)``.

    Every sign change of the root equation on the bracket is refined by
    bisection and the root with the smallest ``m_of_k`` wins.  With no sign
    change the bracket end with the smaller ``m_of_k`` is used.
    """
    lo, hi = K_BRACKET
    f = lambda k: root_equation(k, problem.delta_hat)  # noqa: E731
    roots = [a if a == b else bisect(f, a, b) for a, b in _sign_brackets(f, lo, hi)]
    if not roots:
        candidates = [(m_of_k(k, problem), k) for k in (lo, hi)]
        finite = [c for c in candidates if math.isfinite(c[0])]
        if not finite:
            raise BracketError(
                f"root equation keeps one sign on [{lo}, {hi}] and m~ is unbounded at both ends "
                f"(delta_hat={problem.delta_hat})")
        m_t, k_t = min(finite)
        return m_t, k_t
    m_t, k_t = min((m_of_k(k, problem), k) for k in roots)
    return m_t, k_t


def solve_fo(problem: FoProblem) -> FoSolution:
    """Integer ``(m*, k*)`` from the relaxed optimum.

    For each ``k`` in ``{floor(k~*), ceil(k~*)}`` the smallest ``m >=
    floor(m~*)`` meeting the target is found.  The candidate with smaller
    ``m`` is returned, ties going to the smaller ``k``.
    """
    m_t, k_t = solve_relaxed(problem)
    n, target = problem.n, problem.delta_hat
    start = max(1, math.floor(m_t))
    cap = max(SCAN_CAP_FACTOR * m_t, SCAN_CAP_FACTOR)
    ks = []
    for k in (max(1, math.floor(k_t)), max(1, math.ceil(k_t))):
        if k not in ks:
            ks.append(k)

    candidates: list[tuple[int, int]] = []
    for k in ks:
        m = start
        while false_positive_prob(m, k, n) > target:
            m += 1
            if m > cap:
                raise InfeasibleError(
                    f"scan for k={k} passed {cap:.0f} bits without meeting delta_hat={target} (n={n})")
        # A candidate still violating the target is dropped, not returned.
        if false_positive_prob(m, k, n) <= target:
            candidates.append((m, k))
    if not candidates:
        raise InfeasibleError(f"no candidate meets delta_hat={target} for n={n}")

    m_star, k_star = min(candidates)
    return FoSolution(
        n=n,
        delta_hat=target,
        m_star=m_star,
        k_star=k_star,
        k_tilde_star=k_t,
        m_tilde_star=m_t,
        delta_at_solution=false_positive_prob(m_star, k_star, n),
    )


def optimize(n: int, delta_hat: float) -> FoSolution:
    return solve_fo(FoProblem(n, delta_hat))
