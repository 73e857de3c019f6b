"""Two-stage iterative hard thresholding for one node's multi-task problem.

The dynamic stage walks a geometrically decaying threshold from a level above
the data scale down to a noise-level floor, thresholding a gradient update at
each step.  The fixed stage then re-estimates the threshold from the selected
union support size and iterates a fixed number of further steps.  A separate
tuner selects the sharing parameter s0 by an information criterion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec, IterationCapExceeded, NonFinite
from .model import CoefficientStack
from .thresholding import _two_step


@dataclass(frozen=True)
class SolverConfig:
    """Constants of the solver; defaults suit standardized data.

    s0_grid None means: integers 1..K when K <= 20, otherwise 15
    geometrically spaced values in [1, K], rounded and deduplicated.
    """

    kappa: float = 0.9  # threshold decay rate, in (0, 1)
    # c0 doubles as the gradient step size: the iteration matrix is
    # I - c0 * R per dataset, so c0 must stay below 2 / max eigenvalue of
    # any sample correlation block or large supports turn expansive and
    # the iterates cannot recover (hard thresholding keeps huge values).
    # 0.5 keeps the map non-expansive up to eigenvalues of 4, which covers
    # column-to-sample ratios of one; it also widens the gap between true
    # coefficients (growing like 1/sqrt(c0)) and the noise floor.
    c0: float = 0.5  # design rescaling constant / effective step size
    c1: float = 0.5  # noise-floor threshold multiplier
    c2: float = 1.5  # initial threshold multiplier
    c3: float = 0.6  # fixed-stage threshold multiplier
    c4: float = 1.0  # fixed-stage iteration multiplier
    c_ic: float = 2.0  # information criterion penalty weight
    s0_grid: tuple | None = None
    max_total_iters: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise InvalidSpec("kappa must lie strictly between 0 and 1")
        for name in ("c0", "c1", "c2", "c3", "c_ic"):
            if getattr(self, name) <= 0:
                raise InvalidSpec(f"{name} must be positive")
        if self.c4 < 0:
            raise InvalidSpec("c4 must be non-negative")
        if self.max_total_iters < 1:
            raise InvalidSpec("max_total_iters must be at least 1")
        if self.s0_grid is not None:
            grid = tuple(float(v) for v in self.s0_grid)
            if len(grid) == 0 or any(v < 1 for v in grid):
                raise InvalidSpec("s0_grid values must be >= 1")
            object.__setattr__(self, "s0_grid", grid)


def default_s0_grid(K):
    """Candidate sharing levels: 1..K for small K, else 15 geometric values."""
    if K < 1:
        raise InvalidSpec("K must be at least 1")
    if K <= 20:
        return tuple(float(v) for v in range(1, K + 1))
    values = sorted({float(round(v)) for v in np.geomspace(1.0, K, 15)})
    return tuple(values)


@dataclass(frozen=True)
class SolveTrace:
    """Per-solve diagnostics.

    lambdas holds the threshold level applied at each iteration;
    stage_boundary is the number of dynamic-stage iterations, so
    lambdas[:stage_boundary] decays geometrically and the remainder is
    constant.  final_support_sizes is (union support size floored at one,
    total nonzero count) of the returned stack.
    """

    s0: float
    lambdas: tuple
    stage_boundary: int
    final_support_sizes: tuple
    residual_sq_norm: float
    lambda0: float
    lambda_inf: float
    lambda_fix: float
    sigma_initial: float
    sigma_refreshed: float
    ic: float = field(default=math.nan)

    @property
    def iterations(self):
        return len(self.lambdas)


def _update(gram, corr, values):
    """One gradient step values + (1/N) Z^T (y - Z values), blockwise."""
    return values + (corr - np.matmul(gram, values[:, :, None])[:, :, 0])


def gradient_step(problem, beta):
    """The solver's gradient update, without thresholding.

    Each dataset's subvector uses only that dataset's block and residual
    segment; the stacked block-diagonal design is never formed.
    """
    gram, corr, _ = problem.solver_terms()
    return CoefficientStack(_update(gram, corr, beta.values), beta.node)


def _union_size(values):
    return int(np.count_nonzero(np.any(values != 0.0, axis=0)))


def _residual_sq(problem, values):
    total = 0.0
    for k in range(problem.K):
        r = problem.response_block(k) - problem.blocks[k] @ values[k]
        total += float(r @ r)
    return total


def solve(problem, s0, config=None):
    """Run both stages for one sharing level; returns (stack, trace)."""
    config = config or SolverConfig()
    K, width, N = problem.K, problem.width, problem.N
    p = width + 1
    if not 1 <= s0 <= K:
        raise InvalidSpec(f"s0 must lie in [1, K={K}]")
    gram, corr, energies = problem.solver_terms()

    sigma0 = math.sqrt(float(np.sum(energies)) / N)
    lam_inf = config.c1 * sigma0 * math.sqrt(
        (math.log(K) + math.log(p) / s0) / N
    )
    lam0 = config.c2 * (
        math.sqrt(math.log(p * K) / N) + float(np.max(np.abs(corr)))
    )

    values = np.zeros((K, width))
    lambdas = []
    t = 0
    lam = lam0
    while lam >= lam_inf:
        if t >= config.max_total_iters:
            raise IterationCapExceeded(
                f"dynamic stage exceeded {config.max_total_iters} iterations"
            )
        values = _two_step(_update(gram, corr, values), lam, s0)
        if not np.isfinite(values).all():
            raise NonFinite("solver iterate became non-finite")
        lambdas.append(lam)
        lam *= config.kappa
        t += 1
    stage_boundary = t

    s_hat = max(1, _union_size(values))
    sigma1 = math.sqrt(_residual_sq(problem, values) / N)
    lam_fix = config.c3 * sigma1 * math.sqrt(
        (math.log(s_hat * K) + math.log(p) / s0) / N
    )
    budget = math.ceil(
        math.log(lam0 / lam_inf) / math.log(1.0 / config.kappa)
    ) + config.c4 * math.log(N)
    # A good dynamic fit can push lam_fix below lam_inf; that is deliberate —
    # with most of the signal already explained, the refreshed level reflects
    # the remaining residual scale and lets the fixed stage admit weak
    # coordinates the conservative floor excluded.
    while t <= budget:
        if t >= config.max_total_iters:
            raise IterationCapExceeded(
                f"fixed stage exceeded {config.max_total_iters} iterations"
            )
        values = _two_step(_update(gram, corr, values), lam_fix, s0)
        if not np.isfinite(values).all():
            raise NonFinite("solver iterate became non-finite")
        lambdas.append(lam_fix)
        t += 1

    stack = CoefficientStack(values, problem.node)
    rss = _residual_sq(problem, values)
    final_sizes = (
        max(1, stack.union_support_size()),
        stack.total_support_size(),
    )
    ic = _information_criterion(rss, final_sizes, N, p, K, config.c_ic)
    trace = SolveTrace(
        s0=float(s0),
        lambdas=tuple(lambdas),
        stage_boundary=stage_boundary,
        final_support_sizes=final_sizes,
        residual_sq_norm=rss,
        lambda0=lam0,
        lambda_inf=lam_inf,
        lambda_fix=lam_fix,
        sigma_initial=sigma0,
        sigma_refreshed=sigma1,
        ic=ic,
    )
    return stack, trace


def _information_criterion(rss, support_sizes, N, p, K, c_ic):
    s_hat, total = support_sizes
    fit = math.log(max(rss / N, 1e-300))
    penalty = (c_ic / N) * (
        s_hat * math.log(p) + total * math.log(K * s_hat)
    )
    return fit + penalty


def tune_s0(problem, config=None):
    """Select the sharing level by information criterion.

    Solves once per grid value and keeps the minimizer; exact ties go to the
    smaller s0.  Returns (s0, stack, trace).
    """
    config = config or SolverConfig()
    grid = config.s0_grid or default_s0_grid(problem.K)
    if any(v > problem.K for v in grid):
        raise InvalidSpec(f"s0_grid values must lie in [1, K={problem.K}]")
    best = None
    for s0 in sorted(grid):
        stack, trace = solve(problem, s0, config)
        if best is None or trace.ic < best[2].ic:
            best = (float(s0), stack, trace)
    return best
