"""Budgeted constructions of small-dispersion operators hitting arbitrary targets.

``build_theorem1`` returns an operator with spreading support in
``[-gamma, gamma] x [-alpha, alpha]`` whose output on ``chi_[-B, B]`` is within
``epsilon`` of ``y``; ``build_theorem2`` does the same for the sinc input
``phi_B`` with support in ``[-alpha, alpha] x [-beta, beta]``.
``verify_obstruction`` checks the converse limitation for plain delays.

Squared-error budget, with ``E = epsilon**2``:

* tail of the target outside ``[-B, B]``:      ``< c E``
* synthesis residual squared on ``[-B, B]``:     ``< (1 - c) E / 2``
* mollification error squared:                  ``< (1 - c) E / 2``

These shares are bookkeeping; the error of the final operator is always
measured by applying it, and only that measurement decides convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivisionFloorError, InvalidArgument, ResolutionError
from .operators import (
    Convolution,
    Dense,
    Grid2D,
    Multiplication,
    Separable,
    SeparableFreq,
    SpreadingGrid,
    SupportBox,
    _values_at,
    apply,
    convolve,
    freq_window,
    hs_norm,
    kernel_grid,
    mollifier,
    operator_norm_estimate,
    support_box,
    symbol_sup_norm,
)
from .signal import (
    Grid1D,
    Indicator,
    SampledSignal,
    Sinc,
    dft,
    l2_norm,
    make_grid,
    choose_B,
    sample,
    tail_energy,
    translate,
)
from .synth import SincBasis, SynthesisConfig, synthesize

__all__ = [
    "BudgetSplit",
    "TheoremReport",
    "DEFAULT_LAMBDAS",
    "build_theorem1",
    "build_theorem2",
    "verify_obstruction",
    "obstruction_trials",
    "input_substitution",
]

DEFAULT_LAMBDAS = tuple(10.0**-k for k in range(4, 26, 2))


@dataclass(frozen=True)
class BudgetSplit:
    epsilon: float
    c: float = 0.5

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidArgument("epsilon must be positive")
        if not 0 < self.c < 1:
            raise InvalidArgument("c must lie in (0, 1)")

    @property
    def tail_share(self) -> float:
        return self.c * self.epsilon**2

    @property
    def residual_share(self) -> float:
        return (1 - self.c) * self.epsilon**2 / 2

    @property
    def mollifier_share(self) -> float:
        return (1 - self.c) * self.epsilon**2 / 2


@dataclass
class TheoremReport:
    theorem: str
    B: float
    delta: float
    achieved_error: float
    residual: float
    tail: float
    mollifier_boundary_term: float
    mollifier_error: float
    hs_norm: float
    symbol_sup: float
    operator_norm: float
    energy_ratio: float
    leakage: float
    lam: float
    support_box: SupportBox
    requested_box: tuple
    budget: BudgetSplit
    converged: bool
    failure: str | None = None
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {
            k: getattr(self, k)
            for k in (
                "theorem",
                "B",
                "delta",
                "achieved_error",
                "residual",
                "tail",
                "mollifier_boundary_term",
                "mollifier_error",
                "hs_norm",
                "symbol_sup",
                "operator_norm",
                "energy_ratio",
                "leakage",
                "lam",
                "converged",
                "failure",
            )
        }
        d["support_box"] = self.support_box.as_dict()
        d["requested_box"] = list(self.requested_box)
        d["epsilon"] = self.budget.epsilon
        d["c"] = self.budget.c
        d.update(self.extra)
        return d


def _fit(target, cfg, lambdas, share):
    """Walk the weight schedule from large to small; stop at the first fit within ``share``.

    Returns the fit and whether it met the share. On failure the fit with the
    smallest residual is returned.
    """
    if lambdas is None:
        lambdas = (cfg.lam,) + tuple(l for l in DEFAULT_LAMBDAS if l < cfg.lam)
    best = None
    for lam in lambdas:
        res = synthesize(target, cfg.replace(lam=lam))
        if res.residual**2 < share:
            return res, True
        if best is None or res.residual < best.residual:
            best = res
    return best, False


def _first_failure(tail_ok, fit_ok, delta_failure, error_ok):
    """Name of the earliest stage that missed its share, or ``None``."""
    if not tail_ok:
        return "tail"
    if not fit_ok:
        return "synthesis"
    if delta_failure:
        return delta_failure
    if not error_ok:
        return "measured-error"
    return None


def _deltas(start, floor, fixed):
    if fixed is not None:
        if fixed < floor * (1 - 1e-9):
            raise ResolutionError(f"delta={fixed} is below the floor {floor}")
        yield fixed
        return
    if start < floor * (1 - 1e-9):
        raise ResolutionError(f"half-width {start} is below the floor {floor}")
    d = start
    while d >= floor * (1 - 1e-9):
        yield d
        d /= 2


def build_theorem1(
    y: SampledSignal,
    alpha: float,
    gamma: float,
    budget: BudgetSplit,
    cfg: SynthesisConfig | None = None,
    lambdas=None,
    B: float | None = None,
    delta: float | None = None,
):
    """Operator in ``OPW^2([-gamma, gamma] x [-alpha, alpha])`` mapping ``chi_[-B, B]`` near ``y``.

    ``B`` and ``delta`` may be pinned (used by parameter sweeps); otherwise
    ``B`` comes from the tail share and ``delta`` is halved from ``gamma / 2``.
    Returns ``(Separable(mollifier, m), TheoremReport)``.
    """
    if not (alpha > 0 and gamma > 0):
        raise InvalidArgument("alpha and gamma must be positive")
    if not np.any(y.samples):
        raise InvalidArgument("target must be non-zero")
    grid = y.grid
    if cfg is None:
        cfg = SynthesisConfig(alpha=alpha, B=1.0)
    if B is None:
        B = choose_B(y, budget.tail_share)
    tail = tail_energy(y, B)
    fit, fit_ok = _fit(y, cfg.replace(alpha=alpha, B=B), lambdas, budget.residual_share)
    m = fit.m
    chi = sample(Indicator(B), grid)
    m_chi = m * chi
    edge_dist = np.abs(np.abs(grid.nodes) - B)

    failure = None
    for d in _deltas(gamma / 2, 2 * grid.dx, delta):
        op = Separable(mollifier(d, kernel_grid(grid.dx, d)), m)
        out = apply(op, chi)
        moll_err = l2_norm(out - m_chi)
        achieved = l2_norm(out - y)
        if moll_err**2 < budget.mollifier_share and achieved < budget.epsilon:
            break
    else:
        failure = "delta-floor" if delta is None else "fixed-delta"
    bound = float(grid.dx * np.sum(np.abs(m.samples[edge_dist <= d + 1e-9 * grid.dx]) ** 2))

    failure = _first_failure(tail < budget.tail_share, fit_ok, failure, achieved < budget.epsilon)
    converged = failure is None
    report = TheoremReport(
        theorem="t1",
        B=B,
        delta=d,
        achieved_error=achieved,
        residual=fit.residual,
        tail=tail,
        mollifier_boundary_term=bound,
        mollifier_error=moll_err**2,
        hs_norm=hs_norm(op),
        symbol_sup=symbol_sup_norm(op),
        operator_norm=operator_norm_estimate(op, grid, iters=30),
        energy_ratio=fit.energy_ratio,
        leakage=fit.leakage,
        lam=fit.config.lam,
        support_box=support_box(op),
        requested_box=(gamma, alpha),
        budget=budget,
        converged=converged,
        failure=failure,
    )
    return op, report


def fourier_target(y: SampledSignal) -> SampledSignal:
    """Spectrum of ``y`` set up so that band-limited fits map back to the centred delay grid."""
    Y = dft(y)
    t0 = -(y.grid.n // 2) * y.grid.dx
    return SampledSignal(Y.grid, Y.samples, dual_x0=t0)


def build_theorem2(
    y: SampledSignal,
    alpha: float,
    beta: float,
    budget: BudgetSplit,
    cfg: SynthesisConfig | None = None,
    lambdas=None,
    B: float | None = None,
    delta: float | None = None,
):
    """Operator in ``OPW^2([-alpha, alpha] x [-beta, beta])`` mapping ``phi_B`` near ``y``.

    The time-frequency dual of :func:`build_theorem1`: the kernel ``h`` is
    fitted through its transform against the spectrum of ``y``, then the
    Doppler axis is mollified. Returns ``(SeparableFreq(h, w), TheoremReport)``.
    """
    if not (alpha > 0 and beta > 0):
        raise InvalidArgument("alpha and beta must be positive")
    if not np.any(y.samples):
        raise InvalidArgument("target must be non-zero")
    grid = y.grid
    if cfg is None:
        cfg = SynthesisConfig(alpha=alpha, B=1.0)
    Y = fourier_target(y)
    if B is None:
        B = choose_B(Y, budget.tail_share)
    tail = tail_energy(Y, B)
    fit, fit_ok = _fit(Y, cfg.replace(alpha=alpha, B=B), lambdas, budget.residual_share)

    # h(t) = F(-t) where F is the exact band-limited spectrum of the fitted transform
    tgrid = kernel_grid(grid.dx, alpha)
    h = SampledSignal(tgrid, _values_at(fit.spectrum, -tgrid.nodes))
    phi = sample(Sinc(B), grid)
    g = convolve(phi, h)
    dnu = grid.conjugate().dx

    failure = None
    for d in _deltas(beta / 2, 2 * dnu, delta):
        w = mollifier(d, kernel_grid(dnu, d))
        op = SeparableFreq(h, w)
        W = freq_window(w, grid.nodes)
        out = g.with_samples(W * g.samples)
        moll_err = l2_norm(out - g)
        achieved = l2_norm(out - y)
        if moll_err**2 < budget.mollifier_share and achieved < budget.epsilon:
            break
    else:
        failure = "delta-floor" if delta is None else "fixed-delta"

    failure = _first_failure(tail < budget.tail_share, fit_ok, failure, achieved < budget.epsilon)
    converged = failure is None
    report = TheoremReport(
        theorem="t2",
        B=B,
        delta=d,
        achieved_error=achieved,
        residual=fit.residual,
        tail=tail,
        mollifier_boundary_term=moll_err**2,
        mollifier_error=moll_err**2,
        hs_norm=hs_norm(op),
        symbol_sup=symbol_sup_norm(op),
        operator_norm=operator_norm_estimate(op, grid, iters=30),
        energy_ratio=fit.energy_ratio,
        leakage=fit.leakage,
        lam=fit.config.lam,
        support_box=support_box(op),
        requested_box=(alpha, beta),
        budget=budget,
        converged=converged,
        failure=failure,
    )
    return op, report


# ------------------------------------------------------------- obstruction


def obstruction_grid(N: float, dx: float = 1 / 64) -> Grid1D:
    """Cell-centred grid (no node on ``+-1/2``) covering ``[-1, N + 1]`` symmetrically."""
    half = float(2 ** math.ceil(math.log2(N + 2)))
    return make_grid(dx / 2, half, int(round(2 * half / dx)))


def _trial_operators(alpha, grid, trials, seed):
    rng = np.random.default_rng(seed)
    dx = grid.dx
    tg = kernel_grid(dx, alpha)
    vg = kernel_grid(alpha / 8, alpha)
    ops = []
    for _ in range(trials):
        vals = rng.standard_normal((tg.n, vg.n)) + 1j * rng.standard_normal((tg.n, vg.n))
        ops.append(Dense(SpreadingGrid(Grid2D(tg, vg), vals)))
    basis = SincBasis(alpha, grid.x_max / 2, grid.conjugate())
    coef = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
    m = basis.expand(coef, grid)
    h = SampledSignal(tg, rng.standard_normal(tg.n))
    ops.append(Multiplication(m))
    ops.append(Convolution(h))
    ops.append(Separable(mollifier(alpha / 2, kernel_grid(dx, alpha / 2)), m))
    ops.append(SeparableFreq(h, mollifier(alpha / 2, kernel_grid(alpha / 8, alpha / 2))))
    ops.append(Multiplication(SampledSignal(grid, np.zeros(grid.n))))
    return ops


def obstruction_trials(alpha, N, grid=None, trials=32, seed=0, extra_ops=()):
    """Per-operator ``(error, outside_fraction)`` for the delayed-box problem.

    ``error`` is ``||H chi - T_N chi||`` with ``chi`` the box on ``[-1/2, 1/2]``;
    ``outside_fraction`` is the share of ``||H chi||^2`` outside
    ``[-1/2 - alpha, 1/2 + alpha]``.
    """
    if not alpha > 0:
        raise InvalidArgument("alpha must be positive")
    if N < 1 + alpha - 1e-12:
        raise InvalidArgument("need N >= 1 + alpha")
    if grid is None:
        grid = obstruction_grid(N)
    if grid.x0 > -1 or grid.x_max < N + 1:
        raise InvalidArgument(f"grid must cover [-1, {N + 1}]")
    f = sample(Indicator(0.5), grid)
    y = translate(f, N)
    reach = 0.5 + alpha + 1e-9
    outside = np.abs(grid.nodes) > reach
    rows = []
    for op in list(_trial_operators(alpha, grid, trials, seed)) + list(extra_ops):
        out = apply(op, f)
        tot = l2_norm(out) ** 2
        frac = float(grid.dx * np.sum(np.abs(out.samples[outside]) ** 2) / tot) if tot else 0.0
        rows.append((l2_norm(out - y), frac))
    return rows


def verify_obstruction(alpha, N, grid=None, trials=32, seed=0, extra_ops=()) -> float:
    """Smallest ``||H chi - T_N chi||`` over random and structured ``H`` in ``OPW([-alpha, alpha]^2)``."""
    rows = obstruction_trials(alpha, N, grid, trials, seed, extra_ops)
    return min(r[0] for r in rows)


def input_substitution(g: SampledSignal, y: SampledSignal, B: float, floor: float = 1e-12):
    """``y / g`` on ``[-B, B]`` and zero outside, for driving the pipeline with input ``g``."""
    if not g.grid.matches(y.grid):
        raise InvalidArgument("g and y must share a grid")
    inside = np.abs(g.x) <= B + 1e-9 * g.grid.dx
    gi = g.samples[inside]
    if np.any(np.abs(gi) < floor):
        raise DivisionFloorError(f"|g| drops below {floor} inside [-{B}, {B}]")
    out = np.zeros(g.grid.n, dtype=np.complex128)
    out[inside] = y.samples[inside] / gi
    return y.with_samples(out)
