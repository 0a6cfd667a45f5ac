import numpy as np
import pytest
from scipy.special import erfc
from hypothesis import given, settings
from hypothesis import strategies as st

from opwlab.errors import InvalidArgument, UndefinedRatio
from opwlab.signal import (
    Gaussian,
    SampledSignal,
    Sinc,
    Sinusoid,
    dft,
    interval_energy,
    l2_norm,
    load_signal,
    make_grid,
    sample,
    save_signal,
    tail_energy,
)
from opwlab.synth import (
    SincBasis,
    SynthesisConfig,
    bandlimit_leakage,
    coefficient_signal,
    collocation,
    energy_report,
    residual_on_interval,
    solve_normal_equations,
    solve_tikhonov,
    synthesize,
)

GRID = make_grid(0, 16, 2048)


@pytest.mark.parametrize(
    "kw",
    [dict(alpha=0), dict(B=-1), dict(extent_factor=0.5), dict(lam=-1), dict(collocation_oversample=1)],
)
def test_config_validation(kw):
    params = dict(alpha=1.0, B=1.0)
    params.update(kw)
    with pytest.raises(InvalidArgument):
        SynthesisConfig(**params)


def test_basis_elements_are_band_limited_sincs():
    conj = GRID.conjugate()
    basis = SincBasis(1.0, 4.0, conj)
    assert len(basis) == 2 * 8 + 1
    c = np.zeros(len(basis))
    c[len(basis) // 2] = 1.0
    b0 = basis.expand(c, GRID)
    # a periodic sinc of bandwidth 1 is close to 2 sinc(2x) near the origin
    near = np.abs(GRID.nodes) < 4
    assert np.abs(b0.samples[near] - 2 * np.sinc(2 * GRID.nodes[near])).max() < 1e-2
    assert tail_energy(dft(b0), 1.0) < 1e-25


def test_matrix_matches_expansion():
    basis = SincBasis(0.5, 6.0, GRID.conjugate())
    rng = np.random.default_rng(1)
    c = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
    m = basis.expand(c, GRID)
    idx = np.arange(0, GRID.n, 37)
    np.testing.assert_allclose(basis.matrix(GRID.nodes[idx]) @ c, m.samples[idx], atol=1e-12)


def test_collocation_weights_integrate_interval():
    pts, w = collocation(GRID, 1.5, 1.0, 8)
    x = GRID.nodes[pts]
    assert w.sum() == pytest.approx(x[-1] - x[0])
    assert np.all(np.abs(x) <= 1.5)
    assert np.all(np.diff(pts) > 0)


def test_solvers_agree_on_well_posed_problem():
    rng = np.random.default_rng(7)
    G = rng.standard_normal((80, 20)) + 1j * rng.standard_normal((80, 20))
    y = rng.standard_normal(80) + 0j
    w = rng.uniform(0.5, 1.5, 80)
    a = solve_tikhonov(G, y, w, 1e-3)
    b = solve_normal_equations(G, y, w, 1e-3)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_bandlimited_target_is_reproduced_cheaply():
    # a target already in the band needs no superoscillation
    y = sample(Sinc(0.8), GRID)
    res = synthesize(y, SynthesisConfig(alpha=1.0, B=2.0, lam=1e-10))
    assert res.residual < 1e-3 * l2_norm(y)
    assert res.energy_ratio < 10


def test_superoscillatory_fit_costs_energy():
    y = sample(Sinusoid(1.5), GRID)
    res = synthesize(y, SynthesisConfig(alpha=1.0, B=1.5, lam=1e-14))
    assert res.residual < 0.05 * np.sqrt(3.0)
    assert res.energy_ratio > 1e3
    assert res.leakage < 1e-20
    total, inside, ratio, sup = energy_report(res)
    assert ratio == pytest.approx(total / inside)
    assert sup > 10


def test_residual_non_increasing_as_lambda_decreases():
    y = sample(Sinusoid(1.5, 0.3), GRID)
    cfg = SynthesisConfig(alpha=1.0, B=1.5)
    res = [synthesize(y, cfg.replace(lam=lam)).residual for lam in 10.0 ** -np.arange(2, 16, 2)]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(res, res[1:]))


@settings(max_examples=20, deadline=None)
@given(
    st.floats(0.3, 2.0),
    st.floats(0.5, 2.0),
    st.floats(0.05, 3.0),
    st.floats(-12, -2),
)
def test_synthesis_invariants(alpha, B, beta, loglam):
    y = sample(Sinusoid(beta, 0.4), GRID)
    res = synthesize(y, SynthesisConfig(alpha=alpha, B=B, lam=10**loglam))
    assert res.energy_ratio >= 1
    assert res.leakage < 1e-12
    assert res.residual == pytest.approx(residual_on_interval(res.m, y, B))


def test_zero_target():
    y = SampledSignal(GRID, np.zeros(GRID.n))
    res = synthesize(y, SynthesisConfig(alpha=1.0, B=1.0))
    assert not np.any(res.coefficients)
    assert res.energy_ratio == 1.0
    with pytest.raises(UndefinedRatio):
        bandlimit_leakage(res.m, 1.0)


def test_grid_too_narrow_for_basis():
    g = make_grid(0, 4, 256)
    with pytest.raises(InvalidArgument):
        synthesize(sample(Gaussian(), g), SynthesisConfig(alpha=1.0, B=2.0))


def test_fits_in_the_frequency_domain():
    # same routine applied to a spectrum: the fit lives on the conjugate grid
    y = sample(Gaussian(), GRID)
    Y = dft(y)
    Y = SampledSignal(Y.grid, Y.samples, dual_x0=-(GRID.n // 2) * GRID.dx)
    res = synthesize(Y, SynthesisConfig(alpha=0.5, B=1.0, lam=1e-8))
    assert res.m.grid.matches(Y.grid)
    assert res.spectrum.grid.x0 == Y.dual_x0
    assert res.residual < 0.05


@pytest.mark.parametrize("alpha, B", [(1.0, 1.0), (1.0, 2.0), (0.5, 2.0)])
def test_in_band_sinc_is_fitted(alpha, B):
    y = sample(Sinc(alpha), GRID)
    res = synthesize(y, SynthesisConfig(alpha=alpha, B=B, lam=1e-12))
    assert res.residual < 1e-6


def test_coefficient_norm_grows_as_lambda_decreases():
    y = sample(Sinusoid(1.5, 0.3), GRID)
    cfg = SynthesisConfig(alpha=1.0, B=1.5)
    norms = [np.linalg.norm(synthesize(y, cfg.replace(lam=lam)).coefficients)
             for lam in 10.0 ** -np.arange(2, 16, 2)]
    assert all(b >= a for a, b in zip(norms, norms[1:]))


@pytest.mark.parametrize("lam", [1e-10, 1e-12, 0.0])
def test_expansion_coefficients_are_recovered(lam):
    # centres confined to [-B, B] keep the collocation system well conditioned
    rng = np.random.default_rng(7)
    cfg = SynthesisConfig(alpha=1.0, B=2.0, extent_factor=1.0, lam=lam)
    basis = SincBasis(1.0, 2.0, GRID.conjugate())
    c = rng.standard_normal(len(basis)) + 1j * rng.standard_normal(len(basis))
    res = synthesize(basis.expand(c, GRID), cfg)
    assert np.linalg.norm(res.coefficients - c) <= 1e-6 * np.linalg.norm(c)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**16), st.floats(0.3, 2.0))
def test_span_has_no_leakage(seed, alpha):
    rng = np.random.default_rng(seed)
    basis = SincBasis(alpha, 4.0, GRID.conjugate())
    m = basis.expand(rng.standard_normal(len(basis)), GRID)
    assert bandlimit_leakage(m, alpha) < 1e-5


@pytest.mark.parametrize("alpha", [1.0, 1.2, 1.5])
def test_gaussian_leakage_matches_erfc(alpha):
    # |F|^2 = exp(-2 pi xi^2); the nodes beyond alpha form a midpoint rule
    h = GRID.conjugate().dx
    edge = h * (np.floor(alpha / h + 1e-9) + 0.5)
    leak = bandlimit_leakage(sample(Gaussian(), GRID), alpha)
    rel = 2 * (4 * np.pi * alpha * h) ** 2 / 24  # twice the midpoint error estimate
    assert leak == pytest.approx(erfc(np.sqrt(2 * np.pi) * edge), rel=rel)
    if alpha >= 1.2:
        assert leak < 1e-4


def test_fast_windowed_sine_leaks_almost_everything():
    w = sample(Gaussian(2.0), GRID) * sample(Sinusoid(6.0), GRID)
    assert bandlimit_leakage(w, 1.0) > 1 - 1e-10


@pytest.mark.parametrize("eps0", [1e-3, 0.5])
def test_residual_of_constant_offset(eps0):
    g = make_grid(1 / 256, 8, 2048)  # no node on the interval ends
    y = sample(Gaussian(), g)
    B = 1.5
    assert residual_on_interval(y.with_samples(y.samples + eps0), y, B) == pytest.approx(eps0 * np.sqrt(2 * B), rel=1e-12)
    assert interval_energy(y, B) > 0


def test_coefficients_round_trip(tmp_path):
    y = sample(Sinusoid(1.5), GRID)
    res = synthesize(y, SynthesisConfig(alpha=1.0, B=1.5, lam=1e-8))
    c = coefficient_signal(res)
    np.testing.assert_allclose(c.x, res.basis.centers, atol=1e-12)
    p = tmp_path / "c.txt"
    save_signal(p, c, centers=True)
    assert "# centers" in p.read_text().splitlines()[:3]
    back = load_signal(p)
    assert back.grid == c.grid
    np.testing.assert_array_equal(back.samples, res.coefficients)
