import json

import numpy as np
import pytest

import hawkesq as hq
from hawkesq.errors import ConfigurationError, IntegrabilityError


def test_l1_norms(h1, h2):
    assert hq.l1_norm(h1) == pytest.approx(0.5)
    assert hq.l1_norm(h2) == pytest.approx(0.5)
    assert hq.l1_norm(hq.ZERO_KERNEL) == 0.0


def test_laplace_transform_values(h1, h2):
    assert hq.laplace_transform(h2, 1.0) == pytest.approx(0.16, abs=1e-12)
    assert hq.laplace_transform(h1, 1.0) == pytest.approx(0.25, abs=1e-12)
    assert hq.laplace_transform(hq.ZERO_KERNEL, 3.7) == 0.0


@pytest.mark.parametrize("omega", [0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
def test_laplace_quadrature_agrees_with_closed_form(h1, h2, omega):
    for kern in (h1, h2):
        exact = kern.laplace(omega, method="closed_form")
        quadv = kern.laplace(omega, method="quadrature")
        assert quadv == pytest.approx(exact, abs=1e-8)


def test_fourier_transform_values(h1):
    assert hq.fourier_transform(h1, 0.0) == pytest.approx(0.5 + 0j)
    assert hq.fourier_transform(h1, 1.0) == pytest.approx(0.25 + 0.25j)
    assert hq.fourier_transform(hq.ZERO_KERNEL, 3.0) == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fourier_conjugate_symmetry(seed):
    rng = np.random.default_rng(seed)
    kern = hq.SumOfExponentialsKernel(rng.uniform(0.05, 0.3, 3), rng.uniform(0.5, 4.0, 3))
    for omega in rng.uniform(0.1, 30.0, 5):
        assert kern.fourier(-omega) == pytest.approx(np.conj(kern.fourier(omega)))


def test_tabulated_matches_sum_exp_transforms(h1):
    grid = np.arange(0, 4001) * 0.01
    tab = hq.TabulatedKernel(0.01, h1(grid))
    assert tab.l1_norm() == pytest.approx(0.5, abs=1e-5)
    assert tab.laplace(1.0) == pytest.approx(0.25, abs=1e-5)
    for omega in (0.3, 2.0, 50.0, 400.0):
        assert tab.fourier(omega) == pytest.approx(h1.fourier(omega), abs=2e-5)
    assert tab.first_moment() == pytest.approx(h1.first_moment(), abs=1e-4)


def test_power_law_norm_and_integrability():
    kern = hq.PowerLawKernel(scale=2.0, exponent=5.0, amplitude=1.0)
    assert kern.l1_norm() == pytest.approx(1.0 / 8.0)
    assert kern.laplace(1.0, method="quadrature") == pytest.approx(
        kern.laplace(1.0), abs=1e-10)
    with pytest.raises(IntegrabilityError):
        hq.PowerLawKernel(scale=1.0, exponent=0.5).l1_norm()
    with pytest.raises(IntegrabilityError):
        hq.PowerLawKernel(scale=1.0, exponent=2.5).second_moment()


def test_power_law_offsets_follow_inverse_cdf():
    kern = hq.PowerLawKernel(scale=2.0, exponent=5.0)
    rng = np.random.default_rng(5)
    draws = kern.sample_offsets(rng, 200_000)
    # CDF F(t) = 1 - (1+2t)^-4; compare the empirical median
    median = (2.0 ** 0.25 - 1.0) / 2.0
    assert np.median(draws) == pytest.approx(median, abs=5e-3)


def test_mixed_sign_admission():
    # nonnegative everywhere: e^-t - 0.9 e^-2t >= 0
    kern = hq.SumOfExponentialsKernel([1.0, -0.9], [1.0, 2.0])
    assert kern.l1_norm() == pytest.approx(0.55)
    with pytest.raises(ConfigurationError):
        hq.SumOfExponentialsKernel([0.5, -0.6], [1.0, 2.0])  # negative at 0


def test_spectral_radius_cases(h1):
    m1 = hq.KernelMatrix([[h1]], [1.0])
    assert m1.spectral_radius() == pytest.approx(0.5)
    diag = hq.KernelMatrix([[h1, hq.ZERO_KERNEL],
                            [hq.ZERO_KERNEL, h1]], [1.0, 1.0])
    assert diag.spectral_radius() == pytest.approx(0.5)
    q = hq.SumOfExponentialsKernel([0.25], [1.0])
    full = hq.KernelMatrix([[q, q], [q, q]], [1.0, 1.0])
    assert full.spectral_radius() == pytest.approx(0.5)


def test_spectral_radius_diagonal_is_max_norm():
    a = hq.SumOfExponentialsKernel([0.2], [1.0])
    b = hq.SumOfExponentialsKernel([0.6], [1.0])
    m = hq.KernelMatrix([[a, hq.ZERO_KERNEL], [hq.ZERO_KERNEL, b]], [1.0, 1.0])
    assert m.spectral_radius() == pytest.approx(0.6)
    assert hq.spectral_radius(np.zeros((3, 3))) == 0.0


def test_unstable_configs_rejected(h1):
    with pytest.raises(ConfigurationError):
        hq.HawkesConfig(1.0, hq.SumOfExponentialsKernel([2.0], [1.0]))
    strong = hq.SumOfExponentialsKernel([0.6], [1.0])
    with pytest.raises(ConfigurationError):
        hq.KernelMatrix([[strong, strong], [strong, strong]], [1.0, 1.0])
    cfg = hq.HawkesConfig(10.0, h1)
    assert cfg.mean_rate() == pytest.approx(20.0)


def test_mean_rate_vector(quarter_matrix):
    cfg = hq.HawkesConfig(3.0, quarter_matrix)
    assert cfg.mean_rate_vector() == pytest.approx([6.0, 6.0])
    assert quarter_matrix.branching_vector() == pytest.approx([2.0, 2.0])


def test_kernel_json_round_trip(h2, quarter_matrix):
    for spec in (h2, hq.PowerLawKernel(1.0, 3.0, 0.4),
                 hq.TabulatedKernel(0.5, [1.0, 0.5, 0.0]), quarter_matrix):
        rebuilt = hq.kernel_from_json(json.dumps(spec.to_dict()))
        assert rebuilt.to_dict() == spec.to_dict()
    with pytest.raises(ConfigurationError):
        hq.kernel_from_dict({"type": "nope"})
