import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavityrecon import (
    DecayParams,
    DriveParams,
    PhotonDistribution,
    cat_density,
    coherent_density,
    coherent_vector,
    damp,
    damp_diagonal,
    drive_and_decay,
    effective_drive_amplitude,
    fock_density,
    integrate_master,
    number_distribution,
)
from cavityrecon.exceptions import TruncationError
from cavityrecon.fockspace import pad

from oracles import FROZEN_AMPLITUDE_AFTER_T02, FROZEN_BETA_T02, poisson


def test_decay_params():
    d = DecayParams(2.0, 0.25)
    assert d.gamma_t == 0.5
    assert math.isclose(d.q + d.eta, 1.0, rel_tol=1e-15)
    with pytest.raises(ValueError):
        DecayParams(0.0, 1.0)
    with pytest.raises(ValueError):
        DecayParams(1.0, -1.0)


def test_effective_drive_amplitude_examples():
    assert effective_drive_amplitude(DriveParams(3.0, 0.0), 1.0) == 0
    assert math.isclose(effective_drive_amplitude(DriveParams(1.0, 0.2), 1.0).real, FROZEN_BETA_T02,
                        rel_tol=1e-14)
    # tiny gamma t_d: -alpha t_d (1 + gamma t_d / 4 + ...) without cancellation
    alpha, t_d, gamma = 2.0 + 1j, 1e-10, 1e-3
    b = effective_drive_amplitude(DriveParams(alpha, t_d), gamma)
    assert abs(b / (-alpha * t_d) - (1 + gamma * t_d / 4)) < 1e-15
    with pytest.raises(ValueError):
        effective_drive_amplitude(DriveParams(1.0, 0.1), 0.0)


def test_damp_diagonal_vacuum_fixed():
    p = PhotonDistribution([1.0, 0, 0, 0])
    assert np.array_equal(damp_diagonal(p, DecayParams(1.0, 3.0)).probs, p.probs)


def test_damp_diagonal_single_photon_half_life():
    out = damp_diagonal(PhotonDistribution([0.0, 1.0]), DecayParams(1.0, math.log(2))).probs
    assert np.allclose(out, [0.5, 0.5], atol=1e-15)


def test_damp_diagonal_poisson_stays_poisson():
    gt = 0.37
    out = damp_diagonal(PhotonDistribution(poisson(4.0, 60)), DecayParams(1.0, gt)).probs
    assert np.max(np.abs(out - poisson(4.0 * math.exp(-gt), 60))) < 1e-12


def test_damp_diagonal_preserves_probability_at_large_n():
    p = np.full(200, 1 / 200)
    out = damp_diagonal(PhotonDistribution(p), DecayParams(1.0, 0.05)).probs
    assert abs(out.sum() - 1) < 1e-12


def test_damp_identity_at_zero_time():
    rho = cat_density(2, 0, 30)
    assert damp(rho, DecayParams(1.0, 0.0)) is rho


def test_damp_coherent_is_pointer_state():
    out = damp(coherent_density(2.0, 50), DecayParams(1.0, 0.3))
    ref = coherent_density(2.0 * math.exp(-0.15), 50)
    assert np.max(np.abs(out.elements - ref.elements)) < 1e-10


def test_damp_agrees_with_damp_diagonal():
    rho = cat_density(1.7, 0.4, 40)
    dec = DecayParams(1.0, 0.2)
    full = number_distribution(damp(rho, dec)).probs
    diag = damp_diagonal(number_distribution(rho), dec).probs
    assert np.max(np.abs(full - diag)) < 1e-15


def test_cat_coherences_decay_faster_than_populations():
    rho = cat_density(2.0, 0.0, 32)
    out = damp(rho, DecayParams(1.0, 0.1))
    coh = abs(out.elements[0, 4]) / abs(rho.elements[0, 4])
    pop = out.elements[4, 4].real / rho.elements[4, 4].real
    assert coh < 1 and out.elements[0, 0].real > rho.elements[0, 0].real
    assert coh > pop  # |0><4| loses one e^{-2 gamma t} factor, |4><4| loses two
    ref = integrate_master(rho, 0.0, 1.0, 0.1, 200)
    assert np.linalg.norm(out.elements - ref.elements) < 1e-8


def test_semigroup():
    rho = cat_density(1.5, 1.0, 40)
    a = damp(damp(rho, DecayParams(1.0, 0.13)), DecayParams(1.0, 0.29))
    b = damp(rho, DecayParams(1.0, 0.42))
    assert np.max(np.abs(a.elements - b.elements)) < 1e-10


def test_damp_preserves_trace_and_hermiticity():
    out = damp(cat_density(2.0, 0.7, 48), DecayParams(1.0, 0.8))
    assert abs(out.trace - 1) < 1e-10
    assert np.allclose(out.elements, out.elements.conj().T, atol=0)


def test_drive_and_decay_limits():
    rho = pad(cat_density(1.0, 0.0, 20), 40)
    same = drive_and_decay(rho, DriveParams(0.0, 0.3), 1.0)
    assert np.allclose(same.elements, damp(rho, DecayParams(1.0, 0.3)).elements, atol=1e-15)
    ident = drive_and_decay(rho, DriveParams(5.0, 0.0), 1.0)
    assert np.allclose(ident.elements, rho.elements, atol=1e-15)


def test_drive_and_decay_checks_margin():
    with pytest.raises(TruncationError):
        drive_and_decay(cat_density(2.0, 0.0, 24), DriveParams(10.0, 0.05), 1.0)


def test_drive_and_decay_matches_master_equation():
    rho = pad(cat_density(2.0, 0.0, 16), 40)
    drive = DriveParams(4.0 - 3.0j, 0.1)
    fast = drive_and_decay(rho, drive, 1.0)
    slow = integrate_master(rho, drive.alpha, 1.0, drive.t_d, 1000)
    assert np.linalg.norm(fast.elements - slow.elements) < 1e-8


def test_master_equation_examples():
    vac = fock_density(0, 6)
    assert np.allclose(integrate_master(vac, 0.0, 1.0, 2.0, 100).elements, vac.elements, atol=0)
    one = integrate_master(fock_density(1, 4), 0.0, 1.0, math.log(2), 2000)
    assert np.allclose(np.diag(one.elements).real[:2], [0.5, 0.5], atol=1e-7)


def test_master_equation_driven_vacuum_is_coherent():
    # the coherent amplitude right after the drive, then decaying with the
    # field for the rest of the same interval
    out = integrate_master(fock_density(0, 30), 1.0, 1.0, 0.2, 2000)
    beta = FROZEN_BETA_T02
    ref = coherent_density(beta, 30)
    assert np.max(np.abs(out.elements - ref.elements)) > 1e-3
    ref = coherent_density(FROZEN_AMPLITUDE_AFTER_T02, 30)
    assert np.max(np.abs(out.elements - ref.elements)) < 1e-6
    assert abs(out.trace - 1) < 1e-8


def test_master_equation_step_warning():
    with pytest.warns(RuntimeWarning):
        integrate_master(fock_density(0, 3), 0.0, 1.0, 1.0, 10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        integrate_master(fock_density(0, 3), 0.0, 1.0, 1.0, 100)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 64), gt=st.floats(0, 0.5), seed=st.integers(0, 2**32 - 1))
def test_telescoping_identity_within_conditioning(n, gt, seed):
    """Sum_m chi^m P_m(t) = Sum_n (-1)^n P_n(0), up to rounding amplified by the series.

    The rounding in ``P_m(t)`` is multiplied by ``|chi|^m``; summed over the
    binomial spread this is ``kappa = sum_n P_n (1 + 2q)^n`` ulps.
    """
    from cavityrecon import series_weight

    rng = np.random.default_rng(seed)
    p0 = rng.dirichlet(np.ones(n))
    pt = damp_diagonal(PhotonDistribution(p0), DecayParams(1.0, gt)).probs
    k = np.arange(n)
    lhs = math.fsum(series_weight(0.0, gt) ** k * pt)
    rhs = math.fsum(p0 * (-1.0) ** k)
    kappa = float(np.sum(p0 * (1 - 2 * math.expm1(-gt)) ** k))
    assert abs(lhs - rhs) <= max(1e-13, 8 * np.finfo(float).eps * kappa)


def test_telescoping_identity_for_physical_distributions():
    # Poissonian inputs keep kappa small, so the identity holds to 1e-10
    from cavityrecon import series_weight

    for mean in (0.5, 4.0, 16.0):
        for gt in (0.0, 0.1, 0.5):
            p0 = poisson(mean, 64)
            pt = damp_diagonal(PhotonDistribution(p0), DecayParams(1.0, gt)).probs
            k = np.arange(64)
            lhs = math.fsum(series_weight(0.0, gt) ** k * pt)
            assert abs(lhs - math.fsum(p0 * (-1.0) ** k)) < 1e-10
