import math
import warnings

import mpmath as mp
import numpy as np
import pytest

from qthreshold import morse, qdyn
from qthreshold.errors import AsymptoticsViolation, QuadratureWarning, WindowError
from qthreshold.packet import CoherentState, free_flight_time

STATE = CoherentState(z_i=100.0, p_i=1.0, gamma=1e-2)


@pytest.fixture(scope="module")
def late_grid():
    """Density of the E = 0.5 packet on a window that holds it at all times."""
    params = morse.MorseParams()
    kg = qdyn.KGrid.for_state(STATE, n=20_000)
    z = np.arange(-3.0, 330.0, 0.2)
    t = np.array([0.0, 98.0, 250.0, 300.0])
    return qdyn.propagate(params, STATE, z, t, kg)


def test_completeness_of_overlap(params):
    k, w = qdyn.KGrid.for_state(STATE).nodes_weights()
    ov = qdyn.overlap_k(params, STATE, k)
    assert np.sum(w * np.abs(ov) ** 2) == pytest.approx(1.0, abs=1e-6)


def test_overlap_window_and_peak(params):
    peak = abs(qdyn.overlap_k(params, STATE, STATE.p_i))
    assert peak * (math.pi * STATE.gamma) ** 0.25 == pytest.approx(1.0, abs=1e-12)
    half = 7 * math.sqrt(STATE.gamma)
    for k in (STATE.p_i - 1.01 * half, STATE.p_i + 1.01 * half):
        assert abs(qdyn.overlap_k(params, STATE, k)) < 1e-10 * peak


def test_packet_near_well_rejected(params):
    with pytest.raises(AsymptoticsViolation):
        qdyn.overlap_k(params, CoherentState(12.0, 1.0, 1e-2), 1.0)


def test_initial_profile_reproduced(params):
    kg = qdyn.KGrid.for_state(STATE)
    z = np.linspace(80.0, 120.0, 41)
    amp = qdyn.amplitude_grid(params, STATE, kg, z, [0.0])[0]
    ref = STATE.wavefunction(z)
    assert np.max(np.abs(amp - ref)) < 1e-7 * np.max(np.abs(ref))
    assert qdyn.self_test(params, STATE, kg) < 1e-6


def test_gauss_legendre_rule_agrees(params):
    z, t = [95.0, 3.0], [0.0, 110.0]
    a = qdyn.amplitude_grid(params, STATE, qdyn.KGrid.for_state(STATE), z, t)
    b = qdyn.amplitude_grid(params, STATE, qdyn.KGrid.for_state(STATE, n=2000,
                                                                rule="gauss-legendre"), z, t)
    assert np.max(np.abs(a - b)) < 1e-9


def test_norm_conserved(late_grid):
    dz = late_grid.z_axis[1] - late_grid.z_axis[0]
    norms = late_grid.values.sum(axis=0) * dz
    assert norms[0] == pytest.approx(1.0, abs=1e-6)
    assert norms[-1] == pytest.approx(norms[0], rel=1e-3)


def test_outgoing_group_velocity(late_grid):
    z = late_grid.z_axis
    out = z > 60.0
    centroid = [np.sum(z[out] * late_grid.values[out, j]) / np.sum(late_grid.values[out, j])
                for j in (2, 3)]
    v = (centroid[1] - centroid[0]) / 50.0
    assert v == pytest.approx(STATE.p_i, rel=1e-2)


def test_penetration_and_interference_at_bounce(late_grid, params):
    z_tp = morse.turning_point(params, STATE.energy())
    prof = late_grid.column(98.0)
    assert prof[late_grid.z_axis < z_tp].max() > 1e-6 * late_grid.values.max()
    f = prof[1:-1]
    is_max = (f > prof[:-2]) & (f >= prof[2:]) & (f > 1e-2 * prof.max())
    is_min = (f < prof[:-2]) & (f <= prof[2:])
    maxima, minima = np.nonzero(is_max)[0], np.nonzero(is_min)[0]
    contrast = []
    for i in maxima:
        nxt = minima[minima > i]
        if nxt.size:
            lo = f[nxt[0]]
            contrast.append((f[i] - lo) / (f[i] + lo))
    assert sum(c > 0.5 for c in contrast) >= 5


def test_extended_precision_phase():
    k = np.array([1e-4 + 3.3e-9, 1.00007e-4])
    t = np.array([1e10, 3.3e10])
    got = qdyn._phase_rows(k, t, 0.5)
    for i, tt in enumerate(t):
        for j, kk in enumerate(k):
            ref = mp.exp(-1j * mp.mpf(0.5) * mp.mpf(kk) ** 2 * mp.mpf(tt))
            assert abs(got[i, j] - complex(ref)) < 1e-12


def test_correlation_checks(params):
    # the exact value exp(-gamma z_i^2) sqrt(gamma/pi) lies far below the
    # roundoff floor of a 5e4-term sum, about 1e-25 of the peak density
    c0 = qdyn.correlation_at(params, STATE, 200.0, 0.0)
    peak = STATE.density(STATE.z_i)
    assert c0 <= max(math.exp(-STATE.gamma * STATE.z_i**2), 1e-24) * peak
    t = np.linspace(250, 350, 201)
    C = qdyn.correlation_at(params, STATE, 200.0, t)
    assert t[np.argmax(C)] == pytest.approx(302.0, rel=2e-2)


def test_mean_flight_time_e05(params):
    res = qdyn.mean_flight_time_qm(params, STATE, 200.0)
    assert res.mean == pytest.approx(3.0271643e2, rel=5e-3)
    assert free_flight_time(params, STATE, 200.0) < res.mean
    assert res.normalization > 0


def test_window_error(params):
    with pytest.raises(WindowError):
        qdyn.mean_flight_time_qm(params, STATE, 200.0, t_window=250.0, max_extensions=0)


def test_window_extension(params):
    res = qdyn.mean_flight_time_qm(params, STATE, 200.0, t_window=300.0, n_t=2001)
    assert res.extensions >= 1
    assert res.mean == pytest.approx(3.0271643e2, rel=5e-3)


def test_coarse_grid_triggers_spot_check_warning(params):
    kg = qdyn.KGrid.for_state(STATE, n=30)
    z = np.linspace(-3.0, 200.0, 50)
    t = np.linspace(0.0, 300.0, 20)
    with pytest.warns(QuadratureWarning):
        qdyn.propagate(params, STATE, z, t, kg, spot_check=True)


def test_fine_grid_spot_check_is_quiet(params):
    kg = qdyn.KGrid.for_state(STATE)
    z = np.linspace(60.0, 140.0, 30)
    t = np.linspace(0.0, 20.0, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("error", QuadratureWarning)
        qdyn.propagate(params, STATE, z, t, kg, spot_check=True)
