import json
import math

import numpy as np
import pytest

import rwpattern as rw
from rwpattern.errors import BlowUpError, FormatError, ValidationError
from rwpattern.fieldio import read_header, sidecar_path


# ---------------------------------------------------------------------------
# analytic fields


def test_peregrine_peak_and_far_field():
    # u(0, 0) = 1 - 4 = -3: peak amplitude exactly 3 on a unit background
    assert abs(rw.peregrine(0.0, 0.0)) == pytest.approx(3.0, abs=1e-12)
    assert abs(rw.peregrine(500.0, 0.0)) == pytest.approx(1.0, abs=1e-5)
    assert abs(rw.peregrine(0.0, 500.0)) == pytest.approx(1.0, abs=1e-5)
    xs = np.linspace(-10.0, 10.0, 2001)
    line = np.abs(rw.peregrine(xs, 0.0))
    assert line.max() == pytest.approx(3.0, abs=1e-12)
    assert np.all(line[xs != 0.0] < 3.0)
    ts = np.linspace(-10.0, 10.0, 2001)
    ridge = np.abs(rw.peregrine(0.0, ts))
    assert np.all(ridge[ts != 0.0] < 3.0)


def test_peregrine_satisfies_equation():
    # i u_t + u_xx / 2 + |u|^2 u = 0 checked with 4th-order stencils; the
    # closed form is the oracle for the solver convergence tests, so it is
    # verified on its own first.
    xs = np.linspace(-3.0, 3.0, 61)
    ts = np.linspace(-2.0, 2.0, 41)
    X, T = np.meshgrid(xs, ts)
    h = 3e-3
    c1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
    c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    offsets = range(-2, 3)
    u_t = sum(c * rw.peregrine(X, T + m * h) for c, m in zip(c1, offsets))
    u_xx = sum(c * rw.peregrine(X + m * h, T) for c, m in zip(c2, offsets))
    u = rw.peregrine(X, T)
    residual = 1j * u_t + 0.5 * u_xx + np.abs(u) ** 2 * u
    assert np.max(np.abs(residual)) < 1e-6


def test_gaussian_initial_profile():
    grid = rw.SimGrid(length=80.0, nx=256, dt=1e-3, t_max=1.0)
    fld = rw.gaussian_initial(grid, rw.GaussParams(eps=20.0, mu=2.0))
    assert fld.t == 0.0
    expected = 1.0 + 0.1 * np.exp(-grid.x ** 2 / 4.0)
    np.testing.assert_allclose(fld.values.real, expected, rtol=0, atol=1e-15)
    np.testing.assert_allclose(fld.values.imag, 0.0, rtol=0, atol=0)


# ---------------------------------------------------------------------------
# stepping scheme


def test_solver_trajectory_satisfies_equation():
    # Five consecutive numerical snapshots differenced in time must satisfy
    # the PDE itself, independent of any closed-form solution.
    grid = rw.SimGrid(length=80.0, nx=1024, dt=1e-3, t_max=1.0)
    fld = rw.evolve_to(rw.gaussian_initial(grid, rw.GaussParams(eps=20.0, mu=2.0)), grid)
    snaps = [fld]
    for _ in range(4):
        snaps.append(rw.step_if_rk4(snaps[-1], grid))
    u = [s.values for s in snaps]
    h = grid.dt
    u_t = (u[0] - 8.0 * u[1] + 8.0 * u[3] - u[4]) / (12.0 * h)
    mid = u[2]
    u_xx = np.fft.ifft(-(grid.k ** 2) * np.fft.fft(mid))
    residual = 1j * u_t + 0.5 * u_xx + np.abs(mid) ** 2 * mid
    assert np.max(np.abs(residual)) < 1e-9


def test_plane_wave_evolves_exactly():
    # u = A exp(i A^2 t) has no dispersion, so the scheme integrates it to
    # round-off regardless of step count.
    grid = rw.SimGrid(length=80.0, nx=256, dt=1e-3, t_max=2.0)
    amp = 1.3
    fld0 = rw.ComplexField(values=np.full(grid.nx, amp, dtype=np.complex128))
    fld1 = rw.evolve_to(fld0, grid)
    exact = amp * np.exp(1j * amp * amp * grid.t_max)
    assert fld1.t == pytest.approx(2.0)
    assert np.max(np.abs(fld1.values - exact)) < 1e-10


def test_mass_and_energy_conserved():
    grid = rw.auto_grid(mu=2.0, t_max=2.0)
    params = rw.GaussParams(eps=20.0, mu=2.0)
    fld0 = rw.gaussian_initial(grid, params)
    mass0, energy0 = rw.conserved_quantities(fld0, grid)
    fld1 = rw.evolve_to(fld0, grid)
    mass1, energy1 = rw.conserved_quantities(fld1, grid)
    assert abs(mass1 - mass0) / abs(mass0) < 1e-12
    assert abs(energy1 - energy0) / abs(energy0) < 1e-11


def test_conserved_quantities_plane_wave_closed_form():
    # mass = A^2 L, energy = -A^4 L / 2 (the gradient term vanishes)
    grid = rw.SimGrid(length=80.0, nx=256, dt=1e-3, t_max=1.0)
    amp = 1.2
    fld = rw.ComplexField(values=np.full(grid.nx, amp, dtype=np.complex128))
    mass, energy = rw.conserved_quantities(fld, grid)
    assert mass == pytest.approx(amp ** 2 * 80.0, rel=1e-12)
    assert energy == pytest.approx(-(amp ** 4) * 80.0 / 2.0, rel=1e-12)


def test_gaussian_run_stays_even_in_x(gauss_run):
    # Even initial data and a parity-invariant equation: |u(x, t)| = |u(-x, t)|.
    # The instability amplifies round-off, so parity holds to ~1e-8 by t = 15.
    a = gauss_run.a
    nx = a.shape[1]
    mirrored = a[:, (nx - np.arange(nx)) % nx]
    np.testing.assert_allclose(a, mirrored, rtol=0, atol=1e-7)


def test_blow_up_raises():
    # A huge bump stepped with dt far beyond the accuracy range goes
    # non-finite; the stepper must report where, not return garbage.
    grid = rw.SimGrid(length=80.0, nx=64, dt=1.0, t_max=10.0)
    fld = rw.gaussian_initial(grid, rw.GaussParams(eps=0.5, mu=2.0))
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(BlowUpError) as excinfo:
            rw.evolve_to(fld, grid)
    assert 0.0 < excinfo.value.t <= 10.0


def test_step_rejects_mismatched_field():
    grid = rw.SimGrid(length=80.0, nx=256, dt=1e-3, t_max=1.0)
    fld = rw.ComplexField(values=np.ones(128, dtype=np.complex128))
    with pytest.raises(ValidationError):
        rw.step_if_rk4(fld, grid)
    with pytest.raises(ValidationError):
        rw.evolve_to(fld, grid)


# ---------------------------------------------------------------------------
# grid and parameter validation


def test_simgrid_validation():
    good = dict(length=80.0, nx=256, dt=1e-3, t_max=1.0)
    rw.SimGrid(**good)
    with pytest.raises(ValidationError):
        rw.SimGrid(**{**good, "length": 0.0})
    with pytest.raises(ValidationError):
        rw.SimGrid(**{**good, "nx": 255})  # not a power of two
    with pytest.raises(ValidationError):
        rw.SimGrid(**{**good, "dt": -1e-3})
    with pytest.raises(ValidationError):
        rw.SimGrid(**{**good, "dt": 0.2})  # above the dx^2 stability cap
    with pytest.raises(ValidationError):
        rw.SimGrid(**{**good, "t_max": 1.0005})  # not an integer step count


def test_simgrid_derived_quantities():
    grid = rw.SimGrid(length=80.0, nx=256, dt=1e-3, t_max=1.0)
    assert grid.nsteps == 1000
    assert grid.dx == pytest.approx(80.0 / 256)
    assert grid.x[0] == pytest.approx(-40.0)
    assert grid.x[-1] == pytest.approx(40.0 - grid.dx)
    assert grid.x.shape == grid.k.shape == (256,)
    # wavenumbers follow the FFT layout: k[1] = 2 pi / L
    assert grid.k[1] == pytest.approx(2.0 * math.pi / 80.0)


def test_gauss_params_validation():
    rw.GaussParams(eps=20.0, mu=2.0)
    with pytest.raises(ValidationError):
        rw.GaussParams(eps=0.0, mu=2.0)
    with pytest.raises(ValidationError):
        rw.GaussParams(eps=20.0, mu=-1.0)
    with pytest.raises(ValidationError):
        rw.GaussParams(eps=math.inf, mu=2.0)
    with pytest.raises(ValidationError):
        rw.GaussParams(eps=20.0, mu=math.nan)


def test_complex_field_validation():
    with pytest.raises(ValidationError):
        rw.ComplexField(values=np.ones((4, 4), dtype=np.complex128))
    with pytest.raises(ValidationError):
        rw.ComplexField(values=np.array([1.0, np.nan, 2.0]))
    fld = rw.ComplexField(values=np.array([3.0 + 4.0j, 1.0]))
    np.testing.assert_allclose(fld.amplitude, [5.0, 1.0])


def test_amplitude_matrix_validation():
    good = dict(t0=0.0, dt_record=0.5, x0=-2.0, dx=1.0)
    with pytest.raises(ValidationError):
        rw.AmplitudeMatrix(a=np.ones(4), **good)  # 1-D
    with pytest.raises(ValidationError):
        rw.AmplitudeMatrix(a=np.array([[1.0, -0.1]]), **good)  # negative
    with pytest.raises(ValidationError):
        rw.AmplitudeMatrix(a=np.array([[1.0, np.inf]]), **good)
    with pytest.raises(ValidationError):
        rw.AmplitudeMatrix(a=np.ones((2, 2)), t0=0.0, dt_record=0.0, x0=0.0, dx=1.0)


def test_amplitude_matrix_accessors():
    m = rw.AmplitudeMatrix(a=np.ones((3, 4)), t0=1.0, dt_record=0.5, x0=-2.0, dx=1.0)
    assert (m.nt, m.nx) == (3, 4)
    np.testing.assert_allclose(m.times, [1.0, 1.5, 2.0])
    np.testing.assert_allclose(m.xs, [-2.0, -1.0, 0.0, 1.0])
    assert m.time_at(2) == pytest.approx(2.0)
    assert m.x_at(3) == pytest.approx(1.0)


def test_auto_grid_sizing():
    grid = rw.auto_grid(mu=2.0, t_max=15.0)
    assert grid.length == 80.0
    assert grid.nx == 1024
    wide = rw.auto_grid(mu=40.0, t_max=52.0)
    assert wide.length == pytest.approx(4.0 * 52.0 + 8.0 * 40.0)
    assert wide.nx == 8192
    custom = rw.auto_grid(mu=2.0, t_max=15.0, length=100.0, nx=2048)
    assert custom.length == 100.0
    assert custom.nx == 2048


# ---------------------------------------------------------------------------
# recording


def test_evolve_record_shape_and_axes():
    grid = rw.SimGrid(length=80.0, nx=256, dt=1e-3, t_max=5.0)
    fld = rw.gaussian_initial(grid, rw.GaussParams(eps=20.0, mu=2.0))
    m = rw.evolve_record(fld, grid, record_every=25)
    assert m.a.shape == (201, 256)
    assert m.t0 == 0.0
    assert m.dt_record == pytest.approx(0.025)
    assert m.x0 == pytest.approx(-40.0)
    assert m.dx == pytest.approx(grid.dx)
    assert m.times[-1] == pytest.approx(5.0)
    np.testing.assert_allclose(m.a[0], np.abs(fld.values))


def test_evolve_record_requires_divisible_cadence():
    grid = rw.SimGrid(length=80.0, nx=256, dt=1e-3, t_max=5.0)
    fld = rw.gaussian_initial(grid, rw.GaussParams(eps=20.0, mu=2.0))
    with pytest.raises(ValidationError):
        rw.evolve_record(fld, grid, record_every=7)  # 5000 steps, 7 does not divide
    with pytest.raises(ValidationError):
        rw.evolve_record(fld, grid, record_every=0)


def test_boundary_proximity_warning():
    # 2 t_max + 3 mu = 26 exceeds half of length 40: the instability cone
    # reaches the periodic boundary and the run says so.
    m = rw.simulate_gaussian(eps=20.0, mu=2.0, t_max=10.0, length=40.0, nx=512, record_every=100)
    assert any(w["code"] == "boundary_reach" for w in m.warnings)


def test_no_boundary_warning_on_roomy_grid(gauss_run):
    assert gauss_run.warnings == []
    assert gauss_run.params == rw.GaussParams(eps=20.0, mu=2.0)


# ---------------------------------------------------------------------------
# on-disk histories


def _small_matrix():
    rng = np.random.default_rng(7)
    return rw.AmplitudeMatrix(
        a=rng.random((6, 8)),
        t0=0.5,
        dt_record=0.25,
        x0=-4.0,
        dx=1.0,
        params=rw.GaussParams(eps=20.0, mu=2.0),
    )


def test_field_roundtrip_amplitude(tmp_path):
    m = _small_matrix()
    path = tmp_path / "run.rwf"
    rw.write_field(m, path)
    back = rw.read_field(path)
    np.testing.assert_array_equal(back.a, m.a)
    assert back.t0 == m.t0
    assert back.dt_record == m.dt_record
    assert back.x0 == m.x0
    assert back.dx == m.dx
    assert back.params == m.params


def test_field_roundtrip_complex_history(tmp_path):
    rng = np.random.default_rng(8)
    hist = rng.normal(size=(4, 8)) + 1j * rng.normal(size=(4, 8))
    m = rw.AmplitudeMatrix(a=np.abs(hist), t0=0.0, dt_record=0.1, x0=0.0, dx=0.5)
    path = tmp_path / "run.rwf"
    rw.write_field(m, path, complex_history=hist)
    back, hist_back = rw.read_field(path)
    np.testing.assert_array_equal(hist_back, hist)
    np.testing.assert_array_equal(back.a, m.a)
    assert back.params is None  # NaN eps/mu in the header decodes to no params


def test_field_sidecar_metadata(tmp_path):
    m = _small_matrix()
    path = tmp_path / "run.rwf"
    rw.write_field(m, path)
    with open(sidecar_path(path)) as fh:
        meta = json.load(fh)
    assert meta["format"] == "RWF1"
    assert (meta["nt"], meta["nx"]) == (6, 8)
    assert meta["eps"] == 20.0
    assert meta["mu"] == 2.0
    assert meta["payload_kind"] == 0
    assert meta["warnings"] == []


def test_field_header_matches_payload(tmp_path):
    m = _small_matrix()
    path = tmp_path / "run.rwf"
    rw.write_field(m, path)
    hdr = read_header(path)
    assert (hdr["nt"], hdr["nx"]) == (6, 8)
    assert hdr["x0"] == -4.0
    assert hdr["dt_record"] == 0.25


def test_field_rejects_mismatched_complex_history(tmp_path):
    m = _small_matrix()
    hist = np.zeros((2, 8), dtype=np.complex128)
    with pytest.raises(FormatError):
        rw.write_field(m, tmp_path / "run.rwf", complex_history=hist)


def test_field_truncated_payload(tmp_path):
    m = _small_matrix()
    path = tmp_path / "run.rwf"
    rw.write_field(m, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        rw.read_field(path)


def test_field_shorter_than_header(tmp_path):
    path = tmp_path / "stub.rwf"
    path.write_bytes(b"RWF1\x01")
    with pytest.raises(FormatError):
        rw.read_field(path)


def test_field_bad_magic(tmp_path):
    m = _small_matrix()
    path = tmp_path / "run.rwf"
    rw.write_field(m, path)
    raw = bytearray(path.read_bytes())
    raw[0] = ord("X")
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        rw.read_field(path)


def test_field_bad_version(tmp_path):
    m = _small_matrix()
    path = tmp_path / "run.rwf"
    rw.write_field(m, path)
    raw = bytearray(path.read_bytes())
    raw[4] = 0xFF  # version field sits right after the 4-byte magic
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        rw.read_field(path)


def test_field_unknown_payload_kind(tmp_path):
    m = _small_matrix()
    path = tmp_path / "run.rwf"
    rw.write_field(m, path)
    raw = bytearray(path.read_bytes())
    raw[64] = 7  # payload-kind byte closes the 65-byte header
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        rw.read_field(path)
