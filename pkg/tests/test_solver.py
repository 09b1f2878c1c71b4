import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special as sp

from conftest import PDES_2D, PDES_3D, quadrature
from dimbie.cli import fit_slope
from dimbie.kernels import PdeKind
from dimbie.operators import DimContext, assemble_far
from dimbie.solver import (LinearMap, PointSource, SolverError, SystemConfig, combined_field, direct_neumann_field,
                           far_field_error, far_field_targets, gmres, greens_identity_errors, plane_p_wave,
                           reference_series, solve_cfie_dirichlet, solve_direct_neumann,
                           solve_elastodynamic_neumann, spectrum)


def dense_map(A, shift=0.0):
    return LinearMap(lambda x: A @ x, A.shape[0], shift, np.diag(A).copy())


# -- GMRES ---------------------------------------------------------------------

def test_gmres_identity_one_iteration(rng):
    b = rng.normal(size=30) + 1j * rng.normal(size=30)
    x, rep = gmres(LinearMap(lambda v: 0 * v, 30, 1.0), b, tol=1e-12)
    assert rep.iterations == 1 and rep.converged
    assert np.allclose(x, b, rtol=0, atol=1e-13)


def test_gmres_clustered_spectrum(rng):
    n = 200
    A = 0.5 * np.eye(n) + 0.02 * rng.normal(size=(n, n)) / np.sqrt(n)
    b = rng.normal(size=n)
    x, rep = gmres(dense_map(A), b, tol=1e-12)
    assert rep.converged and rep.iterations < 20
    assert np.linalg.norm(A @ x - b) <= 1e-11 * np.linalg.norm(b)
    assert rep.residual <= 1e-12


def test_gmres_restart_and_diagonal_preconditioning(rng):
    n = 80
    D = np.diag(np.linspace(1, 50, n))
    A = D + 0.1 * rng.normal(size=(n, n))
    b = rng.normal(size=n)
    x1, r1 = gmres(dense_map(A), b, tol=1e-10, restart=10, max_iter=2000)
    x2, r2 = gmres(dense_map(A), b, tol=1e-10, precond="diagonal")
    assert r1.converged and r2.converged
    for x in (x1, x2):
        assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)
    assert r2.iterations < r1.iterations


def test_gmres_failure_report_and_raise(rng):
    n = 60
    A = rng.normal(size=(n, n))
    b = rng.normal(size=n)
    _, rep = gmres(dense_map(A), b, tol=1e-12, max_iter=5)
    assert not rep.converged and rep.iterations == 5 and rep.residual > 1e-12
    with pytest.raises(SolverError):
        gmres(dense_map(A), b, tol=1e-12, max_iter=5, raise_on_failure=True)


def test_gmres_zero_rhs_and_bad_preconditioner():
    x, rep = gmres(LinearMap(lambda v: v, 5), np.zeros(5))
    assert np.all(x == 0) and rep.iterations == 0 and rep.converged
    with pytest.raises(ValueError, match="preconditioner"):
        gmres(LinearMap(lambda v: v, 5), np.ones(5), precond="ilu")
    with pytest.raises(ValueError, match="diagonal"):
        gmres(lambda v: v, np.ones(5), precond="diagonal")


def test_gmres_initial_guess(rng):
    n = 40
    A = np.eye(n) + 0.1 * rng.normal(size=(n, n))
    b = rng.normal(size=n)
    x = np.linalg.solve(A, b)
    _, rep = gmres(dense_map(A), b, tol=1e-10, x0=x)
    assert rep.iterations == 0


@given(st.integers(0, 2 ** 32 - 1))
def test_linear_map_linearity(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(12, 12))
    op = dense_map(A, shift=0.5)
    x, y = rng.normal(size=12), rng.normal(size=12)
    a, b = rng.normal(size=2)
    lhs = op(a * x + b * y)
    assert np.abs(lhs - a * op(x) - b * op(y)).max() <= 1e-13 * max(1.0, np.abs(lhs).max())


# -- formulations ----------------------------------------------------------------

@pytest.fixture(scope="module")
def kite():
    return quadrature("kite2d", 16, p=4)


def test_zero_data_gives_zero_density(kite):
    helm = PdeKind.helmholtz(2, np.pi)
    phi, rep, _ = solve_cfie_dirichlet(helm, kite, np.zeros(kite.N))
    assert np.all(phi == 0) and rep.iterations == 0
    phi, _ = solve_direct_neumann(PdeKind.helmholtz(2, 1.0), kite, np.zeros(kite.N))
    assert np.all(phi == 0)
    el = PDES_2D["elastodynamic"]
    phi, _, _ = solve_elastodynamic_neumann(el, kite, np.zeros(2 * kite.N))
    assert np.all(phi == 0)


def test_formulation_preconditions(kite):
    with pytest.raises(ValueError):
        solve_cfie_dirichlet(PDES_2D["laplace"], kite, np.ones(kite.N))
    with pytest.raises(ValueError):
        solve_elastodynamic_neumann(PDES_2D["elastostatic"], kite, np.ones(2 * kite.N))


def test_report_echoes_configuration(kite):
    helm = PdeKind.helmholtz(2, np.pi)
    src = PointSource(helm, np.array([0.1, 0.2]))
    _, rep, _ = solve_cfie_dirichlet(helm, kite, src.value(kite.nodes), SystemConfig(tol=1e-8))
    assert rep.converged and rep.residual <= 1e-8
    for key in ("N", "M", "L", "t", "tol"):
        assert key in rep.config
    assert rep.config["N"] == kite.N and rep.config["M"] == 16


def test_manufactured_density_round_trip(kite, rng):
    helm = PdeKind.helmholtz(2, np.pi)
    cfg = SystemConfig(tol=1e-13)
    ctx = DimContext.build(helm, kite)
    _, _, op = solve_cfie_dirichlet(helm, kite, np.ones(kite.N), cfg, ctx)
    phi = rng.normal(size=kite.N) + 1j * rng.normal(size=kite.N)
    f = 0.5 * phi + op.apply(phi)
    got, rep, _ = solve_cfie_dirichlet(helm, kite, f, cfg, ctx)
    assert np.abs(got - phi).max() <= 1e-8 * np.abs(phi).max()


def test_cfie_point_source_field(kite):
    helm = PdeKind.helmholtz(2, np.pi)
    src = PointSource(helm, np.array([0.1, 0.2]))
    phi, rep, _ = solve_cfie_dirichlet(helm, kite, src.value(kite.nodes), SystemConfig(tol=1e-12))
    tg = far_field_targets(2)
    err = far_field_error(combined_field(helm, kite, phi, tg, helm.k), src.value(tg))
    assert err < 1e-3
    assert 5 <= rep.iterations <= 60


def test_direct_neumann_recovers_dirichlet_trace(kite):
    helm = PdeKind.helmholtz(2, 1.0)
    src = PointSource(helm, np.array([0.1, 0.2]))
    g = src.traction(kite.nodes, kite.normals)
    phi, rep = solve_direct_neumann(helm, kite, g, SystemConfig(tol=1e-12))
    u = src.value(kite.nodes).reshape(-1)
    assert np.abs(phi - u).max() / np.abs(u).max() < 1e-3
    tg = far_field_targets(2)
    assert far_field_error(direct_neumann_field(helm, kite, phi, g, tg), src.value(tg)) < 1e-3


def test_laplace_direct_neumann_warns(caplog):
    q = quadrature("circle2d", 4, p=3)
    src = PointSource(PDES_2D["laplace"], np.array([0.1, 0.0]))
    with caplog.at_level("WARNING"):
        solve_direct_neumann(PDES_2D["laplace"], q, src.traction(q.nodes, q.normals), SystemConfig(tol=1e-6))
    assert "singular" in caplog.text


def test_elastodynamic_neumann_plane_wave_converges():
    pde = PdeKind.elastodynamic(2, 2.0, 1.0, 1.0, np.pi)
    q = quadrature("circle2d", 8, p=4)
    _, trac = plane_p_wave(pde, [1.0, 0.0])
    h = -trac(q.nodes, q.normals).reshape(-1)
    phi, rep, _ = solve_elastodynamic_neumann(pde, q, h, SystemConfig(tol=1e-6))
    assert rep.converged and rep.iterations < 100
    assert np.isfinite(phi).all()


def test_gmres_iterations_mesh_independent():
    helm = PdeKind.helmholtz(2, np.pi)
    src = PointSource(helm, np.array([0.1, 0.2]))
    its = []
    for M in (32, 64, 128):
        q = quadrature("kite2d", M, p=3)
        _, rep, _ = solve_cfie_dirichlet(helm, q, src.value(q.nodes), SystemConfig(tol=1e-12))
        its.append(rep.iterations)
    assert max(its) <= 1.5 * min(its)


# -- Green's identities ----------------------------------------------------------

def test_greens_identity_orders_laplace_kite():
    pde = PDES_2D["laplace"]
    src = PointSource(pde, np.array([1.0, 1.0]))
    Ms, errs = [8, 16, 32, 64], []
    for M in Ms:
        q = quadrature("kite2d", M, p=3)
        errs.append(greens_identity_errors(pde, q, src))
    errs = np.array(errs)
    h = 1.0 / np.array(Ms)
    assert fit_slope(h, errs[:, 0]) >= 3.5
    assert fit_slope(h, errs[:, 1]) >= 1.5


def test_greens_identity_pointwise(kite):
    pde = PDES_2D["helmholtz"]
    src = PointSource(pde, np.array([1.0, 1.0]))
    e1, e2 = greens_identity_errors(pde, kite, src, pointwise=True)
    assert e1.shape == (kite.N,) and e2.shape == (kite.N,)
    assert np.isclose(e1.max(), greens_identity_errors(pde, kite, src)[0])


def test_ablation_without_correction_loses_order():
    pde = PDES_2D["laplace"]
    src = PointSource(pde, np.array([1.0, 1.0]))
    Ms, errs = [8, 16, 32, 64], []
    for M in Ms:
        q = quadrature("kite2d", M, p=3)
        u, v = src.value(q.nodes), src.traction(q.nodes, q.normals)
        # far parts only: self-patch blocks are zeroed and nothing restores them
        ku = assemble_far(pde, q, "V", 1.0, 0.0).apply(u)
        sv = assemble_far(pde, q, "V", 0.0, -1.0).apply(v)
        errs.append(np.abs(2 * (sv - ku) - u).max() / np.abs(u).max())
    slope = fit_slope(1.0 / np.array(Ms), np.array(errs))
    assert slope < 1.5


# -- reference solutions -----------------------------------------------------------

@pytest.mark.parametrize("kind,k", [("circle-series", 2 * np.pi), ("circle-series", 0.3),
                                    ("sphere-series", np.pi), ("sphere-series", 0.3)])
def test_series_boundary_condition(kind, k):
    ref = reference_series(kind, k)
    dim = 2 if kind == "circle-series" else 3
    r = far_field_targets(dim, 200, radius=1.0)
    assert np.abs(ref.incident(r) + ref.scattered(r)).max() <= 1e-10


@pytest.mark.parametrize("kind", ["circle-series", "sphere-series"])
def test_series_symmetric_about_incidence_axis(kind):
    ref = reference_series(kind, 3.0)
    dim = 2 if kind == "circle-series" else 3
    r = far_field_targets(dim, 50, radius=2.5)
    flip = r * np.r_[1.0, -np.ones(dim - 1)]
    assert np.abs(ref.scattered(r) - ref.scattered(flip)).max() <= 1e-12 * np.abs(ref.scattered(r)).max()


def test_sphere_series_low_frequency_limit():
    ref = reference_series("sphere-series", 1e-4)
    r = far_field_targets(3, 30, radius=3.0)
    # a grounded unit sphere in a unit potential: u_s -> -a/|r|
    assert np.abs(ref.scattered(r) + 1 / 3.0).max() < 1e-3


def test_series_tail_below_threshold():
    ref = reference_series("circle-series", 2 * np.pi)
    coef_next = abs(sp.jv(ref.order + 1, 2 * np.pi) / sp.hankel1(ref.order + 1, 2 * np.pi))
    assert coef_next < 1e-12


def test_spherical_bessel_wronskian():
    z = np.linspace(0.5, 40, 50)
    for n in range(0, 30, 3):
        w = sp.spherical_jn(n, z) * sp.spherical_yn(n, z, derivative=True) - \
            sp.spherical_jn(n, z, derivative=True) * sp.spherical_yn(n, z)
        assert np.allclose(w * z ** 2, 1.0, rtol=1e-10)


def test_series_errors():
    with pytest.raises(ValueError):
        reference_series("ellipse-series", 1.0)
    with pytest.raises(ValueError):
        reference_series("circle-series", 0.0)


# -- metrics and spectra ------------------------------------------------------------

def test_far_field_error_trivial(rng):
    u = rng.normal(size=100) + 1j * rng.normal(size=100)
    assert far_field_error(u, u) == 0
    assert far_field_error(2 * u, u) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("dim", [2, 3])
def test_far_field_targets(dim):
    tg = far_field_targets(dim)
    assert tg.shape == (100, dim)
    assert np.allclose(np.linalg.norm(tg, axis=1), 5.0)
    assert len(np.unique(tg.round(12), axis=0)) == 100


def test_spectrum_trivial_cases(rng):
    assert np.allclose(spectrum(np.eye(10)), 1.0)
    ev = np.sort_complex(spectrum(rng.normal(size=(30, 30))))
    assert np.allclose(np.sort_complex(ev.conj()), ev)
    with pytest.raises(ValueError, match="budget"):
        spectrum(np.zeros((11, 11)), budget=10)


def test_cfie_spectrum_clusters():
    helm = PdeKind.helmholtz(2, 2 * np.pi)
    q = quadrature("circle2d", 64, p=4)
    _, _, op = solve_cfie_dirichlet(helm, q, np.ones(q.N))
    ev = spectrum(0.5 * np.eye(q.N) + op.matrix())
    dist = np.abs(ev - 0.5)
    assert np.mean(dist < 0.5) >= 0.9 and np.median(dist) < 0.1


def test_plane_p_wave_traction_is_consistent():
    pde = PDES_3D["elastodynamic"]
    val, trac = plane_p_wave(pde, [0.0, 0.6, 0.8])
    r = np.array([[0.3, -0.2, 0.5]])
    n = np.array([[0.0, 0.0, 1.0]])
    d = np.array([0.0, 0.6, 0.8])
    ph = np.exp(1j * pde.k_L * r @ d)
    # n = e_z: traction = lambda div u n + mu (grad u + grad u^T) n
    grad = 1j * pde.k_L * ph * np.outer(d, d)
    expected = pde.lam * np.trace(grad) * n[0] + pde.mu * (grad + grad.T) @ n[0]
    assert np.allclose(trac(r, n)[0], expected)
    assert np.allclose(val(r)[0], ph * d)
