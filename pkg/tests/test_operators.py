import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import PDES_2D, PDES_3D, quadrature
from dimbie.kernels import kernel_blocks
from dimbie.operators import (DimContext, OnSurfaceTargetError, apply_naive, assemble_correction_sparse,
                              assemble_far, evaluate_potential, precompute_theta, regularized_operator)
from dimbie.solver import PointSource


def random_density(rng, n, complex_=True):
    v = rng.normal(size=n)
    return v + 1j * rng.normal(size=n) if complex_ else v


@pytest.fixture(scope="module")
def kite():
    return quadrature("kite2d", 6, p=3)


def test_far_zero_coefficients(kite, rng):
    far = assemble_far(PDES_2D["helmholtz"], kite, "V", 0.0, 0.0)
    assert np.all(far.apply(random_density(rng, kite.N)) == 0)


def test_single_patch_far_part_vanishes(rng):
    q = quadrature("circle2d", 1, p=6)
    for family in ("V", "W"):
        far = assemble_far(PDES_2D["laplace"], q, family, 1.0, -1.0, mode="dense")
        assert np.all(far.matrix() == 0)


@pytest.mark.parametrize("pde", [PDES_2D["elastodynamic"], PDES_3D["helmholtz"]], ids=lambda p: f"{p.kind}{p.dim}")
@pytest.mark.parametrize("family", ["V", "W"])
def test_dense_and_matrix_free_far_parts_agree(pde, family, rng):
    q = quadrature("kite2d", 6, p=3) if pde.dim == 2 else quadrature("sphere3d-quadpatch", 6, p=2)
    phi = random_density(rng, q.N * pde.sigma)
    a = assemble_far(pde, q, family, 0.7, 1.3j, mode="dense").apply(phi)
    b = assemble_far(pde, q, family, 0.7, 1.3j, mode="matrix-free").apply(phi)
    assert np.abs(a - b).max() <= 1e-14 * np.abs(a).max()


def test_far_part_self_blocks_are_exactly_zero(kite):
    pde = PDES_2D["elastostatic"]
    far = assemble_far(pde, kite, "W", 1.0, 1.0, mode="dense")
    s = pde.sigma
    for name, mat in far.matrices.items():
        for m in range(kite.n_patches):
            rows = slice(kite.offsets[m] * s, kite.offsets[m + 1] * s)
            assert np.all(mat[rows, rows] == 0), name


def test_theta_single_patch():
    q = quadrature("circle2d", 1, p=6)
    ctx = DimContext.build(PDES_2D["helmholtz"], q)
    assert np.allclose(precompute_theta(ctx, "V"), -0.5 * ctx.B, rtol=0, atol=0)
    assert np.allclose(precompute_theta(ctx, "W"), -0.5 * ctx.C, rtol=0, atol=0)


@pytest.mark.parametrize("family", ["V", "W"])
def test_theta_against_nodewise_sum(kite, family):
    pde = PDES_2D["helmholtz"]
    ctx = DimContext.build(pde, kite)
    theta = precompute_theta(ctx, family)
    assert theta.shape == (kite.N, ctx.sources.L)
    k0, k1 = ("DL", "S") if family == "V" else ("HS", "ADL")
    free = ctx.B if family == "V" else ctx.C
    for i in (0, 7, kite.N - 1):
        J = kite.complement_indices(kite.patch_of[i])
        kb = kernel_blocks(pde, kite.nodes[i], kite.nodes[J], kite.normals[i], kite.normals[J], (k0, k1))
        w = kite.weights[J]
        ref = -0.5 * free[i] - (w * kb[k0][:, 0, 0]) @ ctx.B[J] + (w * kb[k1][:, 0, 0]) @ ctx.C[J]
        assert np.abs(theta[i] - ref).max() <= 1e-13 * np.abs(ref).max()


CASES = [(PDES_2D[k], f) for k in PDES_2D for f in ("V", "W")] + \
        [(PDES_3D[k], f) for k in PDES_3D for f in ("V", "W")]


@pytest.mark.parametrize("pde,family", CASES, ids=[f"{p.kind}{p.dim}-{f}" for p, f in CASES])
def test_split_paths_agree(pde, family, rng):
    q = quadrature("kite2d", 4, p=2) if pde.dim == 2 else quadrature("sphere3d-quadpatch", 6, p=2)
    alpha, beta = 0.8, 0.6 - 0.4j
    op = regularized_operator(pde, q, family, alpha, beta, mode="dense")
    full = op.matrix()
    for _ in range(3):
        phi = random_density(rng, op.size)
        fast = op.apply(phi)
        naive = apply_naive(pde, q, op.ctx.sources, alpha, beta, family, phi)
        scale = np.abs(fast).max()
        assert np.abs(fast - naive).max() <= 1e-12 * scale
        assert np.abs(full @ phi - fast).max() <= 1e-12 * scale
        assert np.abs(op.far.apply(phi) + op.correction_sparse() @ phi - fast).max() <= 1e-12 * scale


def test_zero_density(kite):
    pde = PDES_2D["laplace"]
    op = regularized_operator(pde, kite, "V", 1.0, 0.0)
    assert np.all(op.apply(np.zeros(kite.N)) == 0)
    assert np.all(apply_naive(pde, kite, op.ctx.sources, 1.0, 0.0, "V", np.zeros(kite.N)) == 0)


def test_sparse_pattern_is_block_diagonal(kite):
    op = regularized_operator(PDES_2D["elastostatic"], kite, "V", 1.0, 0.5)
    sp = assemble_correction_sparse(op).tocoo()
    s = 2
    node_r, node_c = sp.row // s, sp.col // s
    assert np.all(kite.patch_of[node_r] == kite.patch_of[node_c])
    expected = sum((np.diff(kite.offsets) * s) ** 2)
    assert sp.nnz == expected


@given(st.floats(-2, 2), st.floats(-2, 2), st.integers(0, 2 ** 16))
def test_linearity(a, b, seed):
    pde = PDES_2D["helmholtz"]
    op = _linearity_op()
    r = np.random.default_rng(seed)
    phi, psi = random_density(r, op.size), random_density(r, op.size)
    lhs = op.apply(a * phi + b * psi)
    rhs = a * op.apply(phi) + b * op.apply(psi)
    assert np.abs(lhs - rhs).max() <= 1e-13 * max(1.0, np.abs(rhs).max())


_CACHE = {}


def _linearity_op():
    if "op" not in _CACHE:
        _CACHE["op"] = regularized_operator(PDES_2D["helmholtz"], quadrature("kite2d", 6, p=3), "W", 1.0, 2.0j)
    return _CACHE["op"]


def test_calderon_constants_laplace_kite():
    q = quadrature("kite2d", 32, p=4)
    ones = np.ones(q.N)
    K = regularized_operator(PDES_2D["laplace"], q, "V", 1.0, 0.0)
    T = regularized_operator(PDES_2D["laplace"], q, "W", 1.0, 0.0, ctx=K.ctx)
    assert np.abs(K.apply(ones) + 0.5).max() <= 1e-6
    assert np.abs(T.apply(ones)).max() <= 1e-4


def test_elastostatic_rigid_rotation():
    pde = PDES_2D["elastostatic"]
    q = quadrature("kite2d", 32, p=4)
    phi = np.column_stack([-q.nodes[:, 1], q.nodes[:, 0]]).reshape(-1)
    K = regularized_operator(pde, q, "V", 1.0, 0.0)
    T = regularized_operator(pde, q, "W", 1.0, 0.0, ctx=K.ctx)
    scale = np.abs(phi).max()
    assert np.abs(K.apply(phi) + 0.5 * phi).max() <= 1e-6 * scale
    assert np.abs(T.apply(phi)).max() <= 1e-4 * scale


def test_single_patch_full_operator_is_the_correction():
    q = quadrature("circle2d", 1, p=24)
    op = regularized_operator(PDES_2D["laplace"], q, "V", 1.0, 0.0, mode="dense")
    out = op.correction_sparse() @ np.ones(q.N)
    assert np.allclose(out, op.apply(np.ones(q.N)), rtol=0, atol=1e-14)
    assert np.abs(out + 0.5).max() <= 1e-6


# -- potentials ---------------------------------------------------------------

def test_potential_reproduces_interior_field():
    pde = PDES_2D["laplace"]
    src = PointSource(pde, np.array([1.0, 1.0]))
    targets = np.array([[0.0, 0.0], [-0.5, 0.3], [0.2, -0.6]])
    errs = []
    for M in (8, 16, 32):
        q = quadrature("kite2d", M, p=3)
        u = src.value(q.nodes).reshape(-1)
        v = src.traction(q.nodes, q.normals).reshape(-1)
        # Green's representation of an interior solution: u = S[v] - D[u]
        got = evaluate_potential(pde, q, u, v, targets, near_regularize=False)
        errs.append(np.abs(got.reshape(-1) - src.value(targets).reshape(-1)).max())
    # at least order p + 1; the integrand is smooth away from the curve
    assert errs[-1] < 1e-5
    assert np.log2(errs[1] / errs[2]) >= 3.5


def test_potential_zero_density(kite):
    out = evaluate_potential(PDES_2D["helmholtz"], kite, np.zeros(kite.N), np.zeros(kite.N), [[0.1, 0.2]])
    assert np.all(out == 0)


def test_potential_on_node_raises(kite):
    with pytest.raises(OnSurfaceTargetError):
        evaluate_potential(PDES_2D["laplace"], kite, np.ones(kite.N), np.ones(kite.N), kite.nodes[:2])


def test_near_field_regularization_helps():
    pde = PDES_2D["laplace"]
    q = quadrature("kite2d", 16, p=4)
    src = PointSource(pde, np.array([1.0, 1.0]))
    u = src.value(q.nodes).reshape(-1)
    v = src.traction(q.nodes, q.normals).reshape(-1)
    targets = q.nodes[::5] - 0.01 * q.normals[::5]
    ref = src.value(targets).reshape(-1)
    plain = evaluate_potential(pde, q, u, v, targets, near_regularize=False).reshape(-1)
    reg = evaluate_potential(pde, q, u, v, targets, near_regularize=True, near_threshold=0.3).reshape(-1)
    assert np.abs(reg - ref).max() * 1e3 < np.abs(plain - ref).max()
