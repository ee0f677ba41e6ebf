import math

import numpy as np
import pytest

from app.core.fusion_skein import (
    PathAlgebra,
    SkeinSpace,
    boundary_cond_exp,
    build_category,
    canonical_state_psi,
    gluing,
    path_basis,
    skein_duality_report,
    skein_inner,
    skein_modular,
    spherical_trace,
    weight_omega,
)
from app.errors import FusionError

PHI = (1 + math.sqrt(5)) / 2


@pytest.fixture
def fib():
    return build_category("fibonacci")


def test_builtin_categories():
    assert build_category("vec_zn(3)").rank == 3
    assert build_category("vec_z4").rank == 4
    assert build_category("ising").global_dim == pytest.approx(4.0)
    assert build_category("fib").dims[1] == pytest.approx(PHI)
    with pytest.raises(FusionError):
        build_category("haagerup")


def test_explicit_category_gets_perron_frobenius_dims(fib):
    data = fib.to_json()
    data.pop("dims")
    rebuilt = build_category(data)
    assert np.allclose(rebuilt.dims, fib.dims)


def test_missing_unit_in_self_fusion_is_rejected():
    N = np.zeros((2, 2, 2))
    N[0, 0, 0] = N[0, 1, 1] = N[1, 0, 1] = 1
    N[1, 1, 1] = 1
    with pytest.raises(FusionError) as info:
        build_category({"labels": ["1", "a"], "unit": "1", "dual": ["1", "a"], "N": N.tolist(), "dims": [1, 1]})
    assert info.value.code == "INVALID_FUSION_DATA"
    assert info.value.detail["identity"] == "duality"


def test_fibonacci_path_counts(fib):
    alg = PathAlgebra(fib, 3)
    assert alg.multiplicities() == {"1": 5, "tau": 8}
    assert alg.dim == 89
    assert sum(len(ps) for ps in path_basis(fib, 1).values()) == 2
    with pytest.raises(FusionError):
        path_basis(fib, -1)


def test_state_and_weight_on_identity(fib):
    for n in (1, 2, 3):
        one = PathAlgebra(fib, n).identity()
        assert canonical_state_psi(one) == pytest.approx(1.0)
        assert weight_omega(one) == pytest.approx(2.0**n)


def test_psi_of_tau_block(fib):
    alg = PathAlgebra(fib, 1)
    p_tau = alg.matrix_unit(1, 0, 0)
    assert canonical_state_psi(p_tau) == pytest.approx(PHI**2 / fib.global_dim)


def test_analytic_continuation_of_modular_flow(fib):
    alg = PathAlgebra(fib, 2)
    x = alg.sector_element((0, 0), (1, 1))
    moved = skein_modular(fib, 2).sigma_psi(x, -0.5j)
    assert np.max(np.abs(moved.blocks[0])) == pytest.approx(PHI)


def test_modular_spectrum_between_sectors(fib):
    spectrum = skein_modular(fib, 2).spectrum()
    assert spectrum["1,1->tau,tau"] == pytest.approx(PHI**-2)
    assert spectrum["tau,tau->1,1"] == pytest.approx(PHI**2)
    assert spectrum["1,tau->1,tau"] == pytest.approx(1.0)


def test_skein_residuals_are_small(fib, rng):
    residuals = skein_modular(fib, 2).residuals(rng)
    assert max(residuals.values()) < 1e-9


def test_skein_modular_needs_positive_length(fib):
    with pytest.raises(FusionError):
        skein_modular(fib, 0)


def test_boundary_expectation_is_unital(fib, rng):
    E = boundary_cond_exp(fib, 2)
    assert (E(E.algebra.identity()) - E.algebra.previous.identity()).norm() < 1e-9
    x = E.algebra.random_element(rng)
    assert abs(canonical_state_psi(E(x)) - canonical_state_psi(x)) < 1e-9


@pytest.mark.parametrize("name,n", [("fibonacci", 2), ("vec_zn(2)", 2), ("ising", 1)])
def test_skein_duality_report_passes(name, n):
    report = skein_duality_report(build_category(name), n, seed=3)
    assert report.passed, report.residuals
    assert report.residuals["commutant_angle"] < 1e-8


def test_spherical_trace(fib, rng):
    assert spherical_trace(PathAlgebra(fib, 1).identity()) == pytest.approx(1 + PHI)
    alg = PathAlgebra(fib, 2)
    assert spherical_trace(alg.identity()) == pytest.approx(2 + 3 * PHI)
    x, y = alg.random_element(rng), alg.random_element(rng)
    assert spherical_trace(x @ y) == pytest.approx(spherical_trace(y @ x))


def test_weight_density_matches_weight(fib, rng):
    alg = PathAlgebra(fib, 2)
    x = alg.random_element(rng)
    assert np.trace(alg.omega_density() @ alg.to_matrices(x)) == pytest.approx(weight_omega(x))


def test_skein_inner_product(fib, rng):
    alg = PathAlgebra(fib, 2)
    one = alg.identity()
    assert skein_inner(one, one) == pytest.approx(4.0)
    a = alg.sector_element((0, 0), (0, 0))
    b = alg.sector_element((1, 1), (1, 1))
    assert skein_inner(a, b) == 0
    f = alg.random_element(rng)
    assert skein_inner(f, f).real > 0
    assert abs(skein_inner(f, f).imag) < 1e-12


def test_gluing_operators(fib, rng):
    space = SkeinSpace(PathAlgebra(fib, 2))
    alg = space.algebra
    assert np.allclose(space.gluing(alg.identity(), "post"), np.eye(space.dim))
    phi, zeta = alg.random_element(rng), alg.random_element(rng)
    post, pre = gluing(phi, "post"), gluing(zeta, "pre")
    assert np.allclose(post @ pre, pre @ post)
    assert np.allclose(gluing(phi.adjoint(), "post"), post.conj().T)

    x = alg.sector_element((0, 0), (1, 1))
    left = space.gluing(x, "post") @ space.omega
    right = space.gluing(x, "pre") @ space.omega
    assert np.linalg.norm(left) > 0
    assert np.allclose(left, PHI * right)
