import math

import numpy as np
import pytest
from scipy.integrate import quad

from anisolap.geometry import DiskDomain, Mesh2D, PolygonDomain, triangulate
from anisolap.norm_field import EllipseNorm, EuclideanNorm
from anisolap.rearrangement import SampledFunction, xn_norm
from anisolap.solver import (CompatibilityError, DiscreteProblem, SmoothField,
                             UnsupportedTransformError, assemble_energy,
                             assemble_residual_and_hessian, bump_field,
                             energy_estimate_check, gradient_bound_ratio,
                             kazdan_kramer_transform, kk_psi, kk_psi_inv,
                             manufactured_problem, natural_growth_solve, solve,
                             write_solution)
from anisolap.young import PowerSumYoung, PowerYoung

ELLN = EllipseNorm(np.diag([4.0, 1.0]))


def dome_field(amplitude=1.0):
    def val(x):
        x = np.asarray(x, float)
        return amplitude * (1.0 - np.sum(x * x, axis=-1))

    def grad(x):
        x = np.asarray(x, float)
        return -2.0 * amplitude * np.ones(x.shape[:-1])[..., None] * x

    return SmoothField(val, grad)


def radial_gradient_magnitude(p, f0, r):
    """|u'(r)| for the radial power-law problem: from integrating the flux
    balance r |u'|^(p-1) = f0 r^2 / 2."""
    return (f0 * r / 2.0) ** (1.0 / (p - 1.0))


def crisscross_square_mesh(n):
    """[-1, 1]^2 with every cell split into four triangles around its center:
    invariant under both mirror symmetries."""
    xs = np.linspace(-1.0, 1.0, n + 1)
    V = [np.array([x, y]) for y in xs for x in xs]
    centers = {}
    tris = []
    for i in range(n):
        for j in range(n):
            v00 = j * (n + 1) + i
            v10 = v00 + 1
            v01 = v00 + n + 1
            v11 = v01 + 1
            c = len(V)
            V.append(0.25 * (V[v00] + V[v10] + V[v01] + V[v11]))
            tris += [[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]
    V = np.asarray(V)
    T = np.asarray(tris)
    a, b, c = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    flip = (b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0] < 0
    T[flip] = T[flip][:, [0, 2, 1]]
    edges = np.concatenate([T[:, [0, 1]], T[:, [1, 2]], T[:, [2, 0]]])
    key = np.sort(edges, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    be = edges[counts[inv] == 1]
    return Mesh2D(V, T, be, np.unique(be))


class TestRadialOracle:
    def test_flux_balance_by_quadrature(self):
        # independent check of the closed form: r w(r)^(p-1) == int_0^r f0 s ds
        for p in (1.5, 3.0):
            for r in (0.2, 0.7, 1.0):
                w = radial_gradient_magnitude(p, 1.0, r)
                rhs, _ = quad(lambda s: s, 0.0, r)
                assert r * w ** (p - 1.0) == pytest.approx(rhs, rel=1e-12)


class TestAssembly:
    def test_two_triangle_square_matches_cotangent_stiffness(self, rng):
        # hand mesh: unit square cut along the diagonal
        V = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
        T = np.array([[0, 1, 2], [0, 2, 3]])
        be = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
        mesh = Mesh2D(V, T, be, np.unique(be))
        prob = DiscreteProblem(mesh, "dirichlet", np.ones(2), PowerYoung(2.0),
                               EuclideanNorm(2), eps_schedule=(1e-6,))
        u = rng.normal(size=4)
        _, K = assemble_residual_and_hessian(prob, u)
        # oracle: cotangent-weight stiffness assembled entry by entry
        K_hand = np.zeros((4, 4))
        for tri in T:
            pts = V[tri]
            for loc in range(3):
                i, j, k = tri[loc], tri[(loc + 1) % 3], tri[(loc + 2) % 3]
                e1 = V[i] - V[k]
                e2 = V[j] - V[k]
                cot = float(e1 @ e2) / abs(e1[0] * e2[1] - e1[1] * e2[0])
                K_hand[i, j] -= 0.5 * cot
                K_hand[j, i] -= 0.5 * cot
                K_hand[i, i] += 0.5 * cot
                K_hand[j, j] += 0.5 * cot
        assert np.allclose(K.toarray(), K_hand, atol=1e-12)
        load = np.zeros(4)
        for tri, a in zip(T, mesh.areas):
            load[tri] += a / 3.0
        energy_hand = 0.5 * u @ K_hand @ u - load @ u
        assert assemble_energy(prob, u) == pytest.approx(energy_hand, abs=1e-12)

    def test_zero_energy_at_zero(self, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.ones(disk_mesh_16.n_triangles),
                               PowerYoung(3.0), EuclideanNorm(2))
        assert assemble_energy(prob, np.zeros(disk_mesh_16.n_vertices)) == 0.0

    def test_gradient_matches_fd(self, rng):
        dom = PolygonDomain([[0, 0], [1, 0], [1, 1], [0, 1]])
        mesh = triangulate(dom, 0.2)
        prob = DiscreteProblem(mesh, "dirichlet", rng.normal(size=mesh.n_triangles),
                               PowerYoung(3.0), ELLN, eps_schedule=(1e-2,))
        u = rng.normal(size=mesh.n_vertices) * 0.3
        res, _ = assemble_residual_and_hessian(prob, u, eps=1e-2)
        h = 1e-6
        for idx in range(0, mesh.n_vertices, 5):
            e = np.zeros(mesh.n_vertices)
            e[idx] = h
            fd = (assemble_energy(prob, u + e, 1e-2)
                  - assemble_energy(prob, u - e, 1e-2)) / (2 * h)
            assert res[idx] == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_hessian_matches_fd_of_gradient(self, rng):
        dom = PolygonDomain([[0, 0], [1, 0], [1, 1], [0, 1]])
        mesh = triangulate(dom, 0.25)
        prob = DiscreteProblem(mesh, "dirichlet", rng.normal(size=mesh.n_triangles),
                               PowerSumYoung(2.0, 4.0), ELLN, eps_schedule=(1e-2,))
        u = rng.normal(size=mesh.n_vertices) * 0.3
        _, K = assemble_residual_and_hessian(prob, u, eps=1e-2)
        h = 1e-6
        for idx in range(0, mesh.n_vertices, 7):
            e = np.zeros(mesh.n_vertices)
            e[idx] = h
            r1, _ = assemble_residual_and_hessian(prob, u + e, eps=1e-2)
            r2, _ = assemble_residual_and_hessian(prob, u - e, eps=1e-2)
            fd = (r1 - r2) / (2 * h)
            col = K[:, idx].toarray().ravel()
            assert np.allclose(col, fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())

    def test_hessian_spd_on_constrained_subspace(self, rng, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.ones(disk_mesh_16.n_triangles),
                               PowerYoung(3.0), EuclideanNorm(2), eps_schedule=(1e-3,))
        u = rng.normal(size=disk_mesh_16.n_vertices) * 0.2
        _, K = assemble_residual_and_hessian(prob, u, eps=1e-3)
        free = np.setdiff1d(np.arange(disk_mesh_16.n_vertices),
                            disk_mesh_16.boundary_vertices)
        Kf = K.toarray()[np.ix_(free, free)]
        w = np.linalg.eigvalsh(Kf)
        assert w[0] > 0


class TestSolve:
    def test_laplacian_disk_closed_form(self, disk):
        mesh = triangulate(disk, 1 / 32)
        prob = DiscreteProblem(mesh, "dirichlet", np.ones(mesh.n_triangles),
                               PowerYoung(2.0), EuclideanNorm(2))
        sol = solve(prob)
        r = np.linalg.norm(mesh.vertices, axis=1)
        err = np.max(np.abs(sol.u - (1 - r ** 2) / 4))
        assert err < 0.3 * (1 / 32) ** 2
        assert sol.grad_sup == pytest.approx(0.5, rel=0.02)
        assert sol.residual_norm <= 1e-9 * (1 + np.max(np.abs(prob.f_cells)))

    def test_cubic_disk_radial(self, disk):
        mesh = triangulate(disk, 1 / 32)
        prob = DiscreteProblem(mesh, "dirichlet", np.ones(mesh.n_triangles),
                               PowerYoung(3.0), EuclideanNorm(2))
        sol = solve(prob)
        assert sol.grad_sup == pytest.approx(radial_gradient_magnitude(3.0, 1.0, 1.0),
                                             rel=0.02)

    def test_neumann_odd_solution(self):
        # a mirror-symmetric (criss-cross) grid so that discrete oddness of
        # the solution is exact, not just O(h^2)
        mesh = crisscross_square_mesh(8)
        f = mesh.centroids[:, 0].copy()
        prob = DiscreteProblem(mesh, "neumann", f, PowerYoung(2.0), EuclideanNorm(2))
        sol = solve(prob)
        lumped = np.zeros(mesh.n_vertices)
        np.add.at(lumped, mesh.triangles.ravel(), np.repeat(mesh.areas / 3.0, 3))
        assert abs(np.dot(lumped, sol.u)) < 1e-10
        lookup = {(round(x, 9), round(y, 9)): i
                  for i, (x, y) in enumerate(mesh.vertices)}
        for i, (x, y) in enumerate(mesh.vertices):
            j = lookup[(round(-x, 9), round(y, 9))]
            assert sol.u[i] == pytest.approx(-sol.u[j], abs=1e-8)

    def test_neumann_compatibility_enforced(self, disk_mesh_16):
        with pytest.raises(CompatibilityError):
            DiscreteProblem(disk_mesh_16, "neumann",
                            np.ones(disk_mesh_16.n_triangles),
                            PowerYoung(2.0), EuclideanNorm(2))

    def test_unique_minimizer_from_random_starts(self, rng, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.ones(disk_mesh_16.n_triangles),
                               PowerYoung(3.0), EuclideanNorm(2))
        s1 = solve(prob, x0=rng.normal(size=disk_mesh_16.n_vertices) * 0.1)
        s2 = solve(prob, x0=rng.normal(size=disk_mesh_16.n_vertices) * 0.1)
        assert np.max(np.abs(s1.u - s2.u)) < 1e-8

    def test_continuation_settles(self, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.ones(disk_mesh_16.n_triangles),
                               PowerYoung(3.0), EuclideanNorm(2))
        sol = solve(prob)
        (e1, g1), (e2, g2) = sol.eps_grad_sup[-2:]
        assert abs(g2 - g1) / g2 < 0.005

    def test_energy_below_zero_start(self, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.ones(disk_mesh_16.n_triangles),
                               PowerYoung(3.0), EuclideanNorm(2))
        sol = solve(prob)
        assert sol.energy < 0.0

    def test_nonnegative_for_nonnegative_load(self, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.ones(disk_mesh_16.n_triangles),
                               PowerYoung(2.0), EuclideanNorm(2))
        sol = solve(prob)
        assert float(sol.u.min()) >= -1e-10


class TestManufactured:
    def test_laplacian_bump_recovers_unit_load(self, disk_mesh_16):
        # u = (1 - |x|^2)/4 has -div grad u = 1
        quarter = dome_field(0.25)
        prob = manufactured_problem(quarter, disk_mesh_16, PowerYoung(2.0),
                                    EuclideanNorm(2))
        assert np.allclose(prob.f_cells, 1.0, atol=1e-8)

    def test_quartic_bump_refinement(self, disk):
        errs = []
        for h in (1 / 8, 1 / 16, 1 / 32):
            mesh = triangulate(disk, h)
            prob = manufactured_problem(bump_field(1.0), mesh, PowerYoung(3.0),
                                        EuclideanNorm(2))
            sol = solve(prob)
            ge = bump_field(1.0).grad(mesh.centroids)
            errs.append(float(np.max(np.linalg.norm(sol.tri_grads - ge, axis=1))))
        assert errs[0] > errs[1] > errs[2]

    def test_anisotropic_same_contract(self, disk):
        errs = []
        for h in (1 / 8, 1 / 16):
            mesh = triangulate(disk, h)
            prob = manufactured_problem(bump_field(1.0), mesh, PowerYoung(3.0), ELLN)
            sol = solve(prob)
            ge = bump_field(1.0).grad(mesh.centroids)
            errs.append(float(np.max(np.linalg.norm(sol.tri_grads - ge, axis=1))))
        assert errs[0] > errs[1]

    def test_degenerate_warning(self, disk_mesh_16):
        with pytest.warns(RuntimeWarning, match="near-critical"):
            manufactured_problem(bump_field(1.0), disk_mesh_16, PowerYoung(1.5),
                                 EuclideanNorm(2))


class TestEnergyEstimate:
    def test_zero_load(self, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.zeros(disk_mesh_16.n_triangles),
                               PowerYoung(2.0), EuclideanNorm(2))
        sol = solve(prob)
        lhs, rhs, ratio = energy_estimate_check(sol, prob)
        assert lhs == pytest.approx(0.0, abs=1e-12) and ratio == 0.0

    def test_laplacian_disk_oracle_value(self, disk):
        # oracle: with u = (1 - r^2)/4, int B(|grad u|) = int (r/2)^2/2 dx,
        # computed by radial quadrature; rhs is the conjugate at sqrt(pi)
        lhs_oracle, _ = quad(lambda r: 0.5 * (r / 2) ** 2 * 2 * math.pi * r, 0.0, 1.0)
        rhs_oracle = math.pi / 2
        mesh = triangulate(disk, 1 / 32)
        prob = DiscreteProblem(mesh, "dirichlet", np.ones(mesh.n_triangles),
                               PowerYoung(2.0), EuclideanNorm(2))
        sol = solve(prob)
        lhs, rhs, ratio = energy_estimate_check(sol, prob)
        assert rhs == pytest.approx(rhs_oracle, rel=1e-3)
        assert ratio == pytest.approx(lhs_oracle / rhs_oracle, rel=0.02)

    def test_refinement_stable(self, disk):
        ratios = []
        for h in (1 / 16, 1 / 32):
            mesh = triangulate(disk, h)
            prob = DiscreteProblem(mesh, "dirichlet", np.ones(mesh.n_triangles),
                                   PowerYoung(3.0), EuclideanNorm(2))
            ratios.append(energy_estimate_check(solve(prob), prob)[2])
        assert abs(ratios[0] - ratios[1]) / ratios[1] < 0.05


class TestGradientBoundRatio:
    def test_homogeneity_invariance(self, disk):
        mesh = triangulate(disk, 1 / 32)
        ratios = []
        for s in (1.0, 4.0, 16.0):
            prob = DiscreteProblem(mesh, "dirichlet", s * np.ones(mesh.n_triangles),
                                   PowerYoung(3.0), EuclideanNorm(2))
            ratios.append(gradient_bound_ratio(solve(prob), prob))
        assert max(ratios) - min(ratios) <= 1e-3 * max(ratios)

    def test_concentrating_family_bounded_while_l2_grows(self, disk):
        # the operation-level contract: the ratio stays bounded while the
        # plain L^2 norm of the load blows up
        mesh = triangulate(disk, 1 / 32)
        ratios, l2s = [], []
        for k in (2.0, 4.0, 8.0):
            r = np.linalg.norm(mesh.centroids, axis=1)
            f = np.where(r <= 1 / k, k * k, 0.0)
            prob = DiscreteProblem(mesh, "dirichlet", f, PowerYoung(3.0),
                                   EuclideanNorm(2))
            ratios.append(gradient_bound_ratio(solve(prob), prob))
            l2s.append(math.sqrt(float(np.dot(mesh.areas, f ** 2))))
        assert max(ratios) < 1.0
        assert l2s[-1] > 3.0 * l2s[0]

    def test_zero_load_raises(self, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.zeros(disk_mesh_16.n_triangles),
                               PowerYoung(2.0), EuclideanNorm(2))
        sol = solve(prob)
        with pytest.raises(ValueError):
            gradient_bound_ratio(sol, prob)


class TestKazdanKramer:
    def test_identity_at_zero_kappa(self, rng):
        u = rng.normal(size=30)
        v, inv = kazdan_kramer_transform(u, 0.0, 3.0)
        assert np.array_equal(v, u)
        assert np.allclose(inv(v), u)

    def test_exponential_at_kappa_pminus1(self, rng):
        # kappa = p - 1 collapses to psi(t) = e^t - 1
        p = 3.0
        t = rng.uniform(-1, 1, 50)
        assert np.allclose(kk_psi(t, p - 1.0, p), np.expm1(t), rtol=1e-14)
        assert np.allclose(kk_psi_inv(np.expm1(t), p - 1.0, p), t, rtol=1e-12)

    def test_round_trip(self, rng):
        u = rng.normal(size=100)
        for kappa, p in ((0.7, 3.0), (-0.5, 2.0), (1.3, 1.5)):
            v, inv = kazdan_kramer_transform(u, kappa, p)
            assert np.max(np.abs(inv(v) - u)) < 1e-12


class TestNaturalGrowth:
    def test_kappa_zero_reduces_to_solve(self, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.ones(disk_mesh_16.n_triangles),
                               PowerYoung(3.0), EuclideanNorm(2))
        ng = natural_growth_solve(prob, 0.0)
        sol = solve(prob)
        assert np.array_equal(ng.u, sol.u)

    def test_manufactured_recovery(self, disk):
        p, kappa = 3.0, 0.5
        v_exact = dome_field(0.5)
        errs = []
        for h in (1 / 8, 1 / 16):
            mesh = triangulate(disk, h)
            vprob = manufactured_problem(v_exact, mesh, PowerYoung(p), EuclideanNorm(2))
            u_c = kk_psi_inv(v_exact.value(mesh.centroids), kappa, p)
            prob = DiscreteProblem(mesh, "dirichlet",
                                   np.exp(-kappa * u_c) * vprob.f_cells,
                                   PowerYoung(p), EuclideanNorm(2))
            ng = natural_growth_solve(prob, kappa)
            gu = np.exp(-kappa * u_c / (p - 1))[:, None] * v_exact.grad(mesh.centroids)
            errs.append(float(np.max(np.linalg.norm(ng.tri_grads - gu, axis=1))))
        assert errs[0] > errs[1]

    def test_non_power_rejected(self, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.ones(disk_mesh_16.n_triangles),
                               PowerSumYoung(2.0, 4.0), EuclideanNorm(2))
        with pytest.raises(UnsupportedTransformError):
            natural_growth_solve(prob, 0.5)

    def test_neumann_with_kappa_rejected(self, square2):
        mesh = triangulate(square2, 0.25)
        prob = DiscreteProblem(mesh, "neumann", mesh.centroids[:, 0].copy(),
                               PowerYoung(3.0), EuclideanNorm(2))
        with pytest.raises(UnsupportedTransformError):
            natural_growth_solve(prob, 0.5)


class TestExport:
    def test_write_solution(self, tmp_path, disk_mesh_16):
        prob = DiscreteProblem(disk_mesh_16, "dirichlet",
                               np.ones(disk_mesh_16.n_triangles),
                               PowerYoung(2.0), EuclideanNorm(2))
        sol = solve(prob)
        path = tmp_path / "sol.txt"
        write_solution(sol, disk_mesh_16, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "# anisolap solution v1"
        assert len(lines) == 3 + disk_mesh_16.n_vertices + disk_mesh_16.n_triangles
