#include "quasilin/errors.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace quasilin;

namespace {

const Complex I{0.0, 1.0};

Eigen::MatrixXd diag2(double a, double b) {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(2, 2);
    d(0, 0) = a;
    d(1, 1) = b;
    return d;
}

CouplingParams coupling(const Eigen::MatrixXd& m, std::vector<Eigen::MatrixXd> r) { return {m, std::move(r)}; }

Eigen::MatrixXd linear_coefficients(const PolyVector& v) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v.algebra().dimension()));
    for (std::size_t p = 0; p < v.size(); ++p) out.row(static_cast<Eigen::Index>(p)) = affine_parts(v[p]).linear.real();
    return out;
}

}  // namespace

TEST_CASE("vacuum Ito matrix") {
    const ItoMatrix w = vacuum_ito(2);
    CHECK(w.omega()(0, 0) == Complex(0.5));
    CHECK(w.omega()(0, 1) == 0.5 * I);
    CHECK(w.omega()(1, 0) == -0.5 * I);
    CHECK(w.v().isApprox(Eigen::MatrixXd::Identity(2, 2) / 2.0));
    CHECK(vacuum_ito(4).j() == CcrMatrix::canonical(4).matrix());
    CHECK_THROWS_AS(vacuum_ito(3), std::invalid_argument);
    CHECK_THROWS_AS(vacuum_ito(0), std::invalid_argument);
}

TEST_CASE("Ito matrix validation") {
    Eigen::MatrixXcd not_herm = Eigen::MatrixXcd::Identity(2, 2);
    not_herm(0, 1) = 1.0;
    CHECK_THROWS_AS(ItoMatrix{not_herm}, std::invalid_argument);
    Eigen::MatrixXcd not_psd = Eigen::MatrixXcd::Identity(2, 2);
    not_psd(0, 0) = -1.0;
    CHECK_THROWS_AS(ItoMatrix{not_psd}, std::invalid_argument);
    const ItoMatrix ok(vacuum_ito(2).omega());
    CHECK(ok.j()(0, 1) == 1.0);
}

TEST_CASE("coupling operators") {
    const WeylAlgebra alg{CcrMatrix::canonical(2)};
    const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 2);

    const Eigen::MatrixXd m = (Eigen::MatrixXd(1, 2) << 1.0, -2.0).finished();
    const PolyVector lin = coupling_vector(coupling(m, {z}), alg);
    CHECK(lin[0].approx_equal(alg.generator(0) - 2.0 * alg.generator(1), 0.0));

    const PolyVector quad = coupling_vector(coupling(Eigen::MatrixXd::Zero(1, 2), {Eigen::MatrixXd::Identity(2, 2)}), alg);
    CHECK(quad[0].approx_equal(0.5 * (alg.word({0, 0}) + alg.word({1, 1})), 1e-15));

    const PolyVector mixed = coupling_vector(coupling((Eigen::MatrixXd(1, 2) << 1.0, 0.0).finished(), {diag2(1, 0)}), alg);
    CHECK(mixed[0].approx_equal(alg.generator(0) + 0.5 * alg.word({0, 0}), 1e-15));

    Eigen::MatrixXd asym = z;
    asym(0, 1) = 1.0;
    CHECK_THROWS_AS(coupling_vector(coupling(m, {asym}), alg), std::invalid_argument);
}

TEST_CASE("coupling entries are self-adjoint") {
    qtest::Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const SystemParams p = qtest::random_broken_params(rng, 4);
        const WeylAlgebra alg{p.theta};
        const PolyVector h = coupling_vector(p.coupling, alg);
        for (const auto& hj : h) CHECK(adjoint(hj).approx_equal(hj, 1e-12));
    }
}

TEST_CASE("dispersion matches the symbolic commutator") {
    qtest::Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const SystemParams p = trial % 2 ? qtest::random_broken_params(rng, 2) : qtest::random_broken_params(rng, 4);
        const WeylAlgebra alg{p.theta};
        const PolyMatrix g = dispersion(p.coupling, alg);
        CHECK(g.approx_equal(dispersion_from_coupling(coupling_vector(p.coupling, alg)), 1e-10));
    }
    const SystemParams lin = qtest::random_linear_params(rng, 2, 2);
    const WeylAlgebra alg{lin.theta};
    const PolyMatrix g = dispersion(lin.coupling, alg);
    const Eigen::MatrixXd b = lin.theta.matrix() * lin.coupling.m_mat.transpose();
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(g(i, j).degree() == 0);
            CHECK(std::abs(g(i, j).coefficient(Monomial{}) - b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) < 1e-14);
        }
    const WeylAlgebra commutative{CcrMatrix::zero(2)};
    CHECK(dispersion(lin.coupling, commutative).max_abs_coefficient() == 0.0);
}

TEST_CASE("dispersion column evaluated against Theta (M_k^T + R_k X)") {
    // n = m = 2, theta_12 = 1, M = I, R_1 = diag(1, 0), R_2 = 0
    const WeylAlgebra alg{CcrMatrix::canonical(2)};
    const CouplingParams cp = coupling(Eigen::MatrixXd::Identity(2, 2), {diag2(1, 0), Eigen::MatrixXd::Zero(2, 2)});
    const PolyMatrix g = dispersion(cp, alg);
    const Eigen::MatrixXd theta = CcrMatrix::canonical(2).matrix();
    qtest::Rng rng(3);
    for (int s = 0; s < 5; ++s) {
        const Eigen::VectorXd x = qtest::random_matrix(rng, 2, 1);
        const Eigen::VectorXd expected = theta * (Eigen::VectorXd::Unit(2, 0) + diag2(1, 0) * x);
        for (std::size_t p = 0; p < 2; ++p) {
            const AffineParts a = affine_parts(g(p, 0));
            CHECK(a.is_affine());
            const double value = (a.constant + (a.linear.transpose() * x.cast<Complex>()).value()).real();
            CHECK(value == doctest::Approx(expected(static_cast<Eigen::Index>(p))));
        }
    }
}

TEST_CASE("GKSL decoherence vector") {
    qtest::Rng rng(4);
    const SystemParams lin = qtest::random_linear_params(rng, 2, 2);
    const WeylAlgebra alg{lin.theta};
    const PolyVector h = coupling_vector(lin.coupling, alg);
    const PolyVector l = gksl_direct(h, lin.omega);
    const Eigen::MatrixXd expected =
        lin.theta.matrix() * lin.coupling.m_mat.transpose() * lin.omega.j() * lin.coupling.m_mat / 2.0;
    CHECK((linear_coefficients(l) - expected).cwiseAbs().maxCoeff() < 1e-12);
    for (const auto& lp : l) CHECK(affine_parts(lp).is_affine());
    CHECK(gksl_lemma1(h, dispersion(lin.coupling, alg), lin.omega).approx_equal(l, 1e-12));

    const PolyVector zero(alg, 2);
    CHECK(gksl_direct(zero, lin.omega).max_abs_coefficient() == 0.0);
    CHECK(gksl_lemma1(zero, PolyMatrix(alg, 2, 2), lin.omega).max_abs_coefficient() == 0.0);
}

TEST_CASE("GKSL leading quadratic term for the admissible family") {
    qtest::Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const SystemParams p = qtest::random_admissible_params(rng, 4);
        const WeylAlgebra alg{p.theta};
        const PolyVector l = gksl_direct(coupling_vector(p.coupling, alg), p.omega);
        const PolyVector lead = theta_yjm_x(p.coupling, alg, p.omega.j());
        for (std::size_t k = 0; k < l.size(); ++k) {
            CHECK(l[k].degree() <= 2);
            CHECK(l[k].homogeneous_part(2).approx_equal(0.25 * lead[k].homogeneous_part(2), 1e-10));
        }
    }
}

TEST_CASE("GKSL two-path equality on random couplings") {
    qtest::Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        SystemParams p = trial % 3 == 0 ? qtest::random_admissible_params(rng, 2) : qtest::random_broken_params(rng, 2);
        const ItoMatrix w = qtest::random_ito(rng, 2);
        const WeylAlgebra alg{p.theta};
        const PolyVector h = coupling_vector(p.coupling, alg);
        CHECK(gksl_direct(h, w).approx_equal(gksl_lemma1(h, dispersion(p.coupling, alg), w), 1e-10));
    }
}

TEST_CASE("realizability operators") {
    qtest::Rng rng(7);
    const Eigen::MatrixXd j = vacuum_ito(2).j();
    const SystemParams lin = qtest::random_linear_params(rng, 2, 2);
    const Eigen::VectorXd u = qtest::random_matrix(rng, 2, 1);
    const Eigen::MatrixXd t = qtest::random_matrix(rng, 2, 2);
    CHECK(op_m(u, lin.coupling, lin.theta, j).isZero(0.0));
    CHECK(op_e(u, lin.coupling, lin.theta, Eigen::MatrixXd::Identity(2, 2)).isZero(0.0));
    CHECK(op_r(t, lin.coupling, lin.theta, j).isZero(0.0));
    CHECK(op_v(t, lin.coupling, lin.theta, Eigen::MatrixXd::Identity(2, 2)).isZero(0.0));

    const SystemParams p = qtest::random_broken_params(rng, 4);
    const Eigen::MatrixXd th = p.theta.matrix();
    const Eigen::MatrixXd t4 = qtest::random_matrix(rng, 4, 4);
    const auto& r = p.coupling.r_list;
    const Eigen::MatrixXd two_channel = th * (r[0] * t4 * r[1] - r[1] * t4 * r[0]) * th;
    CHECK((op_r(t4, p.coupling, p.theta, j) - two_channel).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((op_r(t4, p.coupling, p.theta, j) - qtest::ref_op_r(t4, r, th, j)).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::MatrixXd v_vac = vacuum_ito(2).v();
    const Eigen::MatrixXd expected_v = 0.5 * th * (r[0] * th * r[0] + r[1] * th * r[1]) * th;
    CHECK((op_v(th, p.coupling, p.theta, v_vac) - expected_v).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::MatrixXd t5 = qtest::random_matrix(rng, 4, 4);
    CHECK((op_r(2.0 * t4 - t5, p.coupling, p.theta, j) -
           (2.0 * op_r(t4, p.coupling, p.theta, j) - op_r(t5, p.coupling, p.theta, j)))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
}

TEST_CASE("check_realizability") {
    const CcrMatrix theta = CcrMatrix::canonical(2);
    const ItoMatrix vac = vacuum_ito(2);
    const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(2, 2);

    const RealizabilityReport lin = check_realizability(coupling(Eigen::MatrixXd::Identity(2, 2), {z, z}), theta, vac);
    CHECK(lin.passed());
    CHECK(lin.m_op_zero.max_residual == 0.0);
    CHECK(lin.r_op_zero_sym.max_residual == 0.0);
    CHECK(lin.kron_test_residual == 0.0);
    CHECK(lin.phi_symmetry_residuals.size() == 2);
    CHECK_FALSE(lin.pr_residual.has_value());

    // R_1 = diag(1,0), R_2 = diag(0,1): R(I) vanishes, R(E12 + E21) = -Theta.
    const CouplingParams broken = coupling(Eigen::MatrixXd::Zero(2, 2), {diag2(1, 0), diag2(0, 1)});
    const RealizabilityReport rep = check_realizability(broken, theta, vac);
    CHECK_FALSE(rep.passed());
    CHECK_FALSE(rep.r_op_zero_sym.passed);
    CHECK(rep.r_op_zero_sym.max_residual == doctest::Approx(1.0));
    CHECK(op_r(Eigen::MatrixXd::Identity(2, 2), broken, theta, vac.j()).isZero(0.0));
    const Eigen::MatrixXd off = (Eigen::MatrixXd(2, 2) << 0, 1, 1, 0).finished();
    CHECK(op_r(off, broken, theta, vac.j()).isApprox(-theta.matrix()));
    CHECK(rep.kron_test_residual > 0.0);

    qtest::Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = trial % 2 ? 2 : 4;
        const SystemParams p = qtest::random_admissible_params(rng, n);
        const RealizabilityReport r = check_realizability(p.coupling, p.theta, p.omega);
        CHECK(r.passed());
        for (double s : r.phi_symmetry_residuals) CHECK(s < 1e-9);
        const Eigen::MatrixXd t = qtest::random_matrix(rng, static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        CHECK(op_r(t, p.coupling, p.theta, p.omega.j()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(op_r(p.theta.matrix(), p.coupling, p.theta, p.omega.j()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("singular theta skips the Phi symmetry residuals") {
    const Eigen::MatrixXd z = Eigen::MatrixXd::Zero(3, 3);
    const Eigen::MatrixXd m = Eigen::MatrixXd::Ones(2, 3);
    qtest::Rng rng(9);
    const CcrMatrix theta(qtest::random_antisymmetric(rng, 3));
    const RealizabilityReport rep = check_realizability(coupling(m, {z, z}), theta, vacuum_ito(2));
    CHECK(rep.passed());
    CHECK(rep.phi_symmetry_residuals.empty());
}

TEST_CASE("admissible family construction") {
    AdmissibleFamilyParams p;
    p.e = Eigen::VectorXd::Unit(2, 0);
    p.r = 1.0;
    p.c = 0.0;
    p.lambda = 1.0;
    p.m1 = (Eigen::RowVectorXd(2) << 1.0, 0.0).finished();
    const CouplingParams cp = admissible_family(2, p);
    CHECK(cp.r_list[0] == diag2(1, 0));
    CHECK(cp.r_list[1].isZero(0.0));
    CHECK(cp.m_mat == (Eigen::MatrixXd(2, 2) << 1, 0, 1, 0).finished());
    CHECK(check_realizability(cp, CcrMatrix::canonical(2), vacuum_ito(2)).passed());

    p.r = 0.0;
    CHECK(admissible_family(2, p).is_linear());
    CHECK_THROWS_AS(admissible_family(3, p), std::invalid_argument);
}

TEST_CASE("cubic Hamiltonian") {
    qtest::Rng rng(10);
    const SystemParams lin = qtest::random_linear_params(rng, 2, 2);
    const WeylAlgebra alg{lin.theta};
    const WeylPoly h = cubic_hamiltonian(lin.hamiltonian, lin.coupling, alg, lin.omega);
    const WeylPoly expected = linear_form(alg, lin.hamiltonian.gamma.cast<Complex>()) +
                              0.5 * quadratic_form(alg, lin.hamiltonian.r0.cast<Complex>());
    CHECK(h.approx_equal(expected, 1e-14));

    for (int trial = 0; trial < 5; ++trial) {
        SystemParams p = qtest::random_admissible_params(rng, 4);
        const WeylAlgebra a4{p.theta};
        CHECK(adjoint(cubic_hamiltonian(p.hamiltonian, p.coupling, a4, p.omega)).approx_equal(
            cubic_hamiltonian(p.hamiltonian, p.coupling, a4, p.omega), 1e-12));
        p.hamiltonian.gamma.setZero();
        p.hamiltonian.r0.setZero();
        const WeylPoly pure = cubic_hamiltonian(p.hamiltonian, p.coupling, a4, p.omega);
        CHECK(pure.approx_equal(-1.0 / 12.0 * delta_polynomial(p.coupling, a4, p.omega.j()), 1e-14));
        CHECK(pure.degree() == 3);
        CHECK(pure.homogeneous_part(2).max_abs_coefficient() == 0.0);
        CHECK(pure.homogeneous_part(0).max_abs_coefficient() == 0.0);
    }

    const SystemParams broken = qtest::random_broken_params(rng, 2);
    CHECK_THROWS_AS(cubic_hamiltonian(broken.hamiltonian, broken.coupling, WeylAlgebra{broken.theta}, broken.omega),
                    RealizabilityError);
    SystemParams adm = qtest::random_admissible_params(rng, 2);
    const WeylAlgebra singular{CcrMatrix::zero(2)};
    CHECK_THROWS_AS(cubic_hamiltonian(adm.hamiltonian, adm.coupling, singular, adm.omega), SingularCcrError);
}

TEST_CASE("cancellation identities for the admissible family") {
    qtest::Rng rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = trial % 2 ? 2 : 4;
        const SystemParams p = qtest::random_admissible_params(rng, n);
        const WeylAlgebra alg{p.theta};
        const Eigen::MatrixXd j = p.omega.j();
        const WeylPoly delta = delta_polynomial(p.coupling, alg, j);
        const PolyVector x = generators(alg);
        const PolyVector lead = theta_yjm_x(p.coupling, alg, j);
        for (std::size_t k = 0; k < n; ++k) {
            CHECK((I * commutator(delta, x[k])).approx_equal(3.0 * lead[k], 1e-10));
        }

        const PolyMatrix g = dispersion(p.coupling, alg);
        const PolyMatrix gjg = gjg_transpose(g, j);
        const auto ni = static_cast<Eigen::Index>(n);
        const Eigen::MatrixXd b = p.theta.matrix() * p.coupling.m_mat.transpose();
        const Eigen::MatrixXcd expected = (b * j * b.transpose()).cast<Complex>() -
                                          0.5 * I * op_r(p.theta.matrix(), p.coupling, p.theta, j).cast<Complex>();
        for (Eigen::Index a = 0; a < ni; ++a)
            for (Eigen::Index c = 0; c < ni; ++c) {
                const WeylPoly& e = gjg(static_cast<std::size_t>(a), static_cast<std::size_t>(c));
                CHECK(e.part_from_degree(1).max_abs_coefficient() < 1e-10);
                CHECK(std::abs(e.coefficient(Monomial{}) - expected(a, c)) < 1e-10);
            }

        for (std::size_t col = 0; col < 2; ++col)
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t c = 0; c < n; ++c) {
                    const WeylPoly jac = commutator(g(a, col), x[c]) + commutator(x[a], g(c, col));
                    CHECK(jac.max_abs_coefficient() < 1e-10);
                }
    }
}

TEST_CASE("drift and quasilinear system for a linear plant") {
    qtest::Rng rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        const SystemParams p = qtest::random_linear_params(rng, 2 + 2 * (trial % 2), 2);
        const QuasilinearSystem sys = build_quasilinear(p);
        const Eigen::MatrixXd th = p.theta.matrix();
        const Eigen::MatrixXd b = th * p.coupling.m_mat.transpose();
        const Eigen::MatrixXd k = b * p.omega.j() * p.coupling.m_mat / 2.0;
        CHECK((sys.a_mat - (th * p.hamiltonian.r0 + k)).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((sys.beta - th * p.hamiltonian.gamma).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((sys.b_mat - b).cwiseAbs().maxCoeff() == 0.0);
        CHECK((sys.k_mat - k).cwiseAbs().maxCoeff() < 1e-14);
        REQUIRE(sys.report.has_value());
        CHECK(*sys.report->pr_residual <= 1e-8);
        for (const auto& l : sys.lin_disp) CHECK(l.isZero(0.0));
    }
    // a singular Theta is fine without a quadratic part
    const SystemParams odd = qtest::random_linear_params(rng, 3, 2);
    CHECK_NOTHROW(build_quasilinear(odd));

    const WeylAlgebra alg{CcrMatrix::canonical(2)};
    CHECK(drift(alg.zero(), PolyVector(alg, 2), vacuum_ito(2)).max_abs_coefficient() == 0.0);
}

TEST_CASE("quasilinear system for the admissible family") {
    qtest::Rng rng(13);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = trial % 2 ? 2 : 4;
        const SystemParams p = qtest::random_admissible_params(rng, n);
        const QuasilinearSystem sys = build_quasilinear(p);
        CHECK(pr_residual(sys) <= 1e-8);
        for (std::size_t j = 0; j < 2; ++j) CHECK(sys.lin_disp[j].isApprox(p.theta.matrix() * p.coupling.r_list[j]));

        const WeylAlgebra alg{p.theta};
        const PolyVector f =
            drift(cubic_hamiltonian(p.hamiltonian, p.coupling, alg, p.omega), coupling_vector(p.coupling, alg), p.omega);
        for (const auto& fp : f) CHECK(affine_parts(fp).residual.max_abs_coefficient() <= 1e-10);

        const Eigen::MatrixXd t = qtest::random_symmetric(rng, static_cast<Eigen::Index>(n));
        const Eigen::VectorXd u = qtest::random_matrix(rng, static_cast<Eigen::Index>(n), 1);
        CHECK((system_v(sys, t) - op_v(t, p.coupling, p.theta, p.omega.v())).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((system_e(sys, u) - op_e(u, p.coupling, p.theta, p.omega.v())).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((system_r_theta(sys) - op_r(p.theta.matrix(), p.coupling, p.theta, p.omega.j())).cwiseAbs().maxCoeff() <
              1e-12);
    }
}

TEST_CASE("broken couplings do not build") {
    qtest::Rng rng(14);
    for (int trial = 0; trial < 5; ++trial) {
        const SystemParams p = qtest::random_broken_params(rng, trial % 2 ? 2 : 4);
        CHECK_THROWS_AS(build_quasilinear(p), NonAffineDrift);
    }
    SystemParams adm = qtest::random_admissible_params(rng, 2);
    adm.theta = CcrMatrix::zero(2);
    CHECK_THROWS_AS(build_quasilinear(adm), SingularCcrError);
}

TEST_CASE("search for an active R(Theta) term reports a consistent candidate") {
    const CcrMatrix theta = CcrMatrix::canonical(2);
    const Eigen::MatrixXd j = vacuum_ito(2).j();
    const ActiveRThetaSearch res = search_active_r_theta(theta, j, 4, 1);
    REQUIRE(res.coupling.r_list.size() == 2);
    const Eigen::MatrixXd rt = op_r(theta.matrix(), res.coupling, theta, j);
    CHECK(res.r_theta_norm == doctest::Approx(rt.norm()).epsilon(1e-9));
    double sym = 0.0;
    for (Eigen::Index a = 0; a < 2; ++a)
        for (Eigen::Index b = a; b < 2; ++b) {
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2, 2);
            t(a, b) = 1.0;
            t(b, a) = 1.0;
            sym = std::max(sym, op_r(t, res.coupling, theta, j).cwiseAbs().maxCoeff());
        }
    CHECK(res.r_sym_residual == doctest::Approx(sym).epsilon(1e-9));
    if (res.found) {
        CHECK(res.r_sym_residual <= 1e-9);
        CHECK(res.r_theta_norm > 1e-6);
    }
}
