#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "expander/expansion.hpp"
#include "oracles.hpp"

using namespace expander;
using Catch::Matchers::WithinAbs;

namespace {

double max_abs(const Matrix& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

HermitianOperator diag3()
{
    Vector v(3);
    v << 3, 2, 1;
    return HermitianOperator::diagonal(Spectrum(v));
}

Subspace ones3()
{
    return Subspace::from_orthonormal(Matrix::Ones(3, 1) / std::sqrt(3.0));
}

HermitianOperator linear_operator(Index n, Index d = 5)
{
    ModelParams p;
    p.n = n;
    p.d = d;
    return HermitianOperator::diagonal(linear_decay(p));
}

HermitianOperator random_dense(Index n, std::uint64_t seed)
{
    const Matrix g = oracle::gaussian(n, n, seed);
    return HermitianOperator::dense(g + g.transpose());
}

Matrix projector_of(const Matrix& m)
{
    const Matrix q = oracle::gram_schmidt(m);
    return q * q.transpose();
}

/// Operator that fails on its k-th application.
struct FailingOperator
{
    HermitianOperator inner;
    int fail_on;
    mutable int calls = 0;

    Index size() const { return inner.size(); }
    Matrix apply(const Matrix& m) const
    {
        if (++calls == fail_on)
            throw ZeroMatrix("injected failure");
        return inner.apply(m);
    }
};

}  // namespace

TEST_CASE("method names")
{
    for (MethodKind m : all_methods)
        CHECK(method_from_string(to_string(m)) == m);
    CHECK_THROWS_AS(method_from_string("lanczos"), std::invalid_argument);
}

TEST_CASE("krylov_step on the 3 x 3 example")
{
    const Subspace k1 = krylov_step(diag3(), ones3());
    REQUIRE(k1.dim() == 2);
    Matrix raw(3, 2);
    raw << 1, 3, 1, 2, 1, 1;
    CHECK(max_abs(k1.projector() - projector_of(raw)) < 1e-14);
    CHECK(krylov_step(diag3(), k1).dim() == 3);
}

TEST_CASE("optimal_step on the 3 x 3 example")
{
    const HermitianOperator a = diag3();
    const Subspace x = target_subspace(a, 1);
    const Subspace v1 = optimal_step(a, x, ones3());
    REQUIRE(v1.dim() == 2);
    Matrix raw(3, 2);
    raw << 1, 3, 1, 2, 1, 1;
    // cos theta(e1, S1) = ||P_S e1||
    const double cos_s = (projector_of(raw) * Vector::Unit(3, 0)).norm();
    CHECK_THAT(principal_angles(x, v1).angles(0), WithinAbs(std::acos(cos_s), 1e-12));
    CHECK(principal_angles(ones3(), v1).theta_max() < 1e-14);

    const ExpansionTrajectory traj = run_method(a, x, ones3(), MethodKind::OptimalTheoretical, 2);
    REQUIRE(traj.records.size() == 3);
    CHECK(traj.records[2].angles.theta_max() == 0.0);
}

TEST_CASE("optimal_step is the identity when X is already inside V")
{
    const HermitianOperator a = linear_operator(40);
    const Subspace x = target_subspace(a, 3);
    const Subspace v = subspace_sum(x, Subspace::from_orthonormal(oracle::random_orthonormal(40, 4, 2)));
    const Subspace v1 = optimal_step(a, x, v);
    CHECK(v1.dim() == v.dim());
}

TEST_CASE("every method leaves an A-invariant subspace unchanged")
{
    const HermitianOperator a = linear_operator(30);
    const Subspace x = target_subspace(a, 3);
    const Subspace inv = Subspace::coordinate(30, 0, 6);
    for (MethodKind m : all_methods)
    {
        const Subspace next = expansion_step(a, x, inv, m);
        CHECK(next.dim() == 6);
        CHECK(max_abs(next.projector() - inv.projector()) < 1e-14);
    }
}

TEST_CASE("Rayleigh-Ritz replacement")
{
    SECTION("full space gives the target")
    {
        const HermitianOperator a = random_dense(12, 1);
        const RitzExtraction r = rr_replacement(a, Subspace::full(12), 3);
        CHECK(principal_angles(r.subspace, target_subspace(a, 3)).theta_max() < 1e-10);
    }
    SECTION("invariant subspace containing X")
    {
        const HermitianOperator a = linear_operator(20);
        const RitzExtraction r = rr_replacement(a, Subspace::coordinate(20, 0, 7), 4);
        CHECK(principal_angles(r.subspace, Subspace::coordinate(20, 0, 4)).theta_max() < 1e-12);
        CHECK(r.residuals.maxCoeff() < 1e-9);
    }
    SECTION("Ritz values match a dense eigensolver and interlace")
    {
        const HermitianOperator a = random_dense(50, 2);
        const Subspace s = Subspace::from_orthonormal(oracle::random_orthonormal(50, 12, 3));
        const RitzExtraction r = rr_replacement(a, s, 3);
        const Matrix h = s.basis().transpose() * a.to_dense() * s.basis();
        Eigen::EigenSolver<Matrix> general(h);
        std::vector<double> ev;
        for (Index i = 0; i < 12; i++)
            ev.push_back(general.eigenvalues()(i).real());
        std::sort(ev.rbegin(), ev.rend());
        for (Index i = 0; i < 3; i++)
        {
            CHECK_THAT(r.values(i), WithinAbs(ev[static_cast<std::size_t>(i)], 1e-9));
            CHECK(r.values(i) <= a.spectrum().lambda(i + 1) + 1e-9);
        }
        CHECK(max_abs(r.subspace.basis().transpose() * r.subspace.basis() - Matrix::Identity(3, 3)) < 1e-12);
    }
}

TEST_CASE("refined Rayleigh-Ritz replacement")
{
    SECTION("invariant subspace containing X")
    {
        const HermitianOperator a = linear_operator(20);
        const RitzExtraction r = refined_rr_replacement(a, Subspace::coordinate(20, 0, 7), 4);
        REQUIRE(r.subspace.dim() == 4);
        CHECK_FALSE(r.rank_collapsed);
        CHECK(principal_angles(r.subspace, Subspace::coordinate(20, 0, 4)).theta_max() < 1e-10);
        CHECK(r.residuals.maxCoeff() < 1e-9);
    }
    SECTION("d = 1 residual is no larger than the Ritz residual")
    {
        for (std::uint64_t seed = 0; seed < 10; seed++)
        {
            const HermitianOperator a = random_dense(30, 10 + seed);
            const Subspace s = Subspace::from_orthonormal(oracle::random_orthonormal(30, 8, 20 + seed));
            const RitzExtraction plain = rr_replacement(a, s, 1);
            const RitzExtraction refined = refined_rr_replacement(a, s, 1);
            const Vector u = refined.subspace.basis().col(0);
            const double direct = (a.apply(u) - refined.values(0) * u).norm();
            CHECK_THAT(direct, WithinAbs(refined.residuals(0), 1e-10));
            CHECK(refined.residuals(0) <= plain.residuals(0) + 1e-12);
        }
    }
    SECTION("residuals equal the smallest singular value of A Q - mu Q")
    {
        const HermitianOperator a = random_dense(50, 4);
        const Subspace s = Subspace::from_orthonormal(oracle::random_orthonormal(50, 12, 5));
        const RitzExtraction r = refined_rr_replacement(a, s, 3);
        const Matrix aq = a.to_dense() * s.basis();
        for (Index i = 0; i < 3; i++)
        {
            const Matrix shifted = aq - r.values(i) * s.basis();
            Eigen::SelfAdjointEigenSolver<Matrix> eig(shifted.transpose() * shifted);
            const double smin = std::sqrt(std::max(eig.eigenvalues()(0), 0.0));
            CHECK_THAT(r.residuals(i), WithinAbs(smin, 1e-7));
        }
    }
}

TEST_CASE("single steps at n = 500: dimensions and first-step optimality")
{
    const HermitianOperator a = linear_operator(500);
    const Subspace x = target_subspace(a, 5);
    const Subspace v0 = gaussian_subspace(500, 20, 0);
    const Subspace opt = optimal_step(a, x, v0);
    CHECK(opt.dim() == 25);
    CHECK(krylov_step(a, v0).dim() == 40);
    for (Projection p : {Projection::RayleighRitz, Projection::Refined})
    {
        const Subspace v1 = computable_step(a, v0, 5, p);
        CHECK(v1.dim() == 25);
        CHECK(principal_angles(x, v1).theta_max() >= principal_angles(x, opt).theta_max() - 1e-9);
    }
    CHECK(jia_residual_step(a, v0, 5).dim() == 25);
}

TEST_CASE("optimal expansion properties on a mid-size problem")
{
    const Index n = 150;
    const HermitianOperator a = linear_operator(n, 3);
    const Subspace x = target_subspace(a, 3);
    const Subspace v0 = gaussian_subspace(n, 10, 1);
    const int q = 8;
    RunOptions keep;
    keep.keep_history = true;
    const ExpansionTrajectory opt = run_method(a, x, v0, MethodKind::OptimalTheoretical, q, {}, keep);
    const ExpansionTrajectory kry = run_method(a, x, v0, MethodKind::BlockKrylov, q, {}, keep);
    REQUIRE(opt.history.size() == q + 1);
    REQUIRE(kry.records.size() == q + 1);

    for (int t = 1; t <= q; t++)
    {
        const auto i = static_cast<std::size_t>(t);
        // Theta(X, V_t) = Theta(X, V_{t-1} + A V_{t-1})
        const Subspace s = search_space(a, opt.history[i - 1]);
        const AngleProfile on_v = principal_angles(x, opt.history[i]);
        const AngleProfile on_s = principal_angles(x, s);
        CHECK((on_v.angles - on_s.angles).cwiseAbs().maxCoeff() <= 1e-9);
        // V_t inside K_t
        CHECK(oracle::norm2(deflect(kry.history[i], opt.history[i].basis())) <= 1e-9);
        // nested spaces never lose accuracy
        CHECK((opt.records[i].angles.angles.array() <= opt.records[i - 1].angles.angles.array() + 1e-12).all());
        CHECK((kry.records[i].angles.angles.array() <= kry.records[i - 1].angles.angles.array() + 1e-12).all());
        CHECK(opt.records[i].dim == 10 + 3 * t);
        CHECK(kry.records[i].dim == std::min<Index>(10 * (t + 1), n));
    }
}

TEST_CASE("the optimal block beats random competitors W inside V")
{
    const Index n = 80, d = 3;
    const HermitianOperator a = linear_operator(n, d);
    const Subspace x = target_subspace(a, d);
    const Subspace v0 = gaussian_subspace(n, 8, 3);
    const Subspace v1 = optimal_step(a, x, v0);
    const Matrix n_block = v1.basis().rightCols(v1.dim() - v0.dim());
    const Matrix w_opt = optimal_generator(a, v0, n_block);
    CHECK(w_opt.cols() <= d);
    const Subspace via_w = subspace_sum(v0, orthonormalize(a.apply(w_opt)));
    const AngleProfile best = principal_angles(x, via_w);
    CHECK((best.angles - principal_angles(x, v1).angles).cwiseAbs().maxCoeff() < 1e-9);
    for (std::uint64_t seed = 0; seed < 40; seed++)
    {
        const Matrix w = v0.basis() * oracle::gaussian(8, d, 50 + seed);
        const Subspace competitor = subspace_sum(v0, orthonormalize(a.apply(w)));
        const AngleProfile other = principal_angles(x, competitor);
        CHECK((best.angles.array() <= other.angles.array() + 1e-9).all());
    }
}

TEST_CASE("run_method bookkeeping")
{
    const HermitianOperator a = linear_operator(60);
    const Subspace x = target_subspace(a, 5);
    const Subspace v0 = gaussian_subspace(60, 10, 4);

    const ExpansionTrajectory zero = run_method(a, x, v0, MethodKind::RayleighRitz, 0);
    REQUIRE(zero.records.size() == 1);
    CHECK((zero.records[0].angles.angles - principal_angles(x, v0).angles).cwiseAbs().maxCoeff() == 0.0);

    const ExpansionTrajectory full = run_method(a, x, v0, MethodKind::BlockKrylov, 8);
    REQUIRE(full.records.size() == 9);
    for (std::size_t t = 1; t < full.records.size(); t++)
    {
        CHECK(full.records[t].dim >= full.records[t - 1].dim);
        CHECK(full.records[t].elapsed >= full.records[t - 1].elapsed);
    }
    CHECK(full.records.back().dim == 60);
    CHECK(full.records.back().angles.theta_max() == 0.0);
    CHECK(full.final_subspace.dim() == 60);

    CHECK_THROWS_AS(run_method(a, x, v0, MethodKind::BlockKrylov, -1), std::invalid_argument);
    CHECK_THROWS_AS(run_method(a, x, gaussian_subspace(60, 3, 0), MethodKind::BlockKrylov, 1), std::invalid_argument);
}

TEST_CASE("step errors carry the iteration index")
{
    const HermitianOperator inner = linear_operator(40);
    const FailingOperator a{inner, 3};
    const Subspace x = target_subspace(inner, 2);
    const Subspace v0 = gaussian_subspace(40, 4, 0);
    try
    {
        run_method(a, x, v0, MethodKind::BlockKrylov, 5);
        FAIL("expected StepFailure");
    } catch (const StepFailure& e) {
        CHECK(e.iteration() == 3);
        CHECK(std::string(e.what()).find("t=3") != std::string::npos);
    }
}

TEST_CASE("methods accept dense operators")
{
    const HermitianOperator a = random_dense(40, 9);
    const Subspace x = target_subspace(a, 2);
    const Subspace v0 = gaussian_subspace(40, 6, 1);
    for (MethodKind m : all_methods)
    {
        const ExpansionTrajectory traj = run_method(a, x, v0, m, 3);
        CHECK(traj.records.back().angles.theta_max() <= traj.records.front().angles.theta_max() + 1e-9);
    }
}
