#pragma once

// Block subspace expansion iterations.
//
// Every method grows a search space V_0 = V subset V_1 subset ... by appending an
// orthonormal block to the current basis. They differ in which block:
//   OptimalTheoretical   (1 - P_V) P_S (X), S = V + A(V); needs the target X
//   BlockKrylov          all of (1 - P_V) A(V)
//   RayleighRitz         (1 - P_V) of the top-d Ritz vectors from S
//   RefinedRayleighRitz  (1 - P_V) of the top-d refined Ritz vectors from S
//   JiaResidualRR        (1 - P_V) of the top-d Ritz vectors from range((1 - P_V) A V)

#include <array>
#include <chrono>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "models.hpp"

namespace expander {

enum class MethodKind { OptimalTheoretical, BlockKrylov, RayleighRitz, RefinedRayleighRitz, JiaResidualRR };

inline constexpr std::array<MethodKind, 5> all_methods = {
    MethodKind::OptimalTheoretical, MethodKind::BlockKrylov, MethodKind::RayleighRitz,
    MethodKind::RefinedRayleighRitz, MethodKind::JiaResidualRR};

inline const char* to_string(MethodKind m)
{
    switch (m)
    {
    case MethodKind::OptimalTheoretical: return "optimal";
    case MethodKind::BlockKrylov: return "krylov";
    case MethodKind::RayleighRitz: return "rr";
    case MethodKind::RefinedRayleighRitz: return "refined_rr";
    case MethodKind::JiaResidualRR: return "jia_rr";
    }
    return "?";
}

inline MethodKind method_from_string(const std::string& s)
{
    for (MethodKind m : all_methods)
        if (s == to_string(m))
            return m;
    throw std::invalid_argument("unknown method '" + s + "'");
}

/// Projection used by the computable expansion.
enum class Projection { RayleighRitz, Refined };

/// Approximate eigenpairs extracted from a search space.
struct RitzExtraction
{
    Subspace subspace;
    Vector values;     ///< Ritz values, nonincreasing
    Vector residuals;  ///< ||(A - mu_i) u_i||_2 for the extracted vectors u_i
    bool rank_collapsed = false;
};

/// S = V + A(V), the space every one-step expansion of V lives in. Directions of
/// (1 - P_V) A V below cutoff * ||A V||_2 are dropped.
template <SymmetricOperator Op>
Subspace krylov_step(const Op& a, const Subspace& k_prev, RankTolerance tol = {})
{
    const Matrix ak = a.apply(k_prev.basis());
    return detail::extend(k_prev, ak, detail::spectral_norm(ak), tol);
}

namespace detail {

// K + A(block) where block holds the columns added by the previous step. Since
// A(K_{t-2}) already lies in K_{t-1}, this spans the same space as krylov_step.
template <SymmetricOperator Op>
Subspace krylov_block_step(const Op& a, const Subspace& k_prev, const Matrix& block, RankTolerance tol)
{
    const Matrix image = a.apply(block);
    return extend(k_prev, image, spectral_norm(image), tol);
}

}  // namespace detail

template <SymmetricOperator Op>
Subspace search_space(const Op& a, const Subspace& v, RankTolerance tol = {})
{
    return krylov_step(a, v, tol);
}

/// V (+) N with N = (1 - P_V) P_S (X). Leaves V unchanged when N vanishes.
template <SymmetricOperator Op>
Subspace optimal_step(const Op& a, const Subspace& x_target, const Subspace& v_prev, RankTolerance tol = {})
{
    const Subspace s = search_space(a, v_prev, tol);
    return detail::extend(v_prev, project(s, x_target.basis()), 1.0, tol);
}

/// W' = V R^+ N with R = (1 - P_V) A V. For N the block appended by optimal_step,
/// V + A(W') equals the optimal expansion and dim W' <= d.
template <SymmetricOperator Op>
Matrix optimal_generator(const Op& a, const Subspace& v, const Matrix& n_block, RankTolerance tol = {})
{
    const Matrix r = deflect(v, a.apply(v.basis()));
    return v.basis() * (pseudo_inverse(r, tol) * n_block);
}

namespace detail {

struct Compression
{
    Matrix aq;          // A Q
    Vector values;      // top-d eigenvalues of Q^T A Q, nonincreasing
    Matrix vectors;     // matching eigenvectors (k x d)
};

template <SymmetricOperator Op>
Compression compress(const Op& a, const Subspace& s, Index d)
{
    if (d < 1 || d > s.dim())
        throw std::invalid_argument("Ritz extraction: need 1 <= d <= dim S");
    Compression c;
    c.aq = a.apply(s.basis());
    Matrix h = s.basis().transpose() * c.aq;
    h = (0.5 * (h + h.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    c.values = eig.eigenvalues().tail(d).reverse();
    c.vectors = eig.eigenvectors().rightCols(d).rowwise().reverse();
    return c;
}

}  // namespace detail

/// span of the Ritz vectors for the d largest eigenvalues of Q^T A Q, Q = S.basis.
template <SymmetricOperator Op>
RitzExtraction rr_replacement(const Op& a, const Subspace& s, Index d)
{
    const detail::Compression c = detail::compress(a, s, d);
    Matrix basis = s.basis() * c.vectors;
    const Matrix resid = c.aq * c.vectors - basis * c.values.asDiagonal();
    return {detail::make_subspace(std::move(basis)), c.values, resid.colwise().norm().transpose(), false};
}

/// Refined Ritz vectors: for each of the d largest Ritz values mu_i, the unit
/// Q z minimizing ||(A - mu_i) Q z||_2, i.e. z is the right singular vector of
/// A Q - mu_i Q for its smallest singular value. The vectors are orthonormalized
/// with a column-pivoted QR; when they are numerically dependent the returned
/// subspace has dimension < d and rank_collapsed is set.
template <SymmetricOperator Op>
RitzExtraction refined_rr_replacement(const Op& a, const Subspace& s, Index d, RankTolerance tol = {})
{
    const detail::Compression c = detail::compress(a, s, d);
    const Matrix& q = s.basis();
    Matrix refined(q.rows(), d);
    Vector residuals(d);
    for (Index i = 0; i < d; i++)
    {
        const Matrix shifted = c.aq - c.values(i) * q;
        Eigen::BDCSVD<Matrix> svd(shifted, Eigen::ComputeThinV);
        const Index last = svd.singularValues().size() - 1;
        residuals(i) = svd.singularValues()(last);
        refined.col(i) = q * svd.matrixV().col(last);
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(refined);
    qr.setThreshold(tol.relative_cutoff());
    const Index rank = std::max<Index>(qr.rank(), 1);
    Matrix basis = qr.householderQ() * Matrix::Identity(q.rows(), rank);
    return {detail::make_subspace(std::move(basis)), c.values, residuals, rank < d};
}

/// One step of the computable expansion: V (+) (1 - P_V) X_hat with X_hat
/// extracted from S = V + A(V).
template <SymmetricOperator Op>
Subspace computable_step(const Op& a, const Subspace& v_prev, Index d, Projection proj, RankTolerance tol = {})
{
    if (d > v_prev.dim())
        throw std::invalid_argument("computable_step: need d <= dim V");
    const Subspace s = search_space(a, v_prev, tol);
    if (s.dim() == v_prev.dim())
        return v_prev;
    const RitzExtraction x_hat =
        proj == Projection::RayleighRitz ? rr_replacement(a, s, d) : refined_rr_replacement(a, s, d, tol);
    return detail::extend(v_prev, x_hat.subspace.basis(), 1.0, tol);
}

/// Residual-based expansion: Ritz vectors of A taken from range((1 - P_V) A V),
/// using min(d, rank) of them.
template <SymmetricOperator Op>
Subspace jia_residual_step(const Op& a, const Subspace& v_prev, Index d, RankTolerance tol = {})
{
    if (d > v_prev.dim())
        throw std::invalid_argument("jia_residual_step: need d <= dim V");
    const Matrix av = a.apply(v_prev.basis());
    const double scale = detail::spectral_norm(av);
    if (!(scale > 0.0))
        return v_prev;
    Matrix r = detail::range_basis(detail::deflect_twice(v_prev, av), tol.relative_cutoff() * scale);
    if (r.cols() == 0)
        return v_prev;
    const Index k = std::min<Index>(d, r.cols());
    const RitzExtraction r_hat = rr_replacement(a, detail::make_subspace(std::move(r)), k);
    return detail::extend(v_prev, r_hat.subspace.basis(), 1.0, tol);
}

/// Dispatches one step of `method`. The target is only read by OptimalTheoretical.
template <SymmetricOperator Op>
Subspace expansion_step(const Op& a, const Subspace& x_target, const Subspace& v_prev, MethodKind method,
                        RankTolerance tol = {})
{
    const Index d = x_target.dim();
    switch (method)
    {
    case MethodKind::OptimalTheoretical: return optimal_step(a, x_target, v_prev, tol);
    case MethodKind::BlockKrylov: return krylov_step(a, v_prev, tol);
    case MethodKind::RayleighRitz: return computable_step(a, v_prev, d, Projection::RayleighRitz, tol);
    case MethodKind::RefinedRayleighRitz: return computable_step(a, v_prev, d, Projection::Refined, tol);
    case MethodKind::JiaResidualRR: return jia_residual_step(a, v_prev, d, tol);
    }
    throw std::invalid_argument("expansion_step: unknown method");
}

struct TrajectoryRecord
{
    int t = 0;
    Index dim = 0;
    AngleProfile angles;  ///< Theta(X, V_t)
    double elapsed = 0.0; ///< cumulative seconds spent in steps up to t
};

struct ExpansionTrajectory
{
    MethodKind method;
    std::vector<TrajectoryRecord> records;
    Subspace final_subspace;
    std::vector<Subspace> history;  ///< V_0..V_q when RunOptions::keep_history is set
};

struct RunOptions
{
    bool keep_history = false;
};

/// Applies `method` q times from V0 and records dim and Theta(X, V_t) for t = 0..q.
/// Once the space fills R^n the angles are exactly zero and further steps are skipped.
/// BlockKrylov is advanced by its newest block only (see detail::krylov_block_step).
template <SymmetricOperator Op>
ExpansionTrajectory run_method(const Op& a, const Subspace& x_target, const Subspace& v0, MethodKind method,
                               int q, RankTolerance tol = {}, RunOptions opts = {})
{
    if (q < 0)
        throw std::invalid_argument("run_method: q must be >= 0");
    if (x_target.dim() > v0.dim())
        throw std::invalid_argument("run_method: need dim X <= dim V0");
    if (x_target.ambient_dim() != v0.ambient_dim() || v0.ambient_dim() != static_cast<Index>(a.size()))
        throw std::invalid_argument("run_method: dimension mismatch");

    using clock = std::chrono::steady_clock;
    const Index n = v0.ambient_dim();
    const Index d = x_target.dim();
    auto angles_of = [&](const Subspace& v) {
        return v.dim() == n ? AngleProfile::zeros(d) : principal_angles(x_target, v);
    };

    std::vector<TrajectoryRecord> records;
    records.reserve(static_cast<std::size_t>(q) + 1);
    std::vector<Subspace> history;
    Subspace current = v0;
    Index previous_dim = 0;  // BlockKrylov: columns before the newest block
    double elapsed = 0.0;
    records.push_back({0, current.dim(), angles_of(current), 0.0});
    if (opts.keep_history)
        history.push_back(current);

    for (int t = 1; t <= q; t++)
    {
        if (current.dim() < n)
        {
            const auto start = clock::now();
            try
            {
                if (method == MethodKind::BlockKrylov)
                {
                    const Index fresh = current.dim() - previous_dim;
                    const Index before = current.dim();
                    current = detail::krylov_block_step(a, current, current.basis().rightCols(fresh), tol);
                    previous_dim = before;
                } else {
                    current = expansion_step(a, x_target, current, method, tol);
                }
            } catch (const Error& e) {
                throw StepFailure(t, e.what());
            }
            elapsed += std::chrono::duration<double>(clock::now() - start).count();
        }
        records.push_back({t, current.dim(), angles_of(current), elapsed});
        if (opts.keep_history)
            history.push_back(current);
    }
    return {method, std::move(records), std::move(current), std::move(history)};
}

}  // namespace expander
