#pragma once

// Dense primitives on subspaces: orthonormal bases, projectors, principal
// angles and their tangents. Real scalars only.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"

namespace expander {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Singular values below relative_cutoff * s_max are treated as zero.
class RankTolerance
{
public:
    static constexpr double default_cutoff = 1e-10;

    constexpr RankTolerance() = default;

    explicit RankTolerance(double relative_cutoff) : m_cutoff(relative_cutoff)
    {
        if (!(relative_cutoff > 0.0 && relative_cutoff < 1.0))
            throw std::invalid_argument("RankTolerance: cutoff must lie in (0, 1)");
    }

    constexpr double relative_cutoff() const noexcept { return m_cutoff; }

private:
    double m_cutoff = default_cutoff;
};

class Subspace;

namespace detail {
Subspace make_subspace(Matrix basis);
}

/// A linear subspace of R^n held through an n x k matrix with orthonormal columns.
class Subspace
{
public:
    /// Orthonormality tolerance (max entry of B^T B - I) accepted by from_orthonormal().
    static constexpr double orthonormality_tol = 1e-12;

    /// Wraps a basis that is already orthonormal. Throws std::invalid_argument otherwise.
    static Subspace from_orthonormal(Matrix basis, double tol = orthonormality_tol)
    {
        if (basis.cols() < 1 || basis.cols() > basis.rows())
            throw std::invalid_argument("Subspace: need 1 <= k <= n");
        const Matrix gram = basis.transpose() * basis;
        const double err = (gram - Matrix::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff();
        if (!(err <= tol))
            throw std::invalid_argument("Subspace: basis is not orthonormal (error " + std::to_string(err) + ")");
        return Subspace(std::move(basis));
    }

    /// The whole space R^n.
    static Subspace full(Index n) { return Subspace(Matrix::Identity(n, n)); }

    /// span{e_first, ..., e_{first+count-1}} (0-based indices).
    static Subspace coordinate(Index n, Index first, Index count)
    {
        if (first < 0 || count < 1 || first + count > n)
            throw std::invalid_argument("Subspace::coordinate: index range out of bounds");
        Matrix b = Matrix::Zero(n, count);
        for (Index j = 0; j < count; j++)
            b(first + j, j) = 1.0;
        return Subspace(std::move(b));
    }

    const Matrix& basis() const noexcept { return m_basis; }
    Index ambient_dim() const noexcept { return m_basis.rows(); }
    Index dim() const noexcept { return m_basis.cols(); }

    /// Orthogonal projector P = Q Q^T as an explicit n x n matrix.
    Matrix projector() const { return m_basis * m_basis.transpose(); }

private:
    explicit Subspace(Matrix basis) : m_basis(std::move(basis)) {}
    friend Subspace detail::make_subspace(Matrix basis);

    Matrix m_basis;
};

namespace detail {

inline Subspace make_subspace(Matrix basis)
{
    return Subspace(std::move(basis));
}

inline Vector singular_values(const Matrix& m)
{
    if (m.rows() == 0 || m.cols() == 0)
        return Vector(0);
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues();
}

// Orthonormal basis of the range of m keeping singular values above abs_cutoff.
// Returns an n x 0 matrix when nothing survives.
inline Matrix range_basis(const Matrix& m, double abs_cutoff)
{
    if (m.cols() == 0)
        return Matrix(m.rows(), 0);
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    Index rank = 0;
    while (rank < s.size() && s(rank) > abs_cutoff)
        rank++;
    return svd.matrixU().leftCols(rank);
}

inline void check_rows(const Subspace& s, const Matrix& m, const char* who)
{
    if (s.ambient_dim() != m.rows())
        throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}

}  // namespace detail

/// Orthonormal basis of the numerical column space of m.
/// Throws ZeroMatrix when every singular value falls below the cutoff.
inline Subspace orthonormalize(const Matrix& m, RankTolerance tol = {})
{
    const Vector s = detail::singular_values(m);
    if (s.size() == 0 || !(s(0) > 0.0) || !std::isfinite(s(0)))
        throw ZeroMatrix("orthonormalize: matrix is numerically zero");
    Matrix basis = detail::range_basis(m, tol.relative_cutoff() * s(0));
    return detail::make_subspace(std::move(basis));
}

/// Moore-Penrose pseudo-inverse; singular values under the cutoff are dropped.
inline Matrix pseudo_inverse(const Matrix& m, RankTolerance tol = {})
{
    Matrix out = Matrix::Zero(m.cols(), m.rows());
    if (m.rows() == 0 || m.cols() == 0)
        return out;
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    if (!(s(0) > 0.0))
        return out;
    const double cutoff = tol.relative_cutoff() * s(0);
    for (Index i = 0; i < s.size() && s(i) > cutoff; i++)
        out.noalias() += (svd.matrixV().col(i) / s(i)) * svd.matrixU().col(i).transpose();
    return out;
}

/// P_S M
inline Matrix project(const Subspace& s, const Matrix& m)
{
    detail::check_rows(s, m, "project");
    return s.basis() * (s.basis().transpose() * m);
}

/// (I - P_S) M
inline Matrix deflect(const Subspace& s, const Matrix& m)
{
    detail::check_rows(s, m, "deflect");
    return m - project(s, m);
}

namespace detail {

// Deflection with one reorthogonalization pass.
inline Matrix deflect_twice(const Subspace& s, const Matrix& m)
{
    Matrix once = deflect(s, m);
    return deflect(s, once);
}

// U (+) orth((I - P_U) m). The cutoff is relative to `scale`, the size of the
// block before deflection, so directions already in U are dropped.
inline Subspace extend(const Subspace& u, const Matrix& m, double scale, RankTolerance tol)
{
    if (u.dim() == u.ambient_dim() || m.cols() == 0 || !(scale > 0.0))
        return u;
    const Matrix residual = deflect_twice(u, m);
    Matrix fresh = range_basis(residual, tol.relative_cutoff() * scale);
    if (fresh.cols() == 0)
        return u;
    // The fresh block must stay orthogonal to U; one more sweep absorbs the
    // roundoff left by the SVD.
    fresh = deflect(u, fresh);
    Eigen::HouseholderQR<Matrix> qr(fresh);
    fresh = qr.householderQ() * Matrix::Identity(fresh.rows(), fresh.cols());
    const Index k = std::min<Index>(fresh.cols(), u.ambient_dim() - u.dim());
    Matrix basis(u.ambient_dim(), u.dim() + k);
    basis << u.basis(), fresh.leftCols(k);
    return make_subspace(std::move(basis));
}

inline double spectral_norm(const Matrix& m)
{
    const Vector s = singular_values(m);
    return s.size() == 0 ? 0.0 : s(0);
}

}  // namespace detail

/// U + V, built as U (+) orth((I - P_U) V). Returns U when V is contained in U.
inline Subspace subspace_sum(const Subspace& u, const Subspace& v, RankTolerance tol = {})
{
    if (u.ambient_dim() != v.ambient_dim())
        throw std::invalid_argument("subspace_sum: ambient dimensions differ");
    return detail::extend(u, v.basis(), 1.0, tol);
}

/// Largest singular value.
inline double spectral_norm(const Matrix& m)
{
    return detail::spectral_norm(m);
}

/// Orthonormal basis of the orthogonal complement of s (an n x (n-k) matrix).
inline Matrix orthogonal_complement(const Subspace& s)
{
    const Index n = s.ambient_dim(), k = s.dim();
    if (k == n)
        return Matrix(n, 0);
    Eigen::HouseholderQR<Matrix> qr(s.basis());
    const Matrix q = qr.householderQ();
    return q.rightCols(n - k);
}

enum class NormKind { Operator, Frobenius };

/// Principal angles theta_1 <= ... <= theta_k with derived trigonometric vectors.
struct AngleProfile
{
    Vector angles;
    Vector cosines;
    Vector sines;
    Vector tangents;  ///< +inf where the angle is pi/2

    Index size() const noexcept { return angles.size(); }

    double theta_max() const { return angles.size() == 0 ? 0.0 : angles(angles.size() - 1); }

    /// Unitarily invariant norm of tan(Theta).
    double tan_norm(NormKind kind = NormKind::Operator) const
    {
        if (tangents.size() == 0)
            return 0.0;
        if (kind == NormKind::Operator)
            return tangents.maxCoeff();
        double sum = 0.0;
        for (Index i = 0; i < tangents.size(); i++)
            sum += tangents(i) * tangents(i);
        return std::sqrt(sum);
    }

    static AngleProfile from_angles(Vector theta)
    {
        std::sort(theta.data(), theta.data() + theta.size());
        AngleProfile p;
        const Index k = theta.size();
        p.cosines.resize(k);
        p.sines.resize(k);
        p.tangents.resize(k);
        for (Index i = 0; i < k; i++)
        {
            if (theta(i) >= std::numbers::pi / 2)
            {
                theta(i) = std::numbers::pi / 2;
                p.cosines(i) = 0.0;
                p.sines(i) = 1.0;
                p.tangents(i) = std::numeric_limits<double>::infinity();
            } else {
                p.cosines(i) = std::cos(theta(i));
                p.sines(i) = std::sin(theta(i));
                p.tangents(i) = std::tan(theta(i));
            }
        }
        p.angles = std::move(theta);
        return p;
    }

    static AngleProfile zeros(Index k) { return from_angles(Vector::Zero(k)); }
};

/// Cosines below this are indistinguishable from roundoff and reported as pi/2.
inline constexpr double right_angle_cosine = 64 * std::numeric_limits<double>::epsilon();

/// Principal angles between X and Y, k = min(dim X, dim Y).
///
/// Cosines come from the SVD of X^T Y and sines from the SVD of (I - P_Y) X.
/// Each angle is taken from the sine when it is below pi/4 and from the cosine
/// otherwise, which keeps full relative accuracy at both ends.
inline AngleProfile principal_angles(const Subspace& x, const Subspace& y)
{
    if (x.ambient_dim() != y.ambient_dim())
        throw std::invalid_argument("principal_angles: ambient dimensions differ");
    const Subspace& small = x.dim() <= y.dim() ? x : y;
    const Subspace& big = x.dim() <= y.dim() ? y : x;
    const Index k = small.dim();

    const Matrix cross = small.basis().transpose() * big.basis();
    const Vector cosv = detail::singular_values(cross);
    const Matrix residual = small.basis() - big.basis() * cross.transpose();
    const Vector sinv = detail::singular_values(residual);

    Vector theta(k);
    for (Index i = 0; i < k; i++)
    {
        const double c = std::min(cosv(i), 1.0);
        const double s = std::min(sinv(k - 1 - i), 1.0);
        if (c * c < 0.5)
            theta(i) = c <= right_angle_cosine ? std::numbers::pi / 2 : std::acos(c);
        else
            theta(i) = std::asin(s);
    }
    return AngleProfile::from_angles(std::move(theta));
}

/// tan(theta_i(X, V)) for i = 1..dim X, nonincreasing, computed as the singular
/// values of X_perp^T V (X^T V)^+. Requires rank(X^T V) = dim X.
inline Vector tangent_profile(const Subspace& x, const Subspace& v, RankTolerance tol = {})
{
    if (x.ambient_dim() != v.ambient_dim())
        throw std::invalid_argument("tangent_profile: ambient dimensions differ");
    if (x.dim() > v.dim())
        throw std::invalid_argument("tangent_profile: need dim X <= dim V");
    const Index d = x.dim();
    const Matrix xv = x.basis().transpose() * v.basis();
    const Vector s = detail::singular_values(xv);
    // X and V are orthonormal, so the singular values of X^T V are cosines in [0, 1].
    if (s(d - 1) <= tol.relative_cutoff())
        throw DegenerateIntersection("tangent_profile: rank(X^T V) < dim X");
    if (x.dim() == x.ambient_dim())
        return Vector::Zero(d);
    const Matrix xperp = orthogonal_complement(x);
    const Matrix t = xperp.transpose() * v.basis() * pseudo_inverse(xv, tol);
    const Vector sv = detail::singular_values(t);
    Vector out = Vector::Zero(d);
    const Index m = std::min<Index>(d, sv.size());
    out.head(m) = sv.head(m);
    return out;
}

/// Singular values of X_perp^T V (X^T V)^+ for an arbitrary (not necessarily
/// orthonormal) spanning matrix V. They dominate tangent_profile(X, range(V)).
inline Vector tangent_upper_bound(const Subspace& x, const Matrix& x_perp, const Matrix& v_raw,
                                  RankTolerance tol = {})
{
    const Index n = x.ambient_dim();
    if (x_perp.rows() != n || v_raw.rows() != n || x.dim() + x_perp.cols() != n)
        throw std::invalid_argument("tangent_upper_bound: [X | X_perp] must be n x n");
    const Matrix xv = x.basis().transpose() * v_raw;
    const double scale = detail::spectral_norm(v_raw);
    if (!(scale > 0.0) || detail::spectral_norm(xv) <= tol.relative_cutoff() * scale)
        throw ZeroProjection("tangent_upper_bound: X^T V = 0");
    const Matrix t = x_perp.transpose() * v_raw * pseudo_inverse(xv, tol);
    return detail::singular_values(t);
}

}  // namespace expander
