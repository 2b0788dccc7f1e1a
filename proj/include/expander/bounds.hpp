#pragma once

// Convergence bounds for the optimal expansion and for block Krylov spaces,
// the polynomial filter factors behind them, and Chebyshev polynomials.

#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "linalg.hpp"
#include "models.hpp"

namespace expander {

/// T_t(x), Chebyshev polynomial of the first kind.
///
/// |x| <= 1 uses cos(t arccos x). For x > 1 the closed form
/// ((x + sqrt(x^2-1))^t + (x - sqrt(x^2-1))^t) / 2 is used, except within 1e-12
/// of 1 where sqrt(x^2-1) cancels and cosh(t arccosh x) is used instead.
inline double chebyshev_T(int t, double x)
{
    if (t < 0)
        throw std::invalid_argument("chebyshev_T: degree must be >= 0");
    if (x < -1.0)
        return (t % 2 == 0 ? 1.0 : -1.0) * chebyshev_T(t, -x);
    if (x <= 1.0)
        return std::cos(t * std::acos(x));
    if (x - 1.0 < 1e-12)
        return std::cosh(t * std::acosh(x));
    const double root = std::sqrt(x * x - 1.0);
    return 0.5 * (std::pow(x + root, t) + std::pow(x - root, t));
}

namespace poly {

/// Coefficients in ascending powers.
struct Coefficients
{
    std::vector<double> c;
};

/// x - s
struct Shifted
{
    double s;
};

/// T_t((x - lo) / (hi - lo)), hi > lo.
struct ScaledChebyshev
{
    int t;
    double lo;
    double hi;
};

}  // namespace poly

using PolynomialSpec = std::variant<poly::Coefficients, poly::Shifted, poly::ScaledChebyshev>;

inline double evaluate(const PolynomialSpec& phi, double x)
{
    return std::visit(
        [x](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, poly::Coefficients>)
            {
                double acc = 0.0;
                for (auto it = p.c.rbegin(); it != p.c.rend(); ++it)
                    acc = acc * x + *it;
                return acc;
            } else if constexpr (std::is_same_v<P, poly::Shifted>) {
                return x - p.s;
            } else {
                if (!(p.hi > p.lo))
                    throw std::invalid_argument("ScaledChebyshev: need hi > lo");
                return chebyshev_T(p.t, (x - p.lo) / (p.hi - p.lo));
            }
        },
        phi);
}

/// mu_d = (lambda_{d+1} - lambda_n) / ((lambda_d - lambda_n) + (lambda_d - lambda_{d+1}))
inline double mu_d(const Spectrum& s, Index d)
{
    const Index n = s.size();
    if (d < 1 || d >= n)
        throw std::invalid_argument("mu_d: need 1 <= d < n");
    const double ld = s.lambda(d), ld1 = s.lambda(d + 1), ln = s.lambda(n);
    if (!(ld > ld1))
        throw NoSpectralGap("mu_d: lambda_d == lambda_{d+1}");
    return (ld1 - ln) / ((ld - ln) + (ld - ld1));
}

enum class BoundKind { OptimalExpansion, BlockKrylov };

struct BoundPoint
{
    int t;
    double value;
};

struct BoundCurve
{
    BoundKind kind;
    std::string label;
    Index d = 0;
    Index p = 0;
    double base = 0.0;  ///< ||tan Theta(X, V_0)|| or ||tan Theta(X, H_p)||
    std::vector<BoundPoint> points;
};

/// mu_d^t * tan0 for t = 0..q.
inline BoundCurve vt_bound_curve(const Spectrum& s, Index d, int q, double tan0)
{
    const double mu = mu_d(s, d);
    BoundCurve c{BoundKind::OptimalExpansion, "UB_Vt", d, d, tan0, {}};
    double factor = 1.0;
    for (int t = 0; t <= q; t++)
    {
        c.points.push_back({t, factor * tan0});
        factor *= mu;
    }
    return c;
}

/// 4 (lambda_{p+1}-lambda_n)/(lambda_d-lambda_n) * 3^{-t min{sqrt(ratio - 1), 1}},
/// ratio = (lambda_d-lambda_n)/(lambda_{p+1}-lambda_n).
inline double kt_coefficient(const Spectrum& s, Index d, Index p, int t)
{
    const Index n = s.size();
    if (d < 1 || p < d || p > n - 1)
        throw std::invalid_argument("kt_coefficient: need 1 <= d <= p <= n - 1");
    const double ln = s.lambda(n);
    const double top = s.lambda(d) - ln;
    const double low = s.lambda(p + 1) - ln;
    if (!(top > 0.0))
        throw NoSpectralGap("kt bound: lambda_d == lambda_n");
    if (!(low > 0.0))
        throw NoSpectralGap("kt bound: lambda_{p+1} == lambda_n");
    const double ratio = top / low;
    const double rate = std::min(std::sqrt(std::max(ratio - 1.0, 0.0)), 1.0);
    return 4.0 / ratio * std::pow(3.0, -static_cast<double>(t) * rate);
}

/// Block Krylov bound. point(t) = kt_coefficient(t) * tanHp for t >= 1; point(0)
/// carries tan0 = ||tan Theta(X, V_0)|| through unchanged for plotting.
inline BoundCurve kt_bound_curve(const Spectrum& s, Index d, Index p, int q, double tanHp, double tan0)
{
    BoundCurve c{BoundKind::BlockKrylov, "UB_Kt_p" + std::to_string(p), d, p, tanHp, {}};
    c.points.push_back({0, tan0});
    for (int t = 1; t <= q; t++)
        c.points.push_back({t, kt_coefficient(s, d, p, t) * tanHp});
    return c;
}

/// ||phi(Lambda_d)^{-1}||_2 ||phi(Lambda_{p,perp})||_2, evaluated on the spectrum.
inline double poly_filter_factor(const Spectrum& s, Index d, Index p, const PolynomialSpec& phi)
{
    const Index n = s.size();
    if (d < 1 || p < d || p > n - 1)
        throw std::invalid_argument("poly_filter_factor: need 1 <= d <= p <= n - 1");
    double lo = std::numeric_limits<double>::infinity();
    for (Index i = 1; i <= d; i++)
        lo = std::min(lo, std::abs(evaluate(phi, s.lambda(i))));
    if (!(lo > 0.0))
        throw SingularFilter("poly_filter_factor: phi vanishes on the top-d eigenvalues");
    double hi = 0.0;
    for (Index i = p + 1; i <= n; i++)
        hi = std::max(hi, std::abs(evaluate(phi, s.lambda(i))));
    return hi / lo;
}

/// H_p = range(W Z), W = V.basis, Z an orthonormal basis of ker([x_{d+1} .. x_p]^T W).
/// H_p lies in V, is orthogonal to x_{d+1}..x_p and has dimension d + r - p.
/// Throws GenericityFailure when rank([x_1 .. x_p]^T W) < p.
inline Subspace construct_Hp(const HermitianOperator& a, const Subspace& v, Index d, Index p, RankTolerance tol = {})
{
    const Index r = v.dim();
    if (d < 1 || p < d || p > r)
        throw std::invalid_argument("construct_Hp: need 1 <= d <= p <= dim V");
    const Matrix& w = v.basis();
    const Vector cosines = detail::singular_values(a.eigenvectors(1, p).transpose() * w);
    if (!(cosines(p - 1) > tol.relative_cutoff()))
        throw GenericityFailure("construct_Hp: span{x_1..x_p} meets V-perp (p = " + std::to_string(p) + ")");
    if (p == d)
        return v;
    const Matrix f = a.eigenvectors(d + 1, p - d).transpose() * w;
    Eigen::JacobiSVD<Matrix> svd(f, Eigen::ComputeFullV);
    const Matrix z = svd.matrixV().rightCols(r - (p - d));
    return orthonormalize(w * z, tol);
}

}  // namespace expander
