#pragma once

// Test operators: diagonal spectra with linear, ellipsoidal and polynomial
// decay, dense symmetric operators, and seeded Gaussian start subspaces.
//
// Indexing: the closed-form models are written for i = 1..n. Entry i of a
// model lives at 0-based position i - 1 of Spectrum::values; Spectrum::lambda()
// is the only 1-based accessor in the library.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <fstream>
#include <limits>
#include <locale>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace expander {

/// Eigenvalues lambda_1 >= ... >= lambda_n.
class Spectrum
{
public:
    Spectrum() = default;

    /// Throws InvalidModel unless the values are finite and nonincreasing.
    explicit Spectrum(Vector values) : m_values(std::move(values))
    {
        for (Index i = 0; i < m_values.size(); i++)
        {
            if (!std::isfinite(m_values(i)))
                throw InvalidModel("Spectrum: non-finite entry at position " + std::to_string(i));
            if (i > 0 && m_values(i) > m_values(i - 1))
                throw InvalidModel("Spectrum: entries must be nonincreasing (position " + std::to_string(i) + ")");
        }
    }

    const Vector& values() const noexcept { return m_values; }
    Index size() const noexcept { return m_values.size(); }

    /// lambda_i with the 1-based index i used by the formulas.
    double lambda(Index i) const
    {
        if (i < 1 || i > size())
            throw std::out_of_range("Spectrum::lambda: index " + std::to_string(i));
        return m_values(i - 1);
    }

    double largest() const { return lambda(1); }
    double smallest() const { return lambda(size()); }

private:
    Vector m_values;
};

enum class ModelKind { Linear, Ellipsoidal, Polynomial, Custom };

/// A_ii = b (1 - (a + c (i/n)^2))^{1/2} - H
struct EllipsoidalParams
{
    double a = 0.0;
    double b = 1.0;
    double c = 1.0;
    double H = 0.0;

    /// Preset calibrated to mu_d ~= 0.9997 at n = 5000, d = 5, G = 0. With b, c < 0
    /// the profile is steep enough at the top for that gap; entries span [~1e-7, 1).
    static EllipsoidalParams calibrated() { return {0.999999, -1.0, -1.0, -1.0000006}; }
};

/// A_ii = c / ((i + s)^{1/2} + m)
struct PolynomialParams
{
    double c = 1000.0;
    double s = 200.0;
    double m = 50.0;
};

struct ModelParams
{
    ModelKind model = ModelKind::Linear;
    Index n = 500;
    double G = 0.0;  ///< added to the top d entries
    Index d = 5;
    EllipsoidalParams ellipsoidal = EllipsoidalParams::calibrated();
    PolynomialParams polynomial;
};

inline const char* to_string(ModelKind kind)
{
    switch (kind)
    {
    case ModelKind::Linear: return "linear";
    case ModelKind::Ellipsoidal: return "ellipsoidal";
    case ModelKind::Polynomial: return "polynomial";
    case ModelKind::Custom: return "custom";
    }
    return "?";
}

inline ModelKind model_from_string(const std::string& s)
{
    if (s == "linear") return ModelKind::Linear;
    if (s == "ellipsoidal") return ModelKind::Ellipsoidal;
    if (s == "polynomial") return ModelKind::Polynomial;
    if (s == "custom") return ModelKind::Custom;
    throw InvalidModel("unknown model '" + s + "'");
}

namespace detail {

inline void check_model(const ModelParams& p)
{
    if (p.n < 1)
        throw InvalidModel("model: n must be >= 1");
    if (p.d < 0 || p.d > p.n)
        throw InvalidModel("model: need 0 <= d <= n");
    if (!(p.G >= 0.0) || !std::isfinite(p.G))
        throw InvalidModel("model: gap boost G must be finite and >= 0");
}

inline Spectrum finish(Vector values, const ModelParams& p)
{
    values.head(p.d).array() += p.G;
    return Spectrum(std::move(values));
}

}  // namespace detail

/// A_ii = 3000 - (3/5) i
inline Spectrum linear_decay(const ModelParams& p)
{
    detail::check_model(p);
    Vector v(p.n);
    for (Index k = 0; k < p.n; k++)
        v(k) = 3000.0 - 0.6 * static_cast<double>(k + 1);
    return detail::finish(std::move(v), p);
}

inline Spectrum ellipsoidal_decay(const ModelParams& p)
{
    detail::check_model(p);
    const auto& e = p.ellipsoidal;
    const double n = static_cast<double>(p.n);
    Vector v(p.n);
    for (Index k = 0; k < p.n; k++)
    {
        const double x = static_cast<double>(k + 1) / n;
        const double radicand = 1.0 - (e.a + e.c * x * x);
        if (radicand < 0.0)
            throw InvalidModel("ellipsoidal_decay: negative radicand at i = " + std::to_string(k + 1));
        v(k) = e.b * std::sqrt(radicand) - e.H;
    }
    return detail::finish(std::move(v), p);
}

inline Spectrum polynomial_decay(const ModelParams& p)
{
    detail::check_model(p);
    const auto& q = p.polynomial;
    if (!(q.c > 0.0) || !(q.s >= 0.0) || !(q.m >= 0.0))
        throw InvalidModel("polynomial_decay: need c > 0, s >= 0, m >= 0");
    Vector v(p.n);
    for (Index k = 0; k < p.n; k++)
        v(k) = q.c / (std::sqrt(static_cast<double>(k + 1) + q.s) + q.m);
    return detail::finish(std::move(v), p);
}

/// Dispatch on params.model. Custom spectra are loaded elsewhere (read_spectrum_csv).
inline Spectrum make_spectrum(const ModelParams& p)
{
    switch (p.model)
    {
    case ModelKind::Linear: return linear_decay(p);
    case ModelKind::Ellipsoidal: return ellipsoidal_decay(p);
    case ModelKind::Polynomial: return polynomial_decay(p);
    case ModelKind::Custom: break;
    }
    throw InvalidModel("make_spectrum: custom spectra must be read from a file");
}

/// Anything that can apply a symmetric n x n matrix to a block of vectors.
template <class Op>
concept SymmetricOperator = requires(const Op& op, const Matrix& m) {
    { op.size() } -> std::convertible_to<Index>;
    { op.apply(m) } -> std::convertible_to<Matrix>;
};

/// A real symmetric operator held either as a diagonal spectrum or as a dense
/// matrix with a cached eigen-frame (eigenvalues nonincreasing).
class HermitianOperator
{
public:
    static HermitianOperator diagonal(Spectrum spectrum)
    {
        HermitianOperator op;
        op.m_spectrum = std::move(spectrum);
        return op;
    }

    /// Throws std::invalid_argument if the matrix is not symmetric to 1e-12 (relative to max entry).
    static HermitianOperator dense(Matrix a)
    {
        if (a.rows() != a.cols() || a.rows() == 0)
            throw std::invalid_argument("HermitianOperator: matrix must be square and nonempty");
        const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
        if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw std::invalid_argument("HermitianOperator: matrix is not symmetric");
        a = 0.5 * (a + a.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
        if (eig.info() != Eigen::Success)
            throw std::runtime_error("HermitianOperator: eigensolver failed");
        HermitianOperator op;
        op.m_spectrum = Spectrum(eig.eigenvalues().reverse());
        op.m_eigenvectors = eig.eigenvectors().rowwise().reverse();
        op.m_dense = std::move(a);
        return op;
    }

    bool is_diagonal() const noexcept { return m_dense.size() == 0; }
    Index size() const noexcept { return m_spectrum.size(); }
    const Spectrum& spectrum() const noexcept { return m_spectrum; }

    Matrix apply(const Matrix& m) const
    {
        if (m.rows() != size())
            throw std::invalid_argument("HermitianOperator::apply: dimension mismatch");
        if (is_diagonal())
            return m_spectrum.values().asDiagonal() * m;
        return m_dense * m;
    }

    /// Eigenvectors x_first .. x_{first+count-1} (1-based, matching lambda()).
    Matrix eigenvectors(Index first, Index count) const
    {
        if (first < 1 || count < 0 || first - 1 + count > size())
            throw std::out_of_range("HermitianOperator::eigenvectors: index range");
        if (is_diagonal())
        {
            Matrix e = Matrix::Zero(size(), count);
            for (Index j = 0; j < count; j++)
                e(first - 1 + j, j) = 1.0;
            return e;
        }
        return m_eigenvectors.middleCols(first - 1, count);
    }

    Matrix to_dense() const
    {
        if (is_diagonal())
            return m_spectrum.values().asDiagonal();
        return m_dense;
    }

private:
    Spectrum m_spectrum;
    Matrix m_dense;
    Matrix m_eigenvectors;
};

inline Matrix apply(const HermitianOperator& a, const Matrix& m)
{
    return a.apply(m);
}

/// Orthonormalized range of a seeded standard Gaussian n x r draw, filled column-major
/// from std::mt19937_64 through std::normal_distribution.
inline Subspace gaussian_subspace(Index n, Index r, std::uint64_t seed, RankTolerance tol = {})
{
    if (r < 1 || r > n)
        throw std::invalid_argument("gaussian_subspace: need 1 <= r <= n");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix g(n, r);
    for (Index j = 0; j < r; j++)
        for (Index i = 0; i < n; i++)
            g(i, j) = normal(rng);
    return orthonormalize(g, tol);
}

/// span{x_1, ..., x_d}; throws NoSpectralGap when lambda_d - lambda_{d+1} is at roundoff level.
inline Subspace target_subspace(const HermitianOperator& a, Index d)
{
    const Index n = a.size();
    if (d < 1 || d > n)
        throw std::invalid_argument("target_subspace: need 1 <= d <= n");
    const Spectrum& s = a.spectrum();
    if (d < n)
    {
        const double gap = s.lambda(d) - s.lambda(d + 1);
        const double floor = 10.0 * std::numeric_limits<double>::epsilon() * std::abs(s.largest());
        if (!(gap > floor))
            throw NoSpectralGap("target_subspace: lambda_d == lambda_{d+1} (d = " + std::to_string(d) + ")");
    }
    return detail::make_subspace(a.eigenvectors(1, d));
}

/// One value per line, 17 significant digits.
inline void write_spectrum_csv(const std::string& path, const Spectrum& s)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_spectrum_csv: cannot open " + path);
    out.imbue(std::locale::classic());
    out.precision(17);
    out << "lambda\n";
    for (Index i = 0; i < s.size(); i++)
        out << s.values()(i) << '\n';
    if (!out)
        throw std::runtime_error("write_spectrum_csv: write failed for " + path);
}

/// Reads a one-column CSV; a non-numeric first line is taken as a header.
inline Spectrum read_spectrum_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_spectrum_csv: cannot open " + path);
    std::vector<double> vals;
    std::string line;
    bool first = true;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::istringstream ss(line);
        ss.imbue(std::locale::classic());
        double v;
        if (!(ss >> v))
        {
            if (first)
            {
                first = false;
                continue;
            }
            throw InvalidModel("read_spectrum_csv: bad value '" + line + "'");
        }
        first = false;
        vals.push_back(v);
    }
    if (vals.empty())
        throw InvalidModel("read_spectrum_csv: no values in " + path);
    return Spectrum(Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size())));
}

}  // namespace expander
