#pragma once

// Regularized least-squares solvers for the parameter-velocity problem
//
//     min_eta || J eta - f ||_2
//
// with J the N x p batch Jacobian. All routes factor J as J = U S V^T (via a
// thin QR followed by an SVD of the triangular factor, or via a randomized
// range finder) and then filter the singular values.

#include <cstdint>

#include <Eigen/Dense>

namespace dfo::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Singular values sigma_i >= threshold(sigma_max) are kept (closed
/// inequality). The threshold is max(abs_tol, eps_rel * sigma_max); a pure
/// relative rule has abs_tol = 0. Exact zeros are never kept, so the zero
/// matrix yields rank 0.
struct Truncation {
  double eps_rel = 1e-12;
  double abs_tol = 0.0;

  double threshold(double sigma_max) const;

  bool operator==(const Truncation&) const = default;
};

/// Output of one truncated solve.
struct LsqResult {
  Vector eta_bar;    ///< minimal-norm velocity, length p
  Matrix basis;      ///< p x r retained right singular vectors
  Vector singulars;  ///< retained singular values, nonincreasing
  double sigma_max = 0.0;

  Index retained_rank() const { return basis.cols(); }
  /// Smallest retained singular value, 0 when nothing is retained.
  double sigma_min_retained() const { return singulars.size() ? singulars(singulars.size() - 1) : 0.0; }
};

struct SketchConfig {
  Index sketch_size = 10;
  Index oversampling = 10;
  std::uint64_t seed = 0;

  bool operator==(const SketchConfig&) const = default;
};

/// Right singular factors of J together with the left-projected data
/// U^T f. Shared by the truncated and Tikhonov filters so both can be
/// taken from a single factorization.
struct SpectralFactors {
  Vector sigma;   ///< nonincreasing, length k
  Matrix right;   ///< p x k
  Vector coeffs;  ///< U^T f, length k
};

/// Thin QR of J (or of J^T when N < p) followed by a dense SVD of the
/// triangular factor.
SpectralFactors qr_svd_factors(const Matrix& J, const Vector& f);

/// Randomized range finder: Y = J Gamma with Gaussian Gamma (p x k,
/// k = min(sketch_size + oversampling, N, p)), Q = orth(Y), SVD of Q^T J.
SpectralFactors sketched_factors(const Matrix& J, const Vector& f, const SketchConfig& sketch);

/// Applies the hard truncation filter to precomputed factors.
LsqResult truncate(const SpectralFactors& factors, const Truncation& truncation);

LsqResult solve_min_norm(const Matrix& J, const Vector& f, const Truncation& truncation);
LsqResult solve_min_norm(const Matrix& J, const Vector& f, double eps_rel);

/// (J^T J + gamma I)^{-1} J^T f via the Tikhonov filter sigma / (sigma^2 + gamma).
Vector tikhonov_filter(const SpectralFactors& factors, double gamma);
Vector solve_tikhonov(const Matrix& J, const Vector& f, double gamma);

/// z - basis (basis^T z). An empty basis returns z unchanged.
Vector project_complement(const Matrix& basis, const Vector& z);

LsqResult solve_min_norm_randomized(const Matrix& J, const Vector& f, const Truncation& truncation,
                                    const SketchConfig& sketch);
LsqResult solve_min_norm_randomized(const Matrix& J, const Vector& f, double eps_rel,
                                    const SketchConfig& sketch);

}  // namespace dfo::linalg
