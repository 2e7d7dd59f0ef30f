#include "dfo/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dfo/errors.hpp"
#include "dfo/rng.hpp"

namespace dfo::linalg {
namespace {

void validate_system(const Matrix& J, const Vector& f) {
  if (J.rows() < 1 || J.cols() < 1) {
    throw InputError("least-squares system needs at least one row and one column");
  }
  if (f.size() != J.rows()) {
    throw InputError("right-hand side has length " + std::to_string(f.size()) + ", expected " +
                     std::to_string(J.rows()));
  }
  if (!J.allFinite()) throw InputError("Jacobian contains non-finite entries");
  if (!f.allFinite()) throw InputError("right-hand side contains non-finite entries");
}

void validate_truncation(const Truncation& truncation) {
  if (!(truncation.eps_rel >= 0.0 && truncation.eps_rel < 1.0)) {
    throw InputError("eps_rel must lie in [0, 1)");
  }
  if (!(truncation.abs_tol >= 0.0) || !std::isfinite(truncation.abs_tol)) {
    throw InputError("abs_tol must be finite and nonnegative");
  }
}

SpectralFactors factors_from_svd(const Eigen::BDCSVD<Matrix>& svd, const Matrix& right_rotation,
                                 const Vector& projected_rhs) {
  SpectralFactors out;
  out.sigma = svd.singularValues();
  out.right = right_rotation.size() ? Matrix(right_rotation * svd.matrixV()) : svd.matrixV();
  out.coeffs = svd.matrixU().transpose() * projected_rhs;
  return out;
}

}  // namespace

double Truncation::threshold(double sigma_max) const { return std::max(abs_tol, eps_rel * sigma_max); }

SpectralFactors qr_svd_factors(const Matrix& J, const Vector& f) {
  validate_system(J, f);
  const Index n = J.rows();
  const Index p = J.cols();
  constexpr unsigned kThin = Eigen::ComputeThinU | Eigen::ComputeThinV;

  if (n >= p) {
    // J = Q R, R = W S V^T  =>  J = (Q W) S V^T.
    const Eigen::HouseholderQR<Matrix> qr(J);
    const Matrix r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Vector qtf = qr.householderQ().adjoint() * f;
    const Eigen::BDCSVD<Matrix> svd(r, kThin);
    return factors_from_svd(svd, Matrix(), qtf.head(p));
  }

  // Wide case: J^T = Q R, so J = R^T Q^T and the right factor is rotated by Q.
  const Eigen::HouseholderQR<Matrix> qr(J.transpose());
  const Matrix lower = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>().transpose();
  const Matrix q_thin = qr.householderQ() * Matrix::Identity(p, n);
  const Eigen::BDCSVD<Matrix> svd(lower, kThin);
  return factors_from_svd(svd, q_thin, f);
}

SpectralFactors sketched_factors(const Matrix& J, const Vector& f, const SketchConfig& sketch) {
  validate_system(J, f);
  if (sketch.sketch_size < 1) throw InputError("sketch_size must be at least 1");
  if (sketch.oversampling < 0) throw InputError("oversampling must be nonnegative");
  const Index n = J.rows();
  const Index p = J.cols();
  const Index k = std::min({sketch.sketch_size + sketch.oversampling, n, p});

  Rng rng(sketch.seed);
  Matrix gamma(p, k);
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < p; ++i) gamma(i, j) = rng.normal();
  }

  const Matrix y = J * gamma;
  const Eigen::HouseholderQR<Matrix> qr(y);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  const Matrix b = q.transpose() * J;
  const Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return factors_from_svd(svd, Matrix(), q.transpose() * f);
}

LsqResult truncate(const SpectralFactors& factors, const Truncation& truncation) {
  validate_truncation(truncation);
  const Index k = factors.sigma.size();
  LsqResult out;
  out.sigma_max = k > 0 ? factors.sigma(0) : 0.0;
  const double threshold = truncation.threshold(out.sigma_max);

  Index rank = 0;
  while (rank < k && factors.sigma(rank) > 0.0 && factors.sigma(rank) >= threshold) ++rank;

  out.basis = factors.right.leftCols(rank);
  out.singulars = factors.sigma.head(rank);
  const Vector scaled = factors.coeffs.head(rank).cwiseQuotient(out.singulars);
  out.eta_bar = out.basis * scaled;
  if (rank == 0) out.eta_bar = Vector::Zero(factors.right.rows());
  return out;
}

LsqResult solve_min_norm(const Matrix& J, const Vector& f, const Truncation& truncation) {
  validate_truncation(truncation);
  return truncate(qr_svd_factors(J, f), truncation);
}

LsqResult solve_min_norm(const Matrix& J, const Vector& f, double eps_rel) {
  return solve_min_norm(J, f, Truncation{eps_rel, 0.0});
}

Vector tikhonov_filter(const SpectralFactors& factors, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("Tikhonov gamma must be positive");
  const Vector s = factors.sigma;
  const Vector weights = s.array() / (s.array().square() + gamma);
  return factors.right * weights.cwiseProduct(factors.coeffs);
}

Vector solve_tikhonov(const Matrix& J, const Vector& f, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("Tikhonov gamma must be positive");
  return tikhonov_filter(qr_svd_factors(J, f), gamma);
}

Vector project_complement(const Matrix& basis, const Vector& z) {
  if (basis.cols() == 0) return z;
  if (basis.rows() != z.size()) {
    throw InputError("projector basis has " + std::to_string(basis.rows()) + " rows, vector has length " +
                     std::to_string(z.size()));
  }
  return z - basis * (basis.transpose() * z);
}

LsqResult solve_min_norm_randomized(const Matrix& J, const Vector& f, const Truncation& truncation,
                                    const SketchConfig& sketch) {
  validate_truncation(truncation);
  return truncate(sketched_factors(J, f, sketch), truncation);
}

LsqResult solve_min_norm_randomized(const Matrix& J, const Vector& f, double eps_rel,
                                    const SketchConfig& sketch) {
  return solve_min_norm_randomized(J, f, Truncation{eps_rel, 0.0}, sketch);
}

}  // namespace dfo::linalg
