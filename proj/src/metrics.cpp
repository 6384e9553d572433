#include "tats/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tats {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite values");
}

Eigen::Index argmax_row(const Eigen::MatrixXd& m, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < m.cols(); ++j) {
    if (m(row, j) > m(row, best)) best = j;
  }
  return best;
}

}  // namespace

GaussianStats gaussian_stats(const FeatureMatrix& feats, double eps) {
  check_finite(feats, "features");
  const auto n = feats.rows();
  const auto f = feats.cols();
  if (n < 1 || f < 1) throw std::invalid_argument("need at least one feature vector");
  GaussianStats s;
  s.mean = feats.colwise().mean().transpose();
  if (n > 1) {
    Eigen::MatrixXd centered = feats.rowwise() - s.mean.transpose();
    s.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  } else {
    s.cov = Eigen::MatrixXd::Zero(f, f);
  }
  if (n <= f) s.cov += eps * Eigen::MatrixXd::Identity(f, f);
  return s;
}

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.mean.size() != b.mean.size()) throw std::invalid_argument("feature dimensions differ");
  // sqrt(S_a S_b) has the same trace as sqrt(sqrt(S_a) S_b sqrt(S_a)), which
  // is symmetric PSD and safe for a self-adjoint solver.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(a.cov);
  Eigen::VectorXd ra = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd sqrt_a = ea.eigenvectors() * ra.asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd inner = sqrt_a * b.cov * sqrt_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(inner, Eigen::EigenvaluesOnly);
  const double tr_sqrt = ei.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

double frechet_distance(const FeatureMatrix& a, const FeatureMatrix& b) {
  return frechet_distance(gaussian_stats(a), gaussian_stats(b));
}

double kernel_distance(const FeatureMatrix& a, const FeatureMatrix& b) {
  check_finite(a, "features");
  check_finite(b, "features");
  const auto m = a.rows(), n = b.rows();
  if (m < 2 || n < 2) throw std::invalid_argument("kernel_distance needs at least 2 samples per set");
  if (a.cols() != b.cols()) throw std::invalid_argument("feature dimensions differ");
  const double f = static_cast<double>(a.cols());
  auto kernel = [f](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    Eigen::MatrixXd k = (x * y.transpose()).array() / f + 1.0;
    return Eigen::MatrixXd(k.array().cube());
  };
  const Eigen::MatrixXd kaa = kernel(a, a), kbb = kernel(b, b), kab = kernel(a, b);
  const double saa = (kaa.sum() - kaa.trace()) / static_cast<double>(m * (m - 1));
  const double sbb = (kbb.sum() - kbb.trace()) / static_cast<double>(n * (n - 1));
  const double sab = kab.sum() / static_cast<double>(m * n);
  return saa + sbb - 2.0 * sab;
}

double inception_score(const Eigen::MatrixXd& probs) {
  check_finite(probs, "probabilities");
  if (probs.rows() < 1) throw std::invalid_argument("inception_score needs at least one row");
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (!(probs.row(i).sum() > 0)) throw std::invalid_argument("inception_score received a zero row");
  }
  const Eigen::RowVectorXd marginal = probs.colwise().mean();
  double total = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      const double p = probs(i, j);
      if (p > 0) total += p * (std::log(p) - std::log(marginal(j)));
    }
  }
  return std::exp(total / static_cast<double>(probs.rows()));
}

double ccs(const Eigen::MatrixXd& probs_t, const Eigen::MatrixXd& probs_0) {
  if (probs_t.rows() != probs_0.rows() || probs_t.cols() != probs_0.cols()) {
    throw std::invalid_argument("ccs inputs differ in shape");
  }
  if (probs_t.rows() == 0) throw std::invalid_argument("ccs needs at least one video");
  int64_t agree = 0;
  for (Eigen::Index i = 0; i < probs_t.rows(); ++i) agree += argmax_row(probs_t, i) == argmax_row(probs_0, i);
  return static_cast<double>(agree) / static_cast<double>(probs_t.rows());
}

double ics(const Eigen::MatrixXd& probs_t, const Eigen::MatrixXd& probs_0) {
  if (probs_t.rows() != probs_0.rows() || probs_t.cols() != probs_0.cols()) {
    throw std::invalid_argument("ics inputs differ in shape");
  }
  if (probs_t.rows() == 0) throw std::invalid_argument("ics needs at least one video");
  double total = 0;
  for (Eigen::Index i = 0; i < probs_t.rows(); ++i) {
    double kl = 0;
    for (Eigen::Index j = 0; j < probs_t.cols(); ++j) {
      const double p = probs_t(i, j);
      if (p > 0) kl += p * (std::log(p) - std::log(std::max(probs_0(i, j), 1e-12)));
    }
    total += std::max(kl, 0.0);
  }
  return total / static_cast<double>(probs_t.rows());
}

std::vector<double> color_histogram(const torch::Tensor& frame, int64_t bins) {
  if (frame.dim() != 3) throw std::invalid_argument("color_histogram expects H x W x C");
  if (bins < 1) throw std::invalid_argument("bins must be >= 1");
  auto f = frame.to(torch::kFloat64).contiguous();
  const int64_t c = f.size(2);
  const int64_t pixels = f.size(0) * f.size(1);
  std::vector<double> hist(static_cast<size_t>(c * bins), 0.0);
  const double* data = f.data_ptr<double>();
  for (int64_t p = 0; p < pixels; ++p) {
    for (int64_t ch = 0; ch < c; ++ch) {
      const double v = std::clamp(data[p * c + ch], -1.0, 1.0);
      const auto b = std::min<int64_t>(bins - 1, static_cast<int64_t>((v + 1.0) / 2.0 * static_cast<double>(bins)));
      hist[static_cast<size_t>(ch * bins + b)] += 1.0;
    }
  }
  return hist;
}

double color_hist_correlation(const torch::Tensor& frame_a, const torch::Tensor& frame_b, int64_t bins) {
  if (!frame_a.sizes().equals(frame_b.sizes())) throw std::invalid_argument("frames differ in shape");
  const auto ha = color_histogram(frame_a, bins);
  const auto hb = color_histogram(frame_b, bins);
  const Eigen::Map<const Eigen::VectorXd> a(ha.data(), static_cast<Eigen::Index>(ha.size()));
  const Eigen::Map<const Eigen::VectorXd> b(hb.data(), static_cast<Eigen::Index>(hb.size()));
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double va = ca.squaredNorm(), vb = cb.squaredNorm();
  if (va == 0 || vb == 0) return a == b ? 1.0 : 0.0;
  return ca.dot(cb) / std::sqrt(va * vb);
}

std::vector<double> fvd_delta_curve(const std::vector<FeatureMatrix>& per_offset, const FeatureMatrix& reference) {
  if (per_offset.empty()) throw std::invalid_argument("fvd_delta_curve needs at least one offset");
  const auto ref = gaussian_stats(reference);
  std::vector<double> fd;
  for (const auto& feats : per_offset) fd.push_back(frechet_distance(gaussian_stats(feats), ref));
  std::vector<double> delta;
  for (double v : fd) delta.push_back(v - fd.front());
  return delta;
}

std::vector<double> fvd_delta_curve(const std::vector<FeatureMatrix>& per_offset) {
  if (per_offset.empty()) throw std::invalid_argument("fvd_delta_curve needs at least one offset");
  return fvd_delta_curve(per_offset, per_offset.front());
}

Eigen::MatrixXd to_eigen(const torch::Tensor& matrix) {
  if (matrix.dim() != 2) throw std::invalid_argument("to_eigen expects a matrix");
  auto m = matrix.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  Eigen::MatrixXd out(m.size(0), m.size(1));
  const double* data = m.data_ptr<double>();
  for (int64_t i = 0; i < m.size(0); ++i) {
    for (int64_t j = 0; j < m.size(1); ++j) out(i, j) = data[i * m.size(1) + j];
  }
  return out;
}

}  // namespace tats
