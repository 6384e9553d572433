#pragma once

#include <Eigen/Dense>
#include <torch/torch.h>

#include <vector>

namespace tats {

using FeatureMatrix = Eigen::MatrixXd;  // N x F, one row per clip

struct GaussianStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Sample mean and unbiased covariance; eps * I is added when N <= F.
GaussianStats gaussian_stats(const FeatureMatrix& feats, double eps = 1e-6);

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).
double frechet_distance(const GaussianStats& a, const GaussianStats& b);
double frechet_distance(const FeatureMatrix& a, const FeatureMatrix& b);

// Unbiased MMD^2 with k(x, y) = (x.y / F + 1)^3.
double kernel_distance(const FeatureMatrix& a, const FeatureMatrix& b);

// exp(mean_i KL(p_i || mean_j p_j)).
double inception_score(const Eigen::MatrixXd& probs);

// Fraction of rows whose argmax (lowest index on ties) agrees.
double ccs(const Eigen::MatrixXd& probs_t, const Eigen::MatrixXd& probs_0);

// Mean over rows of KL(probs_t[i] || probs_0[i]), probs_0 clamped at 1e-12.
double ics(const Eigen::MatrixXd& probs_t, const Eigen::MatrixXd& probs_0);

// Per-channel histograms over [-1, 1] with `bins` buckets, concatenated.
std::vector<double> color_histogram(const torch::Tensor& frame, int64_t bins);
// Pearson correlation of the two histograms of H x W x C frames in [-1, 1].
double color_hist_correlation(const torch::Tensor& frame_a, const torch::Tensor& frame_b, int64_t bins);

// delta[m] = FD(offset m, reference) - FD(offset 0, reference).
std::vector<double> fvd_delta_curve(const std::vector<FeatureMatrix>& per_offset, const FeatureMatrix& reference);
std::vector<double> fvd_delta_curve(const std::vector<FeatureMatrix>& per_offset);

Eigen::MatrixXd to_eigen(const torch::Tensor& matrix);

}  // namespace tats
