#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace weakprog {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kProbFloor = 1e-12;

/// Mean binary cross-entropy; p is the probability of class 1.
double loss_bce(std::span<const double> p, std::span<const int> y);

/// Mean categorical cross-entropy against (possibly soft) row targets.
double loss_cce(const Mat& probs, const Mat& targets);

/// Targets (1 - mu) * onehot(y) + mu / K.
Mat smoothed_targets(std::span<const int> y, int K, double mu);
Mat onehot(std::span<const int> y, int K);
double loss_smoothed_cce(const Mat& probs, std::span<const int> y, double mu);

/// NT-Xent over the interleaved rows (a_0, b_0, a_1, b_1, ...); positives
/// are (a_k, b_k). Cosine similarity with 1e-12 added to the norms.
double loss_ntxent(const Mat& a, const Mat& b, double temperature);

double joint_loss_noisepu(double pu_loss, double noise_loss, double alpha);
double joint_loss_regcon(double cce, double smooth_cce, double ntxent, double alpha, double beta);

Mat softmax_rows(const Mat& logits);

/// Cross-entropy through softmax: returns the loss and writes dL/dlogits.
/// Entries clamped at kProbFloor contribute no gradient.
double cross_entropy_with_grad(const Mat& logits, const Mat& targets, Mat& dlogits);

/// NT-Xent value with gradients for both projection sets.
double ntxent_with_grad(const Mat& a, const Mat& b, double temperature, Mat& da, Mat& db);

}  // namespace weakprog
