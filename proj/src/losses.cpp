#include "weakprog/losses.hpp"

#include <cmath>

#include "weakprog/error.hpp"

namespace weakprog {

double loss_bce(std::span<const double> p, std::span<const int> y) {
    if (p.size() != y.size() || p.empty()) throw ConfigError("loss_bce: size mismatch or empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = std::clamp(p[i], kProbFloor, 1.0 - kProbFloor);
        s -= y[i] ? std::log(pi) : std::log(1.0 - pi);
    }
    return s / static_cast<double>(p.size());
}

double loss_cce(const Mat& probs, const Mat& targets) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols() || probs.rows() == 0)
        throw ConfigError("loss_cce: shape mismatch or empty batch");
    double s = 0.0;
    for (Eigen::Index i = 0; i < probs.rows(); ++i)
        for (Eigen::Index k = 0; k < probs.cols(); ++k)
            if (targets(i, k) != 0.0) s -= targets(i, k) * std::log(std::max(probs(i, k), kProbFloor));
    return s / static_cast<double>(probs.rows());
}

Mat onehot(std::span<const int> y, int K) {
    Mat t = Mat::Zero(static_cast<Eigen::Index>(y.size()), K);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] >= K) throw ConfigError("onehot: label out of range");
        t(static_cast<Eigen::Index>(i), y[i]) = 1.0;
    }
    return t;
}

Mat smoothed_targets(std::span<const int> y, int K, double mu) {
    if (!(mu >= 0.0 && mu < 1.0)) throw ConfigError("label smoothing mu must lie in [0,1)");
    Mat t = onehot(y, K);
    return ((1.0 - mu) * t.array() + mu / K).matrix();
}

double loss_smoothed_cce(const Mat& probs, std::span<const int> y, double mu) {
    return loss_cce(probs, smoothed_targets(y, static_cast<int>(probs.cols()), mu));
}

namespace {

struct NtxentForward {
    Mat z;       // stacked 2N x D
    Mat zhat;    // normalized rows
    Eigen::VectorXd norms;
    Mat sim;     // 2N x 2N, scaled by 1/temperature
    Mat soft;    // row softmax over m != i
    double value = 0.0;
};

NtxentForward ntxent_forward(const Mat& a, const Mat& b, double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("loss_ntxent: temperature must be positive");
    if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() == 0)
        throw ConfigError("loss_ntxent: projection sets must have equal, non-empty shapes");
    const Eigen::Index n = a.rows();
    NtxentForward f;
    f.z.resize(2 * n, a.cols());
    for (Eigen::Index k = 0; k < n; ++k) {
        f.z.row(2 * k) = a.row(k);
        f.z.row(2 * k + 1) = b.row(k);
    }
    f.norms = f.z.rowwise().norm();
    f.zhat = f.z;
    for (Eigen::Index i = 0; i < 2 * n; ++i) f.zhat.row(i) /= (f.norms(i) + 1e-12);
    f.sim = (f.zhat * f.zhat.transpose()) / temperature;
    f.soft = Mat::Zero(2 * n, 2 * n);
    double total = 0.0;
    for (Eigen::Index i = 0; i < 2 * n; ++i) {
        const Eigen::Index pos = i ^ 1;
        double mx = -INFINITY;
        for (Eigen::Index m = 0; m < 2 * n; ++m)
            if (m != i) mx = std::max(mx, f.sim(i, m));
        double denom = 0.0;
        for (Eigen::Index m = 0; m < 2 * n; ++m)
            if (m != i) denom += std::exp(f.sim(i, m) - mx);
        for (Eigen::Index m = 0; m < 2 * n; ++m)
            if (m != i) f.soft(i, m) = std::exp(f.sim(i, m) - mx) / denom;
        total += -(f.sim(i, pos) - mx) + std::log(denom);
    }
    f.value = total / static_cast<double>(2 * n);
    return f;
}

}  // namespace

double loss_ntxent(const Mat& a, const Mat& b, double temperature) {
    return ntxent_forward(a, b, temperature).value;
}

double ntxent_with_grad(const Mat& a, const Mat& b, double temperature, Mat& da, Mat& db) {
    const auto f = ntxent_forward(a, b, temperature);
    const Eigen::Index n2 = f.z.rows();
    // dL/dsim(i, m) for m != i.
    Mat dsim = f.soft;
    for (Eigen::Index i = 0; i < n2; ++i) dsim(i, i ^ 1) -= 1.0;
    dsim /= static_cast<double>(n2);
    const Mat dzhat = ((dsim + dsim.transpose()) * f.zhat) / temperature;
    Mat dz(n2, f.z.cols());
    for (Eigen::Index i = 0; i < n2; ++i) {
        const double r = f.norms(i);
        const double re = r + 1e-12;
        const double proj = f.z.row(i).dot(dzhat.row(i));
        dz.row(i) = dzhat.row(i) / re;
        if (r > 0.0) dz.row(i) -= f.z.row(i) * (proj / (r * re * re));
    }
    da.resize(a.rows(), a.cols());
    db.resize(b.rows(), b.cols());
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        da.row(k) = dz.row(2 * k);
        db.row(k) = dz.row(2 * k + 1);
    }
    return f.value;
}

double joint_loss_noisepu(double pu_loss, double noise_loss, double alpha) {
    if (!(alpha >= 0.0)) throw ConfigError("joint_loss_noisepu: alpha must be >= 0");
    return pu_loss + alpha * noise_loss;
}

double joint_loss_regcon(double cce, double smooth_cce, double ntxent, double alpha, double beta) {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("joint_loss_regcon: alpha and beta must be >= 0");
    return cce + alpha * smooth_cce + beta * ntxent;
}

Mat softmax_rows(const Mat& logits) {
    Mat p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        double s = 0.0;
        for (Eigen::Index k = 0; k < logits.cols(); ++k) s += (p(i, k) = std::exp(logits(i, k) - mx));
        p.row(i) /= s;
    }
    return p;
}

double cross_entropy_with_grad(const Mat& logits, const Mat& targets, Mat& dlogits) {
    const Mat p = softmax_rows(logits);
    const double value = loss_cce(p, targets);
    const double inv_n = 1.0 / static_cast<double>(logits.rows());
    dlogits.resize(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        // dL/dp_k = -t_k / (N p_k) where p_k is not clamped.
        Eigen::RowVectorXd dp = Eigen::RowVectorXd::Zero(logits.cols());
        for (Eigen::Index k = 0; k < logits.cols(); ++k)
            if (targets(i, k) != 0.0 && p(i, k) > kProbFloor) dp(k) = -targets(i, k) * inv_n / p(i, k);
        const double dot = dp.dot(p.row(i));
        for (Eigen::Index j = 0; j < logits.cols(); ++j) dlogits(i, j) = p(i, j) * (dp(j) - dot);
    }
    return value;
}

}  // namespace weakprog
