#pragma once

#include <vector>

// Stored 40 + 40 score fixture (two overlapping Gaussian samples, 4 decimals).
namespace auc_fixture {

inline const std::vector<double> pos{0.673,   0.0257,  1.4946, 1.425,   0.5588,  0.9003,  -0.8037, 0.1176,
                                      1.2166,  1.5955,  0.991,  0.1772,  0.6449,  1.5253,  -0.3667, 2.2048,
                                      0.7714,  0.195,   -0.0395, -0.1292, 1.763,   -0.3548, 0.1575,  1.1019,
                                      -0.2129, -0.1554, 2.6878, 0.8551,  0.6264,  3.1488,  1.9965,  1.5764,
                                      1.8678,  1.5677,  1.1311, -1.3378, 1.6501,  0.8609,  2.5219,  1.9977};
inline const std::vector<double> neg{1.3579,  -0.4024, 0.4557,  1.314,   -0.9971, -0.135,  -0.5412, 0.1989,
                                      -0.0813, -0.3489, 0.8325,  0.5167,  0.8265,  0.6588,  -1.3154, 0.1752,
                                      -0.7019, 1.5636,  -0.0777, 1.1173,  0.6672,  0.1237,  -1.3462, -0.2802,
                                      0.3955,  0.9547,  1.7428,  0.4723,  2.0903,  -0.3662, 0.3036,  -0.3509,
                                      -0.6919, -1.6984, -1.8938, 1.3706,  -1.6054, -0.8583, -1.2987, 0.0038};

// Frozen oracles: exhaustive AUC and the variance of a 1e5-replicate stratified bootstrap.
inline constexpr double kAuc = 0.726875;
inline constexpr double kBootstrapVariance = 0.003123633990;

}  // namespace auc_fixture
