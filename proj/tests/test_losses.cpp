#include <cmath>

#include "doctest.h"
#include "weakprog/error.hpp"
#include "weakprog/losses.hpp"
#include "weakprog/optim.hpp"
#include "weakprog/rng.hpp"

using namespace weakprog;

namespace {

Mat probs2(std::initializer_list<double> p1) {
    Mat m(static_cast<Eigen::Index>(p1.size()), 2);
    Eigen::Index i = 0;
    for (double p : p1) {
        m(i, 0) = 1.0 - p;
        m(i, 1) = p;
        ++i;
    }
    return m;
}

}  // namespace

TEST_CASE("binary cross-entropy closed forms") {
    const double half[] = {0.5};
    const int one[] = {1};
    CHECK(std::abs(loss_bce(half, one) - std::log(2.0)) < 1e-12);
    const double p[] = {0.9, 0.2};
    const int y[] = {1, 0};
    CHECK(loss_bce(p, y) == doctest::Approx(0.164252033486018).epsilon(1e-12));
    const double sure[] = {1.0};
    CHECK(loss_bce(sure, one) == doctest::Approx(0.0));
    const double wrong[] = {0.0};
    CHECK(std::isfinite(loss_bce(wrong, one)));
}

TEST_CASE("categorical cross-entropy equals BCE for two classes") {
    Rng rng(5);
    std::vector<double> p(50);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = rng.uniform(0.01, 0.99);
        y[i] = rng.bernoulli(0.5);
    }
    Mat P(50, 2);
    for (int i = 0; i < 50; ++i) {
        P(i, 0) = 1 - p[i];
        P(i, 1) = p[i];
    }
    CHECK(std::abs(loss_cce(P, onehot(y, 2)) - loss_bce(p, y)) < 1e-12);
}

TEST_CASE("label smoothing targets and value") {
    const int y[] = {1};
    const Mat t = smoothed_targets(y, 2, 0.1);
    CHECK(std::abs(t(0, 0) - 0.05) < 1e-12);
    CHECK(std::abs(t(0, 1) - 0.95) < 1e-12);
    const double expect = -(0.05 * std::log(0.05) + 0.95 * std::log(0.95));
    CHECK(std::abs(loss_smoothed_cce(probs2({0.95}), y, 0.1) - expect) < 1e-12);
    CHECK(std::abs(expect - 0.198515) < 1e-6);
    CHECK(loss_smoothed_cce(probs2({0.7}), y, 0.0) == loss_cce(probs2({0.7}), onehot(y, 2)));
    CHECK_THROWS_AS(smoothed_targets(y, 2, 1.0), ConfigError);
}

TEST_CASE("NT-Xent closed forms") {
    Mat a(1, 2), b(1, 2);
    a << 1, 0;
    b << 1, 0;
    CHECK(std::abs(loss_ntxent(a, b, 1.0)) < 1e-12);

    Mat a2(2, 2), b2(2, 2);
    a2 << 1, 0, 0, 1;
    b2 << 1, 0, 0, 1;
    CHECK(std::abs(loss_ntxent(a2, b2, 1.0) - std::log(1.0 + 2.0 / std::exp(1.0))) < 1e-12);
    CHECK(std::abs(loss_ntxent(a2, b2, 1.0) - 0.551445) < 1e-6);
    CHECK_THROWS_AS(loss_ntxent(a2, b2, 0.0), ConfigError);
}

TEST_CASE("NT-Xent symmetry and scale invariance") {
    Rng rng(9);
    Mat a(5, 4), b(5, 4);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) {
            a(i, j) = rng.normal(0, 1);
            b(i, j) = rng.normal(0, 1);
        }
    const double base = loss_ntxent(a, b, 0.5);
    CHECK(std::abs(loss_ntxent(b, a, 0.5) - base) < 1e-9);
    Mat s = a;
    s.row(2) *= 7.5;
    CHECK(std::abs(loss_ntxent(s, b, 0.5) - base) < 1e-9);
}

TEST_CASE("NT-Xent gradient matches finite differences") {
    Rng rng(21);
    Mat a(3, 4), b(3, 4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            a(i, j) = rng.normal(0, 1);
            b(i, j) = rng.normal(0, 1);
        }
    Mat da, db;
    ntxent_with_grad(a, b, 0.5, da, db);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            Mat up = a, dn = a;
            up(i, j) += h;
            dn(i, j) -= h;
            const double fd = (loss_ntxent(up, b, 0.5) - loss_ntxent(dn, b, 0.5)) / (2 * h);
            CHECK(std::abs(fd - da(i, j)) < 1e-7);
        }
}

TEST_CASE("joint losses are exact weighted sums and linear in the weights") {
    CHECK(joint_loss_noisepu(0.3, 0.5, 1.0) == doctest::Approx(0.8));
    CHECK(joint_loss_noisepu(0.3, 0.5, 0.0) == 0.3);
    CHECK(joint_loss_regcon(0.4, 0.3, 0.2, 1, 1) == doctest::Approx(0.9));
    CHECK(joint_loss_regcon(0.4, 0.3, 0.2, 0, 0) == 0.4);
    const double j0 = joint_loss_regcon(0.4, 0.3, 0.2, 0.0, 0.5);
    const double j1 = joint_loss_regcon(0.4, 0.3, 0.2, 1.0, 0.5);
    const double j2 = joint_loss_regcon(0.4, 0.3, 0.2, 2.0, 0.5);
    CHECK(std::abs((j2 - j1) - (j1 - j0)) < 1e-12);
    CHECK_THROWS_AS(joint_loss_noisepu(0.3, 0.5, -1.0), ConfigError);
}

TEST_CASE("softmax rows sum to one") {
    Mat l(3, 2);
    l << 1000, -1000, 0, 0, 3, 4;
    const Mat p = softmax_rows(l);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
    CHECK(p(1, 0) == 0.5);
}

TEST_CASE("sgd step closed forms") {
    ModelParams params;
    params.tensors.push_back({"w", {1}, {1.0}});
    Gradients g{{0.5}};
    auto opt = init_opt_state(params);
    sgd_step(params, g, opt, 0.1, 0.0, 0.0);
    CHECK(std::abs(params.tensors[0].data[0] - 0.95) < 1e-15);

    // Momentum accumulation under a constant gradient: v_n = g (1 - m^n) / (1 - m).
    params.tensors[0].data[0] = 0.0;
    opt = init_opt_state(params);
    const double lr = 0.01, m = 0.9;
    double w = 0.0;
    for (int n = 1; n <= 2; ++n) {
        sgd_step(params, g, opt, lr, m, 0.0);
        w -= lr * 0.5 * (1 - std::pow(m, n)) / (1 - m);
    }
    CHECK(std::abs(params.tensors[0].data[0] - w) < 1e-15);
    CHECK_THROWS_AS(sgd_step(params, g, opt, 0.0, m, 0.0), ConfigError);
}

TEST_CASE("sgd on a quadratic matches a scalar recurrence") {
    // f(w) = 0.5 * a * w^2; gradient a * w.
    const double a = 3.0, lr = 0.05, m = 0.9, wd = 0.01;
    ModelParams params;
    params.tensors.push_back({"w", {1}, {2.0}});
    auto opt = init_opt_state(params);
    double w = 2.0, v = 0.0;
    for (int i = 0; i < 100; ++i) {
        Gradients g{{a * params.tensors[0].data[0]}};
        sgd_step(params, g, opt, lr, m, wd);
        v = m * v + (a * w + wd * w);
        w -= lr * v;
    }
    CHECK(std::abs(params.tensors[0].data[0] - w) < 1e-12);
}

TEST_CASE("learning-rate schedules") {
    ScheduleConfig s;
    s.base_lr = 8.9e-4;
    for (std::uint32_t e = 0; e < 5; ++e) CHECK(lr_schedule(s, e) == 8.9e-4);
    CHECK(lr_schedule(s, 5) == doctest::Approx(8.9e-4 / 2));
    CHECK(lr_schedule(s, 12) == doctest::Approx(8.9e-4 / 4));

    ScheduleConfig c;
    c.kind = ScheduleKind::cosine_warm_restarts;
    c.base_lr = 0.002;
    CHECK(std::abs(lr_schedule(c, 0) - 0.002) < 1e-15);
    CHECK(std::abs(lr_schedule(c, 10) - 0.002) < 1e-15);  // restart after T0 = 10
    CHECK(std::abs(lr_schedule(c, 30) - 0.002) < 1e-15);  // second period has length 20
    CHECK(std::abs(cosine_annealing(0.002, 1e-5, 10, 10) - 1e-5) < 1e-12);
    CHECK(lr_schedule(c, 20) == doctest::Approx(cosine_annealing(0.002, 1e-5, 10, 20)));
    CHECK_THROWS_AS(schedule_from_string("linear"), ConfigError);
}
