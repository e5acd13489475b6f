#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "weakprog/error.hpp"
#include "weakprog/model.hpp"

using namespace weakprog;

namespace {

ModelConfig tiny_config(CellKind cell) {
    ModelConfig c;
    c.P = 8;
    c.tau = 4;
    c.conv_channels = 2;
    c.conv_kernel = 3;
    c.feature_dim = 3;
    c.temporal_kernel = 2;
    c.hidden_dim = 3;
    c.proj_dim = 2;
    c.cell = cell;
    c.init_seed = 11;
    return c;
}

Objective full_objective(std::size_t n) {
    Objective obj;
    std::vector<int> y(n), y2(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<int>(i % 2);
        y2[i] = static_cast<int>((i / 2) % 2);
    }
    obj.class_terms.push_back({0, Head::pu, y, 0.0, 1.0});
    obj.class_terms.push_back({1, Head::noise, y2, 0.0, 0.7});
    obj.class_terms.push_back({1, Head::main, y, 0.1, 0.4});
    obj.contrast = ContrastTerm{0, 1, 0.5, 0.3};
    return obj;
}

/// Largest per-tensor relative error ||g - g_fd|| / max(||g||, ||g_fd||, tiny)
/// over `stride`-sampled entries.
double gradient_check(ModelParams params, const std::vector<Batch>& views, const Objective& obj, std::size_t stride,
                      double h) {
    auto g = zero_gradients(params);
    evaluate_objective(params, views, obj, &g);
    double worst = 0.0;
    for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
        double num = 0.0, na = 0.0, nf = 0.0;
        auto& data = params.tensors[ti].data;
        const std::size_t offset = ti % stride;
        for (std::size_t k = offset; k < data.size(); k += stride) {
            const double saved = data[k];
            data[k] = saved + h;
            const double up = evaluate_objective(params, views, obj).total;
            data[k] = saved - h;
            const double dn = evaluate_objective(params, views, obj).total;
            data[k] = saved;
            const double fd = (up - dn) / (2 * h);
            num += (fd - g[ti][k]) * (fd - g[ti][k]);
            na += g[ti][k] * g[ti][k];
            nf += fd * fd;
        }
        const double denom = std::max({std::sqrt(na), std::sqrt(nf), 1e-10});
        worst = std::max(worst, std::sqrt(num) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("parameter count matches closed form") {
    ModelConfig c;
    auto p = init_params(c);
    CHECK(p.parameter_count() == expected_parameter_count(c));
    // 8*7+8 + 32*512+32 + 32*96+32 + 2*(32*32+32*32+32) + 3*66 + 2*(16*32+16)
    CHECK(p.parameter_count() == 24998);
    c.cell = CellKind::full_lstm;
    CHECK(init_params(c).parameter_count() == expected_parameter_count(c));
    c.head_noise = false;
    CHECK(init_params(c).parameter_count() == expected_parameter_count(c));
}

TEST_CASE("initialization is per-tensor deterministic") {
    ModelConfig a;
    ModelConfig b = a;
    b.head_noise = false;
    const auto pa = init_params(a);
    const auto pb = init_params(b);
    CHECK(pa.get("enc.w").data == pb.get("enc.w").data);
    CHECK(pa.get("head.main.w").data == pb.get("head.main.w").data);
    CHECK(pa.get("conv.b").data == AlignedVec(8, 0.0));
    b.init_seed = 8;
    CHECK(init_params(b).get("enc.w").data != pa.get("enc.w").data);
}

TEST_CASE("config validation") {
    ModelConfig c;
    c.conv_kernel = 4;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ModelConfig{};
    c.temporal_kernel = 6;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ModelConfig{};
    c.n_classes = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward shapes and probabilities") {
    ModelConfig c;
    auto p = init_params(c);
    auto obs = fixtures::random_observations(5, 5, 64, 3);
    fit_standardizer(p, obs);
    const Head heads[] = {Head::pu, Head::noise, Head::main};
    const auto out = forward(p, make_batch(obs), heads, true);
    CHECK(out.latent.rows() == 5);
    CHECK(out.latent.cols() == 32);
    for (Head h : heads) {
        const Mat& pr = *out.probs[static_cast<int>(h)];
        for (Eigen::Index i = 0; i < 5; ++i) CHECK(pr.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(out.proj_phi.cols() == 16);
    auto bad = fixtures::random_observations(1, 4, 64, 3);
    CHECK_THROWS_AS(forward(p, make_batch(bad), heads), DataError);
    obs[0].x[3] = std::nan("");
    CHECK_THROWS_AS(forward(p, make_batch(obs), heads), NumericalError);
}

TEST_CASE("full finite-difference gradient on a tiny model") {
    for (CellKind cell : {CellKind::gated_simple, CellKind::full_lstm}) {
        CAPTURE(to_string(cell));
        auto p = init_params(tiny_config(cell));
        auto obs = fixtures::random_observations(6, 4, 8, 5);
        auto obs2 = fixtures::random_observations(6, 4, 8, 6);
        fit_standardizer(p, obs);
        const std::vector<Batch> views{make_batch(obs), make_batch(obs2)};
        CHECK(gradient_check(p, views, full_objective(6), 1, 1e-6) < 1e-5);
    }
}

TEST_CASE("sampled finite-difference gradient on the default model") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        ModelConfig c;
        c.init_seed = seed;
        auto p = init_params(c);
        auto obs = fixtures::random_observations(4, 5, 64, 100 + seed);
        auto obs2 = fixtures::random_observations(4, 5, 64, 200 + seed);
        fit_standardizer(p, obs);
        const std::vector<Batch> views{make_batch(obs), make_batch(obs2)};
        CHECK(gradient_check(p, views, full_objective(4), 97, 1e-4) < 1e-4);
    }
}

TEST_CASE("input gradient matches finite differences") {
    auto p = init_params(tiny_config(CellKind::gated_simple));
    auto obs = fixtures::random_observations(3, 4, 8, 9);
    fit_standardizer(p, obs);
    const Head heads[] = {Head::pu, Head::noise};
    const auto g = score_input_gradient(p, make_batch(obs), heads);
    REQUIRE(g.size() == 3 * 4 * 8);
    for (std::size_t k = 0; k < g.size(); k += 5) {
        auto up = obs, dn = obs;
        const std::size_t i = k / 32, j = k % 32;
        up[i].x[j] += 1e-5;
        dn[i].x[j] -= 1e-5;
        const double fd = (score_batch(p, make_batch(up), heads)[i] - score_batch(p, make_batch(dn), heads)[i]) / 2e-5;
        CHECK(g[k] == doctest::Approx(fd).epsilon(1e-6).scale(1e-3));
    }
}

TEST_CASE("skipping zero-weight terms equals evaluating them") {
    auto p = init_params(tiny_config(CellKind::gated_simple));
    auto obs = fixtures::random_observations(6, 4, 8, 5);
    auto obs2 = fixtures::random_observations(6, 4, 8, 6);
    fit_standardizer(p, obs);
    const std::vector<Batch> views{make_batch(obs), make_batch(obs2)};
    auto obj = full_objective(6);
    obj.class_terms[1].weight = 0.0;
    obj.contrast->weight = 0.0;
    auto g_skip = zero_gradients(p), g_eval = zero_gradients(p);
    const auto skip = evaluate_objective(p, views, obj, &g_skip);
    obj.evaluate_zero_weight_terms = true;
    const auto eval = evaluate_objective(p, views, obj, &g_eval);
    CHECK(skip.total == eval.total);
    CHECK(g_skip == g_eval);
    CHECK(std::isnan(skip.class_values[1]));
    CHECK(std::isfinite(eval.class_values[1]));
}
