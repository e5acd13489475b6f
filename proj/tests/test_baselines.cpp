#include <cmath>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "weakprog/baselines.hpp"
#include "weakprog/error.hpp"
#include "weakprog/rng.hpp"

using namespace weakprog;

namespace {

Observation window_from_means(std::vector<double> times, std::vector<double> means, std::uint32_t P = 4) {
    Observation o;
    o.tau = static_cast<std::uint32_t>(times.size());
    o.P = P;
    o.times = times;
    for (std::uint32_t t = 0; t < o.tau; ++t) {
        o.permutation.push_back(t);
        for (std::uint32_t p = 0; p < P; ++p) o.x.push_back(means[t] + (p % 2 ? 1.0 : -1.0));
    }
    return o;
}

}  // namespace

TEST_CASE("ols fixture") {
    const std::vector<double> t{0, 0.9, 2.1, 3.0, 4.2}, y{95.1, 94.7, 93.2, 93.5, 91.8};
    const auto f = ols_fit(t, y);
    CHECK(f.slope == doctest::Approx(-0.752985884908).epsilon(1e-10));
    CHECK(f.intercept == doctest::Approx(95.196091205212).epsilon(1e-10));
    CHECK(f.slope_se == doctest::Approx(0.132904152936).epsilon(1e-10));
    CHECK(f.t_stat == doctest::Approx(-5.665630969926).epsilon(1e-10));
    CHECK(f.p_two_sided == doctest::Approx(1.089039010673e-02).epsilon(1e-9));
    CHECK(f.residual_var == doctest::Approx(0.195217155266).epsilon(1e-10));
    CHECK(f.n == 5);
    CHECK_FALSE(f.degenerate);

    const auto w = window_from_means(t, y);
    CHECK(ols_window(w).slope == doctest::Approx(f.slope).epsilon(1e-12));
    CHECK(ols_progression(w));
    CHECK_FALSE(ols_progression(w, 0.01));
    CHECK(ols_score(f) == doctest::Approx(1.0 - f.p_two_sided / 2).epsilon(1e-12));
}

TEST_CASE("ols degenerate inputs") {
    const std::vector<double> t{0, 1, 2, 3, 4};
    const auto exact = ols_fit(t, std::vector<double>{100, 99, 98, 97, 96});
    CHECK(exact.slope == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(exact.intercept == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(exact.degenerate);
    CHECK(exact.p_two_sided == 0.0);

    const auto flat = ols_fit(t, std::vector<double>{80, 80, 80, 80, 80});
    CHECK(flat.degenerate);
    CHECK(flat.p_two_sided == 1.0);
    CHECK(flat.slope == 0.0);

    CHECK_THROWS_AS(ols_fit(std::vector<double>{0, 1}, std::vector<double>{1, 2}), DataError);
    CHECK_THROWS_AS(ols_fit(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DataError);
    CHECK_THROWS_AS(ols_fit(t, std::vector<double>{1, 2, 3}), DataError);
}

TEST_CASE("ols invariances and normal equations") {
    Rng rng(31);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(3, 12));
        std::vector<double> t(n), y(n);
        double tt = 0;
        for (std::size_t i = 0; i < n; ++i) {
            tt += rng.uniform(0.2, 1.0);
            t[i] = tt;
            y[i] = 90 - 0.7 * tt + rng.normal(0, 1.0);
        }
        const auto f = ols_fit(t, y);
        double r0 = 0, r1 = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - f.intercept - f.slope * t[i];
            r0 += r;
            r1 += r * t[i];
        }
        CHECK(std::abs(r0) < 1e-10);
        CHECK(std::abs(r1) < 1e-9);

        std::vector<double> ys(n), ts(n);
        for (std::size_t i = 0; i < n; ++i) {
            ys[i] = 3.0 * y[i] + 7.0;
            ts[i] = t[i] + 5.0;
        }
        const auto g = ols_fit(t, ys);
        CHECK(g.slope == doctest::Approx(3.0 * f.slope).epsilon(1e-9));
        CHECK(g.t_stat == doctest::Approx(f.t_stat).epsilon(1e-8));
        const auto h = ols_fit(ts, y);
        CHECK(h.slope == doctest::Approx(f.slope).epsilon(1e-9));
        CHECK(h.p_two_sided == doctest::Approx(f.p_two_sided).epsilon(1e-8));
    }
}

TEST_CASE("ols false flag rate under stable series") {
    Rng rng(77);
    const std::vector<double> t{0, 0.5, 1.0, 1.5, 2.0};
    const int n = 20000;
    int flagged = 0;
    for (int rep = 0; rep < n; ++rep) {
        std::vector<double> y(5);
        for (auto& v : y) v = 80 + rng.normal(0, 1.5);
        const auto f = ols_fit(t, y);
        flagged += f.slope < 0 && f.p_two_sided < 0.05;
    }
    // One-sided 2.5% with binomial sd ~0.0011; 0.006 is > 5 sd.
    CHECK(std::abs(flagged / double(n) - 0.025) < 0.006);
}

TEST_CASE("gpa flag limit and validation") {
    GpaConfig c;
    CHECK(c.flag_limit() == doctest::Approx(1.96 * 4.0 * std::sqrt(1.5)).epsilon(1e-14));
    GpaConfig bad = c;
    bad.points_required = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.consecutive_for_likely = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("gpa fixture trace") {
    // Three points drop by 12 um (> 9.60 limit) from test 2 onwards; one point stays.
    const std::vector<double> t{0, 1, 2, 3, 4, 5};
    std::vector<std::vector<double>> v(6, std::vector<double>{90, 90, 90, 90});
    for (std::size_t i = 2; i < 6; ++i)
        for (std::size_t p = 0; p < 3; ++p) v[i][p] = 78;
    const GpaConfig cfg;
    const auto r = gpa_classify(t, v, cfg);
    REQUIRE(r.follow_ups.size() == 4);
    CHECK(r.follow_ups[0].classification == GpaClass::stable);
    CHECK(r.follow_ups[0].marks[0] == GpaMark::empty);
    CHECK(r.follow_ups[0].marks[3] == GpaMark::none);
    CHECK(r.follow_ups[0].flagged == 3);
    CHECK(r.follow_ups[1].classification == GpaClass::possible);
    CHECK(r.follow_ups[1].marks[1] == GpaMark::half);
    CHECK(r.follow_ups[2].classification == GpaClass::likely);
    CHECK(r.follow_ups[2].marks[2] == GpaMark::solid);
    REQUIRE(r.event_times.size() == 1);
    CHECK(r.event_indices[0] == 2);
    CHECK(r.event_times[0] == 2.0);
    // Baseline resets to tests (2, 3): the lowered values are the new reference.
    CHECK(r.follow_ups[3].baseline_a == 2);
    CHECK(r.follow_ups[3].baseline_b == 3);
    CHECK(r.follow_ups[3].flagged == 0);
    CHECK(r.worst() == GpaClass::likely);

    // Two flagged points never reach "possible".
    auto v2 = v;
    for (std::size_t i = 2; i < 6; ++i) v2[i][2] = 90;
    const auto r2 = gpa_classify(t, v2, cfg);
    for (const auto& f : r2.follow_ups) CHECK(f.classification == GpaClass::stable);
    CHECK(r2.event_times.empty());

    // Exactly at the limit is not a flag.
    auto v3 = v;
    for (std::size_t i = 2; i < 6; ++i)
        for (std::size_t p = 0; p < 3; ++p) v3[i][p] = 90 - cfg.flag_limit();
    CHECK(gpa_classify(t, v3, cfg).follow_ups[2].flagged == 0);

    CHECK_THROWS_AS(gpa_classify(std::vector<double>{0, 1}, {{1.0}, {1.0}}, cfg), DataError);

    const auto csv = gpa_to_csv(r);
    CHECK(csv.rfind("follow_up,test_index,baseline_a,baseline_b,classification,flagged\n", 0) == 0);
    CHECK(csv.find("2,4,0,1,likely,3\n") != std::string::npos);
    const auto j = nlohmann::json::parse(gpa_events_json(r));
    CHECK(j["events"].size() == 1);
    CHECK(j["events"][0]["test_index"] == 2);
    CHECK(j["worst"] == "likely");
}

TEST_CASE("gpa per-point flag rate under noise") {
    // Baseline mean of 2 and one follow-up: difference sd = sd * sqrt(3/2), so one-sided 2.5%.
    Rng rng(5);
    const GpaConfig cfg;
    const std::size_t P = 64, reps = 400;
    std::size_t flags = 0, total = 0;
    for (std::size_t r = 0; r < reps; ++r) {
        std::vector<std::vector<double>> v(3, std::vector<double>(P));
        for (auto& row : v)
            for (auto& x : row) x = 80 + rng.normal(0, cfg.test_retest_sd);
        const auto res = gpa_classify(std::vector<double>{0, 1, 2}, v, cfg);
        flags += res.follow_ups[0].flagged;
        total += P;
    }
    CHECK(std::abs(flags / double(total) - 0.025) < 0.004);
}

TEST_CASE("gpa window labels and scores") {
    GpaResult r;
    r.event_times = {2.0};
    r.event_indices = {4};
    CHECK(gpa_window_label(r, window_from_means({0, 0.5, 1, 1.5, 2}, {1, 1, 1, 1, 1})) == 1);
    CHECK(gpa_window_label(r, window_from_means({2, 2.5, 3, 3.5, 4}, {1, 1, 1, 1, 1})) == 0);
    CHECK(gpa_window_label(r, window_from_means({0, 0.5, 1, 1.5, 1.9}, {1, 1, 1, 1, 1})) == 0);
    std::vector<Observation> ws{window_from_means({0, 0.5, 1, 1.5, 2}, {1, 1, 1, 1, 1}),
                                window_from_means({2, 2.5, 3, 3.5, 4}, {1, 1, 1, 1, 1})};
    gpa_label_windows(r, ws);
    CHECK(ws[0].external_label == 1);
    CHECK(ws[1].external_label == 0);

    const GpaConfig cfg;
    CHECK(gpa_window_score(window_from_means({0, 1, 2, 3, 4}, {90, 90, 90, 90, 90}), cfg) == 0.0);
    CHECK(gpa_window_score(window_from_means({0, 1, 2, 3, 4}, {90, 90, 70, 70, 90}), cfg) == 0.5);
    CHECK(gpa_window_score(window_from_means({0, 1, 2, 3, 4}, {90, 90, 70, 70, 70}), cfg) == 1.0);
}
