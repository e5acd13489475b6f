#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "auc_fixture.hpp"
#include "doctest.h"
#include "json.hpp"
#include "weakprog/error.hpp"
#include "weakprog/eval.hpp"
#include "weakprog/rng.hpp"

using namespace weakprog;

namespace {

double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
    double s = 0;
    for (double p : pos)
        for (double n : neg) s += p > n ? 1.0 : p == n ? 0.5 : 0.0;
    return s / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

EvalReport fixture_report() {
    EvalReport r;
    Rng rng(2024);
    const std::size_t n = 60;
    for (std::size_t i = 0; i < n; ++i) {
        r.ids.push_back("s" + std::to_string(i / 3) + "/e1/w" + std::to_string(i % 3));
        r.truth.push_back(i % 3 == 0 ? 1 : 0);
        r.glaucoma.push_back(i % 5 != 0 ? 1 : 0);
    }
    SchemeEval a, b;
    a.name = "noise_pu";
    b.name = "ols";
    for (std::size_t i = 0; i < n; ++i) {
        const double base = r.truth[i] ? 0.6 : 0.35;
        a.scores.push_back(std::round((base + rng.normal(0, 0.2)) * 1e4) / 1e4);
        b.scores.push_back(std::round((0.45 + 0.1 * r.truth[i] + rng.normal(0, 0.2)) * 1e4) / 1e4);
        r.ols_slopes.push_back(std::round((r.truth[i] ? -1.5 : -0.5) * 1e4 + rng.normal(0, 5000)) / 1e4);
    }
    r.schemes = {a, b};
    r.metadata = {{"seed", "7"}, {"config_hash", "0123456789abcdef"}};
    evaluate_schemes(r, 0.9);
    return r;
}

}  // namespace

TEST_CASE("auc fixtures") {
    CHECK(auc(std::vector<double>{0.9, 0.4}, std::vector<double>{0.5, 0.1}) == 0.75);
    CHECK(auc(std::vector<double>{2, 3}, std::vector<double>{0, 1}) == 1.0);
    CHECK(auc(std::vector<double>{1, 1}, std::vector<double>{1, 1, 1}) == 0.5);
    CHECK_THROWS_AS(auc(std::vector<double>{}, std::vector<double>{1}), DataError);
}

TEST_CASE("auc equals exhaustive pairs and is monotone invariant") {
    Rng rng(3);
    for (int rep = 0; rep < 60; ++rep) {
        const auto m = static_cast<std::size_t>(rng.uniform_int(1, 200));
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 200));
        std::vector<double> pos(m), neg(n);
        // Coarse rounding produces ties.
        for (auto& x : pos) x = std::round(rng.normal(0.5, 1.0) * 10) / 10;
        for (auto& x : neg) x = std::round(rng.normal(0.0, 1.0) * 10) / 10;
        const double a = auc(pos, neg);
        CHECK(a == doctest::Approx(brute_auc(pos, neg)).epsilon(1e-14));
        std::vector<double> tp(m), tn(n);
        std::transform(pos.begin(), pos.end(), tp.begin(), [](double x) { return std::exp(3 * x) - 2; });
        std::transform(neg.begin(), neg.end(), tn.begin(), [](double x) { return std::exp(3 * x) - 2; });
        CHECK(auc(tp, tn) == a);
    }
}

TEST_CASE("delong variance") {
    const std::vector<double> pos{0.9, 0.8, 0.45, 0.6}, neg{0.5, 0.1, 0.3, 0.7};
    const auto ci = delong_ci(pos, neg);
    CHECK(ci.auc == 0.8125);
    CHECK(ci.variance == doctest::Approx(0.028645833333).epsilon(1e-10));
    // 1e5-replicate stratified bootstrap oracle: 0.025536891267.
    CHECK(std::abs(ci.variance / 0.025536891267 - 1.0) < 0.15);
    CHECK(ci.lo <= ci.auc);
    CHECK(ci.hi == 1.0);
    CHECK_FALSE(ci.degenerate);

    const double v = delong_variance(auc_fixture::pos, auc_fixture::neg);
    CHECK(auc(auc_fixture::pos, auc_fixture::neg) == doctest::Approx(0.726875).epsilon(1e-12));
    CHECK(v == doctest::Approx(0.003155268429).epsilon(1e-9));
    CHECK(std::abs(v / 0.003123633990 - 1.0) < 0.15);

    const auto perfect = delong_ci(std::vector<double>{2, 3}, std::vector<double>{0, 1});
    CHECK(perfect.auc == 1.0);
    CHECK(perfect.variance == 0.0);
    CHECK(perfect.degenerate);
    CHECK(perfect.lo == 1.0);
    CHECK_THROWS_AS(delong_ci(std::vector<double>{1}, std::vector<double>{0, 1}), DataError);
}

TEST_CASE("delong variance is near hanley-mcneil on large gaussian fixtures") {
    Rng rng(8);
    const std::size_t m = 300, n = 300;
    std::vector<double> pos(m), neg(n);
    for (auto& x : pos) x = rng.normal(0.95, 1.0);
    for (auto& x : neg) x = rng.normal(0.0, 1.0);
    const double a = auc(pos, neg);
    const double q1 = a / (2 - a), q2 = 2 * a * a / (1 + a);
    const double hm = (a * (1 - a) + (m - 1.0) * (q1 - a * a) + (n - 1.0) * (q2 - a * a)) / double(m * n);
    CHECK(std::abs(delong_variance(pos, neg) / hm - 1.0) < 0.2);
}

TEST_CASE("threshold for specificity") {
    const std::vector<double> neg{0.1, 0.2, 0.3, 0.4};
    const double th = threshold_for_specificity(neg, 0.75);
    CHECK(th > 0.3);
    CHECK(th <= 0.4);
    CHECK(specificity_at(neg, th) == 0.75);
    const double top = threshold_for_specificity(neg, 1.0);
    CHECK(top > 0.4);
    CHECK(specificity_at(neg, top) == 1.0);
    CHECK(std::isinf(threshold_for_specificity(std::vector<double>{0.5, 0.5}, 1.0)));

    // Exhaustive sweep oracle on 1000 tied negatives.
    Rng rng(21);
    std::vector<double> big(1000);
    for (auto& x : big) x = std::round(rng.uniform(0, 1) * 200) / 200;
    std::vector<double> cands = big;
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    for (double target : {0.5, 0.8, 0.9, 0.95, 0.947, 0.99, 1.0}) {
        double best = 2.0;
        for (double c : cands) {
            const double s = specificity_at(big, std::nextafter(c, 2.0));
            if (s >= target - 1e-12) best = std::min(best, s);
        }
        const double t = threshold_for_specificity(big, target);
        CHECK(specificity_at(big, t) == best);
    }
}

TEST_CASE("wilson interval and hit ratio") {
    const auto w = wilson_interval(62, 100);
    CHECK(w.value == 0.62);
    CHECK(w.lo == doctest::Approx(0.522097552955).epsilon(1e-10));
    CHECK(w.hi == doctest::Approx(0.709024007475).epsilon(1e-10));
    const auto none = wilson_interval(0, 20);
    CHECK(none.lo == 0.0);
    CHECK(none.hi > 0.0);
    CHECK(wilson_interval(20, 20).hi == 1.0);
    CHECK_THROWS_AS(wilson_interval(0, 0), DataError);

    const auto all = hit_ratio(std::vector<double>{0.5, 0.6}, 0.5);
    CHECK(all.value == 1.0);
    CHECK(all.hits == 2);
    CHECK(hit_ratio(std::vector<double>{0.1, 0.2}, 0.5).value == 0.0);
}

TEST_CASE("mcnemar") {
    const auto r = mcnemar_from_counts(5, 15);
    CHECK(std::abs(r.chi2 - 4.05) < 1e-9);
    CHECK(r.exact);
    CHECK(r.p == doctest::Approx(2 * 0.020694732666015625).epsilon(1e-12));
    CHECK(mcnemar_from_counts(2, 8).p == doctest::Approx(0.109375).epsilon(1e-12));
    const auto big = mcnemar_from_counts(10, 30);
    CHECK_FALSE(big.exact);
    CHECK(big.chi2 == doctest::Approx(361.0 / 40.0).epsilon(1e-14));
    const auto at = mcnemar_from_counts(5, 20);
    CHECK_FALSE(at.exact);
    CHECK(mcnemar_from_counts(4, 20).exact);
    for (std::size_t b = 0; b < 30; ++b)
        for (std::size_t c = 0; c < 30; ++c) {
            const auto x = mcnemar_from_counts(b, c), y = mcnemar_from_counts(c, b);
            CHECK(x.chi2 == y.chi2);
            CHECK(x.p == y.p);
            CHECK(x.exact == (b + c < 25));
        }
    const auto z = mcnemar_from_counts(50, 80);
    CHECK(z.chi2 == doctest::Approx(29.0 * 29.0 / 130.0).epsilon(1e-14));

    const auto none = mcnemar_from_counts(0, 0);
    CHECK(none.no_discordance);
    CHECK(none.p == 1.0);
    CHECK(none.chi2 == 0.0);

    const std::vector<int> a{1, 1, 0, 0, 1}, b{1, 0, 1, 0, 0}, mask{1, 1, 1, 1, 0};
    const auto m = mcnemar(a, b, mask);
    CHECK(m.b == 1);
    CHECK(m.c == 1);
    CHECK(mcnemar(a, b).b == 2);
    CHECK(mcnemar(a, a).p == 1.0);
    CHECK_THROWS_AS(mcnemar(a, std::vector<int>{1}), DataError);
}

TEST_CASE("chi-square tail value") {
    // Continuity-corrected statistic 19^2 / 100; tail from scipy chi2.sf(3.61, 1).
    McNemarResult r = mcnemar_from_counts(40, 60);
    CHECK(r.chi2 == doctest::Approx(361.0 / 100.0).epsilon(1e-14));
    CHECK(r.p == doctest::Approx(0.057433119632).epsilon(1e-9));
}

TEST_CASE("confusion metrics") {
    const auto c = confusion_from_counts(7, 1, 3, 9);
    CHECK(c.mcc == doctest::Approx(0.612372435696).epsilon(1e-11));
    CHECK(c.sensitivity == 0.7);
    CHECK(c.specificity == 0.9);
    CHECK(c.accuracy == 0.8);
    CHECK(c.precision == 0.875);
    CHECK(c.f1 == doctest::Approx(2 * 0.875 * 0.7 / 1.575).epsilon(1e-14));
    CHECK_FALSE(c.mcc_degenerate);

    const std::vector<int> truth{1, 1, 0, 0};
    const auto perfect = confusion_metrics(truth, truth);
    CHECK(perfect.mcc == 1.0);
    CHECK(perfect.f1 == 1.0);
    const auto allpos = confusion_metrics(std::vector<int>{1, 1, 1, 1}, truth);
    CHECK(allpos.sensitivity == 1.0);
    CHECK(allpos.specificity == 0.0);
    CHECK(allpos.mcc == 0.0);
    CHECK(allpos.mcc_degenerate);
    CHECK_THROWS_AS(confusion_metrics(truth, std::vector<int>{1, 2, 0, 0}), DataError);
}

TEST_CASE("welch test") {
    const std::vector<double> a{-1.2, -0.8, -1.5, -0.3, -1.1, -0.9}, b{-0.4, -0.6, 0.1, -0.2, -0.7, -0.5};
    const auto w = welch_t_test(a, b);
    CHECK(w.t == doctest::Approx(-2.844494555004).epsilon(1e-11));
    CHECK(w.p == doctest::Approx(0.019125006303).epsilon(1e-10));
    CHECK(w.df == doctest::Approx(9.065825235960).epsilon(1e-11));
    const auto same = welch_t_test(a, a);
    CHECK(same.p == doctest::Approx(1.0));
    CHECK_THROWS_AS(welch_t_test(std::vector<double>{1}, b), DataError);

    const std::vector<int> d{1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
    std::vector<double> s(a);
    s.insert(s.end(), b.begin(), b.end());
    const auto g = group_slope_comparison(d, s);
    CHECK(g.t == w.t);
    CHECK(g.mean_a == doctest::Approx(-0.966666666667));
}

TEST_CASE("slope comparison power at the published group sizes") {
    // Groups N(-0.82, 1.5) and N(-0.63, 1.54) of 763 and 462: analytic power of the
    // two-sided 5% Welch test is 0.560 (noncentral t), so rejections are frequent, not certain.
    Rng rng(99);
    const int reps = 2000;
    int rejected = 0;
    std::vector<double> a(763), b(462);
    for (int r = 0; r < reps; ++r) {
        for (auto& x : a) x = rng.normal(-0.82, 1.5);
        for (auto& x : b) x = rng.normal(-0.63, 1.54);
        rejected += welch_t_test(a, b).p < 0.05;
    }
    CHECK(std::abs(rejected / double(reps) - 0.560) < 0.04);
}

TEST_CASE("roc curve") {
    const auto roc = roc_curve(std::vector<double>{0.9, 0.4}, std::vector<double>{0.5, 0.1});
    REQUIRE(roc.size() >= 2);
    CHECK(roc.front() == std::pair<double, double>{0.0, 0.0});
    CHECK(roc.back() == std::pair<double, double>{1.0, 1.0});
    for (std::size_t i = 1; i < roc.size(); ++i) {
        CHECK(roc[i].first >= roc[i - 1].first);
        CHECK(roc[i].second >= roc[i - 1].second);
    }
}

TEST_CASE("evaluate schemes and report determinism") {
    const auto r = fixture_report();
    for (const auto& s : r.schemes) {
        CHECK(s.achieved_specificity >= 0.9);
        CHECK(s.confusion.tp + s.confusion.fn == 20);
        CHECK(s.confusion.tp == s.hit.hits);
        CHECK(s.auc.lo <= s.auc.auc);
        CHECK(s.auc.auc <= s.auc.hi);
    }
    REQUIRE(r.mcnemar.size() == 1);
    const auto again = fixture_report();
    CHECK(report_json(r) == report_json(again));
    CHECK(report_markdown(r) == report_markdown(again));
    CHECK(report_scores_csv(r) == report_scores_csv(again));
    CHECK(report_roc_svg(r, "abc") == report_roc_svg(again, "abc"));

    const auto text = report_json(r);
    const auto j = nlohmann::ordered_json::parse(text);
    CHECK(j.dump(2) + "\n" == text);
    CHECK(j["format"] == "evalreport/1");
    CHECK(j["n_truth_positive"] == 20);
    CHECK(j["schemes"][0]["name"] == "noise_pu");
    CHECK(j["schemes"][0]["auc"]["value"].get<double>() == r.schemes[0].auc.auc);
}

TEST_CASE("golden markdown report") {
    const auto md = report_markdown(fixture_report());
    const std::filesystem::path golden = std::filesystem::path(WEAKPROG_TEST_DATA) / "report_fixture.md";
    if (std::getenv("WEAKPROG_UPDATE_GOLDEN")) {
        std::ofstream(golden, std::ios::binary) << md;
    }
    std::ifstream in(golden, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(md == ss.str());
}

TEST_CASE("roc svg is well formed") {
    const auto svg = report_roc_svg(fixture_report(), "deadbeef");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("width=\"640\"") != std::string::npos);
    CHECK(svg.find("height=\"480\"") != std::string::npos);
    CHECK(svg.find("config-hash: deadbeef") != std::string::npos);
    CHECK(svg.rfind("</svg>\n") == svg.size() - 7);
    // Balanced elements: every opening tag is self-closed or closed.
    std::size_t open = 0, close = 0, self = 0, pos = 0;
    while ((pos = svg.find('<', pos)) != std::string::npos) {
        const auto end = svg.find('>', pos);
        REQUIRE(end != std::string::npos);
        const auto tag = svg.substr(pos, end - pos + 1);
        if (tag.rfind("<!--", 0) == 0 || tag.rfind("<?", 0) == 0) {
        } else if (tag[1] == '/') ++close;
        else if (tag[tag.size() - 2] == '/') ++self;
        else ++open;
        pos = end + 1;
    }
    CHECK(open == close);
    CHECK(self > 0);
}

TEST_CASE("write report") {
    const auto dir = std::filesystem::temp_directory_path() / "weakprog_eval_test";
    std::filesystem::remove_all(dir);
    const auto r = fixture_report();
    const auto files = write_report(r, dir, "h");
    CHECK(files.size() == 4);
    for (const auto& f : files) CHECK(std::filesystem::exists(f));
    std::ifstream in(dir / "report.json", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == report_json(r));
    std::filesystem::remove_all(dir);
}
