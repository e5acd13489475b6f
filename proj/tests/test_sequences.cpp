#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "weakprog/error.hpp"
#include "weakprog/sequences.hpp"

using namespace weakprog;

namespace {

Cohort cohort_with_visits(std::vector<std::uint32_t> visits, std::vector<bool> quality = {}) {
    Cohort c;
    c.config.profile_len = 8;
    std::uint32_t subject = 0;
    for (auto n : visits) {
        EyeSeries e;
        e.subject_id = subject++;
        e.group = Group::glaucoma;
        for (std::uint32_t v = 0; v < n; ++v) {
            VisitRecord r;
            r.t = 0.5 * v;
            r.profile.assign(8, 90.0 - v);
            r.global_mean = 90.0 - v;
            e.visits.push_back(r);
        }
        c.eyes.push_back(e);
    }
    for (std::size_t i = 0; i < quality.size(); ++i) c.eyes[0].visits[i].quality_ok = quality[i];
    return c;
}

Cohort simulated(std::uint64_t seed, std::uint32_t glaucoma = 30, std::uint32_t healthy = 6) {
    SimulatorConfig c;
    c.n_glaucoma_subjects = glaucoma;
    c.n_healthy_subjects = healthy;
    c.profile_len = 16;
    c.seed = seed;
    return generate_cohort(c);
}

}  // namespace

TEST_CASE("window counts") {
    CHECK(build_windows(cohort_with_visits({5}), 5, true).size() == 1);
    CHECK(build_windows(cohort_with_visits({9}), 5, true).size() == 5);
    CHECK(build_windows(cohort_with_visits({4}), 5, true).empty());
    // Visits 0..7 with visit 3 failing quality: 7 usable visits -> 3 windows;
    // without the quality requirement all 8 visits -> 4 windows.
    const auto c = cohort_with_visits({8}, {true, true, true, false, true, true, true, true});
    const auto q = build_windows(c, 5, true);
    CHECK(q.size() == 3);
    CHECK(build_windows(c, 5, false).size() == 4);
    for (const auto& w : q)
        for (double t : w.view.times) CHECK(t != 1.5);
    CHECK_THROWS_AS(build_windows(c, 1, true), ConfigError);
}

TEST_CASE("window contents and labels") {
    const auto cohort = simulated(3);
    const auto wins = build_windows(cohort, 5, true);
    REQUIRE(!wins.empty());
    for (const auto& s : wins) {
        const auto& o = s.view;
        CHECK(o.x.size() == 5u * 16u);
        CHECK(o.is_identity());
        CHECK(o.noise_label == 1);
        CHECK_FALSE(o.external_label.has_value());
        for (std::size_t t = 1; t < o.times.size(); ++t) CHECK(o.times[t] > o.times[t - 1]);
        const auto& eye = *std::find_if(cohort.eyes.begin(), cohort.eyes.end(), [&](const EyeSeries& e) {
            return e.subject_id == o.subject_id && e.eye_id == o.eye_id;
        });
        CHECK(o.pu_label == (eye.group == Group::healthy ? 0 : 1));
        const bool truth = eye.truth.is_progressing && *eye.truth.onset_t < o.times.back();
        CHECK(s.truth_progressing == truth);
    }
}

TEST_CASE("largest remainder quotas") {
    CHECK(largest_remainder_quotas(10, {0.7, 0.15, 0.15}) == std::array<std::size_t, 3>{7, 2, 1});
    CHECK(largest_remainder_quotas(20, {0.7, 0.1, 0.2}) == std::array<std::size_t, 3>{14, 2, 4});
    const auto q = largest_remainder_quotas(341, {0.7, 0.15, 0.15});
    CHECK(q[0] + q[1] + q[2] == 341);
    CHECK_THROWS_AS(largest_remainder_quotas(10, {0.5, 0.5, 0.5}), ConfigError);
}

TEST_CASE("subject split is leakage free and within one subject of the ratios") {
    const auto wins = build_windows(simulated(5, 60, 10), 5, true);
    std::set<std::uint32_t> subjects;
    for (const auto& w : wins) subjects.insert(w.view.subject_id);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto split = subject_split(wins, {0.7, 0.15, 0.15}, seed);
        std::set<std::uint32_t> seen[3];
        for (const auto& w : wins) seen[static_cast<int>(split.of(w.view.subject_id))].insert(w.view.subject_id);
        std::size_t total = 0;
        for (int a = 0; a < 3; ++a) {
            total += seen[a].size();
            for (int b = a + 1; b < 3; ++b)
                for (auto s : seen[a]) CHECK(seen[b].count(s) == 0);
        }
        CHECK(total == subjects.size());
        const auto counts = split.counts();
        const double n = static_cast<double>(subjects.size());
        CHECK(std::abs(counts[0] - 0.7 * n) <= 1.0);
        CHECK(std::abs(counts[1] - 0.15 * n) <= 1.0);
    }
    const auto a = subject_split(wins, {0.7, 0.15, 0.15}, 9);
    const auto b = subject_split(wins, {0.7, 0.15, 0.15}, 9);
    CHECK(a.subject_partition == b.subject_partition);
    CHECK_THROWS_AS(a.of(999999), DataError);
}

TEST_CASE("non-identity permutations are uniform") {
    Rng rng(1);
    std::map<std::vector<std::uint32_t>, int> counts;
    const int n = 23000;
    for (int i = 0; i < n; ++i) {
        const auto p = random_nonidentity_permutation(4, rng);
        CHECK(p != std::vector<std::uint32_t>{0, 1, 2, 3});
        ++counts[p];
    }
    CHECK(counts.size() == 23);
    for (const auto& [p, c] : counts) CHECK(std::abs(c - 1000) < 150);
    CHECK_THROWS_AS(random_nonidentity_permutation(1, rng), ConfigError);
}

TEST_CASE("scrambling permutes rows and keeps times") {
    const auto obs = fixtures::random_observations(1, 5, 8, 2)[0];
    Rng rng(4);
    const auto s = scramble(obs, rng);
    CHECK(s.noise_label == 0);
    CHECK_FALSE(s.is_identity());
    CHECK(s.times == obs.times);
    for (std::uint32_t t = 0; t < 5; ++t) {
        const auto r = s.row(t), src = obs.row(s.permutation[t]);
        CHECK(std::equal(r.begin(), r.end(), src.begin()));
    }
    // Multiset of rows preserved.
    std::vector<double> a = obs.x, b = s.x;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
}

TEST_CASE("noise dataset layout") {
    const auto originals = fixtures::random_observations(6, 5, 8, 3);
    Rng rng(5);
    const auto noise = make_noise_dataset(originals, 2, rng);
    REQUIRE(noise.size() == 18);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(noise[3 * i].noise_label == 1);
        CHECK(noise[3 * i].x == originals[i].x);
        CHECK(noise[3 * i + 1].noise_label == 0);
        CHECK(noise[3 * i + 2].noise_label == 0);
        CHECK(noise[3 * i + 1].permutation != noise[3 * i + 2].permutation);
    }
    Rng again(5);
    CHECK(make_noise_dataset(originals, 2, again) == noise);
    // tau = 2 has a single non-identity permutation: copies coincide but are still produced.
    const auto short_obs = fixtures::random_observations(2, 2, 8, 3);
    const auto twice = make_noise_dataset(short_obs, 2, rng);
    CHECK(twice.size() == 6);
    CHECK(twice[1].permutation == twice[2].permutation);
}

TEST_CASE("selective shuffling probabilities") {
    auto pos = fixtures::random_observations(4000, 5, 8, 7);
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i].external_label = i < 2000 ? 1 : 0;
    Rng rng(8);
    const auto out = selective_shuffle(pos, 0.8, rng);
    int shuffled_pos = 0, shuffled_neg = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const bool shuffled = !out[i].is_identity();
        if (shuffled) CHECK(*out[i].external_label == 0);
        else CHECK(out[i].external_label == pos[i].external_label);
        (i < 2000 ? shuffled_pos : shuffled_neg) += shuffled;
    }
    CHECK(std::abs(shuffled_pos / 2000.0 - 0.8) < 0.03);
    CHECK(std::abs(shuffled_neg / 2000.0 - 0.2) < 0.03);

    Rng r1(1);
    // p = 0: progressing-labeled windows are never shuffled.
    auto none = selective_shuffle(std::span(pos).first(2000), 0.0, r1);
    for (const auto& o : none) CHECK(o.is_identity());
    pos[0].external_label.reset();
    CHECK_THROWS_AS(selective_shuffle(pos, 0.5, rng), DataError);
    CHECK_THROWS_AS(selective_shuffle(pos, 1.5, rng), ConfigError);
}

TEST_CASE("augmentation") {
    const auto obs = fixtures::random_observations(1, 5, 16, 9)[0];
    AugmentConfig none;
    none.jitter_sd = 0;
    none.scale = 0;
    none.max_shift = 0;
    none.dropout_prob = 0;
    Rng rng(10);
    CHECK(augment(obs, none, rng).x == obs.x);

    AugmentConfig shift_only = none;
    shift_only.max_shift = 3;
    Rng r2(11);
    const auto s = augment(obs, shift_only, r2);
    std::vector<double> a = obs.x, b = s.x;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);

    Rng r3(12), r4(12);
    const AugmentConfig def;
    CHECK(augment(obs, def, r3) == augment(obs, def, r4));
    CHECK(augment(obs, def, r3).times == obs.times);
    AugmentConfig bad;
    bad.scale = 1.0;
    CHECK_THROWS_AS(augment(obs, bad, rng), ConfigError);
}

TEST_CASE("seqset round trip is exact") {
    auto wins = build_windows(simulated(13), 5, true);
    wins[0].view.external_label = 1;
    wins[1].view.external_label = 0;
    Rng rng(2);
    wins[2].view = scramble(wins[2].view, rng);
    const auto text = seqset_to_string(wins);
    const auto back = seqset_from_string(text);
    CHECK(back == wins);
    CHECK(seqset_to_string(back) == text);

    std::string bad = text;
    bad[bad.find("[trailer]\nlabel 0 1") + 18] = '0';
    CHECK_THROWS_WITH_AS(seqset_from_string(bad), doctest::Contains("checksum"), DataError);
    CHECK_THROWS_AS(seqset_from_string("seqset/2\n"), DataError);
}

TEST_CASE("views carry no truth") {
    const auto wins = build_windows(simulated(17), 5, true);
    const auto views = views_of(wins);
    REQUIRE(views.size() == wins.size());
    for (std::size_t i = 0; i < views.size(); ++i) CHECK(views[i] == wins[i].view);
}
