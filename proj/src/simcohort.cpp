#include "weakprog/simcohort.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "weakprog/error.hpp"
#include "weakprog/rng.hpp"

namespace weakprog {

namespace {

constexpr double kThicknessFloor = 1.0;

void require(bool ok, const std::string& field, const std::string& why) {
    if (!ok) throw ConfigError("simulator config: field '" + field + "' " + why);
}

EyeSeries simulate_eye(const SimulatorConfig& cfg, std::uint32_t subject, std::uint32_t eye,
                       Group group, double age0) {
    Rng rng(derive_seed(cfg.seed, subject, eye));
    const std::uint32_t P = cfg.profile_len;

    EyeSeries out;
    out.subject_id = subject;
    out.eye_id = eye;
    out.group = group;

    const bool healthy = group == Group::healthy;
    const double g0 = std::max(
        10.0, rng.normal(healthy ? cfg.baseline_mean_healthy : cfg.baseline_mean_glaucoma,
                         healthy ? cfg.baseline_sd_healthy : cfg.baseline_sd_glaucoma));
    const auto baseline = profile_template(P, g0, cfg.template_amplitude);

    EyeTruth& truth = out.truth;
    truth.aging_slope = rng.normal(cfg.aging_slope_mean, cfg.aging_slope_sd);
    truth.sector_center = static_cast<std::uint32_t>(rng.uniform_int(0, P - 1));
    truth.sector_mask = sector_mask(P, truth.sector_center, cfg.sector_width_fraction);
    // Drawn for every eye so healthy and glaucoma streams stay aligned.
    const double u_prog = rng.uniform();
    const double prog_slope = std::max(0.0, rng.normal(cfg.progression_slope_mean, cfg.progression_slope_sd));
    const double onset = rng.uniform(cfg.onset_earliest, std::nextafter(cfg.onset_latest, INFINITY));
    truth.is_progressing = !healthy && u_prog < cfg.fraction_progressing;
    if (truth.is_progressing) {
        truth.progression_slope = prog_slope;
        truth.onset_t = onset;
    }

    const auto n_visits = static_cast<std::uint32_t>(rng.uniform_int(cfg.visits_min, cfg.visits_max));
    out.visits.reserve(n_visits);
    double t = 0.0;
    for (std::uint32_t v = 0; v < n_visits; ++v) {
        if (v > 0) t += rng.truncated_normal(cfg.visit_interval_mean, cfg.visit_interval_sd, 0.1);
        VisitRecord rec;
        rec.t = t;
        rec.age = age0 + t;
        rec.profile.resize(P);
        for (std::uint32_t p = 0; p < P; ++p) {
            const double law = thickness_law(baseline[p], t, truth, truth.sector_mask[p]);
            rec.profile[p] = std::max(kThicknessFloor, law + rng.normal(0.0, cfg.noise_sd));
        }
        rec.global_mean = mean_of(rec.profile);
        rec.quality_ok = !rng.bernoulli(cfg.quality_fail_prob);
        out.visits.push_back(std::move(rec));
    }
    return out;
}

}  // namespace

std::string to_string(Group g) { return g == Group::healthy ? "healthy" : "glaucoma"; }

Group group_from_string(const std::string& s) {
    if (s == "healthy") return Group::healthy;
    if (s == "glaucoma") return Group::glaucoma;
    throw DataError("unknown group '" + s + "'");
}

void SimulatorConfig::validate(std::uint32_t min_window) const {
    require(n_glaucoma_subjects + n_healthy_subjects > 0, "n_glaucoma_subjects", "and n_healthy_subjects are both zero");
    require(eyes_per_subject == 1 || eyes_per_subject == 2, "eyes_per_subject", "must be 1 or 2");
    require(visits_min >= min_window, "visits_min", "must be >= sequence length " + std::to_string(min_window));
    require(visits_max >= visits_min, "visits_max", "must be >= visits_min");
    require(profile_len >= 8, "profile_len", "must be >= 8");
    require(visit_interval_mean > 0.0, "visit_interval_mean", "must be positive");
    for (auto [name, v] : {std::pair{"visit_interval_sd", visit_interval_sd},
                           {"baseline_sd_healthy", baseline_sd_healthy},
                           {"baseline_sd_glaucoma", baseline_sd_glaucoma},
                           {"aging_slope_sd", aging_slope_sd},
                           {"progression_slope_sd", progression_slope_sd},
                           {"noise_sd", noise_sd},
                           {"age_at_baseline_sd", age_at_baseline_sd}}) {
        require(v >= 0.0 && std::isfinite(v), name, "must be a finite value >= 0");
    }
    require(fraction_progressing >= 0.0 && fraction_progressing <= 1.0, "fraction_progressing", "must lie in [0,1]");
    require(quality_fail_prob >= 0.0 && quality_fail_prob < 1.0, "quality_fail_prob", "must lie in [0,1)");
    require(sector_width_fraction > 0.0 && sector_width_fraction <= 1.0, "sector_width_fraction", "must lie in (0,1]");
    require(onset_latest >= onset_earliest, "onset_latest", "must be >= onset_earliest");
    require(template_amplitude >= 0.0 && template_amplitude < 1.0, "template_amplitude", "must lie in [0,1)");
}

void SimulatorConfig::to_kv(KvConfig& kv, const std::string& prefix) const {
    auto put = [&](const char* k, const std::string& v) { kv.set(prefix + k, v); };
    put("n_glaucoma_subjects", std::to_string(n_glaucoma_subjects));
    put("n_healthy_subjects", std::to_string(n_healthy_subjects));
    put("eyes_per_subject", std::to_string(eyes_per_subject));
    put("visits_min", std::to_string(visits_min));
    put("visits_max", std::to_string(visits_max));
    put("visit_interval_mean", format_double(visit_interval_mean));
    put("visit_interval_sd", format_double(visit_interval_sd));
    put("profile_len", std::to_string(profile_len));
    put("template_amplitude", format_double(template_amplitude));
    put("baseline_mean_healthy", format_double(baseline_mean_healthy));
    put("baseline_sd_healthy", format_double(baseline_sd_healthy));
    put("baseline_mean_glaucoma", format_double(baseline_mean_glaucoma));
    put("baseline_sd_glaucoma", format_double(baseline_sd_glaucoma));
    put("aging_slope_mean", format_double(aging_slope_mean));
    put("aging_slope_sd", format_double(aging_slope_sd));
    put("progression_slope_mean", format_double(progression_slope_mean));
    put("progression_slope_sd", format_double(progression_slope_sd));
    put("fraction_progressing", format_double(fraction_progressing));
    put("onset_earliest", format_double(onset_earliest));
    put("onset_latest", format_double(onset_latest));
    put("sector_width_fraction", format_double(sector_width_fraction));
    put("noise_sd", format_double(noise_sd));
    put("quality_fail_prob", format_double(quality_fail_prob));
    put("age_at_baseline_mean", format_double(age_at_baseline_mean));
    put("age_at_baseline_sd", format_double(age_at_baseline_sd));
    put("seed", std::to_string(seed));
}

SimulatorConfig SimulatorConfig::from_kv(const KvConfig& kv, const std::string& prefix) {
    SimulatorConfig c;
    auto u32 = [&](const char* k, std::uint32_t fb) {
        const auto v = kv.get_int(prefix + k, fb);
        if (v < 0 || v > 0xffffffffLL) throw ConfigError(kv.origin() + ": field '" + prefix + k + "' out of range");
        return static_cast<std::uint32_t>(v);
    };
    auto dbl = [&](const char* k, double fb) { return kv.get_double(prefix + k, fb); };
    c.n_glaucoma_subjects = u32("n_glaucoma_subjects", c.n_glaucoma_subjects);
    c.n_healthy_subjects = u32("n_healthy_subjects", c.n_healthy_subjects);
    c.eyes_per_subject = u32("eyes_per_subject", c.eyes_per_subject);
    c.visits_min = u32("visits_min", c.visits_min);
    c.visits_max = u32("visits_max", c.visits_max);
    c.visit_interval_mean = dbl("visit_interval_mean", c.visit_interval_mean);
    c.visit_interval_sd = dbl("visit_interval_sd", c.visit_interval_sd);
    c.profile_len = u32("profile_len", c.profile_len);
    c.template_amplitude = dbl("template_amplitude", c.template_amplitude);
    c.baseline_mean_healthy = dbl("baseline_mean_healthy", c.baseline_mean_healthy);
    c.baseline_sd_healthy = dbl("baseline_sd_healthy", c.baseline_sd_healthy);
    c.baseline_mean_glaucoma = dbl("baseline_mean_glaucoma", c.baseline_mean_glaucoma);
    c.baseline_sd_glaucoma = dbl("baseline_sd_glaucoma", c.baseline_sd_glaucoma);
    c.aging_slope_mean = dbl("aging_slope_mean", c.aging_slope_mean);
    c.aging_slope_sd = dbl("aging_slope_sd", c.aging_slope_sd);
    c.progression_slope_mean = dbl("progression_slope_mean", c.progression_slope_mean);
    c.progression_slope_sd = dbl("progression_slope_sd", c.progression_slope_sd);
    c.fraction_progressing = dbl("fraction_progressing", c.fraction_progressing);
    c.onset_earliest = dbl("onset_earliest", c.onset_earliest);
    c.onset_latest = dbl("onset_latest", c.onset_latest);
    c.sector_width_fraction = dbl("sector_width_fraction", c.sector_width_fraction);
    c.noise_sd = dbl("noise_sd", c.noise_sd);
    c.quality_fail_prob = dbl("quality_fail_prob", c.quality_fail_prob);
    c.age_at_baseline_mean = dbl("age_at_baseline_mean", c.age_at_baseline_mean);
    c.age_at_baseline_sd = dbl("age_at_baseline_sd", c.age_at_baseline_sd);
    c.seed = kv.get_u64(prefix + "seed", c.seed);
    return c;
}

std::vector<double> profile_template(std::uint32_t P, double global_mean, double amplitude) {
    if (P < 8) throw ConfigError("profile_template: P must be >= 8");
    if (!(global_mean > 0.0)) throw ConfigError("profile_template: global_mean must be positive");
    std::vector<double> b(P);
    for (std::uint32_t p = 0; p < P; ++p)
        b[p] = global_mean * (1.0 + amplitude * std::sin(4.0 * std::numbers::pi * p / P));
    return b;
}

std::vector<double> sector_mask(std::uint32_t P, std::uint32_t center, double width_fraction) {
    if (!(width_fraction > 0.0 && width_fraction <= 1.0))
        throw ConfigError("sector_mask: width_fraction must lie in (0,1]");
    if (P == 0) throw ConfigError("sector_mask: empty profile");
    const double support = std::ceil(width_fraction * P);
    // Half-width chosen so that exactly the points with circular distance
    // <= floor(support / 2) are non-zero.
    const double half = support / 2.0 + 0.5;
    std::vector<double> mask(P, 0.0);
    for (std::uint32_t i = 0; i < P; ++i) {
        const std::uint32_t raw = i > center ? i - center : center - i;
        const double d = std::min<std::uint32_t>(raw % P, P - raw % P);
        if (d < half) mask[i] = 0.5 * (1.0 + std::cos(std::numbers::pi * d / half));
    }
    return mask;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double thickness_law(double baseline, double t, const EyeTruth& truth, double mask_value) {
    double value = baseline - truth.aging_slope * t;
    if (truth.is_progressing && truth.onset_t)
        value -= truth.progression_slope * std::max(0.0, t - *truth.onset_t) * mask_value;
    return value;
}

Cohort generate_cohort(const SimulatorConfig& cfg, unsigned threads) {
    cfg.validate();
    struct Slot {
        std::uint32_t subject;
        std::uint32_t eye;
        Group group;
        double age0;
    };
    std::vector<Slot> slots;
    const std::uint32_t n_subjects = cfg.n_glaucoma_subjects + cfg.n_healthy_subjects;
    for (std::uint32_t s = 0; s < n_subjects; ++s) {
        const Group g = s < cfg.n_glaucoma_subjects ? Group::glaucoma : Group::healthy;
        Rng subject_rng(derive_seed(cfg.seed, s, 0xffffffffULL));
        const double age0 = subject_rng.normal(cfg.age_at_baseline_mean, cfg.age_at_baseline_sd);
        for (std::uint32_t e = 0; e < cfg.eyes_per_subject; ++e) slots.push_back({s, e, g, age0});
    }

    Cohort cohort;
    cohort.config = cfg;
    cohort.eyes.resize(slots.size());
    auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < slots.size(); i += step)
            cohort.eyes[i] = simulate_eye(cfg, slots[i].subject, slots[i].eye, slots[i].group, slots[i].age0);
    };
    threads = std::max(1u, threads);
    if (threads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
        for (auto& th : pool) th.join();
    }
    return cohort;
}

}  // namespace weakprog
