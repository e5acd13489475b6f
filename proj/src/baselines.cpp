#include "weakprog/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "weakprog/error.hpp"
#include "weakprog/stats.hpp"
#include "weakprog/textio.hpp"

namespace weakprog {

OlsFit ols_fit(std::span<const double> times, std::span<const double> values) {
    if (times.size() != values.size()) throw DataError("ols_fit: times and values differ in length");
    const std::size_t n = times.size();
    if (n < 3) throw DataError("ols_fit: at least 3 points are needed for a p-value");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(times[i]) || !std::isfinite(values[i])) throw DataError("ols_fit: non-finite input");
    const double tm = stats::mean(times);
    const double vm = stats::mean(values);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (times[i] - tm) * (times[i] - tm);
        sxy += (times[i] - tm) * (values[i] - vm);
    }
    if (!(sxx > 0.0)) throw DataError("ols_fit: times have zero variance");
    OlsFit f;
    f.n = n;
    f.slope = sxy / sxx;
    f.intercept = vm - f.slope * tm;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = values[i] - (f.intercept + f.slope * times[i]);
        sse += r * r;
    }
    const double df = static_cast<double>(n - 2);
    f.residual_var = sse / df;
    f.slope_se = std::sqrt(f.residual_var / sxx);
    // Residuals at rounding level relative to the data count as an exact fit.
    double scale = 0.0;
    for (double v : values) scale = std::max(scale, std::abs(v));
    if (f.residual_var <= 1e-24 * std::max(1.0, scale * scale)) {
        f.degenerate = true;
        f.residual_var = 0.0;
        f.slope_se = 0.0;
        if (std::abs(f.slope) <= 1e-12 * std::max(1.0, scale)) {
            f.slope = 0.0;
            f.t_stat = 0.0;
            f.p_two_sided = 1.0;
        } else {
            f.t_stat = f.slope > 0 ? INFINITY : -INFINITY;
            f.p_two_sided = 0.0;
        }
        return f;
    }
    f.t_stat = f.slope / f.slope_se;
    f.p_two_sided = stats::student_t_two_sided(f.t_stat, df);
    return f;
}

OlsFit ols_window(const Observation& window) {
    return ols_fit(window.times, window.global_means());
}

bool ols_progression(const Observation& window, double alpha) {
    const OlsFit f = ols_window(window);
    return f.slope < 0.0 && f.p_two_sided < alpha;
}

double ols_score(const OlsFit& fit) {
    if (fit.degenerate) return fit.slope < 0 ? 1.0 : (fit.slope > 0 ? 0.0 : 0.5);
    return 1.0 - stats::student_t_cdf(fit.t_stat, static_cast<double>(fit.n - 2));
}

std::string to_string(GpaMark m) {
    switch (m) {
    case GpaMark::none: return "none";
    case GpaMark::empty: return "empty";
    case GpaMark::half: return "half";
    case GpaMark::solid: return "solid";
    }
    return "?";
}

std::string to_string(GpaClass c) {
    switch (c) {
    case GpaClass::stable: return "stable";
    case GpaClass::possible: return "possible";
    case GpaClass::likely: return "likely";
    }
    return "?";
}

void GpaConfig::validate() const {
    if (!(variability_multiplier > 0.0)) throw ConfigError("gpa: variability_multiplier must be > 0");
    if (points_required < 1) throw ConfigError("gpa: points_required must be >= 1");
    if (!(consecutive_for_likely >= consecutive_for_possible && consecutive_for_possible >= 1))
        throw ConfigError("gpa: need consecutive_for_likely >= consecutive_for_possible >= 1");
    if (!(test_retest_sd > 0.0)) throw ConfigError("gpa: test_retest_sd must be > 0");
}

void GpaConfig::to_kv(KvConfig& kv, const std::string& prefix) const {
    kv.set(prefix + "variability_multiplier", format_double(variability_multiplier));
    kv.set(prefix + "points_required", std::to_string(points_required));
    kv.set(prefix + "consecutive_for_possible", std::to_string(consecutive_for_possible));
    kv.set(prefix + "consecutive_for_likely", std::to_string(consecutive_for_likely));
    kv.set(prefix + "max_events", std::to_string(max_events));
    kv.set(prefix + "test_retest_sd", format_double(test_retest_sd));
}

GpaConfig GpaConfig::from_kv(const KvConfig& kv, const std::string& prefix) {
    GpaConfig c;
    auto u32 = [&](const char* k, std::uint32_t fb) {
        const auto v = kv.get_int(prefix + k, fb);
        if (v < 0 || v > 0xffffffffLL) throw ConfigError(kv.origin() + ": field '" + prefix + k + "' out of range");
        return static_cast<std::uint32_t>(v);
    };
    c.variability_multiplier = kv.get_double(prefix + "variability_multiplier", c.variability_multiplier);
    c.points_required = u32("points_required", c.points_required);
    c.consecutive_for_possible = u32("consecutive_for_possible", c.consecutive_for_possible);
    c.consecutive_for_likely = u32("consecutive_for_likely", c.consecutive_for_likely);
    c.max_events = u32("max_events", c.max_events);
    c.test_retest_sd = kv.get_double(prefix + "test_retest_sd", c.test_retest_sd);
    c.validate();
    return c;
}

double GpaConfig::flag_limit() const { return variability_multiplier * test_retest_sd * std::sqrt(1.5); }

GpaClass GpaResult::worst() const {
    GpaClass w = GpaClass::stable;
    for (const auto& f : follow_ups) w = std::max(w, f.classification);
    return w;
}

GpaResult gpa_classify(std::span<const double> times, const std::vector<std::vector<double>>& values,
                       const GpaConfig& cfg) {
    cfg.validate();
    if (times.size() != values.size()) throw DataError("gpa_classify: times and tests differ in count");
    if (values.size() < 3) throw DataError("gpa_classify: need 2 baseline tests and at least 1 follow-up");
    const std::size_t P = values.front().size();
    for (const auto& v : values)
        if (v.size() != P) throw DataError("gpa_classify: tests differ in length");
    const double limit = cfg.flag_limit();

    GpaResult r;
    std::size_t ba = 0, bb = 1;
    std::vector<double> base(P);
    auto set_baseline = [&](std::size_t a, std::size_t b) {
        ba = a;
        bb = b;
        for (std::size_t p = 0; p < P; ++p) base[p] = 0.5 * (values[a][p] + values[b][p]);
    };
    set_baseline(0, 1);
    std::vector<std::uint32_t> streak(P, 0);

    for (std::size_t i = 2; i < values.size(); ++i) {
        GpaFollowUp fu;
        fu.test_index = i;
        fu.baseline_a = ba;
        fu.baseline_b = bb;
        fu.marks.assign(P, GpaMark::none);
        std::size_t n_possible = 0, n_likely = 0;
        for (std::size_t p = 0; p < P; ++p) {
            const bool flag = (base[p] - values[i][p]) > limit;
            streak[p] = flag ? streak[p] + 1 : 0;
            if (flag) ++fu.flagged;
            fu.marks[p] = streak[p] == 0   ? GpaMark::none
                          : streak[p] == 1 ? GpaMark::empty
                          : streak[p] == 2 ? GpaMark::half
                                           : GpaMark::solid;
            if (streak[p] >= cfg.consecutive_for_possible) ++n_possible;
            if (streak[p] >= cfg.consecutive_for_likely) ++n_likely;
        }
        if (n_likely >= cfg.points_required) fu.classification = GpaClass::likely;
        else if (n_possible >= cfg.points_required) fu.classification = GpaClass::possible;
        r.follow_ups.push_back(std::move(fu));

        if (r.follow_ups.back().classification == GpaClass::likely && r.event_times.size() < cfg.max_events) {
            const std::size_t e = i + 1 - cfg.consecutive_for_likely;
            r.event_indices.push_back(e);
            r.event_times.push_back(times[e]);
            set_baseline(e, e + 1);
            std::fill(streak.begin(), streak.end(), 0u);
        }
    }
    return r;
}

GpaResult gpa_classify_eye(const EyeSeries& eye, const GpaConfig& cfg, bool require_quality) {
    std::vector<double> t;
    std::vector<std::vector<double>> v;
    for (const auto& visit : eye.visits) {
        if (require_quality && !visit.quality_ok) continue;
        t.push_back(visit.t);
        v.push_back(visit.profile);
    }
    return gpa_classify(t, v, cfg);
}

int gpa_window_label(const GpaResult& result, const Observation& window) {
    if (window.times.empty()) return 0;
    const double lo = window.times.front();
    const double hi = window.times.back();
    for (double t : result.event_times)
        if (t > lo && t <= hi) return 1;
    return 0;
}

void gpa_label_windows(const GpaResult& result, std::span<Observation> windows) {
    for (auto& w : windows) w.external_label = gpa_window_label(result, w);
}

double gpa_window_score(const Observation& window, const GpaConfig& cfg) {
    std::vector<std::vector<double>> v;
    for (std::uint32_t t = 0; t < window.tau; ++t) {
        const auto row = window.row(t);
        v.emplace_back(row.begin(), row.end());
    }
    switch (gpa_classify(window.times, v, cfg).worst()) {
    case GpaClass::likely: return 1.0;
    case GpaClass::possible: return 0.5;
    case GpaClass::stable: return 0.0;
    }
    return 0.0;
}

std::string gpa_to_csv(const GpaResult& r) {
    std::string out = "follow_up,test_index,baseline_a,baseline_b,classification,flagged\n";
    for (std::size_t i = 0; i < r.follow_ups.size(); ++i) {
        const auto& f = r.follow_ups[i];
        out += std::to_string(i) + "," + std::to_string(f.test_index) + "," + std::to_string(f.baseline_a) + "," +
               std::to_string(f.baseline_b) + "," + to_string(f.classification) + "," + std::to_string(f.flagged) +
               "\n";
    }
    return out;
}

std::string gpa_events_json(const GpaResult& r) {
    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.event_times.size(); ++i)
        events.push_back({{"event", i}, {"test_index", r.event_indices[i]}, {"t", r.event_times[i]}});
    nlohmann::ordered_json j;
    j["events"] = events;
    j["worst"] = to_string(r.worst());
    return j.dump(2) + "\n";
}

}  // namespace weakprog
