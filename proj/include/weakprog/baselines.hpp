#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "weakprog/sequences.hpp"
#include "weakprog/textio.hpp"

namespace weakprog {

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double t_stat = 0.0;
    double p_two_sided = 1.0;
    std::size_t n = 0;
    double residual_var = 0.0;
    bool degenerate = false;  // zero residual variance
};

/// Least-squares line values ~ times with a t-test on the slope (n - 2 df).
/// Zero residual variance yields p = 0 (or p = 1 for a zero slope) with the
/// degenerate flag set.
OlsFit ols_fit(std::span<const double> times, std::span<const double> values);

/// OLS of the per-visit global mean thickness against time.
OlsFit ols_window(const Observation& window);

/// Significant negative slope: slope < 0 and p < alpha.
bool ols_progression(const Observation& window, double alpha = 0.05);

/// Continuous OLS score in [0,1] for threshold matching: the complement of the
/// one-sided p-value for a negative slope, 1 - P(T <= t).
double ols_score(const OlsFit& fit);

enum class GpaMark { none, empty, half, solid };
enum class GpaClass { stable, possible, likely };
std::string to_string(GpaMark m);
std::string to_string(GpaClass c);

struct GpaConfig {
    double variability_multiplier = 1.96;
    std::uint32_t points_required = 3;
    std::uint32_t consecutive_for_possible = 2;
    std::uint32_t consecutive_for_likely = 3;
    std::uint32_t max_events = 3;
    double test_retest_sd = 4.0;  // um

    void validate() const;
    void to_kv(KvConfig& kv, const std::string& prefix = "gpa.") const;
    static GpaConfig from_kv(const KvConfig& kv, const std::string& prefix = "gpa.");
    /// Deterioration beyond which a point is flagged: c * sd * sqrt(3/2).
    double flag_limit() const;
};

struct GpaFollowUp {
    std::size_t test_index = 0;
    std::size_t baseline_a = 0;  // indices of the baseline pair in force
    std::size_t baseline_b = 0;
    std::vector<GpaMark> marks;  // per point
    std::size_t flagged = 0;     // points flagged on this test
    GpaClass classification = GpaClass::stable;
};

struct GpaResult {
    std::vector<GpaFollowUp> follow_ups;
    std::vector<double> event_times;
    std::vector<std::size_t> event_indices;

    /// Highest classification over all follow-ups.
    GpaClass worst() const;
};

/// Pointwise event analysis over tests (rows of `values`, one per time).
GpaResult gpa_classify(std::span<const double> times, const std::vector<std::vector<double>>& values,
                       const GpaConfig& cfg);

/// GPA on the usable visits of one eye.
GpaResult gpa_classify_eye(const EyeSeries& eye, const GpaConfig& cfg, bool require_quality = true);

/// Window label 1 iff a likely event date t satisfies t_first < t <= t_last.
int gpa_window_label(const GpaResult& result, const Observation& window);
/// Assigns external_label to each window of the eye.
void gpa_label_windows(const GpaResult& result, std::span<Observation> windows);

/// GPA run on the window alone: likely = 1, possible = 0.5, stable = 0.
double gpa_window_score(const Observation& window, const GpaConfig& cfg);

/// CSV (follow_up,test_index,classification,flagged) and JSON event list.
std::string gpa_to_csv(const GpaResult& r);
std::string gpa_events_json(const GpaResult& r);

}  // namespace weakprog
