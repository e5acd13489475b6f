#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace weakprog {

/// Mann-Whitney AUC: P(pos > neg) + P(pos == neg) / 2.
double auc(std::span<const double> pos, std::span<const double> neg);

struct AucCi {
    double auc = 0.0;
    double variance = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double level = 0.95;
    std::string method = "delong";
    bool degenerate = false;  // zero variance
};

/// DeLong structural-component variance with a normal-quantile interval clipped to [0,1].
AucCi delong_ci(std::span<const double> pos, std::span<const double> neg, double level = 0.95);
/// DeLong variance alone.
double delong_variance(std::span<const double> pos, std::span<const double> neg);

/// Smallest threshold whose specificity (share of negatives with score < theta)
/// reaches `target`; decisions are "positive iff score >= theta".
double threshold_for_specificity(std::span<const double> neg, double target);
double specificity_at(std::span<const double> neg, double threshold);

struct Proportion {
    double value = 0.0;
    std::size_t hits = 0;
    std::size_t n = 0;
    double lo = 0.0;
    double hi = 0.0;
    double level = 0.95;
    std::string method = "wilson";
};

Proportion wilson_interval(std::size_t hits, std::size_t n, double level = 0.95);
/// Share of scores >= threshold, with a Wilson interval.
Proportion hit_ratio(std::span<const double> scores, double threshold, double level = 0.95);

struct McNemarResult {
    std::size_t b = 0;  // first method only
    std::size_t c = 0;  // second method only
    double chi2 = 0.0;
    double p = 1.0;
    bool exact = false;      // exact binomial branch (b + c < 25)
    bool no_discordance = false;
};

/// Paired comparison of two decision vectors, restricted to entries where
/// `mask` is true (all entries when mask is empty).
McNemarResult mcnemar(std::span<const int> a, std::span<const int> b, std::span<const int> mask = {});
McNemarResult mcnemar_from_counts(std::size_t b, std::size_t c);

struct ConfusionMetrics {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    double mcc = 0.0;
    bool mcc_degenerate = false;
};

ConfusionMetrics confusion_metrics(std::span<const int> decisions, std::span<const int> truth);
ConfusionMetrics confusion_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

struct WelchResult {
    double mean_a = 0.0;
    double mean_b = 0.0;
    double sd_a = 0.0;
    double sd_b = 0.0;
    std::size_t n_a = 0;
    std::size_t n_b = 0;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// Welch test of slopes between predicted-progressing (decision 1) and
/// predicted-stable (decision 0) windows.
WelchResult group_slope_comparison(std::span<const int> decisions, std::span<const double> slopes);

/// ROC points (fpr, tpr) for thresholds at every distinct score, from (0,0) to (1,1).
std::vector<std::pair<double, double>> roc_curve(std::span<const double> pos, std::span<const double> neg);

// ------------------------------------------------------------------ report

struct SchemeEval {
    std::string name;
    std::vector<double> scores;  // aligned with EvalReport::ids
    std::vector<int> decisions;
    AucCi auc;
    double target_specificity = 0.95;
    double achieved_specificity = 0.0;
    double threshold = 0.0;
    Proportion hit;
    ConfusionMetrics confusion;
    std::optional<WelchResult> slopes;
};

struct PairedTest {
    std::string a;
    std::string b;
    McNemarResult result;
};

struct EvalReport {
    std::string truth_source = "simulator";  // or "gpa"
    std::vector<std::string> ids;            // subject/eye/window
    std::vector<int> truth;
    std::vector<double> ols_slopes;
    std::vector<int> glaucoma;               // 1 for windows from glaucoma eyes
    std::vector<SchemeEval> schemes;
    std::vector<PairedTest> mcnemar;
    std::vector<std::pair<std::string, std::string>> metadata;  // seeds, config hashes, notes
};

/// Fills every SchemeEval from its scores: AUC/DeLong, matched threshold,
/// hit ratio on truth positives, confusion metrics, slope comparison; then
/// McNemar between every pair of schemes on truth positives.
void evaluate_schemes(EvalReport& report, double target_specificity, double level = 0.95);

std::string report_json(const EvalReport& r);
std::string report_markdown(const EvalReport& r);
std::string report_scores_csv(const EvalReport& r);
std::string report_roc_svg(const EvalReport& r, const std::string& config_hash);

/// Writes report.json, report.md, scores.csv and roc.svg into `dir`; returns the written paths.
std::vector<std::filesystem::path> write_report(const EvalReport& r, const std::filesystem::path& dir,
                                                const std::string& config_hash);

}  // namespace weakprog
