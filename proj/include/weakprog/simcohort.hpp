#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "weakprog/textio.hpp"

namespace weakprog {

enum class Group { healthy, glaucoma };

std::string to_string(Group g);
Group group_from_string(const std::string& s);

/// Parameters of the synthetic cohort. Defaults follow the clinical
/// cohort's baseline characteristics (healthy 96.2 +/- 10.1 um, glaucoma
/// 79.4 +/- 15.5 um, age 65.6 +/- 10.5 years).
struct SimulatorConfig {
    std::uint32_t n_glaucoma_subjects = 300;
    std::uint32_t n_healthy_subjects = 40;
    std::uint32_t eyes_per_subject = 2;
    std::uint32_t visits_min = 5;
    std::uint32_t visits_max = 11;
    double visit_interval_mean = 0.5;
    double visit_interval_sd = 0.15;
    std::uint32_t profile_len = 64;
    double template_amplitude = 0.35;
    double baseline_mean_healthy = 96.2;
    double baseline_sd_healthy = 10.1;
    double baseline_mean_glaucoma = 79.4;
    double baseline_sd_glaucoma = 15.5;
    double aging_slope_mean = 0.51;
    double aging_slope_sd = 0.3;
    double progression_slope_mean = 2.0;
    double progression_slope_sd = 0.75;
    double fraction_progressing = 0.4;
    double onset_earliest = 0.0;
    double onset_latest = 2.5;
    double sector_width_fraction = 0.25;
    double noise_sd = 4.0;
    double quality_fail_prob = 0.03;
    double age_at_baseline_mean = 65.6;
    double age_at_baseline_sd = 10.5;
    std::uint64_t seed = 1;

    /// Throws ConfigError naming the offending field. `min_window` is the
    /// sequence length the cohort must support (visits_min >= min_window).
    void validate(std::uint32_t min_window = 2) const;

    void to_kv(KvConfig& kv, const std::string& prefix = "") const;
    static SimulatorConfig from_kv(const KvConfig& kv, const std::string& prefix = "");
};

struct EyeTruth {
    bool is_progressing = false;
    std::optional<double> onset_t;  // only when progressing
    double aging_slope = 0.0;
    double progression_slope = 0.0;
    std::uint32_t sector_center = 0;
    std::vector<double> sector_mask;

    bool operator==(const EyeTruth&) const = default;
};

struct VisitRecord {
    double t = 0.0;
    double age = 0.0;
    std::vector<double> profile;
    double global_mean = 0.0;
    bool quality_ok = true;

    bool operator==(const VisitRecord&) const = default;
};

struct EyeSeries {
    std::uint32_t subject_id = 0;
    std::uint32_t eye_id = 0;
    Group group = Group::glaucoma;
    EyeTruth truth;
    std::vector<VisitRecord> visits;

    bool operator==(const EyeSeries&) const = default;
};

struct Cohort {
    SimulatorConfig config;
    std::vector<EyeSeries> eyes;
};

/// Smooth TSNIT-like stand-in: b_p = g (1 + a sin(4 pi p / P)), a = amplitude.
std::vector<double> profile_template(std::uint32_t P, double global_mean, double amplitude = 0.35);

/// Circular raised-cosine bump with ceil(width_fraction * P) support points,
/// peak 1 at `center`.
std::vector<double> sector_mask(std::uint32_t P, std::uint32_t center, double width_fraction);

double mean_of(const std::vector<double>& v);

/// Noise-free thickness at time t for one point.
double thickness_law(double baseline, double t, const EyeTruth& truth, double mask_value);

/// Deterministic in cfg (including seed); `threads` only affects speed.
Cohort generate_cohort(const SimulatorConfig& cfg, unsigned threads = 1);

/// Text container "simcohort/1". Profiles are written with 4 decimals, so a
/// round-trip quantizes thickness to 1e-4 um; global means are recomputed
/// from the stored profile on read.
std::string cohort_to_string(const Cohort& cohort);
Cohort cohort_from_string(const std::string& text, const std::string& origin = "<string>");
void cohort_to_disk(const Cohort& cohort, const std::filesystem::path& path);
Cohort cohort_from_disk(const std::filesystem::path& path);

}  // namespace weakprog
