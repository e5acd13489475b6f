#include "weakprog/pipeline.hpp"

#include <map>

#include "weakprog/error.hpp"
#include "weakprog/textio.hpp"

namespace weakprog {

void PrepareConfig::to_kv(KvConfig& kv) const {
    kv.set("prepare.tau", std::to_string(tau));
    kv.set("prepare.require_quality", require_quality ? "true" : "false");
    kv.set("prepare.split", format_double(split_ratios[0]) + "," + format_double(split_ratios[1]) + "," +
                                format_double(split_ratios[2]));
    kv.set("prepare.seed", std::to_string(seed));
    gpa.to_kv(kv);
}

PrepareConfig PrepareConfig::from_kv(const KvConfig& kv) {
    PrepareConfig c;
    const auto tau = kv.get_int("prepare.tau", c.tau);
    if (tau < 2 || tau > 64) throw ConfigError(kv.origin() + ": field 'prepare.tau' out of range");
    c.tau = static_cast<std::uint32_t>(tau);
    c.require_quality = kv.get_bool("prepare.require_quality", c.require_quality);
    if (kv.has("prepare.split")) {
        const auto parts = split(kv.get_string("prepare.split", ""), ',');
        if (parts.size() != 3) throw ConfigError(kv.origin() + ": field 'prepare.split' needs three ratios");
        for (std::size_t i = 0; i < 3; ++i) c.split_ratios[i] = parse_double(trim(parts[i]), "prepare.split");
    }
    largest_remainder_quotas(10, c.split_ratios);  // validates the ratios
    c.seed = kv.get_u64("prepare.seed", c.seed);
    c.gpa = GpaConfig::from_kv(kv);
    return c;
}

PreparedData prepare_dataset(const Cohort& cohort, Scheme scheme, const PrepareConfig& cfg) {
    auto windows = build_windows(cohort, cfg.tau, cfg.require_quality);
    if (windows.empty()) throw DataError("prepare: cohort yields no windows of length " + std::to_string(cfg.tau));
    std::map<std::pair<std::uint32_t, std::uint32_t>, GpaResult> gpa;
    for (const auto& eye : cohort.eyes)
        gpa.emplace(std::make_pair(eye.subject_id, eye.eye_id), gpa_classify_eye(eye, cfg.gpa, cfg.require_quality));
    for (auto& w : windows)
        w.view.external_label = gpa_window_label(gpa.at({w.view.subject_id, w.view.eye_id}), w.view);

    PreparedData d;
    d.split = subject_split(windows, cfg.split_ratios, cfg.seed);
    const std::span<const SequenceObservation> all(windows);
    d.train = select_partition(all, d.split, Partition::train);
    d.validation = select_partition(all, d.split, Partition::validation);
    d.test = select_partition(all, d.split, Partition::test);
    if (scheme == Scheme::noisepu) {
        for (auto& w : d.train) w.view.external_label.reset();
        for (auto& w : d.validation) w.view.external_label.reset();
    }
    return d;
}

std::string window_id(const Observation& o) {
    return std::to_string(o.subject_id) + "/" + std::to_string(o.eye_id) + "/" + std::to_string(o.window_index);
}

EvalReport report_rows(std::span<const SequenceObservation> test, bool gpa_truth) {
    EvalReport r;
    r.truth_source = gpa_truth ? "gpa" : "simulator";
    for (const auto& w : test) {
        r.ids.push_back(window_id(w.view));
        if (gpa_truth) {
            if (!w.view.external_label) throw DataError("test window " + window_id(w.view) + " has no GPA label");
            r.truth.push_back(*w.view.external_label);
        } else {
            r.truth.push_back(w.truth_progressing ? 1 : 0);
        }
        r.ols_slopes.push_back(ols_window(w.view).slope);
        r.glaucoma.push_back(w.view.pu_label);
    }
    return r;
}

}  // namespace weakprog
