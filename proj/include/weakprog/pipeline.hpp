#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "weakprog/baselines.hpp"
#include "weakprog/eval.hpp"
#include "weakprog/sequences.hpp"
#include "weakprog/simcohort.hpp"
#include "weakprog/training.hpp"

namespace weakprog {

struct PrepareConfig {
    std::uint32_t tau = 5;
    bool require_quality = true;
    std::array<double, 3> split_ratios{0.7, 0.15, 0.15};
    std::uint64_t seed = 1;
    GpaConfig gpa;

    void to_kv(KvConfig& kv) const;
    static PrepareConfig from_kv(const KvConfig& kv);
};

struct PreparedData {
    SplitAssignment split;
    std::vector<SequenceObservation> train, validation, test;
};

/// Windows, subject-level split and GPA endpoint labels (from each eye's full series).
/// For Noise-PU the endpoint labels are withheld from train/validation; the test
/// partition keeps them so evaluation can use either reference.
PreparedData prepare_dataset(const Cohort& cohort, Scheme scheme, const PrepareConfig& cfg);

std::string window_id(const Observation& o);

/// Report rows for a test partition: ids, truth (simulator or GPA), OLS slopes, glaucoma flags.
EvalReport report_rows(std::span<const SequenceObservation> test, bool gpa_truth);

}  // namespace weakprog
