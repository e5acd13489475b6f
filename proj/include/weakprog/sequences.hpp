#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weakprog/rng.hpp"
#include "weakprog/simcohort.hpp"

namespace weakprog {

/// One tau-visit window as seen by learning code. It deliberately carries
/// no simulator truth; see SequenceObservation.
struct Observation {
    std::uint32_t subject_id = 0;
    std::uint32_t eye_id = 0;
    std::uint32_t window_index = 0;
    std::uint32_t tau = 0;
    std::uint32_t P = 0;
    std::vector<double> x;       // tau x P, row-major, visit order = row order
    std::vector<double> times;   // tau
    int pu_label = 1;            // 0 healthy, 1 unlabeled
    int noise_label = 1;         // 1 original order, 0 scrambled
    std::optional<int> external_label;
    std::vector<std::uint32_t> permutation;  // row i holds source row permutation[i]

    std::span<const double> row(std::size_t t) const { return {x.data() + t * P, P}; }
    std::span<double> row(std::size_t t) { return {x.data() + t * P, P}; }
    std::vector<double> global_means() const;
    bool is_identity() const;

    bool operator==(const Observation&) const = default;
};

/// Observation plus the oracle flag. Only evaluation code reads `truth_progressing`.
struct SequenceObservation {
    Observation view;
    bool truth_progressing = false;

    bool operator==(const SequenceObservation&) const = default;
};

std::vector<Observation> views_of(std::span<const SequenceObservation> seqs);

/// Sliding windows of tau consecutive (usable) visits. Window truth is
/// "progressing eye whose onset precedes the window's last visit".
std::vector<SequenceObservation> build_windows(const Cohort& cohort, std::uint32_t tau, bool require_quality);

enum class Partition { train = 0, validation = 1, test = 2 };
std::string to_string(Partition p);

struct SplitAssignment {
    std::map<std::uint32_t, Partition> subject_partition;
    std::array<double, 3> ratios{0.7, 0.15, 0.15};
    std::uint64_t seed = 0;

    Partition of(std::uint32_t subject_id) const;
    std::array<std::size_t, 3> counts() const;
};

/// Shuffles distinct subjects with `seed`, then assigns quota blocks sized by
/// largest-remainder rounding of ratios * n_subjects.
SplitAssignment subject_split(std::span<const SequenceObservation> observations, std::array<double, 3> ratios,
                              std::uint64_t seed);
std::array<std::size_t, 3> largest_remainder_quotas(std::size_t n, std::array<double, 3> ratios);

template <typename T>
std::vector<T> select_partition(std::span<const T> items, const SplitAssignment& split, Partition part) {
    std::vector<T> out;
    for (const auto& it : items) {
        std::uint32_t subject;
        if constexpr (requires { it.view; }) subject = it.view.subject_id;
        else subject = it.subject_id;
        if (split.of(subject) == part) out.push_back(it);
    }
    return out;
}

/// Uniform draw over the tau! - 1 non-identity permutations.
std::vector<std::uint32_t> random_nonidentity_permutation(std::uint32_t tau, Rng& rng);
Observation apply_permutation(const Observation& obs, const std::vector<std::uint32_t>& perm);

/// Rows permuted by a non-identity permutation, noise_label = 0. Times keep
/// their original order.
Observation scramble(const Observation& obs, Rng& rng);

/// For each original: the original (noise_label 1) followed by k scrambled
/// copies (noise_label 0), pairwise distinct whenever tau! - 1 >= k.
std::vector<Observation> make_noise_dataset(std::span<const Observation> originals, std::uint32_t k, Rng& rng);

/// Progressing-labeled windows are shuffled with probability p, the others
/// with probability 1 - p; every shuffled output is relabeled 0.
std::vector<Observation> selective_shuffle(std::span<const Observation> labeled, double p, Rng& rng);

struct AugmentConfig {
    double jitter_sd = 0.5;      // um
    double scale = 0.05;         // log-uniform in [1 - s, 1 + s]
    std::uint32_t max_shift = 2; // circular shift in points
    double dropout_frac = 0.1;   // max arc length as a fraction of P
    double dropout_prob = 0.3;   // per visit
};

/// Jitter, global scale, circular shift, segment dropout, in that order.
Observation augment(const Observation& obs, const AugmentConfig& cfg, Rng& rng);

/// Text container "seqset/1"; external labels and truth live in the trailer.
std::string seqset_to_string(std::span<const SequenceObservation> seqs);
std::vector<SequenceObservation> seqset_from_string(const std::string& text, const std::string& origin = "<string>");
void seqset_to_disk(std::span<const SequenceObservation> seqs, const std::filesystem::path& path);
std::vector<SequenceObservation> seqset_from_disk(const std::filesystem::path& path);

}  // namespace weakprog
