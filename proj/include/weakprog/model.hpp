#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weakprog/losses.hpp"
#include "weakprog/sequences.hpp"

namespace weakprog {

enum class Head { pu = 0, noise = 1, main = 2 };
std::string to_string(Head h);
Head head_from_string(const std::string& s);

enum class CellKind { gated_simple, full_lstm };
std::string to_string(CellKind c);
CellKind cell_from_string(const std::string& s);

struct ModelConfig {
    std::uint32_t P = 64;
    std::uint32_t tau = 5;
    std::uint32_t conv_channels = 8;
    std::uint32_t conv_kernel = 7;
    std::uint32_t feature_dim = 32;
    std::uint32_t temporal_kernel = 3;
    std::uint32_t hidden_dim = 32;
    std::uint32_t n_classes = 2;
    std::uint32_t proj_dim = 16;
    bool head_pu = true;
    bool head_noise = true;
    bool head_main = true;
    CellKind cell = CellKind::gated_simple;
    std::uint64_t init_seed = 7;

    bool has_head(Head h) const;
    void validate() const;
    void to_kv(KvConfig& kv, const std::string& prefix = "") const;
    static ModelConfig from_kv(const KvConfig& kv, const std::string& prefix = "");
    bool operator==(const ModelConfig&) const = default;
};

/// Storage aligned to the widest SIMD packet: vectorized reductions then split
/// work identically on every run, keeping results bit-for-bit reproducible.
using AlignedVec = std::vector<double, Eigen::aligned_allocator<double>>;

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    AlignedVec data;

    bool operator==(const Tensor&) const = default;
};

/// All trainable weights plus the frozen input standardization.
struct ModelParams {
    ModelConfig config;
    std::vector<Tensor> tensors;
    std::vector<double> input_mean;  // per profile point
    std::vector<double> input_sd;

    std::size_t index_of(const std::string& name) const;
    const Tensor& get(const std::string& name) const { return tensors[index_of(name)]; }
    Tensor& get(const std::string& name) { return tensors[index_of(name)]; }
    std::size_t parameter_count() const;
    bool all_finite() const;

    bool operator==(const ModelParams&) const = default;
};

/// Gradient buffers congruent with ModelParams::tensors.
using Gradients = std::vector<AlignedVec>;
Gradients zero_gradients(const ModelParams& params);

ModelParams init_params(const ModelConfig& cfg);

/// Per-point mean/sd over every visit of the given observations.
void fit_standardizer(ModelParams& params, std::span<const Observation> train);

/// Contiguous N x tau x P input block.
struct Batch {
    std::size_t n = 0;
    std::size_t tau = 0;
    std::size_t P = 0;
    std::vector<double> x;
};
Batch make_batch(std::span<const Observation> obs);
Batch make_batch(std::span<const Observation> obs, std::span<const std::size_t> indices);

struct ForwardOutput {
    Mat latent;                           // N x Z, final recurrent state
    std::vector<std::optional<Mat>> logits;  // indexed by Head
    std::vector<std::optional<Mat>> probs;
    Mat proj_phi;
    Mat proj_psi;
};

ForwardOutput forward(const ModelParams& params, const Batch& batch, std::span<const Head> heads,
                      bool projections = false);

/// Loss building blocks evaluated on one or more input views that share the encoder.
struct ClassTerm {
    std::size_t view = 0;
    Head head = Head::main;
    std::vector<int> labels;
    double smoothing = 0.0;
    double weight = 1.0;
};

/// NT-Xent between phi(latent of view_a) and psi(latent of view_b).
struct ContrastTerm {
    std::size_t view_a = 0;
    std::size_t view_b = 1;
    double temperature = 0.5;
    double weight = 1.0;
};

struct Objective {
    std::vector<ClassTerm> class_terms;
    std::optional<ContrastTerm> contrast;
    /// Terms with weight 0 are skipped unless this is set; results are identical.
    bool evaluate_zero_weight_terms = false;
};

struct ObjectiveValue {
    double total = 0.0;
    std::vector<double> class_values;  // NaN for skipped terms
    double contrast_value = 0.0;
};

/// Value of the objective and, when requested, exact reverse-mode gradients
/// for every parameter tensor and for every view's raw inputs.
ObjectiveValue evaluate_objective(const ModelParams& params, std::span<const Batch> views, const Objective& objective,
                                  Gradients* grads = nullptr, std::vector<std::vector<double>>* input_grads = nullptr);

/// Per-observation progression score: product of class-1 probabilities of
/// the listed heads.
std::vector<double> score_batch(const ModelParams& params, const Batch& batch, std::span<const Head> heads);

/// d score / d x for each observation in the batch (N x tau x P).
std::vector<double> score_input_gradient(const ModelParams& params, const Batch& batch, std::span<const Head> heads);

/// Closed-form parameter count of a configuration.
std::size_t expected_parameter_count(const ModelConfig& cfg);

}  // namespace weakprog
