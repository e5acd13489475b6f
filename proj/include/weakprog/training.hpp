#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "weakprog/model.hpp"
#include "weakprog/optim.hpp"
#include "weakprog/sequences.hpp"

namespace weakprog {

enum class Scheme { noisepu, regcon, plain };
std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// Which labels the single-stream plain scheme fits.
enum class LabelSource { external, pu };
std::string to_string(LabelSource s);
LabelSource label_source_from_string(const std::string& s);

struct TrainConfig {
    Scheme scheme = Scheme::noisepu;
    double alpha = 1.0;          // noise weight (noisepu) / smoothed-CCE weight (regcon)
    double beta = 1.0;           // contrastive weight (regcon)
    double pu_weight = 1.0;      // PU-branch weight (noisepu); 0 gives the noise-only ablation
    double smoothing = 0.1;      // mu
    double shuffle_p = 0.5;      // selective-shuffle probability
    double temperature = 0.5;    // NT-Xent temperature
    std::uint32_t scramble_k = 2;
    bool rescramble_each_epoch = false;
    LabelSource plain_labels = LabelSource::external;
    std::uint32_t epochs = 30;
    std::uint32_t batch_size = 16;
    double momentum = 0.9;
    double weight_decay = 0.0;
    ScheduleConfig schedule;
    std::array<double, 3> split_ratios{0.7, 0.15, 0.15};
    std::uint64_t seed = 1;
    AugmentConfig augment;
    bool use_augment = true;      // augment the RegCon twin stream
    bool augment_primary = false;  // augment the label-bearing training batches (noisepu/plain)
    double adversarial_eps = 0.5;  // um
    ModelConfig model;

    /// Published defaults for a scheme (optimizer, schedule, epochs, batch, split).
    static TrainConfig defaults_for(Scheme s);

    void validate() const;
    /// Model configuration with the heads this scheme trains.
    ModelConfig effective_model() const;
    /// Heads whose class-1 probabilities are multiplied into the progression score.
    std::vector<Head> score_heads() const;

    void to_kv(KvConfig& kv) const;
    /// Unspecified keys fall back to defaults_for(scheme).
    static TrainConfig from_kv(const KvConfig& kv);
    std::string canonical() const;
};

struct EpochRecord {
    std::uint32_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double val_sensitivity = 0.0;
    double val_specificity = 0.0;
    double lr = 0.0;
    bool improved = false;  // validation loss improved the running minimum

    bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    int selected_epoch = -1;  // -1 when no epoch was run

    bool operator==(const TrainHistory&) const = default;
};

std::string history_to_csv(const TrainHistory& h);

/// Complete resumable training state.
struct TrainState {
    TrainConfig config;
    ModelParams params;
    OptState opt;
    TrainHistory history;
    std::uint32_t next_epoch = 0;
    double best_val_loss = 0.0;   // meaningful once an epoch improved
    double best_selection = -1.0; // sensitivity + specificity of `selected`
    ModelParams selected;
    std::string rng_state;        // schedule RNG, drawn once per epoch
};

struct TrainResult {
    ModelParams selected;
    TrainHistory history;
    TrainState state;
};

struct TrainOptions {
    /// When set: config echo, per-improving-epoch checkpoints, last/selected
    /// checkpoints and history.csv are written below this directory.
    std::optional<std::filesystem::path> run_dir;
    /// Stop (with a resumable state) once this many epochs are complete.
    std::optional<std::uint32_t> stop_after;
    /// Continue from a previously saved state instead of initializing.
    const TrainState* resume = nullptr;
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Noise-PU: PU head on healthy-vs-unlabeled labels plus noise head on
/// original-vs-scrambled copies of the unlabeled training windows.
TrainResult train_noisepu(std::span<const Observation> pu_train, std::span<const Observation> pu_val,
                          const TrainConfig& cfg, const TrainOptions& opts = {});

/// RegCon: CCE on originals, smoothed CCE on the selectively shuffled,
/// augmented and adversarially perturbed twin, NT-Xent between the two.
TrainResult train_regcon(std::span<const Observation> labeled_train, std::span<const Observation> labeled_val,
                         const TrainConfig& cfg, const TrainOptions& opts = {});

/// Single-stream cross-entropy on cfg.plain_labels.
TrainResult train_plain(std::span<const Observation> train, std::span<const Observation> val,
                        const TrainConfig& cfg, const TrainOptions& opts = {});

TrainResult train(std::span<const Observation> train, std::span<const Observation> val, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

/// Class-1 probability of one head.
std::vector<double> predict(const ModelParams& params, std::span<const Observation> obs, Head head);
/// Product of class-1 probabilities over `heads`.
std::vector<double> predict_score(const ModelParams& params, std::span<const Observation> obs,
                                  std::span<const Head> heads);

/// |d score / dX| normalized to a maximum of 1 (all zeros if the gradient vanishes); tau x P.
std::vector<double> saliency(const ModelParams& params, const Observation& obs, std::span<const Head> heads);

/// Text container "ckpt/1" with exact (hexadecimal) floating-point values
/// and a trailing checksum.
std::string checkpoint_to_string(const TrainState& state);
TrainState checkpoint_from_string(const std::string& text, const std::string& origin = "<string>");
void checkpoint_save(const TrainState& state, const std::filesystem::path& path);
TrainState checkpoint_load(const std::filesystem::path& path);

/// Parameters-only view of a checkpoint: the selected parameters when an
/// epoch was selected, otherwise the current ones.
ModelParams checkpoint_model(const TrainState& state);

}  // namespace weakprog
