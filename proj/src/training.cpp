#include "weakprog/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "weakprog/adversarial.hpp"
#include "weakprog/error.hpp"
#include "weakprog/rng.hpp"
#include "weakprog/textio.hpp"

namespace weakprog {

namespace {

// Stream identifiers for derived RNG seeds.
constexpr std::uint64_t kScheduleStream = 0x5c4ed;
constexpr std::uint64_t kNoiseStream = 0x4e015e;
constexpr std::uint64_t kValNoiseStream = 0x4e015f;
constexpr std::uint64_t kPrimaryOrder = 0;
constexpr std::uint64_t kNoiseOrder = 1;
constexpr std::uint64_t kTwinStream = 2;
constexpr std::uint64_t kAugmentStream = 3;
constexpr std::size_t kPredictChunk = 256;

std::string join_ratios(const std::array<double, 3>& r) {
    return format_double(r[0]) + "," + format_double(r[1]) + "," + format_double(r[2]);
}

std::array<double, 3> parse_ratios(const std::string& s, const std::string& field) {
    const auto parts = split(s, ',');
    if (parts.size() != 3) throw ConfigError("field '" + field + "' needs three comma-separated ratios");
    std::array<double, 3> r{};
    for (int i = 0; i < 3; ++i) {
        try {
            r[i] = parse_double(parts[i], field);
        } catch (const DataError& e) {
            throw ConfigError(e.what());
        }
    }
    return r;
}

struct ValMetrics {
    double loss = 0.0;
    double accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

void fill_decision_metrics(ValMetrics& m, const Mat& probs, std::span<const int> labels) {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pos = probs(static_cast<Eigen::Index>(i), 1) >= 0.5;
        if (labels[i] == 1) (pos ? tp : fn)++;
        else (pos ? fp : tn)++;
    }
    const auto n = static_cast<double>(labels.size());
    m.accuracy = n > 0 ? static_cast<double>(tp + tn) / n : 0.0;
    m.sensitivity = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.specificity = tn + fp > 0 ? static_cast<double>(tn) / static_cast<double>(tn + fp) : 0.0;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

std::size_t batches_of(std::size_t n, std::size_t bs) { return (n + bs - 1) / bs; }

std::span<const std::size_t> batch_slice(const std::vector<std::size_t>& order, std::size_t batch, std::size_t bs) {
    const std::size_t lo = batch * bs;
    const std::size_t hi = std::min(order.size(), lo + bs);
    return std::span<const std::size_t>(order.data() + lo, hi - lo);
}

std::vector<int> gather_labels(std::span<const int> labels, std::span<const std::size_t> idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(labels[i]);
    return out;
}

std::vector<int> external_labels(std::span<const Observation> obs, const char* what) {
    std::vector<int> y;
    y.reserve(obs.size());
    for (const auto& o : obs) {
        if (!o.external_label)
            throw DataError(std::string(what) + ": observation " + std::to_string(o.subject_id) + "/" +
                            std::to_string(o.eye_id) + "/" + std::to_string(o.window_index) +
                            " has no external label");
        y.push_back(*o.external_label);
    }
    return y;
}

std::vector<int> pu_labels(std::span<const Observation> obs) {
    std::vector<int> y;
    for (const auto& o : obs) y.push_back(o.pu_label);
    return y;
}

std::vector<int> noise_labels(std::span<const Observation> obs) {
    std::vector<int> y;
    for (const auto& o : obs) y.push_back(o.noise_label);
    return y;
}

/// Class-1 probabilities of `head` over a whole set, in chunks.
Mat head_probs(const ModelParams& params, std::span<const Observation> obs, Head head) {
    Mat out(static_cast<Eigen::Index>(obs.size()), 2);
    const Head heads[] = {head};
    for (std::size_t lo = 0; lo < obs.size(); lo += kPredictChunk) {
        const std::size_t hi = std::min(obs.size(), lo + kPredictChunk);
        const auto f = forward(params, make_batch(obs.subspan(lo, hi - lo)), heads);
        out.middleRows(static_cast<Eigen::Index>(lo), static_cast<Eigen::Index>(hi - lo)) =
            *f.probs[static_cast<int>(head)];
    }
    return out;
}

/// Mean cross-entropy of `head` over a set, evaluated in chunks.
double set_cross_entropy(const Mat& probs, std::span<const int> labels) {
    if (labels.empty()) return 0.0;
    return loss_cce(probs, onehot(labels, 2));
}

/// Everything a scheme contributes to the shared epoch loop.
struct SchemeHooks {
    std::function<std::size_t(std::uint64_t epoch_seed)> begin_epoch;  // returns number of steps
    std::function<double(const ModelParams&, std::uint64_t epoch_seed, std::size_t step, Gradients&)> step;
    std::function<ValMetrics(const ModelParams&)> validate;
};

std::string epoch_ckpt_name(std::uint32_t epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04u.ckpt", epoch);
    return buf;
}

void write_run_files(const TrainState& st, const std::filesystem::path& dir) {
    write_file(dir / "history.csv", history_to_csv(st.history));
    checkpoint_save(st, dir / "checkpoints" / "last.ckpt");
    write_file(dir / "selected.txt",
               st.history.selected_epoch >= 0 ? "checkpoints/" + epoch_ckpt_name(static_cast<std::uint32_t>(
                                                                     st.history.selected_epoch)) + "\n"
                                              : "checkpoints/last.ckpt\n");
}

TrainResult run_training(const TrainConfig& cfg, ModelParams initial, const TrainOptions& opts, SchemeHooks& hooks) {
    TrainState st;
    if (opts.resume) {
        st = *opts.resume;
        if (st.config.canonical() != cfg.canonical())
            throw ConfigError("resume: checkpoint configuration differs from the requested configuration");
    } else {
        st.config = cfg;
        st.params = std::move(initial);
        st.opt = init_opt_state(st.params);
        st.selected = st.params;
        Rng schedule(derive_seed(cfg.seed, kScheduleStream));
        st.rng_state = schedule.state();
    }
    if (opts.run_dir) {
        KvConfig echo;
        cfg.to_kv(echo);
        write_file(*opts.run_dir / "config.ini", echo.canonical());
    }
    Rng schedule;
    schedule.set_state(st.rng_state);

    const std::uint32_t stop = std::min(cfg.epochs, opts.stop_after.value_or(cfg.epochs));
    for (std::uint32_t epoch = st.next_epoch; epoch < stop; ++epoch) {
        const double lr = lr_schedule(cfg.schedule, epoch);
        const std::uint64_t epoch_seed = schedule.engine()();
        const std::size_t steps = hooks.begin_epoch(epoch_seed);
        double loss_sum = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            Gradients g = zero_gradients(st.params);
            const double v = hooks.step(st.params, epoch_seed, s, g);
            if (!std::isfinite(v))
                throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
            loss_sum += v;
            sgd_step(st.params, g, st.opt, lr, cfg.momentum, cfg.weight_decay);
        }
        if (!st.params.all_finite())
            throw NumericalError("training diverged: non-finite parameters at epoch " + std::to_string(epoch));
        const ValMetrics vm = hooks.validate(st.params);
        if (!std::isfinite(vm.loss))
            throw NumericalError("training diverged: non-finite validation loss at epoch " + std::to_string(epoch));

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
        rec.val_loss = vm.loss;
        rec.val_accuracy = vm.accuracy;
        rec.val_sensitivity = vm.sensitivity;
        rec.val_specificity = vm.specificity;
        rec.lr = lr;
        const bool first = std::none_of(st.history.epochs.begin(), st.history.epochs.end(),
                                        [](const EpochRecord& r) { return r.improved; });
        rec.improved = first || vm.loss < st.best_val_loss;
        if (rec.improved) {
            st.best_val_loss = vm.loss;
            const double sel = vm.sensitivity + vm.specificity;
            if (st.history.selected_epoch < 0 || sel > st.best_selection) {
                st.best_selection = sel;
                st.selected = st.params;
                st.history.selected_epoch = static_cast<int>(epoch);
            }
        }
        st.history.epochs.push_back(rec);
        st.next_epoch = epoch + 1;
        st.rng_state = schedule.state();
        if (opts.run_dir) {
            if (rec.improved) checkpoint_save(st, *opts.run_dir / "checkpoints" / epoch_ckpt_name(epoch));
            write_run_files(st, *opts.run_dir);
        }
        if (opts.on_epoch) opts.on_epoch(rec);
    }
    if (opts.run_dir && st.next_epoch == 0) write_run_files(st, *opts.run_dir);

    TrainResult r;
    r.selected = st.history.selected_epoch >= 0 ? st.selected : st.params;
    r.history = st.history;
    r.state = std::move(st);
    return r;
}

ModelParams initial_params(const TrainConfig& cfg, std::span<const Observation> train) {
    ModelParams p = init_params(cfg.effective_model());
    fit_standardizer(p, train);
    return p;
}

void require_nonempty(std::span<const Observation> train, std::span<const Observation> val, const char* who) {
    if (train.empty()) throw DataError(std::string(who) + ": empty training partition");
    if (val.empty()) throw DataError(std::string(who) + ": empty validation partition");
}

/// Shared single-stream step/validation used by the plain scheme and by the
/// original-sequence branch of RegCon.
struct SingleStream {
    std::span<const Observation> train;
    std::vector<int> labels;
    std::vector<std::size_t> order;
    std::size_t batch_size = 1;

    std::size_t begin(std::uint64_t epoch_seed) {
        order = iota_indices(train.size());
        Rng r(derive_seed(epoch_seed, kPrimaryOrder));
        r.shuffle(order);
        return batches_of(order.size(), batch_size);
    }
};

}  // namespace

// ---------------------------------------------------------------- config

std::string to_string(Scheme s) {
    switch (s) {
    case Scheme::noisepu: return "noisepu";
    case Scheme::regcon: return "regcon";
    case Scheme::plain: return "plain";
    }
    return "?";
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "noisepu") return Scheme::noisepu;
    if (s == "regcon") return Scheme::regcon;
    if (s == "plain") return Scheme::plain;
    throw ConfigError("unknown training scheme '" + s + "'");
}

std::string to_string(LabelSource s) { return s == LabelSource::external ? "external" : "pu"; }

LabelSource label_source_from_string(const std::string& s) {
    if (s == "external") return LabelSource::external;
    if (s == "pu") return LabelSource::pu;
    throw ConfigError("unknown label source '" + s + "'");
}

TrainConfig TrainConfig::defaults_for(Scheme s) {
    TrainConfig c;
    c.scheme = s;
    if (s == Scheme::noisepu) {
        c.epochs = 30;
        c.batch_size = 16;
        c.momentum = 0.9;
        c.weight_decay = 0.0;
        c.schedule = ScheduleConfig{};
        c.schedule.kind = ScheduleKind::step;
        c.schedule.base_lr = 8.9e-4;
        c.schedule.step_size = 5;
        c.schedule.gamma = 0.5;
        c.split_ratios = {0.7, 0.15, 0.15};
    } else {
        c.epochs = 120;
        c.batch_size = 48;
        c.momentum = 0.9;
        c.weight_decay = 0.1;
        c.schedule = ScheduleConfig{};
        c.schedule.kind = ScheduleKind::cosine_warm_restarts;
        c.schedule.base_lr = 0.002;
        c.schedule.t0 = 10;
        c.schedule.t_mult = 2;
        c.schedule.lr_min = 1e-5;
        c.split_ratios = {0.7, 0.1, 0.2};
    }
    return c;
}

void TrainConfig::validate() const {
    auto req = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("train config: " + what);
    };
    req(alpha >= 0.0 && std::isfinite(alpha), "alpha must be >= 0");
    req(beta >= 0.0 && std::isfinite(beta), "beta must be >= 0");
    req(pu_weight >= 0.0 && std::isfinite(pu_weight), "pu_weight must be >= 0");
    req(smoothing >= 0.0 && smoothing < 1.0, "smoothing must lie in [0,1)");
    req(shuffle_p >= 0.0 && shuffle_p <= 1.0, "shuffle_p must lie in [0,1]");
    req(temperature > 0.0, "temperature must be > 0");
    req(scramble_k >= 1, "scramble_k must be >= 1");
    req(batch_size >= 1, "batch_size must be >= 1");
    req(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0,1)");
    req(weight_decay >= 0.0, "weight_decay must be >= 0");
    req(adversarial_eps >= 0.0, "adversarial_eps must be >= 0");
    req(augment.jitter_sd >= 0 && augment.scale >= 0 && augment.scale < 1 && augment.dropout_frac >= 0 &&
            augment.dropout_prob >= 0 && augment.dropout_prob <= 1,
        "augmentation magnitudes must be >= 0 (scale < 1, dropout_prob <= 1)");
    const double sum = split_ratios[0] + split_ratios[1] + split_ratios[2];
    req(split_ratios[0] > 0 && split_ratios[1] > 0 && split_ratios[2] > 0 && std::abs(sum - 1.0) <= 1e-9,
        "split ratios must be positive and sum to 1");
    if (scheme == Scheme::noisepu) req(pu_weight > 0.0 || alpha > 0.0, "pu_weight and alpha cannot both be 0");
    schedule.validate();
    effective_model().validate();
}

ModelConfig TrainConfig::effective_model() const {
    ModelConfig m = model;
    m.head_pu = scheme == Scheme::noisepu || (scheme == Scheme::plain && plain_labels == LabelSource::pu);
    m.head_noise = scheme == Scheme::noisepu;
    m.head_main = scheme == Scheme::regcon || (scheme == Scheme::plain && plain_labels == LabelSource::external);
    return m;
}

std::vector<Head> TrainConfig::score_heads() const {
    switch (scheme) {
    case Scheme::noisepu:
        if (pu_weight > 0.0 && alpha > 0.0) return {Head::pu, Head::noise};
        if (alpha > 0.0) return {Head::noise};
        return {Head::pu};
    case Scheme::regcon: return {Head::main};
    case Scheme::plain: return {plain_labels == LabelSource::pu ? Head::pu : Head::main};
    }
    return {};
}

void TrainConfig::to_kv(KvConfig& kv) const {
    kv.set("train.scheme", to_string(scheme));
    kv.set("train.alpha", format_double(alpha));
    kv.set("train.beta", format_double(beta));
    kv.set("train.pu_weight", format_double(pu_weight));
    kv.set("train.smoothing", format_double(smoothing));
    kv.set("train.shuffle_p", format_double(shuffle_p));
    kv.set("train.temperature", format_double(temperature));
    kv.set("train.scramble_k", std::to_string(scramble_k));
    kv.set("train.rescramble_each_epoch", rescramble_each_epoch ? "true" : "false");
    kv.set("train.plain_labels", to_string(plain_labels));
    kv.set("train.epochs", std::to_string(epochs));
    kv.set("train.batch_size", std::to_string(batch_size));
    kv.set("train.momentum", format_double(momentum));
    kv.set("train.weight_decay", format_double(weight_decay));
    kv.set("train.split", join_ratios(split_ratios));
    kv.set("train.seed", std::to_string(seed));
    kv.set("train.adversarial_eps", format_double(adversarial_eps));
    kv.set("train.use_augment", use_augment ? "true" : "false");
    kv.set("train.augment_primary", augment_primary ? "true" : "false");
    kv.set("schedule.kind", to_string(schedule.kind));
    kv.set("schedule.base_lr", format_double(schedule.base_lr));
    kv.set("schedule.step_size", std::to_string(schedule.step_size));
    kv.set("schedule.gamma", format_double(schedule.gamma));
    kv.set("schedule.t0", std::to_string(schedule.t0));
    kv.set("schedule.t_mult", std::to_string(schedule.t_mult));
    kv.set("schedule.lr_min", format_double(schedule.lr_min));
    kv.set("augment.jitter_sd", format_double(augment.jitter_sd));
    kv.set("augment.scale", format_double(augment.scale));
    kv.set("augment.max_shift", std::to_string(augment.max_shift));
    kv.set("augment.dropout_frac", format_double(augment.dropout_frac));
    kv.set("augment.dropout_prob", format_double(augment.dropout_prob));
    model.to_kv(kv, "model.");
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv) {
    TrainConfig c = defaults_for(scheme_from_string(kv.get_string("train.scheme", "noisepu")));
    auto u32 = [&](const std::string& k, std::uint32_t fb) {
        const auto v = kv.get_int(k, fb);
        if (v < 0 || v > std::numeric_limits<std::uint32_t>::max())
            throw ConfigError(kv.origin() + ": field '" + k + "' out of range");
        return static_cast<std::uint32_t>(v);
    };
    c.alpha = kv.get_double("train.alpha", c.alpha);
    c.beta = kv.get_double("train.beta", c.beta);
    c.pu_weight = kv.get_double("train.pu_weight", c.pu_weight);
    c.smoothing = kv.get_double("train.smoothing", c.smoothing);
    c.shuffle_p = kv.get_double("train.shuffle_p", c.shuffle_p);
    c.temperature = kv.get_double("train.temperature", c.temperature);
    c.scramble_k = u32("train.scramble_k", c.scramble_k);
    c.rescramble_each_epoch = kv.get_bool("train.rescramble_each_epoch", c.rescramble_each_epoch);
    c.plain_labels = label_source_from_string(kv.get_string("train.plain_labels", to_string(c.plain_labels)));
    c.epochs = u32("train.epochs", c.epochs);
    c.batch_size = u32("train.batch_size", c.batch_size);
    c.momentum = kv.get_double("train.momentum", c.momentum);
    c.weight_decay = kv.get_double("train.weight_decay", c.weight_decay);
    if (kv.has("train.split")) c.split_ratios = parse_ratios(kv.get_string("train.split", ""), "train.split");
    c.seed = kv.get_u64("train.seed", c.seed);
    c.adversarial_eps = kv.get_double("train.adversarial_eps", c.adversarial_eps);
    c.use_augment = kv.get_bool("train.use_augment", c.use_augment);
    c.augment_primary = kv.get_bool("train.augment_primary", c.augment_primary);
    c.schedule.kind = schedule_from_string(kv.get_string("schedule.kind", to_string(c.schedule.kind)));
    c.schedule.base_lr = kv.get_double("schedule.base_lr", c.schedule.base_lr);
    c.schedule.step_size = u32("schedule.step_size", c.schedule.step_size);
    c.schedule.gamma = kv.get_double("schedule.gamma", c.schedule.gamma);
    c.schedule.t0 = u32("schedule.t0", c.schedule.t0);
    c.schedule.t_mult = u32("schedule.t_mult", c.schedule.t_mult);
    c.schedule.lr_min = kv.get_double("schedule.lr_min", c.schedule.lr_min);
    c.augment.jitter_sd = kv.get_double("augment.jitter_sd", c.augment.jitter_sd);
    c.augment.scale = kv.get_double("augment.scale", c.augment.scale);
    c.augment.max_shift = u32("augment.max_shift", c.augment.max_shift);
    c.augment.dropout_frac = kv.get_double("augment.dropout_frac", c.augment.dropout_frac);
    c.augment.dropout_prob = kv.get_double("augment.dropout_prob", c.augment.dropout_prob);
    c.model = ModelConfig::from_kv(kv, "model.");
    c.validate();
    return c;
}

std::string TrainConfig::canonical() const {
    KvConfig kv;
    to_kv(kv);
    return kv.canonical();
}

std::string history_to_csv(const TrainHistory& h) {
    std::string out = "epoch,train_loss,val_loss,val_accuracy,val_sensitivity,val_specificity,lr,improved,selected\n";
    for (const auto& r : h.epochs) {
        out += std::to_string(r.epoch) + "," + format_double(r.train_loss) + "," + format_double(r.val_loss) + "," +
               format_double(r.val_accuracy) + "," + format_double(r.val_sensitivity) + "," +
               format_double(r.val_specificity) + "," + format_double(r.lr) + "," + (r.improved ? "1" : "0") + "," +
               (static_cast<int>(r.epoch) == h.selected_epoch ? "1" : "0") + "\n";
    }
    return out;
}

// ---------------------------------------------------------------- schemes

/// Batch of the selected observations, augmented when cfg.augment_primary is set.
/// The stream id keeps paired runs (e.g. PU-only vs plain PU) on identical draws.
Batch primary_batch(std::span<const Observation> source, std::span<const std::size_t> idx, const TrainConfig& cfg,
                    std::uint64_t epoch_seed, std::uint64_t stream, std::size_t step) {
    if (!cfg.augment_primary) return make_batch(source, idx);
    Rng r(derive_seed(epoch_seed, kAugmentStream, stream, step));
    std::vector<Observation> obs;
    obs.reserve(idx.size());
    for (auto i : idx) obs.push_back(augment(source[i], cfg.augment, r));
    return make_batch(obs);
}

TrainResult train_noisepu(std::span<const Observation> pu_train, std::span<const Observation> pu_val,
                          const TrainConfig& cfg, const TrainOptions& opts) {
    if (cfg.scheme != Scheme::noisepu) throw ConfigError("train_noisepu: configuration scheme is not noisepu");
    cfg.validate();
    require_nonempty(pu_train, pu_val, "train_noisepu");
    const bool use_pu = cfg.pu_weight > 0.0;
    const bool use_noise = cfg.alpha > 0.0;
    const std::size_t bs = cfg.batch_size;

    const std::vector<int> y_pu = pu_labels(pu_train);
    auto unlabeled = [](std::span<const Observation> s) {
        std::vector<Observation> out;
        for (const auto& o : s)
            if (o.pu_label == 1) out.push_back(o);
        return out;
    };
    const std::vector<Observation> originals = unlabeled(pu_train);
    if (use_noise && originals.empty()) throw DataError("train_noisepu: no unlabeled training windows to scramble");
    std::vector<Observation> noise;
    if (use_noise) {
        Rng r(derive_seed(cfg.seed, kNoiseStream));
        noise = make_noise_dataset(originals, cfg.scramble_k, r);
    }
    std::vector<int> y_noise = noise_labels(noise);

    // Validation: PU labels plus a fixed scrambled set built from the validation windows.
    const std::vector<int> yv_pu = pu_labels(pu_val);
    const std::vector<Observation> val_originals = unlabeled(pu_val);
    std::vector<Observation> val_noise;
    if (!val_originals.empty()) {
        Rng r(derive_seed(cfg.seed, kValNoiseStream));
        val_noise = make_noise_dataset(val_originals, cfg.scramble_k, r);
    }
    const std::vector<int> yv_noise = noise_labels(val_noise);
    if (!use_pu && val_noise.empty()) throw DataError("train_noisepu: no unlabeled validation windows");

    std::vector<std::size_t> order_pu, order_noise;
    SchemeHooks hooks;
    hooks.begin_epoch = [&](std::uint64_t epoch_seed) {
        std::size_t steps = 0;
        if (use_pu) {
            order_pu = iota_indices(pu_train.size());
            Rng r(derive_seed(epoch_seed, kPrimaryOrder));
            r.shuffle(order_pu);
            steps = std::max(steps, batches_of(order_pu.size(), bs));
        }
        if (use_noise) {
            if (cfg.rescramble_each_epoch) {
                Rng r(derive_seed(epoch_seed, kNoiseStream));
                noise = make_noise_dataset(originals, cfg.scramble_k, r);
                y_noise = noise_labels(noise);
            }
            order_noise = iota_indices(noise.size());
            Rng r(derive_seed(epoch_seed, kNoiseOrder));
            r.shuffle(order_noise);
            steps = std::max(steps, batches_of(order_noise.size(), bs));
        }
        return steps;
    };
    hooks.step = [&](const ModelParams& params, std::uint64_t epoch_seed, std::size_t step, Gradients& g) {
        std::vector<Batch> views;
        Objective obj;
        if (use_pu) {
            const auto idx = batch_slice(order_pu, step % batches_of(order_pu.size(), bs), bs);
            views.push_back(primary_batch(pu_train, idx, cfg, epoch_seed, kPrimaryOrder, step));
            obj.class_terms.push_back({views.size() - 1, Head::pu, gather_labels(y_pu, idx), 0.0, cfg.pu_weight});
        }
        if (use_noise) {
            const auto idx = batch_slice(order_noise, step % batches_of(order_noise.size(), bs), bs);
            views.push_back(primary_batch(noise, idx, cfg, epoch_seed, kNoiseOrder, step));
            obj.class_terms.push_back({views.size() - 1, Head::noise, gather_labels(y_noise, idx), 0.0, cfg.alpha});
        }
        return evaluate_objective(params, views, obj, &g).total;
    };
    hooks.validate = [&](const ModelParams& params) {
        ValMetrics m;
        if (use_pu) {
            const Mat p = head_probs(params, pu_val, Head::pu);
            m.loss += cfg.pu_weight * set_cross_entropy(p, yv_pu);
            fill_decision_metrics(m, p, yv_pu);
        }
        if (use_noise && !val_noise.empty()) {
            const Mat p = head_probs(params, val_noise, Head::noise);
            m.loss += cfg.alpha * set_cross_entropy(p, yv_noise);
            if (!use_pu) fill_decision_metrics(m, p, yv_noise);
        }
        return m;
    };
    return run_training(cfg, opts.resume ? ModelParams{} : initial_params(cfg, pu_train), opts, hooks);
}

TrainResult train_regcon(std::span<const Observation> labeled_train, std::span<const Observation> labeled_val,
                         const TrainConfig& cfg, const TrainOptions& opts) {
    if (cfg.scheme != Scheme::regcon) throw ConfigError("train_regcon: configuration scheme is not regcon");
    cfg.validate();
    require_nonempty(labeled_train, labeled_val, "train_regcon");
    const bool twin = cfg.alpha > 0.0 || cfg.beta > 0.0;

    SingleStream main{labeled_train, external_labels(labeled_train, "train_regcon"), {}, cfg.batch_size};
    const std::vector<int> yv = external_labels(labeled_val, "train_regcon");

    SchemeHooks hooks;
    hooks.begin_epoch = [&](std::uint64_t epoch_seed) { return main.begin(epoch_seed); };
    hooks.step = [&](const ModelParams& params, std::uint64_t epoch_seed, std::size_t step, Gradients& g) {
        const auto idx = batch_slice(main.order, step, main.batch_size);
        std::vector<Batch> views{primary_batch(labeled_train, idx, cfg, epoch_seed, kPrimaryOrder, step)};
        Objective obj;
        obj.class_terms.push_back({0, Head::main, gather_labels(main.labels, idx), 0.0, 1.0});
        if (twin) {
            std::vector<Observation> originals;
            originals.reserve(idx.size());
            for (auto i : idx) originals.push_back(labeled_train[i]);
            Rng r(derive_seed(epoch_seed, kTwinStream, step));
            std::vector<Observation> shuffled = selective_shuffle(originals, cfg.shuffle_p, r);
            if (cfg.use_augment)
                for (auto& o : shuffled) o = augment(o, cfg.augment, r);
            std::vector<int> y_twin;
            for (const auto& o : shuffled) y_twin.push_back(*o.external_label);
            if (cfg.adversarial_eps > 0.0)
                shuffled = adversarial_perturb(params, shuffled, y_twin, cfg.adversarial_eps, Head::main);
            views.push_back(make_batch(shuffled));
            obj.class_terms.push_back({1, Head::main, y_twin, cfg.smoothing, cfg.alpha});
            obj.contrast = ContrastTerm{0, 1, cfg.temperature, cfg.beta};
        }
        return evaluate_objective(params, views, obj, &g).total;
    };
    hooks.validate = [&](const ModelParams& params) {
        ValMetrics m;
        const Mat p = head_probs(params, labeled_val, Head::main);
        m.loss = set_cross_entropy(p, yv);
        fill_decision_metrics(m, p, yv);
        return m;
    };
    return run_training(cfg, opts.resume ? ModelParams{} : initial_params(cfg, labeled_train), opts, hooks);
}

TrainResult train_plain(std::span<const Observation> train, std::span<const Observation> val, const TrainConfig& cfg,
                        const TrainOptions& opts) {
    if (cfg.scheme != Scheme::plain) throw ConfigError("train_plain: configuration scheme is not plain");
    cfg.validate();
    require_nonempty(train, val, "train_plain");
    const bool pu = cfg.plain_labels == LabelSource::pu;
    const Head head = pu ? Head::pu : Head::main;
    SingleStream main{train, pu ? pu_labels(train) : external_labels(train, "train_plain"), {}, cfg.batch_size};
    const std::vector<int> yv = pu ? pu_labels(val) : external_labels(val, "train_plain");

    SchemeHooks hooks;
    hooks.begin_epoch = [&](std::uint64_t epoch_seed) { return main.begin(epoch_seed); };
    hooks.step = [&](const ModelParams& params, std::uint64_t epoch_seed, std::size_t step, Gradients& g) {
        const auto idx = batch_slice(main.order, step, main.batch_size);
        const Batch b = primary_batch(train, idx, cfg, epoch_seed, kPrimaryOrder, step);
        Objective obj;
        obj.class_terms.push_back({0, head, gather_labels(main.labels, idx), 0.0, 1.0});
        return evaluate_objective(params, std::span<const Batch>(&b, 1), obj, &g).total;
    };
    hooks.validate = [&](const ModelParams& params) {
        ValMetrics m;
        const Mat p = head_probs(params, val, head);
        m.loss = set_cross_entropy(p, yv);
        fill_decision_metrics(m, p, yv);
        return m;
    };
    return run_training(cfg, opts.resume ? ModelParams{} : initial_params(cfg, train), opts, hooks);
}

TrainResult train(std::span<const Observation> tr, std::span<const Observation> val, const TrainConfig& cfg,
                  const TrainOptions& opts) {
    switch (cfg.scheme) {
    case Scheme::noisepu: return train_noisepu(tr, val, cfg, opts);
    case Scheme::regcon: return train_regcon(tr, val, cfg, opts);
    case Scheme::plain: return train_plain(tr, val, cfg, opts);
    }
    throw ConfigError("train: invalid scheme");
}

// ---------------------------------------------------------------- inference

std::vector<double> predict(const ModelParams& params, std::span<const Observation> obs, Head head) {
    const Head heads[] = {head};
    return predict_score(params, obs, heads);
}

std::vector<double> predict_score(const ModelParams& params, std::span<const Observation> obs,
                                  std::span<const Head> heads) {
    std::vector<double> out;
    out.reserve(obs.size());
    for (std::size_t lo = 0; lo < obs.size(); lo += kPredictChunk) {
        const std::size_t hi = std::min(obs.size(), lo + kPredictChunk);
        const auto s = score_batch(params, make_batch(obs.subspan(lo, hi - lo)), heads);
        out.insert(out.end(), s.begin(), s.end());
    }
    return out;
}

std::vector<double> saliency(const ModelParams& params, const Observation& obs, std::span<const Head> heads) {
    std::vector<double> g = score_input_gradient(params, make_batch(std::span<const Observation>(&obs, 1)), heads);
    double mx = 0.0;
    for (double& v : g) {
        v = std::abs(v);
        mx = std::max(mx, v);
    }
    if (mx > 0.0)
        for (double& v : g) v /= mx;
    return g;
}

}  // namespace weakprog
