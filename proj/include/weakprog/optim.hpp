#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weakprog/model.hpp"

namespace weakprog {

/// Momentum buffers congruent with ModelParams::tensors.
struct OptState {
    std::vector<std::vector<double>> velocity;
    std::uint64_t step = 0;
    double lr = 0.0;

    bool operator==(const OptState&) const = default;
};

OptState init_opt_state(const ModelParams& params);

/// v := momentum * v + (g + weight_decay * w);  w := w - lr * v.
void sgd_step(ModelParams& params, const Gradients& grads, OptState& opt, double lr, double momentum,
              double weight_decay);

enum class ScheduleKind { constant, step, cosine_warm_restarts };
std::string to_string(ScheduleKind k);
ScheduleKind schedule_from_string(const std::string& s);

struct ScheduleConfig {
    ScheduleKind kind = ScheduleKind::step;
    double base_lr = 8.9e-4;
    std::uint32_t step_size = 5;
    double gamma = 0.5;
    std::uint32_t t0 = 10;
    std::uint32_t t_mult = 2;
    double lr_min = 1e-5;

    void validate() const;
    bool operator==(const ScheduleConfig&) const = default;
};

/// Learning rate for a (0-based) epoch.
double lr_schedule(const ScheduleConfig& cfg, std::uint32_t epoch);

/// lr_min + (base - lr_min) * (1 + cos(pi * t_cur / period)) / 2.
double cosine_annealing(double base_lr, double lr_min, double t_cur, double period);

}  // namespace weakprog
