#include "weakprog/optim.hpp"

#include <cmath>
#include <numbers>

#include "weakprog/error.hpp"

namespace weakprog {

OptState init_opt_state(const ModelParams& params) {
    OptState s;
    for (const auto& t : params.tensors) s.velocity.emplace_back(t.data.size(), 0.0);
    return s;
}

void sgd_step(ModelParams& params, const Gradients& grads, OptState& opt, double lr, double momentum,
              double weight_decay) {
    if (!(lr > 0.0)) throw ConfigError("sgd_step: learning rate must be positive");
    if (grads.size() != params.tensors.size() || opt.velocity.size() != params.tensors.size())
        throw DataError("sgd_step: gradient/state layout does not match parameters");
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        auto& w = params.tensors[i].data;
        auto& v = opt.velocity[i];
        const auto& g = grads[i];
        if (g.size() != w.size() || v.size() != w.size()) throw DataError("sgd_step: tensor size mismatch");
        for (std::size_t k = 0; k < w.size(); ++k) {
            v[k] = momentum * v[k] + (g[k] + weight_decay * w[k]);
            w[k] -= lr * v[k];
        }
    }
    ++opt.step;
    opt.lr = lr;
}

std::string to_string(ScheduleKind k) {
    switch (k) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::step: return "step";
    case ScheduleKind::cosine_warm_restarts: return "cosine_warm_restarts";
    }
    return "?";
}

ScheduleKind schedule_from_string(const std::string& s) {
    if (s == "constant") return ScheduleKind::constant;
    if (s == "step") return ScheduleKind::step;
    if (s == "cosine_warm_restarts") return ScheduleKind::cosine_warm_restarts;
    throw ConfigError("unknown scheduler kind '" + s + "'");
}

void ScheduleConfig::validate() const {
    if (!(base_lr > 0.0)) throw ConfigError("scheduler: base_lr must be positive");
    if (kind == ScheduleKind::step && (step_size == 0 || !(gamma > 0.0)))
        throw ConfigError("scheduler: step_size must be >= 1 and gamma > 0");
    if (kind == ScheduleKind::cosine_warm_restarts && (t0 == 0 || t_mult == 0 || lr_min < 0.0 || lr_min > base_lr))
        throw ConfigError("scheduler: need t0 >= 1, t_mult >= 1, 0 <= lr_min <= base_lr");
}

double cosine_annealing(double base_lr, double lr_min, double t_cur, double period) {
    return lr_min + (base_lr - lr_min) * (1.0 + std::cos(std::numbers::pi * t_cur / period)) / 2.0;
}

double lr_schedule(const ScheduleConfig& cfg, std::uint32_t epoch) {
    switch (cfg.kind) {
    case ScheduleKind::constant: return cfg.base_lr;
    case ScheduleKind::step: return cfg.base_lr * std::pow(cfg.gamma, static_cast<double>(epoch / cfg.step_size));
    case ScheduleKind::cosine_warm_restarts: {
        std::uint64_t t = epoch, period = cfg.t0;
        while (t >= period) {
            t -= period;
            period *= cfg.t_mult;
        }
        return cosine_annealing(cfg.base_lr, cfg.lr_min, static_cast<double>(t), static_cast<double>(period));
    }
    }
    throw ConfigError("lr_schedule: invalid scheduler kind");
}

}  // namespace weakprog
