#include "weakprog/adversarial.hpp"

#include <cmath>

#include "weakprog/error.hpp"

namespace weakprog {

std::vector<Observation> adversarial_perturb(const ModelParams& params, std::span<const Observation> obs,
                                             std::span<const int> labels, double eps, Head head) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw ConfigError("adversarial_perturb: eps must be finite and >= 0");
    if (labels.size() != obs.size()) throw DataError("adversarial_perturb: label count mismatch");
    std::vector<Observation> out(obs.begin(), obs.end());
    if (eps == 0.0 || obs.empty()) return out;

    const Batch batch = make_batch(obs);
    Objective objective;
    objective.class_terms.push_back({0, head, std::vector<int>(labels.begin(), labels.end()), 0.0, 1.0});
    std::vector<std::vector<double>> input_grads;
    evaluate_objective(params, std::span<const Batch>(&batch, 1), objective, nullptr, &input_grads);
    const auto& g = input_grads.front();
    std::size_t k = 0;
    for (auto& o : out)
        for (double& v : o.x) {
            const double d = g[k++];
            if (!std::isfinite(d)) throw NumericalError("adversarial_perturb: non-finite input gradient");
            if (d > 0.0) v += eps;
            else if (d < 0.0) v -= eps;
        }
    return out;
}

Observation adversarial_perturb(const ModelParams& params, const Observation& obs, double eps, Head head) {
    if (!obs.external_label) throw DataError("adversarial_perturb: observation has no label");
    const int y = *obs.external_label;
    return adversarial_perturb(params, std::span<const Observation>(&obs, 1), std::span<const int>(&y, 1), eps, head)
        .front();
}

}  // namespace weakprog
