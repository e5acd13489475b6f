#pragma once

#include <span>
#include <vector>

#include "weakprog/model.hpp"

namespace weakprog {

/// One signed-gradient step X := X + eps * sign(dL/dX), where L is the
/// cross-entropy of `head` at each observation's label. Labels are untouched.
std::vector<Observation> adversarial_perturb(const ModelParams& params, std::span<const Observation> obs,
                                             std::span<const int> labels, double eps, Head head = Head::main);

/// Single-observation form using the observation's external label.
Observation adversarial_perturb(const ModelParams& params, const Observation& obs, double eps,
                                Head head = Head::main);

}  // namespace weakprog
