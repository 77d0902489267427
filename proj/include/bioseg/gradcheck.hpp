#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bioseg/tensor.hpp"

namespace bioseg {

// Central-difference gradient verification, run entirely at 64-bit.
// The scalar probe is loss(x) = sum(forward(x) .* G) for a fixed random G;
// the analytic side must return d loss / d input_i for each input.

using ForwardFn = std::function<Tensor64(const std::vector<Tensor64>&)>;
using BackwardFn =
    std::function<std::vector<Tensor64>(const std::vector<Tensor64>&, const Tensor64&)>;

// Returns max over all coordinates of |a - n| / max(|a|, |n|, 1e-8).
double finite_diff_check(const ForwardFn& forward, const BackwardFn& backward,
                         const std::vector<Tensor64>& inputs, const Tensor64& upstream,
                         double eps);

struct GradCheckCase {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool expect_failure = false;  // negative control expects err above tolerance
    bool passed = false;
};

// Op-level checks over `seeds` random seeds plus a corrupted-gradient
// negative control.
std::vector<GradCheckCase> run_op_gradchecks(uint64_t seed, int seeds = 5);

// Whole-network check: combined loss through a small model, analytic
// parameter gradients vs central differences on sampled parameters.
GradCheckCase run_model_gradcheck(uint64_t seed, int n_params = 10);

// Loss-layer check (combined Dice + cross entropy w.r.t. predictions).
GradCheckCase run_loss_gradcheck(uint64_t seed);

std::vector<GradCheckCase> run_all_gradchecks(uint64_t seed);

}  // namespace bioseg
