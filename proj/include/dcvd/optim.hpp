#pragma once

#include "dcvd/nn.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace dcvd::nn {

/// AdamW with decoupled weight decay. Parameters whose gradient is absent or
/// exactly zero for a step are left untouched (no moments, no decay), so
/// disabled branches stay bit-identical across training.
class AdamW {
public:
    struct Options {
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
        double weight_decay = 0.01;
    };

    AdamW() : opts_() {}
    explicit AdamW(Options opts) : opts_(opts) {}

    void step(ParamRegistry& reg, double lr);
    void zero_grad(ParamRegistry& reg) { reg.zero_grads(); }
    std::int64_t steps_taken() const { return t_; }

private:
    struct Slot {
        Mat m, v;
        std::int64_t t = 0;  // per-parameter step count; lazily updated params keep their own clock
    };
    Options opts_;
    std::map<std::string, Slot> slots_;
    std::int64_t t_ = 0;
};

/// Linear warmup to `base_lr`, then cosine annealing restarted `cycles` times
/// over the remaining steps. step is 0-based.
double lr_schedule(double base_lr, std::int64_t step, std::int64_t total_steps,
                   std::int64_t warmup_steps, int cycles);

}  // namespace dcvd::nn
