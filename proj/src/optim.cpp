#include "dcvd/optim.hpp"

#include <cmath>

namespace dcvd::nn {

void AdamW::step(ParamRegistry& reg, double lr) {
    ++t_;
    for (auto& [name, p] : reg.all()) {
        if (!p.has_grad()) continue;
        const Mat& g = p.grad();
        if ((g.array() == 0.0).all()) continue;

        Slot& slot = slots_[name];
        if (slot.m.size() == 0) {
            slot.m = Mat::Zero(g.rows(), g.cols());
            slot.v = Mat::Zero(g.rows(), g.cols());
        }
        slot.t += 1;
        slot.m = opts_.beta1 * slot.m + (1.0 - opts_.beta1) * g;
        slot.v = opts_.beta2 * slot.v + (1.0 - opts_.beta2) * g.cwiseProduct(g);
        double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(slot.t));
        double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(slot.t));
        Mat mhat = slot.m / bc1;
        Mat vhat = slot.v / bc2;
        Mat& w = p.mutable_value();
        w.array() -= lr * (mhat.array() / (vhat.array().sqrt() + opts_.eps) + opts_.weight_decay * w.array());
    }
}

double lr_schedule(double base_lr, std::int64_t step, std::int64_t total_steps,
                   std::int64_t warmup_steps, int cycles) {
    if (step < warmup_steps && warmup_steps > 0)
        return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    std::int64_t span = total_steps - warmup_steps;
    if (span <= 0) return base_lr;
    if (cycles < 1) cycles = 1;
    double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(span);
    if (progress >= 1.0) progress = 1.0 - 1e-12;
    double cycle_pos = progress * cycles - std::floor(progress * cycles);
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * cycle_pos));
}

}  // namespace dcvd::nn
