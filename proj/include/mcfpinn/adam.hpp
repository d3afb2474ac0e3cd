#pragma once

#include <cmath>
#include <cstdint>

#include "errors.hpp"
#include "mlp.hpp"

namespace mcfpinn {

/// Piecewise-constant learning rate: lr0 * factor^floor(step / every).
struct LrSchedule {
    double lr0 = 1e-3;
    double decay_factor = 0.5;
    std::int64_t decay_every = 2000;

    double at(std::int64_t step) const {
        if (decay_every <= 0 || decay_factor == 1.0) return lr0;
        return lr0 * std::pow(decay_factor, static_cast<double>(step / decay_every));
    }
};

struct AdamState {
    GradBuffer first_moment;
    GradBuffer second_moment;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    LrSchedule schedule;

    double current_lr() const { return schedule.at(step); }
};

inline AdamState make_adam_state(const MlpParams& p, LrSchedule schedule) {
    AdamState s;
    s.first_moment = zeros_like(p);
    s.second_moment = zeros_like(p);
    s.schedule = schedule;
    return s;
}

/// One bias-corrected Adam update of `p` in place.
inline void adam_step(MlpParams& p, const GradBuffer& g, AdamState& s) {
    if (!same_shape(p, g) || !same_shape(p, s.first_moment) || !same_shape(p, s.second_moment))
        throw InvalidShape("adam_step: parameter, gradient and moment shapes differ");
    if (!g.all_finite()) throw TrainingDivergence("adam_step: non-finite gradient");

    const double lr = s.schedule.at(s.step);
    ++s.step;
    const double t = static_cast<double>(s.step);
    const double c1 = 1.0 - std::pow(s.beta1, t);
    const double c2 = 1.0 - std::pow(s.beta2, t);

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m.array() = s.beta1 * m.array() + (1.0 - s.beta1) * grad.array();
        v.array() = s.beta2 * v.array() + (1.0 - s.beta2) * grad.array().square();
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
    };
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        update(p.weights[l], g.weights[l], s.first_moment.weights[l], s.second_moment.weights[l]);
        update(p.biases[l], g.biases[l], s.first_moment.biases[l], s.second_moment.biases[l]);
    }
}

}  // namespace mcfpinn
