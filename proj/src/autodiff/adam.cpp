#include "wsgat/autodiff/adam.hpp"

#include <cmath>

#include "wsgat/errors.hpp"

namespace wsgat::autodiff {

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& config) {
    if (state.m.empty()) {
        for (const Parameter* p : params) {
            state.m.emplace_back(p->value.rows(), p->value.cols());
            state.v.emplace_back(p->value.rows(), p->value.cols());
        }
    }
    if (state.m.size() != params.size()) throw Error("adam_step: parameter list changed");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double m_corr = 1.0 - std::pow(config.beta1, t);
    const double v_corr = 1.0 - std::pow(config.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Parameter& p = *params[k];
        Matrix& m = state.m[k];
        Matrix& v = state.v[k];
        if (!p.grad.same_shape(p.value)) throw ShapeError("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
            const double m_hat = m[i] / m_corr;
            const double v_hat = v[i] / v_corr;
            p.value[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
        }
    }
}

}  // namespace wsgat::autodiff
