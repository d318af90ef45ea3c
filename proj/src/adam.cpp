#include "epls/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace epls {

void Adam::step(const std::string& name, Tensor& param, const Tensor& grad) {
    if (!param.same_shape(grad))
        throw std::invalid_argument("adam: parameter '" + name + "' shape " + param.shape_str() +
                                    " does not match gradient shape " + grad.shape_str());
    for (float g : grad.data)
        if (!std::isfinite(g))
            throw std::runtime_error("adam: non-finite gradient for parameter '" + name + "', update rejected");

    auto it = slots_.find(name);
    if (it == slots_.end()) {
        Slot s;
        s.m = Tensor::zeros(param.shape);
        s.v = Tensor::zeros(param.shape);
        it = slots_.emplace(name, std::move(s)).first;
    }
    Slot& s = it->second;
    if (!s.m.same_shape(param))
        throw std::invalid_argument("adam: parameter '" + name + "' changed shape");

    s.t += 1;
    const float b1 = cfg_.beta1, b2 = cfg_.beta2;
    const float corr1 = 1.0f - std::pow(b1, static_cast<float>(s.t));
    const float corr2 = 1.0f - std::pow(b2, static_cast<float>(s.t));
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        const float g = grad.data[i];
        s.m.data[i] = b1 * s.m.data[i] + (1.0f - b1) * g;
        s.v.data[i] = b2 * s.v.data[i] + (1.0f - b2) * g * g;
        const float mhat = s.m.data[i] / corr1;
        const float vhat = s.v.data[i] / corr2;
        param.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
}

std::int64_t Adam::step_count(const std::string& name) const {
    auto it = slots_.find(name);
    return it == slots_.end() ? 0 : it->second.t;
}

} // namespace epls
