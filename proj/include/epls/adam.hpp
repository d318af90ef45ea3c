#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "epls/tensor.hpp"

namespace epls {

struct AdamConfig {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
};

// Adam with bias correction. One moment slot per named parameter; the step
// counter is per slot and increments on every accepted update. A non-finite
// gradient rejects the update and names the offending parameter.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void step(const std::string& name, Tensor& param, const Tensor& grad);

    std::int64_t step_count(const std::string& name) const;
    const AdamConfig& config() const { return cfg_; }

private:
    struct Slot {
        Tensor m, v;
        std::int64_t t = 0;
    };
    AdamConfig cfg_;
    std::map<std::string, Slot> slots_;
};

} // namespace epls
