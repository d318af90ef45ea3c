#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace epls {

// Dense row-major float32 tensor. All learned parameters and activations
// live in this type.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::size_t>(numel(shape)) != data.size())
            throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
    }

    static std::int64_t numel(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension in " + shape_str(s));
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) {
        auto n = numel(s);
        return Tensor(std::move(s), std::vector<float>(static_cast<std::size_t>(n), 0.0f));
    }

    static Tensor full(std::vector<int> s, float v) {
        auto n = numel(s);
        return Tensor(std::move(s), std::vector<float>(static_cast<std::size_t>(n), v));
    }

    static Tensor scalar(float v) { return Tensor({1}, {v}); }

    static Tensor row_major(std::vector<int> s, std::vector<float> d) { return Tensor(std::move(s), std::move(d)); }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    // 2-D accessors; rows()/cols() treat a 1-D tensor as a single row.
    int rows() const { return rank() == 2 ? shape[0] : 1; }
    int cols() const { return rank() == 2 ? shape[1] : static_cast<int>(data.size()); }

    float& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
    float operator()(int i) const { return data[static_cast<std::size_t>(i)]; }
    float& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }
    float operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols() + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static std::string shape_str(const std::vector<int>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += "x";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }
    std::string shape_str() const { return shape_str(shape); }
};

} // namespace epls
