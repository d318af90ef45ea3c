#include "epls/graph.hpp"

#include <algorithm>
#include <cmath>

namespace epls {

Node* Graph::make(Tensor value) {
    nodes_.push_back(Node{});
    Node& n = nodes_.back();
    n.grad = Tensor::zeros(value.shape);
    n.value = std::move(value);
    n.owner = this;
    return &n;
}

Node* Graph::leaf(Tensor value) { return make(std::move(value)); }
Node* Graph::constant(Tensor value) { return make(std::move(value)); }

void Graph::backward(Node* loss) {
    if (loss->value.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got shape " + loss->value.shape_str());
    // Stash previous adjoints so this sweep runs on clean buffers, then fold
    // them back in; that keeps "repeated backward accumulates" exact.
    std::vector<std::vector<float>> stash;
    stash.reserve(nodes_.size());
    for (auto& n : nodes_) {
        stash.push_back(std::move(n.grad.data));
        n.grad.data.assign(stash.back().size(), 0.0f);
    }
    loss->grad.data[0] = 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if (it->back) it->back();
    std::size_t i = 0;
    for (auto& n : nodes_) {
        const auto& prev = stash[i++];
        for (std::size_t j = 0; j < prev.size(); ++j) n.grad.data[j] += prev[j];
    }
}

void Graph::zero_grad() {
    for (auto& n : nodes_) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0f);
}

// --------------------------------------------------------------------------

namespace {

void require_2d(const Node* n, const char* op) {
    if (n->value.rank() != 2)
        throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " + n->value.shape_str());
}

enum class Bcast { same, scalar, rowvec };

Bcast bcast_mode(const Tensor& a, const Tensor& b, const char* op) {
    if (a.same_shape(b)) return Bcast::same;
    if (b.size() == 1) return Bcast::scalar;
    if (a.rank() == 2 && b.rank() == 1 && b.size() == a.shape[1]) return Bcast::rowvec;
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

float bval(const Tensor& b, Bcast m, std::size_t flat, int cols) {
    switch (m) {
    case Bcast::same: return b.data[flat];
    case Bcast::scalar: return b.data[0];
    default: return b.data[flat % static_cast<std::size_t>(cols)];
    }
}

void baccum(Tensor& bg, Bcast m, std::size_t flat, int cols, float g) {
    switch (m) {
    case Bcast::same: bg.data[flat] += g; break;
    case Bcast::scalar: bg.data[0] += g; break;
    default: bg.data[flat % static_cast<std::size_t>(cols)] += g; break;
    }
}

template <class Fwd, class Bwd>
Node* binary_op(Node* a, Node* b, const char* name, Fwd fwd, Bwd bwd) {
    Bcast m = bcast_mode(a->value, b->value, name);
    int cols = a->value.cols();
    Tensor out = Tensor::zeros(a->value.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = fwd(a->value.data[i], bval(b->value, m, i, cols));
    Node* y = a->owner->make(std::move(out));
    y->back = [a, b, y, m, cols, bwd]() {
        for (std::size_t i = 0; i < y->grad.data.size(); ++i) {
            float g = y->grad.data[i];
            auto [da, db] = bwd(a->value.data[i], bval(b->value, m, i, cols));
            a->grad.data[i] += g * da;
            baccum(b->grad, m, i, cols, g * db);
        }
    };
    return y;
}

template <class Fwd, class Bwd>
Node* unary_op(Node* a, Fwd fwd, Bwd bwd) {
    Tensor out = Tensor::zeros(a->value.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = fwd(a->value.data[i]);
    Node* y = a->owner->make(std::move(out));
    y->back = [a, y, bwd]() {
        for (std::size_t i = 0; i < y->grad.data.size(); ++i)
            a->grad.data[i] += y->grad.data[i] * bwd(a->value.data[i], y->value.data[i]);
    };
    return y;
}

} // namespace

Node* matmul(Node* a, Node* b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    const Tensor& A = a->value;
    const Tensor& B = b->value;
    if (A.shape[1] != B.shape[0])
        throw std::invalid_argument("matmul: inner dimensions differ, " + A.shape_str() + " vs " + B.shape_str());
    const int m = A.shape[0], k = A.shape[1], n = B.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const float av = A(i, p);
            const float* brow = &B.data[static_cast<std::size_t>(p) * n];
            float* orow = &out.data[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    Node* y = a->owner->make(std::move(out));
    y->back = [a, b, y, m, k, n]() {
        // dA = G * B^T
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                const float* grow = &y->grad.data[static_cast<std::size_t>(i) * n];
                const float* brow = &b->value.data[static_cast<std::size_t>(p) * n];
                float acc = 0.0f;
                for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                a->grad(i, p) += acc;
            }
        // dB = A^T * G
        for (int p = 0; p < k; ++p)
            for (int i = 0; i < m; ++i) {
                const float av = a->value(i, p);
                const float* grow = &y->grad.data[static_cast<std::size_t>(i) * n];
                float* brow = &b->grad.data[static_cast<std::size_t>(p) * n];
                for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
            }
    };
    return y;
}

Node* add(Node* a, Node* b) {
    return binary_op(a, b, "add", [](float x, float v) { return x + v; },
                     [](float, float) { return std::pair<float, float>{1.0f, 1.0f}; });
}

Node* sub(Node* a, Node* b) {
    return binary_op(a, b, "sub", [](float x, float v) { return x - v; },
                     [](float, float) { return std::pair<float, float>{1.0f, -1.0f}; });
}

Node* mul(Node* a, Node* b) {
    return binary_op(a, b, "mul", [](float x, float v) { return x * v; },
                     [](float x, float v) { return std::pair<float, float>{v, x}; });
}

Node* tanh(Node* a) {
    return unary_op(a, [](float x) { return std::tanh(x); },
                    [](float, float y) { return 1.0f - y * y; });
}

Node* sigmoid(Node* a) {
    return unary_op(a, [](float x) { return 1.0f / (1.0f + std::exp(-x)); },
                    [](float, float y) { return y * (1.0f - y); });
}

Node* exp(Node* a) {
    return unary_op(a, [](float x) { return std::exp(x); },
                    [](float, float y) { return y; });
}

Node* log(Node* a) {
    for (float v : a->value.data)
        if (!(v > 0.0f)) throw std::domain_error("log: non-positive input " + std::to_string(v));
    return unary_op(a, [](float x) { return std::log(x); },
                    [](float x, float) { return 1.0f / x; });
}

Node* relu(Node* a) {
    return unary_op(a, [](float x) { return x > 0.0f ? x : 0.0f; },
                    [](float x, float) { return x > 0.0f ? 1.0f : 0.0f; });
}

Node* square(Node* a) {
    return unary_op(a, [](float x) { return x * x; },
                    [](float x, float) { return 2.0f * x; });
}

Node* scale(Node* a, float c) {
    return unary_op(a, [c](float x) { return c * x; },
                    [c](float, float) { return c; });
}

Node* add_const(Node* a, float c) {
    return unary_op(a, [c](float x) { return x + c; },
                    [](float, float) { return 1.0f; });
}

Node* clamp(Node* a, float lo, float hi) {
    return unary_op(a, [lo, hi](float x) { return std::min(std::max(x, lo), hi); },
                    [lo, hi](float x, float) { return (x >= lo && x <= hi) ? 1.0f : 0.0f; });
}

Node* sum_all(Node* a) {
    float s = 0.0f;
    for (float v : a->value.data) s += v;
    Node* y = a->owner->make(Tensor::scalar(s));
    y->back = [a, y]() {
        float g = y->grad.data[0];
        for (auto& v : a->grad.data) v += g;
    };
    return y;
}

Node* mean_all(Node* a) {
    return scale(sum_all(a), 1.0f / static_cast<float>(a->value.size()));
}

Node* reshape(Node* a, std::vector<int> shape) {
    if (Tensor::numel(shape) != a->value.size())
        throw std::invalid_argument("reshape: size mismatch " + a->value.shape_str() + " -> " +
                                    Tensor::shape_str(shape));
    Node* y = a->owner->make(Tensor(std::move(shape), a->value.data));
    y->back = [a, y]() {
        for (std::size_t i = 0; i < a->grad.data.size(); ++i) a->grad.data[i] += y->grad.data[i];
    };
    return y;
}

Node* slice_cols(Node* a, int offset, int len) {
    require_2d(a, "slice_cols");
    const int rows = a->value.shape[0], cols = a->value.shape[1];
    if (offset < 0 || len <= 0 || offset + len > cols)
        throw std::invalid_argument("slice_cols: range out of bounds for " + a->value.shape_str());
    Tensor out = Tensor::zeros({rows, len});
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < len; ++c) out(r, c) = a->value(r, offset + c);
    Node* y = a->owner->make(std::move(out));
    y->back = [a, y, rows, len, offset]() {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < len; ++c) a->grad(r, offset + c) += y->grad(r, c);
    };
    return y;
}

Node* concat_cols(Node* a, Node* b) {
    require_2d(a, "concat_cols");
    require_2d(b, "concat_cols");
    if (a->value.shape[0] != b->value.shape[0])
        throw std::invalid_argument("concat_cols: row counts differ, " + a->value.shape_str() + " vs " +
                                    b->value.shape_str());
    const int rows = a->value.shape[0], ca = a->value.shape[1], cb = b->value.shape[1];
    Tensor out = Tensor::zeros({rows, ca + cb});
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < ca; ++c) out(r, c) = a->value(r, c);
        for (int c = 0; c < cb; ++c) out(r, ca + c) = b->value(r, c);
    }
    Node* y = a->owner->make(std::move(out));
    y->back = [a, b, y, rows, ca, cb]() {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < ca; ++c) a->grad(r, c) += y->grad(r, c);
            for (int c = 0; c < cb; ++c) b->grad(r, c) += y->grad(r, ca + c);
        }
    };
    return y;
}

Node* tile_cols(Node* a, int reps) {
    require_2d(a, "tile_cols");
    if (reps < 1) throw std::invalid_argument("tile_cols: reps must be >= 1");
    const int rows = a->value.shape[0], cols = a->value.shape[1];
    Tensor out = Tensor::zeros({rows, reps * cols});
    for (int r = 0; r < rows; ++r)
        for (int k = 0; k < reps; ++k)
            for (int c = 0; c < cols; ++c) out(r, k * cols + c) = a->value(r, c);
    Node* y = a->owner->make(std::move(out));
    y->back = [a, y, rows, cols, reps]() {
        for (int r = 0; r < rows; ++r)
            for (int k = 0; k < reps; ++k)
                for (int c = 0; c < cols; ++c) a->grad(r, c) += y->grad(r, k * cols + c);
    };
    return y;
}

Node* group_sum_cols(Node* a, int groups) {
    require_2d(a, "group_sum_cols");
    const int rows = a->value.shape[0], cols = a->value.shape[1];
    if (groups < 1 || cols % groups != 0)
        throw std::invalid_argument("group_sum_cols: " + std::to_string(groups) + " groups do not divide " +
                                    a->value.shape_str());
    const int glen = cols / groups;
    Tensor out = Tensor::zeros({rows, groups});
    for (int r = 0; r < rows; ++r)
        for (int g = 0; g < groups; ++g) {
            float s = 0.0f;
            for (int c = 0; c < glen; ++c) s += a->value(r, g * glen + c);
            out(r, g) = s;
        }
    Node* y = a->owner->make(std::move(out));
    y->back = [a, y, rows, groups, glen]() {
        for (int r = 0; r < rows; ++r)
            for (int g = 0; g < groups; ++g) {
                float gr = y->grad(r, g);
                for (int c = 0; c < glen; ++c) a->grad(r, g * glen + c) += gr;
            }
    };
    return y;
}

Node* logsumexp_rows(Node* x) {
    require_2d(x, "logsumexp_rows");
    const int rows = x->value.shape[0], cols = x->value.shape[1];
    Tensor out = Tensor::zeros({rows});
    for (int r = 0; r < rows; ++r) {
        float m = x->value(r, 0);
        for (int c = 1; c < cols; ++c) m = std::max(m, x->value(r, c));
        float s = 0.0f;
        for (int c = 0; c < cols; ++c) s += std::exp(x->value(r, c) - m);
        out(r) = m + std::log(s);
    }
    Node* y = x->owner->make(std::move(out));
    y->back = [x, y, rows, cols]() {
        for (int r = 0; r < rows; ++r) {
            float g = y->grad(r);
            for (int c = 0; c < cols; ++c)
                x->grad(r, c) += g * std::exp(x->value(r, c) - y->value(r));
        }
    };
    return y;
}

Node* logsumexp(Node* x) {
    if (x->value.rank() != 1)
        throw std::invalid_argument("logsumexp: expected 1-D tensor, got " + x->value.shape_str());
    return reshape(logsumexp_rows(reshape(x, {1, static_cast<int>(x->value.size())})), {1});
}

Node* log_softmax_rows(Node* x) {
    require_2d(x, "log_softmax_rows");
    const int rows = x->value.shape[0], cols = x->value.shape[1];
    Tensor out = Tensor::zeros({rows, cols});
    for (int r = 0; r < rows; ++r) {
        float m = x->value(r, 0);
        for (int c = 1; c < cols; ++c) m = std::max(m, x->value(r, c));
        float s = 0.0f;
        for (int c = 0; c < cols; ++c) s += std::exp(x->value(r, c) - m);
        float lse = m + std::log(s);
        for (int c = 0; c < cols; ++c) out(r, c) = x->value(r, c) - lse;
    }
    Node* y = x->owner->make(std::move(out));
    y->back = [x, y, rows, cols]() {
        for (int r = 0; r < rows; ++r) {
            float gsum = 0.0f;
            for (int c = 0; c < cols; ++c) gsum += y->grad(r, c);
            for (int c = 0; c < cols; ++c)
                x->grad(r, c) += y->grad(r, c) - std::exp(y->value(r, c)) * gsum;
        }
    };
    return y;
}

} // namespace epls
