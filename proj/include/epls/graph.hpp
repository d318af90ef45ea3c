#pragma once

#include <deque>
#include <functional>

#include "epls/tensor.hpp"

namespace epls {

class Graph;

// One entry on the tape. `back` scatters this node's adjoint into its
// parents; it is empty for leaves and constants.
struct Node {
    Tensor value;
    Tensor grad;
    std::function<void()> back;
    Graph* owner = nullptr;
};

// Reverse-mode tape. Nodes are created in forward order, so reverse creation
// order is a valid reverse topological order and backward() is a single
// sweep. A Graph is single-owner: build the forward pass, call backward,
// read gradients, discard.
class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // Leaf with gradient tracking (parameters, differentiable inputs).
    Node* leaf(Tensor value);
    // Input that never needs a gradient (targets, masks, noise draws).
    Node* constant(Tensor value);

    // Accumulates d(loss)/d(node) into every node's grad. Loss must be
    // scalar. Repeated calls without zero_grad() accumulate.
    void backward(Node* loss);
    void zero_grad();

    std::size_t node_count() const { return nodes_.size(); }

    Node* make(Tensor value);

private:
    std::deque<Node> nodes_;
};

// ---- primitive ops -------------------------------------------------------

// 2-D matrix product [m,k]x[k,n] -> [m,n].
Node* matmul(Node* a, Node* b);

// Binary elementwise ops. Shapes must match, or b may be a scalar, or b may
// be a length-cols(a) vector broadcast across the rows of a 2-D a (bias add).
Node* add(Node* a, Node* b);
Node* sub(Node* a, Node* b);
Node* mul(Node* a, Node* b);

Node* tanh(Node* a);
Node* sigmoid(Node* a);
Node* exp(Node* a);
Node* log(Node* a); // domain error on non-positive input
Node* relu(Node* a);
Node* square(Node* a);

Node* scale(Node* a, float c);
Node* add_const(Node* a, float c);
// Gradient passes through where lo <= value <= hi, zero outside.
Node* clamp(Node* a, float lo, float hi);

Node* sum_all(Node* a);                   // -> [1]
Node* mean_all(Node* a);                  // -> [1]
Node* reshape(Node* a, std::vector<int> shape);

// 2-D structural ops.
Node* slice_cols(Node* a, int offset, int len);
Node* concat_cols(Node* a, Node* b);
Node* tile_cols(Node* a, int reps);                 // [B,L] -> [B,reps*L]
Node* group_sum_cols(Node* a, int groups);          // [B,G*L] -> [B,G]

// Stable log-sum-exp. The vector form implements max(x) + log sum exp(x-max).
Node* logsumexp(Node* x);                 // [n] -> [1]
Node* logsumexp_rows(Node* x);            // [B,K] -> [B]
Node* log_softmax_rows(Node* x);          // [B,K] -> [B,K]

} // namespace epls
