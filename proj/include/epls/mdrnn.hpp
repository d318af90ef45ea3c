#pragma once

#include <utility>
#include <vector>

#include "epls/checkpoint.hpp"
#include "epls/env.hpp"
#include "epls/graph.hpp"
#include "epls/rng.hpp"
#include "epls/tensor.hpp"
#include "epls/vae.hpp"

namespace epls {

// Mixture of diagonal Gaussians over the next latent. mu/sigma are row-major
// [component][latent dim].
struct GmmParams {
    int components = 0;
    int latent = 0;
    std::vector<float> pi;    // length K, softmax output
    std::vector<float> mu;    // K*L
    std::vector<float> sigma; // K*L, strictly positive
};

struct StepPrediction {
    GmmParams gmm;
    float reward_mean = 0.0f;
    float terminal_p = 0.5f;
};

struct WorldModelState {
    std::vector<float> h, c;
};

struct MdrnnConfig {
    int latent = 8;
    int action_dim = kActionDim;
    int hidden = 64;
    int mixtures = 3;
};

// LSTM over concat(z, a) with linear heads: mixture weights (softmax), means,
// log-sigmas (clamped to [-5,2] then exponentiated), reward mean, and
// terminal probability (sigmoid). Gate layout in the 4H axis is [i, f, g, o].
class Mdrnn {
public:
    MdrnnConfig cfg;
    Tensor lstm_wx, lstm_wh, lstm_b;
    Tensor pi_w, pi_b, mu_w, mu_b, logsigma_w, logsigma_b;
    Tensor reward_w, reward_b, terminal_w, terminal_b;

    explicit Mdrnn(MdrnnConfig cfg);
    static Mdrnn init(MdrnnConfig cfg, Rng& rng);

    WorldModelState initial_state() const;
    std::pair<StepPrediction, WorldModelState> step(const LatentVector& z, const Action& a,
                                                    const WorldModelState& state) const;

    NamedTensors named();
    ConstNamedTensors named() const;
};

// Negative log-likelihood of z under the mixture, diagonal covariance.
// Computed and returned in double: the value feeds oracle comparisons and
// held-out averages where a float-rounded return would dominate the error.
double gmm_nll(const GmmParams& g, const LatentVector& z);

// Per-step loss: squared reward error + binary cross-entropy on the terminal
// flag (p clamped to [1e-7, 1-1e-7]) + mixture NLL.
float mdrnn_loss(const StepPrediction& pred, const LatentVector& z_next, float reward, bool terminal);

LatentVector sample_next_latent(const GmmParams& g, Rng& rng);
// Mean of the most likely component; ties break toward the lowest index.
LatentVector expected_next_latent(const GmmParams& g);

// ---- training ------------------------------------------------------------

// One teacher-forced window batch. Index [t] holds the step-t tensors across
// the batch; rows past a window's length carry mask 0.
struct MdrnnBatch {
    int steps = 0;
    int batch = 0;
    std::vector<Tensor> z;        // [B, L]
    std::vector<Tensor> action;   // [B, A]
    std::vector<Tensor> z_next;   // [B, L]
    std::vector<Tensor> reward;   // [B]
    std::vector<Tensor> terminal; // [B]
    std::vector<Tensor> step_mask; // [B] 1 where the step is real
    std::vector<Tensor> gmm_mask;  // [B] 1 where z_next exists
    float step_count = 0.0f;       // sum over step_mask
};

struct BoundMdrnn {
    std::vector<std::pair<std::string, Node*>> leaves;
    Node* at(const std::string& name) const;
};
BoundMdrnn bind_mdrnn(Graph& g, const Mdrnn& m);
Node* mdrnn_training_loss(Graph& g, const BoundMdrnn& p, const MdrnnBatch& batch, const MdrnnConfig& cfg);

} // namespace epls
