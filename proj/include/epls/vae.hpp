#pragma once

#include <vector>

#include "epls/checkpoint.hpp"
#include "epls/graph.hpp"
#include "epls/rng.hpp"
#include "epls/tensor.hpp"

namespace epls {

using LatentVector = std::vector<float>;

// Diagonal Gaussian over the latent space as produced by the encoder.
struct LatentGaussian {
    std::vector<float> mu;
    std::vector<float> sigma; // strictly positive (exp of the log-sigma head)
};

struct VaeConfig {
    int obs_dim = 256;
    int hidden1 = 256;
    int hidden2 = 128;
    int latent = 8;
    float beta = 1.0f; // KL weight
};

// MLP encoder/decoder pair over flattened rasters. The log-sigma head is
// clamped to [-5, 2] before exponentiation.
class Vae {
public:
    VaeConfig cfg;
    Tensor enc1_w, enc1_b, enc2_w, enc2_b;
    Tensor mu_w, mu_b, logsigma_w, logsigma_b;
    Tensor dec1_w, dec1_b, dec2_w, dec2_b, out_w, out_b;

    explicit Vae(VaeConfig cfg);
    static Vae init(VaeConfig cfg, Rng& rng); // uniform(-1/sqrt(fan_in), +) weights, zero biases

    LatentGaussian encode(const std::vector<float>& obs) const;
    std::vector<float> decode(const LatentVector& z) const;

    NamedTensors named();
    ConstNamedTensors named() const;
};

// z = mu + sigma * eps with eps ~ N(0, I) from the given stream.
LatentVector vae_sample(const LatentGaussian& g, Rng& rng);

// Sum-of-squares reconstruction error plus beta-weighted KL to N(0, I).
float vae_loss(const std::vector<float>& obs, const std::vector<float>& recon, const LatentGaussian& g,
               float beta);

// Differentiable batch loss for training. `obs` is [B, D]; `eps` is the
// [B, L] reparameterization noise, drawn by the caller. Leaf order matches
// Vae::named(). Returns the mean per-sample loss node.
struct BoundVae {
    std::vector<std::pair<std::string, Node*>> leaves;
    Node* at(const std::string& name) const;
};
BoundVae bind_vae(Graph& g, const Vae& vae);
Node* vae_training_loss(Graph& g, const BoundVae& p, const Tensor& obs, const Tensor& eps, const VaeConfig& cfg);

} // namespace epls
