#include "epls/vae.hpp"

#include <cmath>
#include <stdexcept>

namespace epls {

namespace {

constexpr float kLogSigmaMin = -5.0f;
constexpr float kLogSigmaMax = 2.0f;

Tensor init_weight(int fan_in, int fan_out, Rng& rng) {
    Tensor t = Tensor::zeros({fan_in, fan_out});
    const float s = 1.0f / std::sqrt(static_cast<float>(fan_in));
    for (auto& v : t.data) v = rng.uniform(-s, s);
    return t;
}

// y = x * W + b over plain floats.
void affine(const std::vector<float>& x, const Tensor& w, const Tensor& b, std::vector<float>& y) {
    const int in = w.shape[0], out = w.shape[1];
    y.assign(b.data.begin(), b.data.end());
    for (int i = 0; i < in; ++i) {
        const float xv = x[i];
        if (xv == 0.0f) continue;
        const float* wrow = &w.data[static_cast<std::size_t>(i) * out];
        for (int j = 0; j < out; ++j) y[j] += xv * wrow[j];
    }
}

void relu_inplace(std::vector<float>& v) {
    for (auto& x : v)
        if (x < 0.0f) x = 0.0f;
}

} // namespace

Vae::Vae(VaeConfig c)
    : cfg(c),
      enc1_w(Tensor::zeros({c.obs_dim, c.hidden1})), enc1_b(Tensor::zeros({c.hidden1})),
      enc2_w(Tensor::zeros({c.hidden1, c.hidden2})), enc2_b(Tensor::zeros({c.hidden2})),
      mu_w(Tensor::zeros({c.hidden2, c.latent})), mu_b(Tensor::zeros({c.latent})),
      logsigma_w(Tensor::zeros({c.hidden2, c.latent})), logsigma_b(Tensor::zeros({c.latent})),
      dec1_w(Tensor::zeros({c.latent, c.hidden2})), dec1_b(Tensor::zeros({c.hidden2})),
      dec2_w(Tensor::zeros({c.hidden2, c.hidden1})), dec2_b(Tensor::zeros({c.hidden1})),
      out_w(Tensor::zeros({c.hidden1, c.obs_dim})), out_b(Tensor::zeros({c.obs_dim})) {}

Vae Vae::init(VaeConfig cfg, Rng& rng) {
    Vae v(cfg);
    v.enc1_w = init_weight(cfg.obs_dim, cfg.hidden1, rng);
    v.enc2_w = init_weight(cfg.hidden1, cfg.hidden2, rng);
    v.mu_w = init_weight(cfg.hidden2, cfg.latent, rng);
    v.logsigma_w = init_weight(cfg.hidden2, cfg.latent, rng);
    v.dec1_w = init_weight(cfg.latent, cfg.hidden2, rng);
    v.dec2_w = init_weight(cfg.hidden2, cfg.hidden1, rng);
    v.out_w = init_weight(cfg.hidden1, cfg.obs_dim, rng);
    return v;
}

NamedTensors Vae::named() {
    return {
        {"vae.enc1.w", &enc1_w}, {"vae.enc1.b", &enc1_b},
        {"vae.enc2.w", &enc2_w}, {"vae.enc2.b", &enc2_b},
        {"vae.mu.w", &mu_w}, {"vae.mu.b", &mu_b},
        {"vae.logsigma.w", &logsigma_w}, {"vae.logsigma.b", &logsigma_b},
        {"vae.dec1.w", &dec1_w}, {"vae.dec1.b", &dec1_b},
        {"vae.dec2.w", &dec2_w}, {"vae.dec2.b", &dec2_b},
        {"vae.out.w", &out_w}, {"vae.out.b", &out_b},
    };
}

ConstNamedTensors Vae::named() const {
    ConstNamedTensors out;
    for (auto& [name, t] : const_cast<Vae*>(this)->named()) out.emplace_back(name, t);
    return out;
}

LatentGaussian Vae::encode(const std::vector<float>& obs) const {
    if (static_cast<int>(obs.size()) != cfg.obs_dim)
        throw std::invalid_argument("vae_encode: observation length " + std::to_string(obs.size()) +
                                    ", expected " + std::to_string(cfg.obs_dim));
    std::vector<float> h1, h2;
    affine(obs, enc1_w, enc1_b, h1);
    relu_inplace(h1);
    affine(h1, enc2_w, enc2_b, h2);
    relu_inplace(h2);
    LatentGaussian g;
    affine(h2, mu_w, mu_b, g.mu);
    affine(h2, logsigma_w, logsigma_b, g.sigma);
    for (auto& s : g.sigma) s = std::exp(std::clamp(s, kLogSigmaMin, kLogSigmaMax));
    return g;
}

std::vector<float> Vae::decode(const LatentVector& z) const {
    if (static_cast<int>(z.size()) != cfg.latent)
        throw std::invalid_argument("vae_decode: latent length " + std::to_string(z.size()) + ", expected " +
                                    std::to_string(cfg.latent));
    std::vector<float> h1, h2, out;
    affine(z, dec1_w, dec1_b, h1);
    relu_inplace(h1);
    affine(h1, dec2_w, dec2_b, h2);
    relu_inplace(h2);
    affine(h2, out_w, out_b, out);
    for (auto& v : out) v = 1.0f / (1.0f + std::exp(-v));
    return out;
}

LatentVector vae_sample(const LatentGaussian& g, Rng& rng) {
    LatentVector z(g.mu.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = g.mu[i] + g.sigma[i] * rng.normal();
    return z;
}

float vae_loss(const std::vector<float>& obs, const std::vector<float>& recon, const LatentGaussian& g,
               float beta) {
    if (obs.size() != recon.size()) throw std::invalid_argument("vae_loss: observation/reconstruction mismatch");
    float rec = 0.0f;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        float d = obs[i] - recon[i];
        rec += d * d;
    }
    float kl = 0.0f;
    for (std::size_t i = 0; i < g.mu.size(); ++i) {
        float s2 = g.sigma[i] * g.sigma[i];
        kl += -0.5f * (1.0f + std::log(s2) - g.mu[i] * g.mu[i] - s2);
    }
    return rec + beta * kl;
}

BoundVae bind_vae(Graph& g, const Vae& vae) {
    BoundVae b;
    for (auto& [name, t] : vae.named()) b.leaves.emplace_back(name, g.leaf(*t));
    return b;
}

Node* BoundVae::at(const std::string& name) const {
    for (auto& [n, node] : leaves)
        if (n == name) return node;
    throw std::invalid_argument("bind_vae: unknown parameter " + name);
}

Node* vae_training_loss(Graph& g, const BoundVae& p, const Tensor& obs, const Tensor& eps,
                        const VaeConfig& cfg) {
    const int batch = obs.shape[0];
    Node* x = g.constant(obs);
    Node* h1 = relu(add(matmul(x, p.at("vae.enc1.w")), p.at("vae.enc1.b")));
    Node* h2 = relu(add(matmul(h1, p.at("vae.enc2.w")), p.at("vae.enc2.b")));
    Node* mu = add(matmul(h2, p.at("vae.mu.w")), p.at("vae.mu.b"));
    Node* ls = clamp(add(matmul(h2, p.at("vae.logsigma.w")), p.at("vae.logsigma.b")), -5.0f, 2.0f);
    Node* sigma = exp(ls);
    Node* z = add(mu, mul(sigma, g.constant(eps)));
    Node* d1 = relu(add(matmul(z, p.at("vae.dec1.w")), p.at("vae.dec1.b")));
    Node* d2 = relu(add(matmul(d1, p.at("vae.dec2.w")), p.at("vae.dec2.b")));
    Node* recon = sigmoid(add(matmul(d2, p.at("vae.out.w")), p.at("vae.out.b")));

    Node* rec_sum = sum_all(square(sub(recon, x)));
    // KL(N(mu, sigma) || N(0, I)) = -1/2 sum(1 + 2 log sigma - mu^2 - sigma^2)
    Node* kl_inner = sub(sub(add_const(scale(ls, 2.0f), 1.0f), square(mu)), square(sigma));
    Node* kl_sum = scale(sum_all(kl_inner), -0.5f);
    return scale(add(rec_sum, scale(kl_sum, cfg.beta)), 1.0f / static_cast<float>(batch));
}

} // namespace epls
