#include "epls/mdrnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace epls {

namespace {

constexpr float kLogSigmaMin = -5.0f;
constexpr float kLogSigmaMax = 2.0f;
constexpr double kHalfLog2Pi = 0.9189385332046727; // 0.5 * ln(2*pi)
constexpr float kBceEps = 1e-7f;

Tensor init_weight(int fan_in, int fan_out, Rng& rng) {
    Tensor t = Tensor::zeros({fan_in, fan_out});
    const float s = 1.0f / std::sqrt(static_cast<float>(fan_in));
    for (auto& v : t.data) v = rng.uniform(-s, s);
    return t;
}

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

float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

} // namespace

Mdrnn::Mdrnn(MdrnnConfig c)
    : cfg(c),
      lstm_wx(Tensor::zeros({c.latent + c.action_dim, 4 * c.hidden})),
      lstm_wh(Tensor::zeros({c.hidden, 4 * c.hidden})),
      lstm_b(Tensor::zeros({4 * c.hidden})),
      pi_w(Tensor::zeros({c.hidden, c.mixtures})), pi_b(Tensor::zeros({c.mixtures})),
      mu_w(Tensor::zeros({c.hidden, c.mixtures * c.latent})), mu_b(Tensor::zeros({c.mixtures * c.latent})),
      logsigma_w(Tensor::zeros({c.hidden, c.mixtures * c.latent})),
      logsigma_b(Tensor::zeros({c.mixtures * c.latent})),
      reward_w(Tensor::zeros({c.hidden, 1})), reward_b(Tensor::zeros({1})),
      terminal_w(Tensor::zeros({c.hidden, 1})), terminal_b(Tensor::zeros({1})) {}

Mdrnn Mdrnn::init(MdrnnConfig cfg, Rng& rng) {
    Mdrnn m(cfg);
    m.lstm_wx = init_weight(cfg.latent + cfg.action_dim, 4 * cfg.hidden, rng);
    m.lstm_wh = init_weight(cfg.hidden, 4 * cfg.hidden, rng);
    m.pi_w = init_weight(cfg.hidden, cfg.mixtures, rng);
    m.mu_w = init_weight(cfg.hidden, cfg.mixtures * cfg.latent, rng);
    m.logsigma_w = init_weight(cfg.hidden, cfg.mixtures * cfg.latent, rng);
    m.reward_w = init_weight(cfg.hidden, 1, rng);
    m.terminal_w = init_weight(cfg.hidden, 1, rng);
    return m;
}

NamedTensors Mdrnn::named() {
    return {
        {"mdrnn.lstm.wx", &lstm_wx}, {"mdrnn.lstm.wh", &lstm_wh}, {"mdrnn.lstm.b", &lstm_b},
        {"mdrnn.pi.w", &pi_w}, {"mdrnn.pi.b", &pi_b},
        {"mdrnn.mu.w", &mu_w}, {"mdrnn.mu.b", &mu_b},
        {"mdrnn.logsigma.w", &logsigma_w}, {"mdrnn.logsigma.b", &logsigma_b},
        {"mdrnn.reward.w", &reward_w}, {"mdrnn.reward.b", &reward_b},
        {"mdrnn.terminal.w", &terminal_w}, {"mdrnn.terminal.b", &terminal_b},
    };
}

ConstNamedTensors Mdrnn::named() const {
    ConstNamedTensors out;
    for (auto& [name, t] : const_cast<Mdrnn*>(this)->named()) out.emplace_back(name, t);
    return out;
}

WorldModelState Mdrnn::initial_state() const {
    WorldModelState s;
    s.h.assign(cfg.hidden, 0.0f);
    s.c.assign(cfg.hidden, 0.0f);
    return s;
}

std::pair<StepPrediction, WorldModelState> Mdrnn::step(const LatentVector& z, const Action& a,
                                                       const WorldModelState& state) const {
    if (static_cast<int>(z.size()) != cfg.latent)
        throw std::invalid_argument("mdrnn_step: latent length " + std::to_string(z.size()) + ", expected " +
                                    std::to_string(cfg.latent));
    if (static_cast<int>(state.h.size()) != cfg.hidden || static_cast<int>(state.c.size()) != cfg.hidden)
        throw std::invalid_argument("mdrnn_step: state size mismatch");

    std::vector<float> x(z);
    x.push_back(a.steer);
    x.push_back(a.accel);
    x.push_back(a.brake);

    const int H = cfg.hidden;
    std::vector<float> gx, gh(4 * H, 0.0f);
    affine(x, lstm_wx, lstm_b, gx);
    for (int i = 0; i < H; ++i) {
        const float hv = state.h[i];
        if (hv == 0.0f) continue;
        const float* wrow = &lstm_wh.data[static_cast<std::size_t>(i) * 4 * H];
        for (int j = 0; j < 4 * H; ++j) gh[j] += hv * wrow[j];
    }

    WorldModelState next;
    next.h.resize(H);
    next.c.resize(H);
    for (int j = 0; j < H; ++j) {
        float i_g = sigmoidf(gx[j] + gh[j]);
        float f_g = sigmoidf(gx[H + j] + gh[H + j]);
        float g_g = std::tanh(gx[2 * H + j] + gh[2 * H + j]);
        float o_g = sigmoidf(gx[3 * H + j] + gh[3 * H + j]);
        next.c[j] = f_g * state.c[j] + i_g * g_g;
        next.h[j] = o_g * std::tanh(next.c[j]);
    }

    StepPrediction pred;
    pred.gmm.components = cfg.mixtures;
    pred.gmm.latent = cfg.latent;
    std::vector<float> logits;
    affine(next.h, pi_w, pi_b, logits);
    float mx = *std::max_element(logits.begin(), logits.end());
    float denom = 0.0f;
    pred.gmm.pi.resize(logits.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
        pred.gmm.pi[k] = std::exp(logits[k] - mx);
        denom += pred.gmm.pi[k];
    }
    for (auto& p : pred.gmm.pi) p /= denom;

    affine(next.h, mu_w, mu_b, pred.gmm.mu);
    affine(next.h, logsigma_w, logsigma_b, pred.gmm.sigma);
    for (auto& s : pred.gmm.sigma) s = std::exp(std::clamp(s, kLogSigmaMin, kLogSigmaMax));

    std::vector<float> scalar;
    affine(next.h, reward_w, reward_b, scalar);
    pred.reward_mean = scalar[0];
    affine(next.h, terminal_w, terminal_b, scalar);
    pred.terminal_p = sigmoidf(scalar[0]);
    return {pred, next};
}

double gmm_nll(const GmmParams& g, const LatentVector& z) {
    if (static_cast<int>(z.size()) != g.latent) throw std::invalid_argument("gmm_nll: latent length mismatch");
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> lp(g.components);
    for (int k = 0; k < g.components; ++k) {
        double acc = std::log(static_cast<double>(g.pi[k]));
        for (int l = 0; l < g.latent; ++l) {
            const double mu = g.mu[static_cast<std::size_t>(k) * g.latent + l];
            const double sigma = g.sigma[static_cast<std::size_t>(k) * g.latent + l];
            const double d = (z[l] - mu) / sigma;
            acc += -0.5 * d * d - std::log(sigma) - kHalfLog2Pi;
        }
        lp[k] = acc;
        mx = std::max(mx, acc);
    }
    double s = 0.0;
    for (double v : lp) s += std::exp(v - mx);
    return -(mx + std::log(s));
}

float mdrnn_loss(const StepPrediction& pred, const LatentVector& z_next, float reward, bool terminal) {
    const float dr = pred.reward_mean - reward;
    const float p = std::clamp(pred.terminal_p, kBceEps, 1.0f - kBceEps);
    const float bce = terminal ? -std::log(p) : -std::log(1.0f - p);
    return static_cast<float>(gmm_nll(pred.gmm, z_next)) + dr * dr + bce;
}

LatentVector sample_next_latent(const GmmParams& g, Rng& rng) {
    // Inverse-CDF draw over the mixture weights, then a diagonal Gaussian draw.
    float u = rng.uniform();
    int k = g.components - 1;
    float acc = 0.0f;
    for (int i = 0; i < g.components; ++i) {
        acc += g.pi[i];
        if (u < acc) {
            k = i;
            break;
        }
    }
    LatentVector z(g.latent);
    for (int l = 0; l < g.latent; ++l) {
        const std::size_t idx = static_cast<std::size_t>(k) * g.latent + l;
        z[l] = g.mu[idx] + g.sigma[idx] * rng.normal();
    }
    return z;
}

LatentVector expected_next_latent(const GmmParams& g) {
    int best = 0;
    for (int k = 1; k < g.components; ++k)
        if (g.pi[k] > g.pi[best]) best = k;
    const std::size_t off = static_cast<std::size_t>(best) * g.latent;
    return LatentVector(g.mu.begin() + off, g.mu.begin() + off + g.latent);
}

BoundMdrnn bind_mdrnn(Graph& g, const Mdrnn& m) {
    BoundMdrnn b;
    for (auto& [name, t] : m.named()) b.leaves.emplace_back(name, g.leaf(*t));
    return b;
}

Node* BoundMdrnn::at(const std::string& name) const {
    for (auto& [n, node] : leaves)
        if (n == name) return node;
    throw std::invalid_argument("bind_mdrnn: unknown parameter " + name);
}

Node* mdrnn_training_loss(Graph& g, const BoundMdrnn& p, const MdrnnBatch& batch, const MdrnnConfig& cfg) {
    if (batch.steps <= 0 || batch.batch <= 0) throw std::invalid_argument("mdrnn_training_loss: empty batch");
    if (batch.step_count <= 0.0f) throw std::invalid_argument("mdrnn_training_loss: zero live steps");
    const int B = batch.batch, H = cfg.hidden, K = cfg.mixtures;

    Node* h = g.constant(Tensor::zeros({B, H}));
    Node* c = g.constant(Tensor::zeros({B, H}));
    Node* total = g.constant(Tensor::zeros({1}));

    for (int t = 0; t < batch.steps; ++t) {
        Node* x = concat_cols(g.constant(batch.z[t]), g.constant(batch.action[t]));
        Node* gates = add(add(matmul(x, p.at("mdrnn.lstm.wx")), matmul(h, p.at("mdrnn.lstm.wh"))),
                          p.at("mdrnn.lstm.b"));
        Node* i_g = sigmoid(slice_cols(gates, 0, H));
        Node* f_g = sigmoid(slice_cols(gates, H, H));
        Node* g_g = tanh(slice_cols(gates, 2 * H, H));
        Node* o_g = sigmoid(slice_cols(gates, 3 * H, H));
        c = add(mul(f_g, c), mul(i_g, g_g));
        h = mul(o_g, tanh(c));

        // Mixture NLL over the next latent, masked where no successor exists.
        Node* log_pi = log_softmax_rows(add(matmul(h, p.at("mdrnn.pi.w")), p.at("mdrnn.pi.b"))); // [B,K]
        Node* mu = add(matmul(h, p.at("mdrnn.mu.w")), p.at("mdrnn.mu.b"));                        // [B,K*L]
        Node* ls = clamp(add(matmul(h, p.at("mdrnn.logsigma.w")), p.at("mdrnn.logsigma.b")), -5.0f, 2.0f);
        Node* zn = tile_cols(g.constant(batch.z_next[t]), K);                                     // [B,K*L]
        Node* d = mul(sub(zn, mu), exp(scale(ls, -1.0f)));
        Node* comp = add_const(sub(scale(square(d), -0.5f), ls), -0.918938533f); // per-dim log density
        Node* log_prob = add(log_pi, group_sum_cols(comp, K));                   // [B,K]
        Node* nll = scale(logsumexp_rows(log_prob), -1.0f);                      // [B]
        Node* masked_nll = mul(nll, g.constant(batch.gmm_mask[t]));

        Node* reward = add(matmul(h, p.at("mdrnn.reward.w")), p.at("mdrnn.reward.b")); // [B,1]
        Node* mse = square(sub(reshape(reward, {B}), g.constant(batch.reward[t])));

        Node* term = sigmoid(add(matmul(h, p.at("mdrnn.terminal.w")), p.at("mdrnn.terminal.b")));
        Node* pc = clamp(reshape(term, {B}), kBceEps, 1.0f - kBceEps);
        Tensor one_minus_tgt = batch.terminal[t];
        for (auto& v : one_minus_tgt.data) v = 1.0f - v;
        Node* bce = scale(add(mul(g.constant(batch.terminal[t]), log(pc)),
                              mul(g.constant(one_minus_tgt), log(add_const(scale(pc, -1.0f), 1.0f)))),
                          -1.0f);

        Node* per_step = add(masked_nll, mul(add(mse, bce), g.constant(batch.step_mask[t])));
        total = add(total, sum_all(per_step));
    }
    return scale(total, 1.0f / batch.step_count);
}

} // namespace epls
