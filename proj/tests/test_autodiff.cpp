#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "epls/adam.hpp"
#include "epls/graph.hpp"
#include "epls/mdrnn.hpp"
#include "epls/rng.hpp"
#include "epls/vae.hpp"
#include "oracle_ref.hpp"

using namespace epls;
using refimpl::Vec;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Builds loss = sum(w .* op(inputs)) on the tape, backpropagates, and checks
// every input gradient against central differences of a double-precision
// reference of the same expression. The fixed weight vector makes permuted
// or misrouted outputs visible, which a plain sum would hide.
void check_op(const std::vector<Tensor>& inputs,
              const std::function<Node*(Graph&, std::vector<Node*>&)>& apply,
              const std::function<Vec(const std::vector<Vec>&)>& ref) {
    Graph g;
    std::vector<Node*> leaves;
    for (const auto& t : inputs) leaves.push_back(g.leaf(t));
    Node* y = apply(g, leaves);

    Rng wrng(99);
    Tensor w = random_tensor(y->value.shape, wrng, 0.5f, 1.5f);
    Node* loss = sum_all(mul(y, g.constant(w)));
    g.backward(loss);

    std::vector<Vec> ri;
    ri.reserve(inputs.size());
    for (const auto& t : inputs) ri.push_back(refimpl::widen(t));
    auto eval = [&]() {
        Vec out = ref(ri);
        REQUIRE(out.size() == w.data.size());
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w.data[i];
        return s;
    };

    // forward value agreement
    const double v0 = eval();
    CHECK(std::abs(v0 - loss->value(0)) <= 1e-4 * std::max(1.0, std::abs(v0)));

    const double h = 1e-4;
    for (std::size_t a = 0; a < ri.size(); ++a) {
        for (std::size_t i = 0; i < ri[a].size(); ++i) {
            const double saved = ri[a][i];
            ri[a][i] = saved + h;
            const double up = eval();
            ri[a][i] = saved - h;
            const double dn = eval();
            ri[a][i] = saved;
            const double fd = (up - dn) / (2.0 * h);
            const double an = leaves[a]->grad.data[i];
            const double mag = std::max({std::abs(fd), std::abs(an), 1e-4});
            INFO("input ", a, " element ", i, " analytic ", an, " fd ", fd);
            CHECK(std::abs(an - fd) / mag < 1e-4);
        }
    }
}

Vec ref_map(const Vec& x, double (*f)(double)) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return y;
}

} // namespace

TEST_CASE("gradients: elementwise unary ops") {
    Rng rng(42);
    const Tensor x = random_tensor({2, 5}, rng, -1.5f, 1.5f);
    auto unary = [&](Node* (*op)(Node*), double (*f)(double)) {
        check_op({x}, [=](Graph&, std::vector<Node*>& in) { return op(in[0]); },
                 [=](const std::vector<Vec>& in) { return ref_map(in[0], f); });
    };
    unary(&epls::tanh, [](double v) { return std::tanh(v); });
    unary(&epls::sigmoid, [](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    unary(&epls::exp, [](double v) { return std::exp(v); });
    unary(&epls::square, [](double v) { return v * v; });

    // keep inputs away from the relu/clamp kinks where FD is ill-defined
    Tensor xp = x;
    for (auto& v : xp.data) v = (std::abs(v) < 0.05f ? 0.3f : v);
    check_op({xp}, [](Graph&, std::vector<Node*>& in) { return relu(in[0]); },
             [](const std::vector<Vec>& in) {
                 return ref_map(in[0], +[](double v) { return v > 0.0 ? v : 0.0; });
             });
    check_op({xp}, [](Graph&, std::vector<Node*>& in) { return clamp(in[0], -1.0f, 1.0f); },
             [](const std::vector<Vec>& in) {
                 return ref_map(in[0], +[](double v) { return refimpl::clampd(v, -1.0, 1.0); });
             });

    const Tensor pos = random_tensor({3, 4}, rng, 0.2f, 3.0f);
    check_op({pos}, [](Graph&, std::vector<Node*>& in) { return log(in[0]); },
             [](const std::vector<Vec>& in) { return ref_map(in[0], +[](double v) { return std::log(v); }); });

    check_op({x}, [](Graph&, std::vector<Node*>& in) { return scale(in[0], -2.5f); },
             [](const std::vector<Vec>& in) {
                 Vec y = in[0];
                 for (auto& v : y) v *= -2.5;
                 return y;
             });
    check_op({x}, [](Graph&, std::vector<Node*>& in) { return add_const(in[0], 0.75f); },
             [](const std::vector<Vec>& in) {
                 Vec y = in[0];
                 for (auto& v : y) v += 0.75;
                 return y;
             });
}

TEST_CASE("gradients: binary elementwise and broadcast") {
    Rng rng(7);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({3, 4}, rng);
    const Tensor row = random_tensor({4}, rng);
    const Tensor scalar = random_tensor({1}, rng);

    auto binary = [&](Node* (*op)(Node*, Node*), double (*f)(double, double), const Tensor& rhs,
                      bool broadcast) {
        check_op({a, rhs}, [=](Graph&, std::vector<Node*>& in) { return op(in[0], in[1]); },
                 [=](const std::vector<Vec>& in) {
                     Vec y(in[0].size());
                     for (std::size_t i = 0; i < y.size(); ++i) {
                         const double rv = broadcast
                                               ? (in[1].size() == 1 ? in[1][0] : in[1][i % in[1].size()])
                                               : in[1][i];
                         y[i] = f(in[0][i], rv);
                     }
                     return y;
                 });
    };
    binary(&epls::add, [](double x, double y) { return x + y; }, b, false);
    binary(&epls::sub, [](double x, double y) { return x - y; }, b, false);
    binary(&epls::mul, [](double x, double y) { return x * y; }, b, false);
    binary(&epls::add, [](double x, double y) { return x + y; }, row, true);
    binary(&epls::mul, [](double x, double y) { return x * y; }, row, true);
    binary(&epls::add, [](double x, double y) { return x + y; }, scalar, true);
}

TEST_CASE("gradients: matmul both operands") {
    Rng rng(11);
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({4, 2}, rng);
    check_op({a, b}, [](Graph&, std::vector<Node*>& in) { return matmul(in[0], in[1]); },
             [](const std::vector<Vec>& in) {
                 Vec y(3 * 2, 0.0);
                 for (int i = 0; i < 3; ++i)
                     for (int k = 0; k < 4; ++k)
                         for (int j = 0; j < 2; ++j) y[i * 2 + j] += in[0][i * 4 + k] * in[1][k * 2 + j];
                 return y;
             });
}

TEST_CASE("gradients: structural ops") {
    Rng rng(13);
    const Tensor a = random_tensor({2, 6}, rng);
    const Tensor b = random_tensor({2, 3}, rng);

    check_op({a}, [](Graph&, std::vector<Node*>& in) { return slice_cols(in[0], 1, 3); },
             [](const std::vector<Vec>& in) {
                 Vec y;
                 for (int r = 0; r < 2; ++r)
                     for (int c = 1; c < 4; ++c) y.push_back(in[0][r * 6 + c]);
                 return y;
             });
    check_op({a, b}, [](Graph&, std::vector<Node*>& in) { return concat_cols(in[0], in[1]); },
             [](const std::vector<Vec>& in) {
                 Vec y;
                 for (int r = 0; r < 2; ++r) {
                     for (int c = 0; c < 6; ++c) y.push_back(in[0][r * 6 + c]);
                     for (int c = 0; c < 3; ++c) y.push_back(in[1][r * 3 + c]);
                 }
                 return y;
             });
    check_op({b}, [](Graph&, std::vector<Node*>& in) { return tile_cols(in[0], 2); },
             [](const std::vector<Vec>& in) {
                 Vec y;
                 for (int r = 0; r < 2; ++r)
                     for (int rep = 0; rep < 2; ++rep)
                         for (int c = 0; c < 3; ++c) y.push_back(in[0][r * 3 + c]);
                 return y;
             });
    check_op({a}, [](Graph&, std::vector<Node*>& in) { return group_sum_cols(in[0], 2); },
             [](const std::vector<Vec>& in) {
                 Vec y(2 * 2, 0.0);
                 for (int r = 0; r < 2; ++r)
                     for (int gi = 0; gi < 2; ++gi)
                         for (int c = 0; c < 3; ++c) y[r * 2 + gi] += in[0][r * 6 + gi * 3 + c];
                 return y;
             });
    check_op({a}, [](Graph&, std::vector<Node*>& in) { return reshape(in[0], {12}); },
             [](const std::vector<Vec>& in) { return in[0]; });
    check_op({a}, [](Graph&, std::vector<Node*>& in) { return sum_all(in[0]); },
             [](const std::vector<Vec>& in) {
                 double s = 0.0;
                 for (double v : in[0]) s += v;
                 return Vec{s};
             });
    check_op({a}, [](Graph&, std::vector<Node*>& in) { return mean_all(in[0]); },
             [](const std::vector<Vec>& in) {
                 double s = 0.0;
                 for (double v : in[0]) s += v;
                 return Vec{s / static_cast<double>(in[0].size())};
             });
}

TEST_CASE("gradients: log-sum-exp family") {
    Rng rng(17);
    const Tensor v = random_tensor({5}, rng, -2.0f, 2.0f);
    const Tensor m = random_tensor({3, 4}, rng, -2.0f, 2.0f);

    auto lse = [](const Vec& x) {
        double mx = x[0];
        for (double e : x) mx = std::max(mx, e);
        double s = 0.0;
        for (double e : x) s += std::exp(e - mx);
        return mx + std::log(s);
    };

    check_op({v}, [](Graph&, std::vector<Node*>& in) { return logsumexp(in[0]); },
             [&](const std::vector<Vec>& in) { return Vec{lse(in[0])}; });
    check_op({m}, [](Graph&, std::vector<Node*>& in) { return logsumexp_rows(in[0]); },
             [&](const std::vector<Vec>& in) {
                 Vec y;
                 for (int r = 0; r < 3; ++r) y.push_back(lse(Vec(in[0].begin() + r * 4, in[0].begin() + (r + 1) * 4)));
                 return y;
             });
    check_op({m}, [](Graph&, std::vector<Node*>& in) { return log_softmax_rows(in[0]); },
             [&](const std::vector<Vec>& in) {
                 Vec y(in[0].size());
                 for (int r = 0; r < 3; ++r) {
                     const Vec rowv(in[0].begin() + r * 4, in[0].begin() + (r + 1) * 4);
                     const double z = lse(rowv);
                     for (int c = 0; c < 4; ++c) y[r * 4 + c] = rowv[c] - z;
                 }
                 return y;
             });
}

TEST_CASE("gradients: composed VAE loss matches finite differences") {
    VaeConfig cfg;
    cfg.obs_dim = 16;
    cfg.hidden1 = 12;
    cfg.hidden2 = 8;
    cfg.latent = 4;
    cfg.beta = 0.7f;
    Rng rng(133);
    Vae vae = Vae::init(cfg, rng);

    const int B = 3;
    Tensor obs = random_tensor({B, cfg.obs_dim}, rng, 0.0f, 1.0f);
    Tensor eps = random_tensor({B, cfg.latent}, rng, -1.0f, 1.0f);

    Graph g;
    BoundVae bound = bind_vae(g, vae);
    Node* loss = vae_training_loss(g, bound, obs, eps, cfg);
    g.backward(loss);

    std::vector<std::pair<std::string, Tensor>> analytic;
    for (const auto& [name, node] : bound.leaves) analytic.emplace_back(name, node->grad);

    refimpl::VaeRef ref(vae);
    // Finite differences are only valid away from relu/clamp kinks, so this
    // instance must keep a margin well above the probe step.
    double margin = 1e9;
    const double v = ref.loss(obs, eps, &margin);
    REQUIRE(margin > 1e-3);
    CHECK(std::abs(v - loss->value(0)) < 1e-3 * std::abs(v));
    auto rep = refimpl::compare_gradients(ref.params(), analytic, [&]() { return ref.loss(obs, eps); });
    INFO("worst ", rep.worst_param, "[", rep.worst_index, "] analytic ", rep.worst_analytic, " fd ",
         rep.worst_fd, " over ", rep.checked, " entries");
    CHECK(rep.max_rel < 1e-4);
    CHECK(rep.max_small_abs < 1e-6);
}

TEST_CASE("gradients: composed dynamics loss matches finite differences") {
    MdrnnConfig cfg;
    cfg.latent = 4;
    cfg.action_dim = 3;
    cfg.hidden = 8;
    cfg.mixtures = 2;
    Rng rng(321);
    Mdrnn m = Mdrnn::init(cfg, rng);

    const int B = 2, T = 3;
    MdrnnBatch batch;
    batch.batch = B;
    batch.steps = T;
    for (int t = 0; t < T; ++t) {
        batch.z.push_back(random_tensor({B, cfg.latent}, rng));
        batch.action.push_back(random_tensor({B, cfg.action_dim}, rng, 0.0f, 1.0f));
        batch.z_next.push_back(random_tensor({B, cfg.latent}, rng));
        batch.reward.push_back(random_tensor({B}, rng, -0.5f, 0.5f));
        Tensor term = Tensor::zeros({B});
        term(1) = (t == 1) ? 1.0f : 0.0f; // sequence 1 terminates at step 1
        batch.terminal.push_back(term);
        Tensor sm = Tensor::full({B}, 1.0f);
        Tensor gm = Tensor::full({B}, 1.0f);
        if (t == T - 1) gm(0) = 0.0f;        // no successor on the final step
        if (t >= 2) sm(1) = gm(1) = 0.0f;    // sequence 1 is shorter
        if (t == 1) gm(1) = 0.0f;
        batch.step_mask.push_back(sm);
        batch.gmm_mask.push_back(gm);
    }
    for (int t = 0; t < T; ++t)
        for (int s = 0; s < B; ++s) batch.step_count += batch.step_mask[t](s);

    Graph g;
    BoundMdrnn bound = bind_mdrnn(g, m);
    Node* loss = mdrnn_training_loss(g, bound, batch, cfg);
    g.backward(loss);

    std::vector<std::pair<std::string, Tensor>> analytic;
    for (const auto& [name, node] : bound.leaves) analytic.emplace_back(name, node->grad);

    refimpl::MdrnnRef ref(m);
    double margin = 1e9;
    const double v = ref.loss(batch, &margin);
    REQUIRE(margin > 1e-3);
    CHECK(std::abs(v - loss->value(0)) < 1e-3 * std::abs(v));
    auto rep = refimpl::compare_gradients(ref.params(), analytic, [&]() { return ref.loss(batch); });
    INFO("worst ", rep.worst_param, "[", rep.worst_index, "] analytic ", rep.worst_analytic, " fd ",
         rep.worst_fd, " over ", rep.checked, " entries");
    CHECK(rep.max_rel < 1e-4);
    CHECK(rep.max_small_abs < 1e-6);
}

TEST_CASE("tape: gradient accumulation and zeroing") {
    Graph g;
    Node* x = g.leaf(Tensor({2}, {1.0f, 2.0f}));
    Node* loss = sum_all(square(x));
    g.backward(loss);
    CHECK(x->grad(0) == doctest::Approx(2.0f));
    CHECK(x->grad(1) == doctest::Approx(4.0f));

    g.backward(loss); // accumulates
    CHECK(x->grad(0) == doctest::Approx(4.0f));
    CHECK(x->grad(1) == doctest::Approx(8.0f));

    g.zero_grad();
    g.backward(loss);
    CHECK(x->grad(0) == doctest::Approx(2.0f));
    CHECK(x->grad(1) == doctest::Approx(4.0f));
}

TEST_CASE("tape: constants receive no gradient path and reuse is shared") {
    Graph g;
    Node* x = g.leaf(Tensor({2}, {3.0f, -1.0f}));
    Node* y = add(x, x); // same node used twice
    g.backward(sum_all(y));
    CHECK(x->grad(0) == doctest::Approx(2.0f));
    CHECK(x->grad(1) == doctest::Approx(2.0f));

    Graph g2;
    Node* c = g2.constant(Tensor({1}, {5.0f}));
    Node* z = g2.leaf(Tensor({1}, {2.0f}));
    Node* loss = mul(z, c);
    g2.backward(loss);
    CHECK(z->grad(0) == doctest::Approx(5.0f));
}

TEST_CASE("tape: shape and domain violations throw") {
    Graph g;
    Node* a = g.leaf(Tensor::zeros({2, 3}));
    Node* b = g.leaf(Tensor::zeros({4, 2}));
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
    Node* c = g.leaf(Tensor::zeros({2, 2}));
    CHECK_THROWS_AS(add(a, c), std::invalid_argument);
    Node* neg = g.leaf(Tensor({1}, {-1.0f}));
    CHECK_THROWS_AS(log(neg), std::domain_error);
    Node* vec = g.leaf(Tensor({3}, {1.0f, 2.0f, 3.0f}));
    CHECK_THROWS_AS(g.backward(vec), std::invalid_argument); // non-scalar loss
    CHECK_THROWS_AS(reshape(a, {5}), std::invalid_argument);
    CHECK_THROWS_AS(slice_cols(a, 2, 5), std::invalid_argument);
    CHECK_THROWS_AS(group_sum_cols(a, 2), std::invalid_argument);
}

TEST_CASE("adam: trajectory matches a double-precision mirror") {
    AdamConfig cfg;
    cfg.lr = 0.05f;
    Adam opt(cfg);
    Tensor p({3}, {1.0f, -2.0f, 0.5f});
    Vec ref = {1.0, -2.0, 0.5};
    Vec m(3, 0.0), v(3, 0.0);

    for (int t = 1; t <= 25; ++t) {
        Tensor grad = Tensor::zeros({3});
        for (int i = 0; i < 3; ++i) grad(i) = p(i); // gradient of 0.5*sum(x^2)
        opt.step("p", p, grad);

        const double c1 = 1.0 - std::pow(0.9, t);
        const double c2 = 1.0 - std::pow(0.999, t);
        for (int i = 0; i < 3; ++i) {
            const double gd = ref[i];
            m[i] = 0.9 * m[i] + 0.1 * gd;
            v[i] = 0.999 * v[i] + 0.001 * gd * gd;
            ref[i] -= 0.05 * (m[i] / c1) / (std::sqrt(v[i] / c2) + static_cast<double>(cfg.eps));
        }
        for (int i = 0; i < 3; ++i) CHECK(std::abs(p(i) - ref[i]) < 1e-5);
    }
    CHECK(opt.step_count("p") == 25);
    CHECK(opt.step_count("unknown") == 0);
}

TEST_CASE("adam: first step size equals the learning rate under bias correction") {
    Adam opt(AdamConfig{0.01f, 0.9f, 0.999f, 1e-8f});
    Tensor p({1}, {0.0f});
    Tensor grad({1}, {42.0f});
    opt.step("p", p, grad);
    // mhat = g, vhat = g^2, so the first update is lr * g / (|g| + eps)
    CHECK(p(0) == doctest::Approx(-0.01f).epsilon(1e-4));
}

TEST_CASE("adam: non-finite gradients reject the update and name the parameter") {
    Adam opt;
    Tensor p({2}, {1.0f, 2.0f});
    Tensor bad({2}, {0.0f, std::numeric_limits<float>::quiet_NaN()});
    bool threw = false;
    try {
        opt.step("enc.w", p, bad);
    } catch (const std::runtime_error& e) {
        threw = true;
        CHECK(std::string(e.what()).find("enc.w") != std::string::npos);
    }
    CHECK(threw);
    CHECK(p(0) == 1.0f);
    CHECK(p(1) == 2.0f);
    CHECK(opt.step_count("enc.w") == 0);

    Tensor inf({2}, {std::numeric_limits<float>::infinity(), 0.0f});
    CHECK_THROWS_AS(opt.step("enc.w", p, inf), std::runtime_error);
    Tensor wrong = Tensor::zeros({3});
    CHECK_THROWS_AS(opt.step("enc.w", p, wrong), std::invalid_argument);
}

TEST_CASE("rng: determinism and stream derivation") {
    Rng a(2024), b(2024);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng u(5);
    float mn = 1.0f, mx = 0.0f;
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const float v = u.uniform();
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        sum += v;
    }
    CHECK(mn >= 0.0f);
    CHECK(mx < 1.0f);
    CHECK(std::abs(sum / n - 0.5) < 0.01);

    Rng g2(6);
    double s = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const float v = g2.normal();
        s += v;
        sq += static_cast<double>(v) * v;
    }
    CHECK(std::abs(s / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);

    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(7, "tag", 3) == derive_seed(7, "tag", 3));
}
