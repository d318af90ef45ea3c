#include "epls/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "epls/adam.hpp"
#include "epls/checkpoint.hpp"

namespace fs = std::filesystem;

namespace epls {

namespace {

std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

void fisher_yates(std::vector<std::uint32_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.index(i)]);
}

struct Stats {
    float mean, stddev;
};

Stats population_stats(const std::vector<float>& xs) {
    double sum = 0;
    for (float x : xs) sum += x;
    const double mean = xs.empty() ? 0.0 : sum / xs.size();
    double sq = 0;
    for (float x : xs) sq += (x - mean) * (x - mean);
    const double var = xs.empty() ? 0.0 : sq / xs.size();
    return {static_cast<float>(mean), static_cast<float>(std::sqrt(var))};
}

} // namespace

Policy parse_policy(const std::string& name) {
    if (name == "random") return Policy::random;
    if (name == "plan") return Policy::plan;
    if (name == "oracle") return Policy::oracle;
    throw std::invalid_argument("unknown policy '" + name + "' (expected random|plan|oracle)");
}

std::string policy_name(Policy p) {
    switch (p) {
    case Policy::random: return "random";
    case Policy::plan: return "plan";
    default: return "oracle";
    }
}

Action RandomDriver::act() {
    if (!have_ || rng_.uniform() < 0.15f) {
        current_.steer = rng_.uniform(-1.0f, 1.0f);
        current_.accel = rng_.uniform(0.0f, 1.0f);
        current_.brake = rng_.uniform() < 0.7f ? 0.0f : rng_.uniform(0.0f, 0.5f);
        have_ = true;
    }
    return current_;
}

std::vector<Rollout> collect_rollouts(const RunConfig& cfg, Policy policy, int n, int max_steps,
                                      std::uint64_t seed, const Vae* vae, const Mdrnn* mdrnn) {
    if (n < 1) throw std::invalid_argument("collect_rollouts: need at least one episode");
    if (max_steps < 1) throw std::invalid_argument("collect_rollouts: need at least one step");
    if (policy == Policy::plan && (!vae || !mdrnn))
        throw std::invalid_argument("collect_rollouts: plan policy needs a trained model");

    const EnvConfig ecfg = cfg.env();
    const PlannerConfig pcfg = cfg.planner();
    std::vector<Rollout> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        TrackSpec track = generate_track(seed + static_cast<std::uint64_t>(i), ecfg);
        Environment env(ecfg, track);
        Observation obs = env.reset();

        const std::uint64_t policy_seed = derive_seed(seed, "episode-policy", i);
        RandomDriver driver(policy_seed);
        std::optional<PlanningAgent> agent;
        std::optional<OraclePlanningAgent> oracle;
        if (policy == Policy::plan) {
            agent.emplace(*vae, *mdrnn, pcfg, policy_seed);
            agent->begin_episode();
        } else if (policy == Policy::oracle) {
            oracle.emplace(ecfg, env.track(), cfg.oracle_planner(), policy_seed);
            oracle->begin_episode();
        }

        Rollout r;
        for (int t = 0; t < max_steps; ++t) {
            Action a;
            switch (policy) {
            case Policy::random: a = driver.act(); break;
            case Policy::plan: a = agent->act(obs); break;
            case Policy::oracle: a = oracle->act(env.car()); break;
            }
            StepResult s = env.step(a);
            r.obs.push_back(std::move(obs));
            r.actions.push_back(a);
            r.rewards.push_back(s.reward);
            r.terminals.push_back(s.terminal ? 1 : 0);
            obs = std::move(s.obs);
            if (s.terminal) break;
        }
        out.push_back(std::move(r));
    }
    return out;
}

void save_rollout_dir(const std::string& dir, const std::vector<Rollout>& rollouts,
                      const std::vector<std::string>& policies) {
    if (rollouts.size() != policies.size())
        throw std::invalid_argument("save_rollout_dir: one policy tag per rollout required");
    fs::create_directories(dir);
    std::vector<ManifestEntry> manifest;
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "ep_%04zu.roll", i);
        save_rollout(dir + "/" + name, rollouts[i]);
        manifest.push_back({name, policies[i]});
    }
    write_manifest(dir + "/manifest.txt", manifest);
}

std::vector<Rollout> load_rollout_dir(const std::string& dir) {
    const auto manifest = load_manifest(dir + "/manifest.txt");
    std::vector<Rollout> out;
    out.reserve(manifest.size());
    for (const auto& e : manifest) out.push_back(load_rollout(dir + "/" + e.file));
    return out;
}

Vae train_vae(const std::vector<Rollout>& data, const RunConfig& cfg, TrainTrace* trace) {
    if (data.empty()) throw std::invalid_argument("train_vae: empty dataset");
    const VaeConfig vcfg = cfg.vae();
    Rng init_rng = derive_rng(cfg.seed, "vae-init");
    Vae vae = Vae::init(vcfg, init_rng);

    std::vector<const Observation*> frames;
    for (const auto& r : data)
        for (const auto& o : r.obs) frames.push_back(&o);
    if (frames.empty()) throw std::invalid_argument("train_vae: dataset has no frames");

    Adam opt(AdamConfig{cfg.vae_lr, 0.9f, 0.999f, 1e-8f});
    Rng shuffle_rng = derive_rng(cfg.seed, "vae-shuffle");
    Rng eps_rng = derive_rng(cfg.seed, "vae-eps");
    std::vector<std::uint32_t> idx(frames.size());
    std::iota(idx.begin(), idx.end(), 0u);

    for (int epoch = 0; epoch < cfg.vae_epochs; ++epoch) {
        fisher_yates(idx, shuffle_rng);
        double loss_sum = 0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < idx.size(); start += cfg.vae_batch) {
            const int B = static_cast<int>(std::min<std::size_t>(cfg.vae_batch, idx.size() - start));
            Tensor obs = Tensor::zeros({B, vcfg.obs_dim});
            Tensor eps = Tensor::zeros({B, vcfg.latent});
            for (int b = 0; b < B; ++b) {
                const Observation& o = *frames[idx[start + b]];
                std::copy(o.begin(), o.end(), obs.data.begin() + static_cast<std::size_t>(b) * vcfg.obs_dim);
            }
            for (auto& e : eps.data) e = eps_rng.normal();

            Graph g;
            BoundVae bound = bind_vae(g, vae);
            Node* loss = vae_training_loss(g, bound, obs, eps, vcfg);
            g.backward(loss);
            for (auto& [name, t] : vae.named()) opt.step(name, *t, bound.at(name)->grad);
            loss_sum += static_cast<double>(loss->value(0)) * B;
            seen += B;
        }
        if (trace) trace->epoch_loss.push_back(static_cast<float>(loss_sum / seen));
    }
    return vae;
}

std::vector<LatentRollout> encode_rollouts(const Vae& vae, const std::vector<Rollout>& data) {
    std::vector<LatentRollout> out;
    out.reserve(data.size());
    for (const auto& r : data) {
        LatentRollout lr;
        lr.z.reserve(r.obs.size());
        for (const auto& o : r.obs) lr.z.push_back(vae.encode(o).mu);
        lr.actions = r.actions;
        lr.rewards = r.rewards;
        lr.terminals = r.terminals;
        out.push_back(std::move(lr));
    }
    return out;
}

namespace {

struct Window {
    const LatentRollout* r;
    int start, len;
};

void run_mdrnn_epochs(Mdrnn& model, const std::vector<LatentRollout>& data, const RunConfig& cfg,
                      int epochs, std::uint64_t seed, TrainTrace* trace) {
    const MdrnnConfig mcfg = model.cfg;
    std::vector<Window> windows;
    bool any_pair = false;
    for (const auto& r : data) {
        if (r.steps() >= 2) any_pair = true;
        for (int s = 0; s < r.steps(); s += cfg.bptt_len)
            windows.push_back({&r, s, std::min(cfg.bptt_len, r.steps() - s)});
    }
    if (windows.empty()) throw std::invalid_argument("train_mdrnn: empty dataset");
    if (!any_pair) throw std::invalid_argument("train_mdrnn: need rollouts of length >= 2");

    Adam opt(AdamConfig{cfg.mdrnn_lr, 0.9f, 0.999f, 1e-8f});
    Rng shuffle_rng(derive_seed(seed, "shuffle"));
    std::vector<std::uint32_t> idx(windows.size());
    std::iota(idx.begin(), idx.end(), 0u);
    const int L = mcfg.latent, A = mcfg.action_dim;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        fisher_yates(idx, shuffle_rng);
        double loss_sum = 0, steps_seen = 0;
        for (std::size_t start = 0; start < idx.size(); start += cfg.mdrnn_batch) {
            const int B = static_cast<int>(std::min<std::size_t>(cfg.mdrnn_batch, idx.size() - start));
            int steps = 0;
            for (int b = 0; b < B; ++b) steps = std::max(steps, windows[idx[start + b]].len);

            MdrnnBatch batch;
            batch.steps = steps;
            batch.batch = B;
            for (int t = 0; t < steps; ++t) {
                batch.z.push_back(Tensor::zeros({B, L}));
                batch.action.push_back(Tensor::zeros({B, A}));
                batch.z_next.push_back(Tensor::zeros({B, L}));
                batch.reward.push_back(Tensor::zeros({B}));
                batch.terminal.push_back(Tensor::zeros({B}));
                batch.step_mask.push_back(Tensor::zeros({B}));
                batch.gmm_mask.push_back(Tensor::zeros({B}));
            }
            for (int b = 0; b < B; ++b) {
                const Window& w = windows[idx[start + b]];
                batch.step_count += static_cast<float>(w.len);
                for (int t = 0; t < w.len; ++t) {
                    const int g = w.start + t;
                    std::copy(w.r->z[g].begin(), w.r->z[g].end(),
                              batch.z[t].data.begin() + static_cast<std::size_t>(b) * L);
                    float* arow = &batch.action[t].data[static_cast<std::size_t>(b) * A];
                    arow[0] = w.r->actions[g].steer;
                    arow[1] = w.r->actions[g].accel;
                    arow[2] = w.r->actions[g].brake;
                    batch.reward[t](b) = w.r->rewards[g];
                    batch.terminal[t](b) = w.r->terminals[g] ? 1.0f : 0.0f;
                    batch.step_mask[t](b) = 1.0f;
                    if (g + 1 < w.r->steps()) {
                        std::copy(w.r->z[g + 1].begin(), w.r->z[g + 1].end(),
                                  batch.z_next[t].data.begin() + static_cast<std::size_t>(b) * L);
                        batch.gmm_mask[t](b) = 1.0f;
                    }
                }
            }

            Graph g;
            BoundMdrnn bound = bind_mdrnn(g, model);
            Node* loss = mdrnn_training_loss(g, bound, batch, mcfg);
            g.backward(loss);
            for (auto& [name, t] : model.named()) opt.step(name, *t, bound.at(name)->grad);
            loss_sum += static_cast<double>(loss->value(0)) * batch.step_count;
            steps_seen += batch.step_count;
        }
        if (trace) trace->epoch_loss.push_back(static_cast<float>(loss_sum / steps_seen));
    }
}

} // namespace

Mdrnn train_mdrnn(const std::vector<LatentRollout>& data, const RunConfig& cfg, TrainTrace* trace) {
    Rng init_rng = derive_rng(cfg.seed, "mdrnn-init");
    Mdrnn model = Mdrnn::init(cfg.mdrnn(), init_rng);
    run_mdrnn_epochs(model, data, cfg, cfg.mdrnn_epochs, derive_seed(cfg.seed, "mdrnn-train"), trace);
    return model;
}

void train_mdrnn_more(Mdrnn& model, const std::vector<LatentRollout>& data, const RunConfig& cfg,
                      int epochs, std::uint64_t seed, TrainTrace* trace) {
    run_mdrnn_epochs(model, data, cfg, epochs, seed, trace);
}

namespace {

template <typename MakeAgent>
EvalReport evaluate_generic(const RunConfig& cfg, int n_tracks, std::uint64_t seed, MakeAgent make_agent) {
    if (n_tracks < 1) throw std::invalid_argument("evaluate: need at least one track");
    const auto t0 = std::chrono::steady_clock::now();
    const EnvConfig ecfg = cfg.env();
    EvalReport rep;
    for (int i = 0; i < n_tracks; ++i) {
        TrackSpec track = generate_track(derive_seed(seed, "eval-track", i), ecfg);
        Environment env(ecfg, std::move(track));
        Observation obs = env.reset();
        auto policy = make_agent(env, derive_seed(seed, "eval-agent", i));
        double total = 0;
        while (true) {
            StepResult s = env.step(policy(obs));
            total += s.reward;
            obs = std::move(s.obs);
            if (s.terminal) break;
        }
        rep.scores.push_back(static_cast<float>(total));
    }
    const Stats st = population_stats(rep.scores);
    rep.mean = st.mean;
    rep.stddev = st.stddev;
    rep.config_text = cfg.to_text();
    rep.wall_clock_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

} // namespace

EvalReport evaluate(const RunConfig& cfg, const Vae& vae, const Mdrnn& model, int n_tracks,
                    std::uint64_t seed) {
    const PlannerConfig pcfg = cfg.planner();
    return evaluate_generic(cfg, n_tracks, seed, [&](Environment&, std::uint64_t agent_seed) {
        auto agent = std::make_shared<PlanningAgent>(vae, model, pcfg, agent_seed);
        agent->begin_episode();
        return [agent](const Observation& obs) { return agent->act(obs); };
    });
}

EvalReport evaluate_random(const RunConfig& cfg, int n_tracks, std::uint64_t seed) {
    return evaluate_generic(cfg, n_tracks, seed, [&](Environment&, std::uint64_t agent_seed) {
        auto driver = std::make_shared<RandomDriver>(agent_seed);
        return [driver](const Observation&) { return driver->act(); };
    });
}

EvalReport evaluate_oracle(const RunConfig& cfg, int n_tracks, std::uint64_t seed) {
    const PlannerConfig pcfg = cfg.oracle_planner();
    return evaluate_generic(cfg, n_tracks, seed, [&](Environment& env, std::uint64_t agent_seed) {
        auto agent = std::make_shared<OraclePlanningAgent>(env.config(), env.track(), pcfg, agent_seed);
        agent->begin_episode();
        Environment* e = &env;
        return [agent, e](const Observation&) { return agent->act(e->car()); };
    });
}

HeldOutMetrics held_out_metrics(const Vae& vae, const Mdrnn& model, const std::vector<Rollout>& held) {
    const auto latents = encode_rollouts(vae, held);
    double nll_sum = 0, pers_sum = 0;
    std::int64_t pairs = 0;
    double mse_sum = 0, r_sum = 0, r_sq = 0;
    std::int64_t steps = 0;
    constexpr double kHalfLog2Pi = 0.9189385332046727;

    for (const auto& r : latents) {
        WorldModelState st = model.initial_state();
        for (int t = 0; t < r.steps(); ++t) {
            auto [pred, next] = model.step(r.z[t], r.actions[t], st);
            st = std::move(next);
            const double dr = pred.reward_mean - r.rewards[t];
            mse_sum += dr * dr;
            r_sum += r.rewards[t];
            r_sq += static_cast<double>(r.rewards[t]) * r.rewards[t];
            ++steps;
            if (t + 1 < r.steps()) {
                nll_sum += gmm_nll(pred.gmm, r.z[t + 1]);
                double p = 0;
                for (std::size_t l = 0; l < r.z[t].size(); ++l) {
                    const double d = r.z[t + 1][l] - r.z[t][l];
                    p += 0.5 * d * d + kHalfLog2Pi;
                }
                pers_sum += p;
                ++pairs;
            }
        }
    }
    if (steps == 0) throw std::invalid_argument("held_out_metrics: empty dataset");
    HeldOutMetrics m;
    m.gmm_nll = static_cast<float>(pairs ? nll_sum / pairs : 0.0);
    m.persistence_nll = static_cast<float>(pairs ? pers_sum / pairs : 0.0);
    m.reward_mse = static_cast<float>(mse_sum / steps);
    const double mean_r = r_sum / steps;
    m.reward_var = static_cast<float>(r_sq / steps - mean_r * mean_r);
    return m;
}

NoniterativeResult run_noniterative(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto rollouts = collect_rollouts(cfg, Policy::random, cfg.rollouts, cfg.rollout_steps,
                                     derive_seed(cfg.seed, "collect-random"));
    save_rollout_dir(out_dir + "/rollouts", rollouts,
                     std::vector<std::string>(rollouts.size(), "random"));

    TrainTrace vae_trace;
    Vae vae = train_vae(rollouts, cfg, &vae_trace);
    write_loss_csv(out_dir + "/vae_loss.csv", vae_trace);

    const auto latents = encode_rollouts(vae, rollouts);
    TrainTrace mdrnn_trace;
    Mdrnn model = train_mdrnn(latents, cfg, &mdrnn_trace);
    write_loss_csv(out_dir + "/mdrnn_loss.csv", mdrnn_trace);

    save_model(out_dir + "/model.ckpt", vae, model);
    EvalReport rep = evaluate(cfg, vae, model, cfg.eval_tracks, derive_seed(cfg.seed, "eval"));
    write_eval_report(out_dir + "/report.csv", rep);
    return {std::move(vae), std::move(model), std::move(rep)};
}

IterativeResult run_iterative(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    ReplayBuffer buffer(cfg.buffer_capacity);
    auto initial = collect_rollouts(cfg, Policy::random, cfg.rollouts, cfg.rollout_steps,
                                    derive_seed(cfg.seed, "collect-random"));
    save_rollout_dir(out_dir + "/rollouts/iter_0", initial,
                     std::vector<std::string>(initial.size(), "random"));
    for (auto& r : initial) buffer.push(std::move(r));

    TrainTrace vae_trace;
    const auto base = buffer.snapshot();
    Vae vae = train_vae(base, cfg, &vae_trace); // trained once, then frozen
    write_loss_csv(out_dir + "/vae_loss.csv", vae_trace);

    IterativeResult result{vae, Mdrnn(cfg.mdrnn()), {}};
    {
        TrainTrace trace;
        result.mdrnn = train_mdrnn(encode_rollouts(vae, base), cfg, &trace);
        write_loss_csv(out_dir + "/mdrnn_loss_iter0.csv", trace);
    }

    const std::uint64_t eval_seed = derive_seed(cfg.seed, "eval"); // same tracks every iteration
    auto flush_iteration = [&](int iter) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s/model_iter%d.ckpt", out_dir.c_str(), iter);
        save_model(buf, vae, result.mdrnn);
        EvalReport rep = evaluate(cfg, vae, result.mdrnn, cfg.eval_tracks, eval_seed);
        std::snprintf(buf, sizeof buf, "%s/report_iter%d.csv", out_dir.c_str(), iter);
        write_eval_report(buf, rep);
        result.reports.push_back(std::move(rep));
        write_iterations_csv(out_dir + "/iterations.csv", result.reports);
    };
    flush_iteration(0);

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        auto fresh = collect_rollouts(cfg, Policy::plan, cfg.iter_rollouts, cfg.rollout_steps,
                                      derive_seed(cfg.seed, "iter-collect", iter), &vae, &result.mdrnn);
        char dir[64];
        std::snprintf(dir, sizeof dir, "%s/rollouts/iter_%d", out_dir.c_str(), iter);
        save_rollout_dir(dir, fresh, std::vector<std::string>(fresh.size(), "plan"));
        for (auto& r : fresh) buffer.push(std::move(r));

        TrainTrace trace;
        train_mdrnn_more(result.mdrnn, encode_rollouts(vae, buffer.snapshot()), cfg,
                         cfg.mdrnn_iter_epochs, derive_seed(cfg.seed, "iter-train", iter), &trace);
        char loss_path[64];
        std::snprintf(loss_path, sizeof loss_path, "%s/mdrnn_loss_iter%d.csv", out_dir.c_str(), iter);
        write_loss_csv(loss_path, trace);
        flush_iteration(iter);
    }
    result.vae = std::move(vae);
    return result;
}

ExpertMixResult run_expert_mix(const RunConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const int half = cfg.rollouts / 2;
    if (half < 1) throw std::invalid_argument("run_expert_mix: need at least two rollouts");
    auto mix = collect_rollouts(cfg, Policy::random, half, cfg.rollout_steps,
                                derive_seed(cfg.seed, "mix-random"));
    auto expert = collect_rollouts(cfg, Policy::oracle, half, cfg.rollout_steps,
                                   derive_seed(cfg.seed, "mix-oracle"));
    std::vector<std::string> tags(mix.size(), "random");
    tags.insert(tags.end(), expert.size(), "oracle");
    mix.insert(mix.end(), std::make_move_iterator(expert.begin()), std::make_move_iterator(expert.end()));
    save_rollout_dir(out_dir + "/rollouts", mix, tags);

    TrainTrace vae_trace;
    Vae vae = train_vae(mix, cfg, &vae_trace);
    write_loss_csv(out_dir + "/vae_loss.csv", vae_trace);
    TrainTrace trace;
    Mdrnn model = train_mdrnn(encode_rollouts(vae, mix), cfg, &trace);
    write_loss_csv(out_dir + "/mdrnn_loss.csv", trace);

    save_model(out_dir + "/model.ckpt", vae, model);
    EvalReport rep = evaluate(cfg, vae, model, cfg.eval_tracks, derive_seed(cfg.seed, "eval"));
    write_eval_report(out_dir + "/report.csv", rep);
    return {std::move(vae), std::move(model), std::move(rep)};
}

std::vector<std::pair<int, EvalReport>> sweep(const RunConfig& cfg, const Vae& vae, const Mdrnn& model,
                                              SweepParam param, const std::vector<int>& values,
                                              int n_tracks, std::uint64_t seed) {
    if (values.empty()) throw std::invalid_argument("sweep: empty value list");
    std::vector<std::pair<int, EvalReport>> rows;
    for (int v : values) {
        RunConfig c = cfg;
        if (param == SweepParam::horizon)
            c.horizon = v;
        else
            c.generations = v;
        rows.emplace_back(v, evaluate(c, vae, model, n_tracks, seed));
    }
    return rows;
}

void save_model(const std::string& path, const Vae& vae, const Mdrnn& mdrnn) {
    ConstNamedTensors all = vae.named();
    for (auto& [name, t] : mdrnn.named()) all.emplace_back(name, t);
    save_checkpoint(path, all);
}

LoadedModel load_model(const std::string& path) {
    const auto loaded = load_checkpoint(path);
    auto shape_of = [&](const char* name) -> const std::vector<int>& {
        const Tensor* t = find_tensor(loaded, name);
        if (!t) throw std::runtime_error("checkpoint " + path + " is missing tensor '" + name + "'");
        return t->shape;
    };
    const auto& enc1 = shape_of("vae.enc1.w");
    const auto& enc2 = shape_of("vae.enc2.w");
    const auto& mu = shape_of("vae.mu.w");
    if (enc1.size() != 2 || enc2.size() != 2 || mu.size() != 2)
        throw std::runtime_error("checkpoint " + path + ": malformed encoder tensors");
    VaeConfig vcfg;
    vcfg.obs_dim = enc1[0];
    vcfg.hidden1 = enc1[1];
    vcfg.hidden2 = enc2[1];
    vcfg.latent = mu[1];

    const auto& wx = shape_of("mdrnn.lstm.wx");
    const auto& pi = shape_of("mdrnn.pi.w");
    if (wx.size() != 2 || pi.size() != 2 || wx[1] % 4 != 0)
        throw std::runtime_error("checkpoint " + path + ": malformed dynamics tensors");
    MdrnnConfig mcfg;
    mcfg.latent = vcfg.latent;
    mcfg.action_dim = wx[0] - vcfg.latent;
    mcfg.hidden = wx[1] / 4;
    mcfg.mixtures = pi[1];
    if (mcfg.action_dim != kActionDim)
        throw std::runtime_error("checkpoint " + path + ": unexpected action dimension");

    LoadedModel m{Vae(vcfg), Mdrnn(mcfg)};
    fill_from_checkpoint(loaded, m.vae.named());
    fill_from_checkpoint(loaded, m.mdrnn.named());
    return m;
}

void write_eval_report(const std::string& path, const EvalReport& rep) {
    std::string out;
    std::istringstream cfg_lines(rep.config_text);
    std::string line;
    while (std::getline(cfg_lines, line)) out += "# " + line + "\n";
    out += "# mean=" + fmt6(rep.mean) + "\n";
    out += "# std=" + fmt6(rep.stddev) + "\n";
    out += "track,score\n";
    for (std::size_t i = 0; i < rep.scores.size(); ++i)
        out += std::to_string(i) + "," + fmt6(rep.scores[i]) + "\n";
    write_text_file(path, out);
}

EvalReport read_eval_report(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    EvalReport rep;
    std::string line;
    bool header_seen = false;
    while (std::getline(f, line)) {
        if (line.rfind("# mean=", 0) == 0) {
            rep.mean = std::stof(line.substr(7));
        } else if (line.rfind("# std=", 0) == 0) {
            rep.stddev = std::stof(line.substr(6));
        } else if (line.rfind("# ", 0) == 0) {
            rep.config_text += line.substr(2) + "\n";
        } else if (!header_seen) {
            if (line != "track,score") throw std::runtime_error("report " + path + ": bad header");
            header_seen = true;
        } else if (!line.empty()) {
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw std::runtime_error("report " + path + ": bad row");
            rep.scores.push_back(std::stof(line.substr(comma + 1)));
        }
    }
    if (!header_seen) throw std::runtime_error("report " + path + ": missing header");
    return rep;
}

void write_loss_csv(const std::string& path, const TrainTrace& trace) {
    std::string out = "epoch,loss\n";
    for (std::size_t i = 0; i < trace.epoch_loss.size(); ++i)
        out += std::to_string(i) + "," + fmt6(trace.epoch_loss[i]) + "\n";
    write_text_file(path, out);
}

void write_iterations_csv(const std::string& path, const std::vector<EvalReport>& reports) {
    std::string out = "iteration,mean,std\n";
    for (std::size_t i = 0; i < reports.size(); ++i)
        out += std::to_string(i) + "," + fmt6(reports[i].mean) + "," + fmt6(reports[i].stddev) + "\n";
    write_text_file(path, out);
}

void write_sweep_csv(const std::string& path, const std::string& param,
                     const std::vector<std::pair<int, EvalReport>>& rows) {
    std::string out = param + ",mean,std\n";
    for (const auto& [value, rep] : rows)
        out += std::to_string(value) + "," + fmt6(rep.mean) + "," + fmt6(rep.stddev) + "\n";
    write_text_file(path, out);
}

} // namespace epls
