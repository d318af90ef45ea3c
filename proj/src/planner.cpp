#include "epls/planner.hpp"

#include <stdexcept>

namespace epls {

namespace {

struct ComponentRange {
    float lo, hi;
};
constexpr ComponentRange kRanges[3] = {{-1.0f, 1.0f}, {0.0f, 1.0f}, {0.0f, 1.0f}};

float& component(Action& a, int i) {
    switch (i) {
    case 0: return a.steer;
    case 1: return a.accel;
    default: return a.brake;
    }
}

} // namespace

Plan random_plan(int horizon, Rng& rng) {
    if (horizon <= 0) throw std::invalid_argument("random_plan: horizon must be positive");
    Plan plan(horizon);
    for (auto& a : plan)
        for (int i = 0; i < 3; ++i) component(a, i) = rng.uniform(kRanges[i].lo, kRanges[i].hi);
    return plan;
}

Plan mutate(const Plan& plan, const PlannerConfig& cfg, Rng& rng) {
    if (plan.empty()) throw std::invalid_argument("mutate: empty plan");
    Plan out = plan;
    bool touched = false;
    while (!touched) { // guarantee the challenger differs somewhere
        out = plan;
        for (auto& a : out) {
            for (int i = 0; i < 3; ++i) {
                if (rng.uniform() >= cfg.p_mut) continue;
                const float range = kRanges[i].hi - kRanges[i].lo;
                float& v = component(a, i);
                v = std::clamp(v + cfg.sigma_mut * range * rng.normal(), kRanges[i].lo, kRanges[i].hi);
                touched = true;
            }
        }
    }
    return out;
}

void shift_buffer(Plan& plan, Rng& rng) {
    if (plan.empty()) throw std::invalid_argument("shift_buffer: empty plan");
    plan.erase(plan.begin());
    Action a;
    for (int i = 0; i < 3; ++i) component(a, i) = rng.uniform(kRanges[i].lo, kRanges[i].hi);
    plan.push_back(a);
}

PlanEvaluation evaluate_plan(const Mdrnn& model, const LatentVector& z, const WorldModelState& state,
                             const Plan& plan, const PlannerConfig& cfg, Rng& rng) {
    PlanEvaluation ev;
    LatentVector cur = z;
    WorldModelState st = state;
    ev.cutoff = static_cast<int>(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
        auto [pred, next] = model.step(cur, plan[i], st);
        ev.step_rewards.push_back(pred.reward_mean);
        if (pred.terminal_p > cfg.terminal_threshold) {
            ev.cutoff = static_cast<int>(i); // reward at the predicted-terminal step is not counted
            break;
        }
        ev.fitness += pred.reward_mean;
        st = next;
        cur = cfg.sample_latents ? sample_next_latent(pred.gmm, rng) : expected_next_latent(pred.gmm);
    }
    return ev;
}

HillClimbResult hill_climb(Plan seed, const std::function<PlanEvaluation(const Plan&)>& fitness,
                           const PlannerConfig& cfg, Rng& rng) {
    HillClimbResult r;
    r.plan = std::move(seed);
    r.eval = fitness(r.plan);
    for (int g = 0; g < cfg.generations; ++g) {
        Plan challenger = mutate(r.plan, cfg, rng);
        PlanEvaluation ce = fitness(challenger);
        if (ce.fitness >= r.eval.fitness) {
            r.plan = std::move(challenger);
            r.eval = std::move(ce);
        }
        r.trace.push_back(r.eval.fitness);
    }
    return r;
}

PlanningAgent::PlanningAgent(const Vae& vae, const Mdrnn& model, PlannerConfig cfg, uint64_t seed)
    : vae_(vae), model_(model), cfg_(cfg), rng_(seed) {}

void PlanningAgent::begin_episode() {
    plan_ = random_plan(cfg_.horizon, rng_);
    state_ = model_.initial_state();
    episode_open_ = true;
}

Action PlanningAgent::act(const Observation& obs) {
    if (!episode_open_) throw std::logic_error("PlanningAgent::act before begin_episode");
    const LatentVector z = vae_.encode(obs).mu; // plan from the posterior mean
    auto fit = [&](const Plan& p) { return evaluate_plan(model_, z, state_, p, cfg_, rng_); };
    HillClimbResult r = hill_climb(std::move(plan_), fit, cfg_, rng_);
    plan_ = std::move(r.plan);
    last_trace_ = std::move(r.trace);
    const Action chosen = plan_.front();
    state_ = model_.step(z, chosen, state_).second; // track the executed transition
    shift_buffer(plan_, rng_);
    return chosen;
}

OraclePlanningAgent::OraclePlanningAgent(const EnvConfig& env_cfg, const TrackSpec& track, PlannerConfig cfg,
                                         uint64_t seed)
    : env_cfg_(env_cfg), track_(track), cfg_(cfg), rng_(seed) {}

void OraclePlanningAgent::begin_episode() {
    plan_ = random_plan(cfg_.horizon, rng_);
    episode_open_ = true;
}

Action OraclePlanningAgent::act(const CarState& state) {
    if (!episode_open_) throw std::logic_error("OraclePlanningAgent::act before begin_episode");
    auto fit = [&](const Plan& p) {
        PlanEvaluation ev;
        CarState sim = state;
        ev.cutoff = static_cast<int>(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            OracleStep step = oracle_dynamics(env_cfg_, track_, sim, p[i]);
            ev.step_rewards.push_back(step.reward);
            ev.fitness += step.reward; // real rollouts credit the terminal step
            sim = step.state;
            if (step.terminal) {
                ev.cutoff = static_cast<int>(i) + 1;
                break;
            }
        }
        return ev;
    };
    HillClimbResult r = hill_climb(std::move(plan_), fit, cfg_, rng_);
    plan_ = std::move(r.plan);
    const Action chosen = plan_.front();
    shift_buffer(plan_, rng_);
    return chosen;
}

} // namespace epls
