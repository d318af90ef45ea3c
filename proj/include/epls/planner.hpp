#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "epls/env.hpp"
#include "epls/mdrnn.hpp"
#include "epls/rng.hpp"
#include "epls/vae.hpp"

namespace epls {

using Plan = std::vector<Action>;

struct PlannerConfig {
    int horizon = 20;
    int generations = 10;
    float p_mut = 0.3f;       // per-component mutation probability
    float sigma_mut = 0.3f;   // stddev as a fraction of each component's range
    float terminal_threshold = 0.5f;
    bool sample_latents = false; // default: argmax-component mean propagation
};

struct PlanEvaluation {
    float fitness = 0.0f;
    std::vector<float> step_rewards; // predicted reward per evaluated step, cutoff step included
    int cutoff = 0;                  // steps counted toward fitness
};

Plan random_plan(int horizon, Rng& rng);

// Gaussian perturbation of each action component with probability p_mut,
// clamped to the legal range; redraws until at least one component moved.
Plan mutate(const Plan& plan, const PlannerConfig& cfg, Rng& rng);

// Drops the executed first action and appends a fresh random one.
void shift_buffer(Plan& plan, Rng& rng);

// Rolls the plan forward through the learned dynamics from (z, state).
// Fitness sums predicted rewards up to (excluding) the first step whose
// terminal probability crosses the threshold.
PlanEvaluation evaluate_plan(const Mdrnn& model, const LatentVector& z, const WorldModelState& state,
                             const Plan& plan, const PlannerConfig& cfg, Rng& rng);

struct HillClimbResult {
    Plan plan;
    PlanEvaluation eval;
    std::vector<float> trace; // champion fitness after each generation
};

// 1+1 random-mutation hill climbing; challengers replace the champion on ties.
HillClimbResult hill_climb(Plan seed, const std::function<PlanEvaluation(const Plan&)>& fitness,
                           const PlannerConfig& cfg, Rng& rng);

// Online planning loop state: encode the raster, refine the buffered plan,
// execute its first action, shift.
class PlanningAgent {
public:
    PlanningAgent(const Vae& vae, const Mdrnn& model, PlannerConfig cfg, uint64_t seed);

    void begin_episode();
    Action act(const Observation& obs);

    const Plan& buffer() const { return plan_; }
    const std::vector<float>& last_trace() const { return last_trace_; }

private:
    const Vae& vae_;
    const Mdrnn& model_;
    PlannerConfig cfg_;
    Rng rng_;
    Plan plan_;
    WorldModelState state_;
    std::vector<float> last_trace_;
    bool episode_open_ = false;
};

// Same planning loop but scored against the real environment dynamics;
// used as an upper-bound reference for the learned model.
class OraclePlanningAgent {
public:
    OraclePlanningAgent(const EnvConfig& env_cfg, const TrackSpec& track, PlannerConfig cfg, uint64_t seed);

    void begin_episode();
    Action act(const CarState& state);

private:
    EnvConfig env_cfg_;
    const TrackSpec& track_;
    PlannerConfig cfg_;
    Rng rng_;
    Plan plan_;
    bool episode_open_ = false;
};

} // namespace epls
