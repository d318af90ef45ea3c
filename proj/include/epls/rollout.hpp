#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "epls/env.hpp"

namespace epls {

// One episode. Record t pairs the observation seen before action t with the
// reward and terminal flag that action produced; the post-terminal
// observation is not stored.
struct Rollout {
    std::vector<Observation> obs;
    std::vector<Action> actions;
    std::vector<float> rewards;
    std::vector<std::uint8_t> terminals;

    int steps() const { return static_cast<int>(actions.size()); }
    float total_reward() const;
};

void save_rollout(const std::string& path, const Rollout& r);
Rollout load_rollout(const std::string& path);

struct ManifestEntry {
    std::string file;   // rollout filename relative to the manifest
    std::string policy; // e.g. "random", "plan", "oracle"
};

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> load_manifest(const std::string& path);

// Bounded FIFO of episodes; pushing past capacity drops the oldest.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Rollout r);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Rollout& at(std::size_t i) const { return items_.at(i); }
    std::vector<Rollout> snapshot() const { return {items_.begin(), items_.end()}; }

private:
    std::size_t capacity_;
    std::deque<Rollout> items_;
};

} // namespace epls
