#include "epls/rollout.hpp"

#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "epls/serial.hpp"

namespace epls {

static const char kRollMagic[9] = "EPLSROLL";
static constexpr std::uint32_t kRollVersion = 1;

float Rollout::total_reward() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0f); }

void save_rollout(const std::string& path, const Rollout& r) {
    const std::size_t T = r.actions.size();
    if (r.obs.size() != T || r.rewards.size() != T || r.terminals.size() != T)
        throw std::invalid_argument("save_rollout: ragged rollout");
    const std::uint32_t obs_dim = T ? static_cast<std::uint32_t>(r.obs[0].size()) : kObsDim;

    ByteWriter w;
    w.magic(kRollMagic);
    w.u32(kRollVersion);
    w.u32(obs_dim);
    w.u32(kActionDim);
    w.u32(static_cast<std::uint32_t>(T));
    for (std::size_t t = 0; t < T; ++t) {
        if (r.obs[t].size() != obs_dim) throw std::invalid_argument("save_rollout: ragged observation");
        w.f32s(r.obs[t].data(), r.obs[t].size());
        w.f32(r.actions[t].steer);
        w.f32(r.actions[t].accel);
        w.f32(r.actions[t].brake);
        w.f32(r.rewards[t]);
        w.u8(r.terminals[t]);
    }
    w.finish_crc();
    write_file(path, w.buffer());
}

Rollout load_rollout(const std::string& path) {
    ByteReader r(read_file(path));
    r.check_crc("rollout " + path);
    r.expect_magic(kRollMagic, "rollout " + path);
    if (r.u32() != kRollVersion) throw std::runtime_error("rollout " + path + ": unsupported version");
    const std::uint32_t obs_dim = r.u32();
    const std::uint32_t action_dim = r.u32();
    const std::uint32_t T = r.u32();
    if (action_dim != kActionDim) throw std::runtime_error("rollout " + path + ": unexpected action dim");
    if (obs_dim == 0 || obs_dim > 1u << 20) throw std::runtime_error("rollout " + path + ": bad obs dim");
    const std::size_t per_record = obs_dim * 4 + kActionDim * 4 + 4 + 1;
    if (static_cast<std::size_t>(T) * per_record > r.remaining())
        throw std::runtime_error("rollout " + path + ": record data exceeds file size");

    Rollout out;
    out.obs.resize(T, Observation(obs_dim));
    out.actions.resize(T);
    out.rewards.resize(T);
    out.terminals.resize(T);
    for (std::uint32_t t = 0; t < T; ++t) {
        r.f32s(out.obs[t].data(), obs_dim);
        out.actions[t].steer = r.f32();
        out.actions[t].accel = r.f32();
        out.actions[t].brake = r.f32();
        out.rewards[t] = r.f32();
        out.terminals[t] = r.u8();
    }
    if (!r.at_end()) throw std::runtime_error("rollout " + path + ": trailing bytes");
    return out;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const auto& e : entries) f << e.file << '\t' << e.policy << '\n';
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error("manifest " + path + ": malformed line");
        out.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
}

void ReplayBuffer::push(Rollout r) {
    items_.push_back(std::move(r));
    while (items_.size() > capacity_) items_.pop_front();
}

} // namespace epls
