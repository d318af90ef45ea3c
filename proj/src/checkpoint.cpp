#include "epls/checkpoint.hpp"

#include "epls/serial.hpp"

namespace epls {

static const char kCkptMagic[9] = "EPLSCKPT";
static constexpr std::uint32_t kCkptVersion = 1;
static constexpr int kMaxRank = 8;

void save_checkpoint(const std::string& path, const ConstNamedTensors& tensors) {
    ByteWriter w;
    w.magic(kCkptMagic);
    w.u32(kCkptVersion);
    w.u32(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff) throw std::invalid_argument("checkpoint: tensor name too long: " + name);
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u8(static_cast<std::uint8_t>(t->rank()));
        for (int d : t->shape) w.u32(static_cast<std::uint32_t>(d));
        w.f32s(t->data.data(), t->data.size());
    }
    w.finish_crc();
    write_file(path, w.buffer());
}

std::vector<LoadedTensor> load_checkpoint(const std::string& path) {
    ByteReader r(read_file(path));
    r.check_crc("checkpoint " + path);
    r.expect_magic(kCkptMagic, "checkpoint " + path);
    if (r.u32() != kCkptVersion) throw std::runtime_error("checkpoint " + path + ": unsupported version");
    const std::uint32_t count = r.u32();
    std::vector<LoadedTensor> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        LoadedTensor lt;
        lt.name = r.str(r.u16());
        const int rank = r.u8();
        if (rank < 1 || rank > kMaxRank)
            throw std::runtime_error("checkpoint " + path + ": bad tensor rank");
        std::vector<int> shape(rank);
        std::int64_t n = 1;
        for (int& d : shape) {
            d = static_cast<int>(r.u32());
            if (d <= 0 || n > static_cast<std::int64_t>(r.remaining()))
                throw std::runtime_error("checkpoint " + path + ": bad tensor shape");
            n *= d;
        }
        if (static_cast<std::size_t>(n) * 4 > r.remaining())
            throw std::runtime_error("checkpoint " + path + ": tensor data exceeds file size");
        Tensor t = Tensor::zeros(shape);
        r.f32s(t.data.data(), t.data.size());
        out.push_back({std::move(lt.name), std::move(t)});
    }
    if (!r.at_end()) throw std::runtime_error("checkpoint " + path + ": trailing bytes");
    return out;
}

const Tensor* find_tensor(const std::vector<LoadedTensor>& loaded, const std::string& name) {
    for (const auto& lt : loaded)
        if (lt.name == name) return &lt.tensor;
    return nullptr;
}

void fill_from_checkpoint(const std::vector<LoadedTensor>& loaded, const NamedTensors& dest) {
    for (const auto& [name, t] : dest) {
        const Tensor* src = find_tensor(loaded, name);
        if (!src) throw std::runtime_error("checkpoint is missing tensor '" + name + "'");
        if (src->shape != t->shape)
            throw std::runtime_error("checkpoint tensor '" + name + "' has shape " + src->shape_str() +
                                     ", expected " + t->shape_str());
        *t = *src;
    }
}

} // namespace epls
