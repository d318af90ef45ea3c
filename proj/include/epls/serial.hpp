#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace epls {

// CRC32 (IEEE) of a byte range; zlib-backed, see serial.cpp.
std::uint32_t crc32_bytes(const std::uint8_t* data, std::size_t len);

// Little-endian byte building for the on-disk formats. The host is assumed
// little-endian IEEE-754; raw f32 bytes are copied directly.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { append(&v, 2); }
    void u32(std::uint32_t v) { append(&v, 4); }
    void f32(float v) { append(&v, 4); }
    void f32s(const float* p, std::size_t n) { append(p, 4 * n); }
    void bytes(const void* p, std::size_t n) { append(p, n); }
    void magic(const char (&m)[9]) { append(m, 8); }

    // Appends CRC32 of everything written so far.
    void finish_crc() { u32(crc32_bytes(buf_.data(), buf_.size())); }

    const std::vector<std::uint8_t>& buffer() const { return buf_; }

private:
    void append(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<std::uint8_t> buf_;
};

// Bounds-checked reader over a fully loaded file. check_crc() must be called
// first so the rest of the parse runs over verified bytes.
class ByteReader {
public:
    explicit ByteReader(std::vector<std::uint8_t> buf) : buf_(std::move(buf)) {}

    // Verifies the trailing u32 CRC32 over all preceding bytes.
    void check_crc(const std::string& what) {
        if (buf_.size() < 4) throw std::runtime_error(what + ": file too short");
        std::uint32_t stored;
        std::memcpy(&stored, buf_.data() + buf_.size() - 4, 4);
        std::uint32_t actual = crc32_bytes(buf_.data(), buf_.size() - 4);
        if (stored != actual) throw std::runtime_error(what + ": CRC mismatch, file corrupt");
        end_ = buf_.size() - 4;
    }

    std::uint8_t u8() { return take<std::uint8_t>(); }
    std::uint16_t u16() { return take<std::uint16_t>(); }
    std::uint32_t u32() { return take<std::uint32_t>(); }
    float f32() { return take<float>(); }

    void f32s(float* out, std::size_t n) {
        need(4 * n);
        std::memcpy(out, buf_.data() + pos_, 4 * n);
        pos_ += 4 * n;
    }

    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    void expect_magic(const char (&m)[9], const std::string& what) {
        if (str(8) != std::string(m, 8)) throw std::runtime_error(what + ": bad magic");
    }

    std::size_t remaining() const { return end_ - pos_; }
    bool at_end() const { return pos_ == end_; }

private:
    template <class T>
    T take() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void need(std::size_t n) {
        if (end_ - pos_ < n) throw std::runtime_error("truncated record in file");
    }
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
    std::size_t end_ = 0;
};

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

} // namespace epls
