#pragma once

// Binary checkpoint of one network (and optionally its Adam state).
//
// Layout, all integers and doubles little-endian:
//
//   offset 0   8 bytes   magic "MCFPCKPT"
//              u32       format version (1)
//              u32       L, number of layer sizes
//              L x u32   layer sizes, input first
//              f64...    per layer: weight matrix row-major, then bias vector
//              u8        1 if Adam state follows, else 0
//   [Adam]     i64 step, f64 beta1, f64 beta2, f64 epsilon,
//              f64 lr0, f64 decay_factor, i64 decay_every,
//              first moments then second moments, same coefficient order as weights
//              u64       FNV-1a 64 checksum of every preceding byte
//
// Loading either returns a complete object or throws CheckpointError naming the
// byte offset where decoding failed.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adam.hpp"
#include "errors.hpp"
#include "mlp.hpp"

namespace mcfpinn {

inline constexpr char kCheckpointMagic[8] = {'M', 'C', 'F', 'P', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    MlpParams params;
    std::optional<AdamState> adam;
};

namespace detail {

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

class ByteWriter {
public:
    void raw(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    template <class U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void i64(std::int64_t v) { uint(static_cast<std::uint64_t>(v)); }

    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }

    void need(std::size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError(std::string("truncated checkpoint while reading ") + what, pos_);
    }
    template <class U>
    U uint(const char* what) {
        need(sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
        pos_ += sizeof(U);
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(uint<std::uint64_t>(what)); }
    std::int64_t i64(const char* what) { return static_cast<std::int64_t>(uint<std::uint64_t>(what)); }
    void raw(void* out, std::size_t n, const char* what) {
        need(n, what);
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const MlpParams& p, const AdamState* adam = nullptr) {
    validate(p);
    detail::ByteWriter w;
    w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
    w.uint<std::uint32_t>(kCheckpointVersion);
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.layer_sizes.size()));
    for (int s : p.layer_sizes) w.uint<std::uint32_t>(static_cast<std::uint32_t>(s));
    for_each_coefficient(p, [&](const double& v) { w.f64(v); });
    w.uint<std::uint8_t>(adam ? 1 : 0);
    if (adam) {
        if (!same_shape(p, adam->first_moment) || !same_shape(p, adam->second_moment))
            throw InvalidShape("encode_checkpoint: Adam moments do not match the network");
        w.i64(adam->step);
        w.f64(adam->beta1);
        w.f64(adam->beta2);
        w.f64(adam->epsilon);
        w.f64(adam->schedule.lr0);
        w.f64(adam->schedule.decay_factor);
        w.i64(adam->schedule.decay_every);
        for_each_coefficient(adam->first_moment, [&](const double& v) { w.f64(v); });
        for_each_coefficient(adam->second_moment, [&](const double& v) { w.f64(v); });
    }
    const std::uint64_t sum = detail::fnv1a64(w.bytes());
    w.uint<std::uint64_t>(sum);
    return std::move(w.bytes());
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes);
    char magic[8];
    r.raw(magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw CheckpointError("bad checkpoint magic", 0);
    const std::size_t version_at = r.offset();
    if (r.uint<std::uint32_t>("version") != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version", version_at);

    const std::size_t sizes_at = r.offset();
    const auto n_sizes = r.uint<std::uint32_t>("layer count");
    if (n_sizes < 2 || n_sizes > 1024) throw CheckpointError("implausible layer count", sizes_at);
    std::vector<int> sizes(n_sizes);
    for (auto& s : sizes) {
        const std::size_t at = r.offset();
        const auto v = r.uint<std::uint32_t>("layer size");
        if (v == 0 || v > (1u << 20)) throw CheckpointError("implausible layer size", at);
        s = static_cast<int>(v);
    }
    if (sizes.back() != 1) throw CheckpointError("network output width must be 1", sizes_at);

    Checkpoint ck;
    ck.params = mlp_init(sizes, 0);
    for_each_coefficient(ck.params, [&](double& v) { v = r.f64("parameters"); });

    const std::size_t flag_at = r.offset();
    const auto has_adam = r.uint<std::uint8_t>("Adam flag");
    if (has_adam > 1) throw CheckpointError("invalid Adam flag", flag_at);
    if (has_adam == 1) {
        AdamState s = make_adam_state(ck.params, {});
        s.step = r.i64("Adam step");
        s.beta1 = r.f64("Adam beta1");
        s.beta2 = r.f64("Adam beta2");
        s.epsilon = r.f64("Adam epsilon");
        s.schedule.lr0 = r.f64("learning rate");
        s.schedule.decay_factor = r.f64("decay factor");
        s.schedule.decay_every = r.i64("decay interval");
        for_each_coefficient(s.first_moment, [&](double& v) { v = r.f64("first moments"); });
        for_each_coefficient(s.second_moment, [&](double& v) { v = r.f64("second moments"); });
        ck.adam = std::move(s);
    }
    const std::size_t sum_at = r.offset();
    const std::uint64_t expected = detail::fnv1a64(bytes.first(sum_at));
    if (r.uint<std::uint64_t>("checksum") != expected) throw CheckpointError("checksum mismatch", sum_at);
    if (r.offset() != bytes.size()) throw CheckpointError("trailing bytes after checkpoint", r.offset());
    return ck;
}

inline void checkpoint_save(const std::filesystem::path& path, const MlpParams& p, const AdamState* adam = nullptr) {
    const auto bytes = encode_checkpoint(p, adam);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open checkpoint for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint: " + path.string());
}

inline Checkpoint checkpoint_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string(), 0);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace mcfpinn
