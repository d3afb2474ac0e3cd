#pragma once

// Counter-based random streams and every sampler used by the solver.
//
// A stream is identified by (seed, stream id). The k-th 64-bit draw of a stream is
// a pure function of (seed, stream id, k), computed with Philox4x32-10, so draws can
// be regenerated in any order and on any worker.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"
#include "special.hpp"

namespace mcfpinn {

using Point = Eigen::VectorXd;
/// Points stored column-wise, d rows by n columns.
using PointSet = Eigen::MatrixXd;

/// Philox4x32 with 10 rounds.
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
        }
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

/// Purpose tags folded into stream ids so that different consumers never share draws.
enum class StreamTag : std::uint64_t {
    init_u = 1,
    init_f = 2,
    collocation = 3,
    pairs = 4,
    boundary = 5,
    measurement = 6,
    noise = 7,
    test_points = 8,
    estimate = 9,
    grid = 10,
};

/// Stream id layout: tag in bits 56..63, epoch in bits 24..55, index in bits 0..23.
inline std::uint64_t stream_id(StreamTag tag, std::uint64_t epoch, std::uint64_t index = 0) {
    return (static_cast<std::uint64_t>(tag) << 56) ^ ((epoch & 0xFFFFFFFFull) << 24) ^ (index & 0xFFFFFFull);
}

class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    std::uint64_t position() const noexcept { return position_; }

    /// Next 64 uniformly distributed bits.
    std::uint64_t next_u64() {
        const std::uint64_t block = position_ >> 1;
        if (block != cached_block_) {
            const auto out = philox4x32_10(
                {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                 static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
            cache_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
            cache_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
            cached_block_ = block;
        }
        return cache_[position_++ & 1];
    }

    /// Uniform on (0, 1]; never returns zero.
    double uniform() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    /// Standard normal by Box-Muller. Consumes two uniforms per call.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t position_ = 0;
    std::uint64_t cached_block_ = ~std::uint64_t{0};
    std::array<std::uint64_t, 2> cache_{};
};

// ---------------------------------------------------------------------------
// Radii.

inline void check_radii(double r0, double eps) {
    if (!(r0 > 0.0) || !std::isfinite(r0)) throw InvalidParameter("r0 must be positive");
    if (!(eps > 0.0 && eps < r0)) throw InvalidParameter("clamp eps must satisfy 0 < eps < r0");
}

/// r_I = r0 U^{1/(2-alpha)} (so r_I/r0 ~ Beta(2-alpha, 1)), returned clamped as max(eps, r_I).
inline double inner_radius_from_uniform(double u, double r0, double alpha, double eps) {
    const double r_inner = r0 * std::pow(u, 1.0 / (2.0 - alpha));
    return std::max(eps, r_inner);
}

/// r_o = r0 / U^{1/alpha}, so r0/r_o ~ Beta(alpha, 1).
inline double outer_radius_from_uniform(double u, double r0, double alpha) { return r0 / std::pow(u, 1.0 / alpha); }

inline double sample_inner_radius(double r0, double alpha, double eps, RngStream& rng) {
    check_order(alpha);
    check_radii(r0, eps);
    return inner_radius_from_uniform(rng.uniform(), r0, alpha, eps);
}

inline double sample_outer_radius(double r0, double alpha, RngStream& rng) {
    check_order(alpha);
    if (!(r0 > 0.0)) throw InvalidParameter("r0 must be positive");
    double r = 0.0;
    do {
        r = outer_radius_from_uniform(rng.uniform(), r0, alpha);
    } while (!std::isfinite(r));
    return r;
}

// ---------------------------------------------------------------------------
// Directions and points.

/// Fills `out` with a direction uniform on S^{d-1}, d = out.size().
inline void sample_sphere_into(Eigen::Ref<Eigen::VectorXd> out, RngStream& rng) {
    if (out.size() < 1) throw InvalidParameter("sample_sphere: dimension must be at least 1");
    double norm2 = 0.0;
    do {
        for (Eigen::Index k = 0; k < out.size(); ++k) out[k] = rng.normal();
        norm2 = out.squaredNorm();
    } while (!(norm2 > 0.0));
    out /= std::sqrt(norm2);
}

inline Point sample_sphere(int d, RngStream& rng) {
    check_dimension(d);
    Point xi(d);
    sample_sphere_into(xi, rng);
    return xi;
}

/// n points uniform in the unit ball: uniform direction, radius U^{1/d}.
inline PointSet sample_ball(int d, Eigen::Index n, RngStream& rng) {
    check_dimension(d);
    if (n < 0) throw InvalidParameter("sample_ball: negative count");
    PointSet pts(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        sample_sphere_into(pts.col(i), rng);
        pts.col(i) *= std::pow(rng.uniform(), 1.0 / d);
    }
    return pts;
}

/// n points uniform on the unit sphere.
inline PointSet sample_sphere_points(int d, Eigen::Index n, RngStream& rng) {
    check_dimension(d);
    PointSet pts(d, n);
    for (Eigen::Index i = 0; i < n; ++i) sample_sphere_into(pts.col(i), rng);
    return pts;
}

inline std::vector<double> sample_gaussian(std::size_t n, RngStream& rng) {
    std::vector<double> out(n);
    for (auto& v : out) v = rng.normal();
    return out;
}

// ---------------------------------------------------------------------------
// Estimator draws.

/// One (r_eps, r_o, xi) triple: the randomness behind a single residual factor.
struct SampleDraw {
    double r_eps = 0.0;
    double r_o = 0.0;
    Point xi;
};

/// Two independent draws. The first feeds mu, the second (primed) feeds eta.
struct SamplePair {
    SampleDraw first;
    SampleDraw second;
};

struct RadiusLaw {
    int d = 1;
    double r0 = 0.3;
    double alpha = 1.0;
    double eps = 0.01;

    void validate() const {
        check_dimension(d);
        check_order(alpha);
        check_radii(r0, eps);
    }
};

inline SampleDraw sample_draw(const RadiusLaw& law, RngStream& rng) {
    SampleDraw s;
    s.r_eps = inner_radius_from_uniform(rng.uniform(), law.r0, law.alpha, law.eps);
    do {
        s.r_o = outer_radius_from_uniform(rng.uniform(), law.r0, law.alpha);
    } while (!std::isfinite(s.r_o));
    s.xi.resize(law.d);
    sample_sphere_into(s.xi, rng);
    return s;
}

inline SamplePair sample_pair(const RadiusLaw& law, RngStream& rng) {
    law.validate();
    SamplePair p;
    p.first = sample_draw(law, rng);
    p.second = sample_draw(law, rng);
    return p;
}

}  // namespace mcfpinn
