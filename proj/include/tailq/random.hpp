#pragma once

#include <array>
#include <cstdint>

namespace tailq {

// Philox4x32-10 counter-based generator.
//
// Every (seed, stream) pair names an independent stream of 2^64 uint64 draws.
// Replication j of an experiment uses RandomStream(seed, j), so a parallel
// fan-out produces the same numbers no matter how replications are scheduled
// across workers. State is just the counter; streams are cheap to construct.
class RandomStream {
  public:
    RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          block_{0, 0,
                 static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

    std::uint64_t next_u64() noexcept {
        if (have_ == 0) refill();
        const unsigned i = 2 * (2 - have_);
        --have_;
        return (static_cast<std::uint64_t>(out_[i + 1]) << 32) | out_[i];
    }

    // Uniform on (0,1]; never returns 0, returns exactly 1 when all mantissa
    // bits come up set. Inverse-survival samplers rely on the closed-right end.
    double next_unit() noexcept {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    bool next_bernoulli(double p) noexcept { return next_unit() <= p; }

  private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    void refill() noexcept {
        std::array<std::uint32_t, 4> c = block_;
        std::uint32_t k0 = key_[0];
        std::uint32_t k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
            c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0,
                 static_cast<std::uint32_t>(p1),
                 static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1,
                 static_cast<std::uint32_t>(p0)};
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        out_ = c;
        have_ = 2;
        // 64-bit counter in words 0..1; words 2..3 hold the stream id.
        if (++block_[0] == 0) ++block_[1];
    }

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> block_;
    std::array<std::uint32_t, 4> out_{};
    unsigned have_ = 0;
};

}  // namespace tailq
