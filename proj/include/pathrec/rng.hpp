#pragma once

#include <array>
#include <cstdint>

namespace pathrec {

/// Philox 4x32-10 counter-based generator. Streams are keyed by
/// (global seed, stream id), so the variates consumed by one light path are
/// independent of scheduling: stream id = path index.
class Philox4x32 {
public:
    Philox4x32(uint64_t seed, uint64_t stream)
        : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
          ctr_{0, 0, static_cast<uint32_t>(stream), static_cast<uint32_t>(stream >> 32)} {}

    uint32_t next_u32() {
        if (have_ == 0) {
            block_ = bump();
            have_ = 4;
        }
        return block_[4 - have_--];
    }

    uint64_t next_u64() {
        const uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    /// Uniform double in [0,1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0,1]; safe as the argument of log().
    double next_double_open0() { return 1.0 - next_double(); }

private:
    static constexpr uint32_t kMul0 = 0xD2511F53u;
    static constexpr uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr uint32_t kWeyl1 = 0xBB67AE85u;

    std::array<uint32_t, 4> bump() {
        std::array<uint32_t, 4> c = ctr_;
        uint32_t k0 = key_[0], k1 = key_[1];
        for (int round = 0; round < 10; ++round) {
            const uint64_t p0 = static_cast<uint64_t>(kMul0) * c[0];
            const uint64_t p1 = static_cast<uint64_t>(kMul1) * c[2];
            c = {static_cast<uint32_t>(p1 >> 32) ^ c[1] ^ k0, static_cast<uint32_t>(p1),
                 static_cast<uint32_t>(p0 >> 32) ^ c[3] ^ k1, static_cast<uint32_t>(p0)};
            k0 += kWeyl0;
            k1 += kWeyl1;
        }
        if (++ctr_[0] == 0 && ++ctr_[1] == 0) ++ctr_[2];
        return c;
    }

    std::array<uint32_t, 2> key_;
    std::array<uint32_t, 4> ctr_;
    std::array<uint32_t, 4> block_{};
    int have_ = 0;
};

using Rng = Philox4x32;

}  // namespace pathrec
