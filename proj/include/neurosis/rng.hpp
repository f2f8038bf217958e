#pragma once

#include <cmath>
#include <cstdint>

namespace neurosis {

// Counter-based generator: every draw is a hash of (seed, stream, counter),
// so adding a consumer on one stream never shifts another stream's values.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum class StreamId : std::uint64_t { Respawn = 1, Slip = 2, Jitter = 3, Evolve = 4, Random = 5 };

class Stream {
public:
    Stream() = default;
    Stream(std::uint64_t seed, std::uint64_t stream) : key_(mix64(mix64(seed) ^ mix64(stream * 0x632be59bd9b4e019ULL))) {}
    Stream(std::uint64_t seed, StreamId id) : Stream(seed, static_cast<std::uint64_t>(id)) {}

    std::uint64_t at(std::uint64_t counter) const { return mix64(key_ ^ mix64(counter + 0x1234567ULL)); }
    std::uint64_t next() { return at(counter_++); }

    // Uniform in [0, 1).
    double uniform_at(std::uint64_t counter) const { return (at(counter) >> 11) * 0x1.0p-53; }
    double uniform() { return uniform_at(counter_++); }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    Stream split(std::uint64_t sub) const {
        Stream s;
        s.key_ = mix64(key_ ^ mix64(sub + 0x51ed2701ULL));
        return s;
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace neurosis
