#ifndef PEDFLOW_RANDOM_HPP
#define PEDFLOW_RANDOM_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pedflow/core.hpp"

namespace pedflow {

// Seedable random stream with a fully pinned draw discipline, so that equal
// (scenario, seed) pairs replay bit-identically on any conforming toolchain.
// std::mt19937_64 output is specified by the standard; the derived draws
// below avoid std::uniform_*_distribution, whose mapping is not.
class RandomStream {
  public:
    static constexpr const char* kAlgorithmId = "mt19937_64";

    explicit RandomStream(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n) by rejection, unbiased.
    std::size_t next_index(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= bound);
        return static_cast<std::size_t>(r % n);
    }

    bool next_bernoulli(double p) { return next_unit() < p; }

    // Fisher-Yates; consumes exactly size-1 index draws for size >= 2.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = next_index(i);
            std::swap(items[i - 1], items[j]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

inline void validate_rng_algorithm(const std::string& id) {
    if (id != RandomStream::kAlgorithmId) {
        throw ValidationError("unsupported rng algorithm '" + id +
                              "' (supported: mt19937_64)");
    }
}

}  // namespace pedflow

#endif
