#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace argmine {

// Seed derivation. Every random stream in the toolkit is a child of one
// experiment seed, keyed by a tag, so adding a stream never shifts another.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// Thin wrapper over mt19937_64. The distribution code lives here instead of
// <random> distributions because those are implementation-defined and the
// experiment outputs are meant to be identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();                      // [0, 1)
    std::size_t below(std::size_t bound);  // [0, bound), bound > 0
    double normal(double mean = 0.0, double stddev = 1.0);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

    // k distinct indices from [0, n), returned in ascending order.
    std::vector<std::size_t> choose(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace argmine
