#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace abstain {

uint64_t fnv1a64(std::string_view data);
std::string to_hex16(uint64_t value);

// Deterministic RNG wrapper. mt19937_64 plus the bit-shift uniform below are
// identical on every platform and standard library, which the seeded file
// outputs rely on; std::uniform_*_distribution gives no such guarantee.
class rng64 {
public:
    explicit rng64(uint64_t seed) : gen_(seed) {}

    uint64_t next() { return gen_(); }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // uniform integer in [0, n)
    size_t below(size_t n) { return static_cast<size_t>(gen_() % n); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Stable per-record seed derivation for pipeline stages.
uint64_t derive_seed(uint64_t base_seed, std::string_view record_id, std::string_view stage);

std::string to_lower(std::string_view text);
std::string collapse_whitespace(std::string_view text);
std::vector<std::string> split_words(std::string_view text);
bool contains(std::string_view haystack, std::string_view needle);

std::string read_text_file(const std::string& path);

}  // namespace abstain
