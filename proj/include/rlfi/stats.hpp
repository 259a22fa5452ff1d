#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rlfi::stats {

double mean(std::span<const double> x);
// Sample standard deviation (n-1 denominator).
double sample_sd(std::span<const double> x);
double sample_var(std::span<const double> x);

// Interpolated quantile: h = (n-1)*p, linear between order statistics.
double quantile(std::vector<double> x, double p);
double quantile_sorted(const std::vector<double>& sorted, double p);

double pearson(std::span<const double> x, std::span<const double> y);

// Average ranks (1-based); ties get the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> x);

// Pearson correlation of average ranks.
double spearman(std::span<const double> x, std::span<const double> y);

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(const std::string& s);

// Small deterministic PRNG, stable across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }
    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    // Uniform integer in [lo, hi] inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi);
    // Standard normal via the polar method.
    double next_normal();
    // Child generator for independent parallel streams.
    Rng spawn(std::uint64_t stream) const;

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rlfi::stats
