#pragma once

// Deterministic RNG for the trial loop. std::mt19937_64 would be portable but
// the std distributions are not (uniform_real_distribution etc. differ across
// standard libraries), so draws are implemented here on top of xoshiro256++.
// Every trial derives its own stream from (master_seed, trial_index); datasets
// are therefore bitwise reproducible and chunk order / thread count never
// matters.

#include <array>
#include <cmath>
#include <cstdint>

namespace photonlab {

inline uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    static Rng seeded(uint64_t seed) {
        Rng r;
        uint64_t s = seed;
        for (auto& w : r.s_) w = splitmix64(s);
        return r;
    }

    // independent stream per trial; the mixing constant decorrelates
    // neighbouring indices before splitmix expansion
    static Rng for_trial(uint64_t master_seed, uint64_t trial_index) {
        uint64_t s = master_seed ^ (0xD6E8FEB86659FD93ULL * (trial_index + 1));
        return seeded(splitmix64(s));
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    // small-n only (photon numbers per trial are 0..2)
    int binomial(int n, double p) {
        int k = 0;
        for (int i = 0; i < n; ++i) k += bernoulli(p);
        return k;
    }

    // Knuth product method; fine for the small rates used here
    int poisson(double lambda) { return poisson_with_limit(std::exp(-lambda)); }

    // same draw sequence with exp(-lambda) precomputed, for hot loops
    int poisson_with_limit(double exp_neg_lambda) {
        int k = 0;
        double prod = uniform();
        while (prod > exp_neg_lambda) {
            ++k;
            prod *= uniform();
        }
        return k;
    }

    // Box-Muller, both variates used
    double normal(double mean, double sigma) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sigma * spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(6.283185307179586 * u2);
        have_spare_ = true;
        return mean + sigma * r * std::cos(6.283185307179586 * u2);
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<uint64_t, 4> s_{};
    double spare_ = 0;
    bool have_spare_ = false;
};

} // namespace photonlab
