#pragma once
#include <cstdint>
#include <random>

namespace mrhar {

// All randomness in the project goes through one of these, seeded explicitly.
// Identical seed => identical stream, which is what the reproducibility
// contract of the harness rests on.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // Derive an independent stream for a named purpose (init, shuffle, dropout, ...).
    Rng fork(uint64_t stream) const {
        std::mt19937_64 probe = engine_;
        uint64_t base = probe();
        return Rng(base ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
    }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(engine_);
    }

    double exponential(double rate) {
        std::exponential_distribution<double> d(rate);
        return d(engine_);
    }

    // Uniform integer in [0, n)
    uint64_t index(uint64_t n) {
        std::uniform_int_distribution<uint64_t> d(0, n - 1);
        return d(engine_);
    }

    bool bernoulli(double p) {
        std::bernoulli_distribution d(p);
        return d(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace mrhar
