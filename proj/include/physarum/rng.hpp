#pragma once

#include <cmath>
#include <cstdint>

namespace physarum {

namespace detail {

// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline double poly7(const double (&c)[8], double x) {
    double r = c[7];
    for (int i = 6; i >= 0; --i) r = r * x + c[i];
    return r;
}

}  // namespace detail

/// Inverse of the standard normal CDF, Wichura's algorithm AS241 (PPND16).
/// Accurate to ~1e-16 relative for p in (0, 1); pure rational arithmetic, so
/// the result is identical on every IEEE-754 double implementation.
inline double normal_quantile(double p) {
    static constexpr double a[8] = {
        3.3871328727963666080e0,  1.3314166789178437745e2,  1.9715909503065514427e3,
        1.3731693765509461125e4,  4.5921953931549871457e4,  6.7265770927008700853e4,
        3.3430575583588128105e4,  2.5090809287301226727e3};
    static constexpr double b[8] = {
        1.0,                      4.2313330701600911252e1,  6.8718700749205790830e2,
        5.3941960214247511077e3,  2.1213794301586595867e4,  3.9307895800092710610e4,
        2.8729085735721942674e4,  5.2264952788528545610e3};
    static constexpr double c[8] = {
        1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
        3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
        2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static constexpr double d[8] = {
        1.0,                      2.05319162663775882187e0, 1.67638483018380384940e0,
        6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
        5.47593808499534494600e-4, 1.05075007164441684324e-9};
    static constexpr double e[8] = {
        6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
        2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
        2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr double f[8] = {
        1.0,                      5.99832206555887937690e-1, 1.36929880922735805310e-1,
        1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
        1.42151175831644588870e-7, 2.04426310338993978564e-15};

    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * detail::poly7(a, r) / detail::poly7(b, r);
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = detail::poly7(c, r) / detail::poly7(d, r);
    } else {
        r -= 5.0;
        val = detail::poly7(e, r) / detail::poly7(f, r);
    }
    return (q < 0.0) ? -val : val;
}

/// Counter-based 64-bit generator.
///
/// Draw k is mix64(seed + k * 0x9E3779B97F4A7C15) with the SplitMix64
/// finalizer, so the stream is a pure function of (seed, counter) and is
/// bitwise reproducible in any language with 64-bit integers and IEEE
/// doubles. Mappings:
///   uniform01:       (z >> 11) * 2^-53                       in [0, 1)
///   normal:          normal_quantile(((z >> 11) + 0.5) * 2^-53)
///   uniform_below:   unbiased rejection sampling on z mod bound
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() {
        ++counter_;
        return detail::mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ull);
    }

    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    double normal() {
        const double p = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
        return normal_quantile(p);
    }

    std::uint64_t uniform_below(std::uint64_t bound) {
        const std::uint64_t threshold = (0ull - bound) % bound;  // 2^64 mod bound
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

}  // namespace physarum
