#include "diffplan/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>

#include "diffplan/errors.hpp"

namespace diffplan {

uint64_t Rng::uniform_int(uint64_t n) {
    if (n == 0) throw ValueError("uniform_int: n must be positive");
    // Rejection sampling to avoid modulo bias.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

void Rng::save(std::ostream& os) const {
    os << engine_ << ' ' << has_spare_ << ' ';
    // Hex float round-trips exactly.
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%a", spare_);
    os << buf;
}

void Rng::load(std::istream& is) {
    is >> engine_ >> has_spare_;
    std::string hex;
    is >> hex;
    spare_ = std::strtod(hex.c_str(), nullptr);
}

uint64_t mix_seed(uint64_t base, uint64_t stream) {
    uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace diffplan
