#include "bayesagg/rng.hpp"

namespace bayesagg {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RngStream RngStream::derive(std::uint64_t salt) const {
    return RngStream{seed, splitmix64(stream ^ splitmix64(salt))};
}

RngStream RngStream::derive(std::uint64_t a, std::uint64_t b) const {
    return derive(splitmix64(a) ^ (b + 0x165667b19e3779f9ULL));
}

std::mt19937_64 make_engine(const RngStream& rng) {
    std::seed_seq seq{splitmix64(rng.seed), splitmix64(rng.stream ^ 0xda3e39cb94b95bdbULL),
                      splitmix64(rng.seed ^ rng.stream)};
    return std::mt19937_64(seq);
}

}  // namespace bayesagg
