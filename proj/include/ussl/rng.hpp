// All randomness in the repo flows from one root seed, split into named
// streams so that stages cannot perturb each other's draw sequences.
#pragma once

#include <cstdint>
#include <random>

namespace ussl {

enum class Stream : std::uint64_t {
    data = 1,
    model_init = 2,
    vae_pretrain = 3,
    train_shuffle_labeled = 4,
    train_shuffle_unlabeled = 5,
    train_augment = 6,
    outlier_score = 7,
    final_score = 8,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream) {
    const auto s = static_cast<std::uint64_t>(stream);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    return std::mt19937_64(seq);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return make_rng(seed, Stream::data); }

}  // namespace ussl
