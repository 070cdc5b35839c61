#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ula/dataset.hpp"

namespace ula {

// The four bias-conflicting difficulty levels of the colored-pattern task.
inline constexpr std::array<double, 4> kColoredDifficultyLevels{0.005, 0.01,
                                                                0.02, 0.05};

// 12x12 glyph template for class `cls` (0..9), intensities in {0,1}.
// Distinct classes have positive pairwise pixel-L2 distance before
// tinting and noise.
std::vector<float> glyph_template(int cls);

// k-th of K maximally separated fully saturated hues.
std::array<float, 3> palette_color(int k, int K);

// p(Z=z | Y=y) of the colored-pattern task: 1-beta on the diagonal,
// beta/(K-1) elsewhere.
double colored_bias_prob(int K, double beta, int y, int z);

// Colored-pattern task (spurious color <-> class correlation). Per sample:
// y uniform, z from the beta rule, class glyph jittered by +-1 pixel,
// tinted with palette color z, uniform pixel noise in [0, noise), clipped
// to [0,1].
Dataset gen_colored_patterns(int K, double beta, size_t n, double noise,
                             uint64_t seed, const std::string& split = "train");

// In-distribution (shape, color) mask of the systematic grid task: every
// row and every column has exactly C allowed cells (circulant pattern under
// seeded row/column permutations).
struct SystematicPattern {
  int K = 0;
  int L = 0;
  int C = 0;
  std::vector<uint8_t> allowed;  // K x L

  bool is_allowed(int y, int z) const {
    return allowed[static_cast<size_t>(y) * L + z] != 0;
  }
  int in_distribution_cells() const;
};

SystematicPattern make_systematic_pattern(int K, int L, int C, uint64_t seed);

struct SystematicSplit {
  Dataset train;
  Dataset valid;
  Dataset test;
  SystematicPattern pattern;
};

// Systematic grid task. Train/valid sample only allowed cells with
// p(z|y) = 1/C and uniform marginals; the test set covers all K*L cells
// with near-equal counts (stratified), including never-seen combinations.
// Supports K == L only.
SystematicSplit gen_systematic_split(int K, int L, int C, size_t n_train,
                                     size_t n_valid, size_t n_test,
                                     double noise, uint64_t seed);

// Empirical joint frequencies of (y, z); entries sum to 1. Evaluation and
// bias-supervised paths only.
Mat empirical_group_table(const Dataset& d);

}  // namespace ula
