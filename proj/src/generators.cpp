#include "ula/generators.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ula/rng.hpp"

namespace ula {

std::vector<float> glyph_template(int cls) {
  if (cls < 0 || cls > 9) {
    throw std::invalid_argument("glyph class must be in [0,10)");
  }
  std::vector<float> t(static_cast<size_t>(kImageH) * kImageW, 0.0f);
  auto set_if = [&](auto pred) {
    for (int r = 0; r < kImageH; ++r) {
      for (int c = 0; c < kImageW; ++c) {
        if (pred(r, c)) t[static_cast<size_t>(r) * kImageW + c] = 1.0f;
      }
    }
  };
  const double mid = (kImageH - 1) / 2.0;  // 5.5
  switch (cls) {
    case 0:  // ring
      set_if([&](int r, int c) {
        const double d = std::hypot(r - mid, c - mid);
        return d >= 3.0 && d <= 5.0;
      });
      break;
    case 1:  // vertical bar
      set_if([&](int r, int c) { (void)r; return std::fabs(c - mid) <= 1.0; });
      break;
    case 2:  // horizontal bar
      set_if([&](int r, int c) { (void)c; return std::fabs(r - mid) <= 1.0; });
      break;
    case 3:  // main diagonal
      set_if([](int r, int c) { return std::abs(r - c) <= 1; });
      break;
    case 4:  // anti-diagonal
      set_if([](int r, int c) { return std::abs(r + c - (kImageW - 1)) <= 1; });
      break;
    case 5:  // X
      set_if([](int r, int c) {
        return std::abs(r - c) <= 1 || std::abs(r + c - (kImageW - 1)) <= 1;
      });
      break;
    case 6:  // plus
      set_if([&](int r, int c) {
        return std::fabs(c - mid) <= 1.0 || std::fabs(r - mid) <= 1.0;
      });
      break;
    case 7:  // T
      set_if([&](int r, int c) { return r <= 1 || std::fabs(c - mid) <= 1.0; });
      break;
    case 8:  // two horizontal bars
      set_if([](int r, int c) {
        (void)c;
        return (r >= 2 && r <= 3) || (r >= 8 && r <= 9);
      });
      break;
    case 9:  // four dots
      set_if([](int r, int c) {
        const bool rr = (r >= 2 && r <= 4) || (r >= 7 && r <= 9);
        const bool cc = (c >= 2 && c <= 4) || (c >= 7 && c <= 9);
        return rr && cc;
      });
      break;
  }
  return t;
}

std::array<float, 3> palette_color(int k, int K) {
  if (k < 0 || k >= K) throw std::invalid_argument("palette index out of range");
  const double h6 = 6.0 * k / K;
  const int i = static_cast<int>(h6) % 6;
  const double f = h6 - std::floor(h6);
  const auto ff = static_cast<float>(f);
  const auto qf = static_cast<float>(1.0 - f);
  switch (i) {
    case 0: return {1.0f, ff, 0.0f};
    case 1: return {qf, 1.0f, 0.0f};
    case 2: return {0.0f, 1.0f, ff};
    case 3: return {0.0f, qf, 1.0f};
    case 4: return {ff, 0.0f, 1.0f};
    default: return {1.0f, 0.0f, qf};
  }
}

double colored_bias_prob(int K, double beta, int y, int z) {
  if (y < 0 || y >= K || z < 0 || z >= K) {
    throw std::invalid_argument("label out of range");
  }
  return y == z ? 1.0 - beta : beta / (K - 1);
}

namespace {

// Instance jitter: +-1 pixel translation plus random erosion of the
// template (each lit pixel survives with probability kGlyphKeepProb).
// Single instances are ambiguous sparse subsets of the class template;
// the template itself is only recoverable from many samples, which keeps
// shape learning statistical rather than a single-exemplar match.
constexpr double kGlyphKeepProb = 0.45;

// Stamp a jittered, eroded, tinted glyph onto a fresh canvas and add
// uniform pixel noise in [0, noise), clipped to [0,1].
void render_sample(int glyph_class, const std::array<float, 3>& color,
                   double noise, Rng& rng, float* out) {
  const auto tmpl = glyph_template(glyph_class);
  const int dx = rng.uniform_int(-1, 1);
  const int dy = rng.uniform_int(-1, 1);
  std::fill(out, out + kFeatureDim, 0.0f);
  for (int r = 0; r < kImageH; ++r) {
    const int rr = r + dy;
    if (rr < 0 || rr >= kImageH) continue;
    for (int c = 0; c < kImageW; ++c) {
      const int cc = c + dx;
      if (cc < 0 || cc >= kImageW) continue;
      const float t = tmpl[static_cast<size_t>(r) * kImageW + c];
      if (t == 0.0f) continue;
      if (rng.uniform() >= kGlyphKeepProb) continue;
      float* px = out + (static_cast<size_t>(rr) * kImageW + cc) * kImageC;
      for (int ch = 0; ch < kImageC; ++ch) px[ch] = t * color[ch];
    }
  }
  if (noise > 0.0) {
    for (int i = 0; i < kFeatureDim; ++i) {
      out[i] = static_cast<float>(
          clamp01(out[i] + noise * rng.uniform()));
    }
  }
}

}  // namespace

Dataset gen_colored_patterns(int K, double beta, size_t n, double noise,
                             uint64_t seed, const std::string& split) {
  if (K < 2 || K > 10) {
    throw std::invalid_argument("colored task supports 2 <= K <= 10");
  }
  if (beta < 0.0 || beta > 1.0) {
    throw std::invalid_argument("beta must be in [0,1]");
  }
  if (n < static_cast<size_t>(K)) {
    throw std::invalid_argument("need at least K samples");
  }
  Dataset d;
  d.K = K;
  d.L = K;
  d.split = split;
  d.dim = kFeatureDim;
  d.provenance.generator = "colored_patterns-v2";
  d.provenance.seed = seed;
  d.provenance.params = {{"K", K}, {"beta", beta}, {"n", n}, {"noise", noise}};
  d.features.resize(n * static_cast<size_t>(kFeatureDim));
  d.y.resize(n);
  d.z.resize(n);

  Rng rng = Rng(seed).substream("datagen.colored");
  std::array<std::array<float, 3>, 10> colors{};
  for (int k = 0; k < K; ++k) colors[k] = palette_color(k, K);

  for (size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(rng.uniform_below(K));
    int z = y;
    if (rng.uniform() >= 1.0 - beta) {
      const int other = static_cast<int>(rng.uniform_below(K - 1));
      z = other >= y ? other + 1 : other;
    }
    d.y[i] = static_cast<uint16_t>(y);
    d.z[i] = static_cast<uint16_t>(z);
    render_sample(y, colors[z], noise, rng,
                  d.features.data() + i * static_cast<size_t>(kFeatureDim));
  }
  return d;
}

int SystematicPattern::in_distribution_cells() const {
  int count = 0;
  for (uint8_t v : allowed) count += v != 0;
  return count;
}

SystematicPattern make_systematic_pattern(int K, int L, int C, uint64_t seed) {
  if (K != L) {
    throw std::invalid_argument(
        "systematic pattern requires K == L; the doubly-uniform construction "
        "is undefined otherwise");
  }
  if (C < 2 || C > L) {
    throw std::invalid_argument("need 2 <= C <= L colors per shape");
  }
  SystematicPattern p;
  p.K = K;
  p.L = L;
  p.C = C;
  p.allowed.assign(static_cast<size_t>(K) * L, 0);

  // Circulant base pattern (shape s allows colors s..s+C-1 mod L) under
  // independent row and column permutations keeps all row/column sums at C.
  Rng rng = Rng(seed).substream("datagen.pattern");
  std::vector<int> row_perm(K), col_perm(L);
  std::iota(row_perm.begin(), row_perm.end(), 0);
  std::iota(col_perm.begin(), col_perm.end(), 0);
  rng.shuffle(row_perm);
  rng.shuffle(col_perm);
  for (int s = 0; s < K; ++s) {
    for (int c = 0; c < L; ++c) {
      const int base_row = row_perm[s];
      const int base_col = col_perm[c];
      if ((base_col - base_row + L) % L < C) {
        p.allowed[static_cast<size_t>(s) * L + c] = 1;
      }
    }
  }
  return p;
}

namespace {

Dataset empty_grid_dataset(int K, int L, int C, size_t n, double noise,
                           uint64_t seed, const std::string& split) {
  Dataset d;
  d.K = K;
  d.L = L;
  d.split = split;
  d.dim = kFeatureDim;
  d.provenance.generator = "systematic_grid-v2";
  d.provenance.seed = seed;
  d.provenance.params = {
      {"K", K}, {"L", L}, {"C", C}, {"n", n}, {"noise", noise}};
  d.features.resize(n * static_cast<size_t>(kFeatureDim));
  d.y.resize(n);
  d.z.resize(n);
  return d;
}

}  // namespace

SystematicSplit gen_systematic_split(int K, int L, int C, size_t n_train,
                                     size_t n_valid, size_t n_test,
                                     double noise, uint64_t seed) {
  if (K < 2 || K > 10) {
    throw std::invalid_argument("grid task supports 2 <= K <= 10");
  }
  SystematicSplit out;
  out.pattern = make_systematic_pattern(K, L, C, seed);

  std::array<std::array<float, 3>, 10> colors{};
  for (int k = 0; k < L; ++k) colors[k] = palette_color(k, L);

  // Per-shape list of allowed colors.
  std::vector<std::vector<int>> allowed_colors(K);
  for (int y = 0; y < K; ++y) {
    for (int z = 0; z < L; ++z) {
      if (out.pattern.is_allowed(y, z)) allowed_colors[y].push_back(z);
    }
  }

  auto fill_indist = [&](Dataset& d, size_t n, Rng rng) {
    for (size_t i = 0; i < n; ++i) {
      const int y = static_cast<int>(rng.uniform_below(K));
      const int z = allowed_colors[y][rng.uniform_below(C)];
      d.y[i] = static_cast<uint16_t>(y);
      d.z[i] = static_cast<uint16_t>(z);
      render_sample(y, colors[z], noise, rng,
                    d.features.data() + i * static_cast<size_t>(kFeatureDim));
    }
  };

  out.train = empty_grid_dataset(K, L, C, n_train, noise, seed, "train");
  out.valid = empty_grid_dataset(K, L, C, n_valid, noise, seed, "valid");
  fill_indist(out.train, n_train, Rng(seed).substream("datagen.grid.train"));
  fill_indist(out.valid, n_valid, Rng(seed).substream("datagen.grid.valid"));

  // Stratified test: every cell gets n_test / (K*L) samples; the remainder
  // goes to the first cells in row-major order. Sample order is shuffled.
  out.test = empty_grid_dataset(K, L, C, n_test, noise, seed, "test");
  Rng rng = Rng(seed).substream("datagen.grid.test");
  const size_t cells = static_cast<size_t>(K) * L;
  std::vector<std::pair<int, int>> cell_of(n_test);
  size_t idx = 0;
  for (size_t cell = 0; cell < cells; ++cell) {
    const size_t count = n_test / cells + (cell < n_test % cells ? 1 : 0);
    for (size_t j = 0; j < count; ++j) {
      cell_of[idx++] = {static_cast<int>(cell) / L, static_cast<int>(cell) % L};
    }
  }
  rng.shuffle(cell_of);
  for (size_t i = 0; i < n_test; ++i) {
    const auto [y, z] = cell_of[i];
    out.test.y[i] = static_cast<uint16_t>(y);
    out.test.z[i] = static_cast<uint16_t>(z);
    render_sample(y, colors[z], noise, rng,
                  out.test.features.data() +
                      i * static_cast<size_t>(kFeatureDim));
  }
  return out;
}

Mat empirical_group_table(const Dataset& d) {
  if (d.size() == 0) throw std::invalid_argument("empty dataset");
  Mat table(d.K, d.L);
  const double inv = 1.0 / static_cast<double>(d.size());
  for (size_t i = 0; i < d.size(); ++i) {
    table.at(d.y[i], d.z[i]) += inv;
  }
  return table;
}

}  // namespace ula
