#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "test_support.hpp"
#include "ula/adjust.hpp"
#include "ula/generators.hpp"
#include "ula/loss.hpp"
#include "ula/metrics.hpp"

using namespace ula;

namespace {

JointEstimate estimate_from_conditional(const Mat& cond) {
  JointEstimate je;
  je.conditional = cond;
  je.joint = cond;  // tests below only read the conditional
  return je;
}

Dataset small_task(int K, double beta, size_t n, uint64_t seed,
                   const char* split = "train") {
  return gen_colored_patterns(K, beta, n, 0.2, seed, split);
}

}  // namespace

TEST_CASE("sla_offsets: uniform conditional is a constant shift") {
  Mat cond(4, 2);
  for (int y = 0; y < 4; ++y) {
    cond.at(y, 0) = 0.25;
    cond.at(y, 1) = 0.25;
  }
  auto off = sla_offsets(cond, 1);
  for (double v : off) CHECK(v == doctest::Approx(std::log(0.25)));

  // Softmax predictions are unchanged by a constant shift.
  Mat logits(1, 4);
  for (int j = 0; j < 4; ++j) logits.at(0, j) = j * 0.3;
  Mat zero(1, 4), shifted(1, 4);
  for (int j = 0; j < 4; ++j) shifted.at(0, j) = off[j];
  auto p0 = softmax_rows(logits, zero);
  auto p1 = softmax_rows(logits, shifted);
  for (int j = 0; j < 4; ++j) {
    CHECK(p0.at(0, j) == doctest::Approx(p1.at(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("sla_offsets: hand logs and the clamp") {
  Mat cond(2, 1);
  cond.at(0, 0) = 0.9;
  cond.at(1, 0) = 0.1;
  auto off = sla_offsets(cond, 0);
  CHECK(off[0] == doctest::Approx(-0.10536052).epsilon(1e-7));
  CHECK(off[1] == doctest::Approx(-2.30258509).epsilon(1e-8));

  Mat degenerate(2, 1);
  degenerate.at(0, 0) = 1.0;
  degenerate.at(1, 0) = 0.0;
  auto clamped = sla_offsets(degenerate, 0, -20.0);
  CHECK(clamped[0] == doctest::Approx(0.0));
  CHECK(clamped[1] == doctest::Approx(-20.0));

  CHECK_THROWS_AS(sla_offsets(cond, 5), std::invalid_argument);
}

TEST_CASE("ula_offsets: eta = 0 is the exact zero vector") {
  Mat cond(3, 3);
  for (int y = 0; y < 3; ++y) cond.at(y, y) = 1.0;
  auto je = estimate_from_conditional(cond);
  auto off = ula_offsets(je, 1, 0.0);
  for (double v : off) CHECK(v == 0.0);
}

TEST_CASE("ula_offsets: hand computation flips the argmax") {
  Mat cond(2, 2);
  cond.at(0, 0) = 0.9;
  cond.at(1, 0) = 0.1;
  cond.at(0, 1) = 0.1;
  cond.at(1, 1) = 0.9;
  auto je = estimate_from_conditional(cond);
  auto off = ula_offsets(je, 0, 1.0);
  const double l0 = 1.0 + off[0];
  const double l1 = 2.0 + off[1];
  CHECK(l0 == doctest::Approx(0.89464).epsilon(1e-4));
  CHECK(l1 == doctest::Approx(-0.30259).epsilon(1e-4));
  CHECK(l0 > l1);  // argmax flipped from class 1 to class 0
}

TEST_CASE("ula_offsets: uniform column never changes the argmax") {
  Mat cond(5, 5);
  for (int y = 0; y < 5; ++y) {
    for (int yb = 0; yb < 5; ++yb) cond.at(y, yb) = 0.2;
  }
  auto je = estimate_from_conditional(cond);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double eta = rng.uniform(0, 4);
    auto off = ula_offsets(je, trial % 5, eta);
    std::vector<double> logits(5), adjusted(5);
    for (int j = 0; j < 5; ++j) {
      logits[j] = rng.uniform(-2, 2);
      adjusted[j] = logits[j] + off[j];
    }
    CHECK(argmax(std::span<const double>(logits)) ==
          argmax(std::span<const double>(adjusted)));
  }
}

TEST_CASE("monotone masking: higher eta suppresses low-prior classes") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 4;
    Mat cond(k, 1);
    double sum = 0.0;
    for (int y = 0; y < k; ++y) {
      cond.at(y, 0) = rng.uniform(0.01, 1.0);
      sum += cond.at(y, 0);
    }
    for (int y = 0; y < k; ++y) cond.at(y, 0) /= sum;
    auto je = estimate_from_conditional(cond);

    Mat logits(1, k);
    for (int j = 0; j < k; ++j) logits.at(0, j) = rng.uniform(-1, 1);

    // Class with the smallest conditional probability (strictly below
    // median for k = 4 with distinct draws).
    int low = 0;
    for (int y = 1; y < k; ++y) {
      if (cond.at(y, 0) < cond.at(low, 0)) low = y;
    }
    double prev = 1e300;
    for (double eta : {0.0, 0.5, 1.0, 1.5, 2.5}) {
      auto off = ula_offsets(je, 0, eta);
      Mat orow(1, k);
      for (int j = 0; j < k; ++j) orow.at(0, j) = off[j];
      auto p = softmax_rows(logits, orow);
      CHECK(p.at(0, low) < prev + 1e-15);
      prev = p.at(0, low);
    }
  }
}

TEST_CASE("offset-shift neutrality: adding a constant per row changes "
          "neither loss gradients nor inference") {
  Rng rng(11);
  Mat logits = test::random_mat(6, 4, rng);
  Mat off = test::random_mat(6, 4, rng, -3, 0);
  std::vector<int> labels{0, 1, 2, 3, 0, 1};
  auto base = ce_loss_with_offset(logits, off, labels);
  Mat shifted = off;
  for (int i = 0; i < 6; ++i) {
    const double c = rng.uniform(-2, 2);
    for (int j = 0; j < 4; ++j) shifted.at(i, j) += c;
  }
  auto moved = ce_loss_with_offset(logits, shifted, labels);
  for (size_t i = 0; i < base.dlogits.data.size(); ++i) {
    CHECK(std::fabs(base.dlogits.data[i] - moved.dlogits.data[i]) < 1e-10);
  }
}

TEST_CASE("make_debiased: encoder parameters copied bit-for-bit") {
  Rng rng(13);
  auto encoder = MlpModel::he_uniform({12, 8, 6},
                                      {Activation::Relu, Activation::Identity},
                                      rng);
  auto model = make_debiased(encoder, 3, 42);
  CHECK(model.encoder_param_count == encoder.num_params());
  for (size_t i = 0; i < encoder.num_params(); ++i) {
    CHECK(model.net.params()[i] == encoder.params()[i]);
  }
  // Same seed, same head; different seed, different head.
  auto again = make_debiased(encoder, 3, 42);
  auto other = make_debiased(encoder, 3, 43);
  bool same = true, diff = false;
  for (size_t i = encoder.num_params(); i < model.net.num_params(); ++i) {
    same &= model.net.params()[i] == again.net.params()[i];
    diff |= model.net.params()[i] != other.net.params()[i];
  }
  CHECK(same);
  CHECK(diff);
}

TEST_CASE("predict_debiased: raw argmax, independent of offsets") {
  auto encoder = MlpModel::zeros({2, 2}, {Activation::Identity});
  for (int i = 0; i < 2; ++i) encoder.mutable_params()[i * 2 + i] = 1.0;
  auto model = make_debiased(encoder, 2, 1);
  // Overwrite the head so logits = (x0 - x1, x1 - x0) * 0.5 + fixed.
  auto params = model.net.mutable_params();
  const size_t head_w = model.encoder_param_count;
  params[head_w + 0] = 1.0;
  params[head_w + 1] = 0.0;
  params[head_w + 2] = 0.0;
  params[head_w + 3] = 1.0;
  std::vector<float> x{0.5f, -0.5f};
  CHECK(predict_debiased(model, x) == 0);
}

TEST_CASE("finetune: max_epochs = 0 returns the initialization") {
  auto train = small_task(4, 0.2, 64, 3);
  auto valid = small_task(4, 0.2, 32, 4, "valid");
  Rng rng(5);
  auto encoder = MlpModel::he_uniform(
      {kFeatureDim, 16, 8}, {Activation::Relu, Activation::Identity}, rng);
  auto init = make_debiased(encoder, 4, 7);

  auto labels = gather_labels(TrainView(valid));
  Validator validator = [&](std::span<const int> preds) {
    return iid_accuracy(preds, labels);
  };
  FinetuneConfig cfg;
  cfg.max_epochs = 0;
  auto res = finetune(init, OffsetTable{}, TrainView(train), TrainView(valid),
                      validator, cfg, 9);
  CHECK_FALSE(res.failed);
  CHECK(res.best_epoch == 0);
  REQUIRE(res.curve.size() == 1);
  for (size_t i = 0; i < init.net.num_params(); ++i) {
    CHECK(res.best.net.params()[i] == init.net.params()[i]);
  }
}

TEST_CASE("finetune: ula with eta = 0 reproduces the ERM trajectory "
          "bit-for-bit") {
  auto train = small_task(3, 0.3, 120, 21);
  auto valid = small_task(3, 0.3, 60, 22, "valid");
  Rng rng(23);
  auto encoder = MlpModel::he_uniform(
      {kFeatureDim, 16, 8}, {Activation::Relu, Activation::Identity}, rng);
  auto init = make_debiased(encoder, 3, 11);

  Mat cond(3, 3);
  for (int y = 0; y < 3; ++y) cond.at(y, y) = 1.0;
  JointEstimate je;
  je.joint = cond;
  je.conditional = cond;
  std::vector<int> proxy_preds(train.size(), 0);
  auto ula_table = make_offset_table_ula(je, proxy_preds, 0.0);
  CHECK(ula_table.empty());

  auto labels = gather_labels(TrainView(valid));
  Validator validator = [&](std::span<const int> preds) {
    return iid_accuracy(preds, labels);
  };
  FinetuneConfig cfg;
  cfg.max_epochs = 3;
  cfg.batch = 32;

  auto erm = finetune(init, OffsetTable{}, TrainView(train), TrainView(valid),
                      validator, cfg, 77);
  auto ula = finetune(init, ula_table, TrainView(train), TrainView(valid),
                      validator, cfg, 77);
  REQUIRE_FALSE(erm.failed);
  REQUIRE_FALSE(ula.failed);
  for (size_t i = 0; i < erm.best.net.num_params(); ++i) {
    CHECK(erm.best.net.params()[i] == ula.best.net.params()[i]);
  }
  CHECK(erm.best_epoch == ula.best_epoch);
}

TEST_CASE("finetune: divergence is a failed result, not a crash") {
  auto train = small_task(3, 0.3, 90, 31);
  auto valid = small_task(3, 0.3, 30, 32, "valid");
  Rng rng(33);
  auto encoder = MlpModel::he_uniform(
      {kFeatureDim, 16, 8}, {Activation::Relu, Activation::Identity}, rng);
  auto init = make_debiased(encoder, 3, 11);
  auto labels = gather_labels(TrainView(valid));
  Validator validator = [&](std::span<const int> preds) {
    return iid_accuracy(preds, labels);
  };
  FinetuneConfig cfg;
  cfg.max_epochs = 4;
  cfg.optim.lr = 1e9;  // guaranteed blow-up
  auto res = finetune(init, OffsetTable{}, TrainView(train), TrainView(valid),
                      validator, cfg, 3);
  CHECK(res.failed);
  CHECK_FALSE(res.failure.empty());
}

TEST_CASE("finetune: head-only mode leaves encoder parameters untouched") {
  auto train = small_task(3, 0.3, 90, 41);
  auto valid = small_task(3, 0.3, 30, 42, "valid");
  Rng rng(43);
  auto encoder = MlpModel::he_uniform(
      {kFeatureDim, 16, 8}, {Activation::Relu, Activation::Identity}, rng);
  auto init = make_debiased(encoder, 3, 11);
  // Monotone validator: the last epoch always wins selection.
  int calls = 0;
  Validator validator = [&](std::span<const int>) {
    return static_cast<double>(calls++);
  };
  FinetuneConfig cfg;
  cfg.max_epochs = 2;
  cfg.train_encoder = false;
  auto res = finetune(init, OffsetTable{}, TrainView(train), TrainView(valid),
                      validator, cfg, 5);
  REQUIRE_FALSE(res.failed);
  CHECK(res.best_epoch == 2);
  bool head_moved = false;
  for (size_t i = 0; i < init.net.num_params(); ++i) {
    if (i < init.encoder_param_count) {
      CHECK(res.best.net.params()[i] == init.net.params()[i]);
    } else {
      head_moved |= res.best.net.params()[i] != init.net.params()[i];
    }
  }
  CHECK(head_moved);
}

TEST_CASE("toy sanity: sLA with the exact conditional learns the unbiased "
          "rule") {
  // Two classes; feature 0 carries the true signal, feature 1 the spurious
  // one. With offsets log p(y|z) the spurious explanation is absorbed.
  const int n = 800;
  Dataset train;
  train.K = 2;
  train.L = 2;
  train.dim = 2;
  train.split = "train";
  Rng rng(51);
  for (int i = 0; i < n; ++i) {
    const int y = static_cast<int>(rng.uniform_below(2));
    const int z = rng.uniform() < 0.95 ? y : 1 - y;
    train.features.push_back(static_cast<float>(y + 0.05 * rng.normal()));
    train.features.push_back(static_cast<float>(z));
    train.y.push_back(static_cast<uint16_t>(y));
    train.z.push_back(static_cast<uint16_t>(z));
  }
  Dataset valid = train;

  auto table = empirical_group_table(train);
  auto cond = conditional_from_joint(table, 1e-6);
  auto offsets = make_offset_table_sla(cond, train, 1.0);

  Rng enc_rng(52);
  auto encoder = MlpModel::he_uniform({2, 8, 8},
                                      {Activation::Relu, Activation::Identity},
                                      enc_rng);
  auto init = make_debiased(encoder, 2, 53);
  auto labels = gather_labels(TrainView(valid));
  Validator validator = [&](std::span<const int> preds) {
    return iid_accuracy(preds, labels);
  };
  FinetuneConfig cfg;
  cfg.max_epochs = 20;
  cfg.batch = 64;
  cfg.optim.lr = 5e-3;
  auto res = finetune(init, offsets, TrainView(train), TrainView(valid),
                      validator, cfg, 55);
  REQUIRE_FALSE(res.failed);

  // Probe with bias-conflicting inputs: signal says class 1, spurious says 0.
  std::vector<float> conflict{1.0f, 0.0f};
  CHECK(predict_debiased(res.best, conflict) == 1);
  std::vector<float> conflict2{0.0f, 1.0f};
  CHECK(predict_debiased(res.best, conflict2) == 0);
}
