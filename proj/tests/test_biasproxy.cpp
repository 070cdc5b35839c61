#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "test_support.hpp"
#include "ula/generators.hpp"
#include "ula/proxy.hpp"

using namespace ula;

namespace {

// Proxy whose head reproduces fixed logits from one-hot inputs; the
// encoder is the identity.
BiasProxy table_proxy(const Mat& logit_table) {
  const int num_x = logit_table.rows;
  const int k = logit_table.cols;
  BiasProxy p;
  p.encoder = MlpModel::zeros({num_x, num_x}, {Activation::Identity});
  for (int i = 0; i < num_x; ++i) {
    p.encoder.mutable_params()[static_cast<size_t>(i) * num_x + i] = 1.0;
  }
  p.head = MlpModel::zeros({num_x, k}, {Activation::Identity});
  for (int i = 0; i < num_x; ++i) {
    for (int j = 0; j < k; ++j) {
      p.head.mutable_params()[static_cast<size_t>(i) * k + j] =
          logit_table.at(i, j);
    }
  }
  return p;
}

Dataset onehot_dataset(int num_x, int k, const std::vector<std::pair<int, int>>& xy) {
  Dataset d;
  d.K = k;
  d.L = k;
  d.dim = num_x;
  d.split = "train";
  for (auto [x, y] : xy) {
    for (int j = 0; j < num_x; ++j) d.features.push_back(j == x ? 1.0f : 0.0f);
    d.y.push_back(static_cast<uint16_t>(y));
    d.z.push_back(0);
  }
  return d;
}

}  // namespace

TEST_CASE("calibrated_conditional: tau limits and the hand case") {
  Mat table(1, 2);
  table.at(0, 0) = 2.0;
  table.at(0, 1) = 0.0;
  auto p = table_proxy(table);
  std::vector<float> x{1.0f, 0.0f};
  x.resize(1, 1.0f);
  std::vector<float> input{1.0f};

  p.tau = 1e9;
  auto uniform = calibrated_conditional(p, input);
  CHECK(std::fabs(uniform[0] - 0.5) < 1e-6);
  CHECK(std::fabs(uniform[1] - 0.5) < 1e-6);

  p.tau = 1.0;  // plain softmax of (2, 0)
  auto plain = calibrated_conditional(p, input);
  const double e2 = std::exp(2.0);
  CHECK(plain[0] == doctest::Approx(e2 / (e2 + 1)).epsilon(1e-12));

  p.tau = 0.5;  // softmax of (4, 0)
  auto sharp = calibrated_conditional(p, input);
  CHECK(sharp[0] == doctest::Approx(0.98201379).epsilon(1e-7));
  CHECK(sharp[1] == doctest::Approx(0.01798621).epsilon(1e-5));
  CHECK(sharp[0] + sharp[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("calibrated_conditional: invariant under constant logit shifts") {
  Mat t1(1, 3), t2(1, 3);
  for (int j = 0; j < 3; ++j) {
    t1.at(0, j) = 0.3 * j;
    t2.at(0, j) = 0.3 * j + 7.5;
  }
  auto p1 = table_proxy(t1);
  auto p2 = table_proxy(t2);
  p1.tau = 0.7;
  p2.tau = 0.7;
  std::vector<float> input{1.0f};
  auto a = calibrated_conditional(p1, input);
  auto b = calibrated_conditional(p2, input);
  for (int j = 0; j < 3; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
}

TEST_CASE("proxy_predict: argmax with lowest-index tie-break") {
  Mat table(2, 3);
  table.at(0, 0) = 3;
  table.at(0, 1) = 1;
  table.at(0, 2) = 2;
  table.at(1, 0) = 1;
  table.at(1, 1) = 1;
  table.at(1, 2) = 0;
  auto p = table_proxy(table);
  std::vector<float> x0{1.0f, 0.0f};
  std::vector<float> x1{0.0f, 1.0f};
  CHECK(proxy_predict(p, x0) == 0);
  CHECK(proxy_predict(p, x1) == 0);  // tie between 0 and 1
  p.tau = 17.0;                      // tau never affects the argmax
  CHECK(proxy_predict(p, x0) == 0);
}

TEST_CASE("soft_confusion: one-hot probe gives the diagonal") {
  Mat table(2, 2);
  table.at(0, 0) = 50;  // effectively one-hot after softmax
  table.at(1, 1) = 50;
  auto p = table_proxy(table);
  auto d = onehot_dataset(2, 2, {{0, 0}, {1, 1}});
  auto joint = soft_confusion(p, TrainView(d));
  CHECK(joint.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(joint.at(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(joint.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("soft_confusion: hand evaluation of the averaging formula") {
  // Three samples with probe conditionals (.8,.2), (.6,.4), (.1,.9) and
  // labels 0, 0, 1 -> joint [[0.46667, 0.2], [0.03333, 0.3]].
  auto logit_for = [](double p0) {
    Mat row(1, 2);
    row.at(0, 0) = std::log(p0);
    row.at(0, 1) = std::log(1 - p0);
    return row;
  };
  Mat table(3, 2);
  for (int x = 0; x < 3; ++x) {
    const double p0 = x == 0 ? 0.8 : (x == 1 ? 0.6 : 0.1);
    auto row = logit_for(p0);
    table.at(x, 0) = row.at(0, 0);
    table.at(x, 1) = row.at(0, 1);
  }
  auto p = table_proxy(table);
  auto d = onehot_dataset(3, 2, {{0, 0}, {1, 0}, {2, 1}});
  auto joint = soft_confusion(p, TrainView(d));
  CHECK(joint.at(0, 0) == doctest::Approx(0.46667).epsilon(1e-4));
  CHECK(joint.at(0, 1) == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(joint.at(1, 0) == doctest::Approx(0.03333).epsilon(1e-4));
  CHECK(joint.at(1, 1) == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("soft_confusion: uniform probe on balanced labels gives 1/K^2") {
  Mat table(4, 4);  // all-zero logits -> uniform conditional
  auto p = table_proxy(table);
  auto d = onehot_dataset(4, 4, {{0, 0}, {1, 1}, {2, 2}, {3, 3}});
  auto joint = soft_confusion(p, TrainView(d));
  for (double v : joint.data) CHECK(v == doctest::Approx(1.0 / 16).epsilon(1e-12));
}

TEST_CASE("soft_confusion: marginal identity and order invariance") {
  Rng rng(55);
  Mat table(6, 3);
  for (double& v : table.data) v = rng.uniform(-2, 2);
  auto p = table_proxy(table);
  p.tau = 0.8;

  std::vector<std::pair<int, int>> xy;
  for (int i = 0; i < 200; ++i) {
    xy.emplace_back(static_cast<int>(rng.uniform_below(6)),
                    static_cast<int>(rng.uniform_below(3)));
  }
  auto d = onehot_dataset(6, 3, xy);
  auto joint = soft_confusion(p, TrainView(d));

  // Row marginal equals the empirical class frequency.
  std::vector<double> freq(3, 0.0);
  for (auto [x, y] : xy) freq[y] += 1.0 / xy.size();
  double total = 0.0;
  for (int y = 0; y < 3; ++y) {
    double row = 0.0;
    for (int yb = 0; yb < 3; ++yb) row += joint.at(y, yb);
    CHECK(std::fabs(row - freq[y]) < 1e-12);
    total += row;
  }
  CHECK(std::fabs(total - 1.0) < 1e-12);

  // Sample order does not matter.
  auto rev = xy;
  std::reverse(rev.begin(), rev.end());
  auto d2 = onehot_dataset(6, 3, rev);
  auto joint2 = soft_confusion(p, TrainView(d2));
  for (size_t i = 0; i < joint.data.size(); ++i) {
    CHECK(std::fabs(joint.data[i] - joint2.data[i]) < 1e-12);
  }
}

TEST_CASE("hard_confusion equals the count confusion matrix exactly") {
  Rng rng(66);
  Mat table(8, 4);
  for (double& v : table.data) v = rng.uniform(-1, 1);
  auto p = table_proxy(table);

  std::vector<std::pair<int, int>> xy;
  for (int i = 0; i < 50; ++i) {
    xy.emplace_back(static_cast<int>(rng.uniform_below(8)),
                    static_cast<int>(rng.uniform_below(4)));
  }
  auto d = onehot_dataset(8, 4, xy);
  auto hard = hard_confusion(p, TrainView(d));

  // Count matrix from explicit argmax predictions.
  Mat counts(4, 4);
  auto preds = proxy_predict_view(p, TrainView(d));
  for (size_t i = 0; i < xy.size(); ++i) {
    counts.at(xy[i].second, preds[i]) += 1.0 / 50.0;
  }
  for (size_t i = 0; i < hard.data.size(); ++i) {
    CHECK(hard.data[i] == counts.data[i]);
  }
}

TEST_CASE("conditional_from_joint: hand division and smoothing") {
  Mat joint(2, 2);
  joint.at(0, 0) = 0.45;
  joint.at(0, 1) = 0.05;
  joint.at(1, 0) = 0.05;
  joint.at(1, 1) = 0.45;
  auto cond = conditional_from_joint(joint, 0.0);
  CHECK(cond.at(0, 0) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(cond.at(1, 0) == doctest::Approx(0.1).epsilon(1e-12));
  for (int col = 0; col < 2; ++col) {
    CHECK(cond.at(0, col) + cond.at(1, col) == doctest::Approx(1.0));
  }

  Mat id2(2, 2);
  id2.at(0, 0) = 0.5;
  id2.at(1, 1) = 0.5;
  auto idc = conditional_from_joint(id2, 0.0);
  CHECK(idc.at(0, 0) == 1.0);
  CHECK(idc.at(1, 1) == 1.0);

  Mat zerocol(2, 2);
  zerocol.at(0, 0) = 0.6;
  zerocol.at(1, 0) = 0.4;
  CHECK_THROWS_AS(conditional_from_joint(zerocol, 0.0), std::invalid_argument);
  auto smoothed = conditional_from_joint(zerocol, 1e-3);
  CHECK(smoothed.at(0, 1) == doctest::Approx(0.5));
  CHECK(smoothed.at(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("train_probe: separable features converge, t_stop = 0 keeps init") {
  // Features linearly separable by construction.
  Dataset d = onehot_dataset(4, 4, {});
  for (int rep = 0; rep < 100; ++rep) {
    for (int y = 0; y < 4; ++y) {
      for (int j = 0; j < 4; ++j) d.features.push_back(j == y ? 1.0f : 0.0f);
      d.y.push_back(static_cast<uint16_t>(y));
      d.z.push_back(0);
    }
  }
  MlpModel enc = MlpModel::zeros({4, 4}, {Activation::Identity});
  for (int i = 0; i < 4; ++i) enc.mutable_params()[i * 4 + i] = 1.0;

  OptimConfig optim;
  optim.lr = 5e-2;
  ProbeBudget budget;
  budget.amount = 40;
  auto p = train_probe(enc, TrainView(d), budget, optim, 64, 9);
  auto preds = proxy_predict_view(p, TrainView(d));
  auto labels = gather_labels(TrainView(d));
  size_t hits = 0;
  for (size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  CHECK(static_cast<double>(hits) / preds.size() >= 0.99);

  ProbeBudget zero;
  zero.amount = 0;
  auto p0 = train_probe(enc, TrainView(d), zero, optim, 64, 9);
  Rng init_rng = Rng(9).substream("probe.init");
  auto fresh =
      MlpModel::he_uniform({4, 4}, {Activation::Identity}, init_rng);
  for (size_t i = 0; i < fresh.num_params(); ++i) {
    CHECK(p0.head.params()[i] == fresh.params()[i]);
  }
}

TEST_CASE("make_joint_estimate: default smoothing removes zero columns") {
  Mat table(2, 2);
  table.at(0, 0) = 50;  // probe always predicts class 0
  table.at(1, 0) = 50;
  auto p = table_proxy(table);
  auto d = onehot_dataset(2, 2, {{0, 0}, {1, 1}, {0, 0}, {1, 1}});
  auto je = make_joint_estimate(p, TrainView(d));
  CHECK(je.alpha == doctest::Approx(1.0 / (2 * 4)));
  for (int col = 0; col < 2; ++col) {
    double s = 0;
    for (int y = 0; y < 2; ++y) s += je.conditional.at(y, col);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("proxy save/load round-trip") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ula_proxy_rt";
  fs::remove_all(dir);
  Mat table(3, 2);
  Rng rng(1);
  for (double& v : table.data) v = rng.uniform(-1, 1);
  auto p = table_proxy(table);
  p.tau = 1.7;
  p.t_stop = 12;
  p.encoder_ref = "ssl_epoch_4.ck";
  save_proxy(p, dir.string());
  auto q = load_proxy(dir.string());
  CHECK(q.tau == 1.7);
  CHECK(q.t_stop == 12);
  CHECK(q.encoder_ref == "ssl_epoch_4.ck");
  std::vector<float> input{0.0f, 1.0f, 0.0f};
  CHECK(proxy_predict(q, input) == proxy_predict(p, input));
  fs::remove_all(dir);
}
