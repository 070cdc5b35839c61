#include "ula/proxy.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "ula/checkpoint.hpp"
#include "ula/loss.hpp"

namespace ula {

Mat BiasProxy::logits(const Mat& inputs) const {
  return encode_matrix(head, encode_matrix(encoder, inputs));
}

Mat BiasProxy::logits_view(const TrainView& view) const {
  return logits(gather_all_features(view));
}

BiasProxy train_probe(const MlpModel& encoder, const TrainView& train,
                      const ProbeBudget& t_stop, const OptimConfig& optim,
                      int batch, uint64_t seed) {
  if (train.size() == 0) throw std::invalid_argument("empty training set");
  // Frozen encoder: features are computed once.
  Mat features = encode_view(encoder, train);
  auto labels = gather_labels(train);
  BiasProxy p;
  p.encoder = encoder;
  p.head = train_linear_head(features, labels, train.num_classes(), t_stop,
                             optim, batch, seed);
  p.t_stop = t_stop.amount;
  return p;
}

std::vector<double> calibrated_conditional(const BiasProxy& p,
                                           std::span<const float> x) {
  if (p.tau <= 0.0) throw std::invalid_argument("tau must be positive");
  Mat input(1, static_cast<int>(x.size()));
  for (size_t j = 0; j < x.size(); ++j) input.at(0, j) = x[j];
  Mat logit = p.logits(input);
  for (double& v : logit.data) v /= p.tau;
  Mat zero(1, logit.cols);
  Mat soft = softmax_rows(logit, zero);
  return {soft.data.begin(), soft.data.end()};
}

int proxy_predict(const BiasProxy& p, std::span<const float> x) {
  Mat input(1, static_cast<int>(x.size()));
  for (size_t j = 0; j < x.size(); ++j) input.at(0, j) = x[j];
  Mat logit = p.logits(input);
  return argmax(std::span<const double>(logit.row(0),
                                        static_cast<size_t>(logit.cols)));
}

std::vector<int> proxy_predict_view(const BiasProxy& p,
                                    const TrainView& view) {
  return argmax_rows(p.logits_view(view));
}

namespace {

Mat confusion_impl(const BiasProxy& p, const TrainView& train, bool hard) {
  if (train.size() == 0) throw std::invalid_argument("empty training set");
  if (p.tau <= 0.0) throw std::invalid_argument("tau must be positive");
  const int k = p.num_classes();
  Mat joint(k, k);
  Mat logits = p.logits_view(train);
  const double inv_n = 1.0 / static_cast<double>(train.size());
  if (hard) {
    for (size_t i = 0; i < train.size(); ++i) {
      const int yb = argmax(std::span<const double>(
          logits.row(static_cast<int>(i)), static_cast<size_t>(k)));
      joint.at(train.label(i), yb) += inv_n;
    }
    return joint;
  }
  for (double& v : logits.data) v /= p.tau;
  Mat zero(logits.rows, logits.cols);
  Mat soft = softmax_rows(logits, zero);
  for (size_t i = 0; i < train.size(); ++i) {
    const int y = train.label(i);
    const double* row = soft.row(static_cast<int>(i));
    for (int yb = 0; yb < k; ++yb) joint.at(y, yb) += row[yb] * inv_n;
  }
  return joint;
}

}  // namespace

Mat soft_confusion(const BiasProxy& p, const TrainView& train) {
  return confusion_impl(p, train, false);
}

Mat hard_confusion(const BiasProxy& p, const TrainView& train) {
  return confusion_impl(p, train, true);
}

Mat conditional_from_joint(const Mat& joint, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  const int k = joint.rows;
  Mat cond(k, joint.cols);
  for (int col = 0; col < joint.cols; ++col) {
    double colsum = 0.0;
    for (int y = 0; y < k; ++y) colsum += joint.at(y, col);
    if (colsum == 0.0 && alpha == 0.0) {
      throw std::invalid_argument(
          "column " + std::to_string(col) +
          " of the joint is all-zero; use alpha > 0 (Dirichlet smoothing)");
    }
    const double denom = colsum + k * alpha;
    for (int y = 0; y < k; ++y) {
      cond.at(y, col) = (joint.at(y, col) + alpha) / denom;
    }
  }
  return cond;
}

JointEstimate make_joint_estimate(const BiasProxy& p, const TrainView& train,
                                  double alpha) {
  JointEstimate je;
  je.alpha = alpha < 0.0
                 ? 1.0 / (static_cast<double>(p.num_classes()) *
                          static_cast<double>(train.size()))
                 : alpha;
  je.joint = soft_confusion(p, train);
  je.conditional = conditional_from_joint(je.joint, je.alpha);
  return je;
}

void save_proxy(const BiasProxy& p, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  save_checkpoint(p.head, p.t_stop, (fs::path(dir) / "head.ck").string());
  save_checkpoint(p.encoder, 0, (fs::path(dir) / "encoder.ck").string());
  nlohmann::json manifest;
  manifest["tau"] = p.tau;
  manifest["t_stop"] = p.t_stop;
  manifest["encoder_ref"] = p.encoder_ref;
  std::ofstream out(fs::path(dir) / "proxy.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write proxy manifest in " + dir);
  out << manifest.dump(2) << '\n';
}

BiasProxy load_proxy(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "proxy.json");
  if (!in) throw std::runtime_error("cannot read proxy manifest in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(in);
  BiasProxy p;
  p.tau = manifest.at("tau").get<double>();
  p.t_stop = manifest.at("t_stop").get<long>();
  p.encoder_ref = manifest.value("encoder_ref", "");
  p.head = load_checkpoint((fs::path(dir) / "head.ck").string()).model;
  p.encoder = load_checkpoint((fs::path(dir) / "encoder.ck").string()).model;
  return p;
}

}  // namespace ula
