#include "ula/adjust.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "ula/loss.hpp"
#include "ula/metrics.hpp"

namespace ula {

AdjustMode adjust_mode_from_name(const std::string& name) {
  if (name == "erm") return AdjustMode::Erm;
  if (name == "sla") return AdjustMode::Sla;
  if (name == "ula") return AdjustMode::Ula;
  throw std::invalid_argument("unknown mode '" + name + "'");
}

const char* adjust_mode_name(AdjustMode m) {
  switch (m) {
    case AdjustMode::Erm: return "erm";
    case AdjustMode::Sla: return "sla";
    case AdjustMode::Ula: return "ula";
  }
  return "?";
}

std::vector<double> sla_offsets(const Mat& y_given_z, int z,
                                double log_floor) {
  if (z < 0 || z >= y_given_z.cols) {
    throw std::invalid_argument("bias value out of range");
  }
  std::vector<double> off(y_given_z.rows);
  for (int y = 0; y < y_given_z.rows; ++y) {
    off[y] = std::max(std::log(y_given_z.at(y, z)), log_floor);
  }
  return off;
}

std::vector<double> ula_offsets(const JointEstimate& je, int y_bias_hat,
                                double eta, double log_floor) {
  const int k = je.conditional.rows;
  if (y_bias_hat < 0 || y_bias_hat >= je.conditional.cols) {
    throw std::invalid_argument("proxy prediction out of range");
  }
  std::vector<double> off(k, 0.0);
  if (eta == 0.0) return off;
  for (int y = 0; y < k; ++y) {
    off[y] =
        eta * std::max(std::log(je.conditional.at(y, y_bias_hat)), log_floor);
  }
  return off;
}

OffsetTable make_offset_table_ula(const JointEstimate& je,
                                  std::span<const int> proxy_preds, double eta,
                                  double log_floor) {
  OffsetTable t;
  if (eta == 0.0) return t;  // exact ERM fallback
  const int k = je.conditional.rows;
  t.columns = Mat(je.conditional.cols, k);
  for (int yb = 0; yb < je.conditional.cols; ++yb) {
    auto off = ula_offsets(je, yb, eta, log_floor);
    std::copy(off.begin(), off.end(), t.columns.row(yb));
  }
  t.col_of.assign(proxy_preds.begin(), proxy_preds.end());
  return t;
}

OffsetTable make_offset_table_sla(const Mat& y_given_z, const Dataset& train,
                                  double eta, double log_floor) {
  OffsetTable t;
  if (eta == 0.0) return t;
  t.columns = Mat(y_given_z.cols, y_given_z.rows);
  for (int z = 0; z < y_given_z.cols; ++z) {
    auto off = sla_offsets(y_given_z, z, log_floor);
    for (int y = 0; y < y_given_z.rows; ++y) {
      t.columns.at(z, y) = eta * off[y];
    }
  }
  t.col_of.resize(train.size());
  for (size_t i = 0; i < train.size(); ++i) t.col_of[i] = train.z[i];
  return t;
}

DebiasedModel make_debiased(const MlpModel& encoder, int num_classes,
                            uint64_t seed) {
  Rng rng = Rng(seed).substream("debiased.head");
  MlpModel head = MlpModel::he_uniform({encoder.output_dim(), num_classes},
                                       {Activation::Identity}, rng);
  DebiasedModel m;
  m.net = encoder.stacked_with(head);
  m.encoder_param_count = encoder.num_params();
  return m;
}

int predict_debiased(const DebiasedModel& model, std::span<const float> x) {
  Mat input(1, static_cast<int>(x.size()));
  for (size_t j = 0; j < x.size(); ++j) input.at(0, j) = x[j];
  Mat logits = model.net.forward(input);
  return argmax(std::span<const double>(logits.row(0),
                                        static_cast<size_t>(logits.cols)));
}

std::vector<int> predict_debiased_view(const DebiasedModel& model,
                                       const TrainView& view) {
  return predict_labels(model.net, gather_all_features(view));
}

FinetuneResult finetune(const DebiasedModel& init, const OffsetTable& offsets,
                        const TrainView& train, const TrainView& valid,
                        const Validator& validator, const FinetuneConfig& cfg,
                        uint64_t seed) {
  if (!offsets.empty() && offsets.col_of.size() != train.size()) {
    throw std::invalid_argument("offset table does not match the train set");
  }
  if (train.size() == 0 || valid.size() == 0) {
    throw std::invalid_argument("empty train or valid set");
  }
  const int k = init.net.output_dim();

  FinetuneResult res;
  res.best = init;

  Mat valid_features = gather_all_features(valid);
  auto valid_labels = gather_labels(valid);
  auto evaluate = [&](const DebiasedModel& m, int epoch, double train_loss) {
    auto preds = predict_labels(m.net, valid_features);
    EpochRow row;
    row.epoch = epoch;
    row.train_loss = train_loss;
    row.val_score = validator(preds);
    row.iid_val_acc = iid_accuracy(preds, valid_labels);
    res.curve.push_back(row);
    return row.val_score;
  };

  DebiasedModel model = init;
  res.best_score = evaluate(model, 0, 0.0);
  res.best_epoch = 0;

  const size_t n = train.size();
  const int batch = static_cast<int>(
      std::min<size_t>(static_cast<size_t>(cfg.batch), n));
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  LrSchedule sched{cfg.optim.lr,
                   std::max(1L, cfg.max_epochs * steps_per_epoch),
                   LrSchedule::Kind::Cosine};
  OptimState state = OptimState::for_model(model.net, cfg.optim);

  Rng shuffle_rng = Rng(seed).substream("finetune.shuffle");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    long batches = 0;
    for (long step = 0; step < steps_per_epoch; ++step) {
      const size_t start = static_cast<size_t>(step) * batch;
      const int rows =
          static_cast<int>(std::min<size_t>(batch, n - std::min(n, start)));
      if (rows == 0) continue;
      Mat xb(rows, train.dim());
      std::vector<int> yb(rows);
      Mat ob(rows, k);
      for (int i = 0; i < rows; ++i) {
        const size_t src = order[start + i];
        const auto x = train.x(src);
        double* dst = xb.row(i);
        for (int j = 0; j < train.dim(); ++j) dst[j] = x[j];
        yb[i] = train.label(src);
        if (!offsets.empty()) {
          const double* col = offsets.columns.row(offsets.col_of[src]);
          std::copy(col, col + k, ob.row(i));
        }
      }
      try {
        MlpModel::ForwardCache cache;
        Mat logits = model.net.forward(xb, cache);
        auto ce = ce_loss_with_offset(logits, ob, yb);
        if (!std::isfinite(ce.loss) || ce.loss > cfg.divergence_loss) {
          res.failed = true;
          res.failure = "diverged at epoch " + std::to_string(epoch) +
                        " (loss " + std::to_string(ce.loss) + ")";
          return res;
        }
        loss_sum += ce.loss;
        batches += 1;
        auto grad = model.net.backward(cache, ce.dlogits);
        if (!cfg.train_encoder) {
          std::fill(grad.begin(),
                    grad.begin() +
                        static_cast<std::ptrdiff_t>(model.encoder_param_count),
                    0.0);
        }
        adamw_step(model.net, state, grad, lr_at(sched, state.step_count));
      } catch (const std::exception& e) {
        res.failed = true;
        res.failure = std::string("training aborted at epoch ") +
                      std::to_string(epoch) + ": " + e.what();
        return res;
      }
    }
    const double score =
        evaluate(model, epoch, batches > 0 ? loss_sum / batches : 0.0);
    if (score > res.best_score) {  // ties keep the earliest epoch
      res.best_score = score;
      res.best_epoch = epoch;
      res.best = model;
    }
  }
  return res;
}

void write_curve_csv(const std::vector<EpochRow>& curve,
                     const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open curve for write: " + path);
  out << "epoch,train_loss,val_score,iid_val_acc\n";
  for (const auto& row : curve) {
    out << row.epoch << ',' << row.train_loss << ',' << row.val_score << ','
        << row.iid_val_acc << '\n';
  }
}

}  // namespace ula
