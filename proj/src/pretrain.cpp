#include "ula/pretrain.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "ula/checkpoint.hpp"
#include "ula/kernels.hpp"
#include "ula/loss.hpp"
#include "ula/metrics.hpp"

namespace ula {

void SslConfig::validate() const {
  if (proj_dim < 2) throw std::invalid_argument("proj_dim must be >= 2");
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be > 0");
  if (epochs < 0 || batch < 2 || checkpoint_every < 1) {
    throw std::invalid_argument("bad ssl schedule");
  }
  if (momentum < 0.0 || momentum >= 1.0 || queue_size < 0) {
    throw std::invalid_argument("bad momentum/queue config");
  }
}

const std::string& SslResult::path_for(int t_ssl) const {
  for (size_t i = 0; i < epochs.size(); ++i) {
    if (epochs[i] == t_ssl) return paths[i];
  }
  throw std::invalid_argument("no checkpoint for T_ssl = " +
                              std::to_string(t_ssl));
}

BatchNceResult ssl_batch_loss(const Mat& q, const Mat& k_all, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
  const int b = q.rows;
  const int total = k_all.rows;
  if (total < 2 || total < b) {
    throw std::invalid_argument("need at least one negative key");
  }
  Mat sims(b, total);
  kernels::matmul_nt(sims.data.data(), q.data.data(), k_all.data.data(), b,
                     q.cols, total);
  const double inv_tau = 1.0 / tau;
  for (double& v : sims.data) v *= inv_tau;

  std::vector<int> labels(b);
  std::iota(labels.begin(), labels.end(), 0);
  Mat zero_offsets(b, total);
  auto ce = ce_loss_with_offset(sims, zero_offsets, labels);

  BatchNceResult res;
  res.loss = ce.loss;
  // dq = dS * K / tau
  for (double& v : ce.dlogits.data) v *= inv_tau;
  res.dq = Mat(b, q.cols);
  kernels::matmul_nn(res.dq.data.data(), ce.dlogits.data.data(),
                     k_all.data.data(), b, total, q.cols);
  return res;
}

Mat encode_matrix(const MlpModel& encoder, const Mat& inputs, int batch) {
  Mat out(inputs.rows, encoder.output_dim());
  for (int start = 0; start < inputs.rows; start += batch) {
    const int rows = std::min(batch, inputs.rows - start);
    Mat chunk(rows, inputs.cols);
    std::copy(inputs.row(start),
              inputs.row(start) + static_cast<size_t>(rows) * inputs.cols,
              chunk.data.begin());
    Mat enc = encoder.forward(chunk);
    std::copy(enc.data.begin(), enc.data.end(), out.row(start));
  }
  return out;
}

Mat encode_view(const MlpModel& encoder, const TrainView& view, int batch) {
  return encode_matrix(encoder, gather_all_features(view), batch);
}

namespace {

void normalize_rows(Mat& m) {
  for (int i = 0; i < m.rows; ++i) {
    double* row = m.row(i);
    double norm = 0.0;
    for (int j = 0; j < m.cols; ++j) norm += row[j] * row[j];
    norm = std::max(std::sqrt(norm), 1e-12);
    for (int j = 0; j < m.cols; ++j) row[j] /= norm;
  }
}

// Mean over coordinates of the per-coordinate std across the batch.
double batch_embedding_std(const Mat& emb) {
  double total = 0.0;
  for (int j = 0; j < emb.cols; ++j) {
    double mean = 0.0;
    for (int i = 0; i < emb.rows; ++i) mean += emb.at(i, j);
    mean /= emb.rows;
    double var = 0.0;
    for (int i = 0; i < emb.rows; ++i) {
      const double d = emb.at(i, j) - mean;
      var += d * d;
    }
    total += std::sqrt(var / emb.rows);
  }
  return total / emb.cols;
}

MlpModel extract_encoder(const MlpModel& net, const std::vector<int>& sizes,
                         const std::vector<Activation>& acts) {
  MlpModel enc = MlpModel::zeros(sizes, acts);
  std::copy(net.params().begin(),
            net.params().begin() + static_cast<std::ptrdiff_t>(enc.num_params()),
            enc.mutable_params().begin());
  return enc;
}

}  // namespace

SslResult pretrain_encoder(const TrainView& train,
                           const std::vector<int>& encoder_sizes,
                           const SslConfig& cfg, const AugConfig& aug,
                           const OptimConfig& optim, uint64_t seed,
                           const std::string& out_dir) {
  cfg.validate();
  aug.validate();
  if (train.size() == 0) throw std::invalid_argument("empty training set");
  if (encoder_sizes.size() < 2 || encoder_sizes.front() != train.dim()) {
    throw std::invalid_argument("encoder sizes do not match the data");
  }
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<Activation> enc_acts(encoder_sizes.size() - 1, Activation::Relu);
  enc_acts.back() = Activation::Identity;

  Rng root(seed);
  Rng init_rng = root.substream("ssl.init");
  MlpModel encoder = MlpModel::he_uniform(encoder_sizes, enc_acts, init_rng);
  const int feat_dim = encoder.output_dim();
  MlpModel projector = MlpModel::he_uniform(
      {feat_dim, cfg.proj_dim, cfg.proj_dim},
      {Activation::Relu, Activation::Identity}, init_rng);
  MlpModel net = encoder.stacked_with(projector);
  const int enc_layers = encoder.num_layers();

  SslResult result;
  auto save_epoch = [&](int epoch, long steps) {
    const std::string path =
        (fs::path(out_dir) / ("ssl_epoch_" + std::to_string(epoch) + ".ck"))
            .string();
    save_checkpoint(extract_encoder(net, encoder_sizes, enc_acts), steps, path);
    result.epochs.push_back(epoch);
    result.paths.push_back(path);
  };
  save_epoch(0, 0);

  const size_t n = train.size();
  const int batch = static_cast<int>(
      std::min<size_t>(static_cast<size_t>(cfg.batch), n));
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  LrSchedule sched{optim.lr, std::max(1L, cfg.epochs * steps_per_epoch),
                   LrSchedule::Kind::Cosine};
  OptimState state = OptimState::for_model(net, optim);

  MlpModel ema = net;
  std::vector<double> queue;  // flattened rows of past keys, newest last
  size_t queue_rows = 0;

  Rng shuffle_rng = root.substream("ssl.shuffle");
  Rng aug_rng = root.substream("ssl.augment");
  CollapseMonitor monitor;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (long step = 0; step < steps_per_epoch; ++step) {
      const size_t start = static_cast<size_t>(step) * batch;
      const int rows = static_cast<int>(
          std::min<size_t>(batch, n - std::min(n, start)));
      if (rows < 2) continue;  // a lone sample has no in-batch negative

      Mat q_in(rows, train.dim());
      Mat k_in(rows, train.dim());
      for (int i = 0; i < rows; ++i) {
        const auto x = train.x(order[start + i]);
        const auto v1 = augment(x, aug, aug_rng);
        const auto v2 = augment(x, aug, aug_rng);
        for (int j = 0; j < train.dim(); ++j) {
          q_in.at(i, j) = v1[j];
          k_in.at(i, j) = v2[j];
        }
      }

      MlpModel::ForwardCache cache;
      Mat q_raw = net.forward(q_in, cache);
      Mat k_raw = cfg.use_momentum_encoder ? ema.forward(k_in)
                                           : net.forward(k_in);
      std::vector<double> q_norms(rows);
      for (int i = 0; i < rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < q_raw.cols; ++j) s += q_raw.at(i, j) * q_raw.at(i, j);
        q_norms[i] = std::max(std::sqrt(s), 1e-12);
      }
      Mat q = q_raw;
      normalize_rows(q);
      normalize_rows(k_raw);

      Mat k_all(rows + static_cast<int>(queue_rows), cfg.proj_dim);
      std::copy(k_raw.data.begin(), k_raw.data.end(), k_all.data.begin());
      std::copy(queue.begin(), queue.end(),
                k_all.data.begin() + k_raw.data.size());

      auto nce = ssl_batch_loss(q, k_all, cfg.temperature);
      result.final_loss = nce.loss;

      // Through the row normalization: du = (dq - q (q . dq)) / |u|.
      Mat dq_raw(rows, q.cols);
      for (int i = 0; i < rows; ++i) {
        const double* qi = q.row(i);
        const double* gi = nce.dq.row(i);
        double proj = 0.0;
        for (int j = 0; j < q.cols; ++j) proj += qi[j] * gi[j];
        double* out = dq_raw.row(i);
        for (int j = 0; j < q.cols; ++j) {
          out[j] = (gi[j] - qi[j] * proj) / q_norms[i];
        }
      }

      auto grad = net.backward(cache, dq_raw);
      adamw_step(net, state, grad, lr_at(sched, state.step_count));

      if (cfg.use_momentum_encoder) {
        auto ep = ema.mutable_params();
        const auto np = net.params();
        for (size_t i = 0; i < ep.size(); ++i) {
          ep[i] = cfg.momentum * ep[i] + (1.0 - cfg.momentum) * np[i];
        }
      }
      if (cfg.queue_size > 0) {
        for (int i = 0; i < rows; ++i) {
          queue.insert(queue.end(), k_raw.row(i), k_raw.row(i) + k_raw.cols);
          queue_rows += 1;
        }
        while (queue_rows > static_cast<size_t>(cfg.queue_size)) {
          queue.erase(queue.begin(), queue.begin() + cfg.proj_dim);
          queue_rows -= 1;
        }
      }

      const Mat& enc_out = cache.post[enc_layers - 1];
      if (monitor.feed(batch_embedding_std(enc_out))) {
        throw std::runtime_error(
            "ssl pretraining collapsed: encoder output std below 1e-4 for 50 "
            "consecutive steps (epoch " +
            std::to_string(epoch) + ")");
      }
    }
    if (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs) {
      save_epoch(epoch, state.step_count);
    }
  }

  nlohmann::json index;
  index["epochs"] = result.epochs;
  nlohmann::json files = nlohmann::json::object();
  for (size_t i = 0; i < result.epochs.size(); ++i) {
    files[std::to_string(result.epochs[i])] =
        fs::path(result.paths[i]).filename().string();
  }
  index["files"] = files;
  result.index_path = (fs::path(out_dir) / "index.json").string();
  std::ofstream out(result.index_path, std::ios::trunc);
  out << index.dump(2) << '\n';
  return result;
}

MlpModel train_linear_head(const Mat& features, std::span<const int> labels,
                           int num_classes, const ProbeBudget& budget,
                           const OptimConfig& optim, int batch, uint64_t seed) {
  if (features.rows == 0 ||
      labels.size() != static_cast<size_t>(features.rows)) {
    throw std::invalid_argument("features/labels mismatch");
  }
  Rng root(seed);
  Rng init_rng = root.substream("probe.init");
  MlpModel head = MlpModel::he_uniform({features.cols, num_classes},
                                       {Activation::Identity}, init_rng);
  if (budget.amount == 0) return head;
  if (budget.amount < 0) throw std::invalid_argument("negative probe budget");

  const size_t n = static_cast<size_t>(features.rows);
  const int b = static_cast<int>(std::min<size_t>(batch, n));
  const long steps_per_epoch = static_cast<long>((n + b - 1) / b);
  const long total_steps =
      budget.in_steps ? budget.amount : budget.amount * steps_per_epoch;
  LrSchedule sched{optim.lr, total_steps, LrSchedule::Kind::Cosine};
  OptimState state = OptimState::for_model(head, optim);

  Rng shuffle_rng = root.substream("probe.shuffle");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  long done = 0;
  while (done < total_steps) {
    shuffle_rng.shuffle(order);
    for (long step = 0; step < steps_per_epoch && done < total_steps; ++step) {
      const size_t start = static_cast<size_t>(step) * b;
      const int rows =
          static_cast<int>(std::min<size_t>(b, n - std::min(n, start)));
      if (rows == 0) continue;
      Mat xb(rows, features.cols);
      std::vector<int> yb(rows);
      for (int i = 0; i < rows; ++i) {
        const size_t src = order[start + i];
        std::copy(features.row(static_cast<int>(src)),
                  features.row(static_cast<int>(src)) + features.cols,
                  xb.row(i));
        yb[i] = labels[src];
      }
      MlpModel::ForwardCache cache;
      Mat logits = head.forward(xb, cache);
      Mat offsets(rows, num_classes);
      auto ce = ce_loss_with_offset(logits, offsets, yb);
      auto grad = head.backward(cache, ce.dlogits);
      adamw_step(head, state, grad, lr_at(sched, state.step_count));
      done += 1;
    }
  }
  return head;
}

double online_probe_score(const MlpModel& encoder, const TrainView& train,
                          const TrainView& valid, int probe_epochs,
                          uint64_t seed) {
  Mat train_feat = encode_view(encoder, train);
  Mat valid_feat = encode_view(encoder, valid);
  auto labels = gather_labels(train);
  OptimConfig optim;
  optim.lr = 5e-2;
  ProbeBudget budget;
  budget.amount = probe_epochs;
  MlpModel head = train_linear_head(train_feat, labels, train.num_classes(),
                                    budget, optim, 256, seed);
  auto preds = predict_labels(head, valid_feat);
  auto valid_labels = gather_labels(valid);
  return iid_accuracy(preds, valid_labels);
}

}  // namespace ula
