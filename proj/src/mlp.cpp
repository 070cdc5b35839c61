#include "ula/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "ula/kernels.hpp"

namespace ula {

const char* activation_name(Activation a) {
  return a == Activation::Relu ? "relu" : "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

MlpModel::MlpModel(std::vector<int> sizes, std::vector<Activation> acts)
    : sizes_(std::move(sizes)), acts_(std::move(acts)) {
  if (sizes_.size() < 2 || acts_.size() != sizes_.size() - 1) {
    throw std::invalid_argument("layer_sizes/activations mismatch");
  }
  size_t total = 0;
  for (size_t l = 0; l < acts_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) {
      throw std::invalid_argument("layer sizes must be positive");
    }
    w_off_.push_back(total);
    total += static_cast<size_t>(sizes_[l]) * sizes_[l + 1];
    b_off_.push_back(total);
    total += sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

MlpModel MlpModel::zeros(std::vector<int> layer_sizes,
                         std::vector<Activation> activations) {
  return MlpModel(std::move(layer_sizes), std::move(activations));
}

MlpModel MlpModel::he_uniform(std::vector<int> layer_sizes,
                              std::vector<Activation> activations, Rng& rng) {
  MlpModel m(std::move(layer_sizes), std::move(activations));
  for (int l = 0; l < m.num_layers(); ++l) {
    const int fan_in = m.sizes_[l];
    const double limit = std::sqrt(6.0 / fan_in);
    double* w = m.params_.data() + m.w_off_[l];
    const size_t count = static_cast<size_t>(fan_in) * m.sizes_[l + 1];
    for (size_t i = 0; i < count; ++i) w[i] = rng.uniform(-limit, limit);
  }
  return m;
}

size_t MlpModel::weight_offset(int layer) const { return w_off_.at(layer); }
size_t MlpModel::bias_offset(int layer) const { return b_off_.at(layer); }

void MlpModel::check_batch(const Mat& batch) const {
  if (batch.cols != input_dim()) {
    throw std::invalid_argument(
        "batch dim " + std::to_string(batch.cols) + " != model input dim " +
        std::to_string(input_dim()));
  }
  if (!batch.all_finite()) {
    throw std::invalid_argument("non-finite entries in input batch");
  }
}

Mat MlpModel::forward(const Mat& batch) const {
  ForwardCache cache;
  return forward(batch, cache);
}

Mat MlpModel::forward(const Mat& batch, ForwardCache& cache) const {
  check_batch(batch);
  const int b = batch.rows;
  cache.input = batch;
  cache.pre.assign(num_layers(), Mat());
  cache.post.assign(num_layers(), Mat());

  const Mat* cur = &cache.input;
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Mat z(b, out);
    kernels::matmul_nn(z.data.data(), cur->data.data(),
                       params_.data() + w_off_[l], b, in, out);
    const double* bias = params_.data() + b_off_[l];
    for (int i = 0; i < b; ++i) {
      double* zr = z.row(i);
      for (int j = 0; j < out; ++j) zr[j] += bias[j];
    }
    cache.pre[l] = z;
    if (acts_[l] == Activation::Relu) {
      for (double& x : z.data) x = x > 0.0 ? x : 0.0;
    }
    cache.post[l] = std::move(z);
    cur = &cache.post[l];
  }
  return cache.post.back();
}

std::vector<double> MlpModel::backward(const ForwardCache& cache,
                                       const Mat& dlogits) const {
  if (cache.pre.size() != static_cast<size_t>(num_layers()) ||
      cache.input.rows == 0) {
    throw std::logic_error("backward called without a matching forward cache");
  }
  const int b = cache.input.rows;
  if (dlogits.rows != b || dlogits.cols != output_dim()) {
    throw std::invalid_argument("dlogits shape mismatch");
  }

  std::vector<double> grad(params_.size(), 0.0);
  Mat delta = dlogits;  // gradient w.r.t. post-activation of last layer

  for (int l = num_layers() - 1; l >= 0; --l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    // Through the activation. The last layer's dlogits is taken w.r.t. the
    // pre-activation output when the activation is identity; with relu the
    // mask applies the same way.
    if (acts_[l] == Activation::Relu) {
      const Mat& pre = cache.pre[l];
      for (size_t i = 0; i < delta.data.size(); ++i) {
        if (pre.data[i] <= 0.0) delta.data[i] = 0.0;
      }
    }
    const Mat& x = (l == 0) ? cache.input : cache.post[l - 1];
    // dW = x^T * delta, db = column sums of delta.
    kernels::matmul_tn(grad.data() + w_off_[l], x.data.data(),
                       delta.data.data(), in, b, out);
    double* db = grad.data() + b_off_[l];
    for (int i = 0; i < b; ++i) {
      const double* dr = delta.row(i);
      for (int j = 0; j < out; ++j) db[j] += dr[j];
    }
    if (l > 0) {
      Mat dx(b, in);
      kernels::matmul_nt(dx.data.data(), delta.data.data(),
                         params_.data() + w_off_[l], b, out, in);
      delta = std::move(dx);
    }
  }
  return grad;
}

MlpModel MlpModel::stacked_with(const MlpModel& head) const {
  if (head.input_dim() != output_dim()) {
    throw std::invalid_argument("head input dim does not match encoder output");
  }
  std::vector<int> sizes = sizes_;
  sizes.insert(sizes.end(), head.sizes_.begin() + 1, head.sizes_.end());
  std::vector<Activation> acts = acts_;
  acts.insert(acts.end(), head.acts_.begin(), head.acts_.end());
  MlpModel out(std::move(sizes), std::move(acts));
  std::copy(params_.begin(), params_.end(), out.params_.begin());
  std::copy(head.params_.begin(), head.params_.end(),
            out.params_.begin() + static_cast<std::ptrdiff_t>(params_.size()));
  return out;
}

std::vector<int> argmax_rows(const Mat& logits) {
  std::vector<int> out(logits.rows);
  for (int i = 0; i < logits.rows; ++i) {
    out[i] = argmax(std::span<const double>(logits.row(i),
                                            static_cast<size_t>(logits.cols)));
  }
  return out;
}

std::vector<int> predict_labels(const MlpModel& model, const Mat& inputs,
                                int batch) {
  std::vector<int> preds;
  preds.reserve(inputs.rows);
  for (int start = 0; start < inputs.rows; start += batch) {
    const int rows = std::min(batch, inputs.rows - start);
    Mat chunk(rows, inputs.cols);
    std::copy(inputs.row(start), inputs.row(start) + static_cast<size_t>(rows) * inputs.cols,
              chunk.data.begin());
    Mat logits = model.forward(chunk);
    for (int i = 0; i < rows; ++i) {
      preds.push_back(argmax(std::span<const double>(
          logits.row(i), static_cast<size_t>(logits.cols))));
    }
  }
  return preds;
}

}  // namespace ula
