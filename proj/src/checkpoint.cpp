#include "ula/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ula {

namespace {

void put_f32_le(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
  const uint32_t bits = static_cast<uint32_t>(p[0]) |
                        (static_cast<uint32_t>(p[1]) << 8) |
                        (static_cast<uint32_t>(p[2]) << 16) |
                        (static_cast<uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const MlpModel& model, long step_count,
                     const std::string& path) {
  nlohmann::json header;
  header["format"] = "ULCK";
  header["version"] = 1;
  header["layer_sizes"] = model.layer_sizes();
  std::vector<std::string> acts;
  for (Activation a : model.activations()) acts.push_back(activation_name(a));
  header["activations"] = acts;
  header["step_count"] = step_count;
  header["param_count"] = model.num_params();

  std::string blob = header.dump();
  blob.push_back('\n');
  for (double p : model.params()) put_f32_le(blob, static_cast<float>(p));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for write: " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  const size_t nl = content.find('\n');
  if (nl == std::string::npos) {
    throw std::runtime_error("checkpoint format error: missing header line in " +
                             path);
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(content.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint format error: bad header in " + path +
                             ": " + e.what());
  }
  if (header.value("format", "") != "ULCK") {
    throw std::runtime_error("checkpoint format error: bad magic in " + path);
  }
  if (header.value("version", -1) != 1) {
    throw std::runtime_error("checkpoint format error: unsupported version in " +
                             path);
  }
  std::vector<int> sizes = header.at("layer_sizes").get<std::vector<int>>();
  std::vector<Activation> acts;
  for (const auto& name : header.at("activations")) {
    acts.push_back(activation_from_name(name.get<std::string>()));
  }
  const size_t param_count = header.at("param_count").get<size_t>();

  Checkpoint ck;
  ck.step_count = header.at("step_count").get<long>();
  ck.model = MlpModel::zeros(std::move(sizes), std::move(acts));
  if (ck.model.num_params() != param_count) {
    throw std::runtime_error("checkpoint format error: param_count mismatch in " +
                             path);
  }
  const size_t payload = content.size() - nl - 1;
  if (payload != param_count * 4) {
    throw std::runtime_error("checkpoint format error: truncated parameters in " +
                             path);
  }
  const unsigned char* p =
      reinterpret_cast<const unsigned char*>(content.data()) + nl + 1;
  auto params = ck.model.mutable_params();
  for (size_t i = 0; i < param_count; ++i) {
    params[i] = static_cast<double>(get_f32_le(p + i * 4));
  }
  return ck;
}

}  // namespace ula
