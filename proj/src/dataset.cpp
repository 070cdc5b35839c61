#include "ula/dataset.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ula {

Mat gather_features(const TrainView& view, std::span<const size_t> indices) {
  Mat out(static_cast<int>(indices.size()), view.dim());
  for (size_t r = 0; r < indices.size(); ++r) {
    const auto x = view.x(indices[r]);
    double* row = out.row(static_cast<int>(r));
    for (int j = 0; j < view.dim(); ++j) row[j] = x[j];
  }
  return out;
}

Mat gather_all_features(const TrainView& view) {
  Mat out(static_cast<int>(view.size()), view.dim());
  for (size_t r = 0; r < view.size(); ++r) {
    const auto x = view.x(r);
    double* row = out.row(static_cast<int>(r));
    for (int j = 0; j < view.dim(); ++j) row[j] = x[j];
  }
  return out;
}

std::vector<int> gather_labels(const TrainView& view) {
  std::vector<int> labels(view.size());
  for (size_t i = 0; i < view.size(); ++i) labels[i] = view.label(i);
  return labels;
}

namespace {

constexpr char kMagic[4] = {'U', 'L', 'A', 'D'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& out, uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_f32(std::string& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class Reader {
 public:
  Reader(const std::string& content, const std::string& path)
      : c_(content), path_(path) {}

  void need(size_t n) const {
    if (pos_ + n > c_.size()) {
      throw std::runtime_error("dataset format error: truncated file " + path_);
    }
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<uint32_t>(static_cast<unsigned char>(c_[pos_ + i]))
           << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<uint64_t>(static_cast<unsigned char>(c_[pos_ + i]))
           << (8 * i);
    pos_ += 8;
    return v;
  }
  uint16_t u16() {
    need(2);
    const auto v = static_cast<uint16_t>(
        static_cast<unsigned char>(c_[pos_]) |
        (static_cast<unsigned char>(c_[pos_ + 1]) << 8));
    pos_ += 2;
    return v;
  }
  float f32() {
    const uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = c_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  size_t remaining() const { return c_.size() - pos_; }

 private:
  const std::string& c_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

void write_dataset(const Dataset& d, const std::string& path) {
  if (d.y.size() != d.z.size() ||
      d.features.size() != d.y.size() * static_cast<size_t>(d.dim)) {
    throw std::invalid_argument("dataset arrays are inconsistent");
  }
  nlohmann::json header;
  header["K"] = d.K;
  header["L"] = d.L;
  header["split"] = d.split;
  header["provenance"] = {{"generator", d.provenance.generator},
                          {"seed", d.provenance.seed},
                          {"params", d.provenance.params}};
  header["z_section"] = "evaluation-only";

  std::string blob;
  blob.append(kMagic, 4);
  put_u32(blob, kVersion);
  const std::string htext = header.dump();
  put_u32(blob, static_cast<uint32_t>(htext.size()));
  blob.append(htext);
  put_u64(blob, d.size());
  put_u64(blob, static_cast<uint64_t>(d.dim));
  for (float f : d.features) put_f32(blob, f);
  for (uint16_t v : d.y) put_u16(blob, v);
  for (uint16_t v : d.z) put_u16(blob, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open dataset for write: " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("short write on dataset: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  Reader r(content, path);

  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw std::runtime_error("dataset format error: bad magic in " + path);
  }
  const uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("dataset format error: unsupported version " +
                             std::to_string(version) + " in " + path);
  }
  const uint32_t hlen = r.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("dataset format error: bad header in " + path +
                             ": " + e.what());
  }

  Dataset d;
  d.K = header.at("K").get<int>();
  d.L = header.at("L").get<int>();
  d.split = header.at("split").get<std::string>();
  const auto& prov = header.at("provenance");
  d.provenance.generator = prov.at("generator").get<std::string>();
  d.provenance.seed = prov.at("seed").get<uint64_t>();
  d.provenance.params = prov.at("params");

  const uint64_t n = r.u64();
  const uint64_t dim = r.u64();
  d.dim = static_cast<int>(dim);
  r.need(n * dim * 4 + n * 2 + n * 2);
  d.features.resize(n * dim);
  for (auto& f : d.features) f = r.f32();
  d.y.resize(n);
  for (auto& v : d.y) v = r.u16();
  d.z.resize(n);
  for (auto& v : d.z) v = r.u16();
  if (r.remaining() != 0) {
    throw std::runtime_error("dataset format error: trailing bytes in " + path);
  }
  return d;
}

}  // namespace ula
