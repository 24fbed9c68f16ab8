#include "catchad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace catchad {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw std::runtime_error("checkpoint truncated at byte " + std::to_string(pos_));
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

ParamGroup group_for(const std::string& name) {
  return name.rfind("mask_generator.", 0) == 0 ? ParamGroup::Mask : ParamGroup::Model;
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params, const RunConfig& config) {
  std::string out(kCheckpointMagic);
  const std::string text = to_config_text(config);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& t : params.tensors()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(t.value.cols()));
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c) put<float>(out, static_cast<float>(t.value(r, c)));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  const std::size_t magic_len = std::strlen(kCheckpointMagic);
  if (bytes.compare(0, magic_len, kCheckpointMagic) != 0)
    throw std::runtime_error("not a checkpoint: missing CATCH1 header");
  Reader r(bytes);
  r.text(magic_len);
  Checkpoint ck;
  ck.config = parse_config(r.text(r.get<std::uint32_t>()));
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.text(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank < 1 || rank > 2) throw std::runtime_error("checkpoint tensor '" + name + "' has unsupported rank");
    std::uint64_t rows = 1, cols = r.get<std::uint64_t>();
    if (rank == 2) {
      rows = cols;
      cols = r.get<std::uint64_t>();
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index a = 0; a < m.rows(); ++a)
      for (Eigen::Index b = 0; b < m.cols(); ++b) m(a, b) = static_cast<double>(r.get<float>());
    const ParamGroup g = group_for(name);
    ck.params.add(std::move(name), std::move(m), g);
  }
  if (!r.done()) throw std::runtime_error("checkpoint has trailing bytes");
  check_params(ck.params, ck.config.model);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const RunConfig& config) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(params, config);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

ModelParams round_to_float(const ModelParams& params) {
  ModelParams out = params;
  for (auto& t : out.tensors()) t.value = t.value.cast<float>().cast<double>();
  return out;
}

}  // namespace catchad
