#include "catchad/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace catchad {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw std::invalid_argument("not a number: '" + v + "'");
  return x;
}

long long to_integer(const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0' || errno == ERANGE) throw std::invalid_argument("not an integer: '" + v + "'");
  return x;
}

std::uint64_t to_unsigned(const std::string& v) {
  if (v.empty() || v[0] == '-') throw std::invalid_argument("not an unsigned integer: '" + v + "'");
  errno = 0;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (*end != '\0' || errno == ERANGE) throw std::invalid_argument("not an unsigned integer: '" + v + "'");
  return x;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CATCH_REAL(KEY, MEMBER)                                                  \
  Field{KEY, [](RunConfig& c, const std::string& v) { c.MEMBER = to_double(v); }, \
        [](const RunConfig& c) { return num(c.MEMBER); }}
#define CATCH_INT(KEY, MEMBER)                                                                     \
  Field{KEY,                                                                                       \
        [](RunConfig& c, const std::string& v) { c.MEMBER = static_cast<decltype(c.MEMBER)>(to_integer(v)); }, \
        [](const RunConfig& c) { return std::to_string(c.MEMBER); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CATCH_INT("channels", model.channels),
      CATCH_INT("window", model.window),
      CATCH_INT("patch_size", model.patch_size),
      CATCH_INT("patch_stride", model.patch_stride),
      CATCH_INT("d_model", model.d_model),
      CATCH_INT("heads", model.heads),
      CATCH_INT("layers", model.layers),
      CATCH_INT("d_ff", model.d_ff),
      Field{"tau",
            [](RunConfig& c, const std::string& v) { c.model.tau = c.train.weights.tau = to_double(v); },
            [](const RunConfig& c) { return num(c.model.tau); }},
      CATCH_REAL("loss_tau", train.weights.tau),
      CATCH_REAL("dropout", model.dropout),
      CATCH_REAL("eta_model", train.eta_model),
      CATCH_REAL("eta_mask", train.eta_mask),
      CATCH_INT("outer_iterations", train.outer_iterations),
      CATCH_INT("inner_iterations", train.inner_iterations),
      CATCH_INT("batch_size", train.batch_size),
      CATCH_REAL("epochs", train.epochs),
      Field{"seed", [](RunConfig& c, const std::string& v) { c.train.seed = to_unsigned(v); },
            [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      CATCH_REAL("lambda_rec_time", train.weights.rec_time),
      CATCH_REAL("lambda_rec_freq", train.weights.rec_freq),
      CATCH_REAL("lambda_clustering", train.weights.clustering),
      CATCH_REAL("lambda_regular", train.weights.regular),
      CATCH_REAL("beta1", train.beta1),
      CATCH_REAL("beta2", train.beta2),
      CATCH_REAL("adam_eps", train.adam_eps),
      CATCH_INT("train_stride", train_stride),
      CATCH_INT("inference_patch_size", score.inference_patch_size),
      CATCH_INT("inference_patch_stride", score.inference_patch_stride),
      CATCH_REAL("score_lambda", score.score_lambda),
      CATCH_REAL("threshold_ratio", score.threshold_ratio),
      Field{"score_mode", [](RunConfig& c, const std::string& v) { c.score.mode = parse_score_mode(v); },
            [](const RunConfig& c) { return to_string(c.score.mode); }},
  };
  return table;
}

#undef CATCH_REAL
#undef CATCH_INT

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  score.validate(model.window);
  if (train_stride < 1) throw std::invalid_argument("train_stride must be >= 1");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

RunConfig parse_config(const std::string& text, const RunConfig& base) {
  RunConfig config = base;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields())
      if (f.key == key) field = &f;
    if (!field)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    try {
      field->set(config, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ", key '" + key + "': " + e.what());
    }
    config.explicit_keys.insert(key);
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(config) + "\n";
  return out;
}

}  // namespace catchad
