#include "meshnet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

struct Entry {
  std::string value;
  std::size_t line;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const Entry& e, const std::string& why) {
  throw ConfigError("line " + std::to_string(e.line) + ": " + key + " = '" + e.value + "': " + why);
}

std::uint64_t to_uint(const std::string& key, const Entry& e) {
  std::uint64_t v = 0;
  const auto* end = e.value.data() + e.value.size();
  auto [p, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || p != end) bad(key, e, "expected a non-negative integer");
  return v;
}

double to_double(const std::string& key, const Entry& e) {
  double v = 0;
  const auto* end = e.value.data() + e.value.size();
  auto [p, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc() || p != end) bad(key, e, "expected a number");
  return v;
}

std::vector<std::size_t> to_list(const std::string& key, const Entry& e) {
  std::vector<std::size_t> out;
  std::string_view rest = e.value;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || p != item.data() + item.size()) {
      bad(key, e, "expected a comma-separated list of non-negative integers");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  if (out.empty()) bad(key, e, "list must not be empty");
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view task_name(Task task) { return task == Task::kClassification ? "classification" : "segmentation"; }
std::string_view feature_mode_name(FeatureMode mode) { return mode == FeatureMode::kInvariant ? "invariant" : "midpoint"; }
std::string_view pool_mode_name(PoolMode mode) { return mode == PoolMode::kByNorm ? "norm" : "random"; }

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "task",       "data_dir",      "checkpoint",     "metrics_file",  "input_edges",       "pool_targets",
      "conv_channels", "fc_dims",    "num_classes",    "feature_mode",  "pooling",           "norm_groups",
      "lr",         "epochs",        "batch_size",     "seed",          "threads",           "aniso_sigma",
      "slide_fraction", "flip_fraction", "collapse_fraction"};
  return keys;
}

RunConfig parse_config(std::istream& in) {
  std::map<std::string, Entry> entries;
  std::string raw;
  std::size_t lineno = 0;
  const auto& keys = config_keys();
  while (std::getline(in, raw)) {
    ++lineno;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + std::string(line) + "'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      std::string valid;
      for (const auto& k : keys) valid += (valid.empty() ? "" : ", ") + k;
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'; valid keys: " + valid);
    }
    if (!entries.emplace(key, Entry{value, lineno}).second) {
      throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' given twice");
    }
  }

  auto has = [&](const char* k) { return entries.count(k) > 0; };
  auto get = [&](const char* k) -> const Entry& { return entries.at(k); };

  Task task = Task::kClassification;
  if (has("task")) {
    const auto& v = get("task").value;
    if (v == "classification" || v == "cls") {
      task = Task::kClassification;
    } else if (v == "segmentation" || v == "seg") {
      task = Task::kSegmentation;
    } else {
      bad("task", get("task"), "expected classification or segmentation");
    }
  }
  std::size_t num_classes = 2;
  if (has("num_classes")) num_classes = to_uint("num_classes", get("num_classes"));

  RunConfig c;
  c.network = default_network_config(task, num_classes);
  if (task == Task::kSegmentation) c.augment.flip_fraction = 0.0;

  if (has("feature_mode")) {
    const auto& v = get("feature_mode").value;
    if (v == "invariant") {
      c.feature_mode = FeatureMode::kInvariant;
    } else if (v == "midpoint") {
      c.feature_mode = FeatureMode::kMidpoint;
    } else {
      bad("feature_mode", get("feature_mode"), "expected invariant or midpoint");
    }
  }
  c.network.input_channels = c.feature_mode == FeatureMode::kInvariant ? kInvariantChannels : kMidpointChannels;

  if (has("pooling")) {
    const auto& v = get("pooling").value;
    if (v == "norm") {
      c.network.pooling = PoolMode::kByNorm;
    } else if (v == "random") {
      c.network.pooling = PoolMode::kRandom;
    } else {
      bad("pooling", get("pooling"), "expected norm or random");
    }
  }
  if (has("data_dir")) c.data_dir = get("data_dir").value;
  if (has("checkpoint")) c.checkpoint = get("checkpoint").value;
  if (has("metrics_file")) c.metrics_file = get("metrics_file").value;
  if (has("input_edges")) c.network.input_edges = to_uint("input_edges", get("input_edges"));
  if (has("pool_targets")) c.network.pool_targets = to_list("pool_targets", get("pool_targets"));
  if (has("conv_channels")) c.network.conv_channels = to_list("conv_channels", get("conv_channels"));
  if (has("fc_dims")) c.network.fc_dims = to_list("fc_dims", get("fc_dims"));
  if (has("norm_groups")) c.network.norm_groups = to_uint("norm_groups", get("norm_groups"));
  if (has("lr")) c.train.lr = to_double("lr", get("lr"));
  if (has("epochs")) c.train.epochs = to_uint("epochs", get("epochs"));
  if (has("batch_size")) c.train.batch_size = to_uint("batch_size", get("batch_size"));
  if (has("seed")) c.train.seed = to_uint("seed", get("seed"));
  if (has("threads")) c.train.threads = to_uint("threads", get("threads"));
  if (has("aniso_sigma")) c.augment.aniso_sigma = to_double("aniso_sigma", get("aniso_sigma"));
  if (has("slide_fraction")) c.augment.slide_fraction = to_double("slide_fraction", get("slide_fraction"));
  if (has("flip_fraction")) c.augment.flip_fraction = to_double("flip_fraction", get("flip_fraction"));
  if (has("collapse_fraction")) c.augment.collapse_fraction = to_double("collapse_fraction", get("collapse_fraction"));
  if (task == Task::kSegmentation && has("fc_dims")) {
    throw ConfigError("line " + std::to_string(get("fc_dims").line) + ": fc_dims applies to classification only");
  }
  validate(c);
  return c;
}

RunConfig parse_config(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_config(in);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in);
}

void validate(const RunConfig& c) {
  validate(c.network);
  validate(c.augment);
  const auto expected = c.feature_mode == FeatureMode::kInvariant ? kInvariantChannels : kMidpointChannels;
  if (c.network.input_channels != expected) throw ConfigError("input channels do not match feature_mode");
  if (!(c.train.lr >= 0)) throw ConfigError("lr must be >= 0");
  if (c.train.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (c.train.threads < 1) throw ConfigError("threads must be at least 1");
  if (c.network.task == Task::kSegmentation && (c.augment.flip_fraction > 0 || c.augment.collapse_fraction > 0)) {
    throw ConfigError("flip_fraction and collapse_fraction change topology and would misalign edge labels; "
                      "they must be 0 for segmentation");
  }
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "task = " << task_name(c.network.task) << '\n';
  out << "data_dir = " << c.data_dir << '\n';
  out << "checkpoint = " << c.checkpoint << '\n';
  out << "metrics_file = " << c.metrics_file << '\n';
  out << "input_edges = " << c.network.input_edges << '\n';
  out << "pool_targets = " << join(c.network.pool_targets) << '\n';
  out << "conv_channels = " << join(c.network.conv_channels) << '\n';
  if (c.network.task == Task::kClassification) out << "fc_dims = " << join(c.network.fc_dims) << '\n';
  out << "num_classes = " << c.network.num_classes << '\n';
  out << "feature_mode = " << feature_mode_name(c.feature_mode) << '\n';
  out << "pooling = " << pool_mode_name(c.network.pooling) << '\n';
  out << "norm_groups = " << c.network.norm_groups << '\n';
  out << "lr = " << fmt_double(c.train.lr) << '\n';
  out << "epochs = " << c.train.epochs << '\n';
  out << "batch_size = " << c.train.batch_size << '\n';
  out << "seed = " << c.train.seed << '\n';
  out << "threads = " << c.train.threads << '\n';
  out << "aniso_sigma = " << fmt_double(c.augment.aniso_sigma) << '\n';
  out << "slide_fraction = " << fmt_double(c.augment.slide_fraction) << '\n';
  out << "flip_fraction = " << fmt_double(c.augment.flip_fraction) << '\n';
  out << "collapse_fraction = " << fmt_double(c.augment.collapse_fraction) << '\n';
  return out.str();
}

}  // namespace meshnet
