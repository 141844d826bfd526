#include "meshnet/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "meshnet/error.hpp"

namespace meshnet {
namespace {

constexpr const char* kMagic = "meshnet-checkpoint";

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
  return s;
}

std::string join_shape(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "x" : "") + std::to_string(v[i]);
  return s;
}

std::vector<double> parse_doubles(const std::string& s, std::size_t line) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size() && !s.empty()) {
    auto comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    double v = 0;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + comma, v);
    if (ec != std::errc() || p != s.data() + comma) throw ParseError("bad number list '" + s + "'", line);
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::size_t parse_size(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("bad integer '" + s + "'", line);
  return v;
}

std::vector<std::size_t> parse_shape(const std::string& s, std::size_t line) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto x = s.find('x', pos);
    if (x == std::string::npos) x = s.size();
    out.push_back(parse_size(s.substr(pos, x - pos), line));
    pos = x + 1;
  }
  return out;
}

void put_floats(std::string& buf, const Tensor<float>& t) {
  for (float f : t.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int k = 0; k < 4; ++k) buf.push_back(static_cast<char>((bits >> (8 * k)) & 0xffu));
  }
}

void get_floats(const std::string& buf, std::size_t offset, Tensor<float>& t) {
  if (offset + 4 * t.size() > buf.size()) throw ParseError("checkpoint payload is truncated");
  auto data = t.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[offset + 4 * i + k])) << (8 * k);
    data[i] = std::bit_cast<float>(bits);
  }
}

struct Manifest {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset;
};

}  // namespace

bool Checkpoint::operator==(const Checkpoint& o) const {
  if (!(config == o.config && stats == o.stats && adam == o.adam && epoch == o.epoch)) return false;
  if (parameters.size() != o.parameters.size()) return false;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    if (parameters[i].name != o.parameters[i].name || !(parameters[i].value == o.parameters[i].value)) return false;
  }
  return true;
}

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out) {
  std::string payload;
  std::ostringstream manifest;
  auto add = [&](const std::string& name, const Tensor<float>& t) {
    manifest << "tensor " << name << ' ' << join_shape(t.shape()) << ' ' << payload.size() << '\n';
    put_floats(payload, t);
  };
  for (const auto& p : ckpt.parameters) add(p.name, p.value);
  if (ckpt.adam) {
    for (std::size_t i = 0; i < ckpt.parameters.size(); ++i) {
      if (i < ckpt.adam->m.size() && !ckpt.adam->m[i].empty()) add("adam_m:" + ckpt.parameters[i].name, ckpt.adam->m[i]);
      if (i < ckpt.adam->v.size() && !ckpt.adam->v[i].empty()) add("adam_v:" + ckpt.parameters[i].name, ckpt.adam->v[i]);
    }
  }
  out << kMagic << ' ' << kCheckpointVersion << '\n';
  out << "[config]\n" << serialize_config(ckpt.config);
  out << "[state]\n";
  out << "epoch = " << ckpt.epoch << '\n';
  out << "stats_mean = " << join_doubles(ckpt.stats.mean) << '\n';
  out << "stats_std = " << join_doubles(ckpt.stats.std) << '\n';
  if (ckpt.adam) out << "adam_step = " << ckpt.adam->step << '\n';
  out << "payload_bytes = " << payload.size() << '\n';
  out << "[tensors]\n" << manifest.str();
  out << "end_header\n";
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("failed to write checkpoint");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  write_checkpoint(ckpt, out);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw ParseError("checkpoint header ends early", lineno);
    ++lineno;
    return line;
  };
  {
    const auto first = next();
    if (first != std::string(kMagic) + ' ' + std::to_string(kCheckpointVersion)) {
      throw ParseError("not a version " + std::to_string(kCheckpointVersion) + " checkpoint", lineno);
    }
  }
  if (next() != "[config]") throw ParseError("expected [config]", lineno);
  std::string config_text;
  while (next() != "[state]") config_text += line + '\n';

  Checkpoint ckpt;
  try {
    ckpt.config = parse_config(std::string_view(config_text));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("checkpoint config: ") + e.what());
  }

  std::size_t payload_bytes = 0;
  bool has_adam = false;
  std::int64_t adam_step = 0;
  while (next() != "[tensors]") {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 3);
    if (key == "epoch") {
      ckpt.epoch = parse_size(value, lineno);
    } else if (key == "stats_mean") {
      ckpt.stats.mean = value.empty() ? std::vector<double>{} : parse_doubles(value, lineno);
    } else if (key == "stats_std") {
      ckpt.stats.std = value.empty() ? std::vector<double>{} : parse_doubles(value, lineno);
    } else if (key == "adam_step") {
      has_adam = true;
      adam_step = static_cast<std::int64_t>(parse_size(value, lineno));
    } else if (key == "payload_bytes") {
      payload_bytes = parse_size(value, lineno);
    } else {
      throw ParseError("unknown state key '" + key + "'", lineno);
    }
  }
  std::vector<Manifest> entries;
  while (next() != "end_header") {
    std::istringstream ls(line);
    std::string tag, name, shape, offset;
    if (!(ls >> tag >> name >> shape >> offset) || tag != "tensor") throw ParseError("bad tensor line", lineno);
    entries.push_back({name, parse_shape(shape, lineno), parse_size(offset, lineno)});
  }
  std::string payload(payload_bytes, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<std::size_t>(in.gcount()) != payload_bytes) throw ParseError("checkpoint payload is truncated");

  Network reference(ckpt.config.network);
  const auto& ref = reference.parameters();
  if (has_adam) {
    ckpt.adam = AdamMoments{};
    ckpt.adam->step = adam_step;
    ckpt.adam->m.resize(ref.size());
    ckpt.adam->v.resize(ref.size());
  }
  std::size_t next_param = 0;
  for (const auto& e : entries) {
    Tensor<float> t(e.shape);
    get_floats(payload, e.offset, t);
    auto slot_of = [&](const std::string& n) -> std::size_t {
      for (std::size_t i = 0; i < ref.size(); ++i)
        if (ref[i].name == n) return i;
      throw ShapeError("checkpoint tensor '" + n + "' is not part of the configured network");
    };
    auto check = [&](std::size_t i) {
      if (ref[i].value.shape() != e.shape) {
        throw ShapeError("checkpoint tensor '" + ref[i].name + "' has shape " + shape_string(e.shape) +
                         ", network expects " + shape_string(ref[i].value.shape()));
      }
    };
    if (e.name.rfind("adam_m:", 0) == 0 || e.name.rfind("adam_v:", 0) == 0) {
      if (!ckpt.adam) throw ParseError("adam moments without adam_step");
      const auto i = slot_of(e.name.substr(7));
      check(i);
      (e.name[5] == 'm' ? ckpt.adam->m : ckpt.adam->v)[i] = std::move(t);
    } else {
      if (next_param >= ref.size() || ref[next_param].name != e.name) {
        throw ShapeError("checkpoint tensor '" + e.name + "' is out of order or not part of the configured network");
      }
      check(next_param);
      ckpt.parameters.push_back({e.name, std::move(t)});
      ++next_param;
    }
  }
  if (next_param != ref.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(next_param) + " parameters, network needs " +
                     std::to_string(ref.size()));
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

Checkpoint make_checkpoint(const RunConfig& config, const FeatureStats& stats, const Network& net, std::size_t epoch,
                           const AdamState<float>* adam) {
  Checkpoint c;
  c.config = config;
  c.stats = stats;
  c.parameters = net.parameters();
  c.epoch = epoch;
  if (adam) {
    c.adam = AdamMoments{adam->step, adam->m, adam->v};
    c.adam->m.resize(c.parameters.size());
    c.adam->v.resize(c.parameters.size());
  }
  return c;
}

Network restore_network(const Checkpoint& ckpt) {
  Network net(ckpt.config.network);
  auto& params = net.parameters();
  if (params.size() != ckpt.parameters.size()) throw ShapeError("checkpoint parameter count does not match network");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != ckpt.parameters[i].name || params[i].value.shape() != ckpt.parameters[i].value.shape()) {
      throw ShapeError("checkpoint parameter '" + ckpt.parameters[i].name + "' does not match network");
    }
    params[i].value = ckpt.parameters[i].value;
  }
  return net;
}

}  // namespace meshnet
