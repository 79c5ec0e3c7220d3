#include "tstereo/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>

#include "tstereo/error.hpp"

namespace tstereo {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

double to_double(std::string_view key, std::string_view text) {
  double x = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(x))
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  return x;
}

long long to_int(std::string_view key, std::string_view text) {
  long long x = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || end != text.data() + text.size())
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(text) + "'");
  return x;
}

int to_small_int(std::string_view key, std::string_view text) {
  const long long x = to_int(key, text);
  if (x < -1000000 || x > 1000000) throw ConfigError(std::string(key) + ": value out of range");
  return static_cast<int>(x);
}

bool to_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

// Shortest text that parses back to the same double.
std::string fmt(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

struct KeyHandler {
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, KeyHandler>>& handlers() {
  static const std::vector<std::pair<std::string, KeyHandler>> table = [] {
    std::vector<std::pair<std::string, KeyHandler>> t;
    auto real = [&t](std::string name, auto member) {
      t.push_back({name,
                   {[name, member](RunConfig& c, std::string_view v) { member(c) = to_double(name, v); },
                    [member](const RunConfig& c) { return fmt(member(c)); }}});
    };
    auto integer = [&t](std::string name, auto member) {
      t.push_back({name,
                   {[name, member](RunConfig& c, std::string_view v) { member(c) = to_small_int(name, v); },
                    [member](const RunConfig& c) { return std::to_string(member(c)); }}});
    };
    auto path = [&t](std::string name, auto member) {
      t.push_back({name, {[member](RunConfig& c, std::string_view v) { member(c) = std::string(v); },
                          [member](const RunConfig& c) { return member(c).string(); }}});
    };

    t.push_back({"mode",
                 {[](RunConfig& c, std::string_view v) { c.pipeline.mode = parse_pipeline_mode(v); },
                  [](const RunConfig& c) { return std::string(to_string(c.pipeline.mode)); }}});
    real("theta", [](auto& c) -> auto& { return c.pipeline.theta; });
    real("eta", [](auto& c) -> auto& { return c.losses.eta; });
    real("gamma", [](auto& c) -> auto& { return c.losses.gamma; });
    real("lambda_dc", [](auto& c) -> auto& { return c.losses.lambda_dc; });
    real("lambda_gdp", [](auto& c) -> auto& { return c.losses.lambda_gdp; });
    integer("iters", [](auto& c) -> auto& { return c.pipeline.refinement.iterations; });
    // The normalization scales of the state channels follow D.
    t.push_back({"max_disparity",
                 {[](RunConfig& c, std::string_view v) {
                    const int d = to_small_int("max_disparity", v);
                    c.pipeline.max_disparity = d;
                    c.pipeline.completion.disparity_scale = d;
                    c.pipeline.refinement.disparity_scale = d;
                  },
                  [](const RunConfig& c) { return std::to_string(c.pipeline.max_disparity); }}});
    t.push_back({"descriptor",
                 {[](RunConfig& c, std::string_view v) { c.pipeline.descriptor = parse_descriptor_kind(v); },
                  [](const RunConfig& c) { return std::string(to_string(c.pipeline.descriptor)); }}});
    integer("descriptor_radius", [](auto& c) -> auto& { return c.pipeline.descriptor_radius; });
    integer("state_channels", [](auto& c) -> auto& { return c.pipeline.completion.state_channels; });
    real("distance_clamp", [](auto& c) -> auto& { return c.pipeline.completion.distance_clamp; });
    integer("lookup_radius", [](auto& c) -> auto& { return c.pipeline.refinement.lookup_radius; });
    real("beta", [](auto& c) -> auto& { return c.pipeline.refinement.beta; });
    real("max_step", [](auto& c) -> auto& { return c.pipeline.refinement.max_step; });
    real("gradient_clamp", [](auto& c) -> auto& { return c.pipeline.refinement.gradient_clamp; });
    real("state_blend", [](auto& c) -> auto& { return c.pipeline.refinement.state_blend; });
    t.push_back({"seed",
                 {[](RunConfig& c, std::string_view v) {
                    const long long x = to_int("seed", v);
                    if (x < 0) throw ConfigError("seed: must be >= 0");
                    c.pipeline.seed = static_cast<std::uint64_t>(x);
                  },
                  [](const RunConfig& c) { return std::to_string(c.pipeline.seed); }}});
    integer("threads", [](auto& c) -> auto& { return c.threads; });
    t.push_back({"flow_sampling",
                 {[](RunConfig& c, std::string_view v) {
                    if (v == "bilinear") c.flow_sampling = FlowSampling::bilinear;
                    else if (v == "nearest") c.flow_sampling = FlowSampling::nearest;
                    else throw ConfigError("flow_sampling: expected bilinear or nearest, got '" + std::string(v) + "'");
                  },
                  [](const RunConfig& c) {
                    return std::string(c.flow_sampling == FlowSampling::nearest ? "nearest" : "bilinear");
                  }}});
    t.push_back({"write_png", {[](RunConfig& c, std::string_view v) { c.write_png = to_bool("write_png", v); },
                               [](const RunConfig& c) { return std::string(c.write_png ? "true" : "false"); }}});
    path("input", [](auto& c) -> auto& { return c.input; });
    path("output", [](auto& c) -> auto& { return c.output; });
    path("fusion_weights", [](auto& c) -> auto& { return c.fusion_weights; });
    path("update_weights", [](auto& c) -> auto& { return c.update_weights; });
    return t;
  }();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  pipeline.validate();
  losses.validate();
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, handler] : handlers()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& [name, handler] : handlers())
    if (name == key) {
      handler.set(cfg, trim(value));
      return;
    }
  std::string accepted;
  for (const auto& k : config_keys()) accepted += (accepted.empty() ? "" : ", ") + k;
  throw ConfigError("unknown config key '" + std::string(key) + "'; accepted keys: " + accepted);
}

void apply_assignment(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  apply_setting(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ParseError(path.string(), "line " + std::to_string(line_no), "expected key = value");
    try {
      apply_setting(cfg, trim(std::string_view(body).substr(0, eq)), std::string_view(body).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, handler] : handlers()) out += name + " = " + handler.get(cfg) + "\n";
  return out;
}

}  // namespace tstereo
