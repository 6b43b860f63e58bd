#include "nld/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "nld/error.hpp"

namespace nld {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  fail(ErrorCode::config, "config: bad value '" + std::string(value) + "' for key '" +
                              std::string(key) + "'");
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

struct Field {
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
std::string format_int(T v) {
  return std::to_string(v);
}

// Declaration order is also the serialization order.
const std::vector<std::pair<std::string, Field>>& fields() {
  using K = std::string_view;
  static const std::vector<std::pair<std::string, Field>> table = {
      {"h", {[](RunConfig& c, K k, K v) { c.sim.h = parse_number<std::size_t>(k, v); },
             [](const RunConfig& c) { return format_int(c.sim.h); }}},
      {"w", {[](RunConfig& c, K k, K v) { c.sim.w = parse_number<std::size_t>(k, v); },
             [](const RunConfig& c) { return format_int(c.sim.w); }}},
      {"coils", {[](RunConfig& c, K k, K v) { c.sim.coils = parse_number<std::size_t>(k, v); },
                 [](const RunConfig& c) { return format_int(c.sim.coils); }}},
      {"pattern", {[](RunConfig& c, K k, K v) {
                     try {
                       c.sim.pattern = parse_pattern_kind(std::string(v));
                     } catch (const Error&) {
                       bad_value(k, v);
                     }
                   },
                   [](const RunConfig& c) { return to_string(c.sim.pattern); }}},
      {"r", {[](RunConfig& c, K k, K v) { c.sim.r = parse_number<int>(k, v); },
             [](const RunConfig& c) { return format_int(c.sim.r); }}},
      {"r2", {[](RunConfig& c, K k, K v) { c.sim.r2 = parse_number<int>(k, v); },
              [](const RunConfig& c) { return format_int(c.sim.r2); }}},
      {"acs", {[](RunConfig& c, K k, K v) { c.sim.acs = parse_number<std::size_t>(k, v); },
               [](const RunConfig& c) { return format_int(c.sim.acs); }}},
      {"noise", {[](RunConfig& c, K k, K v) { c.sim.noise = parse_number<double>(k, v); },
                 [](const RunConfig& c) { return format_double(c.sim.noise); }}},
      {"phase_strength",
       {[](RunConfig& c, K k, K v) { c.sim.phase_strength = parse_number<double>(k, v); },
        [](const RunConfig& c) { return format_double(c.sim.phase_strength); }}},
      {"sim_seed", {[](RunConfig& c, K k, K v) { c.sim.seed = parse_number<std::uint64_t>(k, v); },
                    [](const RunConfig& c) { return format_int(c.sim.seed); }}},
      {"depth", {[](RunConfig& c, K k, K v) { c.recon.unet.depth = parse_number<int>(k, v); },
                 [](const RunConfig& c) { return format_int(c.recon.unet.depth); }}},
      {"filters", {[](RunConfig& c, K k, K v) { c.recon.unet.filters = parse_number<int>(k, v); },
                   [](const RunConfig& c) { return format_int(c.recon.unet.filters); }}},
      {"kernel", {[](RunConfig& c, K k, K v) { c.recon.unet.kernel = parse_number<int>(k, v); },
                  [](const RunConfig& c) { return format_int(c.recon.unet.kernel); }}},
      {"slope", {[](RunConfig& c, K k, K v) { c.recon.unet.slope = parse_number<double>(k, v); },
                 [](const RunConfig& c) { return format_double(c.recon.unet.slope); }}},
      {"lr", {[](RunConfig& c, K k, K v) { c.recon.lr = parse_number<double>(k, v); },
              [](const RunConfig& c) { return format_double(c.recon.lr); }}},
      {"beta1", {[](RunConfig& c, K k, K v) { c.recon.beta1 = parse_number<double>(k, v); },
                 [](const RunConfig& c) { return format_double(c.recon.beta1); }}},
      {"beta2", {[](RunConfig& c, K k, K v) { c.recon.beta2 = parse_number<double>(k, v); },
                 [](const RunConfig& c) { return format_double(c.recon.beta2); }}},
      {"eps", {[](RunConfig& c, K k, K v) { c.recon.eps = parse_number<double>(k, v); },
               [](const RunConfig& c) { return format_double(c.recon.eps); }}},
      {"iterations", {[](RunConfig& c, K k, K v) { c.recon.iterations = parse_number<int>(k, v); },
                      [](const RunConfig& c) { return format_int(c.recon.iterations); }}},
      {"regularized", {[](RunConfig& c, K k, K v) { c.recon.regularized = parse_bool(k, v); },
                       [](const RunConfig& c) {
                         return std::string(c.recon.regularized ? "true" : "false");
                       }}},
      {"lambda", {[](RunConfig& c, K k, K v) { c.recon.lambda = parse_number<double>(k, v); },
                  [](const RunConfig& c) { return format_double(c.recon.lambda); }}},
      {"seed", {[](RunConfig& c, K k, K v) { c.recon.seed = parse_number<std::uint64_t>(k, v); },
                [](const RunConfig& c) { return format_int(c.recon.seed); }}},
      {"checkpoint_every",
       {[](RunConfig& c, K k, K v) { c.recon.checkpoint_every = parse_number<int>(k, v); },
        [](const RunConfig& c) { return format_int(c.recon.checkpoint_every); }}},
      {"checkpoint_dir", {[](RunConfig& c, K, K v) { c.recon.checkpoint_dir = std::string(v); },
                          [](const RunConfig& c) { return c.recon.checkpoint_dir; }}},
      {"plateau_stop", {[](RunConfig& c, K k, K v) { c.recon.plateau_stop = parse_bool(k, v); },
                        [](const RunConfig& c) {
                          return std::string(c.recon.plateau_stop ? "true" : "false");
                        }}},
  };
  return table;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) fail(ErrorCode::invalid_argument, "cannot format number");
  return std::string(buf, ptr);
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail(ErrorCode::config, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    bool found = false;
    for (const auto& [name, field] : fields()) {
      if (name == key) {
        field.set(cfg, key, value);
        found = true;
        break;
      }
    }
    if (!found) {
      fail(ErrorCode::config, "config line " + std::to_string(line_no) + ": unknown key '" +
                                  std::string(key) + "'");
    }
  }
  return cfg;
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(cfg) + "\n";
  return out;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::io, "cannot open config " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace nld
