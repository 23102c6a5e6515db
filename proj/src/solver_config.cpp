#include <charconv>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>

#include "fastot/dual_solver.hpp"
#include "fastot/errors.hpp"

namespace fastot {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view text, std::size_t line) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw InvalidInput("config line " + std::to_string(line) + ": bad number '" +
                       std::string(text) + "'");
  }
  return value;
}

}  // namespace

SolverConfig parse_solver_config(std::istream& in) {
  SolverConfig cfg;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidInput("config line " + std::to_string(line) + ": expected key = value");
    }
    const auto key = trim(text.substr(0, eq));
    const auto value = trim(text.substr(eq + 1));
    if (key == "max_epochs") {
      cfg.max_epochs = parse_number<std::size_t>(value, line);
    } else if (key == "base_step") {
      if (value == "auto") {
        cfg.base_step.reset();
      } else {
        cfg.base_step = parse_number<double>(value, line);
      }
    } else if (key == "step_decay") {
      if (value == "inverse_sqrt") {
        cfg.step_decay = StepDecay::InverseSqrt;
      } else if (value == "constant") {
        cfg.step_decay = StepDecay::Constant;
      } else {
        throw InvalidInput("config line " + std::to_string(line) + ": unknown step_decay '" +
                           std::string(value) + "'");
      }
    } else if (key == "support_tolerance_rel") {
      cfg.support_tolerance_rel = parse_number<double>(value, line);
    } else if (key == "gap_tolerance_rel") {
      cfg.gap_tolerance_rel = parse_number<double>(value, line);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(value, line);
    } else if (key == "ctransform_period") {
      cfg.ctransform_period = parse_number<std::size_t>(value, line);
    } else {
      throw InvalidInput("config line " + std::to_string(line) + ": unknown key '" +
                         std::string(key) + "'");
    }
  }
  cfg.validate();
  return cfg;
}

SolverConfig load_solver_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path.string());
  return parse_solver_config(in);
}

}  // namespace fastot
