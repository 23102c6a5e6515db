#include "fastot/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "fastot/errors.hpp"

namespace fastot::io {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool parse_number(std::string_view field, double& out) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

[[noreturn]] void fail(std::string_view source, std::size_t line, const std::string& what) {
  throw InvalidInput(std::string(source) + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

DiscreteMeasure parse_point_csv(std::istream& in, std::string_view source_name) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool has_mass = false;
  bool first_content = true;
  std::vector<double> coords;
  std::vector<double> masses;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view content = trim(line);
    if (content.empty()) continue;
    const auto fields = split_fields(content);

    if (first_content) {
      first_content = false;
      double probe = 0.0;
      if (!parse_number(fields.front(), probe)) {
        // Header line: x0,x1,...[,mass]
        has_mass = fields.back() == "mass";
        const std::size_t ncoord = fields.size() - (has_mass ? 1 : 0);
        if (ncoord == 0) fail(source_name, line_no, "header names no coordinate columns");
        for (std::size_t d = 0; d < ncoord; ++d) {
          if (fields[d] != "x" + std::to_string(d)) {
            fail(source_name, line_no, "unexpected header column '" + std::string(fields[d]) + "'");
          }
        }
        dim = ncoord;
        continue;
      }
    }

    const std::size_t expected = dim == 0 ? fields.size() : dim + (has_mass ? 1 : 0);
    if (fields.size() != expected) {
      fail(source_name, line_no,
           "expected " + std::to_string(expected) + " fields, found " + std::to_string(fields.size()));
    }
    if (dim == 0) dim = fields.size();
    for (std::size_t k = 0; k < fields.size(); ++k) {
      double v = 0.0;
      if (!parse_number(fields[k], v)) {
        fail(source_name, line_no, "field " + std::to_string(k + 1) + " is not a number: '" +
                                       std::string(fields[k]) + "'");
      }
      if (has_mass && k == dim) {
        masses.push_back(v);
      } else {
        coords.push_back(v);
      }
    }
  }
  if (coords.empty()) fail(source_name, line_no, "no points found");
  try {
    PointCloud cloud(dim, coords);
    if (!has_mass) return uniform_measure(std::move(cloud));
    return DiscreteMeasure(std::move(cloud), std::move(masses));
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string(source_name) + ": " + e.what());
  }
}

DiscreteMeasure read_point_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  return parse_point_csv(in, path.string());
}

void write_point_csv(std::ostream& out, const DiscreteMeasure& measure, bool with_masses) {
  const auto& cloud = measure.cloud();
  if (with_masses) {
    for (std::size_t d = 0; d < cloud.dim(); ++d) out << 'x' << d << ',';
    out << "mass\n";
  }
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t d = 0; d < cloud.dim(); ++d) {
      if (d > 0) out << ',';
      out << format_double(cloud.coord(i, d));
    }
    if (with_masses) out << ',' << format_double(measure.masses()[i]);
    out << '\n';
  }
}

nlohmann::ordered_json plan_to_json(const TransportPlan& plan) {
  nlohmann::ordered_json j;
  j["n_source"] = plan.n_source();
  j["n_target"] = plan.n_target();
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : plan.entries()) entries.push_back({e.i, e.j, e.mass});
  j["entries"] = std::move(entries);
  return j;
}

TransportPlan plan_from_json(const nlohmann::json& j) {
  try {
    std::vector<PlanEntry> entries;
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 3) throw InvalidInput("plan entry must be [i, j, mass]");
      entries.push_back({e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>(), e[2].get<double>()});
    }
    return TransportPlan(j.at("n_source").get<std::size_t>(), j.at("n_target").get<std::size_t>(),
                         std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed plan JSON: ") + e.what());
  }
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

}  // namespace fastot::io
