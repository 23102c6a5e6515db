#pragma once
// File formats: point-cloud CSV in, plans and numbers out.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "json.hpp"

#include "fastot/measures.hpp"

namespace fastot::io {

// One point per line, comma-separated coordinates. A header line
// "x0,x1,...,mass" switches on a trailing mass column; without a header the
// measure is uniform. Blank lines are skipped. Errors are InvalidInput with a
// "<source>:<line>: " prefix.
DiscreteMeasure parse_point_csv(std::istream& in, std::string_view source_name = "<stream>");
DiscreteMeasure read_point_csv(const std::filesystem::path& path);
void write_point_csv(std::ostream& out, const DiscreteMeasure& measure, bool with_masses);

// {"n_source":N,"n_target":M,"entries":[[i,j,mass],...]}
nlohmann::ordered_json plan_to_json(const TransportPlan& plan);
TransportPlan plan_from_json(const nlohmann::json& j);

// Shortest round-trip decimal representation; identical input gives
// identical text.
std::string format_double(double v);

}  // namespace fastot::io
