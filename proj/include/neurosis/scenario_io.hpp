#pragma once

#include <string>

#include "json.hpp"
#include "neurosis/world.hpp"

namespace neurosis {

using ojson = nlohmann::ordered_json;

// Strict: unknown keys are rejected, and so are the weather/topography
// stubs that the rig deliberately does not model.
WorldSpec spec_from_json(const ojson& j);
ojson spec_to_json(const WorldSpec& spec);

WorldSpec parse_scenario(const std::string& text);
std::string serialize_scenario(const WorldSpec& spec);

WorldSpec load_scenario(const std::string& path);
void save_scenario(const WorldSpec& spec, const std::string& path);

ojson seasoning_to_json(const Seasoning& s);
Seasoning seasoning_from_json(const ojson& j);

ojson weights_to_json(const CostWeights& w);
CostWeights weights_from_json(const ojson& j);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace neurosis
