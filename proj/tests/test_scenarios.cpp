#include "doctest.h"

#include <filesystem>

#include "neurosis/scenario_io.hpp"

using namespace neurosis;

TEST_CASE("shipped scenario files match the built-in scenarios") {
    std::filesystem::path dir = NEUROSIS_SOURCE_DIR "/scenarios";
    int files = 0;
    for (const auto& name : scenario_names()) {
        CAPTURE(name);
        auto path = dir / (name + ".json");
        REQUIRE(std::filesystem::exists(path));
        CHECK(read_file(path.string()) == serialize_scenario(named_scenario(name)));
        CHECK(load_scenario(path.string()) == named_scenario(name));
        ++files;
    }
    for (const auto& e : std::filesystem::directory_iterator(dir)) files -= e.path().extension() == ".json";
    CHECK(files == 0);
}
