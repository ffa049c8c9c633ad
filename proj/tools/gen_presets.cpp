#include <filesystem>
#include <fstream>
#include <iostream>

#include "tsc/scenario.hpp"

// Writes every built-in preset as <dir>/<name>.scn (default dir: presets).
int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "presets";
  std::filesystem::create_directories(dir);
  for (const auto& name : tsc::preset_names()) {
    auto path = dir / (name + ".scn");
    std::ofstream f(path, std::ios::binary);
    f << tsc::serialize_scenario(tsc::build_preset(name));
    if (!f) {
      std::cerr << "cannot write " << path << "\n";
      return 2;
    }
    std::cout << path.string() << "\n";
  }
  return 0;
}
