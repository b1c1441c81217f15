// Writes a synthetic dataset file for the CLI tests.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "support/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_synthetic <out.csv>\n";
    return 2;
  }
  const auto f = vaecal::fixtures::synthetic_air_quality();
  const std::filesystem::path path(argv[1]);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << f.text;
  return out ? EXIT_SUCCESS : EXIT_FAILURE;
}
