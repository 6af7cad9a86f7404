// Writes the golden augmentation outputs into the fixture directory.
#include <cstdio>
#include <filesystem>

#include "golden.hpp"

int main() {
  using namespace siamgrid;
  std::filesystem::create_directories(testing::fixture_dir() / "golden");
  for (auto kind : augment::all_kinds) {
    testing::write_raw_image(testing::golden_path(kind), testing::golden_output(kind));
    std::printf("%s\n", testing::golden_path(kind).c_str());
  }
  return 0;
}
