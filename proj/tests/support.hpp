#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "signopt/signopt.hpp"

namespace signopt::test {

// Two classes split by x1 = 0: class 0 for x1 > 0, class 1 for x1 < 0.
inline LinearModel split_model(double scale = 1.0) {
  return LinearModel(2, 2, {scale, 0.0, -scale, 0.0}, {0.0, 0.0});
}

inline Origin split_origin() { return Origin({-2.0, 0.0}, Label{1}); }

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("signopt_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& body) {
  std::ofstream(p, std::ios::binary) << body;
}

}  // namespace signopt::test
