#pragma once

#include "lensless/geometry.hpp"
#include "lensless/sensing.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

namespace test {

using lensless::Image;
using lensless::Index;
using lensless::Vector;

inline Vector random_vector(Index n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  lensless::Rng rng(seed);
  Vector v(n);
  for (Index k = 0; k < n; ++k) v(k) = lo + (hi - lo) * rng.uniform();
  return v;
}

inline Image random_image(Index rows, Index cols, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  return random_vector(rows * cols, seed, lo, hi).reshaped(rows, cols).array();
}

inline double max_abs(const Eigen::MatrixXd& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("lensless_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace test
