#ifndef PNGBERT_TESTS_TEST_UTIL_H_
#define PNGBERT_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "pngbert/common/rng.h"
#include "pngbert/nn/graph.h"
#include "pngbert/nn/ops.h"
#include "pngbert/nn/tensor.h"

namespace pngbert::testing {

inline nn::Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  nn::Tensor t = nn::Tensor::zeros(rows, cols);
  for (double& v : t.values()) v = n(rng);
  return t;
}

// Reduces y to a scalar through fixed random weights so every output
// coordinate contributes a distinct amount to the gradient.
inline nn::Var project(nn::Var y, std::uint64_t seed = 99) {
  Rng rng(seed);
  nn::Tensor w = random_tensor(y.rows(), y.cols(), rng);
  return nn::sum(nn::mul(y, y.graph().constant(std::move(w))));
}

// Fresh scratch directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pngbert_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace pngbert::testing

#endif  // PNGBERT_TESTS_TEST_UTIL_H_
