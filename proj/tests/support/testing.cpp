#include "testing.hpp"

#include <unistd.h>

#include <cmath>

namespace testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("lrptext-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Eigen::MatrixXd random_matrix(lrptext::Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = scale * rng.normal();
  }
  return m;
}

lrptext::CnnModel random_cnn(lrptext::Rng& rng, const lrptext::CnnHyper& hyper, double scale) {
  lrptext::CnnModel m = lrptext::CnnModel::zeros(hyper);
  const auto F = static_cast<Eigen::Index>(hyper.filters), D = static_cast<Eigen::Index>(hyper.dim),
             C = static_cast<Eigen::Index>(hyper.classes);
  for (auto& w : m.conv_weights) w = random_matrix(rng, F, D, scale);
  m.conv_bias = random_matrix(rng, F, 1, scale);
  m.out_weights = random_matrix(rng, F, C, scale);
  m.out_bias = random_matrix(rng, C, 1, scale);
  return m;
}

double relative_error(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / denom;
}

double max_relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double denom = std::max({std::abs(a(r, c)), std::abs(b(r, c)), floor});
      worst = std::max(worst, std::abs(a(r, c) - b(r, c)) / denom);
    }
  }
  return worst;
}

}  // namespace testing
