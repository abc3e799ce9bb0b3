#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <tuple>

#include <Eigen/Dense>

#include "propen/neural.hpp"
#include "propen/rng.hpp"

namespace testutil {

inline Eigen::VectorXd random_vector(propen::Rng& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

inline Eigen::MatrixXd random_matrix(propen::Rng& rng, Eigen::Index r, Eigen::Index c) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Up to 3 layers, up to 8 units, mixed activations, random biases.
inline std::tuple<propen::Mlp, int, int> random_mlp(propen::Rng& rng) {
  const int in_dim = 1 + static_cast<int>(rng.below(8));
  const int n_layers = 1 + static_cast<int>(rng.below(3));
  std::vector<propen::DenseLayer> layers;
  int prev = in_dim;
  for (int k = 0; k < n_layers; ++k) {
    const int width = 1 + static_cast<int>(rng.below(8));
    const bool last = k + 1 == n_layers;
    propen::DenseLayer l{random_matrix(rng, width, prev), random_vector(rng, width),
                         last ? propen::Activation::Identity : propen::Activation::ReLU};
    layers.push_back(std::move(l));
    prev = width;
  }
  return {propen::Mlp(std::move(layers)), in_dim, prev};
}

// max_k |a_k - b_k| / max(1, |a_k|, |b_k|)
inline double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    const double scale = std::max({1.0, std::abs(a[k]), std::abs(b[k])});
    worst = std::max(worst, std::abs(a[k] - b[k]) / scale);
  }
  return worst;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("propen_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
