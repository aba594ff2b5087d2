#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>

namespace ipag {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Every run owns one of these; nothing in the library keeps global RNG state.
using Rng = std::mt19937_64;

}  // namespace ipag
