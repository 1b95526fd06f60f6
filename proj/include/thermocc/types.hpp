#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace thermocc {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr Complex I{0.0, 1.0};

enum class Spin : std::uint8_t { alpha = 0, beta = 1 };

inline constexpr Spin kSpins[2] = {Spin::alpha, Spin::beta};

constexpr int spin_index(Spin s) { return static_cast<int>(s); }
constexpr Spin opposite(Spin s) { return s == Spin::alpha ? Spin::beta : Spin::alpha; }
constexpr char spin_char(Spin s) { return s == Spin::alpha ? 'a' : 'b'; }

// Error categories map onto the CLI exit codes (2, 3, 4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace thermocc
