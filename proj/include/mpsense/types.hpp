#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <Eigen/Dense>

namespace mpsense {

using Index = Eigen::Index;

template <typename Real>
using CVec = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using CMat = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using RVec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using cdouble = std::complex<double>;
using VectorXc = CVec<double>;
using MatrixXc = CMat<double>;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

template <typename Real>
inline constexpr Real kPi = Real(3.141592653589793238462643383279502884L);

// CN(0, var): independent real and imaginary parts, each of variance var / 2.
template <typename Real, typename Rng>
std::complex<Real> complex_normal(Rng& rng, Real var = Real(1)) {
  std::normal_distribution<Real> n(Real(0), std::sqrt(var / Real(2)));
  Real re = n(rng);
  Real im = n(rng);
  return {re, im};
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double v) { return 10.0 * std::log10(v); }

}  // namespace mpsense
