#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace cher {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy shared by every module. Callers that only care about
// "something went wrong" can catch cher::Error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::ptrdiff_t index = -1)
      : Error(what), index_(index) {}
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnavailableError : public Error {
 public:
  using Error::Error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

// Closed box [low, high] per coordinate.
struct Bounds {
  Vec low;
  Vec high;

  Eigen::Index dim() const { return low.size(); }
  Vec center() const { return 0.5 * (low + high); }
  Vec half_width() const { return 0.5 * (high - low); }
  Vec clip(const Vec& v) const { return v.cwiseMax(low).cwiseMin(high); }
  bool contains(const Vec& v, double tol = 0.0) const {
    return ((v.array() >= low.array() - tol) && (v.array() <= high.array() + tol)).all();
  }
};

}  // namespace cher
