#pragma once

#include <stdexcept>
#include <string>

namespace zoloto {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidMeasure : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t a, std::size_t b)
      : Error("dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
  using Error::Error;
};

/// Z2 is +inf when the barycentres differ; callers map this to infinity.
class BarycentreMismatch : public Error {
 public:
  explicit BarycentreMismatch(double distance)
      : Error("barycentre mismatch (distance " + std::to_string(distance) + ")"),
        distance_(distance) {}
  double distance() const noexcept { return distance_; }

 private:
  double distance_;
};

class NotConverged : public Error {
 public:
  using Error::Error;
};

class NotInConvexOrder : public Error {
 public:
  NotInConvexOrder() : Error("second measure does not dominate the first in convex order") {}
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace zoloto
