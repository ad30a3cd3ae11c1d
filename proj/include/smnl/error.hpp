#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace smnl {

// Base for every error the library raises on bad input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A field failed validation. field() names the offending field path, e.g.
// "products[3].valuation".
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class UnknownProductError : public Error {
 public:
  explicit UnknownProductError(std::int64_t id)
      : Error("unknown product id " + std::to_string(id)), id_(id) {}

  std::int64_t id() const noexcept { return id_; }

 private:
  std::int64_t id_;
};

// An exhaustive search would exceed its enumeration cap.
class InstanceTooLargeError : public Error {
 public:
  InstanceTooLargeError(const std::string& what, double size, double cap)
      : Error(what + " (size " + std::to_string(size) + " exceeds cap " +
              std::to_string(cap) + ")"),
        cap_(cap) {}

  double cap() const noexcept { return cap_; }

 private:
  double cap_;
};

// Estimates were requested for a product that has no closed epochs.
class NeverOfferedError : public Error {
 public:
  explicit NeverOfferedError(std::int64_t id)
      : Error("product " + std::to_string(id) + " was never offered"), id_(id) {}

  std::int64_t id() const noexcept { return id_; }

 private:
  std::int64_t id_;
};

}  // namespace smnl
