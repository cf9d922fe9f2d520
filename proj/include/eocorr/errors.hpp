#pragma once

#include <stdexcept>
#include <string>

namespace eocorr {

/// Malformed or inconsistent input (config files, grids, parameters).
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& what, int line = 0, std::string field = {})
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        field_(std::move(field)) {}

  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

/// A numerical procedure failed to meet its own accuracy contract.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eocorr
