#pragma once

#include <stdexcept>
#include <string>

namespace rfs {

/// Malformed or inconsistent input data (files, tables, cohorts).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric or statistic is undefined for the given inputs
/// (no comparable pairs, single-class horizon, ...).
class UndefinedMetric : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rfs
