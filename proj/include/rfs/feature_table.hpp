#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace rfs {

enum class Provenance { Radiomics, Clinical };

std::string to_string(Provenance p);

/// Per-patient named feature values. Rows follow patient_ids, columns
/// follow names; every column carries a provenance tag.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::vector<std::string> patient_ids, std::vector<std::string> names,
               Eigen::MatrixXd values, Provenance provenance);
  FeatureTable(std::vector<std::string> patient_ids, std::vector<std::string> names,
               Eigen::MatrixXd values, std::vector<Provenance> provenance);

  const std::vector<std::string>& patient_ids() const { return ids_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Provenance>& provenance() const { return provenance_; }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& mutable_values() { return values_; }

  std::size_t rows() const { return ids_.size(); }
  std::size_t cols() const { return names_.size(); }

  /// Column index, or -1 when absent.
  int find(const std::string& name) const;
  /// Column index; throws DataError naming the feature when absent.
  int index_of(const std::string& name) const;
  int row_of(const std::string& patient_id) const;

  /// Sub-matrix of the given rows and named columns.
  Eigen::MatrixXd gather(std::span<const int> rows, std::span<const std::string> columns) const;

  FeatureTable select_columns(std::span<const std::string> columns) const;
  /// Reorders rows to match ids; throws DataError if any id is missing.
  FeatureTable align_rows(std::span<const std::string> ids) const;
  /// Column-wise union of two tables over identical patient order.
  FeatureTable concat(const FeatureTable& other) const;

  /// patient_id column followed by named columns, full double precision.
  std::string to_csv() const;
  static FeatureTable from_csv(const std::filesystem::path& path, Provenance provenance);

 private:
  std::vector<std::string> ids_;
  std::vector<std::string> names_;
  Eigen::MatrixXd values_;
  std::vector<Provenance> provenance_;
};

}  // namespace rfs
