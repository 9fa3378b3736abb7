#include "rfs/feature_table.hpp"

#include <set>

#include "rfs/error.hpp"
#include "rfs/io.hpp"

namespace rfs {

std::string to_string(Provenance p) {
  return p == Provenance::Radiomics ? "radiomics" : "clinical";
}

FeatureTable::FeatureTable(std::vector<std::string> patient_ids, std::vector<std::string> names,
                           Eigen::MatrixXd values, Provenance provenance)
    : FeatureTable(std::move(patient_ids), names, std::move(values),
                   std::vector<Provenance>(names.size(), provenance)) {}

FeatureTable::FeatureTable(std::vector<std::string> patient_ids, std::vector<std::string> names,
                           Eigen::MatrixXd values, std::vector<Provenance> provenance)
    : ids_(std::move(patient_ids)),
      names_(std::move(names)),
      values_(std::move(values)),
      provenance_(std::move(provenance)) {
  if (static_cast<std::size_t>(values_.rows()) != ids_.size() ||
      static_cast<std::size_t>(values_.cols()) != names_.size() ||
      provenance_.size() != names_.size())
    throw DataError("feature table shape does not match its labels");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw DataError("duplicate feature name '" + n + "'");
  }
  seen.clear();
  for (const auto& id : ids_) {
    if (!seen.insert(id).second) throw DataError("duplicate patient_id '" + id + "'");
  }
}

int FeatureTable::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int FeatureTable::index_of(const std::string& name) const {
  int i = find(name);
  if (i < 0) throw DataError("missing feature '" + name + "'");
  return i;
}

int FeatureTable::row_of(const std::string& patient_id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i] == patient_id) return static_cast<int>(i);
  }
  return -1;
}

Eigen::MatrixXd FeatureTable::gather(std::span<const int> rows,
                                     std::span<const std::string> columns) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    int col = index_of(columns[c]);
    for (std::size_t r = 0; r < rows.size(); ++r) out(r, c) = values_(rows[r], col);
  }
  return out;
}

FeatureTable FeatureTable::select_columns(std::span<const std::string> columns) const {
  std::vector<int> all(ids_.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  std::vector<Provenance> prov;
  for (const auto& c : columns) prov.push_back(provenance_[index_of(c)]);
  return FeatureTable(ids_, {columns.begin(), columns.end()}, gather(all, columns),
                      std::move(prov));
}

FeatureTable FeatureTable::align_rows(std::span<const std::string> ids) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), values_.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    int r = row_of(ids[i]);
    if (r < 0) throw DataError("patient '" + ids[i] + "' missing from feature table");
    out.row(i) = values_.row(r);
  }
  return FeatureTable({ids.begin(), ids.end()}, names_, std::move(out), provenance_);
}

FeatureTable FeatureTable::concat(const FeatureTable& other) const {
  if (other.ids_ != ids_) throw DataError("cannot concatenate tables with different patients");
  Eigen::MatrixXd v(values_.rows(), values_.cols() + other.values_.cols());
  v << values_, other.values_;
  auto names = names_;
  names.insert(names.end(), other.names_.begin(), other.names_.end());
  auto prov = provenance_;
  prov.insert(prov.end(), other.provenance_.begin(), other.provenance_.end());
  return FeatureTable(ids_, std::move(names), std::move(v), std::move(prov));
}

std::string FeatureTable::to_csv() const {
  std::string out = "patient_id";
  for (const auto& n : names_) out += "," + io::csv_escape(n);
  out += "\n";
  for (std::size_t r = 0; r < ids_.size(); ++r) {
    out += io::csv_escape(ids_[r]);
    for (std::size_t c = 0; c < names_.size(); ++c) out += "," + io::format_double(values_(r, c));
    out += "\n";
  }
  return out;
}

FeatureTable FeatureTable::from_csv(const std::filesystem::path& path, Provenance provenance) {
  auto csv = io::read_csv(path);
  int id_col = csv.require_column("patient_id", path.string());
  std::vector<std::string> names;
  std::vector<int> cols;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (static_cast<int>(c) == id_col) continue;
    names.push_back(csv.header[c]);
    cols.push_back(static_cast<int>(c));
  }
  std::vector<std::string> ids;
  Eigen::MatrixXd v(static_cast<Eigen::Index>(csv.rows.size()),
                    static_cast<Eigen::Index>(names.size()));
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    ids.push_back(csv.rows[r][id_col]);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      v(r, c) = io::parse_double(csv.rows[r][cols[c]],
                                 path.string() + " row " + std::to_string(r + 1) + " " + names[c]);
    }
  }
  return FeatureTable(std::move(ids), std::move(names), std::move(v), provenance);
}

}  // namespace rfs
