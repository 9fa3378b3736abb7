#include "rfs/clinical.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>

#include <fmt/format.h>

#include "rfs/error.hpp"
#include "rfs/metrics.hpp"

namespace rfs::clinical {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool is_missing(const std::string& cell) {
  static const std::set<std::string> markers = {"", "na", "n/a", "nan", "missing", "?"};
  return markers.count(lower(trim(cell))) > 0;
}

FieldSpec yes_no(const std::string& name) {
  return {name, true, {{0, {"no", "n", "negative", "false"}}, {1, {"yes", "y", "positive", "true"}}}};
}

}  // namespace

std::vector<FieldSpec> default_registry() {
  return {
      {"gender", true, {{0, {"male", "m"}}, {1, {"female", "f"}}}},
      {"age_years", false, {}},
      yes_no("hiv_status"),
      {"cd4_count", false, {}},
      {"smoking_status", true, {{0, {"never"}}, {1, {"former"}}, {2, {"current"}}}},
      {"t_stage", true, {{1, {"T1"}}, {2, {"T2"}}, {3, {"T3"}}, {4, {"T4"}}}},
      {"n_stage", true, {{0, {"N0"}}, {1, {"N1"}}, {2, {"N2"}}, {3, {"N3"}}}},
      yes_no("inguinal_nodes"),
      yes_no("mesorectal_nodes"),
      yes_no("external_iliac_nodes"),
      yes_no("internal_iliac_nodes"),
  };
}

void override_levels(std::vector<FieldSpec>& registry, const std::string& field,
                     const std::vector<std::string>& labels_in_order) {
  auto it = std::find_if(registry.begin(), registry.end(),
                         [&](const FieldSpec& f) { return f.name == field; });
  if (it == registry.end()) throw DataError("unknown clinical field '" + field + "'");
  if (!it->categorical) throw DataError("clinical field '" + field + "' is numeric");
  if (labels_in_order.empty()) throw DataError("empty level list for '" + field + "'");
  const int first = it->levels.empty() ? 0 : it->levels.front().code;
  it->levels.clear();
  for (std::size_t k = 0; k < labels_in_order.size(); ++k)
    it->levels.push_back({first + static_cast<int>(k), {labels_in_order[k]}});
}

EncodedClinical ingest_clinical(const io::CsvTable& csv, const std::vector<FieldSpec>& registry,
                                const std::string& context) {
  const int id_col = csv.require_column("patient_id", context);
  if (csv.rows.empty()) throw DataError(context + ": empty file");

  std::vector<const FieldSpec*> fields;
  std::vector<int> cols;
  for (std::size_t c = 0; c < csv.header.size(); ++c) {
    if (static_cast<int>(c) == id_col) continue;
    auto it = std::find_if(registry.begin(), registry.end(),
                           [&](const FieldSpec& f) { return f.name == csv.header[c]; });
    if (it == registry.end()) throw DataError(context + ": unknown column '" + csv.header[c] + "'");
    fields.push_back(&*it);
    cols.push_back(static_cast<int>(c));
  }

  const auto n = csv.rows.size();
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& row : csv.rows) {
    const auto id = trim(row[id_col]);
    if (id.empty()) throw DataError(context + ": empty patient_id");
    if (!seen.insert(id).second) throw DataError(context + ": duplicate patient_id '" + id + "'");
    ids.push_back(id);
  }

  Eigen::MatrixXd values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(fields.size()));
  std::vector<Imputation> imputations;
  json report_fields = json::object();
  for (std::size_t f = 0; f < fields.size(); ++f) {
    const auto& spec = *fields[f];
    std::vector<bool> missing(n, false);
    for (std::size_t r = 0; r < n; ++r) {
      const auto cell = trim(csv.rows[r][cols[f]]);
      const auto where = fmt::format("{}: patient '{}' {}", context, ids[r], spec.name);
      if (is_missing(cell)) {
        missing[r] = true;
        continue;
      }
      if (!spec.categorical) {
        values(r, f) = io::parse_double(cell, where);
        continue;
      }
      std::optional<int> code;
      for (const auto& level : spec.levels) {
        for (const auto& label : level.labels)
          if (lower(label) == lower(cell)) code = level.code;
        if (!code && cell == std::to_string(level.code)) code = level.code;
        if (code) break;
      }
      if (!code) throw DataError(where + ": unknown category value '" + cell + "'");
      values(r, f) = *code;
    }

    std::vector<double> present;
    for (std::size_t r = 0; r < n; ++r)
      if (!missing[r]) present.push_back(values(r, f));
    const auto n_missing = n - present.size();
    double fill = 0.0;
    if (n_missing > 0) {
      if (present.empty())
        throw DataError(context + ": column '" + spec.name + "' has no observed values");
      if (spec.categorical) {
        int best = -1;
        for (const auto& level : spec.levels) {
          const int cnt = static_cast<int>(std::count(present.begin(), present.end(), level.code));
          if (cnt > best) {
            best = cnt;
            fill = level.code;
          }
        }
      } else {
        fill = metrics::median(present);
      }
      for (std::size_t r = 0; r < n; ++r) {
        if (!missing[r]) continue;
        values(r, f) = fill;
        imputations.push_back({ids[r], spec.name, fill});
      }
    }

    json fj;
    fj["type"] = spec.categorical ? "categorical" : "numeric";
    fj["imputation"] = spec.categorical ? "mode" : "median";
    if (spec.categorical) {
      json codes = json::object();
      for (const auto& level : spec.levels) codes[level.labels.front()] = level.code;
      fj["codes"] = codes;
    }
    fj["n_missing"] = n_missing;
    fj["fill_value"] = n_missing > 0 ? json(fill) : json(nullptr);
    report_fields[spec.name] = fj;
  }

  std::vector<std::string> names;
  for (const auto* f : fields) names.push_back(f->name);
  EncodedClinical out{FeatureTable(ids, names, std::move(values), Provenance::Clinical),
                      std::move(imputations), json::object()};
  json imp = json::array();
  for (const auto& i : out.imputations)
    imp.push_back({{"patient_id", i.patient_id}, {"field", i.field}, {"value", i.value}});
  out.report["fields"] = report_fields;
  out.report["imputations"] = imp;
  out.report["n_patients"] = n;
  return out;
}

EncodedClinical ingest_clinical(const std::filesystem::path& path,
                                const std::vector<FieldSpec>& registry) {
  return ingest_clinical(io::read_csv(path), registry, path.string());
}

std::string outcomes_to_csv(const std::vector<survcore::SurvivalOutcome>& outcomes) {
  std::string out = "patient_id,time_months,event\n";
  for (const auto& o : outcomes)
    out += fmt::format("{},{},{}\n", io::csv_escape(o.patient_id), io::format_double(o.time),
                       o.event ? 1 : 0);
  return out;
}

std::vector<survcore::SurvivalOutcome> read_outcomes(const std::filesystem::path& path) {
  const auto csv = io::read_csv(path);
  const auto ctx = path.string();
  const int c_id = csv.require_column("patient_id", ctx);
  const int c_t = csv.require_column("time_months", ctx);
  const int c_e = csv.require_column("event", ctx);
  if (csv.rows.empty()) throw DataError(ctx + ": empty file");
  std::vector<survcore::SurvivalOutcome> out;
  std::set<std::string> seen;
  for (const auto& row : csv.rows) {
    const auto id = trim(row[c_id]);
    if (!seen.insert(id).second) throw DataError(ctx + ": duplicate patient_id '" + id + "'");
    const auto where = ctx + ": patient '" + id + "'";
    const double t = io::parse_double(row[c_t], where + " time_months");
    const auto e = io::parse_int(row[c_e], where + " event");
    if (e != 0 && e != 1) throw DataError(where + ": event must be 0 or 1");
    out.push_back({id, t, e == 1});
  }
  survcore::validate_outcomes(out);
  return out;
}

}  // namespace rfs::clinical
