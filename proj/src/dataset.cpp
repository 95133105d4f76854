#include "sfm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "sfm/rng.hpp"

namespace sfm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Comma split with double-quote support ("" escapes a quote).
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void FeatureSchema::validate() const {
  if (time_column.empty() || event_column.empty()) {
    throw SchemaError("schema: time and event columns must be named");
  }
  if (time_column == event_column) throw SchemaError("schema: time and event column coincide");
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (c.name.empty()) throw SchemaError("schema: empty column name");
    if (c.name == time_column || c.name == event_column) {
      throw SchemaError("schema: column '" + c.name + "' is also the time or event column");
    }
    if (!seen.insert(c.name).second) throw SchemaError("schema: duplicate column '" + c.name + "'");
  }
}

std::size_t RawColumn::missing() const {
  if (spec.kind == ColumnKind::continuous) {
    return static_cast<std::size_t>(
        std::count_if(numeric.begin(), numeric.end(), [](const auto& v) { return !v; }));
  }
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const auto& v) { return !v; }));
}

std::size_t RawDataset::missing() const {
  std::size_t n = 0;
  for (const auto& c : columns) n += c.missing();
  return n;
}

double SurvDataset::event_fraction() const {
  if (y.empty()) return 0.0;
  return static_cast<double>(std::accumulate(y.begin(), y.end(), 0)) / static_cast<double>(y.size());
}

RawDataset load_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return load_csv(in, schema);
}

RawDataset load_csv(std::istream& in, const FeatureSchema& schema) {
  schema.validate();
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw SchemaError("csv: missing header row");
  if (header[0].size() >= 3 && header[0].compare(0, 3, "\xEF\xBB\xBF") == 0) {
    header[0].erase(0, 3);
  }

  auto locate = [&header](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t time_idx = locate(schema.time_column);
  const std::size_t event_idx = locate(schema.event_column);
  std::vector<std::size_t> col_idx;
  RawDataset ds;
  ds.schema = schema;
  for (const auto& c : schema.columns) {
    col_idx.push_back(locate(c.name));
    ds.columns.push_back(RawColumn{c, {}, {}});
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw RowError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                  std::to_string(cells.size()));
    }
    const auto time = parse_double(cells[time_idx]);
    if (!time || *time < 0.0) {
      throw RowError(line_no, "time '" + cells[time_idx] + "' is not a non-negative number");
    }
    const std::string& ev = cells[event_idx];
    if (ev != "0" && ev != "1") {
      throw RowError(line_no, "event '" + ev + "' is not 0 or 1");
    }
    ds.t.push_back(*time);
    ds.y.push_back(ev == "1" ? 1 : 0);
    for (std::size_t k = 0; k < col_idx.size(); ++k) {
      const std::string& cell = cells[col_idx[k]];
      RawColumn& col = ds.columns[k];
      if (col.spec.kind == ColumnKind::continuous) {
        if (is_missing(cell)) {
          col.numeric.emplace_back();
        } else {
          const auto v = parse_double(cell);
          if (!v) throw RowError(line_no, "column '" + col.spec.name + "': '" + cell + "' is not numeric");
          col.numeric.push_back(*v);
        }
      } else {
        col.labels.push_back(is_missing(cell) ? std::nullopt : std::optional<std::string>(cell));
      }
    }
  }
  if (ds.t.empty()) throw std::runtime_error("csv: no observations");
  return ds;
}

void write_csv(const std::filesystem::path& path, const SurvDataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  for (const auto& name : ds.feature_names) out << name << ',';
  out << ds.schema.time_column << ',' << ds.schema.event_column << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < ds.width(); ++c) out << ds.X(r, c) << ',';
    out << ds.t[r] << ',' << ds.y[r] << '\n';
  }
}

ImputeStats fit_impute(const RawDataset& train) {
  ImputeStats stats;
  for (const auto& col : train.columns) {
    if (col.spec.kind == ColumnKind::continuous) {
      std::vector<double> seen;
      for (const auto& v : col.numeric)
        if (v) seen.push_back(*v);
      if (seen.empty()) throw std::runtime_error("impute: column '" + col.spec.name + "' is entirely missing");
      stats.medians[col.spec.name] = median_of(std::move(seen));
    } else {
      std::map<std::string, std::size_t> counts;
      for (const auto& v : col.labels)
        if (v) ++counts[*v];
      if (counts.empty()) throw std::runtime_error("impute: column '" + col.spec.name + "' is entirely missing");
      // Ties go to the lexicographically first level (map order).
      const auto best = std::max_element(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
        return a.second < b.second;
      });
      stats.modes[col.spec.name] = best->first;
    }
  }
  return stats;
}

RawDataset impute(const RawDataset& ds, const ImputeStats& stats) {
  RawDataset out = ds;
  for (auto& col : out.columns) {
    if (col.spec.kind == ColumnKind::continuous) {
      const auto it = stats.medians.find(col.spec.name);
      if (it == stats.medians.end()) throw std::runtime_error("impute: no median for '" + col.spec.name + "'");
      for (auto& v : col.numeric)
        if (!v) v = it->second;
    } else {
      const auto it = stats.modes.find(col.spec.name);
      if (it == stats.modes.end()) throw std::runtime_error("impute: no mode for '" + col.spec.name + "'");
      for (auto& v : col.labels)
        if (!v) v = it->second;
    }
  }
  return out;
}

RawDataset impute(const RawDataset& ds) { return impute(ds, fit_impute(ds)); }

std::size_t EncodeStats::width(const FeatureSchema& schema) const {
  std::size_t w = 0;
  for (const auto& c : schema.columns) {
    if (c.kind == ColumnKind::continuous) {
      ++w;
    } else {
      const auto it = levels.find(c.name);
      w += it == levels.end() ? 0 : it->second.size();
    }
  }
  return w;
}

EncodeStats fit_encode(const RawDataset& train) {
  if (train.missing() != 0) throw std::runtime_error("encode: dataset has missing entries; impute first");
  EncodeStats stats;
  for (const auto& col : train.columns) {
    const std::string& name = col.spec.name;
    if (col.spec.kind == ColumnKind::continuous) {
      double mean = 0.0;
      for (const auto& v : col.numeric) mean += *v;
      mean /= static_cast<double>(col.numeric.size());
      double var = 0.0;
      for (const auto& v : col.numeric) var += (*v - mean) * (*v - mean);
      var /= static_cast<double>(col.numeric.size());
      stats.means[name] = mean;
      stats.stds[name] = std::sqrt(var);
      if (var == 0.0) stats.warnings.push_back("column '" + name + "' has zero variance; left unscaled");
    } else {
      std::set<std::string> lv;
      for (const auto& v : col.labels) lv.insert(*v);
      stats.levels[name] = std::vector<std::string>(lv.begin(), lv.end());
    }
  }
  return stats;
}

SurvDataset encode(const RawDataset& ds, const EncodeStats& stats) {
  if (ds.missing() != 0) throw std::runtime_error("encode: dataset has missing entries; impute first");
  SurvDataset out;
  out.schema = ds.schema;
  out.t = ds.t;
  out.y = ds.y;
  const std::size_t n = ds.size();
  out.X = Matrix(n, stats.width(ds.schema));
  std::size_t c = 0;
  for (const auto& col : ds.columns) {
    const std::string& name = col.spec.name;
    if (col.spec.kind == ColumnKind::continuous) {
      const double mean = stats.means.at(name);
      const double sd = stats.stds.at(name);
      for (std::size_t r = 0; r < n; ++r) {
        const double centred = *col.numeric[r] - mean;
        out.X(r, c) = sd > 0.0 ? centred / sd : centred;
      }
      out.feature_names.push_back(name);
      ++c;
    } else {
      const auto& levels = stats.levels.at(name);
      for (std::size_t r = 0; r < n; ++r) {
        const auto it = std::lower_bound(levels.begin(), levels.end(), *col.labels[r]);
        if (it != levels.end() && *it == *col.labels[r]) {
          out.X(r, c + static_cast<std::size_t>(it - levels.begin())) = 1.0;
        }
      }
      for (const auto& l : levels) out.feature_names.push_back(name + "=" + l);
      c += levels.size();
    }
  }
  return out;
}

Preprocessor Preprocessor::fit(const RawDataset& train) {
  Preprocessor p;
  p.impute = fit_impute(train);
  p.encode = fit_encode(sfm::impute(train, p.impute));
  return p;
}

SurvDataset Preprocessor::apply(const RawDataset& ds) const {
  return sfm::encode(sfm::impute(ds, impute), encode);
}

SplitIndices stratified_split(std::span<const int> y, const SplitSpec& spec) {
  for (double f : spec.fractions) {
    if (!(f > 0.0)) throw std::invalid_argument("split: every fraction must be positive");
  }
  const double total = spec.fractions[0] + spec.fractions[1] + spec.fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");

  std::array<std::vector<std::size_t>, 2> strata;
  for (std::size_t i = 0; i < y.size(); ++i) strata[y[i] == 1 ? 1 : 0].push_back(i);

  Rng rng(spec.seed);
  SplitIndices out;
  for (auto& stratum : strata) {
    rng.shuffle(stratum);
    const double n = static_cast<double>(stratum.size());
    const auto n_valid = static_cast<std::size_t>(std::llround(spec.fractions[1] * n));
    const auto n_test = static_cast<std::size_t>(std::llround(spec.fractions[2] * n));
    if (n_valid + n_test > stratum.size()) {
      throw std::invalid_argument("split: fractions leave no training rows in a stratum");
    }
    const std::size_t n_train = stratum.size() - n_valid - n_test;
    auto it = stratum.begin();
    out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(n_train));
    it += static_cast<std::ptrdiff_t>(n_train);
    out.valid.insert(out.valid.end(), it, it + static_cast<std::ptrdiff_t>(n_valid));
    it += static_cast<std::ptrdiff_t>(n_valid);
    out.test.insert(out.test.end(), it, stratum.end());
  }
  for (auto* part : {&out.train, &out.valid, &out.test}) {
    if (part->empty()) {
      throw std::invalid_argument("split: " + std::to_string(y.size()) +
                                  " rows cannot fill every split with the given fractions");
    }
    std::sort(part->begin(), part->end());
  }
  return out;
}

RawDataset take_rows(const RawDataset& ds, std::span<const std::size_t> rows) {
  RawDataset out;
  out.schema = ds.schema;
  for (const auto& col : ds.columns) {
    RawColumn c{col.spec, {}, {}};
    for (std::size_t r : rows) {
      if (col.spec.kind == ColumnKind::continuous) {
        c.numeric.push_back(col.numeric[r]);
      } else {
        c.labels.push_back(col.labels[r]);
      }
    }
    out.columns.push_back(std::move(c));
  }
  for (std::size_t r : rows) {
    out.t.push_back(ds.t[r]);
    out.y.push_back(ds.y[r]);
  }
  return out;
}

SurvDataset take_rows(const SurvDataset& ds, std::span<const std::size_t> rows) {
  SurvDataset out;
  out.schema = ds.schema;
  out.feature_names = ds.feature_names;
  out.X = ds.X.select_rows(rows);
  for (std::size_t r : rows) {
    out.t.push_back(ds.t[r]);
    out.y.push_back(ds.y[r]);
  }
  return out;
}

}  // namespace sfm
