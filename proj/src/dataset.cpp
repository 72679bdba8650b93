#include "bopi/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>

namespace bopi {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      cells.push_back(was_quoted ? cell : trim(cell));
      cell.clear();
      was_quoted = false;
    } else {
      cell.push_back(c);
    }
  }
  if (quoted) throw DataError("unterminated quote on line " + std::to_string(line_no));
  cells.push_back(was_quoted ? cell : trim(cell));
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

struct ColumnStats {
  double mean;
  double sd;
};

ColumnStats column_stats(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const auto n = static_cast<double>(v.size());
  const double mean = v.mean();
  const double ss = (v.array() - mean).square().sum();
  return {mean, v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

// Constant means zero spread relative to the column's magnitude.
bool is_constant(const ColumnStats& s) {
  return !(s.sd > 1e-12 * std::max(1.0, std::fabs(s.mean)));
}

}  // namespace

std::optional<std::size_t> RawTable::column_index(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header.begin());
}

RawTable read_csv(std::istream& in) {
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);  // UTF-8 BOM
    }
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line, line_no);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw DataError("CSV input has no header row");
  return table;
}

RawTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_csv(in);
}

Dataset::Dataset(FeatureMatrix features, Eigen::VectorXd response, Encoder encoder)
    : features_(std::move(features)), response_(std::move(response)), encoder_(std::move(encoder)) {
  if (features_.rows() != response_.size()) {
    throw DataError("feature matrix and response have different row counts");
  }
  if (features_.rows() < 1) throw DataError("dataset is empty");
  if (!features_.allFinite() || !response_.allFinite()) {
    throw DataError("dataset contains non-finite values");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  FeatureMatrix f(static_cast<Eigen::Index>(indices.size()), features_.cols());
  Eigen::VectorXd y(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(indices[r]);
    f.row(static_cast<Eigen::Index>(r)) = features_.row(src);
    y(static_cast<Eigen::Index>(r)) = response_(src);
  }
  return {std::move(f), std::move(y), encoder_};
}

Dataset Dataset::with_response(Eigen::VectorXd response) const {
  return {features_, std::move(response), encoder_};
}

Dataset encode_dataset(const RawTable& raw, const std::string& response_column) {
  const auto response_idx = raw.column_index(response_column);
  if (!response_idx) throw DataError("unknown response column '" + response_column + "'");

  Encoder encoder;
  std::vector<const std::vector<std::string>*> kept;
  for (const auto& row : raw.rows) {
    const bool complete =
        std::none_of(row.begin(), row.end(), [](const std::string& c) { return c.empty(); });
    if (complete) {
      kept.push_back(&row);
    } else {
      ++encoder.rows_dropped;
    }
  }
  if (kept.empty()) throw DataError("no complete rows in dataset");
  const auto n = static_cast<Eigen::Index>(kept.size());

  Eigen::VectorXd response(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto v = parse_number((*kept[static_cast<std::size_t>(r)])[*response_idx]);
    if (!v) throw DataError("response column '" + response_column + "' is not numeric");
    response(r) = *v;
  }

  // Raw (unstandardized) encoded columns, built in header order.
  std::vector<Eigen::VectorXd> raw_columns;
  std::vector<EncodedColumn> specs;
  for (std::size_t c = 0; c < raw.header.size(); ++c) {
    if (c == *response_idx) continue;
    Eigen::VectorXd numeric(n);
    bool all_numeric = true;
    for (Eigen::Index r = 0; r < n && all_numeric; ++r) {
      const auto v = parse_number((*kept[static_cast<std::size_t>(r)])[c]);
      if (v) {
        numeric(r) = *v;
      } else {
        all_numeric = false;
      }
    }
    if (all_numeric) {
      raw_columns.push_back(std::move(numeric));
      specs.push_back({raw.header[c], c, std::nullopt});
      continue;
    }
    // Categorical: one indicator per level, levels in sorted order.
    std::map<std::string, std::vector<Eigen::Index>> levels;
    for (Eigen::Index r = 0; r < n; ++r) levels[(*kept[static_cast<std::size_t>(r)])[c]].push_back(r);
    for (const auto& [level, members] : levels) {
      Eigen::VectorXd indicator = Eigen::VectorXd::Zero(n);
      for (auto r : members) indicator(r) = 1.0;
      raw_columns.push_back(std::move(indicator));
      specs.push_back({raw.header[c], c, level});
    }
  }

  std::vector<Eigen::Index> retained;
  for (std::size_t j = 0; j < raw_columns.size(); ++j) {
    const auto stats = column_stats(raw_columns[j]);
    if (is_constant(stats)) {
      encoder.dropped_columns.push_back(specs[j].level ? specs[j].source + "=" + *specs[j].level
                                                       : specs[j].source);
      continue;
    }
    specs[j].mean = stats.mean;
    specs[j].sd = stats.sd;
    encoder.columns.push_back(specs[j]);
    retained.push_back(static_cast<Eigen::Index>(j));
  }

  FeatureMatrix features(n, static_cast<Eigen::Index>(retained.size()));
  for (std::size_t k = 0; k < retained.size(); ++k) {
    const auto& spec = encoder.columns[k];
    features.col(static_cast<Eigen::Index>(k)) =
        (raw_columns[static_cast<std::size_t>(retained[k])].array() - spec.mean) / spec.sd;
  }
  return {std::move(features), std::move(response), std::move(encoder)};
}

Dataset encode_numeric(const FeatureMatrix& raw, Eigen::VectorXd response,
                       const std::vector<std::string>& names) {
  Encoder encoder;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const std::string name =
        static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                   : "x" + std::to_string(j + 1);
    const auto stats = column_stats(raw.col(j));
    if (is_constant(stats)) {
      encoder.dropped_columns.push_back(name);
      continue;
    }
    encoder.columns.push_back({name, static_cast<std::size_t>(j), std::nullopt, stats.mean, stats.sd});
  }
  FeatureMatrix features = apply_numeric_encoder(encoder, raw);
  return {std::move(features), std::move(response), std::move(encoder)};
}

FeatureMatrix apply_numeric_encoder(const Encoder& encoder, const FeatureMatrix& raw) {
  FeatureMatrix out(raw.rows(), static_cast<Eigen::Index>(encoder.columns.size()));
  for (std::size_t k = 0; k < encoder.columns.size(); ++k) {
    const auto& spec = encoder.columns[k];
    if (spec.level) throw DataError("apply_numeric_encoder: categorical column in encoder");
    if (static_cast<Eigen::Index>(spec.source_index) >= raw.cols()) {
      throw DataError("apply_numeric_encoder: raw matrix has too few columns");
    }
    out.col(static_cast<Eigen::Index>(k)) =
        (raw.col(static_cast<Eigen::Index>(spec.source_index)).array() - spec.mean) / spec.sd;
  }
  return out;
}

}  // namespace bopi
