#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bopi {

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for malformed or unusable input data (bad CSV, unknown column, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Untyped tabular data as read from a CSV file. Empty strings mark missing cells.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::optional<std::size_t> column_index(const std::string& name) const;
};

/// Comma separated, header row required, '.' decimal separator. Every row must
/// have as many cells as the header.
RawTable read_csv(std::istream& in);
RawTable read_csv_file(const std::string& path);

/// One encoded feature column: a numeric source column, or one level of a
/// categorical source column (indicator), followed by z-scoring.
struct EncodedColumn {
  std::string source;
  std::size_t source_index = 0;
  std::optional<std::string> level;
  double mean = 0.0;
  double sd = 1.0;
};

struct Encoder {
  std::vector<EncodedColumn> columns;
  std::vector<std::string> dropped_columns;  // constant after encoding
  std::size_t rows_dropped = 0;              // rows removed for missing cells
};

/// Encoded numeric feature matrix (standardized units) plus response.
class Dataset {
 public:
  Dataset(FeatureMatrix features, Eigen::VectorXd response, Encoder encoder = {});

  [[nodiscard]] const FeatureMatrix& features() const noexcept { return features_; }
  [[nodiscard]] const Eigen::VectorXd& response() const noexcept { return response_; }
  [[nodiscard]] const Encoder& encoder() const noexcept { return encoder_; }

  [[nodiscard]] std::size_t rows() const noexcept { return static_cast<std::size_t>(features_.rows()); }
  /// Number of encoded feature columns (p - 1 in regression notation).
  [[nodiscard]] std::size_t feature_count() const noexcept {
    return static_cast<std::size_t>(features_.cols());
  }
  [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
    return {features_.data() + i * feature_count(), feature_count()};
  }

  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;
  [[nodiscard]] Dataset with_response(Eigen::VectorXd response) const;

 private:
  FeatureMatrix features_;
  Eigen::VectorXd response_;
  Encoder encoder_;
};

/// Drops rows with missing cells, one-hot encodes non-numeric columns, then
/// z-scores every column with statistics of the full input. Constant columns
/// are dropped and listed in the encoder.
Dataset encode_dataset(const RawTable& raw, const std::string& response_column);

/// Fits z-score parameters on `raw` (numeric columns only) and encodes it.
Dataset encode_numeric(const FeatureMatrix& raw, Eigen::VectorXd response,
                       const std::vector<std::string>& names = {});

/// Applies an already fitted numeric encoder to new raw rows.
FeatureMatrix apply_numeric_encoder(const Encoder& encoder, const FeatureMatrix& raw);

}  // namespace bopi
