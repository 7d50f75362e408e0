#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cats {

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingFileError : CsvError {
  using CsvError::CsvError;
};
struct EmptyFileError : CsvError {
  using CsvError::CsvError;
};
struct NonNumericCellError : CsvError {
  using CsvError::CsvError;
};

/// Raw multivariate series, rows are time steps, columns are features.
/// Immutable after load; safe to share across threads.
struct SeriesDataset {
  Eigen::MatrixXd values;  // T_total x D
  std::vector<std::string> feature_names;
  std::vector<std::string> timestamps;  // provenance only, may be empty

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index features() const { return values.cols(); }
};

/// Parse a headered CSV. A column whose name equals `date_column` is kept as
/// timestamps and excluded from the value matrix. Every other cell must be
/// numeric; a blank or unparseable cell raises NonNumericCellError naming the
/// (row, col) position.
SeriesDataset load_csv(const std::string& path, const std::string& date_column = "date");

struct IndexRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - begin; }
};

struct SplitRanges {
  IndexRange train, val, test;
};

/// Chronological train/val/test split. Boundaries are floor(cum_ratio * T);
/// val and test start `lookback` steps before their boundary so the first
/// window of each split has a full lookback.
SplitRanges split(Eigen::Index t_total, const std::array<double, 3>& ratio,
                  int lookback, int horizon);

/// Window start offsets inside a range of length `range_len`. A window covers
/// [o, o+L) lookback and [o+L, o+L+H) horizon. Too-short ranges give an empty
/// list.
std::vector<Eigen::Index> make_windows(Eigen::Index range_len, int lookback,
                                       int horizon, int stride = 1);

/// One batch of flattened univariate instances. Column j of X is the lookback
/// of instance j (length L), column j of Y its horizon (length H).
struct WindowBatch {
  Eigen::MatrixXd X;  // L x (B*D)
  Eigen::MatrixXd Y;  // H x (B*D)
  std::vector<std::pair<Eigen::Index, Eigen::Index>> origin;  // (offset, feature)
  std::vector<int> feature;  // feature index per column, for affine lookup

  Eigen::Index instances() const { return X.cols(); }
};

/// Deterministic single-consumer stream of WindowBatch. Each batch holds B
/// windows (the final one may be smaller) flattened to B*D instances.
class BatchStream {
 public:
  BatchStream(const SeriesDataset& ds, IndexRange range,
              std::vector<Eigen::Index> offsets, int lookback, int horizon,
              int batch_windows, bool shuffle, std::uint64_t seed);

  bool next(WindowBatch& out);
  void reset();
  Eigen::Index total_windows() const { return static_cast<Eigen::Index>(offsets_.size()); }

 private:
  const SeriesDataset* ds_;
  IndexRange range_;
  std::vector<Eigen::Index> offsets_;
  int lookback_, horizon_, batch_windows_;
  std::size_t cursor_ = 0;
};

}  // namespace cats
