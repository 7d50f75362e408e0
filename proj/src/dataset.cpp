#include "cats/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace cats {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

SeriesDataset load_csv(const std::string& path, const std::string& date_column) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw EmptyFileError("empty file: " + path);
  auto header = split_line(line);
  for (auto& h : header) h = trim(h);
  if (header.empty()) throw EmptyFileError("no header columns: " + path);

  Eigen::Index date_idx = -1;
  if (!date_column.empty()) {
    auto it = std::find(header.begin(), header.end(), date_column);
    if (it != header.end()) date_idx = it - header.begin();
  }

  SeriesDataset ds;
  for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(header.size()); ++c)
    if (c != date_idx) ds.feature_names.push_back(header[c]);
  const Eigen::Index d = static_cast<Eigen::Index>(ds.feature_names.size());
  if (d == 0) throw EmptyFileError("no value columns: " + path);

  std::vector<double> data;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != static_cast<Eigen::Index>(header.size()))
      throw NonNumericCellError("row " + std::to_string(rows) + " has " +
                                std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(header.size()));
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(cells.size()); ++c) {
      if (c == date_idx) {
        ds.timestamps.push_back(trim(cells[c]));
        continue;
      }
      const std::string v = trim(cells[c]);
      char* end = nullptr;
      double x = std::strtod(v.c_str(), &end);
      if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(x))
        throw NonNumericCellError("non-numeric cell at (" + std::to_string(rows) +
                                  ", " + std::to_string(c) + ")");
      data.push_back(x);
    }
    ++rows;
  }
  if (rows == 0) throw EmptyFileError("no data rows: " + path);

  ds.values.resize(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < d; ++c) ds.values(r, c) = data[r * d + c];
  return ds;
}

SplitRanges split(Eigen::Index t_total, const std::array<double, 3>& ratio,
                  int lookback, int horizon) {
  for (double r : ratio)
    if (r <= 0.0) throw std::invalid_argument("split ratios must be positive");
  const double sum = ratio[0] + ratio[1] + ratio[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("ratios must sum to 1");

  // boundary = floor(cum_ratio * T); tiny guard against fp round-down
  const auto bound = [&](double cum) {
    return static_cast<Eigen::Index>(std::floor(cum * static_cast<double>(t_total) + 1e-9));
  };
  const Eigen::Index b1 = bound(ratio[0]);
  const Eigen::Index b2 = bound(ratio[0] + ratio[1]);

  SplitRanges s;
  s.train = {0, b1};
  s.val = {b1 - lookback, b2};
  s.test = {b2 - lookback, t_total};
  if (s.val.begin < 0) s.val.begin = 0;
  if (s.test.begin < 0) s.test.begin = 0;

  const Eigen::Index need = static_cast<Eigen::Index>(lookback) + horizon;
  if (s.train.size() < need || s.val.size() < need || s.test.size() < need)
    throw std::invalid_argument("a split is shorter than lookback + horizon");
  return s;
}

std::vector<Eigen::Index> make_windows(Eigen::Index range_len, int lookback,
                                       int horizon, int stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::vector<Eigen::Index> offsets;
  const Eigen::Index span = static_cast<Eigen::Index>(lookback) + horizon;
  for (Eigen::Index o = 0; o + span <= range_len; o += stride) offsets.push_back(o);
  return offsets;
}

BatchStream::BatchStream(const SeriesDataset& ds, IndexRange range,
                         std::vector<Eigen::Index> offsets, int lookback,
                         int horizon, int batch_windows, bool shuffle,
                         std::uint64_t seed)
    : ds_(&ds),
      range_(range),
      offsets_(std::move(offsets)),
      lookback_(lookback),
      horizon_(horizon),
      batch_windows_(batch_windows) {
  if (batch_windows_ < 1) throw std::invalid_argument("batch size must be >= 1");
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(offsets_.begin(), offsets_.end(), rng);
  }
}

void BatchStream::reset() { cursor_ = 0; }

bool BatchStream::next(WindowBatch& out) {
  if (cursor_ >= offsets_.size()) return false;
  const std::size_t n_win =
      std::min<std::size_t>(batch_windows_, offsets_.size() - cursor_);
  const Eigen::Index d = ds_->features();
  const Eigen::Index n = static_cast<Eigen::Index>(n_win) * d;

  out.X.resize(lookback_, n);
  out.Y.resize(horizon_, n);
  out.origin.clear();
  out.origin.reserve(n);
  out.feature.clear();
  out.feature.reserve(n);

  Eigen::Index col = 0;
  for (std::size_t w = 0; w < n_win; ++w) {
    const Eigen::Index o = range_.begin + offsets_[cursor_ + w];
    for (Eigen::Index f = 0; f < d; ++f, ++col) {
      out.X.col(col) = ds_->values.block(o, f, lookback_, 1);
      out.Y.col(col) = ds_->values.block(o + lookback_, f, horizon_, 1);
      out.origin.emplace_back(offsets_[cursor_ + w], f);
      out.feature.push_back(static_cast<int>(f));
    }
  }
  cursor_ += n_win;
  return true;
}

}  // namespace cats
