#pragma once

// Air-quality CSV ingestion, complete-row filtering, min-max scaling,
// chronological splitting, seeded mini-batching and Pearson correlation.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vaecal/errors.hpp"

namespace vaecal {

inline constexpr double kMissingSentinel = -200.0;

inline constexpr std::array<std::string_view, 4> kInputColumns = {
    "PT08.S1(CO)", "PT08.S2(NMHC)", "PT08.S3(NOx)", "PT08.S4(NO2)"};
inline constexpr std::array<std::string_view, 4> kTargetColumns = {
    "CO(GT)", "NMHC(GT)", "NOx(GT)", "NO2(GT)"};

enum class Target { CO = 0, NMHC = 1, NOx = 2, NO2 = 3 };

inline constexpr std::array<Target, 4> kAllTargets = {Target::CO, Target::NMHC,
                                                      Target::NOx, Target::NO2};

inline std::string_view target_name(Target t) {
  static constexpr std::array<std::string_view, 4> names = {"CO", "NMHC", "NOx",
                                                            "NO2"};
  return names[static_cast<std::size_t>(t)];
}

inline std::string_view target_column(Target t) {
  return kTargetColumns[static_cast<std::size_t>(t)];
}

inline std::optional<Target> parse_target(std::string_view s) {
  for (Target t : kAllTargets) {
    if (s == target_name(t) || s == target_column(t)) return t;
  }
  return std::nullopt;
}

struct Timestamp {
  int year = 0;
  int month = 0;
  int day = 0;
  int hour = 0;

  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

/// One data row. A reading equal to the -200 sentinel is stored as nullopt.
struct RawRecord {
  std::size_t line = 0;
  Timestamp timestamp;
  std::vector<std::optional<double>> values;  // aligned with RawTable::columns
};

struct RawTable {
  std::vector<std::string> columns;  // numeric columns, Date/Time excluded
  std::vector<RawRecord> records;

  std::optional<std::size_t> column_index(std::string_view name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) return std::nullopt;
    return static_cast<std::size_t>(it - columns.begin());
  }

  std::size_t require_column(std::string_view name) const {
    auto idx = column_index(name);
    if (!idx) throw SchemaError("column not found: " + std::string(name));
    return *idx;
  }
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(';', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  while (!out.empty() && out.back().find_first_not_of(" \t") == std::string_view::npos) {
    out.pop_back();
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_decimal(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::string buf(text);
  std::replace(buf.begin(), buf.end(), ',', '.');
  const char* first = buf.data();
  const char* last = buf.data() + buf.size();
  if (*first == '+') ++first;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

inline bool parse_int(std::string_view text, int& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

// Date is dd/mm/yyyy, Time is HH.MM.SS.
inline std::optional<Timestamp> parse_timestamp(std::string_view date,
                                                std::string_view time) {
  date = trim(date);
  time = trim(time);
  Timestamp ts;
  auto d1 = date.find('/');
  auto d2 = date.find('/', d1 == std::string_view::npos ? 0 : d1 + 1);
  if (d1 == std::string_view::npos || d2 == std::string_view::npos) return std::nullopt;
  if (!parse_int(date.substr(0, d1), ts.day) ||
      !parse_int(date.substr(d1 + 1, d2 - d1 - 1), ts.month) ||
      !parse_int(date.substr(d2 + 1), ts.year)) {
    return std::nullopt;
  }
  auto t1 = time.find_first_of(".:");
  if (t1 == std::string_view::npos || !parse_int(time.substr(0, t1), ts.hour)) {
    return std::nullopt;
  }
  if (ts.month < 1 || ts.month > 12 || ts.day < 1 || ts.day > 31 || ts.hour < 0 ||
      ts.hour > 23) {
    return std::nullopt;
  }
  return ts;
}

}  // namespace detail

/// Parses the semicolon-delimited, comma-decimal hourly CSV. Trailing empty
/// fields are dropped; rows made only of separators are skipped.
inline RawTable parse_csv(std::istream& in) {
  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> date_col;
  std::optional<std::size_t> time_col;
  std::vector<std::optional<std::size_t>> numeric_slot;  // field -> column
  std::size_t field_count = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    auto fields = detail::split_fields(line);
    if (fields.empty()) continue;

    if (!have_header) {
      field_count = fields.size();
      for (std::size_t i = 0; i < fields.size(); ++i) {
        auto name = detail::trim(fields[i]);
        if (name.empty()) throw ParseError(line_no, "empty column name in header");
        if (name == "Date") {
          date_col = i;
          numeric_slot.emplace_back();
        } else if (name == "Time") {
          time_col = i;
          numeric_slot.emplace_back();
        } else {
          numeric_slot.emplace_back(table.columns.size());
          table.columns.emplace_back(name);
        }
      }
      have_header = true;
      continue;
    }

    if (fields.size() != field_count) {
      throw ParseError(line_no, "expected " + std::to_string(field_count) +
                                    " fields, found " + std::to_string(fields.size()));
    }
    RawRecord rec;
    rec.line = line_no;
    rec.values.resize(table.columns.size());
    if (date_col && time_col) {
      auto ts = detail::parse_timestamp(fields[*date_col], fields[*time_col]);
      if (!ts) throw ParseError(line_no, "unparseable date/time");
      rec.timestamp = *ts;
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!numeric_slot[i]) continue;
      auto v = detail::parse_decimal(fields[i]);
      if (!v) {
        throw ParseError(line_no, "unparseable number '" + std::string(fields[i]) +
                                      "' in column " + table.columns[*numeric_slot[i]]);
      }
      if (*v != kMissingSentinel) rec.values[*numeric_slot[i]] = *v;
    }
    table.records.push_back(std::move(rec));
  }
  if (!have_header) throw ParseError(line_no, "missing header row");
  return table;
}

inline RawTable parse_csv_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_csv(in);
}

struct SensorRow {
  Timestamp timestamp;
  std::array<double, 4> inputs{};   // kInputColumns order
  std::array<double, 4> targets{};  // kTargetColumns order
};

/// Complete, chronologically ordered rows with the four MOS inputs and the
/// four reference targets.
class SensorFrame {
 public:
  SensorFrame() = default;
  explicit SensorFrame(std::vector<SensorRow> rows) : rows_(std::move(rows)) {}

  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  const std::vector<SensorRow>& rows() const noexcept { return rows_; }
  const SensorRow& operator[](std::size_t i) const { return rows_[i]; }

  static std::vector<std::string> column_names() {
    std::vector<std::string> out;
    for (auto c : kInputColumns) out.emplace_back(c);
    for (auto c : kTargetColumns) out.emplace_back(c);
    return out;
  }

  /// Values of a named input or target column, in row order.
  std::vector<double> column(std::string_view name) const {
    for (std::size_t i = 0; i < 4; ++i) {
      if (name == kInputColumns[i]) return extract([i](const SensorRow& r) { return r.inputs[i]; });
      if (name == kTargetColumns[i]) return extract([i](const SensorRow& r) { return r.targets[i]; });
    }
    throw SchemaError("unknown frame column: " + std::string(name));
  }

  SensorFrame slice(std::size_t first, std::size_t count) const {
    return SensorFrame(std::vector<SensorRow>(rows_.begin() + static_cast<std::ptrdiff_t>(first),
                                              rows_.begin() + static_cast<std::ptrdiff_t>(first + count)));
  }

 private:
  template <typename F>
  std::vector<double> extract(F f) const {
    std::vector<double> out;
    out.reserve(rows_.size());
    for (const auto& r : rows_) out.push_back(f(r));
    return out;
  }

  std::vector<SensorRow> rows_;
};

/// Keeps rows where all four inputs and all four targets are reported.
inline SensorFrame filter_complete(const RawTable& table) {
  std::array<std::size_t, 4> in_idx{};
  std::array<std::size_t, 4> tgt_idx{};
  for (std::size_t i = 0; i < 4; ++i) {
    in_idx[i] = table.require_column(kInputColumns[i]);
    tgt_idx[i] = table.require_column(kTargetColumns[i]);
  }
  std::vector<SensorRow> rows;
  for (const auto& rec : table.records) {
    SensorRow row;
    row.timestamp = rec.timestamp;
    bool complete = true;
    for (std::size_t i = 0; i < 4 && complete; ++i) {
      const auto& a = rec.values[in_idx[i]];
      const auto& b = rec.values[tgt_idx[i]];
      if (!a || !b) {
        complete = false;
      } else {
        row.inputs[i] = *a;
        row.targets[i] = *b;
      }
    }
    if (complete) rows.push_back(row);
  }
  if (rows.empty()) {
    throw SchemaError("no complete rows; is this the hourly air-quality file?");
  }
  return SensorFrame(std::move(rows));
}

/// Per-column min-max scaling, x' = (x - min) / (max - min).
class Normalizer {
 public:
  struct Column {
    std::string name;
    double min = 0.0;
    double max = 1.0;
  };

  Normalizer() = default;

  explicit Normalizer(std::vector<Column> columns) : columns_(std::move(columns)) {
    for (const auto& c : columns_) {
      if (!(c.max > c.min) || !std::isfinite(c.min) || !std::isfinite(c.max)) {
        throw DegenerateError("degenerate range for column " + c.name);
      }
    }
  }

  static Normalizer fit(const SensorFrame& frame, std::span<const std::string> names) {
    std::vector<Column> cols;
    for (const auto& name : names) {
      auto values = frame.column(name);
      if (values.empty()) throw DegenerateError("empty frame");
      auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      if (!(*hi > *lo)) throw DegenerateError("constant column " + name);
      cols.push_back({name, *lo, *hi});
    }
    return Normalizer(std::move(cols));
  }

  static Normalizer fit(const SensorFrame& frame, std::initializer_list<std::string_view> names) {
    std::vector<std::string> owned(names.begin(), names.end());
    return fit(frame, std::span<const std::string>(owned));
  }

  std::size_t size() const noexcept { return columns_.size(); }
  const std::vector<Column>& columns() const noexcept { return columns_; }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i].name == name) return i;
    }
    throw SchemaError("normalizer has no column " + std::string(name));
  }

  double apply(std::size_t col, double x) const {
    const auto& c = columns_.at(col);
    return (x - c.min) / (c.max - c.min);
  }

  double invert(std::size_t col, double x) const {
    const auto& c = columns_.at(col);
    return x * (c.max - c.min) + c.min;
  }

  std::vector<double> apply(std::span<const double> values) const {
    check_width(values.size());
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = apply(i, values[i]);
    return out;
  }

  std::vector<double> invert(std::span<const double> values) const {
    check_width(values.size());
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = invert(i, values[i]);
    return out;
  }

  /// Normalized rows of `frame` for this normalizer's columns.
  std::vector<std::vector<double>> apply(const SensorFrame& frame) const {
    std::vector<std::vector<double>> cols;
    for (const auto& c : columns_) cols.push_back(frame.column(c.name));
    std::vector<std::vector<double>> rows(frame.size(), std::vector<double>(columns_.size()));
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      for (std::size_t i = 0; i < frame.size(); ++i) rows[i][j] = apply(j, cols[j][i]);
    }
    return rows;
  }

  friend bool operator==(const Normalizer& a, const Normalizer& b) {
    if (a.columns_.size() != b.columns_.size()) return false;
    for (std::size_t i = 0; i < a.columns_.size(); ++i) {
      const auto& x = a.columns_[i];
      const auto& y = b.columns_[i];
      if (x.name != y.name || x.min != y.min || x.max != y.max) return false;
    }
    return true;
  }

 private:
  void check_width(std::size_t n) const {
    if (n != columns_.size()) {
      throw SchemaError("normalizer expects " + std::to_string(columns_.size()) +
                        " columns, got " + std::to_string(n));
    }
  }

  std::vector<Column> columns_;
};

struct FrameSplit {
  SensorFrame train;
  SensorFrame eval;
};

/// First `train_count` rows train, the rest evaluate.
inline FrameSplit split_train_eval(const SensorFrame& frame, std::size_t train_count) {
  if (train_count == 0 || train_count >= frame.size()) {
    throw SchemaError("train_count must be in [1, " + std::to_string(frame.size() - 1) +
                      "], got " + std::to_string(train_count));
  }
  return {frame.slice(0, train_count), frame.slice(train_count, frame.size() - train_count)};
}

/// Seeded epoch-wise shuffling of [0, n) into consecutive batches.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch_size, std::uint64_t seed)
      : n_(n), batch_size_(batch_size), rng_(seed) {
    if (batch_size == 0) throw SchemaError("batch_size must be >= 1");
  }

  std::size_t batches_per_epoch() const noexcept {
    return (n_ + batch_size_ - 1) / batch_size_;
  }

  std::vector<std::vector<std::size_t>> next_epoch() {
    std::vector<std::size_t> perm(n_);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng_);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < n_; i += batch_size_) {
      auto end = std::min(n_, i + batch_size_);
      out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                       perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
  }

 private:
  std::size_t n_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
};

inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw SchemaError("pearson: bad lengths");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DegenerateError("pearson: constant column");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
};

/// Pearson coefficients over the 4 inputs followed by the 4 targets.
inline CorrelationMatrix correlation_matrix(const SensorFrame& frame) {
  CorrelationMatrix m;
  m.names = SensorFrame::column_names();
  std::vector<std::vector<double>> cols;
  for (const auto& n : m.names) cols.push_back(frame.column(n));
  const std::size_t k = cols.size();
  m.values.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    pearson(cols[i], cols[i]);  // rejects constant columns
    m.values[i][i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      m.values[i][j] = m.values[j][i] = pearson(cols[i], cols[j]);
    }
  }
  return m;
}

}  // namespace vaecal
