#include "badam/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "badam/errors.hpp"

namespace badam {

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.features = features.gather_rows(indices);
  if (!targets.empty()) out.targets = targets.gather_rows(indices);
  out.labels.reserve(labels.empty() ? 0 : indices.size());
  if (!labels.empty())
    for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.split = split;
  out.num_classes = num_classes;
  out.feature_names = feature_names;
  return out;
}

void LabeledDataset::validate() const {
  if (is_classification()) {
    if (labels.size() != features.rows()) throw ShapeError("dataset: label count differs from feature rows");
    for (std::size_t l : labels)
      if (l >= num_classes) throw ShapeError("dataset: class label out of range");
  } else if (targets.rows() != features.rows()) {
    throw ShapeError("dataset: target rows differ from feature rows");
  }
}

void RegressionTask::validate() const {
  if (n_train == 0 || n_test == 0) throw ContractError("regress.n_train and regress.n_test must be >= 1");
  if (!(train_lo < train_hi) || !(test_lo < test_hi)) throw ContractError("regress ranges must satisfy train_lo < train_hi and test_lo < test_hi");
  if (!(noise_std >= 0.0)) throw ContractError("regress.noise_std must be >= 0");
}

double regression_curve(double x, double noise) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return x + 0.3 * std::sin(two_pi * (x + noise)) + 0.3 * std::sin(2.0 * two_pi * (x + noise)) + noise;
}

RegressionData gen_regression(const RegressionTask& task, Rng& rng) {
  task.validate();
  RegressionData data;
  data.train.features = Matrix(task.n_train, 1);
  data.train.targets = Matrix(task.n_train, 1);
  data.train.split = Split::train;
  std::uniform_real_distribution<double> ux(task.train_lo, task.train_hi);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < task.n_train; ++i) {
    const double x = ux(rng);
    const double e = task.noise_std * noise(rng);
    data.train.features(i, 0) = x;
    data.train.targets(i, 0) = regression_curve(x, e);
  }

  data.test_grid.features = Matrix(task.n_test, 1);
  data.test_grid.targets = Matrix(task.n_test, 1);
  data.test_grid.split = Split::test;
  const double span = task.test_hi - task.test_lo;
  for (std::size_t i = 0; i < task.n_test; ++i) {
    const double x = task.n_test == 1 ? task.test_lo
                                      : task.test_lo + span * static_cast<double>(i) / static_cast<double>(task.n_test - 1);
    data.test_grid.features(i, 0) = x;
    data.test_grid.targets(i, 0) = regression_curve(x, 0.0);
  }
  return data;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (f == nullptr) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const int n = gzread(f, buf, sizeof(buf));
    if (n < 0) {
      gzclose(f);
      throw FormatError(path.string() + ": read error at byte offset " + std::to_string(bytes.size()));
    }
    if (n == 0) break;
    bytes.insert(bytes.end(), buf, buf + n);
  }
  gzclose(f);
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t offset) {
  return (std::uint32_t{b[offset]} << 24) | (std::uint32_t{b[offset + 1]} << 16) |
         (std::uint32_t{b[offset + 2]} << 8) | std::uint32_t{b[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 24));
  b.push_back(static_cast<std::uint8_t>(v >> 16));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxArray read_idx(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  if (bytes.size() < 4) throw FormatError(name + ": truncated header at byte offset " + std::to_string(bytes.size()));
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError(name + ": bad IDX magic at byte offset 0");
  if (bytes[2] != 0x08) throw FormatError(name + ": unsupported IDX element type at byte offset 2 (only unsigned byte)");
  const std::size_t ndims = bytes[3];
  if (ndims == 0) throw FormatError(name + ": IDX file with zero dimensions at byte offset 3");
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header)
    throw FormatError(name + ": truncated dimension table at byte offset " + std::to_string(bytes.size()));

  IdxArray out;
  std::size_t count = 1;
  for (std::size_t d = 0; d < ndims; ++d) {
    out.dims.push_back(read_be32(bytes, 4 + 4 * d));
    count *= out.dims.back();
  }
  if (bytes.size() < header + count)
    throw FormatError(name + ": truncated data at byte offset " + std::to_string(bytes.size()) + ", expected " +
                      std::to_string(header + count) + " bytes");
  if (bytes.size() > header + count)
    throw FormatError(name + ": trailing bytes after offset " + std::to_string(header + count));
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  std::size_t count = 1;
  for (auto d : array.dims) count *= d;
  if (count != array.data.size()) throw ShapeError("write_idx: dims do not match data length");
  std::vector<std::uint8_t> bytes{0, 0, 0x08, static_cast<std::uint8_t>(array.dims.size())};
  for (auto d : array.dims) put_be32(bytes, d);
  bytes.insert(bytes.end(), array.data.begin(), array.data.end());

  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.string().c_str(), "wb9");
    if (f == nullptr) throw FormatError("cannot write " + path.string());
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (n != static_cast<int>(bytes.size())) throw FormatError("short write to " + path.string());
  } else {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw FormatError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
}

LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const IdxArray images = read_idx(images_path);
  const IdxArray labels = read_idx(labels_path);
  if (images.dims.size() != 3) throw FormatError(images_path.string() + ": expected magic 0x00000803 (3-d images)");
  if (labels.dims.size() != 1) throw FormatError(labels_path.string() + ": expected magic 0x00000801 (1-d labels)");
  if (images.dims[0] != labels.dims[0])
    throw FormatError("IDX image count " + std::to_string(images.dims[0]) + " differs from label count " +
                      std::to_string(labels.dims[0]));

  const std::size_t n = images.dims[0];
  const std::size_t pixels = std::size_t{images.dims[1]} * images.dims[2];
  LabeledDataset out;
  out.features = Matrix(n, pixels);
  for (std::size_t i = 0; i < n * pixels; ++i) out.features.values()[i] = images.data[i] / 255.0;
  out.labels.assign(labels.data.begin(), labels.data.end());
  out.num_classes = 10;
  for (std::size_t l : out.labels) out.num_classes = std::max(out.num_classes, l + 1);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw FormatError("CSV row " + std::to_string(row) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && end[-1] == ' ') --end;
  if (begin == end) return false;
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file, expected a header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line, 1);
  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw FormatError(path.string() + ": no column named '" + label_column + "'");
  const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());
  for (const auto& c : schema.categorical)
    if (std::find(header.begin(), header.end(), c) == header.end())
      throw FormatError(path.string() + ": categorical column '" + c + "' not in header");
  auto is_categorical = [&](std::size_t col) {
    return std::find(schema.categorical.begin(), schema.categorical.end(), header[col]) != schema.categorical.end();
  };

  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_numbers;  // 1-based file line of each row
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line, row_no);
    if (fields.size() != header.size())
      throw FormatError(path.string() + ": row " + std::to_string(row_no) + " has " + std::to_string(fields.size()) +
                        " fields, header has " + std::to_string(header.size()));
    rows.push_back(std::move(fields));
    row_numbers.push_back(row_no);
  }
  if (rows.empty()) throw FormatError(path.string() + ": no data rows");

  if (schema.subsample > 0 && schema.subsample < rows.size()) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(schema.subsample_seed);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(schema.subsample);
    std::sort(order.begin(), order.end());
    std::vector<std::vector<std::string>> kept;
    std::vector<std::size_t> kept_numbers;
    kept.reserve(order.size());
    for (std::size_t i : order) {
      kept.push_back(std::move(rows[i]));
      kept_numbers.push_back(row_numbers[i]);
    }
    rows = std::move(kept);
    row_numbers = std::move(kept_numbers);
  }

  // Column plan: each non-label column is numeric (1 output) or one-hot.
  struct ColumnPlan {
    std::size_t source;
    std::vector<std::string> levels;  // empty for numeric
  };
  std::vector<ColumnPlan> plan;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_col) continue;
    ColumnPlan p{c, {}};
    if (is_categorical(c)) {
      std::set<std::string> levels;
      for (const auto& r : rows) levels.insert(r[c]);
      p.levels.assign(levels.begin(), levels.end());
      for (const auto& l : p.levels) names.push_back(header[c] + "=" + l);
    } else {
      names.push_back(header[c]);
    }
    plan.push_back(std::move(p));
  }

  LabeledDataset out;
  out.feature_names = names;
  out.features = Matrix(rows.size(), names.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t col = 0;
    for (const auto& p : plan) {
      const std::string& field = rows[i][p.source];
      if (p.levels.empty()) {
        double v = 0.0;
        if (!parse_double(field, v))
          throw FormatError(path.string() + ": row " + std::to_string(row_numbers[i]) + ", column '" + header[p.source] +
                            "': cannot parse '" + field + "' as a number");
        out.features(i, col++) = v;
      } else {
        const auto pos = std::lower_bound(p.levels.begin(), p.levels.end(), field) - p.levels.begin();
        out.features(i, col + static_cast<std::size_t>(pos)) = 1.0;
        col += p.levels.size();
      }
    }
  }

  if (schema.label_is_class) {
    std::vector<double> numeric(rows.size());
    bool all_int = !is_categorical(label_col);
    for (std::size_t i = 0; all_int && i < rows.size(); ++i) {
      all_int = parse_double(rows[i][label_col], numeric[i]) && numeric[i] >= 0.0 &&
                numeric[i] == std::floor(numeric[i]);
    }
    if (all_int) {
      for (double v : numeric) out.labels.push_back(static_cast<std::size_t>(v));
      out.num_classes = *std::max_element(out.labels.begin(), out.labels.end()) + 1;
    } else {
      std::set<std::string> levels;
      for (const auto& r : rows) levels.insert(r[label_col]);
      const std::vector<std::string> ordered(levels.begin(), levels.end());
      for (const auto& r : rows)
        out.labels.push_back(static_cast<std::size_t>(
            std::lower_bound(ordered.begin(), ordered.end(), r[label_col]) - ordered.begin()));
      out.num_classes = ordered.size();
    }
  } else {
    out.targets = Matrix(rows.size(), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double v = 0.0;
      if (!parse_double(rows[i][label_col], v))
        throw FormatError(path.string() + ": row " + std::to_string(row_numbers[i]) + ": unparseable target '" +
                          rows[i][label_col] + "'");
      out.targets(i, 0) = v;
    }
  }
  return out;
}

}  // namespace badam
