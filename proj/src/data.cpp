#include "nagqn/data.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

namespace nagqn {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view text, double& value) {
  text = trim(text);
  if (text.empty()) return false;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc{} && end == text.data() + text.size() && std::isfinite(value);
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataFormatError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw DataFormatError("cannot write '" + path.string() + "'");
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw DataFormatError(path.string() + ": truncated IDX header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                              static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

void Dataset::validate() const {
  const auto n = features.rows();
  if (kind == Kind::classification) {
    if (static_cast<Eigen::Index>(labels.size()) != n) throw DataValidationError("label count does not match rows");
    for (int label : labels)
      if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
        throw DataValidationError("class label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
  } else if (targets.rows() != n) {
    throw DataValidationError("target rows do not match feature rows");
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.kind = kind;
  out.num_classes = num_classes;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  if (kind == Kind::classification)
    out.labels.reserve(rows.size());
  else
    out.targets.resize(static_cast<Eigen::Index>(rows.size()), targets.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    if (rows[i] >= size()) throw ContractViolation("row index out of range");
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(r);
    if (kind == Kind::classification)
      out.labels.push_back(labels[rows[i]]);
    else
      out.targets.row(static_cast<Eigen::Index>(i)) = targets.row(r);
  }
  return out;
}

MiniBatch Dataset::batch(const std::vector<std::size_t>& rows) const {
  Dataset sub = subset(rows);
  MiniBatch b;
  b.inputs = std::move(sub.features);
  b.labels = std::move(sub.labels);
  b.targets = std::move(sub.targets);
  return b;
}

MiniBatch Dataset::full_batch() const {
  MiniBatch b;
  b.inputs = features;
  b.labels = labels;
  b.targets = targets;
  return b;
}

Dataset load_digits_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<double> values;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != 65)
      throw DataFormatError(where(path, line_no) + ": expected 65 fields, found " + std::to_string(fields.size()));
    for (std::size_t i = 0; i < 65; ++i) {
      double v = 0.0;
      if (!parse_double(fields[i], v) || v != std::floor(v))
        throw DataFormatError(where(path, line_no) + ": field " + std::to_string(i + 1) + " is not an integer");
      if (i < 64) {
        if (v < 0.0 || v > 16.0)
          throw DataValidationError(where(path, line_no) + ": pixel value outside [0, 16]");
        values.push_back(v / 16.0);
      } else {
        if (v < 0.0 || v > 9.0) throw DataValidationError(where(path, line_no) + ": label outside [0, 9]");
        labels.push_back(static_cast<int>(v));
      }
    }
  }
  if (labels.empty()) throw DataValidationError(path.string() + ": no samples");
  Dataset ds;
  ds.kind = Dataset::Kind::classification;
  ds.num_classes = 10;
  ds.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(labels.size()), 64);
  ds.labels = std::move(labels);
  return ds;
}

void write_digits_csv(const Dataset& ds, const std::filesystem::path& path) {
  if (ds.kind != Dataset::Kind::classification || ds.num_features() != 64)
    throw ContractViolation("digits format needs 64 features and class labels");
  auto out = open_output(path);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (Eigen::Index c = 0; c < 64; ++c) out << std::lround(ds.features(static_cast<Eigen::Index>(r), c) * 16.0) << ',';
    out << ds.labels[r] << '\n';
  }
}

Dataset load_idx_mnist(const std::filesystem::path& images, const std::filesystem::path& labels) {
  auto img = open_input(images, std::ios::binary);
  auto lab = open_input(labels, std::ios::binary);
  if (read_be32(img, images) != 0x00000803u) throw DataFormatError(images.string() + ": bad IDX image magic");
  if (read_be32(lab, labels) != 0x00000801u) throw DataFormatError(labels.string() + ": bad IDX label magic");
  const std::size_t n_images = read_be32(img, images);
  const std::size_t rows = read_be32(img, images);
  const std::size_t cols = read_be32(img, images);
  const std::size_t n_labels = read_be32(lab, labels);
  if (n_images != n_labels)
    throw DataValidationError("IDX image count " + std::to_string(n_images) + " differs from label count " +
                              std::to_string(n_labels));
  const std::size_t pixels = rows * cols;
  std::vector<unsigned char> buffer(n_images * pixels);
  if (!img.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size())))
    throw DataFormatError(images.string() + ": truncated image data");
  std::vector<unsigned char> label_bytes(n_labels);
  if (!lab.read(reinterpret_cast<char*>(label_bytes.data()), static_cast<std::streamsize>(label_bytes.size())))
    throw DataFormatError(labels.string() + ": truncated label data");

  Dataset ds;
  ds.kind = Dataset::Kind::classification;
  ds.num_classes = 10;
  ds.features.resize(static_cast<Eigen::Index>(n_images), static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < n_images; ++i)
    for (std::size_t p = 0; p < pixels; ++p)
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = buffer[i * pixels + p] / 255.0;
  ds.labels.assign(label_bytes.begin(), label_bytes.end());
  ds.validate();
  return ds;
}

void write_idx_mnist(const Dataset& ds, std::size_t rows, std::size_t cols, const std::filesystem::path& images,
                     const std::filesystem::path& labels) {
  if (ds.kind != Dataset::Kind::classification || ds.num_features() != rows * cols)
    throw ContractViolation("IDX output needs rows * cols features and class labels");
  auto img = open_output(images, std::ios::binary);
  write_be32(img, 0x00000803u);
  write_be32(img, static_cast<std::uint32_t>(ds.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t p = 0; p < rows * cols; ++p)
      img.put(static_cast<char>(std::lround(ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) * 255.0)));
  auto lab = open_output(labels, std::ios::binary);
  write_be32(lab, 0x00000801u);
  write_be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (int label : ds.labels) lab.put(static_cast<char>(label));
}

Dataset load_csv_regression(const std::filesystem::path& path, char delimiter, std::size_t target_column) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  while (columns == 0 && std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) columns = split_fields(line, delimiter).size();
  }
  if (columns == 0) throw DataValidationError(path.string() + ": empty file");
  if (target_column >= columns) throw ContractViolation(path.string() + ": target column beyond header width");

  std::vector<double> features;
  std::vector<double> targets;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, delimiter);
    if (fields.size() != columns)
      throw DataFormatError(where(path, line_no) + ": expected " + std::to_string(columns) + " fields, found " +
                            std::to_string(fields.size()));
    for (std::size_t c = 0; c < columns; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v))
        throw DataFormatError(where(path, line_no) + ": column " + std::to_string(c + 1) + " is not numeric");
      (c == target_column ? targets : features).push_back(v);
    }
  }
  if (targets.empty()) throw DataValidationError(path.string() + ": header present but no data rows");

  Dataset ds;
  ds.kind = Dataset::Kind::regression;
  const auto n = static_cast<Eigen::Index>(targets.size());
  ds.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      features.data(), n, static_cast<Eigen::Index>(columns - 1));
  ds.targets = Eigen::Map<Eigen::VectorXd>(targets.data(), n);
  return ds;
}

void write_csv_regression(const Dataset& ds, const std::filesystem::path& path, char delimiter,
                          std::size_t target_column, const std::vector<std::string>& header) {
  if (ds.kind != Dataset::Kind::regression || ds.targets.cols() != 1)
    throw ContractViolation("regression CSV output needs a single target column");
  const std::size_t columns = ds.num_features() + 1;
  if (header.size() != columns || target_column >= columns) throw ContractViolation("header width mismatch");
  auto out = open_output(path);
  out << std::setprecision(17);
  for (std::size_t c = 0; c < columns; ++c) out << (c ? std::string(1, delimiter) : "") << '"' << header[c] << '"';
  out << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    std::size_t f = 0;
    for (std::size_t c = 0; c < columns; ++c) {
      if (c) out << delimiter;
      if (c == target_column)
        out << ds.targets(static_cast<Eigen::Index>(r), 0);
      else
        out << ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f++));
    }
    out << '\n';
  }
}

Dataset load_wine_quality(const std::filesystem::path& path) { return load_csv_regression(path, ';', 11); }

Dataset load_casp(const std::filesystem::path& path) { return load_csv_regression(path, ',', 0); }

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ContractViolation("train fraction must lie in (0, 1)");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(ds.size()) * train_fraction));
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {ds.subset(train), ds.subset(test)};
}

void NormStats::apply(Matrix& features) const {
  if (features.cols() != mean.size()) throw ContractViolation("normalization width mismatch");
  for (Eigen::Index c = 0; c < features.cols(); ++c) {
    if (stddev[c] > 0.0)
      features.col(c) = (features.col(c).array() - mean[c]) / stddev[c];
    else
      features.col(c).setZero();
  }
}

NormStats compute_norm_stats(const Matrix& features) {
  NormStats stats;
  const double n = static_cast<double>(features.rows());
  stats.mean = features.colwise().mean().transpose();
  stats.stddev.resize(features.cols());
  for (Eigen::Index c = 0; c < features.cols(); ++c)
    stats.stddev[c] = std::sqrt((features.col(c).array() - stats.mean[c]).square().sum() / n);
  return stats;
}

NormalizedSplit z_normalize(const Dataset& train, const Dataset& test) {
  if (train.size() == 0) throw ContractViolation("cannot normalize an empty training set");
  NormalizedSplit out{train, test, compute_norm_stats(train.features)};
  out.stats.apply(out.train.features);
  out.stats.apply(out.test.features);
  return out;
}

BatchSampler::BatchSampler(const Dataset& data, std::size_t batch_size, std::uint64_t seed)
    : data_(data), batch_size_(batch_size), seed_(seed) {
  if (data.size() == 0) throw ContractViolation("batch sampler needs a non-empty dataset");
  if (batch_size == 0) throw ContractViolation("batch size must be positive");
  order_ = epoch_permutation(data.size(), seed_, epoch_);
}

std::vector<std::size_t> BatchSampler::epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(std::uint64_t{epoch} >> 32)};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::size_t BatchSampler::batches_per_epoch() const { return (data_.size() + batch_size_ - 1) / batch_size_; }

std::vector<std::size_t> BatchSampler::next_indices() {
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  std::vector<std::size_t> rows(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  if (cursor_ == order_.size()) {
    ++epoch_;
    cursor_ = 0;
    order_ = epoch_permutation(data_.size(), seed_, epoch_);
  }
  return rows;
}

MiniBatch BatchSampler::next_batch() { return data_.batch(next_indices()); }

}  // namespace nagqn
