#pragma once

#include "nagqn/objective.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nagqn {

/// Malformed input file. The message names the file and line when known.
class DataFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File parsed, but its contents break a dataset invariant.
class DataValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  enum class Kind { classification, regression };

  Matrix features;          // n x f
  std::vector<int> labels;  // classification only
  Matrix targets;           // regression only, n x t
  Kind kind = Kind::classification;
  std::size_t num_classes = 0;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t num_features() const { return static_cast<std::size_t>(features.cols()); }

  /// Throws DataValidationError on row-count or label-range violations.
  void validate() const;

  Dataset subset(const std::vector<std::size_t>& rows) const;
  MiniBatch batch(const std::vector<std::size_t>& rows) const;
  MiniBatch full_batch() const;
};

/// UCI optical digits: 64 integer pixels in [0, 16] then a label in [0, 9].
/// Features are scaled to [0, 1] by 1/16.
Dataset load_digits_csv(const std::filesystem::path& path);
void write_digits_csv(const Dataset& ds, const std::filesystem::path& path);

/// IDX image (magic 0x00000803) and label (0x00000801) files; pixels / 255.
Dataset load_idx_mnist(const std::filesystem::path& images, const std::filesystem::path& labels);
void write_idx_mnist(const Dataset& ds, std::size_t rows, std::size_t cols, const std::filesystem::path& images,
                     const std::filesystem::path& labels);

/// Delimited numeric table with a header row; one column is the target.
Dataset load_csv_regression(const std::filesystem::path& path, char delimiter, std::size_t target_column);
void write_csv_regression(const Dataset& ds, const std::filesystem::path& path, char delimiter,
                          std::size_t target_column, const std::vector<std::string>& header);

/// winequality-white.csv: ';'-separated, quality last.
Dataset load_wine_quality(const std::filesystem::path& path);
/// CASP.csv: ','-separated, RMSD first.
Dataset load_casp(const std::filesystem::path& path);

/// Seeded shuffle, then the first round(n * train_fraction) rows train.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double train_fraction, std::uint64_t seed);

struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // population (1/n)

  /// (x - mean) / stddev per column; zero-variance columns become 0.
  void apply(Matrix& features) const;
};

NormStats compute_norm_stats(const Matrix& features);

struct NormalizedSplit {
  Dataset train;
  Dataset test;
  NormStats stats;
};

/// Feature z-normalization with statistics taken from `train` only.
NormalizedSplit z_normalize(const Dataset& train, const Dataset& test);

/// Epoch-wise shuffled minibatches. Each epoch visits every row once; the
/// last batch of an epoch may be short. The permutation for an epoch
/// depends only on (seed, epoch).
class BatchSampler {
 public:
  BatchSampler(const Dataset& data, std::size_t batch_size, std::uint64_t seed);

  MiniBatch next_batch();
  /// Row indices of the batch next_batch() would return, and advances.
  std::vector<std::size_t> next_indices();

  std::size_t epoch() const { return epoch_; }
  std::size_t batches_per_epoch() const;
  /// True when the next call starts a new epoch.
  bool at_epoch_start() const { return cursor_ == 0; }

  static std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::size_t epoch);

 private:
  const Dataset& data_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
  std::vector<std::size_t> order_;
};

}  // namespace nagqn
