#pragma once

// Batch experiments: configuration, sweeps over parameter grids and seeds,
// and median/IQR result tables.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hfy/data.hpp"
#include "hfy/dynamics.hpp"
#include "hfy/recall.hpp"

namespace hfy {

/// "softmax", "sparsemax", "entmax:1.5", "normmax:5", "ksubsets:4",
/// "seq:2:1e5", "spow:3", "exp", "identity", "identity-hebb".
SeparationSpec parse_separation(const std::string& text, double beta);
/// "identity", "l2norm:1", "layernorm:eta[:delta[:eps[:unbiased]]]", "tanh:2", "sign".
PostSpec parse_post(const std::string& text);

struct DatasetConfig {
  /// synthetic-sphere | synthetic-gaussian | synthetic-binary | synthetic-orthogonal |
  /// idx-images | flat-binary
  std::string kind = "synthetic-sphere";
  std::string path;
  double radius = 1.0;
  std::optional<double> min_separation;
  bool normalize = false;  // rescale every row to norm `radius`
  std::size_t limit = 0;   // file datasets: rows to load, 0 = all
};

struct ExperimentConfig {
  std::string experiment = "capacity";
  DatasetConfig dataset;
  std::vector<std::size_t> memory_sizes{32};
  std::size_t dim = 64;
  std::vector<double> betas{1.0};
  std::vector<std::string> separations{"entmax:2"};
  std::vector<std::string> posts{"identity"};
  std::vector<double> noise{0.0};
  double mask_fraction = 0.0;
  std::size_t queries = 100;
  std::size_t runs = 5;
  std::uint64_t seed = 0;
  std::size_t max_iter = 20;
  double tol = 1e-8;
  double threshold = 0.9;

  // recall experiments
  double lambda = 1e9;
  double tau = 0.001;
  double omega = 1.1;
  double t = 1e8;
  double alpha = 2.0;
  std::size_t inner_steps = 20;
  bool inner_beta = false;
  std::string cue = "mean";  // free recall: "mean" or "first"

  // basins
  double grid_lo = -1.0;
  double grid_hi = 1.0;
  std::size_t grid_resolution = 51;
  double label_tol = 0.01;
  std::vector<std::vector<double>> patterns;  // explicit memory, overrides the dataset

  std::size_t workers = 1;
  std::string output;
};

/// Field names accepted in the JSON document, in declaration order.
const std::vector<std::string>& config_fields();

/// Throws ConfigError for unknown fields, wrong types or invalid values.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);

struct ResultRow {
  std::string experiment;
  std::size_t n = 0;
  double beta = 0.0;
  std::string separation;
  std::string post;
  double noise = 0.0;
  std::string metric;
  double median = 0.0;
  double iqr = 0.0;
  std::size_t runs = 0;

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  /// Columns: experiment,n,beta,separation,post,noise,metric,median,iqr,runs
  void write_csv(std::ostream& out) const;
  static ResultTable read_csv(std::istream& in);
  const ResultRow* find(const std::string& separation, const std::string& metric) const;
};

/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);
double median_of(const std::vector<double>& values);
double iqr_of(const std::vector<double>& values);

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Callers write
/// results into slot i, so the merged output does not depend on scheduling.
/// The first exception thrown by any job is rethrown.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Success rate of recovering corrupted stored patterns (cosine > threshold)
/// over memory sizes, noise levels, betas, separations and posts.
ResultTable run_capacity(const ExperimentConfig& cfg);
/// Same protocol as run_capacity, reported under the "noise" experiment.
ResultTable run_noise(const ExperimentConfig& cfg);
/// Support-size histogram (percent) of the separation output at convergence.
ResultTable run_metastable(const ExperimentConfig& cfg);
/// Free recall ("csparsemax" or penalized "entmax:a"/"softmax"/"sparsemax")
/// or sequential recall, by cfg.experiment.
ResultTable run_recall(const ExperimentConfig& cfg);

struct BasinResult {
  std::string separation;
  std::string post;
  double beta = 0.0;
  BasinGrid grid;
};

std::vector<BasinResult> run_basins(const ExperimentConfig& cfg);
/// Columns: separation,post,beta,x,y,label,steps
void write_basins_csv(std::ostream& out, const std::vector<BasinResult>& results);

}  // namespace hfy
