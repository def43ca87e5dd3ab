#include "hfy/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "hfy/errors.hpp"

namespace hfy {
namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& context) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number in '" + context + "', got '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("expected a number in '" + context + "', got '" + s + "'");
  return v;
}

std::size_t to_count(const std::string& s, const std::string& context) {
  const double v = to_double(s, context);
  if (v < 0.0 || v != std::floor(v)) throw ConfigError("expected a count in '" + context + "', got '" + s + "'");
  return static_cast<std::size_t>(v);
}

const std::set<std::string> kExperiments{"capacity", "noise", "metastable", "basins", "free-recall", "seq-recall"};
const std::set<std::string> kDatasets{"synthetic-sphere", "synthetic-gaussian", "synthetic-binary",
                                      "synthetic-orthogonal", "idx-images", "flat-binary"};

template <class T>
T field(const json& doc, const std::string& name) {
  try {
    return doc.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config field '" + name + "': " + e.what());
  }
}

DatasetConfig parse_dataset(const json& doc) {
  DatasetConfig d;
  if (doc.is_string()) {
    d.kind = doc.get<std::string>();
  } else if (doc.is_object()) {
    for (const auto& [key, value] : doc.items()) {
      if (key == "kind")
        d.kind = field<std::string>(value, "dataset.kind");
      else if (key == "path")
        d.path = field<std::string>(value, "dataset.path");
      else if (key == "radius")
        d.radius = field<double>(value, "dataset.radius");
      else if (key == "min_separation")
        d.min_separation = value.is_null() ? std::nullopt : std::optional<double>(field<double>(value, key));
      else if (key == "normalize")
        d.normalize = field<bool>(value, "dataset.normalize");
      else if (key == "limit")
        d.limit = field<std::size_t>(value, "dataset.limit");
      else
        throw ConfigError("unknown dataset field '" + key + "'");
    }
  } else {
    throw ConfigError("config field 'dataset' must be a string or an object");
  }
  if (!kDatasets.count(d.kind)) throw ConfigError("unknown dataset kind '" + d.kind + "'");
  if ((d.kind == "idx-images" || d.kind == "flat-binary") && d.path.empty())
    throw ConfigError("dataset kind '" + d.kind + "' needs a path");
  if (!(d.radius > 0.0)) throw ConfigError("dataset.radius must be positive");
  return d;
}

void validate(const ExperimentConfig& c) {
  if (!kExperiments.count(c.experiment)) throw ConfigError("unknown experiment '" + c.experiment + "'");
  if (c.memory_sizes.empty() || c.betas.empty() || c.separations.empty() || c.posts.empty() || c.noise.empty())
    throw ConfigError("memory_sizes, betas, separations, posts and noise must be nonempty");
  for (auto n : c.memory_sizes)
    if (n < 1) throw ConfigError("memory sizes must be >= 1");
  for (double s : c.noise)
    if (!(s >= 0.0)) throw ConfigError("noise levels must be >= 0");
  if (c.dim < 1) throw ConfigError("dim must be >= 1");
  if (c.runs < 1) throw ConfigError("runs must be >= 1");
  if (c.max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (c.workers < 1) throw ConfigError("workers must be >= 1");
  if (!(c.mask_fraction >= 0.0 && c.mask_fraction <= 1.0)) throw ConfigError("mask_fraction must be in [0, 1]");
  if (c.cue != "mean" && c.cue != "first") throw ConfigError("cue must be 'mean' or 'first'");
  try {
    for (double b : c.betas)
      for (const auto& s : c.separations)
        if (!(c.experiment == "free-recall" && s == "csparsemax")) parse_separation(s, b);
    for (const auto& p : c.posts) parse_post(p);
    if (c.experiment == "free-recall" || c.experiment == "seq-recall") {
      if (!(c.tau > 0.0 && c.tau <= 1.0)) throw ConfigError("tau must be in (0, 1]");
      if (!(c.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
      if (!(c.omega >= 1.0)) throw ConfigError("omega must be >= 1");
      if (!(c.alpha >= 1.0)) throw ConfigError("alpha must be >= 1");
    }
    if (c.experiment == "basins") {
      if (!(c.grid_hi > c.grid_lo) || c.grid_resolution < 2) throw ConfigError("invalid basin grid");
      if (c.patterns.empty() && c.dim != 2 && c.dim != 3) throw ConfigError("basins need dim 2 or 3");
    }
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!c.patterns.empty()) {
    const auto d = c.patterns.front().size();
    for (const auto& row : c.patterns)
      if (row.size() != d || d == 0) throw ConfigError("patterns must be a nonempty rectangular matrix");
  }
}

// ---- data sources -------------------------------------------------------

Matrix normalized_rows(Matrix x, double radius) {
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double n = x.row(i).norm();
    if (n > 0.0) x.row(i) *= radius / n;
  }
  return x;
}

Matrix load_pool(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  if (d.kind == "idx-images") return load_idx_images(d.path, d.limit).patterns();
  if (d.kind == "flat-binary") {
    Matrix x = load_flat_binary(d.path).patterns();
    if (d.limit > 0 && static_cast<Eigen::Index>(d.limit) < x.rows()) x.conservativeResize(static_cast<Eigen::Index>(d.limit), Eigen::NoChange);
    return x;
  }
  return {};
}

struct Draw {
  Matrix memory;
  Matrix heldout;
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Draw sample(const ExperimentConfig& cfg, const Matrix& pool, std::size_t n, std::size_t n_heldout,
            std::uint64_t seed) {
  const auto& d = cfg.dataset;
  Draw out;
  if (pool.size() > 0) {
    const auto need = n + n_heldout;
    if (need > static_cast<std::size_t>(pool.rows()))
      throw CapacityError("dataset has " + std::to_string(pool.rows()) + " rows, experiment needs " +
                          std::to_string(need));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(pool.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    out.memory.resize(static_cast<Eigen::Index>(n), pool.cols());
    out.heldout.resize(static_cast<Eigen::Index>(n_heldout), pool.cols());
    for (std::size_t i = 0; i < n; ++i) out.memory.row(static_cast<Eigen::Index>(i)) = pool.row(idx[i]);
    for (std::size_t i = 0; i < n_heldout; ++i)
      out.heldout.row(static_cast<Eigen::Index>(i)) = pool.row(idx[n + i]);
  } else {
    SynthSpec s;
    s.kind = d.kind == "synthetic-gaussian" ? SynthSpec::Kind::gaussian
             : d.kind == "synthetic-binary" ? SynthSpec::Kind::binary
                                            : SynthSpec::Kind::sphere;
    s.n = n;
    s.d = cfg.dim;
    s.radius = d.radius;
    s.seed = seed;
    if (d.kind == "synthetic-orthogonal") {
      out.memory = orthogonal_patterns(n, cfg.dim, d.radius, seed).patterns();
    } else {
      s.min_separation = d.min_separation;
      out.memory = synth_patterns(s).patterns();
    }
    if (n_heldout > 0) {
      s.n = n_heldout;
      s.min_separation.reset();
      s.seed = mix(seed, 0xA5A5);
      out.heldout = synth_patterns(s).patterns();
    }
  }
  if (d.normalize) {
    out.memory = normalized_rows(std::move(out.memory), d.radius);
    if (out.heldout.size() > 0) out.heldout = normalized_rows(std::move(out.heldout), d.radius);
  }
  return out;
}

Matrix explicit_patterns(const ExperimentConfig& cfg) {
  Matrix x(static_cast<Eigen::Index>(cfg.patterns.size()), static_cast<Eigen::Index>(cfg.patterns.front().size()));
  for (std::size_t i = 0; i < cfg.patterns.size(); ++i)
    for (std::size_t j = 0; j < cfg.patterns[i].size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cfg.patterns[i][j];
  return x;
}

double cosine(const Vector& a, const Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  return na == 0.0 || nb == 0.0 ? 0.0 : a.dot(b) / (na * nb);
}

// ---- sweep driver -------------------------------------------------------

struct Cell {
  std::size_t n = 0;
  double beta = 0.0;
  std::string separation;
  std::string post;
  double noise = 0.0;
};

template <class Fn>
ResultTable sweep(const ExperimentConfig& cfg, const std::string& experiment, const std::vector<Cell>& cells,
                  const std::vector<std::string>& metrics, Fn&& job) {
  const std::size_t jobs = cells.size() * cfg.runs;
  std::vector<std::vector<double>> results(jobs);
  parallel_for(jobs, cfg.workers, [&](std::size_t j) {
    const Cell& cell = cells[j / cfg.runs];
    const std::uint64_t run_seed = cfg.seed + j % cfg.runs;
    results[j] = job(cell, run_seed);
  });
  ResultTable table;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      std::vector<double> values;
      for (std::size_t r = 0; r < cfg.runs; ++r) values.push_back(results[c * cfg.runs + r][m]);
      ResultRow row;
      row.experiment = experiment;
      row.n = cells[c].n;
      row.beta = cells[c].beta;
      row.separation = cells[c].separation;
      row.post = cells[c].post;
      row.noise = cells[c].noise;
      row.metric = metrics[m];
      row.median = median_of(values);
      row.iqr = iqr_of(values);
      row.runs = values.size();
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

ResultTable capacity_like(const ExperimentConfig& cfg, const std::string& experiment) {
  validate(cfg);
  const Matrix pool = load_pool(cfg);
  std::vector<Cell> cells;
  std::vector<std::pair<std::string, std::string>> texts;
  for (auto n : cfg.memory_sizes)
    for (double sigma : cfg.noise)
      for (double beta : cfg.betas)
        for (const auto& s : cfg.separations)
          for (const auto& p : cfg.posts) {
            cells.push_back({n, beta, parse_separation(s, beta).describe(), parse_post(p).describe(), sigma});
            texts.emplace_back(s, p);
          }

  return sweep(cfg, experiment, cells, {"success_rate"}, [&](const Cell& cell, std::uint64_t seed) {
    const std::size_t ci = static_cast<std::size_t>(&cell - cells.data());
    const SeparationSpec sep = parse_separation(texts[ci].first, cell.beta);
    const PostSpec post = parse_post(texts[ci].second);
    const std::uint64_t mem_seed = mix(seed, cell.n);
    const PatternMemory mem(sample(cfg, pool, cell.n, 0, mem_seed).memory);
    std::vector<std::size_t> targets(mem.size());
    std::iota(targets.begin(), targets.end(), std::size_t{0});
    std::mt19937_64 rng(mix(mem_seed, 1));
    std::shuffle(targets.begin(), targets.end(), rng);
    targets.resize(std::min(cfg.queries, mem.size()));
    IterateOptions io;
    io.max_iter = cfg.max_iter;
    io.tol = cfg.tol;
    io.keep_queries = false;
    std::size_t ok = 0;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const Vector x = mem.row(targets[t]);
      Vector q0 = corrupt(x, {CorruptSpec::Mode::gaussian, cell.noise, 0.0}, mix(mem_seed, 100 + t));
      if (cfg.mask_fraction > 0.0) q0 = corrupt(q0, {CorruptSpec::Mode::mask, 0.0, cfg.mask_fraction}, 0);
      const auto trace = iterate(q0, mem, sep, post, io);
      if (cosine(trace.final_query(), x) > cfg.threshold) ++ok;
    }
    return std::vector<double>{targets.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(targets.size())};
  });
}

}  // namespace

SeparationSpec parse_separation(const std::string& text, double beta) {
  const auto parts = split(text, ':');
  const std::string& kind = parts.empty() ? text : parts[0];
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (parts.size() - 1 < lo || parts.size() - 1 > hi)
      throw ConfigError("separation '" + text + "' has the wrong number of parameters");
  };
  try {
    if (kind == "identity") {
      arity(0, 0);
      return SeparationSpec::identity(false);
    }
    if (kind == "identity-hebb") {
      arity(0, 0);
      return SeparationSpec::identity(true);
    }
    if (kind == "spow") {
      arity(1, 1);
      return SeparationSpec::spow(to_double(parts[1], text));
    }
    if (kind == "exp") {
      arity(0, 0);
      return SeparationSpec::exp(beta);
    }
    if (kind == "softmax") {
      arity(0, 0);
      return SeparationSpec::softmax(beta);
    }
    if (kind == "sparsemax") {
      arity(0, 0);
      return SeparationSpec::sparsemax(beta);
    }
    if (kind == "entmax") {
      arity(1, 1);
      return SeparationSpec::entmax(to_double(parts[1], text), beta);
    }
    if (kind == "normmax") {
      arity(1, 1);
      return SeparationSpec::normmax(to_double(parts[1], text), beta);
    }
    if (kind == "ksubsets") {
      arity(1, 1);
      return SeparationSpec::ksubsets(to_count(parts[1], text), beta);
    }
    if (kind == "seq") {
      arity(2, 2);
      return SeparationSpec::seq_ksubsets(to_count(parts[1], text), to_double(parts[2], text), beta);
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("separation '") + text + "': " + e.what());
  }
  throw ConfigError("unknown separation '" + text + "'");
}

PostSpec parse_post(const std::string& text) {
  const auto parts = split(text, ':');
  const std::string& kind = parts.empty() ? text : parts[0];
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (parts.size() - 1 < lo || parts.size() - 1 > hi)
      throw ConfigError("post-transformation '" + text + "' has the wrong number of parameters");
  };
  try {
    if (kind == "identity") {
      arity(0, 0);
      return PostSpec::identity();
    }
    if (kind == "l2norm") {
      arity(0, 1);
      return PostSpec::l2norm(parts.size() > 1 ? to_double(parts[1], text) : 1.0);
    }
    if (kind == "layernorm") {
      arity(0, 4);
      const double eta = parts.size() > 1 ? to_double(parts[1], text) : 1.0;
      const double delta = parts.size() > 2 ? to_double(parts[2], text) : 0.0;
      const double eps = parts.size() > 3 ? to_double(parts[3], text) : 1e-8;
      bool unbiased = false;
      if (parts.size() > 4) {
        if (parts[4] != "unbiased" && parts[4] != "biased")
          throw ConfigError("layernorm variance flag must be 'unbiased' or 'biased'");
        unbiased = parts[4] == "unbiased";
      }
      return PostSpec::layernorm(eta, delta, eps, unbiased);
    }
    if (kind == "tanh") {
      arity(0, 1);
      return PostSpec::tanh(parts.size() > 1 ? to_double(parts[1], text) : 1.0);
    }
    if (kind == "sign") {
      arity(0, 0);
      return PostSpec::sign();
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("post-transformation '") + text + "': " + e.what());
  }
  throw ConfigError("unknown post-transformation '" + text + "'");
}

const std::vector<std::string>& config_fields() {
  static const std::vector<std::string> fields{
      "experiment", "dataset",     "memory_sizes", "dim",       "betas",      "separations",
      "posts",      "noise",       "mask_fraction", "queries",  "runs",       "seed",
      "max_iter",   "tol",         "threshold",    "lambda",    "tau",        "omega",
      "t",          "alpha",       "inner_steps",  "inner_beta", "cue",       "grid_lo",
      "grid_hi",    "grid_resolution", "label_tol", "patterns", "workers",    "output"};
  return fields;
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : doc.items()) {
    if (key == "experiment") c.experiment = field<std::string>(v, key);
    else if (key == "dataset") c.dataset = parse_dataset(v);
    else if (key == "memory_sizes") c.memory_sizes = field<std::vector<std::size_t>>(v, key);
    else if (key == "dim") c.dim = field<std::size_t>(v, key);
    else if (key == "betas") c.betas = field<std::vector<double>>(v, key);
    else if (key == "separations") c.separations = field<std::vector<std::string>>(v, key);
    else if (key == "posts") c.posts = field<std::vector<std::string>>(v, key);
    else if (key == "noise") c.noise = field<std::vector<double>>(v, key);
    else if (key == "mask_fraction") c.mask_fraction = field<double>(v, key);
    else if (key == "queries") c.queries = field<std::size_t>(v, key);
    else if (key == "runs") c.runs = field<std::size_t>(v, key);
    else if (key == "seed") c.seed = field<std::uint64_t>(v, key);
    else if (key == "max_iter") c.max_iter = field<std::size_t>(v, key);
    else if (key == "tol") c.tol = field<double>(v, key);
    else if (key == "threshold") c.threshold = field<double>(v, key);
    else if (key == "lambda") c.lambda = field<double>(v, key);
    else if (key == "tau") c.tau = field<double>(v, key);
    else if (key == "omega") c.omega = field<double>(v, key);
    else if (key == "t") c.t = field<double>(v, key);
    else if (key == "alpha") c.alpha = field<double>(v, key);
    else if (key == "inner_steps") c.inner_steps = field<std::size_t>(v, key);
    else if (key == "inner_beta") c.inner_beta = field<bool>(v, key);
    else if (key == "cue") c.cue = field<std::string>(v, key);
    else if (key == "grid_lo") c.grid_lo = field<double>(v, key);
    else if (key == "grid_hi") c.grid_hi = field<double>(v, key);
    else if (key == "grid_resolution") c.grid_resolution = field<std::size_t>(v, key);
    else if (key == "label_tol") c.label_tol = field<double>(v, key);
    else if (key == "patterns") c.patterns = field<std::vector<std::vector<double>>>(v, key);
    else if (key == "workers") c.workers = field<std::size_t>(v, key);
    else if (key == "output") c.output = field<std::string>(v, key);
    else throw ConfigError("unknown config field '" + key + "'");
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

namespace {
constexpr const char* kResultHeader = "experiment,n,beta,separation,post,noise,metric,median,iqr,runs";
}

void ResultTable::write_csv(std::ostream& out) const {
  out << kResultHeader << '\n';
  std::ostringstream os;
  os.precision(17);
  for (const auto& r : rows) {
    os.str("");
    os << r.experiment << ',' << r.n << ',' << r.beta << ',' << r.separation << ',' << r.post << ',' << r.noise
       << ',' << r.metric << ',' << r.median << ',' << r.iqr << ',' << r.runs << '\n';
    out << os.str();
  }
}

ResultTable ResultTable::read_csv(std::istream& in) {
  ResultTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty result table", 0);
  if (line != kResultHeader) throw FormatError("unexpected result table header", 0);
  std::size_t offset = line.size() + 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) throw FormatError("result row has " + std::to_string(f.size()) + " fields", offset);
    try {
      ResultRow r;
      r.experiment = f[0];
      r.n = std::stoull(f[1]);
      r.beta = std::stod(f[2]);
      r.separation = f[3];
      r.post = f[4];
      r.noise = std::stod(f[5]);
      r.metric = f[6];
      r.median = std::stod(f[7]);
      r.iqr = std::stod(f[8]);
      r.runs = std::stoull(f[9]);
      t.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("unparsable number in result row", offset);
    }
    offset += line.size() + 1;
  }
  return t;
}

const ResultRow* ResultTable::find(const std::string& separation, const std::string& metric) const {
  for (const auto& r : rows)
    if (r.separation == separation && r.metric == metric) return &r;
  return nullptr;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median_of(const std::vector<double>& values) { return quantile(values, 0.5); }

double iqr_of(const std::vector<double>& values) { return quantile(values, 0.75) - quantile(values, 0.25); }

ResultTable run_capacity(const ExperimentConfig& cfg) { return capacity_like(cfg, "capacity"); }

ResultTable run_noise(const ExperimentConfig& cfg) { return capacity_like(cfg, "noise"); }

ResultTable run_metastable(const ExperimentConfig& cfg) {
  validate(cfg);
  const Matrix pool = load_pool(cfg);
  std::vector<Cell> cells;
  std::vector<std::pair<std::string, std::string>> texts;
  for (auto n : cfg.memory_sizes)
    for (double beta : cfg.betas)
      for (const auto& s : cfg.separations)
        for (const auto& p : cfg.posts) {
          cells.push_back({n, beta, parse_separation(s, beta).describe(), parse_post(p).describe(), 0.0});
          texts.emplace_back(s, p);
        }
  std::vector<std::string> metrics;
  for (int s = 1; s <= 10; ++s) metrics.push_back("support_" + std::to_string(s) + "_pct");
  metrics.push_back("support_gt10_pct");

  return sweep(cfg, "metastable", cells, metrics, [&](const Cell& cell, std::uint64_t seed) {
    const std::size_t ci = static_cast<std::size_t>(&cell - cells.data());
    const SeparationSpec sep = parse_separation(texts[ci].first, cell.beta);
    const PostSpec post = parse_post(texts[ci].second);
    const Draw draw = sample(cfg, pool, cell.n, cfg.queries, mix(seed, cell.n));
    const PatternMemory mem(draw.memory);
    IterateOptions io;
    io.max_iter = cfg.max_iter;
    io.tol = cfg.tol;
    io.keep_queries = false;
    std::vector<double> hist(11, 0.0);
    const auto nq = static_cast<std::size_t>(draw.heldout.rows());
    for (std::size_t i = 0; i < nq; ++i) {
      const Vector q0 = draw.heldout.row(static_cast<Eigen::Index>(i)).transpose();
      const auto trace = iterate(q0, mem, sep, post, io);
      const std::size_t size = support_size(sep, separation_apply(sep, mem.scores(trace.final_query())));
      hist[std::min<std::size_t>(std::max<std::size_t>(size, 1), 11) - 1] += 1.0;
    }
    for (double& h : hist) h *= nq == 0 ? 0.0 : 100.0 / static_cast<double>(nq);
    return hist;
  });
}

ResultTable run_recall(const ExperimentConfig& cfg) {
  validate(cfg);
  const Matrix pool = load_pool(cfg);
  const bool sequential = cfg.experiment == "seq-recall";
  if (!sequential && cfg.experiment != "free-recall")
    throw ConfigError("run_recall needs experiment free-recall or seq-recall");
  std::vector<Cell> cells;
  for (auto n : cfg.memory_sizes)
    for (double beta : cfg.betas) {
      if (sequential) {
        cells.push_back({n, beta, SeparationSpec::seq_ksubsets(2, cfg.t, beta).describe(), "identity", 0.0});
        continue;
      }
      for (const auto& s : cfg.separations)
        cells.push_back({n, beta, s == "csparsemax" ? s : parse_separation(s, beta).describe(), "identity", 0.0});
    }
  const std::vector<std::string> metrics = sequential ? std::vector<std::string>{"unique_ratio", "levenshtein"}
                                                      : std::vector<std::string>{"unique_ratio"};

  return sweep(cfg, cfg.experiment, cells, metrics, [&](const Cell& cell, std::uint64_t seed) {
    const PatternMemory mem(sample(cfg, pool, cell.n, 0, mix(seed, cell.n)).memory);
    RecallConfig rc;
    rc.beta = cell.beta;
    rc.inner_steps = cfg.inner_steps;
    rc.lambda = cfg.lambda;
    rc.tau = cfg.tau;
    rc.omega = cfg.omega;
    rc.t = cfg.t;
    rc.alpha = cfg.alpha;
    rc.inner_beta = cfg.inner_beta;
    rc.match_threshold = cfg.threshold;
    if (sequential) {
      const auto trace = sequential_recall(mem, mem.row(0), rc);
      const auto seq = trace.matched_sequence();
      return std::vector<double>{unique_memory_ratio(seq, mem.size()),
                                 mem.size() > 1 ? levenshtein_coefficient(seq, successor_chain(mem.size())) : 1.0};
    }
    const Vector cue = cfg.cue == "mean" ? mem.mean() : mem.row(0);
    RecallTrace trace;
    if (cell.separation == "csparsemax") {
      trace = free_recall_constrained(mem, cue, rc);
    } else {
      const SeparationSpec sep = parse_separation(cell.separation, cell.beta);
      rc.alpha = sep.kind == SeparationSpec::Kind::softmax ? 1.0 : sep.param;
      if (sep.kind != SeparationSpec::Kind::softmax && sep.kind != SeparationSpec::Kind::entmax)
        throw ConfigError("free recall supports csparsemax, softmax, sparsemax and entmax:a");
      trace = free_recall_penalized(mem, cue, rc);
    }
    return std::vector<double>{trace.steps.empty() ? 0.0 : unique_memory_ratio(trace, mem.size())};
  });
}

std::vector<BasinResult> run_basins(const ExperimentConfig& cfg) {
  validate(cfg);
  Matrix x;
  if (!cfg.patterns.empty()) {
    x = explicit_patterns(cfg);
  } else {
    x = sample(cfg, load_pool(cfg), cfg.memory_sizes.front(), 0, mix(cfg.seed, cfg.memory_sizes.front())).memory;
  }
  const PatternMemory mem(std::move(x));
  std::vector<BasinResult> out;
  std::vector<std::pair<std::string, std::string>> texts;
  for (double beta : cfg.betas)
    for (const auto& s : cfg.separations)
      for (const auto& p : cfg.posts) {
        out.push_back({parse_separation(s, beta).describe(), parse_post(p).describe(), beta, {}});
        texts.emplace_back(s, p);
      }
  GridSpec grid;
  grid.lo = cfg.grid_lo;
  grid.hi = cfg.grid_hi;
  grid.resolution = cfg.grid_resolution;
  grid.label_tol = cfg.label_tol;
  grid.iterate.max_iter = std::max<std::size_t>(cfg.max_iter, 1);
  grid.iterate.tol = cfg.tol;
  parallel_for(out.size(), cfg.workers, [&](std::size_t i) {
    out[i].grid = basin_grid(mem, parse_separation(texts[i].first, out[i].beta), parse_post(texts[i].second), grid);
  });
  return out;
}

void write_basins_csv(std::ostream& out, const std::vector<BasinResult>& results) {
  out << "separation,post,beta,x,y,label,steps\n";
  std::ostringstream os;
  os.precision(17);
  for (const auto& r : results) {
    const auto& g = r.grid;
    for (std::size_t iy = 0; iy < g.resolution; ++iy)
      for (std::size_t ix = 0; ix < g.resolution; ++ix) {
        const std::size_t c = iy * g.resolution + ix;
        os.str("");
        os << r.separation << ',' << r.post << ',' << r.beta << ',' << g.axis[ix] << ',' << g.axis[iy] << ','
           << g.labels[c] << ',' << g.steps[c] << '\n';
        out << os.str();
      }
  }
}

}  // namespace hfy
