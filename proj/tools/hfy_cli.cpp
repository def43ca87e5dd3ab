// hfy: run associative-memory experiments from a JSON config.
//
//   hfy capacity --config cfg.json --output out.csv --seed 3 --betas 0.1,1
//
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hfy/errors.hpp"
#include "hfy/experiments.hpp"

namespace {

using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

const std::set<std::string> kListFields{"memory_sizes", "betas", "separations", "posts", "noise"};

std::string flag_name(std::string field) {
  std::replace(field.begin(), field.end(), '_', '-');
  return "--" + field;
}

// Values are read as JSON when they parse, otherwise as plain strings. List
// fields also accept comma-separated items.
json override_value(const std::string& field, const std::string& text) {
  auto scalar = [](const std::string& s) {
    try {
      return json::parse(s);
    } catch (const json::parse_error&) {
      return json(s);
    }
  };
  json v = scalar(text);
  if (kListFields.count(field) && !v.is_array()) {
    json arr = json::array();
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ',')) arr.push_back(scalar(item));
    v = arr;
  }
  return v;
}

json read_document(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw hfy::ConfigError("cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw hfy::ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

template <class Write>
void emit(const std::string& path, Write&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw hfy::ConfigError("cannot write output file " + path);
  write(out);
}

void run(const std::string& experiment, const std::string& config_path,
         const std::map<std::string, std::string>& overrides, const std::string& trace_path) {
  json doc = read_document(config_path);
  if (!doc.is_object()) throw hfy::ConfigError("config must be a JSON object");
  if (doc.contains("experiment") && doc["experiment"] != experiment)
    throw hfy::ConfigError("config declares experiment '" + doc["experiment"].dump() + "' but the subcommand is '" +
                           experiment + "'");
  doc["experiment"] = experiment;
  for (const auto& [field, text] : overrides) doc[field] = override_value(field, text);
  const hfy::ExperimentConfig cfg = hfy::parse_config(doc);

  if (experiment == "basins") {
    const auto results = hfy::run_basins(cfg);
    emit(cfg.output, [&](std::ostream& out) { hfy::write_basins_csv(out, results); });
    return;
  }
  hfy::ResultTable table;
  if (experiment == "capacity") table = hfy::run_capacity(cfg);
  else if (experiment == "noise") table = hfy::run_noise(cfg);
  else if (experiment == "metastable") table = hfy::run_metastable(cfg);
  else table = hfy::run_recall(cfg);
  emit(cfg.output, [&](std::ostream& out) { table.write_csv(out); });

  if (!trace_path.empty()) {
    // Trace of the first memory size, beta and method at the base seed.
    hfy::ExperimentConfig one = cfg;
    one.memory_sizes.resize(1);
    one.betas.resize(1);
    one.separations.resize(1);
    const std::string& kind = one.dataset.kind;
    if (kind == "idx-images" || kind == "flat-binary")
      throw hfy::ConfigError("--trace needs a synthetic dataset");
    hfy::SynthSpec s;
    s.kind = kind == "synthetic-gaussian" ? hfy::SynthSpec::Kind::gaussian
             : kind == "synthetic-binary" ? hfy::SynthSpec::Kind::binary
                                          : hfy::SynthSpec::Kind::sphere;
    s.n = one.memory_sizes.front();
    s.d = one.dim;
    s.radius = one.dataset.radius;
    s.min_separation = one.dataset.min_separation;
    s.seed = one.seed;
    const hfy::PatternMemory mem = one.dataset.kind == "synthetic-orthogonal"
                                       ? hfy::orthogonal_patterns(s.n, s.d, s.radius, s.seed)
                                       : hfy::synth_patterns(s);
    hfy::RecallConfig rc;
    rc.beta = one.betas.front();
    rc.inner_steps = one.inner_steps;
    rc.lambda = one.lambda;
    rc.tau = one.tau;
    rc.omega = one.omega;
    rc.t = one.t;
    rc.alpha = one.alpha;
    rc.inner_beta = one.inner_beta;
    rc.match_threshold = one.threshold;
    hfy::RecallTrace trace;
    if (experiment == "seq-recall") {
      trace = hfy::sequential_recall(mem, mem.row(0), rc);
    } else if (experiment == "free-recall") {
      const hfy::Vector cue = one.cue == "mean" ? mem.mean() : mem.row(0);
      const std::string& method = one.separations.front();
      if (method == "csparsemax") {
        trace = hfy::free_recall_constrained(mem, cue, rc);
      } else {
        const auto sep = hfy::parse_separation(method, rc.beta);
        rc.alpha = sep.kind == hfy::SeparationSpec::Kind::softmax ? 1.0 : sep.param;
        trace = hfy::free_recall_penalized(mem, cue, rc);
      }
    } else {
      throw hfy::ConfigError("--trace is only available for free-recall and seq-recall");
    }
    emit(trace_path, [&](std::ostream& out) { hfy::write_recall_json(out, trace); });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hopfield-Fenchel-Young associative memory experiments"};
  app.require_subcommand(1);

  struct Sub {
    std::string config;
    std::string output;
    std::string trace;
    std::map<std::string, std::string> values;
  };
  std::map<std::string, Sub> subs;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"capacity", "retrieval success rate versus memory size"},
      {"noise", "retrieval success rate versus query noise"},
      {"metastable", "support-size census of converged queries"},
      {"basins", "attraction-basin labels on a 2-D grid"},
      {"free-recall", "free recall unique-memory ratio"},
      {"seq-recall", "sequential recall ratio and Levenshtein coefficient"}};

  for (const auto& [name, help] : commands) {
    Sub& s = subs[name];
    CLI::App* cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", s.config, "JSON config file");
    cmd->add_option("--output", s.values["output"], "output path (CSV); stdout when omitted");
    cmd->add_option("--seed", s.values["seed"], "base seed");
    if (name == "free-recall" || name == "seq-recall")
      cmd->add_option("--trace", s.trace, "write a JSON recall trace of the first cell");
    for (const auto& field : hfy::config_fields()) {
      if (field == "experiment" || field == "output" || field == "seed") continue;
      cmd->add_option(flag_name(field), s.values[field], "override config field " + field);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  for (auto& [name, s] : subs) {
    if (!app.got_subcommand(name)) continue;
    std::map<std::string, std::string> overrides;
    for (const auto& [field, text] : s.values)
      if (!text.empty()) overrides[field] = text;
    try {
      run(name, s.config, overrides, s.trace);
      return 0;
    } catch (const hfy::ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    } catch (const hfy::DomainError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfig;
    } catch (const hfy::FormatError& e) {
      std::cerr << "data error: " << e.what() << '\n';
      return kExitData;
    } catch (const hfy::CapacityError& e) {
      std::cerr << "data error: " << e.what() << '\n';
      return kExitData;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 0;
}
