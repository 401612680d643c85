// SPDX-License-Identifier: Apache-2.0
//
// relevance: simulate / tune / serve / replay / eval-report.
//
// Every long flag can also come from the environment (RLV_<FLAG>, dashes
// become underscores) or from a flat `key = value` config file given with
// --config or RLV_CONFIG. Flags win over the environment, which wins over
// the file.
//
// Exit codes: 0 ok, 1 configuration error, 2 data error, 3 runtime failure.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <pthread.h>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relevance/embeddings.hpp"
#include "relevance/hyperparameters.hpp"
#include "relevance/models.hpp"
#include "relevance/server.hpp"
#include "relevance/simulation.hpp"
#include "relevance/synthetic.hpp"
#include "relevance/trainer.hpp"

namespace {

using namespace relevance;
using nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string env_name(const std::string& flag) {
  std::string out = "RLV_";
  for (char c : flag) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

// --- config file -----------------------------------------------------------

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    auto t = csv::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';' || t[0] == '[') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(n) + ": expected key = value");
    auto key = csv::trim(t.substr(0, eq));
    auto value = csv::trim(t.substr(eq + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front())
      value = value.substr(1, value.size() - 2);
    kv[key] = value;
  }
  return kv;
}

/// Appends config-file settings that neither the command line nor the
/// environment provides.
std::vector<std::string> merge_config(const CLI::App& app, std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty())
    if (const char* e = std::getenv("RLV_CONFIG")) config_path = e;
  if (config_path.empty()) return args;

  const CLI::App* sub = nullptr;
  std::set<std::string> known;
  for (const auto* s : app.get_subcommands([](const CLI::App*) { return true; })) {
    for (const auto* o : s->get_options()) known.insert(o->get_single_name());
    for (std::size_t i = 1; i < args.size() && !sub; ++i) {
      if (args[i] == "--config") ++i;
      else if (args[i] == s->get_name()) sub = s;
    }
  }
  for (const auto& [key, value] : read_config_file(config_path)) {
    if (!known.count(key)) throw ConfigError(config_path + ": unknown setting '" + key + "'");
    if (!sub) continue;
    const CLI::Option* opt = nullptr;
    for (const auto* o : sub->get_options())
      if (o->get_single_name() == key) opt = o;
    if (!opt) continue;  // belongs to another subcommand
    const std::string flag = "--" + key;
    bool given = false;
    for (const auto& a : args) given |= a == flag || a.rfind(flag + "=", 0) == 0;
    if (given || std::getenv(env_name(key).c_str())) continue;
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1" || value == "on") args.push_back(flag);
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

// --- shared pieces ------------------------------------------------------------

struct DataArgs {
  std::string dataset;
  std::string format = "auto";
  std::string mapping;
  std::string embeddings;
  std::size_t synthetic = 0;
};

void add_data_flags(CLI::App* cmd, DataArgs& d, bool need_embeddings = true) {
  cmd->add_option("--dataset", d.dataset, "Labeled CSV corpus");
  cmd->add_option("--format", d.format, "Corpus layout")->check(CLI::IsMember({"auto", "figure-eight", "crisislex"}));
  cmd->add_option("--mapping", d.mapping, "JSON file with CrisisLex column names and label mapping");
  if (need_embeddings) cmd->add_option("--embeddings", d.embeddings, "word2vec binary, or .txt/.vec text embeddings");
  cmd->add_option("--synthetic", d.synthetic, "Use a generated N-example marker-token corpus instead of --dataset");
}

Corpus load_corpus(const DataArgs& d, std::uint64_t seed) {
  if (d.synthetic > 0) {
    SyntheticSpec s;
    s.examples = d.synthetic;
    s.seed = seed;
    return synthetic_corpus(s);
  }
  if (d.dataset.empty()) throw ConfigError("--dataset (or --synthetic) is required");
  std::string format = d.format;
  if (format == "auto") {
    std::ifstream in(d.dataset);
    if (!in) throw DataError(d.dataset, 0, "cannot open file");
    std::string header;
    std::getline(in, header);
    format = header.find("choose_one") != std::string::npos ? "figure-eight" : "crisislex";
  }
  if (format == "figure-eight") return load_figure_eight(d.dataset);
  CrisisLexMapping mapping;
  if (!d.mapping.empty()) {
    std::ifstream in(d.mapping);
    if (!in) throw ConfigError("cannot read mapping file " + d.mapping);
    try {
      mapping = CrisisLexMapping::from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw ConfigError(d.mapping + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(d.mapping + ": " + e.what());
    }
  }
  return load_crisislex(d.dataset, mapping);
}

EmbeddingTable load_table(const DataArgs& d, std::uint64_t seed) {
  if (d.synthetic > 0) {
    SyntheticSpec s;
    s.seed = seed;
    return synthetic_embeddings(s);
  }
  if (d.embeddings.empty()) throw ConfigError("--embeddings is required");
  return load_embeddings(d.embeddings);
}

struct ModelArgs {
  std::string model = "cnn";
  std::string hyperparameters;
  std::vector<std::string> hp;
};

void add_model_flags(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--model", m.model, "cnn, lstm or rnn (tuned defaults for that architecture)");
  cmd->add_option("--hyperparameters", m.hyperparameters, "JSON file of hyperparameter overrides");
  cmd->add_option("--hp", m.hp, "Override one hyperparameter, KEY=VALUE (repeatable)");
}

Hyperparameters resolve_hyperparameters(const ModelArgs& m, std::size_t dim, std::uint64_t seed) {
  try {
    auto type = parse_model_type(m.model);
    if (!type) throw ConfigError("unknown --model '" + m.model + "'");
    Hyperparameters hp = default_hyperparameters(*type);
    hp.embedding_dim = dim;
    hp.seed = seed;
    if (!m.hyperparameters.empty()) {
      std::ifstream in(m.hyperparameters);
      if (!in) throw ConfigError("cannot read " + m.hyperparameters);
      hp = apply_overrides(hp, json::parse(in));
    }
    json overrides = json::object();
    for (const auto& kv : m.hp) {
      auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--hp expects KEY=VALUE, got '" + kv + "'");
      const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
      overrides[key] = json::accept(value) ? json::parse(value) : json(value);
    }
    hp = apply_overrides(hp, overrides);
    if (hp.embedding_dim != dim)
      throw ConfigError("embedding_dim " + std::to_string(hp.embedding_dim) + " does not match the embeddings (" +
                        std::to_string(dim) + ")");
    hp.validate();
    return hp;
  } catch (const HyperparameterError& e) {
    throw ConfigError(e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("hyperparameter file: ") + e.what());
  }
}

SplitSpec resolve_split(const std::string& text, std::uint64_t seed) {
  try {
    return parse_split(text, seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

SplitResult do_split(const Corpus& c, const SplitSpec& spec) {
  try {
    return split(c, spec);
  } catch (const std::invalid_argument& e) {
    throw DataError(c.name, 0, e.what());
  }
}

std::optional<ScoreMode> parse_score_mode(const std::string& s) {
  if (s == "macro") return ScoreMode::Macro;
  if (s == "binary-relevant" || s == "binary") return ScoreMode::BinaryRelevant;
  return std::nullopt;
}

void write_output(const std::string& path, const std::function<void(std::ostream&)>& emit) {
  if (path.empty() || path == "-") {
    emit(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  emit(out);
  if (!out.flush()) throw RuntimeFailure("I/O error writing " + path);
}

std::string fmt(double v) { return detail::fmt_fixed(v, 4); }

void print_summary(std::ostream& os, const SimulationReport& r) {
  os << "iterations=" << r.iterations.size() << " average precision=" << fmt(r.average.precision)
     << " recall=" << fmt(r.average.recall) << " f1=" << fmt(r.average.f1)
     << " cpu_seconds=" << detail::fmt_fixed(r.total_cpu_seconds, 3) << '\n';
  if (r.trend) {
    os << "trendline a=" << fmt(r.trend->a) << " b=" << fmt(r.trend->b) << " crossing_n=";
    if (r.trend->crossing_n) os << *r.trend->crossing_n;
    else os << "none";
    os << '\n';
  } else {
    os << "trendline unavailable (fewer than two iterations)\n";
  }
}

// --- subcommands -----------------------------------------------------------

struct SimulateArgs {
  DataArgs data;
  ModelArgs model;
  std::string split = "50/0/50";
  std::string eval = "test";
  std::uint64_t seed = 42;
  std::string output = "-";
  std::string report_format = "csv";
  std::string score_mode = "macro";
  std::string timing = "on";
  std::size_t delivery = kDefaultDeliverySize;
  std::size_t window = kDefaultWindowCapacity;
};

int run_simulate(const SimulateArgs& a) {
  auto format = parse_report_format(a.report_format);
  auto mode = parse_score_mode(a.score_mode);
  if (!format || !mode) throw ConfigError("bad --report-format or --score-mode");
  const auto spec = resolve_split(a.split, a.seed);
  auto table = load_table(a.data, a.seed);
  auto hp = resolve_hyperparameters(a.model, table.dim(), a.seed);
  auto corpus = load_corpus(a.data, a.seed);
  auto parts = do_split(corpus, spec);
  const auto& eval_texts = a.eval == "validation" ? parts.validation : parts.test;
  if (eval_texts.empty()) throw ConfigError("the " + a.eval + " partition is empty under --split " + a.split);
  auto train = vectorize_all(parts.train, table, hp.max_len);
  auto eval = vectorize_all(eval_texts, table, hp.max_len);
  if (train.size() < a.delivery)
    throw DataError(corpus.name, 0, "train partition has " + std::to_string(train.size()) + " examples, fewer than one delivery");

  auto model = build(hp, a.window);
  SimulationOptions opt;
  opt.delivery_size = a.delivery;
  opt.mode = *mode;
  opt.measure_cpu = a.timing == "on";
  auto report = simulate_stream(model, train, eval, opt);
  const bool to_stdout = a.output.empty() || a.output == "-";
  if (to_stdout) {
    emit_report(report, std::cout, *format);
    print_summary(std::cerr, report);
  } else {
    emit_report(report, a.output, *format);
    print_summary(std::cout, report);
  }
  return 0;
}

struct TuneArgs {
  DataArgs data;
  std::string space;
  std::string split = "80/10/10";
  std::size_t n_samples = 0;
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
  std::string output = "-";
  std::string report_format = "csv";
  std::string score_mode = "macro";
  std::string timing = "on";
  std::size_t max_len = 64;
};

int run_tune(const TuneArgs& a) {
  auto format = parse_report_format(a.report_format);
  auto mode = parse_score_mode(a.score_mode);
  if (!format || !mode) throw ConfigError("bad --report-format or --score-mode");
  if (a.space.empty()) throw ConfigError("--space is required");
  std::vector<Hyperparameters> space;
  {
    std::ifstream in(a.space);
    if (!in) throw ConfigError("cannot read search space " + a.space);
    try {
      space = expand_search_space(json::parse(in));
    } catch (const json::exception& e) {
      throw ConfigError(a.space + ": " + e.what());
    } catch (const HyperparameterError& e) {
      throw ConfigError(a.space + ": " + e.what());
    }
  }
  if (a.n_samples > space.size())
    throw ConfigError("--n-samples " + std::to_string(a.n_samples) + " exceeds the " + std::to_string(space.size()) +
                      " configurations in " + a.space);
  const auto spec = resolve_split(a.split, a.seed);
  auto table = load_table(a.data, a.seed);
  auto corpus = load_corpus(a.data, a.seed);
  auto parts = do_split(corpus, spec);
  if (parts.validation.empty()) throw ConfigError("tuning needs a validation partition; got --split " + a.split);
  auto train = vectorize_all(parts.train, table, a.max_len);
  auto eval = vectorize_all(parts.validation, table, a.max_len);

  GridSearchOptions opt;
  opt.n_samples = a.n_samples;
  opt.seed = a.seed;
  opt.jobs = a.jobs;
  opt.simulation.mode = *mode;
  opt.simulation.measure_cpu = a.timing == "on";
  std::vector<GridResult> results;
  try {
    results = grid_search(train, eval, space, opt);
  } catch (const std::invalid_argument& e) {
    throw DataError(corpus.name, 0, e.what());
  }
  write_output(a.output, [&](std::ostream& os) { emit_ranking(results, os, *format); });
  return 0;
}

struct ServeArgs {
  std::string listen = "127.0.0.1:8080";
  std::string data_dir = "data";
  std::string embeddings;
  std::size_t max_batch = 1000;
  double trend_a = 0.09;
  double trend_b = 0.22;
  std::size_t window = kDefaultWindowCapacity;
  std::size_t synthetic_embeddings = 0;
};

std::pair<std::string, int> split_host_port(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos) throw ConfigError("--listen expects HOST:PORT, got '" + s + "'");
  try {
    int port = std::stoi(s.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    return {s.substr(0, colon), port};
  } catch (const std::exception&) {
    throw ConfigError("bad port in --listen '" + s + "'");
  }
}

int run_serve(const ServeArgs& a) {
  auto [host, port] = split_host_port(a.listen);
  std::shared_ptr<const EmbeddingTable> table;
  if (a.synthetic_embeddings > 0) {
    table = std::make_shared<EmbeddingTable>(synthetic_embeddings(SyntheticSpec{}));
  } else {
    if (a.embeddings.empty()) throw ConfigError("--embeddings is required");
    table = std::make_shared<EmbeddingTable>(load_embeddings(a.embeddings));
  }
  ServiceConfig cfg;
  cfg.data_dir = a.data_dir;
  cfg.max_batch = a.max_batch;
  cfg.window_capacity = a.window;
  cfg.estimator = {a.trend_a, a.trend_b};
  RelevanceService service(cfg, table);

  // Signals go to a dedicated thread so the handler can stop the server.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  httplib::Server server;
  bind_routes(server, service);
  int bound = port;
  if (port == 0) bound = server.bind_to_any_port(host);
  else if (!server.bind_to_port(host, port)) bound = -1;
  if (bound < 0) throw RuntimeFailure("cannot listen on " + a.listen);
  std::cout << "listening on " << host << ':' << bound << std::endl;

  std::atomic<bool> signalled{false};
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    signalled = true;
    server.stop();
  });
  const bool ok = server.listen_after_bind();
  service.flush();
  std::cout << "shutdown: checkpoints flushed" << std::endl;
  if (!signalled) pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  if (!ok && !signalled) throw RuntimeFailure("server stopped unexpectedly");
  return 0;
}

struct ReplayArgs {
  DataArgs data;
  double rate = 10.0;
  std::string target = "http://127.0.0.1:8080";
  std::size_t limit = 0;
  std::size_t retries = 5;
  std::size_t backoff_ms = 100;
  std::uint64_t seed = 42;
};

int run_replay(const ReplayArgs& a) {
  if (!(a.rate > 0.0)) throw ConfigError("--rate must be positive");
  auto corpus = load_corpus(a.data, a.seed);
  std::vector<ReplayItem> items;
  for (const auto& e : corpus.examples) {
    if (a.limit && items.size() >= a.limit) break;
    items.push_back({e.id, e.text});
  }
  ReplayStream stream(std::move(items), a.rate, http_sink(a.target),
                      {a.retries, std::chrono::milliseconds(a.backoff_ms), 2.0});
  stream.start();
  stream.wait();
  if (auto err = stream.error()) throw RuntimeFailure(*err);
  std::cout << "replayed " << stream.delivered() << " items to " << a.target << '\n';
  return 0;
}

struct EvalReportArgs {
  std::string report;
  std::string output = "-";
  std::string report_format = "markdown";
};

int run_eval_report(const EvalReportArgs& a) {
  auto format = parse_report_format(a.report_format);
  if (!format) throw ConfigError("bad --report-format");
  if (a.report.empty()) throw ConfigError("--report is required");
  std::ifstream in(a.report, std::ios::binary);
  if (!in) throw DataError(a.report, 0, "cannot open file");
  SimulationReport r;
  try {
    r = parse_report(in);
  } catch (const DataError& e) {
    throw DataError(a.report, e.line(), e.what());
  }
  write_output(a.output, [&](std::ostream& os) { emit_report(r, os, *format); });
  print_summary(a.output == "-" ? std::cerr : std::cout, r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive relevance classifier: simulation, tuning and serving"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_file;
  app.add_option("--config", config_file, "Flat key = value file with defaults for any flag");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Stream a labeled corpus through the incremental trainer");
  add_data_flags(simulate, sim.data);
  add_model_flags(simulate, sim.model);
  simulate->add_option("--split", sim.split, "train/validation/test, e.g. 50/0/50 or 80/10/10");
  simulate->add_option("--eval", sim.eval, "Partition scored each iteration")->check(CLI::IsMember({"test", "validation"}));
  simulate->add_option("--seed", sim.seed, "Seed for split, weights and shuffling");
  simulate->add_option("--output", sim.output, "Report path, '-' for stdout");
  simulate->add_option("--report-format", sim.report_format, "csv or markdown");
  simulate->add_option("--score-mode", sim.score_mode, "macro or binary-relevant");
  simulate->add_option("--timing", sim.timing, "on, or off to write cpu_seconds as 0")->check(CLI::IsMember({"on", "off"}));
  simulate->add_option("--delivery", sim.delivery, "Labels per iteration")->check(CLI::PositiveNumber);
  simulate->add_option("--window", sim.window, "Sliding window capacity")->check(CLI::PositiveNumber);

  TuneArgs tune;
  auto* tune_cmd = app.add_subcommand("tune", "Random grid search over a hyperparameter space");
  add_data_flags(tune_cmd, tune.data);
  tune_cmd->add_option("--space", tune.space, "Search space JSON ({\"configs\": [...]} or {\"grid\": {...}})");
  tune_cmd->add_option("--split", tune.split, "train/validation/test");
  tune_cmd->add_option("--n-samples", tune.n_samples, "Configurations to sample, 0 for all");
  tune_cmd->add_option("--seed", tune.seed, "Seed for sampling, split and weights");
  tune_cmd->add_option("--jobs", tune.jobs, "Parallel runs")->check(CLI::PositiveNumber);
  tune_cmd->add_option("--output", tune.output, "Ranking path, '-' for stdout");
  tune_cmd->add_option("--report-format", tune.report_format, "csv or markdown");
  tune_cmd->add_option("--score-mode", tune.score_mode, "macro or binary-relevant");
  tune_cmd->add_option("--timing", tune.timing, "on or off")->check(CLI::IsMember({"on", "off"}));
  tune_cmd->add_option("--max-len", tune.max_len, "Sentence matrix rows")->check(CLI::PositiveNumber);

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--listen", serve.listen, "HOST:PORT (port 0 picks a free port)");
  serve_cmd->add_option("--data-dir", serve.data_dir, "Checkpoint directory");
  serve_cmd->add_option("--embeddings", serve.embeddings, "Embedding file");
  serve_cmd->add_option("--synthetic-embeddings", serve.synthetic_embeddings,
                        "Nonzero: serve the generated 8-dim demo embeddings");
  serve_cmd->add_option("--max-batch", serve.max_batch, "Largest accepted request batch")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--trend-a", serve.trend_a, "Estimator slope");
  serve_cmd->add_option("--trend-b", serve.trend_b, "Estimator intercept");
  serve_cmd->add_option("--window", serve.window, "Sliding window capacity")->check(CLI::PositiveNumber);

  ReplayArgs replay;
  auto* replay_cmd = app.add_subcommand("replay", "Feed a corpus to a running service as a paced stream");
  add_data_flags(replay_cmd, replay.data, /*need_embeddings=*/false);
  replay_cmd->add_option("--rate", replay.rate, "Items per second");
  replay_cmd->add_option("--target", replay.target, "Service base URL");
  replay_cmd->add_option("--limit", replay.limit, "Stop after N items, 0 for all");
  replay_cmd->add_option("--retries", replay.retries, "Delivery attempts per item")->check(CLI::PositiveNumber);
  replay_cmd->add_option("--backoff-ms", replay.backoff_ms, "First retry delay");
  replay_cmd->add_option("--seed", replay.seed, "Seed for --synthetic");

  EvalReportArgs er;
  auto* er_cmd = app.add_subcommand("eval-report", "Summarize or convert a simulation report CSV");
  er_cmd->add_option("--report", er.report, "Report CSV written by simulate");
  er_cmd->add_option("--output", er.output, "Output path, '-' for stdout");
  er_cmd->add_option("--report-format", er.report_format, "csv or markdown");

  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; }))
    for (auto* opt : sub->get_options([](CLI::Option* o) { return !o->get_lnames().empty(); }))
      if (opt->get_single_name() != "help") opt->envname(env_name(opt->get_single_name()));

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = merge_config(app, args);
    std::vector<char*> cargs;
    for (auto& s : args) cargs.push_back(s.data());
    try {
      app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 1;
    }
    if (simulate->parsed()) return run_simulate(sim);
    if (tune_cmd->parsed()) return run_tune(tune);
    if (serve_cmd->parsed()) return run_serve(serve);
    if (replay_cmd->parsed()) return run_replay(replay);
    if (er_cmd->parsed()) return run_eval_report(er);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const EmbeddingError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
