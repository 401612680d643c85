// SPDX-License-Identifier: Apache-2.0
//
// Experimental protocol around simulate_stream: corpus loaders, seeded
// splits, random grid search and report files.
#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "relevance/csv.hpp"
#include "relevance/hyperparameters.hpp"
#include "relevance/trainer.hpp"

namespace relevance {

/// Bad input data. `line` is 0 when the problem is not tied to a row.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& source, std::size_t line, const std::string& msg)
      : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct LabeledText {
  std::string id;
  std::string text;
  RelevanceLabel label = RelevanceLabel::CantDecide;
  friend bool operator==(const LabeledText&, const LabeledText&) = default;
};

struct Corpus {
  std::string name;
  std::vector<LabeledText> examples;

  std::array<std::size_t, kNumClasses> histogram() const {
    std::array<std::size_t, kNumClasses> h{};
    for (const auto& e : examples) ++h[index_of(e.label)];
    return h;
  }
  std::size_t size() const { return examples.size(); }
};

inline std::vector<LabeledExample> vectorize_all(const std::vector<LabeledText>& texts, const EmbeddingTable& table,
                                                 std::size_t max_len, ExampleSource source = ExampleSource::Dataset) {
  std::vector<LabeledExample> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(make_example(t.id, t.text, t.label, table, max_len, source));
  return out;
}

namespace detail {

struct Table {
  std::vector<std::string> header;
  std::vector<csv::Record> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
};

inline Table read_table(std::istream& in, const std::string& source) {
  Table t;
  try {
    csv::Reader r(in);
    auto head = r.next();
    if (!head) throw DataError(source, 0, "empty file");
    for (auto& h : head->fields) t.header.push_back(csv::trim(h));
    while (auto rec = r.next()) t.rows.push_back(std::move(*rec));
  } catch (const csv::ParseError& e) {
    throw DataError(source, e.line(), e.what());
  }
  return t;
}

inline void add_unique(Corpus& c, LabeledText t, std::unordered_set<std::string>& seen, const std::string& source,
                       std::size_t line) {
  if (!seen.insert(t.id).second) throw DataError(source, line, "duplicate id '" + t.id + "'");
  c.examples.push_back(std::move(t));
}

inline const std::string& field(const csv::Record& r, std::size_t col, const std::string& source) {
  if (col >= r.fields.size())
    throw DataError(source, r.line,
                    "expected at least " + std::to_string(col + 1) + " fields, got " + std::to_string(r.fields.size()));
  return r.fields[col];
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path, 0, "cannot open file");
  return in;
}

}  // namespace detail

/// Figure Eight "disasters on social media" layout: columns `text` and
/// `choose_one`, optional `_unit_id` used as the id (else the row number).
inline Corpus load_figure_eight(std::istream& in, const std::string& source = "<stream>") {
  auto t = detail::read_table(in, source);
  auto text_col = t.column("text");
  auto label_col = t.column("choose_one");
  if (!text_col || !label_col) throw DataError(source, 1, "header must contain columns 'text' and 'choose_one'");
  auto id_col = t.column("_unit_id");
  Corpus c{source, {}};
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::string raw_label = csv::trim(detail::field(r, *label_col, source));
    auto label = parse_label(raw_label);
    if (!label) throw DataError(source, r.line, "unknown label '" + raw_label + "'");
    std::string id = id_col ? csv::trim(detail::field(r, *id_col, source)) : std::to_string(i + 1);
    detail::add_unique(c, {std::move(id), detail::field(r, *text_col, source), *label}, seen, source, r.line);
  }
  return c;
}

inline Corpus load_figure_eight(const std::string& path) {
  auto in = detail::open_input(path);
  return load_figure_eight(in, path);
}

/// Column names and informativeness-to-relevance mapping for CrisisLexT26
/// event files. Header names are compared after trimming whitespace.
struct CrisisLexMapping {
  std::string id_column = "Tweet ID";
  std::string text_column = "Tweet Text";
  std::string label_column = "Informativeness";
  std::map<std::string, RelevanceLabel> labels = {
      {"Related and informative", RelevanceLabel::Relevant},
      {"Related - but not informative", RelevanceLabel::Relevant},
      {"Not related", RelevanceLabel::NotRelevant},
      {"Not applicable", RelevanceLabel::CantDecide},
  };

  /// Keys present in `j` replace the defaults; "labels" replaces entries
  /// one by one.
  static CrisisLexMapping from_json(const nlohmann::json& j) {
    CrisisLexMapping m;
    if (!j.is_object()) throw std::invalid_argument("CrisisLex mapping must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() == "id_column") m.id_column = it->get<std::string>();
      else if (it.key() == "text_column") m.text_column = it->get<std::string>();
      else if (it.key() == "label_column") m.label_column = it->get<std::string>();
      else if (it.key() == "labels") {
        for (auto l = it->begin(); l != it->end(); ++l) {
          auto lab = parse_label(l->get<std::string>());
          if (!lab) throw std::invalid_argument("unknown relevance label '" + l->get<std::string>() + "'");
          m.labels[l.key()] = *lab;
        }
      } else {
        throw std::invalid_argument("unknown CrisisLex mapping key '" + it.key() + "'");
      }
    }
    return m;
  }
};

inline Corpus load_crisislex(std::istream& in, const CrisisLexMapping& mapping = {},
                             const std::string& source = "<stream>") {
  auto t = detail::read_table(in, source);
  auto text_col = t.column(mapping.text_column);
  auto label_col = t.column(mapping.label_column);
  if (!text_col || !label_col)
    throw DataError(source, 1,
                    "header must contain columns '" + mapping.text_column + "' and '" + mapping.label_column + "'");
  auto id_col = t.column(mapping.id_column);
  Corpus c{source, {}};
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::string raw = csv::trim(detail::field(r, *label_col, source));
    auto it = mapping.labels.find(raw);
    if (it == mapping.labels.end()) throw DataError(source, r.line, "unmapped informativeness value '" + raw + "'");
    std::string id = id_col ? csv::trim(detail::field(r, *id_col, source)) : std::to_string(i + 1);
    // CrisisLex ids are often written with a leading apostrophe.
    if (!id.empty() && id.front() == '\'') id.erase(0, 1);
    detail::add_unique(c, {std::move(id), detail::field(r, *text_col, source), it->second}, seen, source, r.line);
  }
  return c;
}

inline Corpus load_crisislex(const std::string& path, const CrisisLexMapping& mapping = {}) {
  auto in = detail::open_input(path);
  return load_crisislex(in, mapping, path);
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 42;

  void validate() const {
    for (double f : {train, validation, test})
      if (!(f >= 0.0) || !std::isfinite(f)) throw std::invalid_argument("split fractions must be finite and >= 0");
    if (std::abs(train + validation + test - 1.0) > 1e-9) throw std::invalid_argument("split fractions must sum to 1");
  }
};

/// Parses "80/10/10" (percentages) or "0.5/0/0.5" (fractions).
inline SplitSpec parse_split(std::string_view s, std::uint64_t seed = 42) {
  double v[3];
  std::size_t k = 0;
  std::size_t pos = 0;
  while (k < 3) {
    auto slash = s.find('/', pos);
    auto part = s.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos);
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v[k]);
    if (ec != std::errc() || p != part.data() + part.size() || part.empty())
      throw std::invalid_argument("split must look like 80/10/10, got '" + std::string(s) + "'");
    ++k;
    if (slash == std::string_view::npos) break;
    pos = slash + 1;
  }
  if (k != 3 || pos > s.size() || s.find('/', pos) != std::string_view::npos)
    throw std::invalid_argument("split must have three parts, got '" + std::string(s) + "'");
  const double sum = v[0] + v[1] + v[2];
  const double scale = sum > 1.0 + 1e-9 ? 100.0 : 1.0;
  SplitSpec spec{v[0] / scale, v[1] / scale, v[2] / scale, seed};
  spec.validate();
  return spec;
}

struct SplitResult {
  std::vector<LabeledText> train, validation, test;
};

/// Seeded shuffle, then train = first floor(f_tr N), validation = next
/// floor(f_val N), test = the rest.
inline SplitResult split(const Corpus& corpus, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = corpus.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto take = [n](double f) { return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)); };
  const std::size_t n_train = take(spec.train);
  const std::size_t n_val = std::min(n - n_train, take(spec.validation));
  SplitResult r;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = corpus.examples[order[i]];
    if (i < n_train) r.train.push_back(ex);
    else if (i < n_train + n_val) r.validation.push_back(ex);
    else r.test.push_back(ex);
  }
  if (r.train.empty() && spec.train > 0) throw std::invalid_argument("split leaves the train partition empty");
  if (r.validation.empty() && spec.validation > 0)
    throw std::invalid_argument("split leaves the validation partition empty");
  if (r.test.empty() && spec.test > 0) throw std::invalid_argument("split leaves the test partition empty");
  return r;
}

// ---------------------------------------------------------------------------
// Random grid search

/// Either {"configs": [{...}, ...]} or {"grid": {"key": [v, ...], ...}},
/// each optionally with "base": {...} applied first. Duplicates (after
/// normalization) are dropped, first occurrence kept.
inline std::vector<Hyperparameters> expand_search_space(const nlohmann::json& j) {
  if (!j.is_object()) throw HyperparameterError("search space must be a JSON object");
  Hyperparameters base;
  if (j.contains("base")) base = apply_overrides(base, j["base"]);
  std::vector<Hyperparameters> all;
  if (j.contains("configs")) {
    if (!j["configs"].is_array()) throw HyperparameterError("'configs' must be an array");
    for (const auto& c : j["configs"]) all.push_back(apply_overrides(base, c));
  } else if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (!g.is_object()) throw HyperparameterError("'grid' must be an object");
    std::vector<nlohmann::json> partial{nlohmann::json::object()};
    for (auto it = g.begin(); it != g.end(); ++it) {
      if (!it->is_array() || it->empty()) throw HyperparameterError("grid entry '" + it.key() + "' must be a non-empty array");
      std::vector<nlohmann::json> next;
      for (const auto& p : partial)
        for (const auto& v : *it) {
          auto q = p;
          q[it.key()] = v;
          next.push_back(std::move(q));
        }
      partial = std::move(next);
    }
    for (const auto& p : partial) all.push_back(apply_overrides(base, p));
  } else {
    throw HyperparameterError("search space needs a 'configs' array or a 'grid' object");
  }
  std::vector<Hyperparameters> unique;
  for (const auto& h : all) {
    h.validate();
    auto n = h.normalized();
    if (std::none_of(unique.begin(), unique.end(), [&](const Hyperparameters& u) { return u == n; })) unique.push_back(n);
  }
  if (unique.empty()) throw HyperparameterError("search space is empty");
  return unique;
}

struct GridResult {
  std::size_t sample_index = 0;  // position in the sampled order
  Hyperparameters hyperparameters;
  SimulationReport report;
};

struct GridSearchOptions {
  std::size_t n_samples = 0;  // 0 samples the whole space
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
  SimulationOptions simulation;
  std::size_t window_capacity = kDefaultWindowCapacity;
};

/// Trains one fresh model per sampled configuration on `train`, scores on
/// `eval`, and ranks by average F1 (descending) then CPU time (ascending).
/// Embedding dim and max_len come from the examples, overriding the space.
inline std::vector<GridResult> grid_search(const std::vector<LabeledExample>& train,
                                           const std::vector<LabeledExample>& eval,
                                           const std::vector<Hyperparameters>& space, const GridSearchOptions& opt) {
  if (space.empty()) throw std::invalid_argument("grid_search: empty search space");
  if (train.empty() || eval.empty()) throw std::invalid_argument("grid_search: empty train or evaluation set");
  const std::size_t n = opt.n_samples == 0 ? space.size() : opt.n_samples;
  if (n > space.size())
    throw std::invalid_argument("grid_search: " + std::to_string(n) + " samples requested from a space of " +
                                std::to_string(space.size()));
  std::vector<std::size_t> order(space.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(opt.seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(n);

  const std::size_t dim = train.front().matrix.dim();
  const std::size_t max_len = train.front().matrix.max_len();
  std::vector<GridResult> results(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        Hyperparameters hp = space[order[i]];
        hp.embedding_dim = dim;
        hp.max_len = max_len;
        auto model = ClassifierModel::build(hp, opt.window_capacity);
        results[i] = {i, hp, simulate_stream(model, train, eval, opt.simulation)};
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(opt.jobs, 1, n);
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
    if (a.report.average.f1 != b.report.average.f1) return a.report.average.f1 > b.report.average.f1;
    return a.report.total_cpu_seconds < b.report.total_cpu_seconds;
  });
  return results;
}

// ---------------------------------------------------------------------------
// Report files

enum class ReportFormat { Csv, Markdown };

inline std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md" || s == "markdown-table") return ReportFormat::Markdown;
  return std::nullopt;
}

namespace detail {

/// Shortest text that parses back to the same double.
inline std::string fmt_exact(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("report", line, "not a number: '" + s + "'");
  return v;
}

}  // namespace detail

inline constexpr const char* kReportHeader = "iteration,n_tweets,precision,recall,f1,cpu_seconds";

/// CSV layout: one row per iteration, then
///   average,<n_tweets>,<precision>,<recall>,<f1>,<total cpu_seconds>
///   trendline,<crossing_n>,<a>,<b>,<residual_ss>,
/// The trendline row has empty fields when fewer than two iterations ran.
inline void emit_report(const SimulationReport& r, std::ostream& os, ReportFormat format = ReportFormat::Csv) {
  using detail::fmt_exact;
  const std::size_t last_n = r.iterations.empty() ? 0 : r.iterations.back().n_tweets;
  if (format == ReportFormat::Csv) {
    os << kReportHeader << '\n';
    for (const auto& it : r.iterations)
      os << it.iteration << ',' << it.n_tweets << ',' << fmt_exact(it.scores.precision) << ','
         << fmt_exact(it.scores.recall) << ',' << fmt_exact(it.scores.f1) << ',' << fmt_exact(it.cpu_seconds) << '\n';
    os << "average," << last_n << ',' << fmt_exact(r.average.precision) << ',' << fmt_exact(r.average.recall) << ','
       << fmt_exact(r.average.f1) << ',' << fmt_exact(r.total_cpu_seconds) << '\n';
    os << "trendline,";
    if (r.trend) {
      if (r.trend->crossing_n) os << *r.trend->crossing_n;
      os << ',' << fmt_exact(r.trend->a) << ',' << fmt_exact(r.trend->b) << ',' << fmt_exact(r.trend->residual_ss)
         << ",\n";
    } else {
      os << ",,,,\n";
    }
    return;
  }
  using detail::fmt_fixed;
  os << "| Iteration | Tweets | Precision | Recall | F1 | CPU (s) |\n";
  os << "|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& it : r.iterations)
    os << "| " << it.iteration << " | " << it.n_tweets << " | " << fmt_fixed(it.scores.precision, 4) << " | "
       << fmt_fixed(it.scores.recall, 4) << " | " << fmt_fixed(it.scores.f1, 4) << " | "
       << fmt_fixed(it.cpu_seconds, 3) << " |\n";
  os << "| **Average** | " << last_n << " | " << fmt_fixed(r.average.precision, 4) << " | "
     << fmt_fixed(r.average.recall, 4) << " | " << fmt_fixed(r.average.f1, 4) << " | "
     << fmt_fixed(r.total_cpu_seconds, 3) << " |\n";
  if (r.trend) {
    os << "\nTrendline: y = " << fmt_fixed(r.trend->a, 4) << " ln(x) + " << fmt_fixed(r.trend->b, 4);
    if (r.trend->crossing_n) os << ", reaches the average F1 at n = " << *r.trend->crossing_n;
    os << '\n';
  }
}

/// Writes via a temporary file so a failed run never leaves a partial report.
inline void emit_report(const SimulationReport& r, const std::string& path, ReportFormat format = ReportFormat::Csv) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report " + path);
    emit_report(r, out, format);
    out.flush();
    if (!out) throw std::runtime_error("I/O error writing report " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("cannot move report into place at " + path);
  }
}

/// Reads back a CSV report. Config and mode are not stored in the file.
inline SimulationReport parse_report(std::istream& in) {
  auto t = detail::read_table(in, "report");
  if (csv::join(t.header) != kReportHeader) throw DataError("report", 1, "unexpected header");
  SimulationReport r;
  bool have_average = false;
  for (const auto& rec : t.rows) {
    if (rec.fields.size() != 6) throw DataError("report", rec.line, "expected 6 fields");
    const auto& f = rec.fields;
    if (f[0] == "average") {
      r.average = {detail::parse_double(f[2], rec.line), detail::parse_double(f[3], rec.line),
                   detail::parse_double(f[4], rec.line)};
      r.total_cpu_seconds = detail::parse_double(f[5], rec.line);
      have_average = true;
    } else if (f[0] == "trendline") {
      if (f[2].empty()) continue;
      TrendlineFit fit;
      fit.a = detail::parse_double(f[2], rec.line);
      fit.b = detail::parse_double(f[3], rec.line);
      fit.residual_ss = detail::parse_double(f[4], rec.line);
      if (!f[1].empty()) fit.crossing_n = std::stoll(f[1]);
      r.trend = fit;
    } else {
      IterationResult it;
      it.iteration = static_cast<std::size_t>(detail::parse_double(f[0], rec.line));
      it.n_tweets = static_cast<std::size_t>(detail::parse_double(f[1], rec.line));
      it.scores = {detail::parse_double(f[2], rec.line), detail::parse_double(f[3], rec.line),
                   detail::parse_double(f[4], rec.line)};
      it.cpu_seconds = detail::parse_double(f[5], rec.line);
      r.iterations.push_back(it);
    }
  }
  if (!have_average) throw DataError("report", 0, "missing average row");
  return r;
}

/// Ranked grid-search table with the tuned-configuration columns.
inline void emit_ranking(const std::vector<GridResult>& results, std::ostream& os,
                         ReportFormat format = ReportFormat::Csv) {
  using detail::fmt_exact;
  using detail::fmt_fixed;
  if (format == ReportFormat::Csv) {
    os << "rank,model,learning_rate,batch_size,epochs,dropout,recurrent_dropout,optimizer,"
          "avg_precision,avg_recall,avg_f1,cpu_seconds\n";
  } else {
    os << "| Rank | Model | LR | Batch | Epochs | Dropout | Rec. dropout | Optimizer | Avg P | Avg R | Avg F1 | CPU (s) |\n";
    os << "|---:|---|---:|---:|---:|---:|---:|---|---:|---:|---:|---:|\n";
  }
  std::size_t rank = 0;
  for (const auto& g : results) {
    const auto& h = g.hyperparameters;
    const auto& a = g.report.average;
    ++rank;
    if (format == ReportFormat::Csv) {
      os << rank << ',' << to_string(h.model_type) << ',' << fmt_exact(h.learning_rate) << ',' << h.batch_size << ','
         << h.epochs << ',' << fmt_exact(h.dropout) << ',' << fmt_exact(h.recurrent_dropout) << ','
         << nn::to_string(h.optimizer) << ',' << fmt_exact(a.precision) << ',' << fmt_exact(a.recall) << ','
         << fmt_exact(a.f1) << ',' << fmt_exact(g.report.total_cpu_seconds) << '\n';
    } else {
      os << "| " << rank << " | " << to_string(h.model_type) << " | " << fmt_exact(h.learning_rate) << " | "
         << h.batch_size << " | " << h.epochs << " | " << fmt_exact(h.dropout) << " | "
         << fmt_exact(h.recurrent_dropout) << " | " << nn::to_string(h.optimizer) << " | "
         << fmt_fixed(a.precision, 2) << " | " << fmt_fixed(a.recall, 2) << " | " << fmt_fixed(a.f1, 2) << " | "
         << fmt_fixed(g.report.total_cpu_seconds, 2) << " |\n";
    }
  }
}

}  // namespace relevance
