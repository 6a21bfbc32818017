#include "et2q/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "et2q/random.hpp"

namespace et2q {

RssUnits parse_units(const std::string& text) {
  if (text == "dbm") return RssUnits::dbm;
  if (text == "watts" || text == "w") return RssUnits::watts;
  throw std::invalid_argument("unknown RSS units '" + text + "' (expected dbm or watts)");
}

// Rack occupies x in [0, 1.51], y in [0, 0.6], z in [0, 2.02]. The reader sits
// 1 m in front of the rack face (y = -1) with its port array centred at 2.2 m.
RadarConfig RadarConfig::smart_rack(int tags, int antennas) {
  if (tags < 1) throw std::invalid_argument("at least one tag is required");
  if (antennas < 1) throw std::invalid_argument("at least one antenna is required");
  RadarConfig c;
  constexpr double width = 1.51;
  constexpr double height = 2.02;
  constexpr double depth = 0.3;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(tags))));
  const int rows = (tags + cols - 1) / cols;
  for (int t = 0; t < tags; ++t) {
    const int col = t % cols;
    const int row = t / cols;
    c.tag_positions.push_back({width * (col + 0.5) / cols, depth, height * (row + 0.5) / rows});
  }
  // Ports on a 1.2 m circle in the x-z plane facing the rack.
  constexpr double radius = 1.2;
  for (int a = 0; a < antennas; ++a) {
    const double phi = 2.0 * std::numbers::pi * (a + 0.5) / antennas;
    c.antenna_positions.push_back({width / 2 + radius * std::cos(phi), -1.0, 2.2 + radius * std::sin(phi)});
  }
  return c;
}

void RadarConfig::validate() const {
  if (tag_positions.empty()) throw std::invalid_argument("radar config has no tags");
  if (antenna_positions.empty()) throw std::invalid_argument("radar config has no antennas");
  if (!(transmit_power > 0.0) || !(antenna_gain > 0.0) || !(wavelength > 0.0) || !(cross_section > 0.0)) {
    throw std::invalid_argument("radar parameters must be positive");
  }
  if (noise.fading_db < 0.0 || noise.floor_watts < 0.0 || noise.drift_db < 0.0 || !(noise.drift_period > 0.0)) {
    throw std::invalid_argument("noise parameters must be non-negative with a positive drift period");
  }
}

double radar_equation(double transmit_power, double antenna_gain, double wavelength, double cross_section,
                      double range) {
  if (!(range > 0.0) || !std::isfinite(range)) throw std::domain_error("range must be positive");
  const double four_pi = 4.0 * std::numbers::pi;
  const double r2 = range * range;
  return transmit_power * antenna_gain * antenna_gain * wavelength * wavelength * cross_section /
         (four_pi * four_pi * r2 * r2);
}

namespace {

double distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

double radar_rss(const RadarConfig& config, std::size_t tag, std::size_t antenna, const NoiseDraws& draws) {
  if (tag >= config.tag_positions.size() || antenna >= config.antenna_positions.size()) {
    throw std::out_of_range("tag or antenna index out of range");
  }
  const double range = distance(config.tag_positions[tag], config.antenna_positions[antenna]);
  const double clean = radar_equation(config.transmit_power, config.antenna_gain, config.wavelength,
                                      config.cross_section, range);
  const auto& n = config.noise;
  const double gain_db = n.fading_db * draws.fading + n.drift_db * std::sin(draws.drift_phase);
  const double received = clean * std::pow(10.0, gain_db / 10.0) + n.floor_watts * draws.additive;
  return std::max(received, 1e-15);
}

double watts_to_dbm(double watts) {
  if (!(watts > 0.0)) throw std::domain_error("power must be positive to convert to dBm");
  return 10.0 * std::log10(watts) + 30.0;
}

std::vector<StreamRecord> generate_stream(const RadarConfig& config, std::size_t samples, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t tags = config.tag_positions.size();
  const std::size_t ports = config.antenna_positions.size();
  std::vector<StreamRecord> out;
  out.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t tag =
        config.emission == Emission::round_robin ? s % tags : static_cast<std::size_t>(uniform_index(rng, tags));
    StreamRecord rec;
    rec.features.resize(static_cast<Eigen::Index>(ports));
    rec.label = static_cast<int>(tag) + 1;
    rec.timestamp = static_cast<std::int64_t>(s);
    for (std::size_t a = 0; a < ports; ++a) {
      NoiseDraws d;
      d.fading = standard_normal(rng);
      d.additive = standard_normal(rng);
      // Each port drifts with its own phase offset.
      d.drift_phase = 2.0 * std::numbers::pi * (static_cast<double>(s) / config.noise.drift_period +
                                                static_cast<double>(a) / static_cast<double>(ports));
      const double w = radar_rss(config, tag, a, d);
      rec.features(static_cast<Eigen::Index>(a)) = config.units == RssUnits::dbm ? watts_to_dbm(w) : w;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_csv(const std::vector<StreamRecord>& records) {
  if (records.empty()) throw std::invalid_argument("no records to write");
  const auto dim = records.front().features.size();
  std::string out;
  for (Eigen::Index i = 0; i < dim; ++i) out += "x_" + std::to_string(i + 1) + ",";
  out += "label\n";
  for (const auto& r : records) {
    if (r.features.size() != dim) throw std::invalid_argument("records have differing feature counts");
    for (Eigen::Index i = 0; i < dim; ++i) {
      out += format_double(r.features(i));
      out += ',';
    }
    out += std::to_string(r.label);
    out += '\n';
  }
  return out;
}

void write_csv(const std::vector<StreamRecord>& records, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << format_csv(records);
  if (!f) throw std::runtime_error("write to " + path.string() + " failed");
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

CsvTable parse_csv_table(const std::string& text) {
  std::vector<StreamRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::size_t columns = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line = trim(std::string_view(text).substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (columns == 0) {
      if (cells.size() < 2 || trim(cells.back()) != "label") {
        throw CsvError("header must list the features followed by 'label'", line_no);
      }
      columns = cells.size();
      continue;
    }
    if (cells.size() != columns) {
      throw CsvError("expected " + std::to_string(columns) + " columns, found " + std::to_string(cells.size()),
                     line_no);
    }
    StreamRecord rec;
    rec.features.resize(static_cast<Eigen::Index>(columns - 1));
    for (std::size_t i = 0; i + 1 < columns; ++i) {
      const auto cell = trim(cells[i]);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw CsvError("column " + std::to_string(i + 1) + " is not a finite number", line_no);
      }
      rec.features(static_cast<Eigen::Index>(i)) = v;
    }
    const auto cell = trim(cells.back());
    int label = 0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), label);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size() || label < 1) {
      throw CsvError("label must be a positive integer", line_no);
    }
    rec.label = label;
    rec.timestamp = static_cast<std::int64_t>(out.size());
    out.push_back(std::move(rec));
  }
  if (columns == 0) throw CsvError("missing header", std::max<std::size_t>(line_no, 1));
  return {columns - 1, std::move(out)};
}

std::vector<StreamRecord> parse_csv(const std::string& text) { return parse_csv_table(text).records; }

CsvTable load_csv_table(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv_table(ss.str());
}

std::vector<StreamRecord> load_csv(const std::filesystem::path& path) { return load_csv_table(path).records; }

int class_count_of(const std::vector<StreamRecord>& records) {
  int m = 0;
  for (const auto& r : records) m = std::max(m, r.label);
  return m;
}

namespace {

Classifier train_on(const std::vector<StreamRecord>& records, const std::vector<std::size_t>& order, int classes,
                    const Hyperparameters& hp, const std::function<void(const StepTrace&)>& on_step) {
  if (order.empty()) throw std::invalid_argument("no training records");
  const auto dim = static_cast<int>(records[order.front()].features.size());
  Classifier clf(dim, classes, hp);
  std::uint64_t step = 0;
  for (const auto idx : order) {
    const auto& r = records[idx];
    const auto s = clf.train(r.features, r.label);
    ++step;
    if (on_step) {
      StepTrace t;
      t.step = step;
      t.kind = s.kind;
      for (const auto& m : s.models) t.error_norm += m.error_norm * m.error_norm;
      t.error_norm = std::sqrt(t.error_norm);
      for (const auto k : clf.rule_counts()) t.rules += k;
      on_step(t);
    }
  }
  return clf;
}

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (const double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  for (const double x : xs) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(xs.size()));
}

FoldReport run_fold(const std::vector<StreamRecord>& records, const std::vector<std::size_t>& train,
                    const std::vector<std::size_t>& validation, int classes, const Hyperparameters& hp,
                    const EvaluationOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  const Classifier clf = train_on(records, train, classes, hp, {});

  FoldReport rep;
  rep.train_count = train.size();
  rep.validation_count = validation.size();
  std::vector<std::size_t> tp(static_cast<std::size_t>(classes), 0);
  std::vector<std::size_t> predicted(static_cast<std::size_t>(classes), 0);
  std::vector<std::size_t> support(static_cast<std::size_t>(classes), 0);
  for (const auto idx : validation) {
    const auto& r = records[idx];
    const int label = clf.predict(r.features).label;
    ++support[static_cast<std::size_t>(r.label - 1)];
    ++predicted[static_cast<std::size_t>(label - 1)];
    if (label == r.label) {
      ++rep.correct;
      ++tp[static_cast<std::size_t>(label - 1)];
    }
    if (options.keep_predictions) rep.predictions.push_back({idx, r.label, label});
  }
  const auto stop = std::chrono::steady_clock::now();

  rep.classification_rate =
      validation.empty() ? 0.0 : static_cast<double>(rep.correct) / static_cast<double>(validation.size());
  rep.rule_counts = clf.rule_counts();
  std::vector<double> k(rep.rule_counts.begin(), rep.rule_counts.end());
  mean_std(k, rep.rule_mean, rep.rule_std);
  rep.execution_seconds = options.include_timing ? std::chrono::duration<double>(stop - start).count() : 0.0;
  for (int c = 0; c < classes; ++c) {
    const auto i = static_cast<std::size_t>(c);
    ClassMetrics m;
    m.support = support[i];
    m.precision = predicted[i] ? static_cast<double>(tp[i]) / static_cast<double>(predicted[i]) : 0.0;
    m.recall = support[i] ? static_cast<double>(tp[i]) / static_cast<double>(support[i]) : 0.0;
    rep.per_class.push_back(m);
  }
  return rep;
}

void summarize(EvaluationReport& report) {
  std::vector<double> rates;
  std::vector<double> times;
  std::vector<double> rules;
  for (const auto& f : report.folds) {
    rates.push_back(f.classification_rate);
    times.push_back(f.execution_seconds);
    for (const auto k : f.rule_counts) rules.push_back(static_cast<double>(k));
  }
  mean_std(rates, report.classification_rate, report.classification_rate_std);
  mean_std(times, report.execution_seconds, report.execution_seconds_std);
  mean_std(rules, report.rule_mean, report.rule_std);
}

}  // namespace

Classifier train_classifier(const std::vector<StreamRecord>& records, const Hyperparameters& hp,
                            const std::function<void(const StepTrace&)>& on_step) {
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return train_on(records, order, class_count_of(records), hp, on_step);
}

std::vector<std::vector<std::size_t>> fold_partition(std::size_t count, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (count < folds) throw std::invalid_argument("fewer records than folds");
  std::vector<std::size_t> perm(count);
  for (std::size_t i = 0; i < count; ++i) perm[i] = i;
  Rng rng(seed);
  shuffle(perm, rng);
  std::vector<std::vector<std::size_t>> out(folds);
  for (std::size_t i = 0; i < count; ++i) out[i % folds].push_back(perm[i]);
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

EvaluationReport cross_validate(const std::vector<StreamRecord>& records, std::size_t folds, const Hyperparameters& hp,
                                const EvaluationOptions& options) {
  hp.validate();
  const auto parts = fold_partition(records.size(), folds, hp.seed);
  const int classes = class_count_of(records);
  EvaluationReport report;
  report.protocol = "cross_validation";
  report.record_count = records.size();
  report.hp = hp;
  report.folds.resize(folds);

  auto job = [&](std::size_t f) {
    std::vector<std::size_t> train;
    train.reserve(records.size() - parts[f].size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (next < parts[f].size() && parts[f][next] == i) {
        ++next;
        continue;
      }
      train.push_back(i);
    }
    auto rep = run_fold(records, train, parts[f], classes, hp, options);
    rep.fold = f + 1;
    spdlog::debug("fold {}/{}: rate {:.4f}, mean rules {:.2f}", f + 1, folds, rep.classification_rate, rep.rule_mean);
    report.folds[f] = std::move(rep);
  };

  const std::size_t workers = std::clamp<std::size_t>(options.jobs, 1, folds);
  if (workers == 1) {
    for (std::size_t f = 0; f < folds; ++f) job(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t f = next++; f < folds; f = next++) job(f);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  summarize(report);
  return report;
}

EvaluationReport periodic_holdout(const std::vector<StreamRecord>& records, std::size_t n_train,
                                  const Hyperparameters& hp, const EvaluationOptions& options) {
  hp.validate();
  if (n_train == 0 || n_train >= records.size()) {
    throw std::invalid_argument("hold-out split must leave records on both sides");
  }
  std::vector<std::size_t> train(n_train);
  std::vector<std::size_t> validation(records.size() - n_train);
  for (std::size_t i = 0; i < n_train; ++i) train[i] = i;
  for (std::size_t i = 0; i < validation.size(); ++i) validation[i] = n_train + i;
  EvaluationReport report;
  report.protocol = "periodic_holdout";
  report.record_count = records.size();
  report.hp = hp;
  report.folds.push_back(run_fold(records, train, validation, class_count_of(records), hp, options));
  report.folds.front().fold = 1;
  summarize(report);
  return report;
}

nlohmann::json to_json(const Hyperparameters& hp) {
  return {
      {"beta", hp.beta},
      {"grades", hp.grades},
      {"rho", hp.rho},
      {"delta1", hp.delta1},
      {"eta", hp.eta},
      {"n_history", hp.n_history},
      {"gmm_components", hp.gmm_components},
      {"mode", std::string(to_string(hp.mode))},
      {"seed", hp.seed},
      {"normalize", hp.normalize},
  };
}

nlohmann::json to_json(const EvaluationReport& report) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : report.folds) {
    nlohmann::json per_class = nlohmann::json::array();
    for (std::size_t c = 0; c < f.per_class.size(); ++c) {
      const auto& m = f.per_class[c];
      per_class.push_back({{"class", c + 1}, {"precision", m.precision}, {"recall", m.recall}, {"support", m.support}});
    }
    nlohmann::json fj = {
        {"fold", f.fold},
        {"train_count", f.train_count},
        {"validation_count", f.validation_count},
        {"correct", f.correct},
        {"classification_rate", f.classification_rate},
        {"rule_counts", f.rule_counts},
        {"rule_count", {{"mean", f.rule_mean}, {"std", f.rule_std}}},
        {"execution_time_seconds", f.execution_seconds},
        {"extensions", {{"per_class", per_class}}},
    };
    if (!f.predictions.empty()) {
      nlohmann::json preds = nlohmann::json::array();
      for (const auto& p : f.predictions) preds.push_back({p.record_index, p.label, p.predicted});
      fj["predictions"] = std::move(preds);
    }
    folds.push_back(std::move(fj));
  }
  return {
      {"protocol", report.protocol},
      {"record_count", report.record_count},
      {"classification_rate", {{"mean", report.classification_rate}, {"std", report.classification_rate_std}}},
      {"rule_count", {{"mean", report.rule_mean}, {"std", report.rule_std}}},
      {"execution_time_seconds", {{"mean", report.execution_seconds}, {"std", report.execution_seconds_std}}},
      {"hyperparameters", to_json(report.hp)},
      {"folds", std::move(folds)},
      {"metadata", {{"clock", "steady"}, {"hardware_threads", std::thread::hardware_concurrency()}}},
  };
}

}  // namespace et2q
