#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "et2q/harness.hpp"
#include "et2q/serialization.hpp"

namespace et2q::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_hyperparameter_flags(CLI::App& cmd, Hyperparameters& hp, std::string& mode) {
  cmd.add_option("--beta", hp.beta, "sigmoid slope")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--grades", hp.grades, "jump positions per feature (n_s)")
      ->capture_default_str()
      ->check(CLI::Range(1, 64));
  cmd.add_option("--rho", hp.rho, "vigilance, in (0, 1]")->capture_default_str();
  cmd.add_option("--delta1", hp.delta1, "lower/upper width ratio, in (0, 1)")->capture_default_str();
  cmd.add_option("--eta", hp.eta, "DEKF measurement noise")->capture_default_str()->check(CLI::PositiveNumber);
  cmd.add_option("--n-history", hp.n_history, "density window length")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd.add_option("--gmm-components", hp.gmm_components, "mixture components")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd.add_option("--mode", mode, "mm (one-vs-rest sub-models) or mimo")
      ->capture_default_str()
      ->check(CLI::IsMember({"mm", "mimo"}));
  cmd.add_option("--seed", hp.seed, "seed for mixture fits and fold assignment")->capture_default_str();
  cmd.add_flag("--normalize", hp.normalize, "min-max scale features on the first n_history samples");
}

std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write to " + path + " failed");
}

std::string join(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_double(v(i));
  }
  return s;
}

nlohmann::json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

nlohmann::json mat_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec_json(m.row(r).transpose()));
  return rows;
}

nlohmann::json classifier_json(const Classifier& clf) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : clf.models()) {
    const auto& n = m.network();
    nlohmann::json rules = nlohmann::json::array();
    for (const auto& r : n.rules) {
      rules.push_back({
          {"mean", vec_json(r.mean)},
          {"theta_upper", mat_json(r.jumps.upper)},
          {"theta_lower", mat_json(r.jumps.lower)},
          {"omega_upper", mat_json(r.omega_upper)},
          {"omega_lower", mat_json(r.omega_lower)},
      });
    }
    models.push_back({
        {"outputs", n.class_dim},
        {"rule_count", n.rule_count()},
        {"steps", m.steps()},
        {"ordering_violations", m.ordering_violations()},
        {"q_lower", vec_json(n.q_lower)},
        {"q_upper", vec_json(n.q_upper)},
        {"growth_steps", m.growth_steps()},
        {"rules", std::move(rules)},
    });
  }
  nlohmann::json norm = nullptr;
  if (clf.normalizer().fitted()) {
    norm = {{"low", vec_json(clf.normalizer().low)}, {"high", vec_json(clf.normalizer().high)}};
  }
  return {
      {"features", clf.input_dim()},
      {"classes", clf.class_count()},
      {"hyperparameters", to_json(clf.hyperparameters())},
      {"normalizer", std::move(norm)},
      {"pending", clf.pending().size()},
      {"models", std::move(models)},
  };
}

std::string classifier_text(const Classifier& clf) {
  std::ostringstream o;
  const auto& hp = clf.hyperparameters();
  o << "features: " << clf.input_dim() << "\n";
  o << "classes: " << clf.class_count() << "\n";
  o << "mode: " << to_string(hp.mode) << "\n";
  o << "hyperparameters: beta=" << format_double(hp.beta) << " grades=" << hp.grades
    << " rho=" << format_double(hp.rho) << " delta1=" << format_double(hp.delta1)
    << " eta=" << format_double(hp.eta) << " n_history=" << hp.n_history << " gmm_components=" << hp.gmm_components
    << " seed=" << hp.seed << " normalize=" << (hp.normalize ? "true" : "false") << "\n";
  if (clf.normalizer().fitted()) {
    o << "normalizer low: " << join(clf.normalizer().low.transpose()) << "\n";
    o << "normalizer high: " << join(clf.normalizer().high.transpose()) << "\n";
  }
  o << "pending samples: " << clf.pending().size() << "\n";
  std::size_t idx = 0;
  for (const auto& m : clf.models()) {
    const auto& n = m.network();
    o << "\n[model " << ++idx << "] K=" << n.rule_count() << " steps=" << m.steps()
      << " ordering_violations=" << m.ordering_violations() << "\n";
    o << "  q_lower: " << join(n.q_lower.transpose()) << "\n";
    o << "  q_upper: " << join(n.q_upper.transpose()) << "\n";
    o << "  K history:";
    std::size_t k = 0;
    for (const auto s : m.growth_steps()) o << " " << ++k << "@" << s;
    o << "\n";
    std::size_t ri = 0;
    for (const auto& r : n.rules) {
      o << "  rule " << ++ri << "\n";
      o << "    mean: " << join(r.mean.transpose()) << "\n";
      for (Eigen::Index i = 0; i < r.input_dim(); ++i) {
        o << "    theta_upper[" << i + 1 << "]: " << join(r.jumps.upper.row(i)) << "\n";
        o << "    theta_lower[" << i + 1 << "]: " << join(r.jumps.lower.row(i)) << "\n";
      }
      o << "    |omega_upper|: " << format_double(r.omega_upper.norm()) << "\n";
      o << "    |omega_lower|: " << format_double(r.omega_lower.norm()) << "\n";
    }
  }
  return o.str();
}

int cmd_simulate(int tags, int antennas, std::size_t samples, std::uint64_t seed, const std::string& units,
                 const std::string& emission, const NoiseModel& noise, const std::string& out_path, std::ostream& out) {
  RadarConfig cfg = RadarConfig::smart_rack(tags, antennas);
  cfg.noise = noise;
  cfg.units = parse_units(units);
  cfg.emission = emission == "round-robin" ? Emission::round_robin : Emission::uniform;
  const auto records = generate_stream(cfg, samples, seed);
  write_csv(records, out_path);
  out << "wrote " << records.size() << " records to " << out_path << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("et2q", sink);
  logger->set_pattern("[%l] %v");
  const char* level = std::getenv("ET2Q_LOG");
  logger->set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct Restore {
    std::shared_ptr<spdlog::logger> prev;
    ~Restore() { spdlog::set_default_logger(prev); }
  } restore{previous};

  CLI::App app{"Evolving type-2 quantum fuzzy neural network for RFID localization streams", "et2q"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic RSS stream as CSV");
  int tags = 4;
  int antennas = 4;
  std::size_t samples = 25000;
  std::uint64_t sim_seed = 0;
  std::string units = "dbm";
  std::string emission = "uniform";
  std::string sim_out;
  NoiseModel noise;
  sim->add_option("--tags", tags, "reference tags (classes)")->capture_default_str()->check(CLI::Range(1, 1000));
  sim->add_option("--antennas", antennas, "reader ports (features)")->capture_default_str()->check(CLI::Range(1, 64));
  sim->add_option("--samples", samples, "records to emit")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "generator seed")->capture_default_str();
  sim->add_option("--units", units, "dbm or watts")->capture_default_str()->check(CLI::IsMember({"dbm", "watts"}));
  sim->add_option("--emission", emission, "uniform or round-robin")
      ->capture_default_str()
      ->check(CLI::IsMember({"uniform", "round-robin"}));
  sim->add_option("--fading-db", noise.fading_db, "log-normal fading std, dB")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--floor-watts", noise.floor_watts, "additive noise std, W")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--drift-db", noise.drift_db, "gain drift amplitude, dB")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--drift-period", noise.drift_period, "gain drift period, samples")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sim->add_option("--out", sim_out, "output CSV")->required();

  // train
  auto* train = app.add_subcommand("train", "train a classifier on a CSV stream in file order");
  Hyperparameters train_hp;
  std::string train_mode = "mm";
  std::string train_data;
  std::string train_model;
  std::string train_report;
  std::string train_trace;
  int train_classes = 0;
  bool train_omit_timing = false;
  add_hyperparameter_flags(*train, train_hp, train_mode);
  train->add_option("--data", train_data, "training CSV")->required();
  train->add_option("--model", train_model, "output model file")->required();
  train->add_option("--report", train_report, "JSON report path (default: stdout)");
  train->add_option("--trace", train_trace, "per-step CSV trace (step,rules,kind,error_norm)");
  train->add_option("--classes", train_classes, "class count (default: largest label)")->check(CLI::PositiveNumber);
  train->add_flag("--omit-timing", train_omit_timing, "write zero for wall-clock fields");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "cross-validation or periodic hold-out");
  Hyperparameters eval_hp;
  std::string eval_mode = "mm";
  std::string eval_data;
  std::string eval_report;
  std::string eval_predictions;
  std::size_t cv = 0;
  std::size_t holdout = 0;
  std::size_t jobs = 1;
  bool eval_omit_timing = false;
  add_hyperparameter_flags(*eval, eval_hp, eval_mode);
  eval->add_option("--data", eval_data, "CSV stream")->required();
  auto* cv_opt = eval->add_option("--cv", cv, "number of folds")->check(CLI::Range(2, 1000000));
  auto* ho_opt = eval->add_option("--holdout", holdout, "train on the first N records")->check(CLI::PositiveNumber);
  cv_opt->excludes(ho_opt);
  eval->add_option("--report", eval_report, "JSON report path (default: stdout)");
  eval->add_option("--predictions", eval_predictions, "per-prediction CSV (fold,record,label,predicted)");
  eval->add_option("--jobs", jobs, "folds evaluated in parallel")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_flag("--omit-timing", eval_omit_timing, "write zero for wall-clock fields");

  // predict
  auto* pred = app.add_subcommand("predict", "classify every row of a CSV");
  std::string pred_model;
  std::string pred_data;
  std::string pred_out;
  pred->add_option("--model", pred_model, "model file")->required();
  pred->add_option("--data", pred_data, "CSV to classify")->required();
  pred->add_option("--out", pred_out, "per-row CSV (default: stdout)");

  // inspect
  auto* insp = app.add_subcommand("inspect", "dump the rule base of a model file");
  std::string insp_model;
  bool insp_json = false;
  insp->add_option("--model", insp_model, "model file")->required();
  insp->add_flag("--json", insp_json, "full-precision JSON instead of text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      return cmd_simulate(tags, antennas, samples, sim_seed, units, emission, noise, sim_out, out);
    }
    if (*train) {
      train_hp.mode = parse_mode(train_mode);
      train_hp.validate();
      const auto table = load_csv_table(train_data);
      const int classes = std::max(train_classes, class_count_of(table.records));
      if (classes < 1) throw UsageError("no labels in " + train_data + "; pass --classes");
      if (table.features < 1) throw UsageError("no feature columns in " + train_data);
      for (const auto& r : table.records) {
        if (r.label > classes) throw UsageError("label " + std::to_string(r.label) + " exceeds --classes");
      }
      std::ofstream trace;
      if (!train_trace.empty()) {
        trace.open(train_trace, std::ios::binary);
        if (!trace) throw std::runtime_error("cannot open " + train_trace + " for writing");
        trace << "step,rules,kind,error_norm\n";
      }
      const auto start = std::chrono::steady_clock::now();
      Classifier clf(static_cast<int>(table.features), classes, train_hp);
      std::uint64_t step = 0;
      for (const auto& r : table.records) {
        const auto s = clf.train(r.features, r.label);
        ++step;
        if (trace.is_open()) {
          double e2 = 0.0;
          for (const auto& m : s.models) e2 += m.error_norm * m.error_norm;
          std::size_t k = 0;
          for (const auto c : clf.rule_counts()) k += c;
          trace << step << ',' << k << ',' << to_string(s.kind) << ',' << format_double(std::sqrt(e2)) << '\n';
        }
      }
      const auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      save_classifier(clf, train_model);

      const auto counts = clf.rule_counts();
      double mean = 0.0;
      double var = 0.0;
      for (const auto k : counts) mean += static_cast<double>(k);
      mean /= static_cast<double>(counts.size());
      for (const auto k : counts) var += (static_cast<double>(k) - mean) * (static_cast<double>(k) - mean);
      nlohmann::json growth = nlohmann::json::array();
      for (const auto& m : clf.models()) growth.push_back(m.growth_steps());
      const nlohmann::json report = {
          {"command", "train"},
          {"record_count", table.records.size()},
          {"features", table.features},
          {"classes", classes},
          {"rule_counts", counts},
          {"rule_count", {{"mean", mean}, {"std", std::sqrt(var / static_cast<double>(counts.size()))}}},
          {"growth_steps", std::move(growth)},
          {"execution_time_seconds", train_omit_timing ? 0.0 : seconds},
          {"hyperparameters", to_json(train_hp)},
      };
      if (train_report.empty()) {
        out << dump_json(report);
      } else {
        write_text(train_report, dump_json(report));
      }
      return 0;
    }
    if (*eval) {
      eval_hp.mode = parse_mode(eval_mode);
      eval_hp.validate();
      if (cv == 0 && holdout == 0) throw UsageError("evaluate needs --cv K or --holdout N");
      const auto records = load_csv(eval_data);
      EvaluationOptions opts;
      opts.jobs = jobs;
      opts.keep_predictions = !eval_predictions.empty();
      opts.include_timing = !eval_omit_timing;
      const auto report =
          cv ? cross_validate(records, cv, eval_hp, opts) : periodic_holdout(records, holdout, eval_hp, opts);
      if (!eval_predictions.empty()) {
        std::string text = "fold,record,label,predicted\n";
        for (const auto& f : report.folds) {
          for (const auto& p : f.predictions) {
            text += std::to_string(f.fold) + ',' + std::to_string(p.record_index + 1) + ',' + std::to_string(p.label) +
                    ',' + std::to_string(p.predicted) + '\n';
          }
        }
        write_text(eval_predictions, text);
      }
      auto j = to_json(report);
      for (auto& f : j["folds"]) f.erase("predictions");
      if (eval_report.empty()) {
        out << dump_json(j);
      } else {
        write_text(eval_report, dump_json(j));
        out << "classification rate " << format_double(report.classification_rate) << " +/- "
            << format_double(report.classification_rate_std) << ", rules per sub-model "
            << format_double(report.rule_mean) << "\n";
      }
      return 0;
    }
    if (*pred) {
      const Classifier clf = load_classifier(pred_model);
      const auto table = load_csv_table(pred_data);
      if (static_cast<int>(table.features) != clf.input_dim()) {
        throw UsageError("data has " + std::to_string(table.features) + " features, model expects " +
                         std::to_string(clf.input_dim()));
      }
      std::string text = "record,label,predicted\n";
      std::size_t correct = 0;
      for (std::size_t i = 0; i < table.records.size(); ++i) {
        const auto& r = table.records[i];
        const int label = clf.predict(r.features).label;
        correct += label == r.label ? 1 : 0;
        text += std::to_string(i + 1) + ',' + std::to_string(r.label) + ',' + std::to_string(label) + '\n';
      }
      const double rate =
          table.records.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(table.records.size());
      std::ostringstream summary;
      summary << "accuracy " << format_double(rate) << " (" << correct << "/" << table.records.size() << ")\n";
      if (pred_out.empty()) {
        out << text;
        err << summary.str();
      } else {
        write_text(pred_out, text);
        out << summary.str();
      }
      return 0;
    }
    if (*insp) {
      const Classifier clf = load_classifier(insp_model);
      out << (insp_json ? dump_json(classifier_json(clf)) : classifier_text(clf));
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace et2q::cli
