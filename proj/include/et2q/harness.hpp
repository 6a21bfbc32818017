#pragma once

// Synthetic RSS streams, CSV I/O and the two evaluation protocols
// (k-fold cross-validation and periodic hold-out).

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "et2q/learner.hpp"

namespace et2q {

struct StreamRecord {
  Eigen::VectorXd features;
  int label = 0;  // 1-based
  std::int64_t timestamp = 0;
};

using Point3 = std::array<double, 3>;

enum class RssUnits : std::uint8_t { dbm = 0, watts = 1 };
RssUnits parse_units(const std::string& text);

enum class Emission : std::uint8_t { uniform = 0, round_robin = 1 };

struct NoiseModel {
  double fading_db = 1.0;             // std of log-normal multiplicative fading, dB
  double floor_watts = 1e-9;          // std of additive Gaussian noise, W
  double drift_db = 0.5;              // amplitude of the slow sinusoidal gain drift, dB
  double drift_period = 5000.0;       // period of the drift, samples
};

/// Monostatic reader with I antenna ports observing reference tags. Defaults
/// place a 4-port reader 1 m in front of a 1.51 x 0.6 x 2.02 m rack with one
/// tag per quadrant.
struct RadarConfig {
  double transmit_power = 1.0;   // P_T, W
  double antenna_gain = 1.0;     // G_T
  double wavelength = 0.33;      // lambda, m (UHF ~ 915 MHz)
  double cross_section = 1.0;    // sigma, m^2
  std::vector<Point3> tag_positions;
  std::vector<Point3> antenna_positions;
  NoiseModel noise;
  RssUnits units = RssUnits::dbm;
  Emission emission = Emission::uniform;

  static RadarConfig smart_rack(int tags = 4, int antennas = 4);
  void validate() const;
};

/// P_T G_T^2 lambda^2 sigma / ((4 pi)^2 R^4). Throws std::domain_error for
/// R <= 0.
double radar_equation(double transmit_power, double antenna_gain, double wavelength, double cross_section,
                      double range);

struct NoiseDraws {
  double fading = 0.0;    // standard normal
  double additive = 0.0;  // standard normal
  double drift_phase = 0.0;
};

/// Received power (W) of tag `tag` at antenna `antenna` under the given
/// noise draws. Zero draws with zero phase give the noiseless value times
/// the drift gain at phase 0 (= 1).
double radar_rss(const RadarConfig& config, std::size_t tag, std::size_t antenna, const NoiseDraws& draws);

double watts_to_dbm(double watts);

std::vector<StreamRecord> generate_stream(const RadarConfig& config, std::size_t samples, std::uint64_t seed);

struct CsvError : std::runtime_error {
  CsvError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

struct CsvTable {
  std::size_t features = 0;  // from the header, known even with no rows
  std::vector<StreamRecord> records;
};

CsvTable parse_csv_table(const std::string& text);
CsvTable load_csv_table(const std::filesystem::path& path);
std::vector<StreamRecord> load_csv(const std::filesystem::path& path);
std::vector<StreamRecord> parse_csv(const std::string& text);
void write_csv(const std::vector<StreamRecord>& records, const std::filesystem::path& path);
std::string format_csv(const std::vector<StreamRecord>& records);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  std::size_t support = 0;
};

struct PredictionTrace {
  std::size_t record_index = 0;
  int label = 0;
  int predicted = 0;
};

struct StepTrace {
  std::uint64_t step = 0;
  std::size_t rules = 0;  // summed over sub-models
  StepKind kind = StepKind::warmup;
  double error_norm = 0.0;
};

struct FoldReport {
  std::size_t fold = 0;
  std::size_t train_count = 0;
  std::size_t validation_count = 0;
  std::size_t correct = 0;
  double classification_rate = 0.0;
  std::vector<std::size_t> rule_counts;  // per sub-model
  double rule_mean = 0.0;
  double rule_std = 0.0;
  double execution_seconds = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<PredictionTrace> predictions;
};

struct EvaluationReport {
  std::string protocol;  // "cross_validation" or "periodic_holdout"
  std::size_t record_count = 0;
  double classification_rate = 0.0;
  double classification_rate_std = 0.0;
  double rule_mean = 0.0;
  double rule_std = 0.0;
  double execution_seconds = 0.0;
  double execution_seconds_std = 0.0;
  std::vector<FoldReport> folds;
  Hyperparameters hp;
};

struct EvaluationOptions {
  std::size_t jobs = 1;
  bool keep_predictions = false;
  bool include_timing = true;  // false zeroes wall-clock fields for byte-stable reports
};

/// Train on everything except fold f (stream order preserved), validate on
/// fold f. Fold membership comes from a seeded shuffle.
EvaluationReport cross_validate(const std::vector<StreamRecord>& records, std::size_t folds, const Hyperparameters& hp,
                                const EvaluationOptions& options = {});

/// First n_train records train, the rest validate.
EvaluationReport periodic_holdout(const std::vector<StreamRecord>& records, std::size_t n_train,
                                  const Hyperparameters& hp, const EvaluationOptions& options = {});

/// Partition of [0, count) into `folds` disjoint index sets.
std::vector<std::vector<std::size_t>> fold_partition(std::size_t count, std::size_t folds, std::uint64_t seed);

/// Number of distinct labels needed to cover the records (max label).
int class_count_of(const std::vector<StreamRecord>& records);

/// Trains a fresh classifier on the records in order; `on_step` is called
/// after every sample.
Classifier train_classifier(const std::vector<StreamRecord>& records, const Hyperparameters& hp,
                            const std::function<void(const StepTrace&)>& on_step = {});

nlohmann::json to_json(const EvaluationReport& report);
nlohmann::json to_json(const Hyperparameters& hp);

}  // namespace et2q
