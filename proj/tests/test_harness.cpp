#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "et2q/harness.hpp"
#include "et2q/serialization.hpp"

using namespace et2q;

namespace {

RadarConfig quiet_rack() {
  RadarConfig c = RadarConfig::smart_rack();
  c.noise = NoiseModel{0.0, 0.0, 0.0, 5000.0};
  return c;
}

}  // namespace

TEST(Radar, UnitConfiguration) {
  EXPECT_NEAR(radar_equation(1, 1, 0.33, 1, 1), 0.0006896173061656615, 1e-18);
  EXPECT_THROW(radar_equation(1, 1, 0.33, 1, 0), std::domain_error);
  EXPECT_THROW(radar_equation(1, 1, 0.33, 1, -1), std::domain_error);
}

TEST(Radar, ScalingLaws) {
  for (double r : {0.3, 1.0, 2.7}) {
    const double base = radar_equation(1, 1, 0.33, 1, r);
    EXPECT_NEAR(base / radar_equation(1, 1, 0.33, 1, 2 * r), 16.0, 16.0 * 1e-12);
    EXPECT_NEAR(radar_equation(1, 2, 0.33, 1, r) / base, 4.0, 4.0 * 1e-12);
    EXPECT_NEAR(radar_equation(3, 1, 0.33, 1, r) / base, 3.0, 3.0 * 1e-12);
  }
}

TEST(Radar, StrictlyDecreasingInRange) {
  double last = INFINITY;
  for (double r = 0.1; r < 10.0; r *= 1.07) {
    const double p = radar_equation(1, 1, 0.33, 1, r);
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(Radar, ZeroDrawsGiveTheCleanPower) {
  const auto c = RadarConfig::smart_rack();
  const auto& t = c.tag_positions[2];
  const auto& a = c.antenna_positions[1];
  const double r = std::sqrt((t[0] - a[0]) * (t[0] - a[0]) + (t[1] - a[1]) * (t[1] - a[1]) + (t[2] - a[2]) * (t[2] - a[2]));
  EXPECT_DOUBLE_EQ(radar_rss(c, 2, 1, NoiseDraws{}), radar_equation(1, 1, 0.33, 1, r));
  EXPECT_THROW(radar_rss(c, 4, 0, NoiseDraws{}), std::out_of_range);
}

TEST(Radar, DbmConversion) {
  EXPECT_DOUBLE_EQ(watts_to_dbm(1e-3), 0.0);
  EXPECT_DOUBLE_EQ(watts_to_dbm(1.0), 30.0);
  EXPECT_THROW(watts_to_dbm(0.0), std::domain_error);
}

TEST(SmartRack, Layout) {
  const auto c = RadarConfig::smart_rack();
  ASSERT_EQ(c.tag_positions.size(), 4u);
  ASSERT_EQ(c.antenna_positions.size(), 4u);
  for (const auto& t : c.tag_positions) {
    EXPECT_GT(t[0], 0.0);
    EXPECT_LT(t[0], 1.51);
    EXPECT_GT(t[2], 0.0);
    EXPECT_LT(t[2], 2.02);
  }
  EXPECT_THROW(RadarConfig::smart_rack(0), std::invalid_argument);
  RadarConfig bad = c;
  bad.wavelength = 0.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(GenerateStream, ClassCountsWithinTheBinomialBand) {
  const auto c = RadarConfig::smart_rack();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = generate_stream(c, 400, seed);
    ASSERT_EQ(s.size(), 400u);
    std::array<int, 4> counts{};
    for (const auto& r : s) ++counts[static_cast<std::size_t>(r.label - 1)];
    for (int n : counts) {
      EXPECT_GE(n, 60);
      EXPECT_LE(n, 140);
    }
  }
}

TEST(GenerateStream, RoundRobinAndTimestamps) {
  auto c = RadarConfig::smart_rack(3, 2);
  c.emission = Emission::round_robin;
  const auto s = generate_stream(c, 9, 1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s[i].label, static_cast<int>(i % 3) + 1);
    EXPECT_EQ(s[i].timestamp, static_cast<std::int64_t>(i));
    EXPECT_EQ(s[i].features.size(), 2);
  }
}

TEST(GenerateStream, DeterministicPerSeed) {
  const auto c = RadarConfig::smart_rack();
  EXPECT_EQ(format_csv(generate_stream(c, 500, 3)), format_csv(generate_stream(c, 500, 3)));
  EXPECT_NE(format_csv(generate_stream(c, 500, 3)), format_csv(generate_stream(c, 500, 4)));
}

TEST(GenerateStream, UnitsSelectDbmOrWatts) {
  auto c = quiet_rack();
  const auto dbm = generate_stream(c, 10, 2);
  c.units = RssUnits::watts;
  const auto w = generate_stream(c, 10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    for (Eigen::Index a = 0; a < 4; ++a) EXPECT_NEAR(dbm[i].features(a), watts_to_dbm(w[i].features(a)), 1e-12);
  }
}

TEST(GenerateStream, NoiselessClassesAreSeparable) {
  const auto s = generate_stream(quiet_rack(), 400, 5);
  // Nearest-centroid oracle: each class collapses onto one point.
  std::vector<Eigen::VectorXd> centroid(4, Eigen::VectorXd::Zero(4));
  std::vector<int> n(4, 0);
  for (const auto& r : s) {
    centroid[static_cast<std::size_t>(r.label - 1)] += r.features;
    ++n[static_cast<std::size_t>(r.label - 1)];
  }
  for (int c = 0; c < 4; ++c) centroid[static_cast<std::size_t>(c)] /= n[static_cast<std::size_t>(c)];
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      EXPECT_GT((centroid[static_cast<std::size_t>(a)] - centroid[static_cast<std::size_t>(b)]).norm(), 0.1);
    }
  }
  int nearest_hits = 0;
  for (const auto& r : s) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 4; ++c) {
      if ((r.features - centroid[c]).norm() < (r.features - centroid[best]).norm()) best = c;
    }
    nearest_hits += static_cast<int>(best) + 1 == r.label;
  }
  EXPECT_EQ(nearest_hits, 400);

  const Classifier model = train_classifier(s, Hyperparameters{});
  int replay = 0;
  for (const auto& r : s) replay += model.predict(r.features).label == r.label;
  EXPECT_EQ(replay, 400);
}

TEST(Csv, RoundTripIsExact) {
  const auto s = generate_stream(RadarConfig::smart_rack(), 200, 8);
  const auto back = parse_csv(format_csv(s));
  ASSERT_EQ(back.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(back[i].features, s[i].features);
    EXPECT_EQ(back[i].label, s[i].label);
    EXPECT_EQ(back[i].timestamp, static_cast<std::int64_t>(i));
  }
  const auto path = std::filesystem::temp_directory_path() / "et2q_csv_test.csv";
  write_csv(s, path);
  EXPECT_EQ(format_csv(load_csv(path)), format_csv(s));
  std::filesystem::remove(path);
}

TEST(Csv, AwkwardValuesRoundTrip) {
  StreamRecord r;
  r.features.resize(4);
  r.features << 0.1, 1e-300, -5e-324, 123456789.123456789;
  r.label = 2;
  const auto back = parse_csv(format_csv({r}));
  EXPECT_EQ(back[0].features, r.features);
}

TEST(Csv, ParsesExponentNotation) {
  const auto r = parse_csv("x_1,x_2,label\n1e-3, -2.5E+2 ,3\n");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].features(0), 0.001);
  EXPECT_EQ(r[0].features(1), -250.0);
  EXPECT_EQ(r[0].label, 3);
}

TEST(Csv, ToleratesCrlfAndBlankLines) {
  const auto r = parse_csv("x_1,label\r\n0.5,1\r\n\r\n0.25,2\r\n");
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].features(0), 0.25);
}

TEST(Csv, HeaderOnlyKeepsTheFeatureCount) {
  const auto t = parse_csv_table("x_1,x_2,x_3,label\n");
  EXPECT_EQ(t.features, 3u);
  EXPECT_TRUE(t.records.empty());
}

TEST(Csv, RejectsMalformedInput) {
  auto line_of = [](const std::string& text) {
    try {
      parse_csv(text);
    } catch (const CsvError& e) {
      return e.line_number;
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of(""), 1u);
  EXPECT_EQ(line_of("x_1,x_2\n1,2\n"), 1u);  // no label column
  EXPECT_EQ(line_of("x_1,label\n1,1\n2\n"), 3u);
  EXPECT_EQ(line_of("x_1,label\n1,1\nabc,1\n"), 3u);
  EXPECT_EQ(line_of("x_1,label\n1,0\n"), 2u);
  EXPECT_EQ(line_of("x_1,label\n1,1.5\n"), 2u);
  EXPECT_EQ(line_of("x_1,label\nnan,1\n"), 2u);
  EXPECT_EQ(line_of("x_1,label\n1,1,1\n"), 2u);
  EXPECT_THROW(load_csv("/nonexistent/et2q.csv"), std::runtime_error);
}

TEST(FoldPartition, DisjointCoveringAndBalanced) {
  const auto f = fold_partition(100, 10, 3);
  ASSERT_EQ(f.size(), 10u);
  std::vector<int> seen(100, 0);
  for (const auto& fold : f) {
    EXPECT_EQ(fold.size(), 10u);
    EXPECT_TRUE(std::is_sorted(fold.begin(), fold.end()));
    for (auto i : fold) ++seen[i];
  }
  EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int n) { return n == 1; }));
  for (std::size_t count : {7u, 23u, 101u}) {
    std::size_t total = 0;
    for (const auto& fold : fold_partition(count, 7, 1)) {
      EXPECT_GE(fold.size(), count / 7);
      EXPECT_LE(fold.size(), count / 7 + 1);
      total += fold.size();
    }
    EXPECT_EQ(total, count);
  }
  EXPECT_EQ(fold_partition(50, 5, 9), fold_partition(50, 5, 9));
  EXPECT_THROW(fold_partition(100, 1, 0), std::invalid_argument);
  EXPECT_THROW(fold_partition(5, 10, 0), std::invalid_argument);
}

namespace {

std::vector<StreamRecord> rack_stream(std::size_t n, std::uint64_t seed) {
  return generate_stream(RadarConfig::smart_rack(), n, seed);
}

}  // namespace

TEST(CrossValidate, MetricsAreConsistent) {
  const auto s = rack_stream(600, 2);
  EvaluationOptions opt;
  opt.keep_predictions = true;
  const auto rep = cross_validate(s, 5, Hyperparameters{}, opt);
  EXPECT_EQ(rep.protocol, "cross_validation");
  ASSERT_EQ(rep.folds.size(), 5u);
  double sum = 0.0;
  std::size_t validated = 0;
  for (const auto& f : rep.folds) {
    EXPECT_EQ(f.train_count + f.validation_count, 600u);
    EXPECT_EQ(f.predictions.size(), f.validation_count);
    std::size_t correct = 0;
    for (const auto& p : f.predictions) correct += p.label == p.predicted;
    EXPECT_EQ(correct, f.correct);
    EXPECT_DOUBLE_EQ(f.classification_rate * static_cast<double>(f.validation_count), static_cast<double>(f.correct));
    EXPECT_GE(f.classification_rate, 0.0);
    EXPECT_LE(f.classification_rate, 1.0);
    EXPECT_EQ(f.rule_counts.size(), 4u);
    sum += f.classification_rate;
    validated += f.validation_count;
  }
  EXPECT_EQ(validated, 600u);
  EXPECT_NEAR(rep.classification_rate, sum / 5, 1e-15);
  EXPECT_THROW(cross_validate(s, 1, Hyperparameters{}), std::invalid_argument);
}

TEST(CrossValidate, ParallelFoldsMatchSerial) {
  const auto s = rack_stream(400, 6);
  EvaluationOptions serial;
  serial.include_timing = false;
  EvaluationOptions parallel = serial;
  parallel.jobs = 3;
  EXPECT_EQ(to_json(cross_validate(s, 4, Hyperparameters{}, serial)).dump(),
            to_json(cross_validate(s, 4, Hyperparameters{}, parallel)).dump());
}

TEST(CrossValidate, SeparableStreamScoresHigh) {
  auto c = quiet_rack();
  c.noise.fading_db = 0.2;
  const auto rep = cross_validate(generate_stream(c, 1000, 11), 10, Hyperparameters{});
  EXPECT_GE(rep.classification_rate, 0.95);
}

TEST(PeriodicHoldout, SplitAndDeterminism) {
  const auto s = rack_stream(1000, 4);
  EvaluationOptions opt;
  opt.keep_predictions = true;
  opt.include_timing = false;
  const auto rep = periodic_holdout(s, 200, Hyperparameters{}, opt);
  EXPECT_EQ(rep.protocol, "periodic_holdout");
  ASSERT_EQ(rep.folds.size(), 1u);
  EXPECT_EQ(rep.folds[0].train_count, 200u);
  EXPECT_EQ(rep.folds[0].validation_count, 800u);
  ASSERT_EQ(rep.folds[0].predictions.size(), 800u);
  EXPECT_EQ(rep.folds[0].predictions.front().record_index, 200u);
  EXPECT_EQ(rep.execution_seconds, 0.0);
  EXPECT_EQ(to_json(rep).dump(), to_json(periodic_holdout(s, 200, Hyperparameters{}, opt)).dump());
  EXPECT_THROW(periodic_holdout(s, 1000, Hyperparameters{}), std::invalid_argument);
}

TEST(PeriodicHoldout, ValidationLeavesTheModelUntouched) {
  const auto s = rack_stream(700, 5);
  const std::vector<StreamRecord> train(s.begin(), s.begin() + 500);
  const Classifier model = train_classifier(train, Hyperparameters{});
  const auto before = serialize(model);
  for (std::size_t i = 500; i < s.size(); ++i) model.predict(s[i].features);
  EXPECT_EQ(serialize(model), before);
  // The protocol's rule counts describe the model trained on the prefix alone.
  const auto rep = periodic_holdout(s, 500, Hyperparameters{});
  EXPECT_EQ(rep.folds[0].rule_counts, model.rule_counts());
}

TEST(Report, JsonSchema) {
  const auto rep = periodic_holdout(rack_stream(300, 1), 200, Hyperparameters{});
  const auto j = to_json(rep);
  for (const char* key : {"protocol", "record_count", "classification_rate", "rule_count", "execution_time_seconds",
                          "hyperparameters", "folds", "metadata"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["record_count"], 300);
  EXPECT_EQ(j["hyperparameters"]["rho"], 0.65);
  EXPECT_EQ(j["hyperparameters"]["mode"], "mm");
  const auto& fold = j["folds"][0];
  EXPECT_EQ(fold["validation_count"], 100);
  EXPECT_EQ(fold["extensions"]["per_class"].size(), 4u);
  EXPECT_FALSE(fold.contains("predictions"));
}

TEST(TrainClassifier, ReportsEveryStep) {
  const auto s = rack_stream(120, 9);
  std::vector<StepTrace> trace;
  const auto model = train_classifier(s, Hyperparameters{}, [&](const StepTrace& t) { trace.push_back(t); });
  ASSERT_EQ(trace.size(), 120u);
  EXPECT_EQ(trace.front().step, 1u);
  EXPECT_EQ(trace.front().kind, StepKind::grew);
  const auto k = model.rule_counts();
  EXPECT_EQ(trace.back().rules, std::accumulate(k.begin(), k.end(), std::size_t{0}));
  EXPECT_EQ(class_count_of(s), 4);
}
