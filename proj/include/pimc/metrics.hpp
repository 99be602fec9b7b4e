#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pimc {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::int32_t> classes;               // evaluated labels, ascending
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction] over `classes`
  std::vector<std::size_t> support;                 // truth counts per class
  std::vector<std::int32_t> excluded;               // labels dropped (absent from the train split)
};

struct RegressionMetrics {
  std::string name;
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  std::size_t count = 0;
};

struct MetricsReport {
  std::string task;  // pixel-cls | forecast | landcover
  std::string mode;  // frozen | finetune
  std::string run;   // free label used by compare_runs
  std::size_t samples = 0;
  std::size_t skipped = 0;
  std::optional<ClassificationMetrics> classification;
  std::vector<RegressionMetrics> regression;  // per index, then "overall"
};

/// Metrics over `classes`; predictions outside `classes` still count as
/// errors. Balanced accuracy averages recall over classes with support.
ClassificationMetrics classification_metrics(std::span<const std::int32_t> truth,
                                             std::span<const std::int32_t> predicted,
                                             std::vector<std::int32_t> classes);

/// Accumulates in double precision; rmse = sqrt(mse).
RegressionMetrics regression_metrics(std::string name, std::span<const float> predicted,
                                     std::span<const float> target);

std::string report_json(const MetricsReport& report);
void write_report_json(const MetricsReport& report, const std::filesystem::path& path);
void write_report_csv(const MetricsReport& report, const std::filesystem::path& path);
void write_confusion_csv(const ClassificationMetrics& m, const std::filesystem::path& path);
MetricsReport read_report_json(const std::filesystem::path& path);

struct RankRow {
  std::size_t rank = 0;
  std::string run;
  std::string task;
  std::string mode;
  std::string metric;  // balanced_accuracy (higher is better) or mae (lower is better)
  double value = 0.0;
};

/// Ranks reports per task; ties broken by run name, then mode.
std::vector<RankRow> compare_runs(const std::vector<MetricsReport>& reports);
void write_ranking_csv(const std::vector<RankRow>& rows, const std::filesystem::path& path);

}  // namespace pimc
