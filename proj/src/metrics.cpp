#include "pimc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>

#include "pimc/errors.hpp"

namespace pimc {

ClassificationMetrics classification_metrics(std::span<const std::int32_t> truth,
                                             std::span<const std::int32_t> predicted,
                                             std::vector<std::int32_t> classes) {
  if (truth.size() != predicted.size()) throw DimensionError("classification_metrics: length mismatch");
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  ClassificationMetrics m;
  m.classes = classes;
  const std::size_t k = classes.size();
  m.confusion.assign(k, std::vector<std::size_t>(k, 0));
  m.support.assign(k, 0);
  std::map<std::int32_t, std::size_t> slot;
  for (std::size_t i = 0; i < k; ++i) slot[classes[i]] = i;

  std::size_t correct = 0, total = 0;
  std::vector<std::size_t> predicted_count(k, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto t = slot.find(truth[i]);
    if (t == slot.end()) continue;
    ++total;
    ++m.support[t->second];
    auto p = slot.find(predicted[i]);
    if (p != slot.end()) {
      ++m.confusion[t->second][p->second];
      ++predicted_count[p->second];
    }
    correct += truth[i] == predicted[i];
  }
  if (total == 0) return m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);

  double recall_sum = 0.0, f1_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (m.support[c] == 0) continue;
    ++present;
    const double tp = static_cast<double>(m.confusion[c][c]);
    const double recall = tp / static_cast<double>(m.support[c]);
    const double precision = predicted_count[c] ? tp / static_cast<double>(predicted_count[c]) : 0.0;
    recall_sum += recall;
    f1_sum += (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  m.balanced_accuracy = recall_sum / static_cast<double>(present);
  m.macro_f1 = f1_sum / static_cast<double>(present);
  return m;
}

RegressionMetrics regression_metrics(std::string name, std::span<const float> predicted,
                                     std::span<const float> target) {
  if (predicted.size() != target.size()) throw DimensionError("regression_metrics: length mismatch");
  RegressionMetrics r;
  r.name = std::move(name);
  r.count = target.size();
  if (r.count == 0) return r;
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double e = static_cast<double>(predicted[i]) - static_cast<double>(target[i]);
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  r.mae = abs_sum / static_cast<double>(r.count);
  r.mse = sq_sum / static_cast<double>(r.count);
  r.rmse = std::sqrt(r.mse);
  return r;
}

namespace {

nlohmann::ordered_json to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["task"] = r.task;
  j["mode"] = r.mode;
  j["run"] = r.run;
  j["samples"] = r.samples;
  j["skipped"] = r.skipped;
  if (r.classification) {
    const auto& c = *r.classification;
    j["accuracy"] = c.accuracy;
    j["balanced_accuracy"] = c.balanced_accuracy;
    j["macro_f1"] = c.macro_f1;
    j["classes"] = c.classes;
    j["support"] = c.support;
    j["confusion"] = c.confusion;
    j["excluded_classes"] = c.excluded;
  }
  if (!r.regression.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& g : r.regression) {
      arr.push_back({{"name", g.name}, {"mae", g.mae}, {"mse", g.mse}, {"rmse", g.rmse}, {"count", g.count}});
    }
    j["regression"] = arr;
  }
  return j;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string report_json(const MetricsReport& report) { return to_json(report).dump(2); }

void write_report_json(const MetricsReport& report, const std::filesystem::path& path) {
  open_out(path) << report_json(report) << '\n';
}

void write_report_csv(const MetricsReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "task,mode,metric,value\n";
  auto row = [&](const std::string& metric, double v) {
    out << report.task << ',' << report.mode << ',' << metric << ',' << num(v) << '\n';
  };
  if (report.classification) {
    row("accuracy", report.classification->accuracy);
    row("balanced_accuracy", report.classification->balanced_accuracy);
    row("macro_f1", report.classification->macro_f1);
  }
  for (const auto& g : report.regression) {
    row(g.name + ".mae", g.mae);
    row(g.name + ".mse", g.mse);
    row(g.name + ".rmse", g.rmse);
  }
}

void write_confusion_csv(const ClassificationMetrics& m, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "truth\\pred";
  for (auto c : m.classes) out << ',' << c;
  out << ",support\n";
  for (std::size_t i = 0; i < m.classes.size(); ++i) {
    out << m.classes[i];
    for (auto v : m.confusion[i]) out << ',' << v;
    out << ',' << m.support[i] << '\n';
  }
}

MetricsReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("metrics report not found: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  MetricsReport r;
  r.task = j.at("task").get<std::string>();
  r.mode = j.value("mode", "");
  r.run = j.value("run", path.parent_path().filename().string());
  r.samples = j.value("samples", std::size_t{0});
  r.skipped = j.value("skipped", std::size_t{0});
  if (j.contains("balanced_accuracy")) {
    ClassificationMetrics c;
    c.accuracy = j.at("accuracy").get<double>();
    c.balanced_accuracy = j.at("balanced_accuracy").get<double>();
    c.macro_f1 = j.value("macro_f1", 0.0);
    c.classes = j.value("classes", std::vector<std::int32_t>{});
    c.support = j.value("support", std::vector<std::size_t>{});
    c.confusion = j.value("confusion", std::vector<std::vector<std::size_t>>{});
    c.excluded = j.value("excluded_classes", std::vector<std::int32_t>{});
    r.classification = c;
  }
  if (j.contains("regression")) {
    for (const auto& g : j.at("regression")) {
      r.regression.push_back({g.at("name").get<std::string>(), g.at("mae").get<double>(), g.at("mse").get<double>(),
                              g.at("rmse").get<double>(), g.value("count", std::size_t{0})});
    }
  }
  return r;
}

std::vector<RankRow> compare_runs(const std::vector<MetricsReport>& reports) {
  std::vector<RankRow> rows;
  for (const auto& r : reports) {
    RankRow row;
    row.run = r.run;
    row.task = r.task;
    row.mode = r.mode;
    if (r.classification) {
      row.metric = "balanced_accuracy";
      row.value = r.classification->balanced_accuracy;
    } else if (!r.regression.empty()) {
      row.metric = "mae";
      row.value = r.regression.back().mae;
    } else {
      continue;
    }
    rows.push_back(row);
  }
  std::sort(rows.begin(), rows.end(), [](const RankRow& a, const RankRow& b) {
    if (a.task != b.task) return a.task < b.task;
    if (a.value != b.value) return a.metric == "mae" ? a.value < b.value : a.value > b.value;
    if (a.run != b.run) return a.run < b.run;
    return a.mode < b.mode;
  });
  std::string task;
  std::size_t rank = 0;
  for (auto& row : rows) {
    rank = row.task == task ? rank + 1 : 1;
    task = row.task;
    row.rank = rank;
  }
  return rows;
}

void write_ranking_csv(const std::vector<RankRow>& rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "task,rank,run,mode,metric,value\n";
  for (const auto& r : rows) {
    out << r.task << ',' << r.rank << ',' << r.run << ',' << r.mode << ',' << r.metric << ',' << num(r.value)
        << '\n';
  }
}

}  // namespace pimc
