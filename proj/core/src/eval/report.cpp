#include "dgtl/eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dgtl/errors.hpp"

namespace dgtl::eval {

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string render_report(const EvalReport& report) {
  std::ostringstream os;
  os << "dataset\t" << report.dataset_id << '\n';
  os << "method\t" << report.method_id << '\n';
  os << "score_percent\t" << fixed4(report.score_percent) << '\n';
  if (!report.per_seed_scores.empty()) {
    const auto stats = aggregate_scores(report.per_seed_scores);
    os << "score_mean\t" << fixed4(stats.mean) << '\n';
    os << "score_std\t" << fixed4(stats.stddev) << '\n';
    os << "per_seed";
    for (std::size_t i = 0; i < report.per_seed_scores.size(); ++i) {
      os << '\t' << report.seeds[i] << '=' << fixed4(report.per_seed_scores[i]);
    }
    os << '\n';
  } else if (!report.seeds.empty()) {
    os << "seed\t" << report.seeds.front() << '\n';
  }
  for (std::size_t c = 0; c < report.class_names.size(); ++c) {
    os << "class\t" << report.class_names[c] << '\t' << report.per_class_correct[c]
       << '\t' << report.per_class_total[c] << '\n';
  }
  return os.str();
}

std::string render_report_summary(const EvalReport& report) {
  std::ostringstream os;
  os << report.method_id << " on " << report.dataset_id << ": ";
  if (!report.per_seed_scores.empty()) {
    const auto stats = aggregate_scores(report.per_seed_scores);
    os << fixed4(stats.mean) << " +- " << fixed4(stats.stddev) << " (over "
       << report.per_seed_scores.size() << " seeds)";
  } else {
    os << fixed4(report.score_percent);
  }
  os << " [runtime " << fixed4(report.runtime_seconds) << "s]";
  return os.str();
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << render_report(report);
}

SeedStats aggregate_scores(std::span<const double> scores) {
  if (scores.empty()) throw ValueError("no scores to aggregate");
  SeedStats stats;
  for (double s : scores) stats.mean += s;
  stats.mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (double s : scores) var += (s - stats.mean) * (s - stats.mean);
  stats.stddev = std::sqrt(var / static_cast<double>(scores.size()));
  return stats;
}

}  // namespace dgtl::eval
