#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dgtl::eval {

// One evaluation outcome. Everything except runtime_seconds is
// deterministic under a fixed seed; runtime is shown in the human-readable
// summary but kept out of the on-disk report so reruns are byte-identical.
struct EvalReport {
  std::string dataset_id;
  std::string method_id;
  double score_percent = 0.0;
  std::vector<std::string> class_names;
  std::vector<int> per_class_total;
  std::vector<int> per_class_correct;
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed_scores;
  double runtime_seconds = 0.0;
};

void write_report(const std::filesystem::path& path, const EvalReport& report);
std::string render_report(const EvalReport& report);          // file content
std::string render_report_summary(const EvalReport& report);  // console, adds runtime

struct SeedStats {
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};
SeedStats aggregate_scores(std::span<const double> scores);

}  // namespace dgtl::eval
