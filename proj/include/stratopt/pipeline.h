#pragma once

#include "stratopt/config.h"

#include <json.hpp>

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace stratopt {

inline constexpr std::string_view kToolVersion = "stratopt 1.0.0";

enum class Stage { synth, baseline, allocate, reduce, mc, report };
inline constexpr std::array<Stage, 6> kStages{Stage::synth, Stage::baseline, Stage::allocate,
                                              Stage::reduce, Stage::mc, Stage::report};

std::string_view stage_name(Stage stage) noexcept;
Stage stage_from_name(std::string_view name);

/// A stage failed; the manifest records it and earlier outputs stay on disk.
class StageError : public std::runtime_error {
  public:
    StageError(Stage stage, const std::string &message);
    [[nodiscard]] Stage stage() const noexcept { return stage_; }

  private:
    Stage stage_;
};

struct FileRecord {
    std::string path;
    std::string sha256;
    std::uintmax_t bytes{0};
};

struct StageTiming {
    std::string stage;
    double seconds{0.0};
};

struct RunManifest {
    std::string tool_version{kToolVersion};
    std::string config_hash;
    std::uint64_t seed{0};
    std::vector<StageTiming> timings;
    std::vector<FileRecord> files;
    std::string failed_stage;
    std::string error;
};

nlohmann::json to_json(const RunManifest &manifest);
RunManifest manifest_from_json(const nlohmann::json &j);
RunManifest read_manifest(const std::filesystem::path &run_dir);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path &path);

/// Output file names inside a run directory.
namespace files {
inline constexpr const char *population_csv = "population.csv";
inline constexpr const char *population_json = "population.json";
inline constexpr const char *baseline_sample = "baseline_sample.csv";
inline constexpr const char *baseline_summary = "baseline_summary.csv";
inline constexpr const char *problem = "problem.json";
inline constexpr const char *allocations = "allocations.csv";
inline constexpr const char *allocation_json = "allocation.json";
inline constexpr const char *master_sample = "master_sample.csv";
inline constexpr const char *gate_reports = "gate_reports.csv";
inline constexpr const char *prior_grid = "prior_grid.csv";
inline constexpr const char *reduction_json = "reduction.json";
inline constexpr const char *mc_raw = "mc_raw.csv";
inline constexpr const char *mc_summary = "mc_summary.csv";
inline constexpr const char *report = "report.md";
inline constexpr const char *manifest = "manifest.json";
inline constexpr const char *config = "config.resolved.json";
inline constexpr std::array<const char *, 8> tables{
    "tables/t1_sample_sizes.csv", "tables/t2_neyman_nso_cv.csv", "tables/t3_bethel_cv.csv",
    "tables/t4_hb_cv.csv",        "tables/t5_single_sample.csv", "tables/t6_mc_accuracy.csv",
    "tables/t7_mc_coverage.csv",  "tables/t8_cv_pass.csv"};
} // namespace files

/// Runs the stages first..last in order, each reading its inputs from the
/// run directory, and writes the manifest.
RunManifest run_pipeline(const RunConfig &config, Stage first = Stage::synth, Stage last = Stage::report);

/// Runs a single stage from persisted upstream artifacts.
RunManifest run_stage(const RunConfig &config, Stage stage);

struct CheckResult {
    std::string name;
    bool pass{false};
    std::string detail;
};

struct ReportResult {
    std::string markdown;
    std::vector<CheckResult> checks;
    [[nodiscard]] bool all_pass() const;
};

/// Writes the eight tables and report.md for a run directory that holds a
/// manifest and the stage outputs.
ReportResult write_report(const std::filesystem::path &run_dir, const AcceptanceChecks &checks);

} // namespace stratopt
