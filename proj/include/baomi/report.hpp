#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "baomi/training.hpp"

namespace baomi {

class ReportSchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);

// {config, seed, folds: [{fold, acc, ma_f1, wa_f1, confusion, ...}], mean: {acc, ma_f1, wa_f1}}
nlohmann::json report_to_json(const EvalReport& report);

/// The parts of a report the renderer needs, validated against the schema.
struct ReportSummary {
  nlohmann::json config;
  std::uint64_t seed = 0;
  struct Fold {
    std::size_t fold = 0;
    Metrics metrics;
    ConfusionMatrix confusion;
  };
  std::vector<Fold> folds;
  Metrics mean;
};

ReportSummary parse_report(const nlohmann::json& j);

// Per-fold rows and a mean row, metrics in percent with two decimals.
std::string render_report(const ReportSummary& report);

// Writes <stem>.params (little-endian f32, parameters back to back) and the
// sidecar <stem>.json naming each parameter's shape and element offset, plus
// bandit state and standardization statistics.
void save_checkpoint(const TrainedModel& model, const TrainConfig& config,
                     const std::filesystem::path& stem);

struct LoadedCheckpoint {
  TrainConfig config;
  TrainedModel model;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& sidecar);

}  // namespace baomi
