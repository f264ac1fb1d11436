#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "baomi/adam.hpp"
#include "baomi/bandit.hpp"
#include "baomi/fusion.hpp"
#include "baomi/metrics.hpp"
#include "baomi/models.hpp"
#include "baomi/records.hpp"

namespace baomi {

enum class ModelKind { fcn, cnn, cross_attention, baomi };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
inline bool is_fusion(ModelKind kind) {
  return kind == ModelKind::cross_attention || kind == ModelKind::baomi;
}

struct TrainConfig {
  ModelKind model = ModelKind::baomi;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  std::size_t n_folds = 5;
  AdamOptions adam;
  FcnConfig fcn;
  CnnConfig cnn;
  FusionConfig fusion;
  // z-score each input dimension with statistics of the training fold
  bool standardize = true;

  void validate() const;
};

/// One recording with its branch inputs; `b` is empty for single-branch models.
struct Sample {
  std::string recording_id;
  Label label = Label::absent;
  std::vector<double> a;
  std::vector<double> b;
};

class AlignmentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Joins two feature files on recording_id. Every id must appear in both with
// the same label; the first offender is named in the error.
std::vector<Sample> pair_records(const std::vector<FeatureRecord>& a,
                                 const std::vector<FeatureRecord>* b);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1 / std, or 1 for constant dimensions

  static Standardizer identity(std::size_t dim);
  static Standardizer fit(const std::vector<Sample>& samples, bool branch_b);
  void apply(std::span<double> values) const;
};

struct HeadWeightRow {
  std::size_t epoch;
  Direction direction;
  std::size_t head;
  double weight;
};

using ModelParams = std::variant<FcnParams, CnnParams, FusionModelParams>;

struct TrainedModel {
  ModelKind kind = ModelKind::baomi;
  std::size_t dim_a = 0;
  std::size_t dim_b = 0;
  ModelParams params;
  BanditState bandit;
  Standardizer norm_a;
  Standardizer norm_b;
  std::vector<double> epoch_losses;
  std::vector<HeadWeightRow> head_weights;

  std::vector<NamedTensor> parameters() const;
};

// Freshly initialized model; no training.
TrainedModel init_model(const TrainConfig& config, std::size_t dim_a, std::size_t dim_b,
                        std::uint64_t seed);

struct Batch {
  Tensor a;
  Tensor b;
  std::vector<std::size_t> labels;
};

Batch make_batch(const TrainedModel& model, const std::vector<Sample>& samples,
                 std::span<const std::size_t> indices);

// Logits and penultimate activations for one batch.
ModelOutput model_forward(const TrainedModel& model, const Batch& batch);

TrainedModel train_fold(const TrainConfig& config, const std::vector<Sample>& train,
                        std::size_t fold);

struct FoldResult {
  Metrics metrics;
  ConfusionMatrix confusion;
};

FoldResult evaluate(const TrainedModel& model, const std::vector<Sample>& test);

struct FoldReport {
  std::size_t fold = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  Metrics metrics;
  ConfusionMatrix confusion;
  std::vector<double> epoch_losses;
};

struct EvalReport {
  TrainConfig config;
  std::vector<FoldReport> folds;
  Metrics mean;
};

struct CrossValidation {
  EvalReport report;
  FoldAssignment assignment;
  std::vector<TrainedModel> models;  // indexed by fold
};

// Worker count for fold-parallel training: BAOMI_THREADS if set, else the
// hardware concurrency.
std::size_t worker_count();

CrossValidation run_cv(const TrainConfig& config, const std::vector<Sample>& dataset);

// CSV `recording_id,label,e0..` of penultimate activations.
void export_embeddings(const TrainedModel& model, const std::vector<Sample>& samples,
                       const std::filesystem::path& path);

// CSV `epoch,direction,head,weight`.
void write_head_weights_csv(const std::vector<HeadWeightRow>& rows,
                            const std::filesystem::path& path);

}  // namespace baomi
