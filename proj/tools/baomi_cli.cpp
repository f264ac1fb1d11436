// Command-line driver: feature extraction, cross-validated training, report
// rendering and embedding export.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "baomi/audio.hpp"
#include "baomi/records.hpp"
#include "baomi/report.hpp"
#include "baomi/spectral.hpp"
#include "baomi/training.hpp"

namespace fs = std::filesystem;
using namespace baomi;

namespace {

struct FeaturesArgs {
  std::string manifest;
  std::string kind = "mfcc";
  std::string out;
};

struct TrainArgs {
  std::string model = "baomi";
  std::string a;
  std::string b;
  std::string out_dir = ".";
  std::string embeddings;
  bool no_checkpoints = false;
  bool no_standardize = false;
  TrainConfig config;
};

struct ExportArgs {
  std::string checkpoint;
  std::string a;
  std::string b;
  std::string out;
};

int run_features(const FeaturesArgs& args) {
  const DatasetManifest manifest = read_manifest(args.manifest);
  const FilteredManifest filtered = filter_known_labels(manifest);
  for (const ManifestRow& row : filtered.skipped_unknown) {
    std::cerr << "warning: skipping " << row.recording_id << " (label " << row.raw_label << ")\n";
  }
  if (filtered.kept.empty()) {
    std::cerr << "error: no Present/Absent rows in " << args.manifest << "\n";
    return 1;
  }

  std::vector<AudioClip> clips;
  std::vector<Label> labels;
  std::vector<std::string> errors;
  for (const ManifestRow& row : filtered.kept) {
    try {
      AudioClip clip = load_wav(row.wav_path);
      clip.recording_id = row.recording_id;
      clips.push_back(std::move(clip));
      labels.push_back(*parse_label(row.raw_label));
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  }
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "error: " << e << "\n";
    return 1;
  }

  clips = pad_to_max(std::move(clips));
  const SpectralConfig cfg;
  std::vector<FeatureRecord> records;
  for (std::size_t i = 0; i < clips.size(); ++i) {
    try {
      const std::vector<double> v = args.kind == "mfcc" ? mfcc(clips[i], cfg) : lfcc(clips[i], cfg);
      records.push_back({clips[i].recording_id, labels[i], std::vector<float>(v.begin(), v.end())});
    } catch (const std::exception& e) {
      errors.push_back(clips[i].recording_id + ": " + e.what());
    }
  }
  if (!errors.empty()) {
    for (const auto& e : errors) std::cerr << "error: " << e << "\n";
    return 1;
  }
  write_fvec(records, args.out);
  std::cout << "records " << records.size() << " dim " << records.front().values.size() << " -> "
            << args.out << "\n";
  return 0;
}

int run_train(TrainArgs& args) {
  TrainConfig& config = args.config;
  config.model = parse_model_kind(args.model);
  config.standardize = !args.no_standardize;
  config.validate();
  if (is_fusion(config.model) && args.b.empty()) {
    std::cerr << "error: model " << args.model << " fuses two feature files; pass --b\n";
    return 1;
  }
  if (!is_fusion(config.model) && !args.b.empty()) {
    std::cerr << "error: model " << args.model << " takes a single feature file; drop --b\n";
    return 1;
  }

  const auto records_a = read_fvec(args.a);
  std::optional<std::vector<FeatureRecord>> records_b;
  if (!args.b.empty()) records_b = read_fvec(args.b);
  const std::vector<Sample> dataset =
      pair_records(records_a, records_b ? &*records_b : nullptr);

  std::cerr << "training " << args.model << " on " << dataset.size() << " recordings, "
            << config.n_folds << " folds, " << config.epochs << " epochs, seed " << config.seed
            << "\n";
  const CrossValidation cv = run_cv(config, dataset);

  const fs::path out_dir(args.out_dir);
  fs::create_directories(out_dir);
  const auto report_json = report_to_json(cv.report);
  std::ofstream(out_dir / "report.json") << report_json.dump(2) << "\n";
  const std::string table = render_report(parse_report(report_json));
  std::ofstream(out_dir / "report.txt") << table;

  for (std::size_t fold = 0; fold < cv.models.size(); ++fold) {
    const std::string stem = "fold" + std::to_string(fold);
    if (!args.no_checkpoints) save_checkpoint(cv.models[fold], config, out_dir / stem);
    if (config.model == ModelKind::baomi) {
      write_head_weights_csv(cv.models[fold].head_weights,
                             out_dir / ("head_weights_" + stem + ".csv"));
    }
  }

  if (!args.embeddings.empty()) {
    // Each recording is embedded by the fold model that held it out.
    std::ofstream out(args.embeddings);
    bool header_written = false;
    for (std::size_t fold = 0; fold < cv.models.size(); ++fold) {
      std::vector<Sample> test;
      for (const Sample& s : dataset)
        if (cv.assignment.fold_of.at(s.recording_id) == fold) test.push_back(s);
      const fs::path part = out_dir / (".embeddings_fold" + std::to_string(fold) + ".csv");
      export_embeddings(cv.models[fold], test, part);
      std::ifstream in(part);
      std::string line;
      for (bool first = true; std::getline(in, line); first = false) {
        if (first && header_written) continue;
        out << line << "\n";
      }
      header_written = true;
      in.close();
      fs::remove(part);
    }
  }

  std::cout << table;
  return 0;
}

int run_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    return 1;
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ReportSchemaError(path + ": " + e.what());
  }
  std::cout << render_report(parse_report(j));
  return 0;
}

int run_export(const ExportArgs& args) {
  const LoadedCheckpoint ckpt = load_checkpoint(args.checkpoint);
  const bool fusion = is_fusion(ckpt.model.kind);
  if (fusion == args.b.empty()) {
    std::cerr << "error: checkpoint model " << model_kind_name(ckpt.model.kind)
              << (fusion ? " needs --b" : " takes only --a") << "\n";
    return 1;
  }
  const auto records_a = read_fvec(args.a);
  std::optional<std::vector<FeatureRecord>> records_b;
  if (fusion) records_b = read_fvec(args.b);
  const auto samples = pair_records(records_a, records_b ? &*records_b : nullptr);
  export_embeddings(ckpt.model, samples, args.out);
  std::cout << "embeddings " << samples.size() << " -> " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heart-murmur classification with bandit-weighted cross-attention fusion"};
  app.require_subcommand(1);

  FeaturesArgs features;
  auto* cmd_features = app.add_subcommand("features", "Extract MFCC or LFCC vectors to .fvec");
  cmd_features->add_option("--manifest", features.manifest, "CSV recording_id,wav_path,label")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_features->add_option("--kind", features.kind, "mfcc or lfcc")
      ->check(CLI::IsMember({"mfcc", "lfcc"}));
  cmd_features->add_option("--out", features.out, "output .fvec")->required();

  TrainArgs train;
  TrainConfig& tc = train.config;
  auto* cmd_train = app.add_subcommand("train", "Five-fold cross-validated training");
  cmd_train->add_option("--model", train.model, "fcn, cnn, cross_attention or baomi")
      ->check(CLI::IsMember({"fcn", "cnn", "cross_attention", "baomi"}));
  cmd_train->add_option("--a", train.a, "branch A features (.fvec)")->required()->check(CLI::ExistingFile);
  cmd_train->add_option("--b", train.b, "branch B features (.fvec), fusion models only")
      ->check(CLI::ExistingFile);
  cmd_train->add_option("--seed", tc.seed, "seed for every random choice");
  cmd_train->add_option("--out-dir", train.out_dir, "report, checkpoints and CSVs go here");
  cmd_train->add_option("--epochs", tc.epochs);
  cmd_train->add_option("--batch-size", tc.batch_size);
  cmd_train->add_option("--folds", tc.n_folds);
  cmd_train->add_option("--lr", tc.adam.learning_rate);
  cmd_train->add_option("--beta1", tc.adam.beta1);
  cmd_train->add_option("--beta2", tc.adam.beta2);
  cmd_train->add_option("--adam-eps", tc.adam.eps);
  cmd_train->add_option("--fcn-hidden", tc.fcn.hidden_units);
  cmd_train->add_option("--cnn-conv1", tc.cnn.convs.conv1_filters);
  cmd_train->add_option("--cnn-conv2", tc.cnn.convs.conv2_filters);
  cmd_train->add_option("--cnn-dense", tc.cnn.dense_units);
  cmd_train->add_option("--heads", tc.fusion.n_heads);
  cmd_train->add_option("--head-dim", tc.fusion.head_dim);
  cmd_train->add_option("--conv1-filters", tc.fusion.convs.conv1_filters);
  cmd_train->add_option("--token-channels", tc.fusion.convs.conv2_filters);
  cmd_train->add_option("--dense-units", tc.fusion.dense_units);
  cmd_train->add_option("--gamma", tc.fusion.gamma, "reward decay");
  cmd_train->add_option("--bandit-eps", tc.fusion.eps);
  cmd_train->add_option("--bandit-every", tc.fusion.bandit_update_every,
                        "bandit update cadence in batches, 0 disables");
  cmd_train->add_flag("--shared-head-weights", tc.fusion.shared_head_weights);
  cmd_train->add_flag("!--no-renormalize-masked", tc.fusion.renormalize_masked);
  cmd_train->add_flag("--no-standardize", train.no_standardize);
  cmd_train->add_flag("--no-checkpoints", train.no_checkpoints);
  cmd_train->add_option("--embeddings", train.embeddings,
                        "write held-out penultimate embeddings to this CSV");

  std::string report_path;
  auto* cmd_report = app.add_subcommand("report", "Render a report JSON as a table");
  cmd_report->add_option("report", report_path)->required();

  ExportArgs exp;
  auto* cmd_export = app.add_subcommand("export-embeddings", "Penultimate activations to CSV");
  cmd_export->add_option("--checkpoint", exp.checkpoint, "checkpoint sidecar .json")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_export->add_option("--a", exp.a)->required()->check(CLI::ExistingFile);
  cmd_export->add_option("--b", exp.b)->check(CLI::ExistingFile);
  cmd_export->add_option("--out", exp.out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_features) return run_features(features);
    if (*cmd_train) return run_train(train);
    if (*cmd_report) return run_report(report_path);
    if (*cmd_export) return run_export(exp);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
