#include "baomi/report.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace baomi {

using nlohmann::json;

namespace {

json metrics_json(const Metrics& m) {
  return {{"acc", m.accuracy}, {"ma_f1", m.macro_f1}, {"wa_f1", m.weighted_f1}};
}

json confusion_json(const ConfusionMatrix& cm) {
  return json::array({json::array({cm.counts[0][0], cm.counts[0][1]}),
                      json::array({cm.counts[1][0], cm.counts[1][1]})});
}

double metric_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw ReportSchemaError(where + ": missing numeric '" + key + "'");
  }
  const double v = obj[key].get<double>();
  if (!(v >= 0.0 && v <= 100.0)) {
    throw ReportSchemaError(where + ": '" + key + "' = " + std::to_string(v) +
                            " outside [0, 100]");
  }
  return v;
}

Metrics parse_metrics(const json& obj, const std::string& where) {
  if (!obj.is_object()) throw ReportSchemaError(where + ": expected an object");
  return {metric_field(obj, "acc", where), metric_field(obj, "ma_f1", where),
          metric_field(obj, "wa_f1", where)};
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

json config_to_json(const TrainConfig& c) {
  const FusionConfig& f = c.fusion;
  return {
      {"model", model_kind_name(c.model)},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"n_folds", c.n_folds},
      {"standardize", c.standardize},
      {"adam",
       {{"learning_rate", c.adam.learning_rate},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"eps", c.adam.eps}}},
      {"fcn", {{"hidden_units", c.fcn.hidden_units}}},
      {"cnn",
       {{"conv1_filters", c.cnn.convs.conv1_filters},
        {"conv2_filters", c.cnn.convs.conv2_filters},
        {"dense_units", c.cnn.dense_units}}},
      {"fusion",
       {{"n_heads", f.n_heads},
        {"head_dim", f.head_dim},
        {"conv1_filters", f.convs.conv1_filters},
        {"token_channels", f.convs.conv2_filters},
        {"dense_units", f.dense_units},
        {"gamma", f.gamma},
        {"eps", f.eps},
        {"bandit_update_every", f.bandit_update_every},
        {"shared_head_weights", f.shared_head_weights},
        {"renormalize_masked", f.renormalize_masked}}},
  };
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  try {
    c.model = parse_model_kind(j.at("model").get<std::string>());
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.n_folds = j.value("n_folds", c.n_folds);
    c.standardize = j.value("standardize", c.standardize);
    const json& a = j.at("adam");
    c.adam = {a.at("learning_rate"), a.at("beta1"), a.at("beta2"), a.at("eps")};
    c.fcn.hidden_units = j.at("fcn").at("hidden_units");
    const json& cnn = j.at("cnn");
    c.cnn.convs = {cnn.at("conv1_filters"), cnn.at("conv2_filters")};
    c.cnn.dense_units = cnn.at("dense_units");
    const json& f = j.at("fusion");
    c.fusion.n_heads = f.at("n_heads");
    c.fusion.head_dim = f.at("head_dim");
    c.fusion.convs = {f.at("conv1_filters"), f.at("token_channels")};
    c.fusion.dense_units = f.at("dense_units");
    c.fusion.gamma = f.at("gamma");
    c.fusion.eps = f.at("eps");
    c.fusion.bandit_update_every = f.at("bandit_update_every");
    c.fusion.shared_head_weights = f.value("shared_head_weights", false);
    c.fusion.renormalize_masked = f.value("renormalize_masked", true);
  } catch (const json::exception& e) {
    throw ReportSchemaError(std::string("config: ") + e.what());
  }
  return c;
}

json report_to_json(const EvalReport& report) {
  json folds = json::array();
  for (const FoldReport& f : report.folds) {
    json entry = metrics_json(f.metrics);
    entry["fold"] = f.fold;
    entry["confusion"] = confusion_json(f.confusion);
    entry["train_size"] = f.train_size;
    entry["test_size"] = f.test_size;
    entry["train_loss"] = f.epoch_losses;
    folds.push_back(std::move(entry));
  }
  return {{"config", config_to_json(report.config)},
          {"seed", report.config.seed},
          {"folds", std::move(folds)},
          {"mean", metrics_json(report.mean)}};
}

ReportSummary parse_report(const json& j) {
  if (!j.is_object()) throw ReportSchemaError("report: top level must be an object");
  for (const char* key : {"config", "seed", "folds", "mean"}) {
    if (!j.contains(key)) throw ReportSchemaError(std::string("report: missing '") + key + "'");
  }
  ReportSummary out;
  out.config = j["config"];
  if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
    throw ReportSchemaError("report: 'seed' must be an integer");
  }
  out.seed = j["seed"].get<std::uint64_t>();
  const json& folds = j["folds"];
  if (!folds.is_array() || folds.empty()) {
    throw ReportSchemaError("report: 'folds' must be a non-empty array");
  }
  for (std::size_t i = 0; i < folds.size(); ++i) {
    const std::string where = "report: folds[" + std::to_string(i) + "]";
    ReportSummary::Fold fold;
    fold.metrics = parse_metrics(folds[i], where);
    if (!folds[i].contains("fold") || !folds[i]["fold"].is_number_integer()) {
      throw ReportSchemaError(where + ": missing integer 'fold'");
    }
    fold.fold = folds[i]["fold"].get<std::size_t>();
    const json& cm = folds[i].value("confusion", json());
    if (!cm.is_array() || cm.size() != 2 || !cm[0].is_array() || cm[0].size() != 2 ||
        !cm[1].is_array() || cm[1].size() != 2) {
      throw ReportSchemaError(where + ": 'confusion' must be a 2x2 array");
    }
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 2; ++c) {
        if (!cm[r][c].is_number_unsigned() && !cm[r][c].is_number_integer()) {
          throw ReportSchemaError(where + ": confusion entries must be counts");
        }
        fold.confusion.counts[r][c] = cm[r][c].get<std::size_t>();
      }
    out.folds.push_back(fold);
  }
  out.mean = parse_metrics(j["mean"], "report: mean");
  return out;
}

std::string render_report(const ReportSummary& report) {
  std::ostringstream out;
  const std::string model =
      report.config.is_object() && report.config.contains("model") && report.config["model"].is_string()
          ? report.config["model"].get<std::string>()
          : "?";
  out << "model " << model << ", seed " << report.seed << ", " << report.folds.size()
      << " folds\n";
  out << pad_left("fold", 6) << pad_left("Acc", 9) << pad_left("MA-F1", 9)
      << pad_left("WA-F1", 9) << "  confusion\n";
  for (const auto& f : report.folds) {
    const auto& cm = f.confusion.counts;
    out << pad_left(std::to_string(f.fold), 6) << pad_left(fixed2(f.metrics.accuracy), 9)
        << pad_left(fixed2(f.metrics.macro_f1), 9) << pad_left(fixed2(f.metrics.weighted_f1), 9)
        << "  [[" << cm[0][0] << "," << cm[0][1] << "],[" << cm[1][0] << "," << cm[1][1]
        << "]]\n";
  }
  out << pad_left("mean", 6) << pad_left(fixed2(report.mean.accuracy), 9)
      << pad_left(fixed2(report.mean.macro_f1), 9) << pad_left(fixed2(report.mean.weighted_f1), 9)
      << "\n";
  return out.str();
}

void save_checkpoint(const TrainedModel& model, const TrainConfig& config,
                     const std::filesystem::path& stem) {
  std::filesystem::path params_path = stem;
  params_path += ".params";
  std::filesystem::path sidecar_path = stem;
  sidecar_path += ".json";

  std::string blob;
  json entries = json::array();
  std::size_t offset = 0;
  for (const NamedTensor& p : model.parameters()) {
    entries.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", offset}});
    for (double v : p.tensor.data()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int i = 0; i < 4; ++i) blob.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
    }
    offset += p.tensor.numel();
  }

  json sidecar = {
      {"format", "baomi-checkpoint"},
      {"version", 1},
      {"params_file", params_path.filename().string()},
      {"dtype", "f32le"},
      {"element_count", offset},
      {"model", model_kind_name(model.kind)},
      {"dim_a", model.dim_a},
      {"dim_b", model.dim_b},
      {"config", config_to_json(config)},
      {"params", std::move(entries)},
      {"standardize",
       {{"a", {{"mean", model.norm_a.mean}, {"scale", model.norm_a.scale}}},
        {"b", {{"mean", model.norm_b.mean}, {"scale", model.norm_b.scale}}}}},
  };
  if (is_fusion(model.kind)) {
    sidecar["bandit"] = {{"q_values", model.bandit.q_values},
                         {"gamma", config.fusion.gamma},
                         {"eps", config.fusion.eps},
                         {"update_count", model.bandit.update_count}};
    if (model.bandit.last_loss) sidecar["bandit"]["last_loss"] = *model.bandit.last_loss;
  }

  std::ofstream pout(params_path, std::ios::binary);
  pout.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  std::ofstream jout(sidecar_path);
  jout << sidecar.dump(2) << '\n';
  if (!pout || !jout) throw std::runtime_error("cannot write checkpoint " + stem.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + sidecar_path.string());
  json sidecar;
  try {
    in >> sidecar;
  } catch (const json::exception& e) {
    throw ReportSchemaError(sidecar_path.string() + ": " + e.what());
  }

  LoadedCheckpoint out;
  out.config = config_from_json(sidecar.at("config"));
  const std::size_t dim_a = sidecar.at("dim_a"), dim_b = sidecar.at("dim_b");
  out.model = init_model(out.config, dim_a, dim_b, 0);

  const auto params_path = sidecar_path.parent_path() / sidecar.at("params_file").get<std::string>();
  std::ifstream pin(params_path, std::ios::binary);
  if (!pin) throw std::runtime_error("cannot open " + params_path.string());
  const std::string blob((std::istreambuf_iterator<char>(pin)), std::istreambuf_iterator<char>());

  std::map<std::string, json> entries;
  for (const json& e : sidecar.at("params")) entries[e.at("name")] = e;
  for (NamedTensor& p : out.model.parameters()) {
    auto it = entries.find(p.name);
    if (it == entries.end()) throw ReportSchemaError("checkpoint lacks parameter " + p.name);
    if (it->second.at("shape").get<Shape>() != p.tensor.shape()) {
      throw ReportSchemaError("checkpoint parameter " + p.name + " has the wrong shape");
    }
    const std::size_t offset = it->second.at("offset");
    if ((offset + p.tensor.numel()) * 4 > blob.size()) {
      throw ReportSchemaError("checkpoint parameter " + p.name + " runs past " +
                              params_path.string());
    }
    auto values = p.tensor.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[(offset + i) * 4 + b]))
                << (8 * b);
      }
      values[i] = std::bit_cast<float>(bits);
    }
  }

  const json& norm = sidecar.at("standardize");
  out.model.norm_a = {norm.at("a").at("mean"), norm.at("a").at("scale")};
  out.model.norm_b = {norm.at("b").at("mean"), norm.at("b").at("scale")};
  if (sidecar.contains("bandit")) {
    const json& b = sidecar["bandit"];
    out.model.bandit.q_values = b.at("q_values").get<PerDirection>();
    out.model.bandit.update_count = b.at("update_count");
    if (b.contains("last_loss")) out.model.bandit.last_loss = b["last_loss"].get<double>();
  }
  return out;
}

}  // namespace baomi
