#include "baomi/training.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <thread>

#include "baomi/ops.hpp"
#include "baomi/rng.hpp"

namespace baomi {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::fcn: return "fcn";
    case ModelKind::cnn: return "cnn";
    case ModelKind::cross_attention: return "cross_attention";
    case ModelKind::baomi: return "baomi";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (ModelKind k : {ModelKind::fcn, ModelKind::cnn, ModelKind::cross_attention, ModelKind::baomi}) {
    if (model_kind_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown model kind '" + std::string(name) +
                              "' (expected fcn, cnn, cross_attention or baomi)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (n_folds < 2) throw std::invalid_argument("need at least 2 folds");
  if (!(adam.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (is_fusion(model)) fusion.validate();
}

std::vector<Sample> pair_records(const std::vector<FeatureRecord>& a,
                                 const std::vector<FeatureRecord>* b) {
  std::vector<Sample> samples;
  samples.reserve(a.size());
  std::map<std::string, const FeatureRecord*> by_id;
  if (b) {
    for (const FeatureRecord& r : *b) {
      if (!by_id.emplace(r.recording_id, &r).second) {
        throw AlignmentError("duplicate recording id '" + r.recording_id + "' in branch B");
      }
    }
    if (b->size() != a.size()) {
      // Find a concrete offender to report.
      std::map<std::string, bool> in_a;
      for (const FeatureRecord& r : a) in_a[r.recording_id] = true;
      for (const FeatureRecord& r : *b) {
        if (!in_a.count(r.recording_id)) {
          throw AlignmentError("recording '" + r.recording_id + "' is in branch B but not in A");
        }
      }
    }
  }
  std::map<std::string, bool> seen;
  for (const FeatureRecord& r : a) {
    if (!seen.emplace(r.recording_id, true).second) {
      throw AlignmentError("duplicate recording id '" + r.recording_id + "' in branch A");
    }
    Sample s;
    s.recording_id = r.recording_id;
    s.label = r.label;
    s.a.assign(r.values.begin(), r.values.end());
    if (b) {
      auto it = by_id.find(r.recording_id);
      if (it == by_id.end()) {
        throw AlignmentError("recording '" + r.recording_id + "' is in branch A but not in B");
      }
      if (it->second->label != r.label) {
        throw AlignmentError("recording '" + r.recording_id + "' has different labels in A and B");
      }
      s.b.assign(it->second->values.begin(), it->second->values.end());
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

Standardizer Standardizer::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Standardizer Standardizer::fit(const std::vector<Sample>& samples, bool branch_b) {
  if (samples.empty()) throw std::invalid_argument("cannot fit a standardizer on no samples");
  const std::size_t dim = branch_b ? samples[0].b.size() : samples[0].a.size();
  Standardizer s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const Sample& x : samples) {
    const auto& v = branch_b ? x.b : x.a;
    for (std::size_t i = 0; i < dim; ++i) s.mean[i] += v[i];
  }
  for (double& m : s.mean) m /= static_cast<double>(samples.size());
  for (const Sample& x : samples) {
    const auto& v = branch_b ? x.b : x.a;
    for (std::size_t i = 0; i < dim; ++i) s.scale[i] += (v[i] - s.mean[i]) * (v[i] - s.mean[i]);
  }
  for (double& sc : s.scale) {
    const double sd = std::sqrt(sc / static_cast<double>(samples.size()));
    sc = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  return s;
}

void Standardizer::apply(std::span<double> values) const {
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = (values[i] - mean[i]) * scale[i];
}

std::vector<NamedTensor> TrainedModel::parameters() const {
  return std::visit([](const auto& p) { return p.parameters(); }, params);
}

TrainedModel init_model(const TrainConfig& config, std::size_t dim_a, std::size_t dim_b,
                        std::uint64_t seed) {
  config.validate();
  TrainedModel model;
  model.kind = config.model;
  model.dim_a = dim_a;
  model.dim_b = is_fusion(config.model) ? dim_b : 0;
  Rng rng(seed);
  switch (config.model) {
    case ModelKind::fcn:
      model.params = FcnParams::init(dim_a, config.fcn, rng);
      break;
    case ModelKind::cnn:
      model.params = CnnParams::init(dim_a, config.cnn, rng);
      break;
    case ModelKind::cross_attention:
    case ModelKind::baomi:
      pooled_length(dim_a);
      pooled_length(dim_b);
      model.params = FusionModelParams::init(config.fusion, rng);
      model.bandit = BanditState::initial(config.fusion.n_heads);
      break;
  }
  model.norm_a = Standardizer::identity(model.dim_a);
  model.norm_b = Standardizer::identity(model.dim_b);
  return model;
}

Batch make_batch(const TrainedModel& model, const std::vector<Sample>& samples,
                 std::span<const std::size_t> indices) {
  const bool paired = is_fusion(model.kind);
  std::vector<double> a(indices.size() * model.dim_a);
  std::vector<double> b(paired ? indices.size() * model.dim_b : 0);
  Batch batch;
  batch.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Sample& s = samples.at(indices[r]);
    if (s.a.size() != model.dim_a || (paired && s.b.size() != model.dim_b)) {
      throw ShapeError("sample '" + s.recording_id + "' has dimensions " +
                       std::to_string(s.a.size()) + "/" + std::to_string(s.b.size()) +
                       ", model expects " + std::to_string(model.dim_a) + "/" +
                       std::to_string(model.dim_b));
    }
    std::span<double> row_a(a.data() + r * model.dim_a, model.dim_a);
    std::copy(s.a.begin(), s.a.end(), row_a.begin());
    model.norm_a.apply(row_a);
    if (paired) {
      std::span<double> row_b(b.data() + r * model.dim_b, model.dim_b);
      std::copy(s.b.begin(), s.b.end(), row_b.begin());
      model.norm_b.apply(row_b);
    }
    batch.labels.push_back(class_index(s.label));
  }
  batch.a = Tensor::from({indices.size(), model.dim_a}, std::move(a));
  if (paired) batch.b = Tensor::from({indices.size(), model.dim_b}, std::move(b));
  return batch;
}

ModelOutput model_forward(const TrainedModel& model, const Batch& batch) {
  return std::visit(
      overloaded{
          [&](const FcnParams& p) { return fcn_forward(p, batch.a); },
          [&](const CnnParams& p) { return cnn_forward(p, batch.a); },
          [&](const FusionModelParams& p) {
            const FusionOutput out = model.kind == ModelKind::baomi
                                         ? fuse_forward(p, model.bandit, batch.a, batch.b)
                                         : cross_attention_forward(p, batch.a, batch.b);
            return ModelOutput{out.logits, out.penultimate};
          },
      },
      model.params);
}

namespace {

void record_head_weights(TrainedModel& model, std::size_t epoch) {
  for (Direction d : kDirections) {
    const std::vector<double> w = head_weights(model.bandit, d);
    for (std::size_t h = 0; h < w.size(); ++h) model.head_weights.push_back({epoch, d, h, w[h]});
  }
}

}  // namespace

TrainedModel train_fold(const TrainConfig& config, const std::vector<Sample>& train,
                        std::size_t fold) {
  if (train.empty()) {
    throw std::invalid_argument("fold " + std::to_string(fold) + " has no training samples");
  }
  TrainedModel model = init_model(config, train[0].a.size(), train[0].b.size(),
                                  derive_seed(config.seed, {fold, 1}));
  if (config.standardize) {
    model.norm_a = Standardizer::fit(train, false);
    if (is_fusion(config.model)) model.norm_b = Standardizer::fit(train, true);
  }

  std::vector<Tensor> params = tensors_of(model.parameters());
  AdamState adam(config.adam, params);
  const bool bandit = config.model == ModelKind::baomi && config.fusion.bandit_update_every > 0;
  const auto* fusion_params = std::get_if<FusionModelParams>(&model.params);
  if (config.model == ModelKind::baomi) record_head_weights(model, 0);

  std::vector<std::size_t> order(train.size());
  std::size_t batches_seen = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, {fold, 2, epoch}));
    rng.shuffle(std::span(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Batch batch = make_batch(model, train, idx);

      zero_grads(params);
      const Tensor loss = ops::cross_entropy(model_forward(model, batch).logits, batch.labels);
      loss.backward();
      adam_step(params, adam);
      loss_sum += loss.item() * static_cast<double>(idx.size());

      ++batches_seen;
      if (bandit && batches_seen % config.fusion.bandit_update_every == 0) {
        bandit_step(*fusion_params, model.bandit, config.fusion, batch.a, batch.b, batch.labels);
      }
    }
    model.epoch_losses.push_back(loss_sum / static_cast<double>(train.size()));
    if (config.model == ModelKind::baomi) record_head_weights(model, epoch + 1);
  }
  zero_grads(params);
  return model;
}

FoldResult evaluate(const TrainedModel& model, const std::vector<Sample>& test) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  NoGradGuard no_grad;
  FoldResult result;
  constexpr std::size_t kChunk = 64;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < test.size(); start += kChunk) {
    idx.resize(std::min(kChunk, test.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = make_batch(model, test, idx);
    const Tensor logits = model_forward(model, batch).logits;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto row = logits.data().subspan(r * kNumClasses, kNumClasses);
      result.confusion.add(batch.labels[r], predict_class(row));
    }
  }
  result.metrics = metrics_from_confusion(result.confusion);
  return result;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("BAOMI_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end != env && n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

CrossValidation run_cv(const TrainConfig& config, const std::vector<Sample>& dataset) {
  config.validate();
  std::vector<FeatureRecord> keys;
  keys.reserve(dataset.size());
  for (const Sample& s : dataset) keys.push_back({s.recording_id, s.label, {}});

  CrossValidation cv;
  cv.assignment = make_folds(keys, config.seed, config.n_folds);
  cv.report.config = config;
  cv.report.folds.resize(config.n_folds);
  cv.models.resize(config.n_folds);

  std::vector<std::exception_ptr> errors(config.n_folds);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t fold = next++; fold < config.n_folds; fold = next++) {
      try {
        std::vector<Sample> train, test;
        for (const Sample& s : dataset) {
          (cv.assignment.fold_of.at(s.recording_id) == fold ? test : train).push_back(s);
        }
        TrainedModel model = train_fold(config, train, fold);
        const FoldResult result = evaluate(model, test);
        FoldReport& rep = cv.report.folds[fold];
        rep.fold = fold;
        rep.train_size = train.size();
        rep.test_size = test.size();
        rep.metrics = result.metrics;
        rep.confusion = result.confusion;
        rep.epoch_losses = model.epoch_losses;
        cv.models[fold] = std::move(model);
      } catch (...) {
        errors[fold] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(worker_count(), config.n_folds);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<Metrics> per_fold;
  for (const FoldReport& f : cv.report.folds) per_fold.push_back(f.metrics);
  cv.report.mean = mean_metrics(per_fold);
  return cv;
}

void export_embeddings(const TrainedModel& model, const std::vector<Sample>& samples,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot create " + path.string());
  NoGradGuard no_grad;
  bool header = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t idx[] = {i};
    const Tensor emb = model_forward(model, make_batch(model, samples, idx)).penultimate;
    if (!header) {
      out << "recording_id,label";
      for (std::size_t e = 0; e < emb.dim(1); ++e) out << ",e" << e;
      out << '\n';
      header = true;
    }
    out << samples[i].recording_id << ',' << class_index(samples[i].label);
    for (double v : emb.data()) out << ',' << format_double(v);
    out << '\n';
  }
  if (!header) out << "recording_id,label\n";
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_head_weights_csv(const std::vector<HeadWeightRow>& rows,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot create " + path.string());
  out << "epoch,direction,head,weight\n";
  for (const HeadWeightRow& r : rows) {
    out << r.epoch << ',' << direction_name(r.direction) << ',' << r.head << ','
        << format_double(r.weight) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace baomi
