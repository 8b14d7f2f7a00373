#include "ir2vis/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "ir2vis/adam.hpp"
#include "ir2vis/losses.hpp"
#include "ir2vis/ops.hpp"

using nlohmann::json;

namespace ir2vis {

const char* recipe_name(Recipe r) {
  switch (r) {
    case Recipe::unet: return "unet";
    case Recipe::unetpp: return "unetpp";
    case Recipe::cgan: return "cgan";
  }
  return "unet";
}

Recipe recipe_from_name(const std::string& name) {
  if (name == "unet") return Recipe::unet;
  if (name == "unetpp") return Recipe::unetpp;
  if (name == "cgan") return Recipe::cgan;
  throw ConfigError("unknown recipe '" + name + "'");
}

TrainConfig TrainConfig::paper_defaults(Recipe r) {
  TrainConfig cfg;
  cfg.recipe = r;
  switch (r) {
    case Recipe::unet:
      cfg.lr = 1e-3;
      cfg.lr_decay = 1.0;
      cfg.epochs = {54};
      cfg.batch_sizes = {16};
      cfg.patience = 10;
      break;
    case Recipe::unetpp:
      cfg.lr = 2e-1;  // published rate; usually needs a desk-scale override
      cfg.lr_decay = 1.0;
      cfg.epochs = {60, 30, 30, 20, 20};
      cfg.batch_sizes = {10, 32, 64, 128, 256};
      cfg.patience = 0;
      break;
    case Recipe::cgan:
      cfg.lr = 2e-4;
      cfg.lr_decay = 0.99;
      cfg.epochs = {500};
      cfg.batch_sizes = {16};
      cfg.lambda_l1 = 0.01;
      cfg.mu_ssim = 10.0;
      cfg.d_steps_per_g_step = 2;
      cfg.patience = 0;
      break;
  }
  return cfg;
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train: lr must be > 0");
  if (!(lr_decay > 0)) throw ConfigError("train: lr decay must be > 0");
  if (epochs.empty() || epochs.size() != batch_sizes.size())
    throw ConfigError(
        "train: epoch list and batch-size list must be non-empty and of "
        "equal length (got " +
        std::to_string(epochs.size()) + " and " +
        std::to_string(batch_sizes.size()) + ")");
  for (int e : epochs)
    if (e < 1) throw ConfigError("train: epoch counts must be >= 1");
  for (int b : batch_sizes)
    if (b < 1) throw ConfigError("train: batch sizes must be >= 1");
  if (lambda_l1 < 0 || mu_ssim < 0)
    throw ConfigError("train: loss weights must be >= 0");
  if (d_steps_per_g_step < 1)
    throw ConfigError("train: d_steps_per_g_step must be >= 1");
  ssim.validate();
}

void TrainLog::write_ndjson(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("trainlog: cannot write " + path);
  for (const auto& s : steps) {
    json j{{"type", "step"},
           {"step", s.step},
           {"epoch", s.epoch},
           {"kind", std::string(1, s.kind)},
           {"lr", s.lr},
           {"loss", s.loss}};
    if (s.kind == 'G') {
      j["g_adv"] = s.g_adv;
      j["l1"] = s.l1;
      j["ssim_term"] = s.ssim_term;
      j["total"] = s.total;
    }
    if (s.kind == 'D') j["d_loss"] = s.d_loss;
    os << j.dump() << "\n";
  }
  for (const auto& e : epochs) {
    json j{{"type", "epoch"},       {"epoch", e.epoch},
           {"stage", e.stage},      {"stage_start", e.stage_start},
           {"lr", e.lr},            {"batch_size", e.batch_size},
           {"train_ssim", e.train_ssim}, {"wall_seconds", e.wall_seconds}};
    if (e.has_val) {
      j["val_ssim"] = e.val_ssim;
      j["val_rmse"] = e.val_rmse;
    }
    os << j.dump() << "\n";
  }
}

namespace {

template <class T>
struct DataView {
  std::vector<const SamplePair<T>*> train, val;
  Shape4 ir_shape{};
};

template <class T>
DataView<T> split_data(const std::vector<SamplePair<T>>& data,
                       bool need_visible) {
  DataView<T> dv;
  for (const auto& p : data) {
    if (p.split == Split::train) dv.train.push_back(&p);
    else if (p.split == Split::val) dv.val.push_back(&p);
  }
  auto check = [&](const SamplePair<T>* p) {
    if (need_visible && !p->visible)
      throw ConfigError("train: pair '" + p->id + "' has no visible target");
    if (dv.ir_shape.count() == 0) dv.ir_shape = p->ir.shape();
    else if (!(p->ir.shape() == dv.ir_shape))
      throw ConfigError("train: pair '" + p->id + "' shape " +
                        p->ir.shape().str() + " differs from " +
                        dv.ir_shape.str());
  };
  for (auto* p : dv.train) check(p);
  for (auto* p : dv.val) check(p);
  return dv;
}

template <class T>
struct Batch {
  Tensor<T> ir, vis;
  std::vector<const PixelMask*> masks;
  bool any_mask = false;
};

template <class T>
Batch<T> make_batch(const std::vector<const SamplePair<T>*>& items,
                    const std::vector<int>& order, size_t begin, size_t end) {
  const int64_t b = static_cast<int64_t>(end - begin);
  const Shape4 s = items[order[begin]]->ir.shape();
  Batch<T> batch;
  batch.ir = Tensor<T>(Shape4{b, s.c, s.h, s.w});
  batch.vis = Tensor<T>(Shape4{b, s.c, s.h, s.w});
  batch.masks.assign(static_cast<size_t>(b), nullptr);
  const size_t plane = static_cast<size_t>(s.c * s.h * s.w);
  for (size_t i = begin; i < end; ++i) {
    const SamplePair<T>* p = items[order[i]];
    std::copy(p->ir.values().begin(), p->ir.values().end(),
              batch.ir.values().begin() + (i - begin) * plane);
    std::copy(p->visible->values().begin(), p->visible->values().end(),
              batch.vis.values().begin() + (i - begin) * plane);
    if (p->mask && !p->mask->is_all_valid()) {
      batch.masks[i - begin] = &*p->mask;
      batch.any_mask = true;
    }
  }
  return batch;
}

/// Final-head prediction in inference mode.
template <class T>
Tensor<T> infer_one(Network<T>& model, const Tensor<T>& ir) {
  return model.forward(ir, false).back();
}

template <class T>
void eval_pairs(Network<T>& model,
                const std::vector<const SamplePair<T>*>& pairs,
                const SsimParams& params, bool use_masks, size_t cap,
                double* ssim_out, double* rmse_out) {
  double ssim_acc = 0, rmse_acc = 0;
  const size_t n = std::min(cap, pairs.size());
  for (size_t i = 0; i < n; ++i) {
    const SamplePair<T>& p = *pairs[i];
    Tensor<T> pred = infer_one(model, p.ir);
    const PixelMask* mask =
        use_masks && p.mask && !p.mask->is_all_valid() ? &*p.mask : nullptr;
    if (mask) {
      ssim_acc += masked_ssim(pred, *p.visible, *mask, params);
    } else {
      ssim_acc += windowed_ssim(pred, *p.visible, params).second;
    }
    rmse_acc += rmse(pred, *p.visible, mask);
  }
  if (ssim_out) *ssim_out = n ? ssim_acc / double(n) : 0.0;
  if (rmse_out) *rmse_out = n ? rmse_acc / double(n) : 0.0;
}

// Training-set SSIM is tracked on a bounded prefix to keep epoch overhead
// flat on larger corpora.
constexpr size_t kTrainSsimCap = 16;

template <class T>
void maybe_checkpoint(Network<T>& model, const TrainConfig& cfg, int epoch) {
  if (cfg.out_dir.empty() || cfg.ckpt_every <= 0) return;
  if ((epoch + 1) % cfg.ckpt_every != 0) return;
  save_checkpoint(cfg.out_dir + "/ckpt_epoch" + std::to_string(epoch + 1),
                  model);
}

/// Shared staged supervised loop for the U-Net and U-Net++ recipes.
template <class T>
TrainLog supervised_train(Network<T>& model,
                          const std::vector<SamplePair<T>>& data,
                          const TrainConfig& cfg, bool masked_loss,
                          bool early_stopping) {
  cfg.validate();
  DataView<T> dv = split_data(data, true);
  if (dv.train.empty())
    throw ConfigError("train: training set is empty after filtering");

  auto params = model.parameters();
  auto adam = AdamState<T>::for_params(params);
  TrainLog log;
  Rng shuffle_rng(cfg.seed * 7919 + 1);

  double best_val = -2.0;
  int since_best = 0;
  std::vector<std::vector<T>> best_state;
  const auto t0 = std::chrono::steady_clock::now();
  int64_t step = 0;
  int epoch = 0;
  bool stopped = false;

  for (size_t stage = 0; stage < cfg.epochs.size() && !stopped; ++stage) {
    const int batch_size = cfg.batch_sizes[stage];
    for (int se = 0; se < cfg.epochs[stage] && !stopped; ++se, ++epoch) {
      const double lr = cfg.lr * std::pow(cfg.lr_decay, epoch);
      std::vector<int> order(dv.train.size());
      std::iota(order.begin(), order.end(), 0);
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1],
                  order[size_t(uniform01(shuffle_rng) * double(i))]);

      for (size_t b = 0; b < order.size(); b += batch_size) {
        const size_t e = std::min(order.size(), b + batch_size);
        Batch<T> batch = make_batch<T>(dv.train, order, b, e);
        auto heads = model.forward(batch.ir, true);
        const std::vector<const PixelMask*> no_masks;
        const auto& masks = masked_loss ? batch.masks : no_masks;
        Tensor<T> loss = ssim_loss(heads[0], batch.vis, masks, cfg.ssim);
        for (size_t h = 1; h < heads.size(); ++h)
          loss = add(loss, ssim_loss(heads[h], batch.vis, masks, cfg.ssim));
        if (heads.size() > 1)
          loss = affine(loss, T(1) / T(heads.size()), T(0));
        model.zero_grads();
        backward(loss);
        adam_step(params, adam, T(lr));
        StepRecord rec;
        rec.step = ++step;
        rec.epoch = epoch;
        rec.kind = 'U';
        rec.lr = lr;
        rec.loss = double(loss.values()[0]);
        log.steps.push_back(rec);
      }

      EpochRecord er;
      er.epoch = epoch;
      er.stage = static_cast<int>(stage);
      er.stage_start = se == 0;
      er.lr = lr;
      er.batch_size = batch_size;
      eval_pairs(model, dv.train, cfg.ssim, masked_loss, kTrainSsimCap,
                 &er.train_ssim, nullptr);
      if (!dv.val.empty()) {
        er.has_val = true;
        eval_pairs(model, dv.val, cfg.ssim, masked_loss, dv.val.size(),
                   &er.val_ssim, &er.val_rmse);
        if (early_stopping && cfg.patience > 0) {
          if (er.val_ssim > best_val) {
            best_val = er.val_ssim;
            best_state = model.state_values();
            since_best = 0;
          } else if (++since_best >= cfg.patience) {
            stopped = true;
          }
        }
      }
      er.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      log.epochs.push_back(er);
      maybe_checkpoint(model, cfg, epoch);
    }
  }
  if (!best_state.empty()) model.set_state_values(best_state);
  return log;
}

}  // namespace

template <class T>
TrainLog train_unet(Network<T>& model, const std::vector<SamplePair<T>>& data,
                    const TrainConfig& cfg) {
  return supervised_train(model, data, cfg, /*masked_loss=*/false,
                          /*early_stopping=*/true);
}

template <class T>
TrainLog train_unetpp(Network<T>& model,
                      const std::vector<SamplePair<T>>& data,
                      const TrainConfig& cfg) {
  if (cfg.lr >= 0.1)
    std::cerr << "warning: unetpp lr " << cfg.lr
              << " is the published rate but is usually unstable at desk "
                 "scale; consider --lr 1e-3\n";
  return supervised_train(model, data, cfg, /*masked_loss=*/true,
                          /*early_stopping=*/false);
}

template <class T>
TrainLog train_cgan(Network<T>& generator, Network<T>& discriminator,
                    const std::vector<SamplePair<T>>& data,
                    const TrainConfig& cfg) {
  cfg.validate();
  DataView<T> dv = split_data(data, true);
  if (dv.train.empty())
    throw ConfigError("train: training set is empty after filtering");

  auto g_params = generator.parameters();
  auto d_params = discriminator.parameters();
  auto g_adam = AdamState<T>::for_params(g_params);
  auto d_adam = AdamState<T>::for_params(d_params);
  TrainLog log;
  DivergenceGuard guard;
  Rng shuffle_rng(cfg.seed * 7919 + 2);
  const auto t0 = std::chrono::steady_clock::now();

  const int cycle_len = cfg.d_steps_per_g_step + 1;
  int64_t cycle = 0, g_step = 0, d_step = 0;
  const int batch_size = cfg.batch_sizes[0];
  const int total_epochs =
      std::accumulate(cfg.epochs.begin(), cfg.epochs.end(), 0);

  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const double lr = cfg.lr * std::pow(cfg.lr_decay, epoch);
    std::vector<int> order(dv.train.size());
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[size_t(uniform01(shuffle_rng) * double(i))]);

    for (size_t b = 0; b < order.size(); b += batch_size) {
      const size_t e = std::min(order.size(), b + batch_size);
      Batch<T> batch = make_batch<T>(dv.train, order, b, e);
      const bool is_d_step = cycle % cycle_len < cfg.d_steps_per_g_step;
      ++cycle;

      if (is_d_step) {
        Tensor<T> fake =
            generator.forward(batch.ir, true)[0].detach();
        Tensor<T> d_real =
            discriminate(discriminator, batch.ir, batch.vis, true);
        Tensor<T> d_fake = discriminate(discriminator, batch.ir, fake, true);
        auto losses = gan_losses(d_real, d_fake);
        discriminator.zero_grads();
        backward(losses.d_loss);
        adam_step(d_params, d_adam, T(lr));
        StepRecord rec;
        rec.step = ++d_step;
        rec.epoch = epoch;
        rec.kind = 'D';
        rec.lr = lr;
        rec.d_loss = double(losses.d_loss.values()[0]);
        rec.loss = rec.d_loss;
        log.steps.push_back(rec);
        if (guard.feed(rec.d_loss))
          throw DivergenceError(
              "discriminator loss stayed below 1e-4 for 100 consecutive "
              "steps at epoch " +
              std::to_string(epoch) +
              " (discriminator collapse); lower d_steps_per_g_step or the "
              "discriminator lr");
      } else {
        Tensor<T> fake = generator.forward(batch.ir, true)[0];
        Tensor<T> d_fake = discriminate(discriminator, batch.ir, fake, true);
        Tensor<T> g_adv = gan_generator_loss(d_fake);
        Tensor<T> l1 = l1_loss(fake, batch.vis);
        const std::vector<const PixelMask*> no_masks;
        Tensor<T> sl = ssim_loss(fake, batch.vis, no_masks, cfg.ssim);
        Tensor<T> total = composite_generator_loss(
            g_adv, l1, sl, T(cfg.lambda_l1), T(cfg.mu_ssim));
        generator.zero_grads();
        discriminator.zero_grads();  // D grads from this pass are discarded
        backward(total);
        adam_step(g_params, g_adam, T(lr));
        StepRecord rec;
        rec.step = ++g_step;
        rec.epoch = epoch;
        rec.kind = 'G';
        rec.lr = lr;
        rec.g_adv = double(g_adv.values()[0]);
        rec.l1 = double(l1.values()[0]);
        rec.ssim_term = double(sl.values()[0]);
        rec.total = rec.g_adv + cfg.lambda_l1 * rec.l1 +
                    cfg.mu_ssim * rec.ssim_term;
        rec.loss = double(total.values()[0]);
        log.steps.push_back(rec);
      }
    }

    EpochRecord er;
    er.epoch = epoch;
    er.stage = 0;
    er.stage_start = epoch == 0;
    er.lr = lr;
    er.batch_size = batch_size;
    eval_pairs(generator, dv.train, cfg.ssim, false, kTrainSsimCap,
               &er.train_ssim, nullptr);
    if (!dv.val.empty()) {
      er.has_val = true;
      eval_pairs(generator, dv.val, cfg.ssim, false, dv.val.size(),
                 &er.val_ssim, &er.val_rmse);
    }
    er.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    log.epochs.push_back(er);
    maybe_checkpoint(generator, cfg, epoch);
  }
  return log;
}

template <class T>
MetricsReport evaluate(const std::string& method, const PredictFn<T>& predict,
                       const std::vector<SamplePair<T>>& test_pairs,
                       const SsimParams& params, int n_passes) {
  if (test_pairs.empty())
    throw ConfigError("evaluate: empty test set");
  if (n_passes < 1) throw ConfigError("evaluate: n_passes must be >= 1");
  MetricsReport report;
  report.method = method;
  report.n_passes = n_passes;
  for (const auto& pair : test_pairs) {
    if (!pair.visible)
      throw ValidationError("evaluate: pair '" + pair.id +
                            "' has no ground-truth visible image");
    Tensor<T> pred = predict(pair, 0);
    if (n_passes > 1) {
      std::vector<double> acc(pred.values().begin(), pred.values().end());
      for (int pass = 1; pass < n_passes; ++pass) {
        Tensor<T> extra = predict(pair, pass);
        for (size_t i = 0; i < acc.size(); ++i)
          acc[i] += double(extra.values()[i]);
      }
      for (size_t i = 0; i < acc.size(); ++i)
        pred.values()[i] = T(acc[i] / n_passes);
    }
    const PixelMask* mask =
        pair.mask && !pair.mask->is_all_valid() ? &*pair.mask : nullptr;
    PerImageMetrics pm;
    pm.id = pair.id;
    pm.ssim = mask ? masked_ssim(pred, *pair.visible, *mask, params)
                   : windowed_ssim(pred, *pair.visible, params).second;
    pm.ssim_global = global_ssim(pred, *pair.visible, params);
    pm.rmse = rmse(pred, *pair.visible, mask);
    report.per_image.push_back(std::move(pm));
  }
  for (const auto& pm : report.per_image) {
    report.ssim_mean += pm.ssim;
    report.ssim_global_mean += pm.ssim_global;
    report.rmse_mean += pm.rmse;
  }
  const double n = double(report.per_image.size());
  report.ssim_mean /= n;
  report.ssim_global_mean /= n;
  report.rmse_mean /= n;
  return report;
}

#define IR2VIS_TRAINING_INSTANTIATE(T)                                      \
  template TrainLog train_unet<T>(Network<T>&,                              \
                                  const std::vector<SamplePair<T>>&,        \
                                  const TrainConfig&);                      \
  template TrainLog train_unetpp<T>(Network<T>&,                            \
                                    const std::vector<SamplePair<T>>&,      \
                                    const TrainConfig&);                    \
  template TrainLog train_cgan<T>(Network<T>&, Network<T>&,                 \
                                  const std::vector<SamplePair<T>>&,        \
                                  const TrainConfig&);                      \
  template MetricsReport evaluate<T>(const std::string&, const PredictFn<T>&,\
                                     const std::vector<SamplePair<T>>&,     \
                                     const SsimParams&, int);
IR2VIS_TRAINING_INSTANTIATE(float)
IR2VIS_TRAINING_INSTANTIATE(double)
#undef IR2VIS_TRAINING_INSTANTIATE

}  // namespace ir2vis
