// ir2vis: infra-red -> visible satellite image translation pipeline.
// Subcommands: synth, preprocess, train, predict, evaluate, baseline,
// montage. Worker parallelism is capped by the IR2VIS_THREADS env var.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "ir2vis/dataset.hpp"
#include "ir2vis/image_io.hpp"
#include "ir2vis/knn.hpp"
#include "ir2vis/losses.hpp"
#include "ir2vis/metrics.hpp"
#include "ir2vis/models.hpp"
#include "ir2vis/montage.hpp"
#include "ir2vis/tensor_io.hpp"
#include "ir2vis/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ir2vis;

namespace {

struct SynthOpts {
  int n_train = 8, n_val = 0, n_test = 0;
  int size = 127;
  uint64_t seed = 1;
  std::string out_dir;
};

struct PreprocessOpts {
  std::string manifest;
  std::string filter = "c";
  std::string out;
};

struct TrainOpts {
  std::string manifest;
  std::string recipe = "unet";
  std::string filter;  // empty = recipe default; "none" disables
  std::string spec_json;
  std::string config_file;
  std::string out_dir = "run";
  uint64_t seed = 1;
  // overrides; presence tracked through the CLI option objects
  double lr = 0, lr_decay = 0, lambda_l1 = 0, mu_ssim = 0;
  std::vector<int> epochs, batches;
  int patience = 0, d_steps = 0, ckpt_every = 0, window = 11;
  bool gaussian_window = false;
  CLI::Option *lr_opt = nullptr, *decay_opt = nullptr, *lambda_opt = nullptr,
              *mu_opt = nullptr, *epochs_opt = nullptr, *batch_opt = nullptr,
              *patience_opt = nullptr, *dsteps_opt = nullptr;
};

struct PredictOpts {
  std::string ckpt;
  std::string manifest;
  std::string out_dir;
  std::string split = "all";
  int passes = 1;
  uint64_t seed = 1;
  bool ivt = false;
};

struct EvaluateOpts {
  std::string ckpt;
  std::string manifest;
  std::string report;
  std::string csv;
  std::string split = "test";
  std::string method;  // label override
  int passes = 1;
  uint64_t seed = 1;
  int window = 11;
};

struct BaselineOpts {
  std::string train_manifest;
  std::string test_manifest;
  int k = 3;
  std::string report;
  std::string csv;
  int window = 11;
};

struct MontageOpts {
  std::string manifest;
  std::string out;
  std::vector<std::string> ids;
  int rows = 2;
  std::string baseline_train;
  std::vector<std::string> ckpts;
  int passes = 1;
  uint64_t seed = 1;
};

// ---------------------------------------------------------------------------

template <class T>
std::vector<SamplePair<T>> load_pairs(const DatasetManifest& m,
                                      bool include_deploy = false) {
  std::vector<SamplePair<T>> pairs;
  for (const auto& rec : m.records) {
    if (rec.split == Split::deploy && !include_deploy) continue;
    pairs.push_back(load_pair<T>(rec, m.l_raw));
  }
  return pairs;
}

Split parse_split(const std::string& s) { return split_from_name(s); }

template <class T>
std::vector<SamplePair<T>> pairs_for_split(const DatasetManifest& m,
                                           const std::string& split) {
  std::vector<SamplePair<T>> out;
  if (split == "all") {
    for (const auto& rec : m.records)
      if (!rec.vis_path.empty()) out.push_back(load_pair<T>(rec, m.l_raw));
    return out;
  }
  const Split want = parse_split(split);
  for (const auto& rec : m.records)
    if (rec.split == want) out.push_back(load_pair<T>(rec, m.l_raw));
  return out;
}

char default_filter_for(Recipe r) {
  switch (r) {
    case Recipe::cgan: return 'a';
    case Recipe::unet: return 'b';
    case Recipe::unetpp: return 'c';
  }
  return 'b';
}

ModelSpec default_spec_for(Recipe r) {
  ModelSpec spec;
  switch (r) {
    case Recipe::unet:
      spec.family = Family::unet;
      spec.depth = 6;  // the pure U-Net runs 6 levels deep
      break;
    case Recipe::unetpp:
      spec.family = Family::unetpp;
      spec.depth = 5;
      break;
    case Recipe::cgan:
      spec.family = Family::unet;
      spec.depth = 5;
      spec.dropout_p = 0.5;
      break;
  }
  return spec;
}

std::string method_label(const ModelSpec& spec) {
  if (spec.family == Family::unetpp) return "Method 3: U-Net++";
  if (spec.family == Family::unet && spec.dropout_p > 0)
    return "Method 1: cGAN";
  if (spec.family == Family::unet) return "Method 2: U-Net";
  return "discriminator";
}

json config_to_json(const TrainConfig& cfg) {
  return json{{"recipe", recipe_name(cfg.recipe)},
              {"lr", cfg.lr},
              {"lr_decay", cfg.lr_decay},
              {"epochs", cfg.epochs},
              {"batch_sizes", cfg.batch_sizes},
              {"patience", cfg.patience},
              {"lambda_l1", cfg.lambda_l1},
              {"mu_ssim", cfg.mu_ssim},
              {"d_steps_per_g_step", cfg.d_steps_per_g_step},
              {"seed", cfg.seed},
              {"window_size", cfg.ssim.window_size},
              {"window_kind", cfg.ssim.window_kind == WindowKind::uniform
                                  ? "uniform"
                                  : "gaussian"}};
}

void apply_config_file(TrainConfig& cfg, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
  if (j.contains("lr_decay")) cfg.lr_decay = j["lr_decay"].get<double>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<std::vector<int>>();
  if (j.contains("batch_sizes"))
    cfg.batch_sizes = j["batch_sizes"].get<std::vector<int>>();
  if (j.contains("patience")) cfg.patience = j["patience"].get<int>();
  if (j.contains("lambda_l1")) cfg.lambda_l1 = j["lambda_l1"].get<double>();
  if (j.contains("mu_ssim")) cfg.mu_ssim = j["mu_ssim"].get<double>();
  if (j.contains("d_steps_per_g_step"))
    cfg.d_steps_per_g_step = j["d_steps_per_g_step"].get<int>();
}

// Stochastic passes draw from a per-(seed, image, pass) stream so results
// are reproducible and independent of evaluation order.
uint64_t pass_seed(uint64_t seed, uint64_t image_idx, int pass) {
  uint64_t h = seed ^ (image_idx * 0x9e3779b97f4a7c15ULL) ^
               (uint64_t(pass) * 0xbf58476d1ce4e5b9ULL);
  h ^= h >> 31;
  return h * 0x94d049bb133111ebULL + 1;
}

// ---------------------------------------------------------------------------

template <class T>
int cmd_synth(const SynthOpts& o) {
  const int n = o.n_train + o.n_val + o.n_test;
  if (n < 1) throw ConfigError("synth: nothing to generate");
  fs::create_directories(o.out_dir);
  auto pairs = synth_dataset<T>(n, o.size, o.seed);
  DatasetManifest m;
  for (int i = 0; i < n; ++i) {
    auto& p = pairs[i];
    p.split = i < o.n_train            ? Split::train
              : i < o.n_train + o.n_val ? Split::val
                                        : Split::test;
    const std::string ir_name = p.id + "_ir.png";
    const std::string vis_name = p.id + "_vis.png";
    write_png((fs::path(o.out_dir) / ir_name).string(),
              tensor_to_image(p.ir));
    write_png((fs::path(o.out_dir) / vis_name).string(),
              tensor_to_image(*p.visible));
    ManifestRecord rec;
    rec.id = p.id;
    rec.ir_path = ir_name;
    rec.vis_path = vis_name;
    rec.ts = p.ts;
    rec.split = p.split;
    m.records.push_back(rec);
  }
  save_manifest(m, (fs::path(o.out_dir) / "manifest.json").string());
  std::cout << json{{"generated", n},
                    {"train", o.n_train},
                    {"val", o.n_val},
                    {"test", o.n_test},
                    {"manifest",
                     (fs::path(o.out_dir) / "manifest.json").string()}}
                   .dump()
            << "\n";
  return 0;
}

template <class T>
int cmd_preprocess(const PreprocessOpts& o) {
  if (o.filter != "a" && o.filter != "b" && o.filter != "c")
    throw ConfigError("preprocess: --filter must be a, b or c");
  DatasetManifest in = load_manifest(o.manifest);
  DatasetManifest out;
  out.l_raw = in.l_raw;
  const fs::path mask_dir = fs::path(o.out).parent_path() / "masks";

  int kept = 0, dropped = 0, deploy = 0;
  for (const auto& rec : in.records) {
    if (rec.vis_path.empty()) {
      ++deploy;  // nighttime records pass through untouched
      out.records.push_back(rec);
      continue;
    }
    auto pair = load_pair<T>(rec, in.l_raw);
    bool keep = false;
    ManifestRecord kept_rec = rec;
    if (o.filter == "a") {
      keep = filter_strategy_a(pair);
    } else if (o.filter == "b") {
      keep = filter_strategy_b(pair);
    } else {
      auto res = filter_strategy_c(pair);
      keep = res.keep;
      if (keep && !res.mask.is_all_valid()) {
        fs::create_directories(mask_dir);
        Tensor<T> mt(Shape4{1, 1, res.mask.h, res.mask.w});
        for (size_t i = 0; i < res.mask.valid.size(); ++i)
          mt.values()[i] = T(res.mask.valid[i]);
        const std::string mp = (mask_dir / (rec.id + "_mask.ivt")).string();
        save_ivt(mp, mt);
        kept_rec.mask_path = mp;
      }
    }
    if (keep) {
      out.records.push_back(kept_rec);
      ++kept;
    } else {
      ++dropped;
    }
  }
  save_manifest(out, o.out);
  std::cout << json{{"input", in.records.size()},
                    {"kept", kept},
                    {"dropped", dropped},
                    {"passthrough_deploy", deploy},
                    {"filter", o.filter},
                    {"out", o.out}}
                   .dump()
            << "\n";
  return 0;
}

template <class T>
int cmd_train(const TrainOpts& o) {
  const Recipe recipe = recipe_from_name(o.recipe);
  TrainConfig cfg = TrainConfig::paper_defaults(recipe);
  const json paper = config_to_json(cfg);
  if (!o.config_file.empty()) apply_config_file(cfg, o.config_file);
  // CLI flags outrank the config file, which outranks the paper defaults.
  if (o.lr_opt->count()) cfg.lr = o.lr;
  if (o.decay_opt->count()) cfg.lr_decay = o.lr_decay;
  if (o.lambda_opt->count()) cfg.lambda_l1 = o.lambda_l1;
  if (o.mu_opt->count()) cfg.mu_ssim = o.mu_ssim;
  if (o.epochs_opt->count()) cfg.epochs = o.epochs;
  if (o.batch_opt->count()) cfg.batch_sizes = o.batches;
  if (o.patience_opt->count()) cfg.patience = o.patience;
  if (o.dsteps_opt->count()) cfg.d_steps_per_g_step = o.d_steps;
  cfg.seed = o.seed;
  cfg.ckpt_every = o.ckpt_every;
  cfg.out_dir = o.out_dir;
  cfg.ssim.window_size = o.window;
  cfg.ssim.window_kind =
      o.gaussian_window ? WindowKind::gaussian : WindowKind::uniform;
  cfg.validate();

  ModelSpec spec = default_spec_for(recipe);
  if (!o.spec_json.empty()) spec = spec_from_json(o.spec_json, spec);

  std::cerr << "config (paper defaults): " << paper.dump() << "\n";
  std::cerr << "config (effective):      " << config_to_json(cfg).dump()
            << "\n";
  std::cerr << "model spec:              " << spec_to_json(spec) << "\n";

  std::string filter = o.filter;
  if (filter.empty()) filter = std::string(1, default_filter_for(recipe));
  if (filter != "none" && filter != std::string(1, default_filter_for(recipe)))
    std::cerr << "warning: filter '" << filter
              << "' overrides the recipe default '"
              << default_filter_for(recipe) << "'\n";

  DatasetManifest m = load_manifest(o.manifest);
  std::vector<SamplePair<T>> data;
  int dropped = 0;
  for (const auto& rec : m.records) {
    if (rec.split != Split::train && rec.split != Split::val) continue;
    auto pair = load_pair<T>(rec, m.l_raw);
    if (filter == "a" && !filter_strategy_a(pair)) { ++dropped; continue; }
    if (filter == "b" && !filter_strategy_b(pair)) { ++dropped; continue; }
    if (filter == "c") {
      auto res = filter_strategy_c(pair);
      if (!res.keep) { ++dropped; continue; }
      if (!res.mask.is_all_valid()) pair.mask = res.mask;
    }
    data.push_back(std::move(pair));
  }
  std::cerr << "data: " << data.size() << " pairs kept, " << dropped
            << " dropped by filter '" << filter << "'\n";

  fs::create_directories(o.out_dir);
  TrainLog log;
  if (recipe == Recipe::cgan) {
    auto g = build_generator<T>(spec, o.seed);
    ModelSpec dspec;
    dspec.family = Family::patchgan;
    dspec.base_channels = spec.base_channels;
    dspec.in_channels = spec.in_channels + spec.out_channels;
    dspec.out_channels = 1;
    dspec.depth = 3;
    auto d = build_patchgan<T>(dspec, o.seed + 1);
    log = train_cgan(g, d, data, cfg);
    save_checkpoint((fs::path(o.out_dir) / "checkpoint").string(), g);
    save_checkpoint((fs::path(o.out_dir) / "checkpoint_d").string(), d);
  } else if (recipe == Recipe::unetpp) {
    auto net = build_unetpp<T>(spec, o.seed);
    log = train_unetpp(net, data, cfg);
    save_checkpoint((fs::path(o.out_dir) / "checkpoint").string(), net);
  } else {
    auto net = build_unet<T>(spec, o.seed);
    log = train_unet(net, data, cfg);
    save_checkpoint((fs::path(o.out_dir) / "checkpoint").string(), net);
  }
  log.write_ndjson((fs::path(o.out_dir) / "trainlog.ndjson").string());

  json summary{{"steps", log.steps.size()},
               {"epochs", log.epochs.size()},
               {"checkpoint", (fs::path(o.out_dir) / "checkpoint").string()}};
  if (!log.epochs.empty()) {
    summary["final_train_ssim"] = log.epochs.back().train_ssim;
    if (log.epochs.back().has_val)
      summary["final_val_ssim"] = log.epochs.back().val_ssim;
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

template <class T>
Tensor<T> model_predict(Network<T>& net, const Tensor<T>& ir, uint64_t seed,
                        uint64_t image_idx, int pass) {
  net.reseed_dropout(pass_seed(seed, image_idx, pass));
  return net.forward(ir, false).back();
}

template <class T>
int cmd_predict(const PredictOpts& o) {
  auto net = load_checkpoint<T>(o.ckpt);
  if (net.spec.family == Family::patchgan)
    throw ConfigError("predict: checkpoint holds a discriminator");
  DatasetManifest m = load_manifest(o.manifest);
  fs::create_directories(o.out_dir);
  int written = 0;
  for (size_t i = 0; i < m.records.size(); ++i) {
    const auto& rec = m.records[i];
    if (o.split != "all" && rec.split != parse_split(o.split)) continue;
    auto pair = load_pair<T>(rec, m.l_raw);  // visible not required
    Tensor<T> pred = model_predict(net, pair.ir, o.seed, i, 0);
    if (o.passes > 1) {
      for (int pass = 1; pass < o.passes; ++pass) {
        auto extra = model_predict(net, pair.ir, o.seed, i, pass);
        for (int64_t j = 0; j < pred.size(); ++j)
          pred.values()[j] += extra.values()[j];
      }
      for (auto& v : pred.values()) v /= T(o.passes);
    }
    write_png((fs::path(o.out_dir) / (rec.id + "_pred.png")).string(),
              tensor_to_image(pred));
    if (o.ivt)
      save_ivt((fs::path(o.out_dir) / (rec.id + "_pred.ivt")).string(), pred);
    ++written;
  }
  std::cout << json{{"predictions", written}, {"out", o.out_dir}}.dump()
            << "\n";
  return 0;
}

template <class T>
int cmd_evaluate(const EvaluateOpts& o) {
  auto net = load_checkpoint<T>(o.ckpt);
  if (net.spec.family == Family::patchgan)
    throw ConfigError("evaluate: checkpoint holds a discriminator");
  DatasetManifest m = load_manifest(o.manifest);
  auto pairs = pairs_for_split<T>(m, o.split);
  if (pairs.empty())
    throw ConfigError("evaluate: no pairs in split '" + o.split + "'");
  SsimParams params;
  params.window_size = o.window;

  const std::string label =
      o.method.empty() ? method_label(net.spec) : o.method;
  std::unordered_map<std::string, uint64_t> idx_of;
  for (size_t i = 0; i < pairs.size(); ++i) idx_of[pairs[i].id] = i;
  PredictFn<T> fn = [&](const SamplePair<T>& pair, int pass) {
    return model_predict(net, pair.ir, o.seed, idx_of.at(pair.id), pass);
  };
  MetricsReport report = evaluate<T>(label, fn, pairs, params, o.passes);
  std::vector<MetricsReport> all{report};
  write_report_json(all, o.report);
  if (!o.csv.empty()) write_table_csv(all, o.csv);
  std::cout << json{{"method", label},
                    {"ssim_mean", report.ssim_mean},
                    {"ssim_global_mean", report.ssim_global_mean},
                    {"rmse_mean", report.rmse_mean},
                    {"n_passes", report.n_passes},
                    {"images", report.per_image.size()}}
                   .dump()
            << "\n";
  return 0;
}

template <class T>
int cmd_baseline(const BaselineOpts& o) {
  DatasetManifest train_m = load_manifest(o.train_manifest);
  DatasetManifest test_m = load_manifest(o.test_manifest);
  auto train = pairs_for_split<T>(train_m, "train");
  if (train.empty()) train = pairs_for_split<T>(train_m, "all");
  auto test = pairs_for_split<T>(test_m, "test");
  if (test.empty()) test = pairs_for_split<T>(test_m, "all");

  auto index = KnnIndex<T>::fit(train, o.k);
  SsimParams params;
  params.window_size = o.window;
  PredictFn<T> fn = [&](const SamplePair<T>& pair, int) {
    return index.predict(pair.ir);
  };
  auto report = evaluate<T>("Baseline: kNN", fn, test, params, 1);
  std::vector<MetricsReport> all{report};
  write_report_json(all, o.report);
  if (!o.csv.empty()) write_table_csv(all, o.csv);
  std::cout << json{{"method", "Baseline: kNN"},
                    {"k", o.k},
                    {"train_size", train.size()},
                    {"ssim_mean", report.ssim_mean},
                    {"rmse_mean", report.rmse_mean},
                    {"images", report.per_image.size()}}
                   .dump()
            << "\n";
  return 0;
}

template <class T>
int cmd_montage(const MontageOpts& o) {
  DatasetManifest m = load_manifest(o.manifest);
  std::vector<ManifestRecord> selected;
  if (!o.ids.empty()) {
    for (const auto& id : o.ids) {
      auto it = std::find_if(m.records.begin(), m.records.end(),
                             [&](const auto& r) { return r.id == id; });
      if (it == m.records.end())
        throw ConfigError("montage: id '" + id + "' not in manifest");
      selected.push_back(*it);
    }
  } else {
    for (const auto& rec : m.records) {
      selected.push_back(rec);
      if (int(selected.size()) >= o.rows) break;
    }
  }
  if (selected.empty()) throw ConfigError("montage: no records selected");

  // methods render in the report table's order
  struct Method {
    int rank;
    std::string label;
    std::function<Tensor<T>(const SamplePair<T>&, uint64_t)> predict;
  };
  std::vector<Method> methods;
  std::optional<KnnIndex<T>> knn;
  if (!o.baseline_train.empty()) {
    DatasetManifest tm = load_manifest(o.baseline_train);
    auto train = pairs_for_split<T>(tm, "train");
    if (train.empty()) train = pairs_for_split<T>(tm, "all");
    knn = KnnIndex<T>::fit(train, 3);
    methods.push_back({table_method_rank("Baseline: kNN"), "Baseline: kNN",
                       [&](const SamplePair<T>& p, uint64_t) {
                         return knn->predict(p.ir);
                       }});
  }
  std::vector<std::shared_ptr<Network<T>>> nets;
  for (const auto& ck : o.ckpts) {
    auto net = std::make_shared<Network<T>>(load_checkpoint<T>(ck));
    const std::string label = method_label(net->spec);
    nets.push_back(net);
    methods.push_back({table_method_rank(label), label,
                       [&, net](const SamplePair<T>& p, uint64_t idx) {
                         Tensor<T> pred =
                             model_predict(*net, p.ir, o.seed, idx, 0);
                         if (o.passes > 1) {
                           for (int pass = 1; pass < o.passes; ++pass) {
                             auto e =
                                 model_predict(*net, p.ir, o.seed, idx, pass);
                             for (int64_t j = 0; j < pred.size(); ++j)
                               pred.values()[j] += e.values()[j];
                           }
                           for (auto& v : pred.values()) v /= T(o.passes);
                         }
                         return pred;
                       }});
  }
  std::stable_sort(methods.begin(), methods.end(),
                   [](const Method& a, const Method& b) {
                     return a.rank < b.rank;
                   });

  bool all_have_gt = true;
  for (const auto& rec : selected)
    if (rec.vis_path.empty()) all_have_gt = false;

  std::vector<std::vector<ImageU8>> rows;
  for (size_t r = 0; r < selected.size(); ++r) {
    auto pair = load_pair<T>(selected[r], m.l_raw);
    std::vector<ImageU8> row;
    row.push_back(tensor_to_image(pair.ir));
    if (all_have_gt) row.push_back(tensor_to_image(*pair.visible));
    for (auto& method : methods)
      row.push_back(tensor_to_image(method.predict(pair, r)));
    rows.push_back(std::move(row));
  }
  ImageU8 sheet = compose_montage(rows);
  write_png(o.out, sheet);
  std::cout << json{{"out", o.out},
                    {"rows", rows.size()},
                    {"panels_per_row", rows[0].size()},
                    {"width", sheet.width},
                    {"height", sheet.height}}
                   .dump()
            << "\n";
  return 0;
}

struct AllOpts {
  SynthOpts synth;
  PreprocessOpts preprocess;
  TrainOpts train;
  PredictOpts predict;
  EvaluateOpts evaluate;
  BaselineOpts baseline;
  MontageOpts montage;
  CLI::App* synth_cmd = nullptr;
  CLI::App* preprocess_cmd = nullptr;
  CLI::App* train_cmd = nullptr;
  CLI::App* predict_cmd = nullptr;
  CLI::App* evaluate_cmd = nullptr;
  CLI::App* baseline_cmd = nullptr;
  CLI::App* montage_cmd = nullptr;
};

template <class T>
int dispatch(const AllOpts& o) {
  if (o.synth_cmd->parsed()) return cmd_synth<T>(o.synth);
  if (o.preprocess_cmd->parsed()) return cmd_preprocess<T>(o.preprocess);
  if (o.train_cmd->parsed()) return cmd_train<T>(o.train);
  if (o.predict_cmd->parsed()) return cmd_predict<T>(o.predict);
  if (o.evaluate_cmd->parsed()) return cmd_evaluate<T>(o.evaluate);
  if (o.baseline_cmd->parsed()) return cmd_baseline<T>(o.baseline);
  if (o.montage_cmd->parsed()) return cmd_montage<T>(o.montage);
  std::cerr << "ir2vis: no subcommand given (see --help)\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"infra-red to visible satellite image translation"};
  app.require_subcommand(0, 1);
  bool f64 = false;
  app.add_flag("--f64", f64, "run in 64-bit precision");

  AllOpts o;

  o.synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  o.synth_cmd->add_option("--train", o.synth.n_train, "training pairs");
  o.synth_cmd->add_option("--val", o.synth.n_val, "validation pairs");
  o.synth_cmd->add_option("--test", o.synth.n_test, "test pairs");
  o.synth_cmd->add_option("--size", o.synth.size, "image size");
  o.synth_cmd->add_option("--seed", o.synth.seed, "rng seed");
  o.synth_cmd->add_option("--out", o.synth.out_dir, "output directory")
      ->required();

  o.preprocess_cmd =
      app.add_subcommand("preprocess", "filter a manifest (strategies a/b/c)");
  o.preprocess_cmd
      ->add_option("--manifest", o.preprocess.manifest, "input manifest")
      ->required();
  o.preprocess_cmd->add_option("--filter", o.preprocess.filter,
                               "filter strategy: a, b or c");
  o.preprocess_cmd->add_option("--out", o.preprocess.out, "output manifest")
      ->required();

  o.train_cmd = app.add_subcommand("train", "train a model");
  o.train_cmd->add_option("--manifest", o.train.manifest, "dataset manifest")
      ->required();
  o.train_cmd->add_option("--recipe", o.train.recipe,
                          "unet, unetpp or cgan");
  o.train_cmd->add_option("--filter", o.train.filter,
                          "a|b|c|none (default: recipe's filter)");
  o.train_cmd->add_option("--spec", o.train.spec_json,
                          "inline JSON model-spec overrides");
  o.train_cmd->add_option("--config", o.train.config_file,
                          "JSON config file (flags override it)");
  o.train_cmd->add_option("--seed", o.train.seed, "rng seed");
  o.train_cmd->add_option("--out", o.train.out_dir, "output directory");
  o.train.lr_opt = o.train_cmd->add_option("--lr", o.train.lr, "learning rate");
  o.train.decay_opt = o.train_cmd->add_option("--lr-decay", o.train.lr_decay,
                                              "per-epoch lr multiplier");
  o.train.lambda_opt =
      o.train_cmd->add_option("--lambda", o.train.lambda_l1, "L1 weight");
  o.train.mu_opt =
      o.train_cmd->add_option("--mu", o.train.mu_ssim, "SSIM weight");
  o.train.epochs_opt = o.train_cmd->add_option(
      "--epochs", o.train.epochs, "epoch schedule (one entry per stage)");
  o.train.batch_opt = o.train_cmd->add_option(
      "--batch", o.train.batches, "batch-size schedule");
  o.train.patience_opt = o.train_cmd->add_option(
      "--patience", o.train.patience, "early-stopping patience (epochs)");
  o.train.dsteps_opt = o.train_cmd->add_option(
      "--d-steps", o.train.d_steps, "discriminator steps per generator step");
  o.train_cmd->add_option("--ckpt-every", o.train.ckpt_every,
                          "checkpoint every N epochs");
  o.train_cmd->add_option("--window", o.train.window, "SSIM window size");
  o.train_cmd->add_flag("--gaussian", o.train.gaussian_window,
                        "gaussian SSIM window (sigma 1.5)");

  o.predict_cmd =
      app.add_subcommand("predict", "run inference (no targets needed)");
  o.predict_cmd->add_option("--ckpt", o.predict.ckpt, "checkpoint directory")
      ->required();
  o.predict_cmd->add_option("--manifest", o.predict.manifest, "manifest")
      ->required();
  o.predict_cmd->add_option("--out", o.predict.out_dir, "output directory")
      ->required();
  o.predict_cmd->add_option("--split", o.predict.split,
                            "train|val|test|deploy|all");
  o.predict_cmd->add_option("--passes", o.predict.passes,
                            "stochastic passes to average");
  o.predict_cmd->add_option("--seed", o.predict.seed, "rng seed");
  o.predict_cmd->add_flag("--ivt", o.predict.ivt, "also write IVT1 tensors");

  o.evaluate_cmd = app.add_subcommand("evaluate", "score a checkpoint");
  o.evaluate_cmd->add_option("--ckpt", o.evaluate.ckpt, "checkpoint")
      ->required();
  o.evaluate_cmd->add_option("--manifest", o.evaluate.manifest, "manifest")
      ->required();
  o.evaluate_cmd->add_option("--report", o.evaluate.report, "JSON report")
      ->required();
  o.evaluate_cmd->add_option("--csv", o.evaluate.csv, "CSV table");
  o.evaluate_cmd->add_option("--split", o.evaluate.split,
                             "which split to score");
  o.evaluate_cmd->add_option("--method", o.evaluate.method, "label override");
  o.evaluate_cmd->add_option("--passes", o.evaluate.passes,
                             "stochastic passes to average");
  o.evaluate_cmd->add_option("--seed", o.evaluate.seed, "rng seed");
  o.evaluate_cmd->add_option("--window", o.evaluate.window,
                             "SSIM window size");

  o.baseline_cmd = app.add_subcommand("baseline", "kNN regression baseline");
  o.baseline_cmd
      ->add_option("--train", o.baseline.train_manifest, "training manifest")
      ->required();
  o.baseline_cmd
      ->add_option("--test", o.baseline.test_manifest, "test manifest")
      ->required();
  o.baseline_cmd->add_option("--k", o.baseline.k, "neighbour count");
  o.baseline_cmd->add_option("--report", o.baseline.report, "JSON report")
      ->required();
  o.baseline_cmd->add_option("--csv", o.baseline.csv, "CSV table");
  o.baseline_cmd->add_option("--window", o.baseline.window,
                             "SSIM window size");

  o.montage_cmd =
      app.add_subcommand("montage", "side-by-side comparison sheet");
  o.montage_cmd->add_option("--manifest", o.montage.manifest, "manifest")
      ->required();
  o.montage_cmd->add_option("--out", o.montage.out, "output PNG")->required();
  o.montage_cmd->add_option("--ids", o.montage.ids,
                            "record ids to render (default: first rows)");
  o.montage_cmd->add_option("--rows", o.montage.rows, "rows when --ids unset");
  o.montage_cmd->add_option("--baseline-train", o.montage.baseline_train,
                            "manifest for a kNN baseline column");
  o.montage_cmd->add_option("--ckpt", o.montage.ckpts,
                            "model checkpoint (repeatable)");
  o.montage_cmd->add_option("--passes", o.montage.passes,
                            "stochastic passes to average");
  o.montage_cmd->add_option("--seed", o.montage.seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return f64 ? dispatch<double>(o) : dispatch<float>(o);
  } catch (const Error& e) {
    std::cerr << "ir2vis: error [" << e.category() << "]: " << e.what()
              << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "ir2vis: error: " << e.what() << "\n";
    return 1;
  }
}
