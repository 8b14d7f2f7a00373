#include "ir2vis/models.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "ir2vis/ops.hpp"
#include "ir2vis/tensor_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ir2vis {

const char* family_name(Family f) {
  switch (f) {
    case Family::unet: return "unet";
    case Family::unetpp: return "unetpp";
    case Family::patchgan: return "patchgan";
  }
  return "unet";
}

Family family_from_name(const std::string& name) {
  if (name == "unet") return Family::unet;
  if (name == "unetpp") return Family::unetpp;
  if (name == "patchgan") return Family::patchgan;
  throw ValidationError("unknown model family '" + name + "'");
}

void ModelSpec::validate() const {
  if (depth < 1)
    throw ValidationError("model spec: depth must be >= 1, got " +
                          std::to_string(depth));
  if (base_channels < 1)
    throw ValidationError("model spec: base_channels must be >= 1");
  if (deep_supervision && family != Family::unetpp)
    throw ValidationError(
        "model spec: deep_supervision is only available for family=unetpp");
  if (dropout_p < 0.0 || dropout_p >= 1.0)
    throw ValidationError("model spec: dropout_p must lie in [0, 1)");
  if (in_channels < 1 || out_channels < 1)
    throw ValidationError("model spec: channel counts must be >= 1");
}

int ModelSpec::channels_at(int level) const {
  int64_t c = int64_t(base_channels) << level;
  return static_cast<int>(std::min<int64_t>(c, 512));
}

std::string spec_to_json(const ModelSpec& spec) {
  json j;
  j["family"] = family_name(spec.family);
  j["depth"] = spec.depth;
  j["base_channels"] = spec.base_channels;
  j["deep_supervision"] = spec.deep_supervision;
  j["dropout_p"] = spec.dropout_p;
  j["in_channels"] = spec.in_channels;
  j["out_channels"] = spec.out_channels;
  return j.dump();
}

ModelSpec spec_from_json(const std::string& text, ModelSpec base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model spec: JSON parse error: ") +
                      e.what());
  }
  try {
    if (j.contains("family"))
      base.family = family_from_name(j["family"].get<std::string>());
    if (j.contains("depth")) base.depth = j["depth"].get<int>();
    if (j.contains("base_channels"))
      base.base_channels = j["base_channels"].get<int>();
    if (j.contains("deep_supervision"))
      base.deep_supervision = j["deep_supervision"].get<bool>();
    if (j.contains("dropout_p")) base.dropout_p = j["dropout_p"].get<double>();
    if (j.contains("in_channels"))
      base.in_channels = j["in_channels"].get<int>();
    if (j.contains("out_channels"))
      base.out_channels = j["out_channels"].get<int>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model spec: bad field: ") + e.what());
  }
  base.validate();
  return base;
}

namespace {

enum class InitKind { kaiming, gaussian002 };

template <class T>
ConvLayer<T> make_conv(Rng& rng, InitKind init, int in_ch, int out_ch, int k,
                       int stride, int pad, const std::string& name) {
  ConvLayer<T> layer;
  layer.stride = stride;
  layer.pad = pad;
  std::vector<T> w(static_cast<size_t>(out_ch) * in_ch * k * k);
  if (init == InitKind::kaiming) {
    const double bound = std::sqrt(6.0 / (double(in_ch) * k * k));
    for (auto& v : w) v = T(uniform_range(rng, -bound, bound));
  } else {
    for (auto& v : w) v = T(0.02 * gaussian(rng));
  }
  layer.w = Tensor<T>::from_vector(Shape4{out_ch, in_ch, k, k}, std::move(w),
                                   true);
  layer.w.set_name(name + ".w");
  layer.b = Tensor<T>(Shape4{1, out_ch, 1, 1}, T(0), true);
  layer.b.set_name(name + ".b");
  return layer;
}

template <class T>
NormLayer<T> make_norm(Rng& rng, InitKind init, int ch,
                       const std::string& name) {
  NormLayer<T> n;
  n.present = true;
  std::vector<T> g(static_cast<size_t>(ch), T(1));
  if (init == InitKind::gaussian002)
    for (auto& v : g) v = T(1.0 + 0.02 * gaussian(rng));
  n.gamma = Tensor<T>::from_vector(Shape4{1, ch, 1, 1}, std::move(g), true);
  n.gamma.set_name(name + ".gamma");
  n.beta = Tensor<T>(Shape4{1, ch, 1, 1}, T(0), true);
  n.beta.set_name(name + ".beta");
  n.run_mean.assign(static_cast<size_t>(ch), T(0));
  n.run_var.assign(static_cast<size_t>(ch), T(1));
  return n;
}

}  // namespace

template <class T>
Tensor<T> Network<T>::run_block(ConvBlock<T>& blk, const Tensor<T>& x,
                                bool training, bool leaky) {
  Tensor<T> h =
      conv2d(x, blk.conv.w, blk.conv.b, blk.conv.stride, blk.conv.pad);
  if (blk.norm.present)
    h = batch_norm(h, blk.norm.gamma, blk.norm.beta, blk.norm.run_mean,
                   blk.norm.run_var, training);
  return leaky ? leaky_relu(h, T(0.2)) : relu(h);
}

namespace {

struct PadPlan {
  int top = 0, bottom = 0, left = 0, right = 0;
  int64_t h = 0, w = 0;  // original size
  bool needed() const { return top || bottom || left || right; }
};

PadPlan plan_pad(const Shape4& s, int depth, const char* what) {
  const int64_t mult = int64_t(1) << depth;
  if (s.h < mult || s.w < mult)
    throw ValidationError(std::string(what) + ": input " +
                          std::to_string(s.h) + "x" + std::to_string(s.w) +
                          " cannot survive " + std::to_string(depth) +
                          " halvings (needs at least " + std::to_string(mult) +
                          " per axis)");
  PadPlan p;
  p.h = s.h;
  p.w = s.w;
  const int64_t ph = (s.h + mult - 1) / mult * mult;
  const int64_t pw = (s.w + mult - 1) / mult * mult;
  p.top = static_cast<int>((ph - s.h) / 2);
  p.bottom = static_cast<int>(ph - s.h - p.top);
  p.left = static_cast<int>((pw - s.w) / 2);
  p.right = static_cast<int>(pw - s.w - p.left);
  return p;
}

}  // namespace

template <class T>
std::vector<Tensor<T>> Network<T>::forward_unet(const Tensor<T>& x,
                                                bool training) {
  const PadPlan pad = plan_pad(x.shape(), spec.depth, "unet");
  Tensor<T> h =
      pad.needed() ? pad_reflect(x, pad.top, pad.bottom, pad.left, pad.right)
                   : x;
  std::vector<Tensor<T>> skips;
  skips.reserve(spec.depth);
  for (int i = 0; i < spec.depth; ++i) {
    h = run_block(enc_[i], h, training, false);
    skips.push_back(h);
    h = max_pool2d(h);
  }
  const bool use_dropout = spec.dropout_p > 0.0;
  for (int i = spec.depth - 1; i >= 0; --i) {
    h = upsample_nearest2x(h);
    h = concat_channels(h, skips[i]);
    h = run_block(dec_[i], h, training, false);
    if (use_dropout)
      h = dropout(h, spec.dropout_p, rng_, training || stochastic_inference);
  }
  Tensor<T> y = sigmoid(conv2d(h, heads_[0].w, heads_[0].b, 1, 0));
  if (pad.needed())
    y = crop(y, pad.top, pad.left, static_cast<int>(pad.h),
             static_cast<int>(pad.w));
  return {y};
}

template <class T>
std::vector<Tensor<T>> Network<T>::forward_unetpp(const Tensor<T>& x,
                                                  bool training) {
  const int L = spec.depth;
  const PadPlan pad = plan_pad(x.shape(), L, "unetpp");
  Tensor<T> input =
      pad.needed() ? pad_reflect(x, pad.top, pad.bottom, pad.left, pad.right)
                   : x;

  // nodes[i][j]: row i is resolution /2^i, column j the dense skip stage
  std::vector<std::vector<Tensor<T>>> nodes(L + 1);
  for (int i = 0; i <= L; ++i) nodes[i].resize(L - i + 1);

  Tensor<T> h = input;
  for (int i = 0; i <= L; ++i) {
    nodes[i][0] = run_block(grid_[i][0], h, training, false);
    if (i < L) h = max_pool2d(nodes[i][0]);
  }
  for (int j = 1; j <= L; ++j) {
    for (int i = 0; i + j <= L; ++i) {
      Tensor<T> in = nodes[i][0];
      for (int jj = 1; jj < j; ++jj)
        in = concat_channels(in, nodes[i][jj]);
      in = concat_channels(in, upsample_nearest2x(nodes[i + 1][j - 1]));
      nodes[i][j] = run_block(grid_[i][j], in, training, false);
    }
  }

  std::vector<Tensor<T>> outs;
  auto emit = [&](ConvLayer<T>& head, const Tensor<T>& src) {
    Tensor<T> y = sigmoid(conv2d(src, head.w, head.b, 1, 0));
    if (pad.needed())
      y = crop(y, pad.top, pad.left, static_cast<int>(pad.h),
               static_cast<int>(pad.w));
    outs.push_back(std::move(y));
  };
  if (spec.deep_supervision) {
    for (int j = 1; j <= L; ++j) emit(heads_[j - 1], nodes[0][j]);
  } else {
    emit(heads_[0], nodes[0][L]);
  }
  return outs;
}

template <class T>
std::pair<int64_t, int64_t> Network<T>::patch_map_dims(const ModelSpec& spec,
                                                       int64_t h, int64_t w) {
  (void)spec;
  static constexpr int kStrides[5] = {2, 2, 2, 1, 1};
  for (int s : kStrides) {
    h = (h + 2 - 4) / s + 1;
    w = (w + 2 - 4) / s + 1;
    if (h < 1 || w < 1) return {0, 0};
  }
  return {h, w};
}

template <class T>
std::vector<Tensor<T>> Network<T>::forward_patchgan(const Tensor<T>& x,
                                                    bool training) {
  const auto [mh, mw] = patch_map_dims(spec, x.shape().h, x.shape().w);
  if (mh < 1 || mw < 1)
    throw ValidationError("patchgan: input " + std::to_string(x.shape().h) +
                          "x" + std::to_string(x.shape().w) +
                          " too small for the conv stack");
  Tensor<T> h = x;
  for (size_t i = 0; i + 1 < enc_.size(); ++i)
    h = run_block(enc_[i], h, training, true);
  ConvBlock<T>& last = enc_.back();
  h = conv2d(h, last.conv.w, last.conv.b, last.conv.stride, last.conv.pad);
  return {sigmoid(h)};
}

template <class T>
std::vector<Tensor<T>> Network<T>::forward(const Tensor<T>& x, bool training) {
  if (x.shape().c != spec.in_channels)
    throw DimensionError(std::string(family_name(spec.family)) +
                         ": input channel axis " + std::to_string(x.shape().c) +
                         " != spec in_channels " +
                         std::to_string(spec.in_channels));
  switch (spec.family) {
    case Family::unet: return forward_unet(x, training);
    case Family::unetpp: return forward_unetpp(x, training);
    case Family::patchgan: return forward_patchgan(x, training);
  }
  throw ValidationError("unknown family");
}

template <class T>
int64_t Network<T>::parameter_count() const {
  int64_t total = 0;
  for (const auto& p : params_) total += p.size();
  return total;
}

template <class T>
void Network<T>::zero_grads() {
  for (auto& p : params_) p.zero_grad();
}

template <class T>
std::vector<std::vector<T>> Network<T>::state_values() const {
  std::vector<std::vector<T>> out;
  out.reserve(params_.size() + norm_buffers_.size());
  for (const auto& p : params_) out.push_back(p.values());
  for (const auto& [name, buf] : norm_buffers_) out.push_back(*buf);
  return out;
}

template <class T>
void Network<T>::set_state_values(const std::vector<std::vector<T>>& state) {
  if (state.size() != params_.size() + norm_buffers_.size())
    throw CheckpointError("state has " + std::to_string(state.size()) +
                          " tensors, network expects " +
                          std::to_string(params_.size() +
                                         norm_buffers_.size()));
  size_t i = 0;
  for (auto& p : params_) {
    if (state[i].size() != p.values().size())
      throw CheckpointError("state tensor " + std::to_string(i) + " ('" +
                            p.name() + "') has wrong length");
    p.values() = state[i++];
  }
  for (auto& [name, buf] : norm_buffers_) {
    if (state[i].size() != buf->size())
      throw CheckpointError("state tensor " + std::to_string(i) + " ('" +
                            name + "') has wrong length");
    *buf = state[i++];
  }
}

template <class T>
std::vector<std::string> Network<T>::state_names() const {
  std::vector<std::string> names;
  for (const auto& p : params_) names.push_back(p.name());
  for (const auto& [name, buf] : norm_buffers_) names.push_back(name);
  return names;
}

template <class T>
std::vector<Shape4> Network<T>::state_shapes() const {
  std::vector<Shape4> shapes;
  for (const auto& p : params_) shapes.push_back(p.shape());
  for (const auto& [name, buf] : norm_buffers_)
    shapes.push_back(Shape4{1, static_cast<int64_t>(buf->size()), 1, 1});
  return shapes;
}

namespace {

// Registers parameters and norm buffers in one stable structural order.
// Runs after every block vector reached its final size, so the raw buffer
// pointers stay valid.
template <class T>
void register_block(std::vector<Tensor<T>>& params,
                    std::vector<std::pair<std::string, std::vector<T>*>>& bufs,
                    ConvBlock<T>& blk, const std::string& name) {
  params.push_back(blk.conv.w);
  params.push_back(blk.conv.b);
  if (blk.norm.present) {
    params.push_back(blk.norm.gamma);
    params.push_back(blk.norm.beta);
    bufs.emplace_back(name + ".run_mean", &blk.norm.run_mean);
    bufs.emplace_back(name + ".run_var", &blk.norm.run_var);
  }
}

}  // namespace

template <class T>
Network<T> build_unet_impl(const ModelSpec& spec, uint64_t seed,
                           bool gan_init) {
  spec.validate();
  if (spec.family != Family::unet)
    throw ValidationError("build_unet: spec.family must be unet");
  Network<T> net;
  net.spec = spec;
  net.seed = seed;
  net.rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
  Rng rng(seed);
  const InitKind init = gan_init ? InitKind::gaussian002 : InitKind::kaiming;
  const int d = spec.depth;

  net.enc_.resize(d);
  net.dec_.resize(d);
  for (int i = 0; i < d; ++i) {
    const int in_ch = i == 0 ? spec.in_channels : spec.channels_at(i - 1);
    const int out_ch = spec.channels_at(i);
    const std::string name = "enc" + std::to_string(i);
    net.enc_[i].conv = make_conv<T>(rng, init, in_ch, out_ch, 3, 1, 1, name);
    if (i != 0)  // no normalization on the network's first layer
      net.enc_[i].norm = make_norm<T>(rng, init, out_ch, name);
  }
  for (int i = d - 1; i >= 0; --i) {
    const int below =
        i == d - 1 ? spec.channels_at(d - 1) : spec.channels_at(i + 1);
    const int in_ch = below + spec.channels_at(i);
    const int out_ch = spec.channels_at(i);
    const std::string name = "dec" + std::to_string(i);
    net.dec_[i].conv = make_conv<T>(rng, init, in_ch, out_ch, 3, 1, 1, name);
    net.dec_[i].norm = make_norm<T>(rng, init, out_ch, name);
  }
  net.heads_.push_back(make_conv<T>(rng, init, spec.channels_at(0),
                                    spec.out_channels, 1, 1, 0, "head"));

  for (int i = 0; i < d; ++i)
    register_block(net.params_, net.norm_buffers_, net.enc_[i],
                   "enc" + std::to_string(i));
  for (int i = 0; i < d; ++i)
    register_block(net.params_, net.norm_buffers_, net.dec_[i],
                   "dec" + std::to_string(i));
  net.params_.push_back(net.heads_[0].w);
  net.params_.push_back(net.heads_[0].b);
  return net;
}

template <class T>
Network<T> build_unet(const ModelSpec& spec, uint64_t seed) {
  return build_unet_impl<T>(spec, seed, false);
}

template <class T>
Network<T> build_generator(const ModelSpec& spec, uint64_t seed) {
  if (spec.family != Family::unet)
    throw ValidationError("build_generator: spec.family must be unet");
  if (spec.dropout_p == 0.0)
    std::cerr << "warning: generator built with dropout_p=0; inference "
                 "passes will be deterministic (no noise source)\n";
  Network<T> net = build_unet_impl<T>(spec, seed, true);
  net.stochastic_inference = spec.dropout_p > 0.0;
  return net;
}

template <class T>
Network<T> build_unetpp(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  if (spec.family != Family::unetpp)
    throw ValidationError("build_unetpp: spec.family must be unetpp");
  Network<T> net;
  net.spec = spec;
  net.seed = seed;
  net.rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
  Rng rng(seed);
  const InitKind init = InitKind::kaiming;
  const int L = spec.depth;

  net.grid_.resize(L + 1);
  for (int i = 0; i <= L; ++i) net.grid_[i].resize(L - i + 1);
  for (int i = 0; i <= L; ++i) {
    const int in_ch = i == 0 ? spec.in_channels : spec.channels_at(i - 1);
    const int out_ch = spec.channels_at(i);
    const std::string name = "node" + std::to_string(i) + "_0";
    net.grid_[i][0].conv = make_conv<T>(rng, init, in_ch, out_ch, 3, 1, 1,
                                        name);
    if (i != 0) net.grid_[i][0].norm = make_norm<T>(rng, init, out_ch, name);
  }
  for (int j = 1; j <= L; ++j) {
    for (int i = 0; i + j <= L; ++i) {
      const int in_ch =
          j * spec.channels_at(i) + spec.channels_at(i + 1);
      const int out_ch = spec.channels_at(i);
      const std::string name =
          "node" + std::to_string(i) + "_" + std::to_string(j);
      net.grid_[i][j].conv = make_conv<T>(rng, init, in_ch, out_ch, 3, 1, 1,
                                          name);
      net.grid_[i][j].norm = make_norm<T>(rng, init, out_ch, name);
    }
  }
  const int nheads = spec.deep_supervision ? L : 1;
  for (int h = 0; h < nheads; ++h) {
    const std::string name =
        spec.deep_supervision ? "head" + std::to_string(h + 1) : "head";
    net.heads_.push_back(make_conv<T>(rng, init, spec.channels_at(0),
                                      spec.out_channels, 1, 1, 0, name));
  }

  for (int i = 0; i <= L; ++i)
    for (int j = 0; i + j <= L; ++j)
      register_block(net.params_, net.norm_buffers_, net.grid_[i][j],
                     "node" + std::to_string(i) + "_" + std::to_string(j));
  for (auto& head : net.heads_) {
    net.params_.push_back(head.w);
    net.params_.push_back(head.b);
  }
  return net;
}

template <class T>
Network<T> build_patchgan(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  if (spec.family != Family::patchgan)
    throw ValidationError("build_patchgan: spec.family must be patchgan");
  Network<T> net;
  net.spec = spec;
  net.seed = seed;
  net.rng_.seed(seed ^ 0x9e3779b97f4a7c15ULL);
  Rng rng(seed);
  const InitKind init = InitKind::gaussian002;
  const int widths[4] = {spec.channels_at(0), spec.channels_at(1),
                         spec.channels_at(2), spec.channels_at(3)};
  const int strides[5] = {2, 2, 2, 1, 1};
  net.enc_.resize(5);
  int in_ch = spec.in_channels;
  for (int i = 0; i < 5; ++i) {
    const int out_ch = i < 4 ? widths[i] : 1;
    const std::string name = "disc" + std::to_string(i);
    net.enc_[i].conv =
        make_conv<T>(rng, init, in_ch, out_ch, 4, strides[i], 1, name);
    if (i != 0 && i != 4)
      net.enc_[i].norm = make_norm<T>(rng, init, out_ch, name);
    in_ch = out_ch;
  }
  for (int i = 0; i < 5; ++i)
    register_block(net.params_, net.norm_buffers_, net.enc_[i],
                   "disc" + std::to_string(i));
  return net;
}

template <class T>
Tensor<T> discriminate(Network<T>& d, const Tensor<T>& x_ir,
                       const Tensor<T>& y_vis, bool training) {
  if (d.spec.family != Family::patchgan)
    throw ValidationError("discriminate: network is not a patchgan");
  Tensor<T> joint = concat_channels(x_ir, y_vis);
  return d.forward(joint, training)[0];
}

template <class T>
void save_checkpoint(const std::string& dir, const Network<T>& net) {
  fs::create_directories(dir);
  const auto names = net.state_names();
  const auto shapes = net.state_shapes();
  const auto values = net.state_values();

  json j;
  j["family"] = family_name(net.spec.family);
  j["depth"] = net.spec.depth;
  j["base_channels"] = net.spec.base_channels;
  j["deep_supervision"] = net.spec.deep_supervision;
  j["dropout_p"] = net.spec.dropout_p;
  j["in_channels"] = net.spec.in_channels;
  j["out_channels"] = net.spec.out_channels;
  j["seed"] = net.seed;
  j["dtype"] = sizeof(T) == 4 ? "f32" : "f64";
  json tensors = json::array();
  for (size_t i = 0; i < names.size(); ++i) {
    char file[32];
    std::snprintf(file, sizeof(file), "t%04zu.ivt", i);
    tensors.push_back({{"name", names[i]}, {"file", file}});
    Tensor<T> t = Tensor<T>::from_vector(shapes[i], values[i]);
    save_ivt(( fs::path(dir) / file ).string(), t);
  }
  j["tensors"] = std::move(tensors);
  std::ofstream os(fs::path(dir) / "spec.json");
  if (!os) throw IoError("checkpoint: cannot write spec.json in " + dir);
  os << j.dump(2) << "\n";
}

template <class T>
Network<T> load_checkpoint(const std::string& dir) {
  std::ifstream is(fs::path(dir) / "spec.json");
  if (!is) throw IoError("checkpoint: cannot open " + dir + "/spec.json");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: bad spec.json: ") +
                          e.what());
  }
  ModelSpec spec;
  uint64_t seed = 0;
  try {
    spec.family = family_from_name(j.at("family").get<std::string>());
    spec.depth = j.at("depth").get<int>();
    spec.base_channels = j.at("base_channels").get<int>();
    spec.deep_supervision = j.at("deep_supervision").get<bool>();
    spec.dropout_p = j.at("dropout_p").get<double>();
    spec.in_channels = j.value("in_channels", 3);
    spec.out_channels = j.value("out_channels", 3);
    seed = j.at("seed").get<uint64_t>();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: missing spec field: ") +
                          e.what());
  }

  Network<T> net = [&] {
    switch (spec.family) {
      case Family::unet:
        return spec.dropout_p > 0.0 ? build_generator<T>(spec, seed)
                                    : build_unet<T>(spec, seed);
      case Family::unetpp: return build_unetpp<T>(spec, seed);
      case Family::patchgan: return build_patchgan<T>(spec, seed);
    }
    throw CheckpointError("checkpoint: unknown family");
  }();

  const auto names = net.state_names();
  const auto shapes = net.state_shapes();
  if (!j.contains("tensors") || !j["tensors"].is_array() ||
      j["tensors"].size() != names.size())
    throw CheckpointError("checkpoint: tensor list does not match the spec (" +
                          std::to_string(j.value("tensors", json::array())
                                             .size()) +
                          " vs expected " + std::to_string(names.size()) +
                          ")");
  std::vector<std::vector<T>> state;
  state.reserve(names.size());
  for (size_t i = 0; i < names.size(); ++i) {
    const auto& entry = j["tensors"][i];
    if (entry.at("name").get<std::string>() != names[i])
      throw CheckpointError("checkpoint: tensor " + std::to_string(i) +
                            " is '" + entry.at("name").get<std::string>() +
                            "', expected '" + names[i] + "'");
    Tensor<T> t =
        load_ivt<T>((fs::path(dir) / entry.at("file").get<std::string>())
                        .string());
    if (!(t.shape() == shapes[i]))
      throw CheckpointError("checkpoint: tensor '" + names[i] + "' shape " +
                            t.shape().str() + " != expected " +
                            shapes[i].str());
    state.push_back(t.values());
  }
  net.set_state_values(state);
  return net;
}

#define IR2VIS_MODELS_INSTANTIATE(T)                                        \
  template class Network<T>;                                                \
  template Network<T> build_unet_impl<T>(const ModelSpec&, uint64_t, bool); \
  template Network<T> build_unet<T>(const ModelSpec&, uint64_t);            \
  template Network<T> build_unetpp<T>(const ModelSpec&, uint64_t);          \
  template Network<T> build_generator<T>(const ModelSpec&, uint64_t);       \
  template Network<T> build_patchgan<T>(const ModelSpec&, uint64_t);        \
  template Tensor<T> discriminate<T>(Network<T>&, const Tensor<T>&,         \
                                     const Tensor<T>&, bool);               \
  template void save_checkpoint<T>(const std::string&, const Network<T>&);  \
  template Network<T> load_checkpoint<T>(const std::string&);
IR2VIS_MODELS_INSTANTIATE(float)
IR2VIS_MODELS_INSTANTIATE(double)
#undef IR2VIS_MODELS_INSTANTIATE

}  // namespace ir2vis
