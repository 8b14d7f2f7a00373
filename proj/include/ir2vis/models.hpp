#ifndef IR2VIS_MODELS_HPP
#define IR2VIS_MODELS_HPP

#include <string>
#include <vector>

#include "ir2vis/rng.hpp"
#include "ir2vis/tensor.hpp"

namespace ir2vis {

enum class Family { unet, unetpp, patchgan };

const char* family_name(Family f);
Family family_from_name(const std::string& name);

/// Declarative network description. depth counts levels of down/upsampling
/// (the discriminator uses its fixed stride stack instead).
struct ModelSpec {
  Family family = Family::unet;
  int depth = 6;
  int base_channels = 64;
  bool deep_supervision = false;  // unetpp only
  double dropout_p = 0.0;         // generator decoder dropout
  int in_channels = 3;
  int out_channels = 3;

  void validate() const;
  /// Channel width at level i: base doubled per level, capped at 512.
  int channels_at(int level) const;
};

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text, ModelSpec base = {});

template <class T>
struct ConvLayer {
  Tensor<T> w, b;
  int stride = 1, pad = 1;
};

template <class T>
struct NormLayer {
  bool present = false;
  Tensor<T> gamma, beta;
  std::vector<T> run_mean, run_var;
};

template <class T>
struct ConvBlock {
  ConvLayer<T> conv;
  NormLayer<T> norm;
};

/// A built network: parameter tensors plus the forward routine for its
/// family. Single-threaded during a training step; an inference-mode
/// instance is shareable read-only (the generator's dropout rng aside).
template <class T>
class Network {
public:
  ModelSpec spec;
  uint64_t seed = 0;
  // Generators draw decoder dropout even at inference; that stochasticity is
  // their noise source.
  bool stochastic_inference = false;

  /// Output heads. Generators emit one (or `depth` under deep supervision)
  /// tensors shaped like the input with out_channels channels; the
  /// discriminator emits one patch score map.
  std::vector<Tensor<T>> forward(const Tensor<T>& x, bool training);

  std::vector<Tensor<T>>& parameters() { return params_; }
  const std::vector<Tensor<T>>& parameters() const { return params_; }
  int64_t parameter_count() const;
  void zero_grads();

  /// Parameter values followed by normalization running buffers, for
  /// snapshots and checkpoints.
  std::vector<std::vector<T>> state_values() const;
  void set_state_values(const std::vector<std::vector<T>>& state);
  std::vector<std::string> state_names() const;
  std::vector<Shape4> state_shapes() const;

  Rng& dropout_rng() { return rng_; }
  void reseed_dropout(uint64_t s) { rng_.seed(s); }

  /// Patch-map spatial dims the discriminator produces for an input size.
  static std::pair<int64_t, int64_t> patch_map_dims(const ModelSpec& spec,
                                                    int64_t h, int64_t w);

private:
  template <class U>
  friend Network<U> build_unet_impl(const ModelSpec&, uint64_t, bool);
  template <class U>
  friend Network<U> build_unetpp(const ModelSpec&, uint64_t);
  template <class U>
  friend Network<U> build_patchgan(const ModelSpec&, uint64_t);

  std::vector<Tensor<T>> forward_unet(const Tensor<T>& x, bool training);
  std::vector<Tensor<T>> forward_unetpp(const Tensor<T>& x, bool training);
  std::vector<Tensor<T>> forward_patchgan(const Tensor<T>& x, bool training);

  Tensor<T> run_block(ConvBlock<T>& blk, const Tensor<T>& x, bool training,
                      bool leaky);

  std::vector<ConvBlock<T>> enc_, dec_;             // unet, patchgan layers
  std::vector<std::vector<ConvBlock<T>>> grid_;     // unetpp nodes [row][col]
  std::vector<ConvLayer<T>> heads_;
  std::vector<Tensor<T>> params_;
  std::vector<std::pair<std::string, std::vector<T>*>> norm_buffers_;
  Rng rng_;
};

/// Encoder of `depth` conv+pool blocks, mirrored resize-conv decoder with
/// channel-concatenating skips, final 1x1 conv + sigmoid.
template <class T>
Network<T> build_unet(const ModelSpec& spec, uint64_t seed);

/// Nested dense skip pathways; node (i,j) consumes the upsampled (i+1,j-1)
/// concatenated with all (i,0..j-1). Deep supervision adds one output head
/// per top-row node.
template <class T>
Network<T> build_unetpp(const ModelSpec& spec, uint64_t seed);

/// U-Net generator with stochastic decoder dropout kept on at inference.
template <class T>
Network<T> build_generator(const ModelSpec& spec, uint64_t seed);

/// PatchGAN discriminator over concatenated condition + candidate (6
/// channels): 4x4 convs with strides 2,2,2,1,1, sigmoid patch scores.
template <class T>
Network<T> build_patchgan(const ModelSpec& spec, uint64_t seed);

template <class T>
Tensor<T> discriminate(Network<T>& d, const Tensor<T>& x_ir,
                       const Tensor<T>& y_vis, bool training);

/// Writes spec.json plus one IVT1 file per state tensor into dir.
template <class T>
void save_checkpoint(const std::string& dir, const Network<T>& net);

/// Rebuilds the network from spec.json and loads its state tensors.
/// Throws CheckpointError on any mismatch.
template <class T>
Network<T> load_checkpoint(const std::string& dir);

#define IR2VIS_MODELS_EXTERN(T)                                             \
  extern template class Network<T>;                                         \
  extern template Network<T> build_unet<T>(const ModelSpec&, uint64_t);     \
  extern template Network<T> build_unetpp<T>(const ModelSpec&, uint64_t);   \
  extern template Network<T> build_generator<T>(const ModelSpec&, uint64_t);\
  extern template Network<T> build_patchgan<T>(const ModelSpec&, uint64_t); \
  extern template Tensor<T> discriminate<T>(Network<T>&, const Tensor<T>&,  \
                                            const Tensor<T>&, bool);        \
  extern template void save_checkpoint<T>(const std::string&,               \
                                          const Network<T>&);               \
  extern template Network<T> load_checkpoint<T>(const std::string&);
IR2VIS_MODELS_EXTERN(float)
IR2VIS_MODELS_EXTERN(double)
#undef IR2VIS_MODELS_EXTERN

}  // namespace ir2vis

#endif  // IR2VIS_MODELS_HPP
