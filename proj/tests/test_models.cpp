#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ir2vis/losses.hpp"
#include "ir2vis/models.hpp"
#include "ir2vis/ops.hpp"
#include "ir2vis/rng.hpp"

using namespace ir2vis;
namespace fs = std::filesystem;

namespace {

Tensor<double> randu(Rng& rng, Shape4 s, double lo = 0, double hi = 1) {
  std::vector<double> v(size_t(s.count()));
  for (auto& x : v) x = uniform_range(rng, lo, hi);
  return Tensor<double>::from_vector(s, std::move(v));
}

ModelSpec small_unet(int depth = 2, int base = 8) {
  ModelSpec s;
  s.family = Family::unet;
  s.depth = depth;
  s.base_channels = base;
  return s;
}

}  // namespace

TEST_CASE("unet shape contract and depth validation") {
  auto net = build_unet<double>(small_unet(2, 8), 1);
  Rng rng(3);
  auto x = randu(rng, {1, 3, 32, 32});
  auto out = net.forward(x, false);
  REQUIRE(out.size() == 1);
  CHECK(out[0].shape() == Shape4{1, 3, 32, 32});
  for (double v : out[0].values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  // odd sizes survive through pad-and-crop
  auto odd = randu(rng, {1, 3, 27, 27});
  CHECK(net.forward(odd, false)[0].shape() == Shape4{1, 3, 27, 27});

  // depth 6 rejects 32x32 (32 / 2^6 < 1)
  auto deep = build_unet<double>(small_unet(6, 4), 1);
  CHECK_THROWS_AS(deep.forward(x, false), ValidationError);
}

TEST_CASE("identical spec and seed build identical parameters") {
  auto a = build_unet<double>(small_unet(), 42);
  auto b = build_unet<double>(small_unet(), 42);
  REQUIRE(a.parameters().size() == b.parameters().size());
  CHECK(a.parameter_count() == b.parameter_count());
  for (size_t i = 0; i < a.parameters().size(); ++i)
    CHECK(a.parameters()[i].values() == b.parameters()[i].values());
  auto c = build_unet<double>(small_unet(), 43);
  CHECK(a.parameters()[0].values() != c.parameters()[0].values());
}

TEST_CASE("unetpp topology: heads, parameter count, shared backbone") {
  ModelSpec spec;
  spec.family = Family::unetpp;
  spec.depth = 3;
  spec.base_channels = 8;
  spec.deep_supervision = true;
  auto net = build_unetpp<double>(spec, 7);

  Rng rng(9);
  auto x = randu(rng, {1, 3, 32, 32});
  auto outs = net.forward(x, false);
  REQUIRE(outs.size() == 3);  // one head per top-row node
  for (auto& o : outs) CHECK(o.shape() == Shape4{1, 3, 32, 32});

  ModelSpec plain = spec;
  plain.deep_supervision = false;
  auto net1 = build_unetpp<double>(plain, 7);
  CHECK(net1.forward(x, false).size() == 1);

  // parameter count strictly above a same-spec plain U-Net
  auto unet = build_unet<double>(small_unet(3, 8), 7);
  CHECK(net1.parameter_count() > unet.parameter_count());

  // deep supervision only adds heads; backbone shapes match exactly
  auto names_ds = net.state_names();
  auto shapes_ds = net.state_shapes();
  auto names_1 = net1.state_names();
  auto shapes_1 = net1.state_shapes();
  size_t bi = 0;
  for (size_t i = 0; i < names_1.size(); ++i) {
    if (names_1[i].rfind("head", 0) == 0) continue;  // skip head tensors
    while (bi < names_ds.size() && names_ds[bi].rfind("head", 0) == 0) ++bi;
    REQUIRE(bi < names_ds.size());
    CHECK(names_ds[bi] == names_1[i]);
    CHECK(shapes_ds[bi] == shapes_1[i]);
    ++bi;
  }

  ModelSpec bad = small_unet();
  bad.deep_supervision = true;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("patchgan dims follow the stride schedule and react to input") {
  ModelSpec spec;
  spec.family = Family::patchgan;
  spec.depth = 3;
  spec.base_channels = 8;
  spec.in_channels = 6;
  spec.out_channels = 1;
  auto d = build_patchgan<double>(spec, 5);

  auto [mh, mw] = Network<double>::patch_map_dims(spec, 127, 127);
  CHECK(mh == 13);
  CHECK(mw == 13);

  Rng rng(11);
  auto xir = randu(rng, {1, 3, 127, 127});
  auto yvis = randu(rng, {1, 3, 127, 127});
  auto map = discriminate(d, xir, yvis, false);
  CHECK(map.shape() == Shape4{1, 1, 13, 13});
  CHECK(map.shape().h * map.shape().w > 1);  // patch map, not a scalar
  for (double v : map.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  // swapping the candidate changes the score map
  auto y2 = randu(rng, {1, 3, 127, 127});
  auto map2 = discriminate(d, xir, y2, false);
  CHECK(map.values() != map2.values());

  // too-small input
  auto tiny = randu(rng, {1, 3, 10, 10});
  CHECK_THROWS_AS(discriminate(d, tiny, tiny, false), ValidationError);

  // saturated all-real targets drive the BCE toward zero
  auto near_one = Tensor<double>(Shape4{1, 1, 13, 13}, 1.0 - 1e-9);
  auto near_zero = Tensor<double>(Shape4{1, 1, 13, 13}, 1e-9);
  auto losses = gan_losses(near_one, near_zero);
  CHECK(losses.d_loss.values()[0] < 1e-5);
}

TEST_CASE("every parameter gets a finite gradient after one backward pass") {
  Rng rng(21);
  auto x = randu(rng, {2, 3, 32, 32});
  auto target = randu(rng, {2, 3, 32, 32});

  auto check_grads = [&](Network<double>& net, const Tensor<double>& loss) {
    net.zero_grads();
    backward(loss);
    for (auto& p : net.parameters()) {
      REQUIRE(p.grad_defined());
      bool any_nonzero = false;
      for (double g : p.grad()) {
        REQUIRE(std::isfinite(g));
        if (g != 0.0) any_nonzero = true;
      }
      CHECK_MESSAGE(any_nonzero, "dead parameter: ", p.name());
    }
  };

  auto unet = build_unet<double>(small_unet(3, 8), 31);
  check_grads(unet, ssim_loss<double>(unet.forward(x, true)[0], target, {}, {}));

  ModelSpec pp;
  pp.family = Family::unetpp;
  pp.depth = 2;
  pp.base_channels = 8;
  pp.deep_supervision = true;
  auto unetpp = build_unetpp<double>(pp, 31);
  {
    auto heads = unetpp.forward(x, true);
    auto loss = ssim_loss<double>(heads[0], target, {}, {});
    for (size_t h = 1; h < heads.size(); ++h)
      loss = add(loss, ssim_loss<double>(heads[h], target, {}, {}));
    check_grads(unetpp, loss);
  }

  ModelSpec gen = small_unet(2, 8);
  gen.dropout_p = 0.3;
  auto g = build_generator<double>(gen, 31);
  check_grads(g, ssim_loss<double>(g.forward(x, true)[0], target, {}, {}));

  ModelSpec dspec;
  dspec.family = Family::patchgan;
  dspec.base_channels = 8;
  dspec.in_channels = 6;
  dspec.out_channels = 1;
  auto d = build_patchgan<double>(dspec, 31);
  {
    auto real = discriminate(d, x, target, true);
    auto fake = discriminate(d, x, randu(rng, {2, 3, 32, 32}), true);
    check_grads(d, gan_losses(real, fake).d_loss);
  }
}

TEST_CASE("generator stochasticity at inference") {
  ModelSpec spec = small_unet(2, 8);
  spec.dropout_p = 0.5;
  auto g = build_generator<double>(spec, 17);
  Rng rng(23);
  auto x = randu(rng, {1, 3, 32, 32});
  auto a = g.forward(x, false)[0];
  auto b = g.forward(x, false)[0];
  CHECK(a.values() != b.values());  // dropout stays live at inference

  // the p -> 0 limit collapses the stochasticity
  ModelSpec det = small_unet(2, 8);
  det.dropout_p = 0.0;
  auto g0 = build_generator<double>(det, 17);  // warns, but builds
  auto c = g0.forward(x, false)[0];
  auto dpass = g0.forward(x, false)[0];
  CHECK(c.values() == dpass.values());

  for (double v : a.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("checkpoint round trip preserves behaviour") {
  const auto dir = fs::temp_directory_path() / "ir2vis_ckpt_test";
  fs::remove_all(dir);

  ModelSpec spec = small_unet(2, 8);
  spec.dropout_p = 0.0;
  auto net = build_unet<double>(spec, 77);
  Rng rng(31);
  auto x = randu(rng, {1, 3, 32, 32});
  // run one training-mode pass so the running stats are non-trivial
  (void)net.forward(x, true);
  auto expected = net.forward(x, false)[0];

  save_checkpoint(dir.string(), net);
  auto loaded = load_checkpoint<double>(dir.string());
  auto got = loaded.forward(x, false)[0];
  CHECK(got.values() == expected.values());

  // tampering with the tensor list is an error
  {
    std::ifstream is(dir / "spec.json");
    std::string body((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    auto pos = body.find("enc0.w");
    REQUIRE(pos != std::string::npos);
    body.replace(pos, 4, "zzz0");
    std::ofstream os(dir / "spec.json");
    os << body;
  }
  CHECK_THROWS_AS(load_checkpoint<double>(dir.string()), CheckpointError);
  fs::remove_all(dir);
}

TEST_CASE("model spec json parsing") {
  ModelSpec base;
  auto spec = spec_from_json(R"({"depth": 3, "base_channels": 16})", base);
  CHECK(spec.depth == 3);
  CHECK(spec.base_channels == 16);
  CHECK(spec.family == Family::unet);
  CHECK_THROWS_AS(spec_from_json("{bad json", base), ConfigError);
  CHECK_THROWS_AS(spec_from_json(R"({"depth": 0})", base), ValidationError);
  auto rt = spec_from_json(spec_to_json(spec), ModelSpec{});
  CHECK(rt.depth == 3);
  CHECK(rt.base_channels == 16);
}
