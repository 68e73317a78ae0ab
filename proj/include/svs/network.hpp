#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "svs/adam.hpp"
#include "svs/gaussian.hpp"
#include "svs/image.hpp"
#include "svs/ops.hpp"

namespace svs {

struct NetworkConfig {
  int base_channels = 16;
  int depth = 3;           // down/up levels
  int input_size = 64;     // 304 for the full-scale preset
  double aux_loss_weight = 0.5;  // weight of the backbone supervision term
  std::uint64_t seed = 0;

  void validate() const {
    require(base_channels >= 1, "base_channels must be >= 1, got ",
            base_channels);
    require(depth >= 1, "depth must be >= 1, got ", depth);
    require(input_size >= 1, "input_size must be >= 1, got ", input_size);
    require(input_size % (1 << depth) == 0, "input_size ", input_size,
            " is not divisible by 2^depth = ", 1 << depth);
    require(aux_loss_weight >= 0.0, "aux_loss_weight must be >= 0, got ",
            aux_loss_weight);
  }
  bool operator==(const NetworkConfig&) const = default;
};

template <class Scalar>
struct ConvLayer {
  Var<Scalar> w;  // (kh,kw,cin,cout)
  Var<Scalar> b;  // (1,1,1,cout)
  Index stride = 1;
  Index pad = 0;
};

// conv3x3 -> relu -> conv3x3 -> skip add -> relu, with a 1x1 projection on
// the skip path when the channel count changes.
template <class Scalar>
struct ResBlock {
  ConvLayer<Scalar> c1, c2;
  std::optional<ConvLayer<Scalar>> proj;
};

template <class Scalar>
struct ForwardResult {
  Var<Scalar> seg_logits;
  Var<Scalar> backbone_prob;  // logistic(seg_logits)
  Var<Scalar> param_map;      // activated (B,H,W,6)
  Var<Scalar> attention;      // rendered map, [0,1)
  Var<Scalar> final_prob;     // backbone_prob * attention
};

// Encoder-decoder backbone with residual blocks plus two parallel heads:
// a 1-channel segmentation head and a 6-channel Gaussian parameter head.
template <class Scalar>
class SvsNet {
 public:
  explicit SvsNet(const NetworkConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const int base = cfg.base_channels;

    stem_ = make_conv("stem", 3, 1, base, 1, 1, rng);
    int ch = base;
    for (int l = 0; l < cfg.depth; ++l) {
      enc_.push_back(make_res(strcat("enc", l), ch, ch, rng));
      down_.push_back(make_conv(strcat("down", l), 3, ch, ch * 2, 2, 1, rng));
      ch *= 2;
    }
    bottleneck_ = make_res("bottleneck", ch, ch, rng);
    for (int l = cfg.depth - 1; l >= 0; --l) {
      up_.push_back(make_conv(strcat("up", l), 3, ch, ch / 2, 1, 1, rng));
      ch /= 2;
      // concat with the level-l encoder skip doubles the channels again
      dec_.push_back(make_res(strcat("dec", l), ch * 2, ch, rng));
    }
    seg_head_ = make_conv("seg_head", 1, base, 1, 1, 0, rng);
    att_conv_ = make_conv("att_conv", 3, base, base, 1, 1, rng);
    att_head_ = make_conv("att_head", 1, base, 6, 1, 0, rng);
    // bias the head so a fresh network starts at c = 0.5 and sigma = 1.0
    const Scalar sigma_bias = Scalar(std::log(std::expm1(1.0 - gauss::sigma_min)));
    att_head_.b->value.at(0, 0, 0, kSigmaX) = sigma_bias;
    att_head_.b->value.at(0, 0, 0, kSigmaY) = sigma_bias;
  }

  const NetworkConfig& config() const { return cfg_; }

  const std::vector<std::pair<std::string, Var<Scalar>>>& named_parameters()
      const {
    return named_;
  }
  std::vector<Var<Scalar>> parameters() const {
    std::vector<Var<Scalar>> out;
    out.reserve(named_.size());
    for (const auto& [name, v] : named_) out.push_back(v);
    return out;
  }
  Index parameter_count() const {
    Index n = 0;
    for (const auto& [name, v] : named_) n += v->value.size();
    return n;
  }

  ForwardResult<Scalar> forward(Tape<Scalar>& tape, const Var<Scalar>& image,
                                const RenderOptions& render = {}) const {
    const Shape s = image->value.shape();
    require(s.h == cfg_.input_size && s.w == cfg_.input_size && s.c == 1,
            "forward: expected (B,", cfg_.input_size, ",", cfg_.input_size,
            ",1) input, got ", to_string(s));
    require((image->value.array() >= Scalar(0)).all() &&
                (image->value.array() <= Scalar(1)).all(),
            "forward: image values must be pre-scaled to [0,1]");

    auto x = pointwise(tape, conv(tape, stem_, image), Act::relu);
    std::vector<Var<Scalar>> skips;
    for (int l = 0; l < cfg_.depth; ++l) {
      x = res(tape, enc_[std::size_t(l)], x);
      skips.push_back(x);
      x = conv(tape, down_[std::size_t(l)], x);
    }
    x = res(tape, bottleneck_, x);
    for (int i = 0; i < cfg_.depth; ++i) {
      const std::size_t l = std::size_t(cfg_.depth - 1 - i);
      x = conv(tape, up_[std::size_t(i)], upsample2x(tape, x));
      x = concat_channels(tape, x, skips[l]);
      x = res(tape, dec_[std::size_t(i)], x);
    }

    ForwardResult<Scalar> out;
    out.seg_logits = conv(tape, seg_head_, x);
    out.backbone_prob = pointwise(tape, out.seg_logits, Act::logistic);
    auto att_feat = pointwise(tape, conv(tape, att_conv_, x), Act::relu);
    auto raw = conv(tape, att_head_, att_feat);
    out.param_map = activate_params(tape, raw);
    out.attention = render_attention_node(tape, out.param_map, render);
    out.final_prob = apply_attention(tape, out.backbone_prob, out.attention);
    return out;
  }

 private:
  ConvLayer<Scalar> make_conv(const std::string& name, Index k, Index cin,
                              Index cout, Index stride, Index pad,
                              std::mt19937_64& rng) {
    std::normal_distribution<double> he(0.0, std::sqrt(2.0 / double(k * k * cin)));
    Tensor<Scalar> w(Shape{k, k, cin, cout});
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = Scalar(he(rng));
    ConvLayer<Scalar> layer;
    layer.w = make_leaf(std::move(w), true);
    layer.b = make_leaf(Tensor<Scalar>(Shape{1, 1, 1, cout}), true);
    layer.stride = stride;
    layer.pad = pad;
    named_.emplace_back(name + ".w", layer.w);
    named_.emplace_back(name + ".b", layer.b);
    return layer;
  }

  ResBlock<Scalar> make_res(const std::string& name, Index cin, Index cout,
                            std::mt19937_64& rng) {
    ResBlock<Scalar> block;
    block.c1 = make_conv(name + ".c1", 3, cin, cout, 1, 1, rng);
    block.c2 = make_conv(name + ".c2", 3, cout, cout, 1, 1, rng);
    if (cin != cout)
      block.proj = make_conv(name + ".proj", 1, cin, cout, 1, 0, rng);
    return block;
  }

  Var<Scalar> conv(Tape<Scalar>& tape, const ConvLayer<Scalar>& l,
                   const Var<Scalar>& x) const {
    return conv2d(tape, x, l.w, l.b, l.stride, l.pad);
  }

  Var<Scalar> res(Tape<Scalar>& tape, const ResBlock<Scalar>& blk,
                  const Var<Scalar>& x) const {
    auto h = pointwise(tape, conv(tape, blk.c1, x), Act::relu);
    h = conv(tape, blk.c2, h);
    auto skip = blk.proj ? conv(tape, *blk.proj, x) : x;
    return pointwise(tape, add(tape, h, skip), Act::relu);
  }

  NetworkConfig cfg_;
  ConvLayer<Scalar> stem_, seg_head_, att_conv_, att_head_;
  std::vector<ResBlock<Scalar>> enc_, dec_;
  std::vector<ConvLayer<Scalar>> down_, up_;
  ResBlock<Scalar> bottleneck_;
  std::vector<std::pair<std::string, Var<Scalar>>> named_;
};

template <class Scalar>
struct StepResult {
  double loss = 0;      // ce_final + aux_weight * ce_backbone, pre-update
  double ce_final = 0;
  double ce_backbone = 0;
};

// One optimization step: joint cross entropy on the gated output and the
// backbone probability, one backward pass, one Adam update.
template <class Scalar>
StepResult<Scalar> train_step(SvsNet<Scalar>& net, const Tensor<Scalar>& images,
                              const Tensor<Scalar>& masks,
                              AdamState<Scalar>& opt,
                              const RenderOptions& render = {}) {
  require(images.shape() == masks.shape(), "train_step: image shape ",
          to_string(images.shape()), " does not match masks ",
          to_string(masks.shape()));
  auto params = net.parameters();
  for (auto& p : params) zero_grad(p);

  Tape<Scalar> tape;
  auto image = make_leaf(images, false);
  auto mask = make_leaf(masks, false);
  auto fwd = net.forward(tape, image, render);
  auto ce_final = cross_entropy(tape, fwd.final_prob, mask);
  auto ce_aux = cross_entropy(tape, fwd.backbone_prob, mask);
  auto loss = add(tape, ce_final,
                  scale(tape, ce_aux, Scalar(net.config().aux_loss_weight)));
  tape.backward(loss);
  for (auto& p : params) require_finite(p->grad, "parameter gradient");
  adam_step(params, opt);

  StepResult<Scalar> out;
  out.loss = double(loss->value.data()[0]);
  out.ce_final = double(ce_final->value.data()[0]);
  out.ce_backbone = double(ce_aux->value.data()[0]);
  return out;
}

// Forward pass without gradient tracking; exposes all stage outputs.
template <class Scalar>
struct InferenceResult {
  Tensor<Scalar> backbone_prob, param_map, attention, final_prob;
};

template <class Scalar>
InferenceResult<Scalar> infer(const SvsNet<Scalar>& net,
                              const Tensor<Scalar>& image,
                              const RenderOptions& render = {}) {
  Tape<Scalar> tape;
  auto fwd = net.forward(tape, make_leaf(image, false), render);
  return InferenceResult<Scalar>{fwd.backbone_prob->value,
                                 fwd.param_map->value, fwd.attention->value,
                                 fwd.final_prob->value};
}

// >= threshold maps to vessel (ties count as vessel)
template <class Scalar>
Image8 binarize(const Tensor<Scalar>& prob, Index b = 0,
                Scalar threshold = Scalar(0.5)) {
  const Shape s = prob.shape();
  require(s.c == 1 && b < s.b, "binarize expects (B,H,W,1), got ",
          to_string(s));
  Image8 mask(s.h, s.w);
  for (Index y = 0; y < s.h; ++y)
    for (Index x = 0; x < s.w; ++x)
      mask.at(y, x) = prob.at(b, y, x, 0) >= threshold ? 255 : 0;
  return mask;
}

// Binary mask with the >= 0.5 tie rule, one image per batch row.
template <class Scalar>
Image8 predict_mask(const SvsNet<Scalar>& net, const Tensor<Scalar>& image,
                    const RenderOptions& render = {}) {
  return binarize(infer(net, image, render).final_prob);
}

}  // namespace svs
