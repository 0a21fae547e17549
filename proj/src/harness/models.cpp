#include "sattn/harness/models.hpp"

#include <optional>

#include "sattn/attention.hpp"
#include "sattn/conv_attention.hpp"
#include "sattn/dynamic_conv.hpp"
#include "sattn/errors.hpp"

namespace sattn::harness {

namespace {

// Runs `fn` with its forward counts routed into `study` when requested.
template <typename Fn>
Tensor counted(OpCounts* study, Fn&& fn) {
  if (!study) return fn();
  CountScope scope(*study);
  return fn();
}

struct Linear {
  Tensor weight;  // out × in
  Tensor bias;    // 1 × out

  static Linear init(Index in, Index out, Rng& rng) {
    return {init_parameter(out, in, in, rng), Tensor::parameter(Matrix::Zero(1, out))};
  }
  Tensor operator()(const Tensor& x) const { return add_row(matmul_nt(x, weight), bias); }
  void append(ParameterList& out, const std::string& prefix) const {
    out.push_back({prefix + "weight", weight});
    out.push_back({prefix + "bias", bias});
  }
};

AttentionConfig attention_config(const RunConfig& config, const Beta& beta) {
  AttentionConfig a;
  a.heads = config.heads;
  a.beta = beta;
  a.model_dim = config.model_dim;
  a.region = config.window > 0 ? Region::local(config.window) : Region::full();
  a.allow_uniform = true;
  a.validate();
  return a;
}

// One attention layer together with its positional context.
struct AttentionLayer {
  AttentionConfig config;
  TransformerParams params;
  AttentionGeometry geometry;
  bool encoder_decoder = false;
  Placement placement = Placement::kPlain;

  static AttentionLayer make(const RunConfig& run, const Beta& beta, const Layout& queries, const Layout& keys,
                             bool encoder_decoder, Placement placement, Rng& rng) {
    AttentionLayer l;
    l.config = attention_config(run, beta);
    l.params = TransformerParams::init(l.config, run.model_dim, rng, placement == Placement::kGatedResidual);
    l.geometry = AttentionGeometry::build(l.config, queries, keys, run.model_dim);
    l.encoder_decoder = encoder_decoder;
    l.placement = placement;
    return l;
  }
  Tensor operator()(const Tensor& z, const Tensor& x) const {
    return transformer_layer_forward(z, x, config, params, geometry, encoder_decoder, placement);
  }
};

// Context unit replacing self-attention: dynamic_conv(x), or
// x + gate · dynamic_conv(x) with a zero-initialised gate.
struct DynamicUnit {
  DynamicConvParams params;
  Tensor gate;

  static DynamicUnit make(const RunConfig& run, const ConvKernelSpec& spec, Placement placement, Rng& rng) {
    DynamicUnit u{DynamicConvParams::init(spec, run.model_dim, run.model_dim, run.groups, rng), Tensor()};
    if (placement == Placement::kGatedResidual) u.gate = Tensor::scalar(0.0, true);
    return u;
  }
  Tensor operator()(const Tensor& x, const Layout& layout) const {
    Tensor y = dynamic_forward(x, layout, params);
    return gate.defined() ? add(x, mul_scalar(y, gate)) : y;
  }
  void append(ParameterList& out, const std::string& prefix) const {
    for (auto& p : params.parameters(prefix)) out.push_back(p);
    if (gate.defined()) out.push_back({prefix + "gate", gate});
  }
};

void append(ParameterList& out, const ParameterList& more) { out.insert(out.end(), more.begin(), more.end()); }

// Sequence models. Source tokens are embedded, pass an optional deformable
// unit, then encoder context (gated self-attention or dynamic conv). For
// encoder-decoder tasks the embedded queries attend to the encoded source;
// otherwise each source position is classified directly.
class SequenceModel final : public Model {
 public:
  SequenceModel(const ToyTask& task, const RunConfig& run, Rng& rng)
      : layout_(task.source_layout), encoder_decoder_(task.encoder_decoder), spec_(ConvKernelSpec::line(run.kernel)) {
    const Beta self_beta = run.target == AblationTarget::kSelf ? run.beta : Beta::full();
    const Beta cross_beta = run.target == AblationTarget::kEncoderDecoder ? run.beta : Beta::full();
    embed_ = Linear::init(task.feature_dim, run.model_dim, rng);
    if (uses_deformable(run.stack)) deformable_ = DeformableParams::init(spec_, run.model_dim, run.model_dim, rng, true);
    if (uses_dynamic(run.stack)) {
      dynamic_ = DynamicUnit::make(run, spec_, Placement::kGatedResidual, rng);
    } else {
      self_ = AttentionLayer::make(run, self_beta, layout_, layout_, false, Placement::kGatedResidual, rng);
    }
    if (encoder_decoder_) {
      cross_ = AttentionLayer::make(run, cross_beta, task.query_layout, layout_, true, Placement::kPlain, rng);
    }
    classifier_ = Linear::init(run.model_dim, task.num_classes, rng);
    study_self_ = run.target == AblationTarget::kSelf;
  }

  Tensor forward(const Sample& sample, OpCounts* study) const override {
    Tensor x = embed_(Tensor::constant(sample.source));
    if (deformable_) {
      x = counted(study, [&] { return deformable_unit_forward(x, layout_, *deformable_, spec_); });
    }
    if (dynamic_) {
      x = counted(study, [&] { return (*dynamic_)(x, layout_); });
    } else {
      x = counted(study_self_ ? study : nullptr, [&] { return (*self_)(x, x); });
    }
    if (!encoder_decoder_) return classifier_(x);
    const Tensor z = embed_(Tensor::constant(sample.queries));
    const Tensor y = counted(study_self_ ? nullptr : study, [&] { return (*cross_)(z, x); });
    return classifier_(y);
  }

  ParameterList parameters() const override {
    ParameterList out;
    embed_.append(out, "embed.");
    if (deformable_) append(out, deformable_->parameters("deformable."));
    if (dynamic_) dynamic_->append(out, "dynamic.");
    if (self_) append(out, self_->params.parameters("self."));
    if (cross_) append(out, cross_->params.parameters("cross."));
    classifier_.append(out, "classifier.");
    return out;
  }

 private:
  Layout layout_;
  bool encoder_decoder_;
  ConvKernelSpec spec_;
  Linear embed_;
  std::optional<DeformableParams> deformable_;
  std::optional<DynamicUnit> dynamic_;
  std::optional<AttentionLayer> self_;
  std::optional<AttentionLayer> cross_;
  Linear classifier_;
  bool study_self_ = true;
};

// Grid classifier: 3×3 regular (or deformable) convolution from the input
// features to the model width, self-attention (or dynamic conv) whose output
// replaces the conv feature, mean pooling, linear classifier. Apart from the
// context unit every stage is linear. The context unit is not gated: behind a
// zero gate its parameters receive no gradient, and with near-uniform initial
// weights the gate itself sees only noise, so training stalls.
class GridModel final : public Model {
 public:
  GridModel(const ToyTask& task, const RunConfig& run, Rng& rng)
      : layout_(task.source_layout), spec_(ConvKernelSpec::square(run.kernel)) {
    if (uses_deformable(run.stack)) {
      deformable_ = DeformableParams::init(spec_, task.feature_dim, run.model_dim, rng);
    } else {
      conv_ = ConvParams::init(spec_, task.feature_dim, run.model_dim, rng);
    }
    if (uses_dynamic(run.stack)) {
      dynamic_ = DynamicUnit::make(run, spec_, Placement::kPlain, rng);
    } else {
      attention_ = AttentionLayer::make(run, run.beta, layout_, layout_, false, Placement::kPlain, rng);
    }
    classifier_ = Linear::init(run.model_dim, task.num_classes, rng);
  }

  Tensor forward(const Sample& sample, OpCounts* study) const override {
    const Tensor x = Tensor::constant(sample.source);
    Tensor h = counted(study, [&] {
      return deformable_ ? deformable_forward(x, layout_, *deformable_, spec_)
                         : regular_conv_forward(x, layout_, *conv_, spec_);
    });
    h = counted(study, [&] { return dynamic_ ? (*dynamic_)(h, layout_) : (*attention_)(h, h); });
    return classifier_(mean_rows(h));
  }

  ParameterList parameters() const override {
    ParameterList out;
    if (conv_) append(out, conv_->parameters("conv."));
    if (deformable_) append(out, deformable_->parameters("deformable."));
    if (dynamic_) dynamic_->append(out, "dynamic.");
    if (attention_) append(out, attention_->params.parameters("attention."));
    classifier_.append(out, "classifier.");
    return out;
  }

 private:
  Layout layout_;
  ConvKernelSpec spec_;
  std::optional<ConvParams> conv_;
  std::optional<DeformableParams> deformable_;
  std::optional<DynamicUnit> dynamic_;
  std::optional<AttentionLayer> attention_;
  Linear classifier_;
};

}  // namespace

std::unique_ptr<Model> build_model(const ToyTask& task, const RunConfig& config, Rng& rng) {
  config.validate();
  if (config.task.kind != task.spec.kind) throw ContractError("run config and task disagree on the task kind");
  if (is_grid_stack(config.stack)) return std::make_unique<GridModel>(task, config, rng);
  return std::make_unique<SequenceModel>(task, config, rng);
}

}  // namespace sattn::harness
