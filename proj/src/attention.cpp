#include "sattn/attention.hpp"

#include <cstdlib>

#include "sattn/errors.hpp"

namespace sattn {

Beta Beta::parse(std::string_view s) {
  if (s.size() != 4) throw ContractError("beta string must have 4 characters, got \"" + std::string(s) + "\"");
  std::array<bool, 4> on{};
  for (std::size_t j = 0; j < 4; ++j) {
    if (s[j] != '0' && s[j] != '1') throw ContractError("beta string must be over {0,1}, got \"" + std::string(s) + "\"");
    on[j] = s[j] == '1';
  }
  return {on[0], on[1], on[2], on[3]};
}

std::vector<Beta> Beta::all() {
  std::vector<Beta> out;
  for (int bits = 0; bits < 16; ++bits) {
    out.emplace_back((bits & 8) != 0, (bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0);
  }
  return out;
}

bool Beta::subset_of(const Beta& other) const {
  for (std::size_t j = 0; j < 4; ++j) {
    if (on_[j] && !other.on_[j]) return false;
  }
  return true;
}

std::string Beta::str() const {
  std::string s(4, '0');
  for (std::size_t j = 0; j < 4; ++j) s[j] = on_[j] ? '1' : '0';
  return s;
}

void AttentionConfig::validate() const {
  if (heads <= 0) throw ContractError("attention: head count must be positive");
  if (model_dim <= 0 || model_dim % heads != 0) {
    throw ContractError("attention: head count " + std::to_string(heads) + " must divide model dimension " +
                        std::to_string(model_dim));
  }
  if (!beta.any() && !allow_uniform) {
    throw ContractError("attention: beta \"0000\" activates no term; enable the uniform degenerate mode explicitly");
  }
  if (region.kind == Region::Kind::kWindow && (region.window <= 0 || region.window % 2 == 0)) {
    throw ContractError("attention: local window extent must be a positive odd number");
  }
}

TransformerParams TransformerParams::init(const AttentionConfig& config, Index position_dim, Rng& rng,
                                          bool with_gate) {
  config.validate();
  const Index c = config.model_dim;
  const Index d = config.head_dim();
  TransformerParams p;
  for (Index m = 0; m < config.heads; ++m) {
    p.query_embed.push_back(init_parameter(d, c, c, rng));
    p.key_embed.push_back(init_parameter(d, c, c, rng));
    p.position_embed.push_back(init_parameter(d, position_dim, position_dim, rng));
    p.key_bias.push_back(init_parameter(1, d, d, rng));
    p.position_bias.push_back(init_parameter(1, d, d, rng));
    p.value_proj.push_back(init_parameter(d, c, c, rng));
    p.output_proj.push_back(init_parameter(c, d, d, rng));
  }
  if (with_gate) p.gate = Tensor::scalar(0.0, true);
  return p;
}

ParameterList TransformerParams::parameters(const std::string& prefix) const {
  ParameterList out;
  for (Index m = 0; m < heads(); ++m) {
    const std::string h = std::to_string(m);
    const auto i = static_cast<std::size_t>(m);
    out.push_back({prefix + "U" + h, query_embed[i]});
    out.push_back({prefix + "VC" + h, key_embed[i]});
    out.push_back({prefix + "VR" + h, position_embed[i]});
    out.push_back({prefix + "u" + h, key_bias[i]});
    out.push_back({prefix + "v" + h, position_bias[i]});
    out.push_back({prefix + "Wv" + h, value_proj[i]});
    out.push_back({prefix + "Wo" + h, output_proj[i]});
  }
  if (gate.defined()) out.push_back({prefix + "gate", gate});
  return out;
}

std::optional<Mask> region_mask(const Region& region, const Layout& queries, const Layout& keys) {
  if (region.kind == Region::Kind::kFull) return std::nullopt;
  Mask mask(queries.count(), keys.count());
  const Index reach = region.window / 2;
  for (Index q = 0; q < queries.count(); ++q) {
    for (Index k = 0; k < keys.count(); ++k) {
      if (region.kind == Region::Kind::kCausal) {
        mask(q, k) = k <= q;
      } else {
        mask(q, k) = std::abs(keys.x_of(k) - queries.x_of(q)) <= reach && std::abs(keys.y_of(k) - queries.y_of(q)) <= reach;
      }
    }
  }
  return mask;
}

AttentionGeometry AttentionGeometry::build(const AttentionConfig& config, const Layout& queries, const Layout& keys,
                                           Index position_dim) {
  if (config.region.kind == Region::Kind::kCausal && queries.kind != Layout::Kind::kSequence) {
    throw ContractError("attention: causal region needs sequence layouts");
  }
  const long clip = static_cast<long>(std::max<Index>(1, std::max(queries.longest_extent(), keys.longest_extent()) - 1));
  AttentionGeometry g;
  g.queries = queries;
  g.keys = keys;
  g.offsets = build_offset_table(queries, keys, RelPosEncoder(position_dim, clip));
  g.region_mask = sattn::region_mask(config.region, queries, keys);
  return g;
}

namespace {

void require_content_dim(const Tensor& t, const TransformerParams& params, const char* what) {
  const Index c = params.query_embed.front().cols();
  if (t.cols() != c) {
    throw ContractError(std::string(what) + " has content dimension " + std::to_string(t.cols()) + ", expected " +
                        std::to_string(c));
  }
}

void require_offsets(const OffsetTable& offsets, const TransformerParams& params) {
  if (offsets.encodings.cols() != params.position_embed.front().cols()) {
    throw ContractError("offset encodings have dimension " + std::to_string(offsets.encodings.cols()) +
                        ", position embedding expects " + std::to_string(params.position_embed.front().cols()));
  }
  if (offsets.index.size() > 0 && (offsets.index.minCoeff() < 0 || offsets.index.maxCoeff() >= offsets.num_offsets())) {
    throw ContractError("offset table lacks an encoding for a query-key pair");
  }
}

// Per-head projections shared between the terms.
struct Projections {
  std::vector<Tensor> query;     // z U_m^T        (queries × d)
  std::vector<Tensor> key;       // x V^C_m^T      (keys × d)
  std::vector<Tensor> position;  // R V^R_m^T      (offsets × d)
};

std::vector<Tensor> project(const Tensor& input, const std::vector<Tensor>& weights) {
  std::vector<Tensor> out;
  out.reserve(weights.size());
  for (const auto& w : weights) out.push_back(matmul_nt(input, w));
  return out;
}

std::vector<Tensor> e1_from(const Projections& p) {
  std::vector<Tensor> out;
  for (std::size_t m = 0; m < p.query.size(); ++m) out.push_back(matmul_nt(p.query[m], p.key[m]));
  return out;
}

std::vector<Tensor> e2_from(const Projections& p, const IndexMatrix& index) {
  std::vector<Tensor> out;
  for (std::size_t m = 0; m < p.query.size(); ++m) out.push_back(indexed_row_dot(p.query[m], p.position[m], index));
  return out;
}

std::vector<Tensor> e3_from(const Projections& p, const TransformerParams& params) {
  std::vector<Tensor> out;
  for (std::size_t m = 0; m < p.key.size(); ++m) out.push_back(transpose(matmul_nt(p.key[m], params.key_bias[m])));
  return out;
}

std::vector<Tensor> e4_from(const Projections& p, const TransformerParams& params, const IndexMatrix& index) {
  std::vector<Tensor> out;
  for (std::size_t m = 0; m < p.position.size(); ++m) {
    out.push_back(indexed_row_dot(repeat_rows(params.position_bias[m], index.rows()), p.position[m], index));
  }
  return out;
}

}  // namespace

std::vector<Tensor> energy_e1(const Tensor& z, const Tensor& x, const TransformerParams& params) {
  require_content_dim(z, params, "query content");
  require_content_dim(x, params, "key content");
  Projections p;
  p.query = project(z, params.query_embed);
  p.key = project(x, params.key_embed);
  return e1_from(p);
}

std::vector<Tensor> energy_e2(const Tensor& z, const OffsetTable& offsets, const TransformerParams& params) {
  require_content_dim(z, params, "query content");
  require_offsets(offsets, params);
  if (offsets.index.rows() != z.rows()) throw ContractError("offset table rows do not match the query count");
  Projections p;
  p.query = project(z, params.query_embed);
  p.position = project(Tensor::constant(offsets.encodings), params.position_embed);
  return e2_from(p, offsets.index);
}

std::vector<Tensor> energy_e3(const Tensor& x, const TransformerParams& params) {
  require_content_dim(x, params, "key content");
  Projections p;
  p.key = project(x, params.key_embed);
  return e3_from(p, params);
}

std::vector<Tensor> energy_e4(const OffsetTable& offsets, const TransformerParams& params) {
  require_offsets(offsets, params);
  Projections p;
  p.position = project(Tensor::constant(offsets.encodings), params.position_embed);
  return e4_from(p, params, offsets.index);
}

EnergyTerms compute_energy_terms(const Beta& beta, const Tensor& z, const Tensor& x, const OffsetTable& offsets,
                                 const TransformerParams& params) {
  require_content_dim(z, params, "query content");
  require_content_dim(x, params, "key content");
  EnergyTerms terms;
  terms.num_queries = z.rows();
  terms.num_keys = x.rows();
  if (beta.uses_position_projection()) {
    require_offsets(offsets, params);
    if (offsets.index.rows() != z.rows() || offsets.index.cols() != x.rows()) {
      throw ContractError("offset table is " + shape_string(offsets.index.rows(), offsets.index.cols()) +
                          ", attention is " + shape_string(z.rows(), x.rows()));
    }
  }
  Projections p;
  if (beta.uses_query_projection()) p.query = project(z, params.query_embed);
  if (beta.uses_key_projection()) p.key = project(x, params.key_embed);
  if (beta.uses_position_projection()) p.position = project(Tensor::constant(offsets.encodings), params.position_embed);
  if (beta.term(1)) terms.e1 = e1_from(p);
  if (beta.term(2)) terms.e2 = e2_from(p, offsets.index);
  if (beta.term(3)) terms.e3 = e3_from(p, params);
  if (beta.term(4)) terms.e4 = e4_from(p, params, offsets.index);
  return terms;
}

std::vector<Tensor> attention_weights(const AttentionConfig& config, const EnergyTerms& terms,
                                      const std::optional<Mask>& mask) {
  const Beta& beta = config.beta;
  if (!beta.any() && !config.allow_uniform) {
    throw ContractError("attention_weights: no active term and uniform mode not enabled");
  }
  if (terms.num_keys == 0) throw DegenerateRegionError("attention_weights: empty key set");
  std::vector<Tensor> weights;
  for (Index m = 0; m < config.heads; ++m) {
    const auto i = static_cast<std::size_t>(m);
    Tensor logits;
    auto accumulate = [&logits](const Tensor& t) { logits = logits.defined() ? add(logits, t) : t; };
    if (beta.term(1)) accumulate(terms.e1.at(i));
    if (beta.term(2)) accumulate(terms.e2.at(i));
    if (beta.term(4)) accumulate(terms.e4.at(i));
    if (beta.term(3)) {
      if (logits.defined()) {
        logits = add_row(logits, terms.e3.at(i));
      } else {
        logits = repeat_rows(terms.e3.at(i), terms.num_queries);
      }
    }
    if (!logits.defined()) logits = Tensor::constant(Matrix::Zero(terms.num_queries, terms.num_keys));
    weights.push_back(softmax(logits, 1, mask));
  }
  return weights;
}

Tensor aggregate(const std::vector<Tensor>& weights, const Tensor& x, const TransformerParams& params) {
  if (static_cast<Index>(weights.size()) != params.heads()) {
    throw ContractError("aggregate: " + std::to_string(weights.size()) + " weight matrices for " +
                        std::to_string(params.heads()) + " heads");
  }
  require_content_dim(x, params, "key content");
  Tensor y;
  for (std::size_t m = 0; m < weights.size(); ++m) {
    if (weights[m].cols() != x.rows()) throw DimensionError("aggregate: weight columns do not match key count");
    Tensor values = matmul_nt(x, params.value_proj[m]);
    Tensor head = matmul_nt(matmul(weights[m], values), params.output_proj[m]);
    y = y.defined() ? add(y, head) : head;
  }
  return y;
}

Tensor transformer_layer_forward(const Tensor& z, const Tensor& x, const AttentionConfig& config,
                                 const TransformerParams& params, const AttentionGeometry& geometry,
                                 bool encoder_decoder, Placement placement) {
  config.validate();
  if (!encoder_decoder && !z.same_as(x)) {
    throw ContractError("self-attention requires the query and key content to be the same tensor");
  }
  if (params.heads() != config.heads) throw ContractError("parameter head count does not match the configuration");
  if (z.rows() != geometry.queries.count() || x.rows() != geometry.keys.count()) {
    throw ContractError("content rows do not match the attention geometry");
  }
  EnergyTerms terms = compute_energy_terms(config.beta, z, x, geometry.offsets, params);
  Tensor y = aggregate(attention_weights(config, terms, geometry.region_mask), x, params);
  if (placement == Placement::kPlain) return y;
  if (!params.gate.defined()) throw ContractError("gated residual placement needs a gate parameter");
  if (z.cols() != y.cols()) throw ContractError("gated residual placement needs matching input and output widths");
  return add(z, mul_scalar(y, params.gate));
}

}  // namespace sattn
