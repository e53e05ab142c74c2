// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/model.hpp"

#include <cmath>
#include <cstring>

#include "sru/gemm.hpp"
#include "sru/init_calib.hpp"

namespace sru {

void ModelSpec::validate() const {
  if (layers < 1) throw ParamError("ModelSpec: layers must be >= 1");
  if (d_model < 1) throw ParamError("ModelSpec: d_model must be >= 1");
  if (vocab_size < 1) throw ParamError("ModelSpec: vocab_size must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw ParamError("ModelSpec: dropout must lie in [0, 1)");
  }
  if (kind != ModelKind::classifier && bidirectional) {
    throw ParamError("ModelSpec: language models are causal, bidirectional only fits the classifier");
  }
  if (kind == ModelKind::classifier && n_classes < 2) {
    throw ParamError("ModelSpec: classifier needs n_classes >= 2");
  }
}

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::char_lm: return "char_lm";
    case ModelKind::classifier: return "classifier";
    case ModelKind::lstm_char_lm: return "lstm_char_lm";
  }
  return "?";
}

namespace {

// Substream ids for reproducible initialization.
enum : uint64_t { kEmbedStream = 1, kHeadStream = 2, kLayerStream = 16, kDropStream = 1u << 20 };

std::vector<SruLayerConfig> stack_configs(const ModelSpec& spec) {
  std::vector<SruLayerConfig> cfgs;
  const int dirs = spec.bidirectional ? 2 : 1;
  for (int k = 0; k < spec.layers; ++k) {
    SruLayerConfig c;
    c.d_in = (k == 0) ? spec.d_model : dirs * spec.d_model;
    c.d_out = spec.d_model;
    c.bidirectional = spec.bidirectional;
    c.highway_bias = spec.highway_bias;
    c.use_state_in_gates = spec.use_state_in_gates;
    c.use_scaling_correction = spec.use_scaling_correction;
    c.use_highway = spec.use_highway;
    c.projection_dim = spec.d_proj;
    c.validate();
    cfgs.push_back(c);
  }
  return cfgs;
}

Tensor<double> embed_tokens(const Tensor<double>& table,
                            const std::vector<int32_t>& tokens, int64_t L,
                            int64_t B) {
  const int64_t d = table.extent(1), v = table.extent(0);
  if (static_cast<int64_t>(tokens.size()) != L * B) {
    throw DimError("embed: token count does not match L*B");
  }
  Tensor<double> x({L, B, d});
  for (int64_t i = 0; i < L * B; ++i) {
    const int32_t id = tokens[static_cast<size_t>(i)];
    if (id < 0 || id >= v) throw IngestError("embed: token id out of vocabulary");
    std::memcpy(x.data() + i * d, table.data() + id * d,
                sizeof(double) * static_cast<size_t>(d));
  }
  return x;
}

void embed_backward(Tensor<double>& g_table, const std::vector<int32_t>& tokens,
                    const Tensor<double>& g_x) {
  const int64_t d = g_table.extent(1);
  const int64_t n = g_x.numel() / d;
  for (int64_t i = 0; i < n; ++i) {
    double* row = g_table.data() + tokens[static_cast<size_t>(i)] * d;
    const double* g = g_x.data() + i * d;
    for (int64_t j = 0; j < d; ++j) row[j] += g[j];
  }
}

// Inverted dropout mask: 0 with probability p, else 1/(1-p).
Tensor<double> dropout_mask(const std::vector<int64_t>& shape, double p,
                            const SeededRng& rng) {
  Tensor<double> mask(shape);
  const double keep = 1.0 / (1.0 - p);
  double* m = mask.data();
  const int64_t n = mask.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    m[i] = rng.unit(static_cast<uint64_t>(i)) < p ? 0.0 : keep;
  }
  return mask;
}

void apply_mask(Tensor<double>& x, const Tensor<double>& mask) {
  double* xp = x.data();
  const double* mp = mask.data();
  const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) xp[i] *= mp[i];
}

}  // namespace

SruStackModel build_sru_model(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  SruStackModel m;
  m.spec = spec;
  m.cfgs = stack_configs(spec);
  const SeededRng rng(seed);
  m.embedding = Tensor<double>({spec.vocab_size, spec.d_model});
  uniform_fill(m.embedding, std::sqrt(3.0 / static_cast<double>(spec.d_model)),
               rng.substream(kEmbedStream));
  for (int k = 0; k < spec.layers; ++k) {
    m.layers.push_back(init_layer(m.cfgs[static_cast<size_t>(k)],
                                  rng.substream(kLayerStream + static_cast<uint64_t>(k))));
  }
  const int64_t d_top = m.d_top();
  m.head_w = Tensor<double>({spec.head_width(), d_top});
  m.head_b = Tensor<double>({spec.head_width()});
  uniform_fill(m.head_w, std::sqrt(3.0 / static_cast<double>(d_top)),
               rng.substream(kHeadStream));
  return m;
}

std::vector<NamedTensor> SruStackModel::named_params() {
  std::vector<NamedTensor> out;
  out.push_back({"embedding", &embedding});
  for (size_t k = 0; k < layers.size(); ++k) {
    auto& L = layers[k];
    const std::string p = "layer" + std::to_string(k) + ".";
    if (!L.factorized()) {
      out.push_back({p + "w_all", &L.w_all});
    } else {
      out.push_back({p + "p", &L.p});
      out.push_back({p + "q", &L.q});
      if (L.gate_blocks == 4) out.push_back({p + "skip_w", &L.skip_w});
    }
    out.push_back({p + "v_f", &L.v_f});
    out.push_back({p + "v_r", &L.v_r});
    out.push_back({p + "b_f", &L.b_f});
    out.push_back({p + "b_r", &L.b_r});
  }
  out.push_back({"head.w", &head_w});
  out.push_back({"head.b", &head_b});
  return out;
}

std::vector<NamedTensor> SruStackGrads::named(const SruStackModel& m) {
  std::vector<NamedTensor> out;
  out.push_back({"embedding", &g_embedding});
  for (size_t k = 0; k < g_layers.size(); ++k) {
    auto& G = g_layers[k];
    const std::string p = "layer" + std::to_string(k) + ".";
    if (!m.layers[k].factorized()) {
      out.push_back({p + "w_all", &G.g_w_all});
    } else {
      out.push_back({p + "p", &G.g_p});
      out.push_back({p + "q", &G.g_q});
      if (m.layers[k].gate_blocks == 4) out.push_back({p + "skip_w", &G.g_skip_w});
    }
    out.push_back({p + "v_f", &G.g_v_f});
    out.push_back({p + "v_r", &G.g_v_r});
    out.push_back({p + "b_f", &G.g_b_f});
    out.push_back({p + "b_r", &G.g_b_r});
  }
  out.push_back({"head.w", &g_head_w});
  out.push_back({"head.b", &g_head_b});
  return out;
}

SruStackTrace sru_stack_forward(const SruStackModel& m,
                                const std::vector<int32_t>& tokens, int64_t L,
                                int64_t B,
                                const std::vector<Tensor<double>>* c0,
                                bool training, const SeededRng& drop_rng) {
  SruStackTrace tr;
  Tensor<double> x = embed_tokens(m.embedding, tokens, L, B);
  const bool drop = training && m.spec.dropout_p > 0.0;
  for (size_t k = 0; k < m.layers.size(); ++k) {
    const SruLayerConfig& cfg = m.cfgs[k];
    if (drop) {
      Tensor<double> mask = dropout_mask(x.shape(), m.spec.dropout_p,
                                         drop_rng.substream(kDropStream + k));
      apply_mask(x, mask);
      tr.drop_masks.push_back(std::move(mask));
    } else {
      tr.drop_masks.emplace_back();
    }
    Tensor<double> init =
        (c0 != nullptr) ? (*c0)[k] : Tensor<double>({B, cfg.dirs() * cfg.d_out});
    auto res = forward_layer(cfg, m.layers[k], x, init);
    tr.c_last.push_back(std::move(res.c_last));
    tr.tapes.push_back(std::move(res.tape));
    x = tr.tapes.back().h;  // next layer's input
  }
  return tr;
}

SruStackGrads sru_stack_backward(const SruStackModel& m, const SruStackTrace& tr,
                                 const std::vector<int32_t>& tokens,
                                 const Tensor<double>& grad_h_top) {
  SruStackGrads g;
  g.g_embedding = Tensor<double>({m.spec.vocab_size, m.spec.d_model});
  g.g_layers.resize(m.layers.size());
  Tensor<double> grad_h = grad_h_top;
  for (int k = static_cast<int>(m.layers.size()) - 1; k >= 0; --k) {
    const SruLayerConfig& cfg = m.cfgs[static_cast<size_t>(k)];
    const SruTapeT<double>& tape = tr.tapes[static_cast<size_t>(k)];
    Tensor<double> grad_c_last({tape.batch(), cfg.dirs() * cfg.d_out});
    g.g_layers[static_cast<size_t>(k)] =
        backward_fused(cfg, m.layers[static_cast<size_t>(k)], tape, grad_h, grad_c_last);
    grad_h = std::move(g.g_layers[static_cast<size_t>(k)].g_x);
    const Tensor<double>& mask = tr.drop_masks[static_cast<size_t>(k)];
    if (!mask.empty()) apply_mask(grad_h, mask);
  }
  embed_backward(g.g_embedding, tokens, grad_h);
  return g;
}

// ---------------------------------------------------------------------------
// LSTM stack
// ---------------------------------------------------------------------------

LstmStackModel build_lstm_model(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  LstmStackModel m;
  m.spec = spec;
  const SeededRng rng(seed);
  m.embedding = Tensor<double>({spec.vocab_size, spec.d_model});
  uniform_fill(m.embedding, std::sqrt(3.0 / static_cast<double>(spec.d_model)),
               rng.substream(kEmbedStream));
  for (int k = 0; k < spec.layers; ++k) {
    m.layers.push_back(init_lstm_layer(spec.d_model, spec.d_model,
                                       rng.substream(kLayerStream + static_cast<uint64_t>(k))));
  }
  m.head_w = Tensor<double>({spec.head_width(), spec.d_model});
  m.head_b = Tensor<double>({spec.head_width()});
  uniform_fill(m.head_w, std::sqrt(3.0 / static_cast<double>(spec.d_model)),
               rng.substream(kHeadStream));
  return m;
}

std::vector<NamedTensor> LstmStackModel::named_params() {
  std::vector<NamedTensor> out;
  out.push_back({"embedding", &embedding});
  for (size_t k = 0; k < layers.size(); ++k) {
    const std::string p = "layer" + std::to_string(k) + ".";
    out.push_back({p + "w_x", &layers[k].w_x});
    out.push_back({p + "w_h", &layers[k].w_h});
    out.push_back({p + "b", &layers[k].b});
  }
  out.push_back({"head.w", &head_w});
  out.push_back({"head.b", &head_b});
  return out;
}

std::vector<NamedTensor> LstmStackGrads::named(const LstmStackModel&) {
  std::vector<NamedTensor> out;
  out.push_back({"embedding", &g_embedding});
  for (size_t k = 0; k < g_layers.size(); ++k) {
    const std::string p = "layer" + std::to_string(k) + ".";
    out.push_back({p + "w_x", &g_layers[k].g_w_x});
    out.push_back({p + "w_h", &g_layers[k].g_w_h});
    out.push_back({p + "b", &g_layers[k].g_b});
  }
  out.push_back({"head.w", &g_head_w});
  out.push_back({"head.b", &g_head_b});
  return out;
}

LstmStackTrace lstm_stack_forward(const LstmStackModel& m,
                                  const std::vector<int32_t>& tokens, int64_t L,
                                  int64_t B, const std::vector<LstmState>* s0,
                                  bool training, const SeededRng& drop_rng) {
  LstmStackTrace tr;
  Tensor<double> x = embed_tokens(m.embedding, tokens, L, B);
  const bool drop = training && m.spec.dropout_p > 0.0;
  for (size_t k = 0; k < m.layers.size(); ++k) {
    if (drop) {
      Tensor<double> mask = dropout_mask(x.shape(), m.spec.dropout_p,
                                         drop_rng.substream(kDropStream + k));
      apply_mask(x, mask);
      tr.drop_masks.push_back(std::move(mask));
    } else {
      tr.drop_masks.emplace_back();
    }
    Tensor<double> h0({B, m.spec.d_model}), c0({B, m.spec.d_model});
    if (s0 != nullptr) {
      h0 = (*s0)[k].h;
      c0 = (*s0)[k].c;
    }
    tr.tapes.push_back(lstm_forward(m.layers[k], x, h0, c0));
    x = tr.tapes.back().h;
  }
  return tr;
}

LstmStackGrads lstm_stack_backward(const LstmStackModel& m,
                                   const LstmStackTrace& tr,
                                   const std::vector<int32_t>& tokens,
                                   const Tensor<double>& grad_h_top) {
  LstmStackGrads g;
  g.g_embedding = Tensor<double>({m.spec.vocab_size, m.spec.d_model});
  g.g_layers.resize(m.layers.size());
  Tensor<double> grad_h = grad_h_top;
  const int64_t B = tr.tapes.front().x.extent(1);
  for (int k = static_cast<int>(m.layers.size()) - 1; k >= 0; --k) {
    Tensor<double> zero_state({B, m.spec.d_model});
    g.g_layers[static_cast<size_t>(k)] =
        lstm_backward(m.layers[static_cast<size_t>(k)], tr.tapes[static_cast<size_t>(k)],
                      grad_h, zero_state, zero_state);
    grad_h = std::move(g.g_layers[static_cast<size_t>(k)].g_x);
    const Tensor<double>& mask = tr.drop_masks[static_cast<size_t>(k)];
    if (!mask.empty()) apply_mask(grad_h, mask);
  }
  embed_backward(g.g_embedding, tokens, grad_h);
  return g;
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

Tensor<double> linear_forward(const Tensor<double>& x, const Tensor<double>& w,
                              const Tensor<double>& b) {
  const int64_t k = w.extent(1), out = w.extent(0);
  if (x.numel() % k != 0) throw DimError("linear: weight/input extents mismatch");
  const int64_t n = x.numel() / k;  // leading axes flattened to rows
  Tensor<double> y({n, out});
  matmul(Trans::no, Trans::yes, n, out, k, x.data(), k, w.data(), k, y.data(), out);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    double* row = y.data() + i * out;
    for (int64_t j = 0; j < out; ++j) row[j] += b(j);
  }
  return y;
}

void linear_backward(const Tensor<double>& x, const Tensor<double>& w,
                     const Tensor<double>& glogits, Tensor<double>* g_x,
                     Tensor<double>* g_w, Tensor<double>* g_b) {
  const int64_t k = w.extent(1), out = w.extent(0);
  const int64_t n = x.numel() / k;
  if (g_w != nullptr) {
    *g_w = Tensor<double>({out, k});
    matmul(Trans::yes, Trans::no, out, k, n, glogits.data(), out, x.data(), k,
           g_w->data(), k);
  }
  if (g_b != nullptr) {
    *g_b = Tensor<double>({out});
    for (int64_t i = 0; i < n; ++i) {
      const double* row = glogits.data() + i * out;
      for (int64_t j = 0; j < out; ++j) (*g_b)(j) += row[j];
    }
  }
  if (g_x != nullptr) {
    *g_x = Tensor<double>(x.shape());
    matmul(Trans::no, Trans::no, n, k, out, glogits.data(), out, w.data(), k,
           g_x->data(), k);
  }
}

double softmax_xent_mean(const Tensor<double>& logits,
                         const std::vector<int32_t>& targets,
                         Tensor<double>* dlogits) {
  const int64_t n = logits.extent(0), v = logits.extent(1);
  if (static_cast<int64_t>(targets.size()) != n) {
    throw DimError("softmax_xent: target count mismatch");
  }
  int64_t active = 0;
  for (int64_t i = 0; i < n; ++i) active += targets[static_cast<size_t>(i)] >= 0;
  if (active == 0) throw ParamError("softmax_xent: no active rows");
  if (dlogits != nullptr) *dlogits = Tensor<double>({n, v});

  // Per-row losses first, fixed-order sum after: the result must not depend
  // on the worker count.
  std::vector<double> row_loss(static_cast<size_t>(n), 0.0);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const int32_t t = targets[static_cast<size_t>(i)];
    if (t < 0) continue;
    const double* row = logits.data() + i * v;
    double mx = row[0];
    for (int64_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (int64_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
    const double lse = mx + std::log(z);
    row_loss[static_cast<size_t>(i)] = lse - row[t];
    if (dlogits != nullptr) {
      double* drow = dlogits->data() + i * v;
      const double inv = 1.0 / (z * static_cast<double>(active));
      for (int64_t j = 0; j < v; ++j) drow[j] = std::exp(row[j] - mx) * inv;
      drow[t] -= 1.0 / static_cast<double>(active);
    }
  }
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) total += row_loss[static_cast<size_t>(i)];
  return total / static_cast<double>(active);
}

int64_t sru_layer_param_count(const SruLayerConfig& cfg) {
  const int64_t d = cfg.d_out, d_in = cfg.d_in;
  int64_t per_dir = 4 * d;  // v_f, v_r, b_f, b_r
  if (cfg.projection_dim > 0) {
    per_dir += 3 * d * cfg.projection_dim + cfg.projection_dim * d_in;
  } else {
    per_dir += 3 * d * d_in;
  }
  if (cfg.needs_skip_proj()) per_dir += d * d_in;
  return per_dir * cfg.dirs();
}

int64_t count_params(const ModelSpec& spec) {
  spec.validate();
  int64_t total = spec.vocab_size * spec.d_model;  // embedding
  if (spec.kind == ModelKind::lstm_char_lm) {
    for (int k = 0; k < spec.layers; ++k) {
      total += lstm_layer_param_count(spec.d_model, spec.d_model);
    }
    total += spec.head_width() * spec.d_model + spec.head_width();
    return total;
  }
  const auto cfgs = stack_configs(spec);
  for (const auto& cfg : cfgs) total += sru_layer_param_count(cfg);
  const int64_t d_top = cfgs.back().dirs() * spec.d_model;
  total += spec.head_width() * d_top + spec.head_width();
  return total;
}

}  // namespace sru
