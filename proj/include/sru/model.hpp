// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Model stacks: learned embeddings, stacked SRU (or reference LSTM) layers
// with dropout between layers, and a linear readout. The char LM predicts
// the next byte at every position; the classifier reads the last output
// state of the top layer.

#pragma once

#include <string>
#include <vector>

#include "sru/lstm.hpp"
#include "sru/rng.hpp"
#include "sru/sru_grad.hpp"
#include "sru/sru_layer.hpp"

namespace sru {

enum class ModelKind { char_lm, classifier, lstm_char_lm };

struct ModelSpec {
  ModelKind kind = ModelKind::char_lm;
  int layers = 2;
  int64_t d_model = 128;
  int64_t d_proj = 0;  // > 0 factorizes every layer's gate stack
  int64_t vocab_size = 0;
  int64_t n_classes = 2;       // classifier head width
  bool bidirectional = false;  // classifier only; LMs are causal
  double highway_bias = 0.0;
  double dropout_p = 0.0;
  bool use_state_in_gates = true;
  bool use_scaling_correction = true;
  bool use_highway = true;

  void validate() const;
  int64_t head_width() const {
    return kind == ModelKind::classifier ? n_classes : vocab_size;
  }
};

const char* model_kind_name(ModelKind kind);

struct NamedTensor {
  std::string name;
  Tensor<double>* tensor;
};

// ---------------------------------------------------------------------------
// SRU stack
// ---------------------------------------------------------------------------

struct SruStackModel {
  ModelSpec spec;
  std::vector<SruLayerConfig> cfgs;
  Tensor<double> embedding;  // [vocab, d_model]
  std::vector<SruLayerParams> layers;
  Tensor<double> head_w;  // [head_width, d_top]
  Tensor<double> head_b;  // [head_width]

  int64_t d_top() const { return cfgs.back().dirs() * spec.d_model; }
  std::vector<NamedTensor> named_params();
};

SruStackModel build_sru_model(const ModelSpec& spec, uint64_t seed);

struct SruStackTrace {
  std::vector<SruTapeT<double>> tapes;
  std::vector<Tensor<double>> drop_masks;  // empty tensors when p == 0
  std::vector<Tensor<double>> c_last;      // per layer [B, dirs*d]
  const Tensor<double>& h_top() const { return tapes.back().h; }
};

// tokens laid out row-major (l, b). c0 may be empty (zeros). Dropout is
// applied to each layer's input when training and spec.dropout_p > 0, with
// masks drawn from drop_rng so reruns match.
SruStackTrace sru_stack_forward(const SruStackModel& m,
                                const std::vector<int32_t>& tokens, int64_t L,
                                int64_t B,
                                const std::vector<Tensor<double>>* c0,
                                bool training, const SeededRng& drop_rng);

struct SruStackGrads {
  Tensor<double> g_embedding;
  std::vector<SruGradientsT<double>> g_layers;
  Tensor<double> g_head_w, g_head_b;
  std::vector<NamedTensor> named(const SruStackModel& m);
};

// grad_h_top: [L, B, d_top]. States across windows are detached, so no
// grad_c_last enters here.
SruStackGrads sru_stack_backward(const SruStackModel& m, const SruStackTrace& tr,
                                 const std::vector<int32_t>& tokens,
                                 const Tensor<double>& grad_h_top);

// ---------------------------------------------------------------------------
// LSTM stack (baseline)
// ---------------------------------------------------------------------------

struct LstmStackModel {
  ModelSpec spec;
  Tensor<double> embedding;
  std::vector<LstmParams> layers;
  Tensor<double> head_w, head_b;
  std::vector<NamedTensor> named_params();
};

LstmStackModel build_lstm_model(const ModelSpec& spec, uint64_t seed);

struct LstmStackTrace {
  std::vector<LstmTapeT<double>> tapes;
  std::vector<Tensor<double>> drop_masks;
  const Tensor<double>& h_top() const { return tapes.back().h; }
};

struct LstmState {
  Tensor<double> h, c;  // [B, d]
};

LstmStackTrace lstm_stack_forward(const LstmStackModel& m,
                                  const std::vector<int32_t>& tokens, int64_t L,
                                  int64_t B, const std::vector<LstmState>* s0,
                                  bool training, const SeededRng& drop_rng);

struct LstmStackGrads {
  Tensor<double> g_embedding;
  std::vector<LstmGradientsT<double>> g_layers;
  Tensor<double> g_head_w, g_head_b;
  std::vector<NamedTensor> named(const LstmStackModel& m);
};

LstmStackGrads lstm_stack_backward(const LstmStackModel& m,
                                   const LstmStackTrace& tr,
                                   const std::vector<int32_t>& tokens,
                                   const Tensor<double>& grad_h_top);

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

// logits = x * W^T + b for [N, k] rows.
Tensor<double> linear_forward(const Tensor<double>& x, const Tensor<double>& w,
                              const Tensor<double>& b);
void linear_backward(const Tensor<double>& x, const Tensor<double>& w,
                     const Tensor<double>& glogits, Tensor<double>* g_x,
                     Tensor<double>* g_w, Tensor<double>* g_b);

// Mean cross entropy (nats) over rows; dlogits optional. target < 0 marks a
// row to ignore.
double softmax_xent_mean(const Tensor<double>& logits,
                         const std::vector<int32_t>& targets,
                         Tensor<double>* dlogits);

// Exact learnable-scalar counts.
int64_t sru_layer_param_count(const SruLayerConfig& cfg);
int64_t count_params(const ModelSpec& spec);

}  // namespace sru
