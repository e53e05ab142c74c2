// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Training loops: truncated BPTT for the char LM (state carried across
// unroll windows, detached at window boundaries) and a last-state
// classifier, both on Adam + Noam scheduling with global-norm clipping.

#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "sru/corpus.hpp"
#include "sru/model.hpp"
#include "sru/optim.hpp"

namespace sru {

struct TrainConfig {
  int64_t batch = 32;
  int64_t unroll = 64;
  int64_t max_steps = 1000;
  int64_t warmup = 2000;
  int64_t eval_every = 200;
  double lr_factor = 3.0;
  double weight_decay = 1e-7;
  double grad_clip = 0.3;
  uint64_t seed = 1;

  void validate() const;
};

struct TrainMetrics {
  int64_t step = 0;
  double train_loss = 0.0;  // mean nats/token since the previous eval
  double valid_loss = 0.0;  // nats/token
  double bpc = 0.0;         // valid_loss / ln 2 (char LM)
  double lr = 0.0;
  double wall_ms = 0.0;
  double valid_accuracy = 0.0;  // classifier only
};

using MetricsSink = std::function<void(const TrainMetrics&)>;

struct CharLmRun {
  std::vector<TrainMetrics> history;
  std::vector<double> train_loss_trace;  // one entry per step
  double best_valid_bpc = std::numeric_limits<double>::infinity();
  double final_valid_bpc = std::numeric_limits<double>::infinity();
};

// A resumable training session: model, optimizer moments, step counter.
struct SruLmSession {
  SruStackModel model;
  AdamState adam;
  int64_t step = 0;
};

struct LstmLmSession {
  LstmStackModel model;
  AdamState adam;
  int64_t step = 0;
};

SruLmSession make_sru_lm_session(const ModelSpec& spec, uint64_t seed);
LstmLmSession make_lstm_lm_session(const ModelSpec& spec, uint64_t seed);

// Runs until cfg.max_steps (absolute step count; a resumed session
// continues from its carried step). Evaluates on the validation split every
// eval_every steps and at the end.
CharLmRun train_char_lm(SruLmSession& session, const CharCorpus& corpus,
                        const TrainConfig& cfg, const MetricsSink& sink = {});
CharLmRun train_char_lm(LstmLmSession& session, const CharCorpus& corpus,
                        const TrainConfig& cfg, const MetricsSink& sink = {});

// Validation loss of the current model over the valid split.
double eval_char_lm(const SruLmSession& session, const CharCorpus& corpus,
                    const TrainConfig& cfg);
double eval_char_lm(const LstmLmSession& session, const CharCorpus& corpus,
                    const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

struct LabeledDataset {
  std::vector<std::vector<int32_t>> seqs;
  std::vector<int32_t> labels;
  int64_t vocab_size = 0;
  int64_t n_classes = 2;
};

// Balanced synthetic task: label 1 iff token id 1 occurs in the sequence.
// Learnable by construction; used by the training experiments.
LabeledDataset make_contains_token_dataset(int64_t n, int64_t len,
                                           int64_t vocab, uint64_t seed);

struct ClassifierRun {
  std::vector<TrainMetrics> history;
  std::vector<double> train_loss_trace;  // per step
  double final_valid_accuracy = 0.0;
  int64_t skipped_sequences = 0;  // empty inputs dropped with a warning count
};

ClassifierRun train_classifier(const LabeledDataset& train,
                               const LabeledDataset& valid,
                               const ModelSpec& spec, const TrainConfig& cfg,
                               const MetricsSink& sink = {});

// Accuracy of a trained model on a dataset.
double classifier_accuracy(SruStackModel& model, const LabeledDataset& data,
                           int64_t batch);

// The training entry point used by train_classifier; exposed so callers can
// keep the model.
ClassifierRun train_classifier_model(SruStackModel& model,
                                     const LabeledDataset& train,
                                     const LabeledDataset& valid,
                                     const TrainConfig& cfg,
                                     const MetricsSink& sink = {});

}  // namespace sru
