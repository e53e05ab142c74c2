// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

namespace sru {

namespace {

constexpr double kLn2 = 0.6931471805599453;
constexpr uint64_t kDropBase = 0xD0000000ull;

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct StreamPlan {
  int64_t batch = 0;
  int64_t unroll = 0;
  int64_t stream_len = 0;
  int64_t steps_per_epoch = 0;
};

StreamPlan plan_streams(int64_t n_ids, int64_t batch, int64_t unroll,
                        bool shrink_to_fit) {
  StreamPlan p;
  p.batch = batch;
  p.unroll = unroll;
  p.stream_len = n_ids / p.batch;
  if (shrink_to_fit) {
    while (p.batch > 1 && p.stream_len < p.unroll + 1) {
      p.batch /= 2;
      p.stream_len = n_ids / p.batch;
    }
    if (p.stream_len < 2) throw IngestError("corpus split too small to evaluate");
    p.unroll = std::min(p.unroll, p.stream_len - 1);
  } else if (p.stream_len < p.unroll + 1) {
    throw IngestError("corpus too small for batch x unroll");
  }
  p.steps_per_epoch = std::max<int64_t>(1, (p.stream_len - 1) / p.unroll);
  return p;
}

void fill_window(const std::vector<int32_t>& ids, const StreamPlan& p,
                 int64_t window, std::vector<int32_t>& in,
                 std::vector<int32_t>& tgt) {
  const int64_t L = p.unroll, B = p.batch, off = window * L;
  in.resize(static_cast<size_t>(L * B));
  tgt.resize(static_cast<size_t>(L * B));
  for (int64_t l = 0; l < L; ++l) {
    for (int64_t b = 0; b < B; ++b) {
      const int64_t pos = b * p.stream_len + off + l;
      in[static_cast<size_t>(l * B + b)] = ids[static_cast<size_t>(pos)];
      tgt[static_cast<size_t>(l * B + b)] = ids[static_cast<size_t>(pos + 1)];
    }
  }
}

// Session adapters so one training loop drives both architectures.

struct SruAdapter {
  using Trace = SruStackTrace;
  using Grads = SruStackGrads;
  using State = std::vector<Tensor<double>>;

  static State zero_state(const SruStackModel& m, int64_t B) {
    State s;
    for (const auto& cfg : m.cfgs) s.emplace_back(std::vector<int64_t>{B, cfg.dirs() * cfg.d_out});
    return s;
  }
  static Trace forward(const SruStackModel& m, const std::vector<int32_t>& tok,
                       int64_t L, int64_t B, const State* st, bool training,
                       const SeededRng& rng) {
    return sru_stack_forward(m, tok, L, B, st, training, rng);
  }
  static Grads backward(const SruStackModel& m, const Trace& tr,
                        const std::vector<int32_t>& tok, const Tensor<double>& gh) {
    return sru_stack_backward(m, tr, tok, gh);
  }
  static void carry(State& st, const Trace& tr) {
    for (size_t k = 0; k < st.size(); ++k) st[k] = tr.c_last[k];
  }
};

struct LstmAdapter {
  using Trace = LstmStackTrace;
  using Grads = LstmStackGrads;
  using State = std::vector<LstmState>;

  static State zero_state(const LstmStackModel& m, int64_t B) {
    State s;
    for (size_t k = 0; k < m.layers.size(); ++k) {
      s.push_back({Tensor<double>({B, m.spec.d_model}), Tensor<double>({B, m.spec.d_model})});
    }
    return s;
  }
  static Trace forward(const LstmStackModel& m, const std::vector<int32_t>& tok,
                       int64_t L, int64_t B, const State* st, bool training,
                       const SeededRng& rng) {
    return lstm_stack_forward(m, tok, L, B, st, training, rng);
  }
  static Grads backward(const LstmStackModel& m, const Trace& tr,
                        const std::vector<int32_t>& tok, const Tensor<double>& gh) {
    return lstm_stack_backward(m, tr, tok, gh);
  }
  static void carry(State& st, const Trace& tr) {
    const int64_t L = tr.tapes.front().x.extent(0);
    const int64_t B = tr.tapes.front().x.extent(1);
    for (size_t k = 0; k < st.size(); ++k) {
      const auto& tape = tr.tapes[k];
      const int64_t d = tape.c.extent(2);
      for (int64_t b = 0; b < B; ++b) {
        std::memcpy(st[k].h.data() + b * d, tape.h.data() + ((L - 1) * B + b) * d,
                    sizeof(double) * static_cast<size_t>(d));
        std::memcpy(st[k].c.data() + b * d, tape.c.data() + ((L - 1) * B + b) * d,
                    sizeof(double) * static_cast<size_t>(d));
      }
    }
  }
};

template <typename Adapter, typename Model>
double eval_lm(const Model& model, const Tensor<double>& head_w,
               const Tensor<double>& head_b, const std::vector<int32_t>& ids,
               const TrainConfig& cfg) {
  const StreamPlan p = plan_streams(static_cast<int64_t>(ids.size()), cfg.batch,
                                    cfg.unroll, /*shrink_to_fit=*/true);
  typename Adapter::State st = Adapter::zero_state(model, p.batch);
  std::vector<int32_t> in, tgt;
  double total = 0.0;
  int64_t tokens = 0;
  const SeededRng rng(0);
  for (int64_t w = 0; w < p.steps_per_epoch; ++w) {
    fill_window(ids, p, w, in, tgt);
    auto tr = Adapter::forward(model, in, p.unroll, p.batch, &st, false, rng);
    Tensor<double> logits = linear_forward(tr.h_top(), head_w, head_b);
    total += softmax_xent_mean(logits, tgt, nullptr) *
             static_cast<double>(p.unroll * p.batch);
    tokens += p.unroll * p.batch;
    Adapter::carry(st, tr);
  }
  return total / static_cast<double>(tokens);
}

template <typename Adapter, typename Session>
CharLmRun lm_train_impl(Session& s, const CharCorpus& corpus,
                        const TrainConfig& cfg, const MetricsSink& sink) {
  cfg.validate();
  auto& model = s.model;
  if (model.spec.vocab_size != corpus.vocab_size) {
    throw IngestError("train_char_lm: model vocabulary (" +
                      std::to_string(model.spec.vocab_size) +
                      ") does not cover the corpus (" +
                      std::to_string(corpus.vocab_size) + ")");
  }
  const StreamPlan p = plan_streams(static_cast<int64_t>(corpus.train_ids.size()),
                                    cfg.batch, cfg.unroll, false);
  auto params = model.named_params();
  if (s.adam.m.empty()) s.adam = make_adam_state(params);
  typename Adapter::State st = Adapter::zero_state(model, p.batch);
  const SeededRng base(cfg.seed);

  CharLmRun run;
  std::vector<int32_t> in, tgt;
  double accum = 0.0;
  int64_t accum_n = 0;
  const double t0 = now_ms();

  // Replay stream position from the carried step so resumed runs continue
  // where they left off (states restart at zero; the trace smooths out).
  while (s.step < cfg.max_steps) {
    const int64_t w = s.step % p.steps_per_epoch;
    if (w == 0) st = Adapter::zero_state(model, p.batch);
    fill_window(corpus.train_ids, p, w, in, tgt);
    auto tr = Adapter::forward(model, in, p.unroll, p.batch, &st, true,
                               base.substream(kDropBase + static_cast<uint64_t>(s.step)));
    Tensor<double> logits = linear_forward(tr.h_top(), model.head_w, model.head_b);
    Tensor<double> dlogits;
    const double loss = softmax_xent_mean(logits, tgt, &dlogits);
    Tensor<double> g_htop, g_hw, g_hb;
    linear_backward(tr.h_top(), model.head_w, dlogits, &g_htop, &g_hw, &g_hb);
    auto grads = Adapter::backward(model, tr, in, g_htop);
    grads.g_head_w = std::move(g_hw);
    grads.g_head_b = std::move(g_hb);
    auto gnamed = grads.named(model);
    clip_gradients(gnamed, cfg.grad_clip);
    const double lr = noam_lr(s.step + 1, cfg.warmup, model.spec.d_model, cfg.lr_factor);
    adam_step(params, gnamed, s.adam, lr, cfg.weight_decay);
    Adapter::carry(st, tr);
    s.step += 1;
    run.train_loss_trace.push_back(loss);
    accum += loss;
    accum_n += 1;

    if (s.step % cfg.eval_every == 0 || s.step == cfg.max_steps) {
      const double vloss =
          eval_lm<Adapter>(model, model.head_w, model.head_b, corpus.valid_ids, cfg);
      TrainMetrics m;
      m.step = s.step;
      m.train_loss = accum / static_cast<double>(std::max<int64_t>(1, accum_n));
      m.valid_loss = vloss;
      m.bpc = vloss / kLn2;
      m.lr = lr;
      m.wall_ms = now_ms() - t0;
      run.history.push_back(m);
      run.best_valid_bpc = std::min(run.best_valid_bpc, m.bpc);
      run.final_valid_bpc = m.bpc;
      if (sink) sink(m);
      accum = 0.0;
      accum_n = 0;
    }
  }
  return run;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch < 1 || unroll < 1 || max_steps < 1 || eval_every < 1) {
    throw ParamError("TrainConfig: batch, unroll, max_steps, eval_every must be positive");
  }
  if (warmup < 1) throw ParamError("TrainConfig: warmup must be >= 1");
  if (!(lr_factor > 0.0)) throw ParamError("TrainConfig: lr_factor must be > 0");
  if (weight_decay < 0.0 || grad_clip < 0.0) {
    throw ParamError("TrainConfig: weight_decay and grad_clip must be >= 0");
  }
}

SruLmSession make_sru_lm_session(const ModelSpec& spec, uint64_t seed) {
  SruLmSession s;
  s.model = build_sru_model(spec, seed);
  s.adam = make_adam_state(s.model.named_params());
  return s;
}

LstmLmSession make_lstm_lm_session(const ModelSpec& spec, uint64_t seed) {
  LstmLmSession s;
  s.model = build_lstm_model(spec, seed);
  s.adam = make_adam_state(s.model.named_params());
  return s;
}

CharLmRun train_char_lm(SruLmSession& session, const CharCorpus& corpus,
                        const TrainConfig& cfg, const MetricsSink& sink) {
  return lm_train_impl<SruAdapter>(session, corpus, cfg, sink);
}

CharLmRun train_char_lm(LstmLmSession& session, const CharCorpus& corpus,
                        const TrainConfig& cfg, const MetricsSink& sink) {
  return lm_train_impl<LstmAdapter>(session, corpus, cfg, sink);
}

double eval_char_lm(const SruLmSession& session, const CharCorpus& corpus,
                    const TrainConfig& cfg) {
  return eval_lm<SruAdapter>(session.model, session.model.head_w,
                             session.model.head_b, corpus.valid_ids, cfg);
}

double eval_char_lm(const LstmLmSession& session, const CharCorpus& corpus,
                    const TrainConfig& cfg) {
  return eval_lm<LstmAdapter>(session.model, session.model.head_w,
                              session.model.head_b, corpus.valid_ids, cfg);
}

// ---------------------------------------------------------------------------
// Classifier
// ---------------------------------------------------------------------------

LabeledDataset make_contains_token_dataset(int64_t n, int64_t len,
                                           int64_t vocab, uint64_t seed) {
  if (vocab < 3 || len < 1 || n < 2) {
    throw ParamError("make_contains_token_dataset: need vocab >= 3, len >= 1, n >= 2");
  }
  LabeledDataset ds;
  ds.vocab_size = vocab;
  ds.n_classes = 2;
  const SeededRng rng(seed);
  uint64_t ctr = 0;
  for (int64_t i = 0; i < n; ++i) {
    const int32_t label = static_cast<int32_t>(i % 2);
    std::vector<int32_t> seq(static_cast<size_t>(len));
    for (int64_t t = 0; t < len; ++t) {
      // Uniform over the vocabulary with token 1 excluded.
      const int64_t v = static_cast<int64_t>(rng.unit(ctr++) * static_cast<double>(vocab - 1));
      const int64_t tok = std::min<int64_t>(v, vocab - 2);
      seq[static_cast<size_t>(t)] = static_cast<int32_t>(tok >= 1 ? tok + 1 : tok);
    }
    if (label == 1) {
      const int64_t pos = std::min<int64_t>(
          static_cast<int64_t>(rng.unit(ctr++) * static_cast<double>(len)), len - 1);
      seq[static_cast<size_t>(pos)] = 1;
    }
    ds.seqs.push_back(std::move(seq));
    ds.labels.push_back(label);
  }
  return ds;
}

namespace {

struct ClfBatch {
  std::vector<int32_t> tokens;  // [Lmax * B], padded with token 0
  std::vector<int32_t> labels;
  std::vector<int64_t> last_index;  // per sample readout position
  int64_t L = 0, B = 0;
};

ClfBatch assemble_batch(const LabeledDataset& data,
                        const std::vector<int64_t>& order, int64_t start,
                        int64_t batch) {
  ClfBatch out;
  std::vector<int64_t> picks;
  for (int64_t i = 0; i < batch; ++i) {
    picks.push_back(order[static_cast<size_t>((start + i) % static_cast<int64_t>(order.size()))]);
  }
  out.B = batch;
  for (int64_t idx : picks) out.L = std::max<int64_t>(out.L, static_cast<int64_t>(data.seqs[static_cast<size_t>(idx)].size()));
  out.tokens.assign(static_cast<size_t>(out.L * out.B), 0);
  for (int64_t b = 0; b < out.B; ++b) {
    const auto& seq = data.seqs[static_cast<size_t>(picks[static_cast<size_t>(b)])];
    for (size_t t = 0; t < seq.size(); ++t) {
      out.tokens[static_cast<size_t>(static_cast<int64_t>(t) * out.B + b)] = seq[t];
    }
    out.labels.push_back(data.labels[static_cast<size_t>(picks[static_cast<size_t>(b)])]);
    out.last_index.push_back(static_cast<int64_t>(seq.size()) - 1);
  }
  return out;
}

Tensor<double> gather_readout(const Tensor<double>& h_top, const ClfBatch& batch) {
  const int64_t d = h_top.extent(2);
  Tensor<double> out({batch.B, d});
  for (int64_t b = 0; b < batch.B; ++b) {
    const int64_t l = batch.last_index[static_cast<size_t>(b)];
    std::memcpy(out.data() + b * d, h_top.data() + (l * batch.B + b) * d,
                sizeof(double) * static_cast<size_t>(d));
  }
  return out;
}

}  // namespace

namespace {

void eval_classifier(SruStackModel& model, const LabeledDataset& data,
                     int64_t batch, double* accuracy, double* loss) {
  const SeededRng rng(0);
  std::vector<int64_t> order(data.seqs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  int64_t correct = 0, total = 0;
  double loss_sum = 0.0;
  for (int64_t start = 0; start < static_cast<int64_t>(order.size()); start += batch) {
    const int64_t b = std::min<int64_t>(batch, static_cast<int64_t>(order.size()) - start);
    ClfBatch cb = assemble_batch(data, order, start, b);
    auto tr = sru_stack_forward(model, cb.tokens, cb.L, cb.B, nullptr, false, rng);
    Tensor<double> readout = gather_readout(tr.h_top(), cb);
    Tensor<double> logits = linear_forward(readout, model.head_w, model.head_b);
    loss_sum += softmax_xent_mean(logits, cb.labels, nullptr) * static_cast<double>(cb.B);
    for (int64_t i = 0; i < cb.B; ++i) {
      const double* row = logits.data() + i * model.spec.n_classes;
      int32_t arg = 0;
      for (int64_t j = 1; j < model.spec.n_classes; ++j) {
        if (row[j] > row[arg]) arg = static_cast<int32_t>(j);
      }
      correct += arg == cb.labels[static_cast<size_t>(i)];
      total += 1;
    }
  }
  if (accuracy != nullptr) {
    *accuracy = static_cast<double>(correct) / static_cast<double>(std::max<int64_t>(1, total));
  }
  if (loss != nullptr) {
    *loss = loss_sum / static_cast<double>(std::max<int64_t>(1, total));
  }
}

}  // namespace

double classifier_accuracy(SruStackModel& model, const LabeledDataset& data,
                           int64_t batch) {
  double acc = 0.0;
  eval_classifier(model, data, batch, &acc, nullptr);
  return acc;
}

ClassifierRun train_classifier_model(SruStackModel& model,
                                     const LabeledDataset& train,
                                     const LabeledDataset& valid,
                                     const TrainConfig& cfg,
                                     const MetricsSink& sink) {
  cfg.validate();
  ClassifierRun run;

  // Drop empty sequences up front, with a warning count.
  LabeledDataset clean;
  clean.vocab_size = train.vocab_size;
  clean.n_classes = train.n_classes;
  for (size_t i = 0; i < train.seqs.size(); ++i) {
    if (train.seqs[i].empty()) {
      run.skipped_sequences += 1;
      continue;
    }
    clean.seqs.push_back(train.seqs[i]);
    clean.labels.push_back(train.labels[i]);
  }
  if (clean.seqs.empty()) throw IngestError("train_classifier: no non-empty sequences");

  const SeededRng base(cfg.seed);
  std::vector<int64_t> order(clean.seqs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
  // Seeded Fisher-Yates shuffle.
  for (int64_t i = static_cast<int64_t>(order.size()) - 1; i > 0; --i) {
    const int64_t j = static_cast<int64_t>(base.unit(static_cast<uint64_t>(i)) *
                                           static_cast<double>(i + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(std::min(j, i))]);
  }

  auto params = model.named_params();
  AdamState adam = make_adam_state(params);
  const double t0 = now_ms();
  double accum = 0.0;
  int64_t accum_n = 0;

  for (int64_t step = 0; step < cfg.max_steps; ++step) {
    ClfBatch cb = assemble_batch(clean, order, step * cfg.batch, cfg.batch);
    auto tr = sru_stack_forward(model, cb.tokens, cb.L, cb.B, nullptr, true,
                                base.substream(kDropBase + static_cast<uint64_t>(step)));
    Tensor<double> readout = gather_readout(tr.h_top(), cb);
    Tensor<double> logits = linear_forward(readout, model.head_w, model.head_b);
    Tensor<double> dlogits;
    const double loss = softmax_xent_mean(logits, cb.labels, &dlogits);
    Tensor<double> g_readout, g_hw, g_hb;
    linear_backward(readout, model.head_w, dlogits, &g_readout, &g_hw, &g_hb);
    Tensor<double> g_htop({cb.L, cb.B, model.d_top()});
    for (int64_t b = 0; b < cb.B; ++b) {
      const int64_t l = cb.last_index[static_cast<size_t>(b)];
      std::memcpy(g_htop.data() + (l * cb.B + b) * model.d_top(),
                  g_readout.data() + b * model.d_top(),
                  sizeof(double) * static_cast<size_t>(model.d_top()));
    }
    auto grads = sru_stack_backward(model, tr, cb.tokens, g_htop);
    grads.g_head_w = std::move(g_hw);
    grads.g_head_b = std::move(g_hb);
    auto gnamed = grads.named(model);
    clip_gradients(gnamed, cfg.grad_clip);
    const double lr = noam_lr(step + 1, cfg.warmup, model.spec.d_model, cfg.lr_factor);
    adam_step(params, gnamed, adam, lr, cfg.weight_decay);

    run.train_loss_trace.push_back(loss);
    accum += loss;
    accum_n += 1;
    if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.max_steps) {
      TrainMetrics m;
      m.step = step + 1;
      m.train_loss = accum / static_cast<double>(accum_n);
      eval_classifier(model, valid, cfg.batch, &m.valid_accuracy, &m.valid_loss);
      m.bpc = 0.0;
      m.lr = lr;
      m.wall_ms = now_ms() - t0;
      run.history.push_back(m);
      run.final_valid_accuracy = m.valid_accuracy;
      if (sink) sink(m);
      accum = 0.0;
      accum_n = 0;
    }
  }
  return run;
}

ClassifierRun train_classifier(const LabeledDataset& train,
                               const LabeledDataset& valid,
                               const ModelSpec& spec, const TrainConfig& cfg,
                               const MetricsSink& sink) {
  SruStackModel model = build_sru_model(spec, cfg.seed);
  return train_classifier_model(model, train, valid, cfg, sink);
}

}  // namespace sru
