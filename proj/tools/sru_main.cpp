// Copyright 2026 the sru-cpp authors. Apache 2.0 License.
//
// Command-line surface: training, probing, gradient certification,
// benchmarking, checkpoint inspection. Exit codes: 0 success, 1 suite or
// criterion failure, 2 usage/input error.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sru/bench.hpp"
#include "sru/checkpoint.hpp"
#include "sru/corpus.hpp"
#include "sru/gradcheck.hpp"
#include "sru/init_calib.hpp"
#include "sru/model.hpp"
#include "sru/train.hpp"

namespace {

using namespace sru;

constexpr int kExitOk = 0;
constexpr int kExitSuiteFail = 1;
constexpr int kExitUsage = 2;

std::string metrics_header() { return "step,train_loss,valid_loss,bpc,lr,wall_ms"; }

std::string metrics_row(const TrainMetrics& m, bool char_lm) {
  std::ostringstream os;
  os.precision(12);
  os << m.step << "," << m.train_loss << "," << m.valid_loss << ",";
  if (char_lm) os << m.bpc;
  os << "," << m.lr << "," << m.wall_ms;
  return os.str();
}

struct OutStream {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit OutStream(const std::string& path) {
    if (!path.empty() && path != "-") {
      file.open(path, std::ios::trunc);
      if (!file) throw IngestError("cannot write '" + path + "'");
      os = &file;
    }
  }
};

// ---------------------------------------------------------------------------

struct TrainLmArgs {
  std::string corpus_path;
  std::string arch = "sru";
  int layers = 2;
  int64_t d_model = 128;
  int64_t d_proj = 0;
  double highway_bias = -3.0;
  double dropout = 0.0;
  bool no_state_gates = false, no_alpha = false, no_highway = false;
  TrainConfig cfg;
  std::string out_prefix = "train_lm";
  std::string resume;
  bool dry_run = false;
};

int cmd_train_lm(const TrainLmArgs& a) {
  const CharCorpus corpus = load_corpus(a.corpus_path);
  TrainConfig cfg = a.cfg;

  ModelSpec spec;
  spec.kind = a.arch == "lstm" ? ModelKind::lstm_char_lm : ModelKind::char_lm;
  spec.layers = a.layers;
  spec.d_model = a.d_model;
  spec.d_proj = a.arch == "lstm" ? 0 : a.d_proj;
  spec.vocab_size = corpus.vocab_size;
  spec.highway_bias = a.highway_bias;
  spec.dropout_p = a.dropout;
  spec.use_state_in_gates = !a.no_state_gates;
  spec.use_scaling_correction = !a.no_alpha;
  spec.use_highway = !a.no_highway;

  SruLmSession sru_session;
  LstmLmSession lstm_session;
  bool is_lstm = spec.kind == ModelKind::lstm_char_lm;
  if (!a.resume.empty()) {
    LoadedCheckpoint ck = load_checkpoint(a.resume);
    cfg.seed = ck.seed;  // keep dropout streams aligned with the first run
    is_lstm = ck.kind == ModelKind::lstm_char_lm;
    if (is_lstm) {
      lstm_session = std::move(std::get<LstmLmSession>(ck.session));
      spec = lstm_session.model.spec;
    } else {
      sru_session = std::move(std::get<SruLmSession>(ck.session));
      spec = sru_session.model.spec;
    }
    if (spec.vocab_size != corpus.vocab_size) {
      throw IngestError("checkpoint vocabulary does not match the corpus");
    }
  } else if (is_lstm) {
    lstm_session = make_lstm_lm_session(spec, cfg.seed);
  } else {
    sru_session = make_sru_lm_session(spec, cfg.seed);
  }

  if (a.dry_run) {
    std::cout << "parameters: " << count_params(spec) << "\n";
    return kExitOk;
  }

  OutStream out(a.out_prefix + ".csv");
  *out.os << metrics_header() << "\n";
  const MetricsSink sink = [&](const TrainMetrics& m) {
    *out.os << metrics_row(m, true) << "\n";
    out.os->flush();
    std::cerr << "step " << m.step << " train " << m.train_loss << " valid "
              << m.valid_loss << " bpc " << m.bpc << "\n";
  };
  if (is_lstm) {
    train_char_lm(lstm_session, corpus, cfg, sink);
    save_checkpoint(a.out_prefix + ".ckpt", lstm_session, cfg.seed);
  } else {
    train_char_lm(sru_session, corpus, cfg, sink);
    save_checkpoint(a.out_prefix + ".ckpt", sru_session, cfg.seed);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainClfArgs {
  int layers = 2;
  int64_t d_model = 32;
  bool bidirectional = false;
  double highway_bias = 0.0;
  double dropout = 0.0;
  bool no_state_gates = false, no_alpha = false, no_highway = false;
  int64_t train_size = 4000, valid_size = 1000, seq_len = 24, task_vocab = 10;
  TrainConfig cfg;
  std::string out_prefix = "train_clf";
};

int cmd_train_clf(const TrainClfArgs& a) {
  LabeledDataset train = make_contains_token_dataset(a.train_size, a.seq_len,
                                                     a.task_vocab, a.cfg.seed);
  LabeledDataset valid = make_contains_token_dataset(a.valid_size, a.seq_len,
                                                     a.task_vocab, a.cfg.seed + 1);
  ModelSpec spec;
  spec.kind = ModelKind::classifier;
  spec.layers = a.layers;
  spec.d_model = a.d_model;
  spec.vocab_size = a.task_vocab;
  spec.n_classes = 2;
  spec.bidirectional = a.bidirectional;
  spec.highway_bias = a.highway_bias;
  spec.dropout_p = a.dropout;
  spec.use_state_in_gates = !a.no_state_gates;
  spec.use_scaling_correction = !a.no_alpha;
  spec.use_highway = !a.no_highway;

  OutStream out(a.out_prefix + ".csv");
  *out.os << metrics_header() << "\n";
  ClassifierRun run = train_classifier(train, valid, spec, a.cfg,
                                       [&](const TrainMetrics& m) {
                                         *out.os << metrics_row(m, false) << "\n";
                                         std::cerr << "step " << m.step << " train "
                                                   << m.train_loss << " valid_acc "
                                                   << m.valid_accuracy << "\n";
                                       });
  std::cerr << "final valid accuracy " << run.final_valid_accuracy
            << " (skipped " << run.skipped_sequences << " empty sequences)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_gradcheck(const std::string& preset, bool inject_fault, uint64_t seed) {
  GradCheckOptions opt;
  opt.seed = seed;
  opt.corrupt_v_f = inject_fault;
  if (preset == "small") {
    opt.configs = 48;
  } else if (preset == "full") {
    opt.configs = 200;
  } else {
    std::cerr << "unknown preset '" << preset << "' (valid: small, full)\n";
    return kExitUsage;
  }
  const GradCheckReport report = run_gradcheck(opt);
  std::cout << report.summary();
  return report.pass ? kExitOk : kExitSuiteFail;
}

// ---------------------------------------------------------------------------

struct ProbeArgs {
  int depth = 1;
  int64_t d_model = 128;
  std::string mode = "iid";
  bool no_alpha = false;
  double highway_bias = 0.0;
  uint64_t seed = 1;
  std::string out;
};

int cmd_probe_variance(const ProbeArgs& a) {
  const auto mode = parse_probe_mode(a.mode);
  if (!mode) {
    std::cerr << "invalid mode '" << a.mode
              << "' (valid: iid, correlated, embedding-like)\n";
    return kExitUsage;
  }
  ProbeOptions opt;
  opt.scaling_correction = !a.no_alpha;
  opt.highway_bias = a.highway_bias;
  const VarianceProfile prof =
      variance_ratio_probe(a.depth, a.d_model, *mode, SeededRng(a.seed), opt);
  OutStream out(a.out);
  *out.os << probe_csv(prof);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::vector<int64_t> seq_lens{32, 128};
  std::vector<int64_t> dims{128, 256, 512};
  int64_t batch = 32;
  std::vector<std::string> archs{"sru_fused", "sru_naive", "lstm"};
  std::vector<std::string> passes{"forward", "forward_backward"};
  int reps = 20;
  int warmup = 3;
  bool f32 = false;
  bool gnuplot = false;
  uint64_t seed = 1;
  std::string out;
};

int cmd_bench(const BenchArgs& a) {
  BenchOptions opt;
  opt.seq_lens = a.seq_lens;
  opt.dims = a.dims;
  opt.batch = a.batch;
  opt.reps = a.reps;
  opt.warmup = a.warmup;
  opt.f32 = a.f32;
  opt.seed = a.seed;
  opt.archs.clear();
  for (const auto& s : a.archs) {
    const auto arch = parse_bench_arch(s);
    if (!arch) {
      std::cerr << "invalid arch '" << s << "' (valid: sru_fused, sru_naive, lstm)\n";
      return kExitUsage;
    }
    opt.archs.push_back(*arch);
  }
  opt.passes.clear();
  for (const auto& s : a.passes) {
    const auto pass = parse_bench_pass(s);
    if (!pass) {
      std::cerr << "invalid pass '" << s
                << "' (valid: forward, forward_backward, elementwise_only, matmul_only)\n";
      return kExitUsage;
    }
    opt.passes.push_back(*pass);
  }
  const auto records = run_bench(opt);
  OutStream out(a.out);
  write_bench_csv(*out.os, records, a.gnuplot);
  std::cerr << "bench: " << records.size() << " cells, " << opt.reps
            << " reps + " << opt.warmup << " warmups each\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  sru::init_workers_from_env();

  CLI::App app{"SRU: CPU-parallel simple recurrent unit library tools"};
  app.require_subcommand(1);

  TrainLmArgs lm;
  auto* lm_cmd = app.add_subcommand("train-lm", "train a char-level language model");
  lm_cmd->add_option("corpus", lm.corpus_path, "corpus file (bytes)")->required();
  lm_cmd->add_option("--arch", lm.arch, "sru | lstm")->check(CLI::IsMember({"sru", "lstm"}));
  lm_cmd->add_option("--layers", lm.layers);
  lm_cmd->add_option("--d-model", lm.d_model);
  lm_cmd->add_option("--d-proj", lm.d_proj, "projection (bottleneck) dimension, 0 = dense");
  lm_cmd->add_option("--highway-bias", lm.highway_bias);
  lm_cmd->add_option("--dropout", lm.dropout);
  lm_cmd->add_flag("--no-state-gates", lm.no_state_gates, "drop the v (.) c gate terms");
  lm_cmd->add_flag("--no-alpha", lm.no_alpha, "disable the scaling correction");
  lm_cmd->add_flag("--no-highway", lm.no_highway, "h = c instead of the highway output");
  lm_cmd->add_option("--batch", lm.cfg.batch);
  lm_cmd->add_option("--unroll", lm.cfg.unroll);
  lm_cmd->add_option("--max-steps", lm.cfg.max_steps);
  lm_cmd->add_option("--warmup", lm.cfg.warmup);
  lm_cmd->add_option("--eval-every", lm.cfg.eval_every);
  lm_cmd->add_option("--lr-factor", lm.cfg.lr_factor);
  lm_cmd->add_option("--weight-decay", lm.cfg.weight_decay);
  lm_cmd->add_option("--grad-clip", lm.cfg.grad_clip);
  lm_cmd->add_option("--seed", lm.cfg.seed);
  lm_cmd->add_option("--out", lm.out_prefix, "output prefix for .csv and .ckpt");
  lm_cmd->add_option("--resume", lm.resume, "checkpoint to continue from");
  lm_cmd->add_flag("--dry-run", lm.dry_run, "print the parameter count and exit");

  TrainClfArgs clf;
  auto* clf_cmd = app.add_subcommand("train-clf", "train the synthetic sequence classifier");
  clf_cmd->add_option("--layers", clf.layers);
  clf_cmd->add_option("--d-model", clf.d_model);
  clf_cmd->add_flag("--bidirectional", clf.bidirectional);
  clf_cmd->add_option("--highway-bias", clf.highway_bias);
  clf_cmd->add_option("--dropout", clf.dropout);
  clf_cmd->add_flag("--no-state-gates", clf.no_state_gates);
  clf_cmd->add_flag("--no-alpha", clf.no_alpha);
  clf_cmd->add_flag("--no-highway", clf.no_highway);
  clf_cmd->add_option("--train-size", clf.train_size);
  clf_cmd->add_option("--valid-size", clf.valid_size);
  clf_cmd->add_option("--seq-len", clf.seq_len);
  clf_cmd->add_option("--task-vocab", clf.task_vocab);
  clf_cmd->add_option("--batch", clf.cfg.batch);
  clf_cmd->add_option("--max-steps", clf.cfg.max_steps);
  clf_cmd->add_option("--warmup", clf.cfg.warmup);
  clf_cmd->add_option("--eval-every", clf.cfg.eval_every);
  clf_cmd->add_option("--lr-factor", clf.cfg.lr_factor);
  clf_cmd->add_option("--weight-decay", clf.cfg.weight_decay);
  clf_cmd->add_option("--grad-clip", clf.cfg.grad_clip);
  clf_cmd->add_option("--seed", clf.cfg.seed);
  clf_cmd->add_option("--out", clf.out_prefix);

  std::string gc_preset = "small";
  bool gc_fault = false;
  uint64_t gc_seed = 7;
  auto* gc_cmd = app.add_subcommand("gradcheck", "certify the analytic backward against finite differences");
  gc_cmd->add_option("--preset", gc_preset, "small | full");
  gc_cmd->add_flag("--inject-vf-fault", gc_fault, "test hook: negate g_v_f, the suite must fail");
  gc_cmd->add_option("--seed", gc_seed);

  ProbeArgs probe;
  auto* probe_cmd = app.add_subcommand("probe-variance", "empirical Var[c]/Var[x] per layer");
  probe_cmd->add_option("--depth", probe.depth)->required();
  probe_cmd->add_option("--d-model", probe.d_model);
  probe_cmd->add_option("--mode", probe.mode, "iid | correlated | embedding-like");
  probe_cmd->add_flag("--no-alpha", probe.no_alpha);
  probe_cmd->add_option("--highway-bias", probe.highway_bias);
  probe_cmd->add_option("--seed", probe.seed);
  probe_cmd->add_option("--out", probe.out, "CSV path (default stdout)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "throughput sweeps, CSV output");
  bench_cmd->add_option("--l-list", bench.seq_lens, "sequence lengths")->delimiter(',');
  bench_cmd->add_option("--d-list", bench.dims, "feature dimensions")->delimiter(',');
  bench_cmd->add_option("--batch", bench.batch);
  bench_cmd->add_option("--archs", bench.archs)->delimiter(',');
  bench_cmd->add_option("--passes", bench.passes)->delimiter(',');
  bench_cmd->add_option("--reps", bench.reps);
  bench_cmd->add_option("--warmup", bench.warmup);
  bench_cmd->add_flag("--f32", bench.f32, "time in 32-bit floats");
  bench_cmd->add_flag("--gnuplot", bench.gnuplot, "blank-line blocks per (arch,pass)");
  bench_cmd->add_option("--seed", bench.seed);
  bench_cmd->add_option("--out", bench.out, "CSV path (default stdout)");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "print header and tensor table");
  inspect_cmd->add_option("path", inspect_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (lm_cmd->parsed()) return cmd_train_lm(lm);
    if (clf_cmd->parsed()) return cmd_train_clf(clf);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc_preset, gc_fault, gc_seed);
    if (probe_cmd->parsed()) return cmd_probe_variance(probe);
    if (bench_cmd->parsed()) return cmd_bench(bench);
    if (inspect_cmd->parsed()) {
      std::cout << sru::inspect_checkpoint(inspect_path);
      return kExitOk;
    }
  } catch (const sru::ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sru::DimError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sru::IngestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const sru::CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSuiteFail;
  }
  return kExitUsage;
}
