// Copyright 2026 the sru-cpp authors. Apache 2.0 License.

#include "sru/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sru {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is pinned little-endian");

namespace {

using nlohmann::json;

const char* kind_str(ModelKind k) { return model_kind_name(k); }

ModelKind kind_from(const std::string& s) {
  if (s == "char_lm") return ModelKind::char_lm;
  if (s == "classifier") return ModelKind::classifier;
  if (s == "lstm_char_lm") return ModelKind::lstm_char_lm;
  throw CheckpointError(CheckpointError::Kind::parse, "unknown model kind '" + s + "'");
}

json spec_to_json(const ModelSpec& s) {
  return json{{"kind", kind_str(s.kind)},
              {"layers", s.layers},
              {"d_model", s.d_model},
              {"d_proj", s.d_proj},
              {"vocab_size", s.vocab_size},
              {"n_classes", s.n_classes},
              {"bidirectional", s.bidirectional},
              {"highway_bias", s.highway_bias},
              {"dropout", s.dropout_p},
              {"use_state_in_gates", s.use_state_in_gates},
              {"use_scaling_correction", s.use_scaling_correction},
              {"use_highway", s.use_highway}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.kind = kind_from(j.at("kind").get<std::string>());
  s.layers = j.at("layers").get<int>();
  s.d_model = j.at("d_model").get<int64_t>();
  s.d_proj = j.at("d_proj").get<int64_t>();
  s.vocab_size = j.at("vocab_size").get<int64_t>();
  s.n_classes = j.at("n_classes").get<int64_t>();
  s.bidirectional = j.at("bidirectional").get<bool>();
  s.highway_bias = j.at("highway_bias").get<double>();
  s.dropout_p = j.at("dropout").get<double>();
  s.use_state_in_gates = j.at("use_state_in_gates").get<bool>();
  s.use_scaling_correction = j.at("use_scaling_correction").get<bool>();
  s.use_highway = j.at("use_highway").get<bool>();
  return s;
}

json layer_configs_json(const ModelSpec& spec) {
  json arr = json::array();
  if (spec.kind == ModelKind::lstm_char_lm) {
    for (int k = 0; k < spec.layers; ++k) {
      arr.push_back(json{{"d_in", spec.d_model}, {"d", spec.d_model}});
    }
    return arr;
  }
  // Mirror build_sru_model's layout.
  const int dirs = spec.bidirectional ? 2 : 1;
  for (int k = 0; k < spec.layers; ++k) {
    arr.push_back(json{{"d_in", k == 0 ? spec.d_model : dirs * spec.d_model},
                       {"d_out", spec.d_model},
                       {"bidirectional", spec.bidirectional},
                       {"projection_dim", spec.d_proj},
                       {"highway_bias", spec.highway_bias}});
  }
  return arr;
}

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

struct Reader {
  std::string data;
  size_t pos = 0;
  void need(size_t n, const char* what) {
    if (pos + n > data.size()) {
      throw CheckpointError(CheckpointError::Kind::truncated,
                            std::string("truncated payload while reading ") + what);
    }
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v;
    std::memcpy(&v, data.data() + pos, 4);
    pos += 4;
    return v;
  }
  uint64_t u64(const char* what) {
    need(8, what);
    uint64_t v;
    std::memcpy(&v, data.data() + pos, 8);
    pos += 8;
    return v;
  }
};

// Parameter and optimizer tensors in declaration order.
template <typename Session>
std::vector<NamedTensor> session_tensors(Session& s) {
  std::vector<NamedTensor> out = s.model.named_params();
  const size_t n_params = out.size();
  for (size_t i = 0; i < n_params; ++i) {
    out.push_back({"adam.m." + out[i].name, &s.adam.m[i]});
  }
  for (size_t i = 0; i < n_params; ++i) {
    out.push_back({"adam.v." + out[i].name, &s.adam.v[i]});
  }
  return out;
}

template <typename Session>
void save_impl(const std::string& path, Session& session, uint64_t seed) {
  json header{{"format_version", kCheckpointFormatVersion},
              {"dtype", "f64"},
              {"seed", seed},
              {"step", session.step},
              {"model", spec_to_json(session.model.spec)},
              {"layer_configs", layer_configs_json(session.model.spec)}};
  const std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError(CheckpointError::Kind::io, "cannot write '" + path + "'");
  write_u32(os, static_cast<uint32_t>(hs.size()));
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& nt : session_tensors(session)) {
    write_u32(os, static_cast<uint32_t>(nt.name.size()));
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    write_u64(os, static_cast<uint64_t>(nt.tensor->numel()));
    os.write(reinterpret_cast<const char*>(nt.tensor->data()),
             static_cast<std::streamsize>(nt.tensor->numel() * 8));
  }
  if (!os) throw CheckpointError(CheckpointError::Kind::io, "write failed for '" + path + "'");
}

json read_header(Reader& r) {
  const uint32_t hlen = r.u32("header length");
  r.need(hlen, "header");
  json header;
  try {
    header = json::parse(r.data.substr(r.pos, hlen));
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::parse,
                          std::string("malformed header: ") + e.what());
  }
  r.pos += hlen;
  const int version = header.at("format_version").get<int>();
  if (version != kCheckpointFormatVersion) {
    throw CheckpointError(CheckpointError::Kind::version,
                          "version mismatch: file has format_version " +
                              std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointFormatVersion));
  }
  if (header.at("dtype").get<std::string>() != "f64") {
    throw CheckpointError(CheckpointError::Kind::version,
                          "unsupported dtype '" + header.at("dtype").get<std::string>() + "'");
  }
  return header;
}

template <typename Session>
void read_payload(Reader& r, Session& session) {
  for (auto& nt : session_tensors(session)) {
    const uint32_t nlen = r.u32("tensor name length");
    r.need(nlen, "tensor name");
    const std::string name = r.data.substr(r.pos, nlen);
    r.pos += nlen;
    if (name != nt.name) {
      throw CheckpointError(CheckpointError::Kind::shape,
                            "shape mismatch: expected tensor '" + nt.name +
                                "', found '" + name + "'");
    }
    const uint64_t count = r.u64("element count");
    if (count != static_cast<uint64_t>(nt.tensor->numel())) {
      throw CheckpointError(CheckpointError::Kind::shape,
                            "shape mismatch at '" + name + "': " +
                                std::to_string(count) + " elements vs " +
                                std::to_string(nt.tensor->numel()));
    }
    r.need(count * 8, name.c_str());
    std::memcpy(nt.tensor->data(), r.data.data() + r.pos, count * 8);
    r.pos += count * 8;
  }
  if (r.pos != r.data.size()) {
    throw CheckpointError(CheckpointError::Kind::parse, "trailing bytes after payload");
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const std::string& path, SruLmSession& session, uint64_t seed) {
  save_impl(path, session, seed);
}
void save_checkpoint(const std::string& path, LstmLmSession& session, uint64_t seed) {
  save_impl(path, session, seed);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Reader r{slurp(path)};
  const json header = read_header(r);
  LoadedCheckpoint out;
  out.seed = header.at("seed").get<uint64_t>();
  out.step = header.at("step").get<int64_t>();
  const ModelSpec spec = spec_from_json(header.at("model"));
  out.kind = spec.kind;
  if (spec.kind == ModelKind::lstm_char_lm) {
    LstmLmSession s = make_lstm_lm_session(spec, /*seed=*/0);
    s.step = out.step;
    s.adam.t = out.step;
    read_payload(r, s);
    out.session = std::move(s);
  } else {
    SruLmSession s = make_sru_lm_session(spec, /*seed=*/0);
    s.step = out.step;
    s.adam.t = out.step;
    read_payload(r, s);
    out.session = std::move(s);
  }
  return out;
}

std::string inspect_checkpoint(const std::string& path) {
  Reader r{slurp(path)};
  // Reparse leniently for display: version checks still apply.
  const json header = read_header(r);
  std::ostringstream os;
  os << header.dump(2) << "\n";
  os << "tensors:\n";
  while (r.pos < r.data.size()) {
    const uint32_t nlen = r.u32("tensor name length");
    r.need(nlen, "tensor name");
    const std::string name = r.data.substr(r.pos, nlen);
    r.pos += nlen;
    const uint64_t count = r.u64("element count");
    r.need(count * 8, name.c_str());
    r.pos += count * 8;
    os << "  " << name << "  " << count << "\n";
  }
  return os.str();
}

}  // namespace sru
