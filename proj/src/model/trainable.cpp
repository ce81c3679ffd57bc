#include "model/trainable.hpp"

#include <algorithm>

#include "common/binary_io.hpp"
#include "common/error.hpp"

namespace ccan {

TrainableModel TrainableModel::create(ModelKind kind, const CCANConfig& config, std::uint64_t seed) {
  TrainableModel m;
  m.kind_ = kind;
  if (kind == ModelKind::kCCAN) {
    m.impl_ = init_model<float>(config, seed);
  } else {
    m.impl_ = init_baseline<float>(kind, config, seed);
  }
  return m;
}

const CCANConfig& TrainableModel::config() const {
  return std::visit([](const auto& m) -> const CCANConfig& { return m.config; }, impl_);
}

NamedTensors<float> TrainableModel::parameters() const {
  return std::visit([](const auto& m) { return m.named_parameters(); }, impl_);
}

std::vector<Tensor<float>> TrainableModel::stage_probs(const FeatureBag& bag, Rng* rng, bool train_mode) const {
  if (const auto* m = ccan()) {
    auto out = forward(*m, bag, rng, train_mode);
    std::vector<Tensor<float>> probs;
    for (auto& s : out.stages) probs.push_back(std::move(s.probs));
    return probs;
  }
  return {baseline_forward(*baseline(), bag)};
}

std::vector<double> TrainableModel::predict(const FeatureBag& bag) const {
  NoGradGuard no_grad;
  if (const auto* m = ccan()) return forward(*m, bag, nullptr, false).averaged_probs;
  const auto p = baseline_forward(*baseline(), bag);
  return {p.data().begin(), p.data().end()};
}

std::vector<std::vector<float>> TrainableModel::snapshot() const {
  std::vector<std::vector<float>> values;
  for (const auto& [name, t] : parameters()) values.emplace_back(t.data().begin(), t.data().end());
  return values;
}

void TrainableModel::restore(const std::vector<std::vector<float>>& values) {
  auto params = parameters();
  if (values.size() != params.size()) throw UsageError("snapshot does not match the model's parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].second.mutable_data();
    if (dst.size() != values[i].size()) throw UsageError("snapshot size mismatch for " + params[i].first);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

namespace {

void put_config(ByteWriter& w, const CCANConfig& c) {
  for (std::size_t v : {c.stages, c.latents, c.compression, c.latent_dim, c.feature_dim, c.repeats, c.self_layers,
                        c.num_classes, c.frequencies, c.heads}) {
    w.u32(static_cast<std::uint32_t>(v));
  }
  w.f64(c.token_dropout);
  w.f64(c.f_max);
  w.u8(c.scale_mode == ScaleMode::kPerPaper ? 0 : 1);
  w.u8(c.append_raw_coords ? 1 : 0);
  w.u64(c.seed);
}

CCANConfig get_config(ByteReader& r) {
  CCANConfig c;
  for (std::size_t* v : {&c.stages, &c.latents, &c.compression, &c.latent_dim, &c.feature_dim, &c.repeats,
                         &c.self_layers, &c.num_classes, &c.frequencies, &c.heads}) {
    *v = r.u32();
  }
  c.token_dropout = r.f64();
  c.f_max = r.f64();
  const std::size_t mode_at = r.offset();
  const std::uint8_t mode = r.u8();
  if (mode > 1) throw FormatError("unknown scale mode " + std::to_string(mode), mode_at);
  c.scale_mode = mode == 0 ? ScaleMode::kPerPaper : ScaleMode::kPerDim;
  c.append_raw_coords = r.u8() != 0;
  c.seed = r.u64();
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const TrainableModel& model) {
  ByteWriter w;
  w.raw("CCAN");
  w.u16(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(model.kind()));
  put_config(w, model.config());
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (float v : t.data()) w.f32(v);
  }
  return w.bytes();
}

TrainableModel decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (r.raw(4) != "CCAN") throw FormatError("bad magic, expected CCAN", 0);
  const std::size_t version_at = r.offset();
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  const std::size_t kind_at = r.offset();
  const std::uint8_t kind = r.u8();
  if (kind > 3) throw FormatError("unknown model kind " + std::to_string(kind), kind_at);
  const CCANConfig config = get_config(r);
  try {
    config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid stored config: ") + e.what(), r.offset());
  }
  TrainableModel model = TrainableModel::create(static_cast<ModelKind>(kind), config, 0);
  auto params = model.parameters();
  const std::size_t count_at = r.offset();
  if (r.u32() != params.size()) throw FormatError("parameter count does not match the stored config", count_at);
  for (auto& [name, t] : params) {
    const std::size_t at = r.offset();
    const std::string stored = r.raw(r.u16());
    if (stored != name) throw FormatError("expected parameter '" + name + "', found '" + stored + "'", at);
    Shape shape(r.u8());
    for (std::size_t& e : shape) e = r.u32();
    if (shape != t.shape()) throw FormatError("shape mismatch for parameter '" + name + "'", at);
    r.require(t.numel() * 4);
    for (float& v : t.mutable_data()) v = r.f32();
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint payload", r.offset());
  return model;
}

void save_checkpoint(const TrainableModel& model, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(model));
}

TrainableModel load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

}  // namespace ccan
