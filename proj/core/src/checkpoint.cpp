// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0

#include "cvrnn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cvrnn/errors.hpp"

namespace fs = std::filesystem;

namespace cvrnn {
namespace {

constexpr std::array<char, 8> kMagic = {'C', 'V', 'R', 'N', 'N', 'C', 'K', 'P'};
constexpr std::uint8_t kDtypeF64 = 1;
constexpr std::uint32_t kMaxNameLength = 4096;
constexpr std::uint32_t kMaxRank = 8;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { buf_.append(s); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s);
  }
  const std::string& data() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string bytes(std::size_t n) { return std::string(take(n), n); }
  std::string str() {
    const std::uint64_t n = u64();
    if (n > remaining()) throw CheckpointError("corrupt checkpoint: string length exceeds file size");
    return bytes(static_cast<std::size_t>(n));
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  const char* take(std::size_t n) {
    if (n > remaining()) throw CheckpointError("corrupt checkpoint: file is truncated");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint64_t get(int n) {
    const char* p = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
  }

  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

Checkpoint make_checkpoint(const FramePredictor& model, const TrainConfig& cfg, std::int64_t step,
                           const Rng& rng) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.step = step;
  std::ostringstream ss;
  ss << rng;
  ckpt.rng_state = ss.str();
  for (const Parameter& p : model.parameters()) ckpt.tensors.push_back(p);
  return ckpt;
}

std::unique_ptr<FramePredictor> restore_model(const Checkpoint& ckpt) {
  std::unique_ptr<FramePredictor> model;
  try {
    model = make_model(ckpt.config.model_kind, ckpt.config.model);
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
  }
  ParameterStore& store = model->parameters();
  if (ckpt.tensors.size() != store.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                          " tensors, model expects " + std::to_string(store.size()));
  }
  for (const Parameter& p : ckpt.tensors) {
    const std::size_t idx = store.find(p.name);
    if (idx == store.size()) throw CheckpointError("unexpected tensor '" + p.name + "'");
    if (store[idx].value.shape() != p.value.shape()) {
      throw CheckpointError("tensor '" + p.name + "' has shape " + shape_str(p.value.shape()) +
                            ", config implies " + shape_str(store[idx].value.shape()));
    }
    store[idx].value = p.value;
  }
  return model;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  Writer w;
  w.bytes(std::string_view(kMagic.data(), kMagic.size()));
  w.u32(ckpt.format_version);
  w.str(to_text(to_key_values(ckpt.config)));
  w.i64(ckpt.step);
  w.str(ckpt.rng_state);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const Parameter& p : ckpt.tensors) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.bytes(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (int d : p.value.shape()) w.u64(static_cast<std::uint64_t>(d));
    w.u8(kDtypeF64);
    for (double v : p.value.values()) w.f64(v);
  }
  const fs::path tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(ss.str());

  if (r.remaining() < kMagic.size() || r.bytes(kMagic.size()) != std::string(kMagic.data(), kMagic.size())) {
    throw CheckpointError("not a checkpoint file: " + path.string());
  }
  Checkpoint ckpt;
  ckpt.format_version = r.u32();
  if (ckpt.format_version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint format version " +
                          std::to_string(ckpt.format_version));
  }
  try {
    ckpt.config = apply_key_values(TrainConfig{}, parse_key_values(r.str()));
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("corrupt checkpoint config: ") + e.what());
  }
  ckpt.step = r.i64();
  ckpt.rng_state = r.str();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    const std::uint32_t name_len = r.u32();
    if (name_len > kMaxNameLength) throw CheckpointError("corrupt checkpoint: tensor name too long");
    p.name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    if (rank > kMaxRank) throw CheckpointError("corrupt checkpoint: tensor rank " + std::to_string(rank));
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = r.u64();
      if (dim > kMaxElements) throw CheckpointError("corrupt checkpoint: dimension too large");
      numel *= dim;
      if (numel > kMaxElements) throw CheckpointError("corrupt checkpoint: tensor too large");
      shape.push_back(static_cast<int>(dim));
    }
    if (r.u8() != kDtypeF64) throw CheckpointError("unsupported dtype for tensor '" + p.name + "'");
    if (numel * 8 > r.remaining()) throw CheckpointError("corrupt checkpoint: file is truncated");
    std::vector<double> values(static_cast<std::size_t>(numel));
    for (double& v : values) v = r.f64();
    p.value = Tensor(std::move(shape), std::move(values));
    ckpt.tensors.push_back(std::move(p));
  }
  if (r.remaining() != 0) throw CheckpointError("corrupt checkpoint: trailing bytes");
  restore_model(ckpt);  // shape validation against the config echo
  return ckpt;
}

}  // namespace cvrnn
