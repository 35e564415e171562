#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "hris/agent.hpp"
#include "hris/config.hpp"
#include "hris/error.hpp"

namespace hris {

inline constexpr char kCheckpointMagic[8] = {'H', 'R', 'I', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume a run or evaluate its policy. Layout: docs/checkpoint.md.
struct Checkpoint {
  std::uint64_t iterations = 0;  ///< completed training iterations
  std::uint64_t config_hash = 0;
  PpoAgent agent;
  std::string trainer_rng;  ///< Rng::serialize() text
  std::string env_rng;
};

namespace detail {

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<unsigned char>& data() const { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  void need(std::size_t k) const {
    if (pos_ + k > n_) throw InputError("checkpoint: truncated file");
  }
  void bytes(void* out, std::size_t k) {
    need(k);
    std::memcpy(out, p_ + pos_, k);
    pos_ += k;
  }
  std::uint8_t u8() {
    need(1);
    return p_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  VectorXd vec(std::uint64_t expected) {
    const std::uint64_t n = u64();
    if (n != expected) throw InputError("checkpoint: vector length mismatch");
    need(8 * n);
    VectorXd v(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = f64();
    return v;
  }
  VectorXd vec_any() {
    const std::uint64_t n = u64();
    need(8 * n);
    VectorXd v(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = f64();
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

inline void write_mlp(ByteWriter& w, const Mlp& m) {
  w.u32(static_cast<std::uint32_t>(m.inputs()));
  w.u32(static_cast<std::uint32_t>(m.hidden()));
  w.u32(static_cast<std::uint32_t>(m.outputs()));
  w.vec(m.params);
}

inline Mlp read_mlp(ByteReader& r) {
  const auto in = static_cast<int>(r.u32());
  const auto hid = static_cast<int>(r.u32());
  const auto out = static_cast<int>(r.u32());
  Mlp m(in, hid, out);
  m.params = r.vec(static_cast<std::uint64_t>(m.size()));
  return m;
}

inline void write_optimizer(ByteWriter& w, const Optimizer& o) {
  w.u8(o.kind == OptimizerKind::sgd ? 0 : 1);
  w.f64(o.lr);
  w.f64(o.beta1);
  w.f64(o.beta2);
  w.f64(o.eps);
  w.i64(o.steps);
  w.vec(o.m);
  w.vec(o.v);
}

inline Optimizer read_optimizer(ByteReader& r) {
  Optimizer o;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw InputError("checkpoint: unknown optimizer kind");
  o.kind = kind == 0 ? OptimizerKind::sgd : OptimizerKind::adam;
  o.lr = r.f64();
  o.beta1 = r.f64();
  o.beta2 = r.f64();
  o.eps = r.f64();
  o.steps = r.i64();
  o.m = r.vec_any();
  o.v = r.vec_any();
  return o;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(c.iterations);
  w.u64(c.config_hash);
  const PpoAgent& a = c.agent;
  w.u32(static_cast<std::uint32_t>(a.layout.elements));
  for (int h = 0; h < 3; ++h) w.i32(a.layout.forced[h]);
  w.u32(static_cast<std::uint32_t>(a.normalizer.dim()));
  w.i64(a.normalizer.count);
  w.vec(a.normalizer.mean);
  w.vec(a.normalizer.m2);
  detail::write_mlp(w, a.actor);
  detail::write_mlp(w, a.critic);
  detail::write_optimizer(w, a.actor_opt);
  detail::write_optimizer(w, a.critic_opt);
  w.str(c.trainer_rng);
  w.str(c.env_rng);
  std::string body(w.data().begin(), w.data().end());
  w.u64(fnv1a(body));
  return w.data();
}

inline Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw InputError("checkpoint: bad magic (not a checkpoint file)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw InputError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.iterations = r.u64();
  c.config_hash = r.u64();
  PpoAgent& a = c.agent;
  a.layout.elements = static_cast<int>(r.u32());
  for (int h = 0; h < 3; ++h) a.layout.forced[h] = r.i32();
  const std::uint32_t dim = r.u32();
  a.normalizer.count = r.i64();
  a.normalizer.mean = r.vec(dim);
  a.normalizer.m2 = r.vec(dim);
  a.actor = detail::read_mlp(r);
  a.critic = detail::read_mlp(r);
  a.actor_opt = detail::read_optimizer(r);
  a.critic_opt = detail::read_optimizer(r);
  c.trainer_rng = r.str();
  c.env_rng = r.str();
  const std::size_t body_len = r.pos();
  const std::uint64_t stored = r.u64();
  if (stored != fnv1a(std::string(bytes.begin(), bytes.begin() + static_cast<long>(body_len)))) {
    throw InputError("checkpoint: checksum mismatch");
  }
  if (r.pos() != bytes.size()) throw InputError("checkpoint: trailing bytes");
  if (a.actor.inputs() != static_cast<int>(dim) || a.critic.inputs() != static_cast<int>(dim) ||
      a.actor.outputs() != a.layout.logits() || a.critic.outputs() != 1) {
    throw InputError("checkpoint: network shapes do not match the head layout");
  }
  return c;
}

/// Writes via a temporary file and rename, so an interrupted write never clobbers the previous
/// checkpoint.
inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const auto bytes = encode_checkpoint(c);
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write checkpoint '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("short write on checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, target);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing checkpoint '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace hris
