#include "nqsite/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace nqsite {
namespace {

constexpr char kMagic[8] = {'N', 'Q', 'S', 'I', 'T', 'E', '0', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint32_t crc32(const unsigned char* data, std::size_t n) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i)
    crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

struct Writer {
  std::string buf;

  void u8(std::uint8_t x) { buf.push_back(static_cast<char>(x)); }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((x >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((x >> (8 * i)) & 0xFFu));
  }
  void i32(std::int32_t x) { u32(static_cast<std::uint32_t>(x)); }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void bytes(const std::string& s) {
    u64(s.size());
    buf.append(s);
  }
  void vec(const Eigen::VectorXd& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
};

struct Reader {
  const unsigned char* p;
  std::size_t left;

  void need(std::size_t n) const {
    if (left < n) throw std::runtime_error("checkpoint: unexpected end of file");
  }
  std::uint8_t u8() {
    need(1);
    const std::uint8_t x = *p;
    ++p;
    --left;
    return x;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return x;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    left -= n;
    return s;
  }
  Eigen::VectorXd vec() {
    const std::uint64_t n = u64();
    need(n * 8);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = f64();
    return v;
  }
};

void check(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error("checkpoint: " + what);
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg,
                     const TrainState& st) {
  Writer w;
  w.u32(kVersion);
  w.bytes(canonical_config(cfg));

  const Architecture& a = st.net.arch();
  w.i32(a.d_lat);
  w.i32(a.d_p);
  w.i32(a.d_enc);
  w.i32(a.width);
  w.i32(a.depth);
  w.f64(a.a_sat);
  w.u8(static_cast<std::uint8_t>(a.activation));

  w.u8(cfg.mode == RunMode::exact_sum ? 1 : 0);
  w.u8(cfg.loss == LossKind::e_loss ? 1 : 0);
  w.u64(cfg.seed);

  w.u64(st.step);
  w.u64(st.epoch);
  w.u64(st.steps_in_epoch);
  w.f64(st.delta_tau);
  w.f64(st.e_threshold);
  w.f64(st.ema_energy);
  w.u8(st.in_epoch ? 1 : 0);
  w.u8(st.converged ? 1 : 0);

  const EpochRecord& pe = st.pending_epoch;
  w.u64(pe.epoch);
  w.u64(pe.start_step);
  w.u64(pe.steps);
  w.f64(pe.e1);
  w.f64(pe.e2);
  w.f64(pe.e3);
  w.f64(pe.sigma2);
  w.f64(pe.sigma_e);
  w.f64(pe.delta_tau);
  w.f64(pe.e_threshold);
  w.f64(pe.target_energy);
  w.u8(pe.stalled ? 1 : 0);
  w.u8(pe.degenerate ? 1 : 0);

  w.vec(st.net.params());
  w.vec(st.fixed_net.params());
  w.u64(st.adam.t);
  w.vec(st.adam.m);
  w.vec(st.adam.v);

  w.u64(st.ensemble.walkers.size());
  for (std::size_t i = 0; i < st.ensemble.walkers.size(); ++i) {
    w.u64(st.ensemble.walkers[i].bits);
    w.u64(st.ensemble.rngs[i].position());
  }

  const auto crc =
      crc32(reinterpret_cast<const unsigned char*>(w.buf.data()), w.buf.size());

  std::ofstream out(path, std::ios::binary);
  check(static_cast<bool>(out), "cannot open '" + path + "' for writing");
  out.write(kMagic, sizeof(kMagic));
  out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  Writer tail;
  tail.u32(crc);
  out.write(tail.buf.data(), static_cast<std::streamsize>(tail.buf.size()));
  check(static_cast<bool>(out), "failed writing '" + path + "'");
}

TrainState load_checkpoint(const std::string& path, const RunConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), "cannot open '" + path + "'");
  std::string file((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  check(file.size() >= sizeof(kMagic) + 4, "file too short");
  check(std::memcmp(file.data(), kMagic, sizeof(kMagic)) == 0, "bad magic");

  const auto* payload =
      reinterpret_cast<const unsigned char*>(file.data()) + sizeof(kMagic);
  const std::size_t payload_len = file.size() - sizeof(kMagic) - 4;
  Reader tail{payload + payload_len, 4};
  const std::uint32_t stored_crc = tail.u32();
  check(crc32(payload, payload_len) == stored_crc, "checksum mismatch");

  Reader r{payload, payload_len};
  check(r.u32() == kVersion, "unsupported version");
  (void)r.bytes();  // canonical config text kept for provenance only

  Architecture a;
  a.d_lat = r.i32();
  a.d_p = r.i32();
  a.d_enc = r.i32();
  a.width = r.i32();
  a.depth = r.i32();
  a.a_sat = r.f64();
  a.activation = static_cast<Activation>(r.u8());
  check(a == cfg.architecture(), "architecture does not match the config");

  const bool exact = r.u8() != 0;
  check(exact == (cfg.mode == RunMode::exact_sum), "run mode does not match the config");
  const bool e_loss = r.u8() != 0;
  check(e_loss == (cfg.loss == LossKind::e_loss), "loss kind does not match the config");
  const std::uint64_t seed = r.u64();
  check(seed == cfg.seed, "seed does not match the config");

  TrainState st(cfg);
  st.step = r.u64();
  st.epoch = r.u64();
  st.steps_in_epoch = r.u64();
  st.delta_tau = r.f64();
  st.e_threshold = r.f64();
  st.ema_energy = r.f64();
  st.in_epoch = r.u8() != 0;
  st.converged = r.u8() != 0;

  EpochRecord pe;
  pe.epoch = r.u64();
  pe.start_step = r.u64();
  pe.steps = r.u64();
  pe.e1 = r.f64();
  pe.e2 = r.f64();
  pe.e3 = r.f64();
  pe.sigma2 = r.f64();
  pe.sigma_e = r.f64();
  pe.delta_tau = r.f64();
  pe.e_threshold = r.f64();
  pe.target_energy = r.f64();
  pe.stalled = r.u8() != 0;
  pe.degenerate = r.u8() != 0;
  st.pending_epoch = pe;

  Eigen::VectorXd params = r.vec();
  check(params.size() == st.net.params().size(), "parameter count mismatch");
  st.net.params() = params;
  Eigen::VectorXd fixed = r.vec();
  check(fixed.size() == st.fixed_net.params().size(),
        "fixed parameter count mismatch");
  st.fixed_net.params() = fixed;
  st.adam.t = r.u64();
  st.adam.m = r.vec();
  st.adam.v = r.vec();
  check(st.adam.m.size() == params.size() && st.adam.v.size() == params.size(),
        "optimizer moment size mismatch");

  const std::uint64_t n_walkers = r.u64();
  if (!exact) {
    check(n_walkers == st.ensemble.walkers.size(), "walker count mismatch");
    for (std::uint64_t i = 0; i < n_walkers; ++i) {
      st.ensemble.walkers[i].bits = r.u64();
      st.ensemble.rngs[i].set_position(r.u64());
    }
  } else {
    check(n_walkers == 0, "exact-mode checkpoint carries walkers");
  }
  check(r.left == 0, "trailing bytes after state");

  if (exact && st.in_epoch) {
    // Rebuild the frozen evolution target through the exact same table
    // code the epoch start used, so resumed gradients match bit for bit.
    const Eigen::VectorXd live = st.net.params();
    st.net.params() = st.fixed_net.params();
    refresh_exact_cache(st, cfg);
    st.target_table = st.cache.psi - st.delta_tau * st.cache.h_psi;
    st.net.params() = live;
    st.cache.valid = false;
  }
  return st;
}

}  // namespace nqsite
