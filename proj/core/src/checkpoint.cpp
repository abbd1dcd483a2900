#include <cstdint>
#include <cstring>
#include <fstream>

#include "irsfd/unfolding.hpp"

namespace irsfd {

namespace {

constexpr char kMagic[8] = {'I', 'R', 'S', 'F', 'D', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

// Which matrix families are indexed by UL user, in the order of
// LayerT::matrix_members(); the others are indexed by DL user.
constexpr std::array<bool, 22> kUplinkFamily{true, true, true,  true,  false, false, false, false,
                                             true, true, true,  false, false, false, true,  true,
                                             true, true, false, false, false, false};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw InvalidArgument("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw InvalidArgument("checkpoint: truncated file");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

constexpr std::uint32_t kMaxDim = 1u << 16;

}  // namespace

void save_checkpoint(const std::string& path, const LpbnParams& lpbn, const SabnParams& sabn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(lpbn.theta.size()));
  for (int i = 0; i < lpbn.theta.size(); ++i) put_f64(out, lpbn.theta.theta(i));
  put_u32(out, static_cast<std::uint32_t>(sabn.num_layers()));
  for (const auto& layer : sabn.layers) {
    put_u32(out, static_cast<std::uint32_t>(layer.lambda.size()));
    put_u32(out, static_cast<std::uint32_t>(layer.xu_dl.size()));
    SabnLayer::visit(
        layer,
        [&](const CMat& m) {
          put_u32(out, static_cast<std::uint32_t>(m.rows()));
          put_u32(out, static_cast<std::uint32_t>(m.cols()));
          for (Eigen::Index i = 0; i < m.size(); ++i) {
            put_f64(out, m.data()[i].real());
            put_f64(out, m.data()[i].imag());
          }
        },
        [&](const double& s) { put_f64(out, s); });
  }
  if (!out) throw InvalidArgument("save_checkpoint: write failed for " + path);
}

std::pair<LpbnParams, SabnParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("load_checkpoint: cannot open " + path);
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw InvalidArgument("load_checkpoint: not a checkpoint file");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) throw InvalidArgument("load_checkpoint: unsupported version " + std::to_string(version));

  LpbnParams lpbn;
  const std::uint32_t t = get_u32(in);
  if (t > kMaxDim) throw InvalidArgument("load_checkpoint: implausible phase count");
  lpbn.theta.theta.resize(t);
  for (std::uint32_t i = 0; i < t; ++i) lpbn.theta.theta(i) = get_f64(in);

  SabnParams sabn;
  const std::uint32_t layers = get_u32(in);
  if (layers > kMaxDim) throw InvalidArgument("load_checkpoint: implausible layer count");
  for (std::uint32_t m = 0; m < layers; ++m) {
    const std::uint32_t k = get_u32(in);
    const std::uint32_t l = get_u32(in);
    if (k > kMaxDim || l > kMaxDim) throw InvalidArgument("load_checkpoint: implausible user count");
    SabnLayer layer;
    const auto members = SabnLayer::matrix_members();
    for (std::size_t f = 0; f < members.size(); ++f) {
      const std::uint32_t count = kUplinkFamily[f] ? k : l;
      for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t rows = get_u32(in);
        const std::uint32_t cols = get_u32(in);
        if (rows > kMaxDim || cols > kMaxDim) throw InvalidArgument("load_checkpoint: implausible tensor shape");
        CMat mat(rows, cols);
        for (Eigen::Index e = 0; e < mat.size(); ++e) {
          const double re = get_f64(in);
          const double im = get_f64(in);
          mat.data()[e] = Complex(re, im);
        }
        (layer.*members[f]).push_back(std::move(mat));
      }
    }
    for (std::uint32_t i = 0; i < k; ++i) layer.lambda.push_back(get_f64(in));
    layer.mu = get_f64(in);
    sabn.layers.push_back(std::move(layer));
  }
  return {lpbn, sabn};
}

}  // namespace irsfd
