#include "irsfd/csi_io.hpp"

#include <cstdio>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace irsfd {

namespace {

constexpr const char* kMagic = "IRSFD-CSI";
constexpr int kVersion = 1;

std::string indexed(const char* base, std::size_t i) { return std::string(base) + "[" + std::to_string(i) + "]"; }

}  // namespace

void write_matrices(std::ostream& out, const std::vector<NamedMatrix>& mats) {
  out << kMagic << ' ' << kVersion << '\n' << "matrices " << mats.size() << '\n';
  out << std::setprecision(17);
  for (const auto& [name, m] : mats) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c > 0) out << ' ';
        out << m(r, c).real() << ' ' << m(r, c).imag();
      }
      out << '\n';
    }
  }
}

std::vector<NamedMatrix> read_matrices(std::istream& in) {
  std::string magic, tag;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw InvalidArgument("csi dump: bad header");
  if (version != kVersion) throw InvalidArgument("csi dump: unsupported version");
  if (!(in >> tag >> count) || tag != "matrices") throw InvalidArgument("csi dump: missing matrix count");
  std::vector<NamedMatrix> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    Eigen::Index rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols) || rows < 0 || cols < 0) throw InvalidArgument("csi dump: bad matrix header");
    CMat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        double re = 0.0, im = 0.0;
        if (!(in >> re >> im)) throw InvalidArgument("csi dump: truncated data for " + name);
        m(r, c) = Complex(re, im);
      }
    out.emplace_back(std::move(name), std::move(m));
  }
  return out;
}

std::vector<NamedMatrix> named_matrices(const FullCsi& csi) {
  std::vector<NamedMatrix> out;
  for (std::size_t k = 0; k < csi.h_ul.size(); ++k) out.emplace_back(indexed("H_U", k), csi.h_ul[k]);
  for (std::size_t l = 0; l < csi.h_dl.size(); ++l) out.emplace_back(indexed("H_D", l), csi.h_dl[l]);
  for (std::size_t k = 0; k < csi.g_ul.size(); ++k) out.emplace_back(indexed("G_U", k), csi.g_ul[k]);
  for (std::size_t l = 0; l < csi.g_dl.size(); ++l) out.emplace_back(indexed("G_D", l), csi.g_dl[l]);
  out.emplace_back("V_U", csi.v_ul);
  out.emplace_back("V_D", csi.v_dl);
  for (std::size_t k = 0; k < csi.j.size(); ++k)
    for (std::size_t l = 0; l < csi.j[k].size(); ++l)
      out.emplace_back("J[" + std::to_string(k) + "][" + std::to_string(l) + "]", csi.j[k][l]);
  out.emplace_back("H_tilde", csi.h_si);
  return out;
}

std::vector<NamedMatrix> named_matrices(const EffectiveCsi& eff) {
  std::vector<NamedMatrix> out;
  for (std::size_t k = 0; k < eff.h_ul.size(); ++k) out.emplace_back(indexed("Hbar_U", k), eff.h_ul[k]);
  for (std::size_t l = 0; l < eff.h_dl.size(); ++l) out.emplace_back(indexed("Hbar_D", l), eff.h_dl[l]);
  for (std::size_t k = 0; k < eff.j.size(); ++k)
    for (std::size_t l = 0; l < eff.j[k].size(); ++l)
      out.emplace_back("Jbar[" + std::to_string(k) + "][" + std::to_string(l) + "]", eff.j[k][l]);
  out.emplace_back("H_tilde", eff.h_si);
  return out;
}

void write_csi(std::ostream& out, const FullCsi& csi) { write_matrices(out, named_matrices(csi)); }

FullCsi read_csi(std::istream& in) {
  const auto mats = read_matrices(in);
  FullCsi csi;
  std::map<std::pair<int, int>, CMat> j;
  int max_k = -1, max_l = -1;
  for (const auto& [name, m] : mats) {
    int a = 0, b = 0;
    if (std::sscanf(name.c_str(), "J[%d][%d]", &a, &b) == 2) {
      j[{a, b}] = m;
      max_k = std::max(max_k, a);
      max_l = std::max(max_l, b);
    } else if (name.rfind("H_U[", 0) == 0) {
      csi.h_ul.push_back(m);
    } else if (name.rfind("H_D[", 0) == 0) {
      csi.h_dl.push_back(m);
    } else if (name.rfind("G_U[", 0) == 0) {
      csi.g_ul.push_back(m);
    } else if (name.rfind("G_D[", 0) == 0) {
      csi.g_dl.push_back(m);
    } else if (name == "V_U") {
      csi.v_ul = m;
    } else if (name == "V_D") {
      csi.v_dl = m;
    } else if (name == "H_tilde") {
      csi.h_si = m;
    } else {
      throw InvalidArgument("csi dump: unknown matrix " + name);
    }
  }
  csi.j.assign(static_cast<std::size_t>(max_k + 1), {});
  for (int k = 0; k <= max_k; ++k)
    for (int l = 0; l <= max_l; ++l) {
      auto it = j.find({k, l});
      if (it == j.end()) throw InvalidArgument("csi dump: missing J block");
      csi.j[k].push_back(it->second);
    }
  return csi;
}

}  // namespace irsfd
