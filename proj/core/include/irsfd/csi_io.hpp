#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "irsfd/types.hpp"

namespace irsfd {

/// Text matrix dump used to exchange channel realisations.
///
///   IRSFD-CSI 1
///   matrices <count>
///   <name> <rows> <cols>
///   <re> <im> <re> <im> ...      one line per row, row-major
///
/// Values are written with 17 significant digits so a write/read cycle is
/// exact. Names for a FullCsi are H_U[k], H_D[l], G_U[k], G_D[l], V_U, V_D,
/// J[k][l] and H_tilde, in that order.
using NamedMatrix = std::pair<std::string, CMat>;

void write_matrices(std::ostream& out, const std::vector<NamedMatrix>& mats);
std::vector<NamedMatrix> read_matrices(std::istream& in);

std::vector<NamedMatrix> named_matrices(const FullCsi& csi);
std::vector<NamedMatrix> named_matrices(const EffectiveCsi& eff);

void write_csi(std::ostream& out, const FullCsi& csi);
FullCsi read_csi(std::istream& in);

}  // namespace irsfd
