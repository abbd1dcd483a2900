#pragma once

#include <cstdint>

namespace irsfd {

/// Inputs of the CSI signalling-overhead count for one coherence block.
struct OverheadParams {
  std::uint64_t q = 8;             // quantisation bits per CSI element
  std::uint64_t ts = 10000;        // time slots per coherence block
  std::uint64_t as = 30;           // full-CSI samples collected per block
  std::uint64_t k = 2;             // UL users
  std::uint64_t l = 2;             // DL users
  std::uint64_t n_u = 32;          // AP receive antennas
  std::uint64_t n_d = 32;          // AP transmit antennas
  std::uint64_t m_u = 4;           // antennas per UL user
  std::uint64_t m_d = 4;           // antennas per DL user
  std::uint64_t t = 200;           // IRS elements
};

struct Overhead {
  std::uint64_t single_timescale = 0;  // Q_s, bits
  std::uint64_t mixed_timescale = 0;   // Q_m, bits
};

/// Exact integer evaluation. The single-timescale scheme feeds back every
/// channel in every slot:
///   Q_s = q Ts (Nu K Mu + Nd L Md + K L Mu Md + T (Nu + Nd + 2 K Mu + 2 L Md - 3))
/// while the mixed-timescale scheme sends the effective channels every slot
/// and the IRS-related channels only As times:
///   Q_m = q Ts (Nu K Mu + Nd L Md + K L Mu Md) + q As T (Nu + Nd + 2 K Mu + 2 L Md - 3).
/// Throws InvalidArgument for a zero count (T may be zero) and NumericalError
/// on 64-bit overflow.
Overhead csi_overhead(const OverheadParams& p);

}  // namespace irsfd
