#include "irsfd/overhead.hpp"

#include <string>

#include "irsfd/types.hpp"

namespace irsfd {

namespace {

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw NumericalError("csi_overhead: 64-bit overflow");
  return r;
}

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw NumericalError("csi_overhead: 64-bit overflow");
  return r;
}

}  // namespace

Overhead csi_overhead(const OverheadParams& p) {
  const std::pair<const char*, std::uint64_t> counts[] = {{"q", p.q},     {"ts", p.ts},   {"as", p.as},
                                                          {"k", p.k},     {"l", p.l},     {"n_u", p.n_u},
                                                          {"n_d", p.n_d}, {"m_u", p.m_u}, {"m_d", p.m_d}};
  for (const auto& [name, v] : counts)
    if (v == 0) throw InvalidArgument(std::string("csi_overhead: ") + name + " must be positive");

  const std::uint64_t direct =
      add(add(mul(mul(p.n_u, p.k), p.m_u), mul(mul(p.n_d, p.l), p.m_d)), mul(mul(p.k, p.l), mul(p.m_u, p.m_d)));
  // Nu + Nd + 2 K Mu + 2 L Md - 3; every term is at least 1 so this is >= 3.
  const std::uint64_t per_element =
      add(add(p.n_u, p.n_d), add(mul(2, mul(p.k, p.m_u)), mul(2, mul(p.l, p.m_d)))) - 3;
  const std::uint64_t irs = mul(p.t, per_element);
  const std::uint64_t qts = mul(p.q, p.ts);

  Overhead o;
  o.single_timescale = mul(qts, add(direct, irs));
  o.mixed_timescale = add(mul(qts, direct), mul(mul(p.q, p.as), irs));
  return o;
}

}  // namespace irsfd
