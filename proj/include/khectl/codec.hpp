#pragma once

// Sign/magnitude quantizer mapping a real number to a pair of group elements
// and back.
//
//   encode = embed . quantize     x -> (zeta, z) -> (x1_bar, x2_bar)
//   decode = dequantize . strip   (x1_bar, x2_bar) -> (zeta, z) -> x
//
// zeta is 1 for x >= 0 and 2 for x < 0; z = round_pos(gain * |x|). Each
// integer is multiplied by its Legendre symbol mod p so that it lands in the
// quadratic-residue subgroup (p = 3 mod 4 makes -1 a non-residue). Decoding
// strips that sign with the minimal residue and reads the sign bit from the
// residuosity of zeta mod 3, which stays correct under products: 1*2 = 2,
// 2*2 = 4 = 1 (mod 3).

#include <optional>

#include "khectl/numtheory.hpp"

namespace khectl::codec {

struct EncodedPair {
  BigInt sign_ch;
  BigInt mag_ch;

  friend bool operator==(const EncodedPair&, const EncodedPair&) = default;
};

struct Quantized {
  BigInt sign_symbol;  // zeta
  BigInt magnitude;    // z
};

struct QuantizationGains {
  double phi = 1e15;  // parameter side
  double xi = 1e16;   // signal side
};

/// (zeta, z). Throws OverflowError if round_pos(gain*|x|) >= q.
Quantized quantize(const GroupParams& gp, double gain, double x);

/// Residue-forcing embedding into the subgroup.
EncodedPair embed(const GroupParams& gp, const Quantized& v);

/// (|sign_ch Mod p|, |mag_ch Mod p|).
Quantized strip(const GroupParams& gp, const EncodedPair& e);

/// (zeta/3)_L * z / gain. Throws DomainError when 3 divides zeta.
double dequantize(const Quantized& v, double gain);

EncodedPair encode(const GroupParams& gp, double gain, double x);

/// Default plausibility bound on the decoded magnitude: q / 2.
BigInt default_magnitude_bound(const GroupParams& gp);

/// Throws OverflowError when the stripped magnitude exceeds the bound
/// (a producer overflowed the group).
double decode(const GroupParams& gp, double gain, const EncodedPair& e);
double decode(const GroupParams& gp, double gain, const EncodedPair& e,
              const BigInt& magnitude_bound);

/// Channel-wise group product; decodes with encode_product_gain(g1, g2).
EncodedPair multiply(const GroupParams& gp, const EncodedPair& a, const EncodedPair& b);

inline double encode_product_gain(double gain1, double gain2) { return gain1 * gain2; }

}  // namespace khectl::codec
