#include "khectl/codec.hpp"

#include <cmath>
#include <sstream>

#include "khectl/errors.hpp"

namespace khectl::codec {

namespace {

BigInt residue_forced(const GroupParams& gp, const BigInt& v) {
  return mod_floor(legendre(v, gp.p) * v, gp.p);
}

}  // namespace

Quantized quantize(const GroupParams& gp, double gain, double x) {
  if (!(gain > 0) || !std::isfinite(gain)) throw DomainError("quantization gain must be positive");
  if (!std::isfinite(x)) throw DomainError("cannot quantize a non-finite value");
  const BigInt z = round_pos(gain * std::fabs(x));
  if (z >= gp.q) {
    std::ostringstream msg;
    msg << "quantized magnitude of " << x << " at gain " << gain << " (" << z.get_str()
        << ") does not fit below q (" << bit_length(gp.q) << " bits)";
    throw OverflowError(msg.str());
  }
  const BigInt reduced = mod_floor(z, gp.q);
  if (reduced == 0) throw OverflowError("quantized magnitude reduces to zero mod q");
  return Quantized{x >= 0 ? BigInt(1) : BigInt(2), reduced};
}

EncodedPair embed(const GroupParams& gp, const Quantized& v) {
  return EncodedPair{residue_forced(gp, v.sign_symbol), residue_forced(gp, v.magnitude)};
}

Quantized strip(const GroupParams& gp, const EncodedPair& e) {
  return Quantized{abs(min_residue(e.sign_ch, gp.p)), abs(min_residue(e.mag_ch, gp.p))};
}

double dequantize(const Quantized& v, double gain) {
  const BigInt r = mod_floor(v.sign_symbol, 3);
  if (r == 0) {
    throw DomainError("sign symbol " + v.sign_symbol.get_str() + " is divisible by 3");
  }
  const double magnitude = to_double(v.magnitude) / gain;
  return r == 1 ? magnitude : -magnitude;
}

EncodedPair encode(const GroupParams& gp, double gain, double x) {
  return embed(gp, quantize(gp, gain, x));
}

BigInt default_magnitude_bound(const GroupParams& gp) { return gp.q / 2; }

double decode(const GroupParams& gp, double gain, const EncodedPair& e) {
  return decode(gp, gain, e, default_magnitude_bound(gp));
}

double decode(const GroupParams& gp, double gain, const EncodedPair& e,
              const BigInt& magnitude_bound) {
  const Quantized v = strip(gp, e);
  if (v.magnitude > magnitude_bound) {
    throw OverflowError("decoded magnitude " + v.magnitude.get_str() +
                        " exceeds plausibility bound " + magnitude_bound.get_str());
  }
  return dequantize(v, gain);
}

EncodedPair multiply(const GroupParams& gp, const EncodedPair& a, const EncodedPair& b) {
  return EncodedPair{mod_mul(a.sign_ch, b.sign_ch, gp.p), mod_mul(a.mag_ch, b.mag_ch, gp.p)};
}

}  // namespace khectl::codec
