#include "ptrn/targets.hpp"

#include <string>

#include "ptrn/errors.hpp"

namespace ptrn {

const char* to_string(TargetScheme s) {
  switch (s) {
    case TargetScheme::kNeuba: return "neuba";
    case TargetScheme::kPor1: return "por1";
    case TargetScheme::kPor2: return "por2";
  }
  return "?";
}

TargetScheme target_scheme_from_string(const std::string& s) {
  if (s == "neuba") return TargetScheme::kNeuba;
  if (s == "por1" || s == "por-1") return TargetScheme::kPor1;
  if (s == "por2" || s == "por-2") return TargetScheme::kPor2;
  throw ValidationError("unknown target scheme: " + s);
}

namespace {

Vec blocks_to_vector(const std::vector<int>& signs, int dim) {
  const int width = dim / static_cast<int>(signs.size());
  Vec v(dim);
  for (size_t b = 0; b < signs.size(); ++b)
    v.segment(static_cast<Eigen::Index>(b) * width, width).setConstant(signs[b]);
  return v;
}

int hamming(uint32_t a, uint32_t b) { return __builtin_popcount(a ^ b); }

// Deterministic spread over {-1,+1}^m: start from pattern 0, repeatedly take
// the pattern maximizing the minimum Hamming distance to those chosen
// (smallest index wins ties).
std::vector<uint32_t> spread_patterns(int m, int count) {
  const uint32_t total = 1u << m;
  std::vector<uint32_t> chosen;
  chosen.reserve(static_cast<size_t>(count));
  chosen.push_back(0);
  while (static_cast<int>(chosen.size()) < count) {
    int best_dist = -1;
    uint32_t best = 0;
    for (uint32_t p = 0; p < total; ++p) {
      int d = m + 1;
      bool taken = false;
      for (uint32_t c : chosen) {
        if (c == p) { taken = true; break; }
        d = std::min(d, hamming(c, p));
      }
      if (taken) continue;
      if (d > best_dist) {
        best_dist = d;
        best = p;
      }
    }
    chosen.push_back(best);
  }
  return chosen;
}

bool is_power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

}  // namespace

TargetVectorSpec make_target_vectors(TargetScheme scheme, int dim, int block_count,
                                     int n_triggers) {
  if (dim < 1 || n_triggers < 1) throw ValidationError("target vectors: dim and n_triggers must be >= 1");
  TargetVectorSpec spec;
  spec.scheme = scheme;
  spec.dim = dim;
  spec.block_count = block_count;

  switch (scheme) {
    case TargetScheme::kPor1: {
      if (block_count < 1 || dim % block_count != 0)
        throw ValidationError("por1: dim must be divisible by block_count");
      if (n_triggers > block_count + 1)
        throw ValidationError("por1: at most n+1 distinct vectors available");
      for (int j = 1; j <= n_triggers; ++j) {
        std::vector<int> signs(static_cast<size_t>(block_count));
        for (int i = 1; i <= block_count; ++i) signs[static_cast<size_t>(i - 1)] = i < j ? 1 : -1;
        spec.vectors.push_back(blocks_to_vector(signs, dim));
      }
      break;
    }
    case TargetScheme::kPor2: {
      if (block_count < 1 || block_count > 20 || dim % block_count != 0)
        throw ValidationError("por2: dim must be divisible by block_count (<= 20 blocks)");
      if ((1ll << block_count) < n_triggers)
        throw ValidationError("por2: not enough sign patterns for n_triggers");
      const auto patterns = spread_patterns(block_count, n_triggers);
      for (uint32_t p : patterns) {
        std::vector<int> signs(static_cast<size_t>(block_count));
        for (int b = 0; b < block_count; ++b) signs[static_cast<size_t>(b)] = (p >> b) & 1u ? 1 : -1;
        spec.vectors.push_back(blocks_to_vector(signs, dim));
      }
      break;
    }
    case TargetScheme::kNeuba: {
      if (!is_power_of_two(dim)) throw ValidationError("neuba: dim must be a power of two");
      if (n_triggers >= dim) throw ValidationError("neuba: needs n_triggers < dim orthogonal rows");
      // Sylvester-Hadamard row r, column c: sign = (-1)^popcount(r & c).
      // Row 0 (all ones) is skipped so targets stay sign-balanced.
      for (int r = 1; r <= n_triggers; ++r) {
        Vec v(dim);
        for (int c = 0; c < dim; ++c)
          v(c) = __builtin_popcount(static_cast<uint32_t>(r & c)) % 2 == 0 ? 1.0 : -1.0;
        spec.vectors.push_back(v);
      }
      break;
    }
  }
  return spec;
}

}  // namespace ptrn
