#pragma once

#include <vector>

#include "ptrn/linalg.hpp"

namespace ptrn {

enum class TargetScheme { kNeuba, kPor1, kPor2 };

const char* to_string(TargetScheme s);
TargetScheme target_scheme_from_string(const std::string& s);

// Pre-defined output representations the attacker binds triggers to. All
// entries are in {-1, +1}.
struct TargetVectorSpec {
  TargetScheme scheme = TargetScheme::kPor2;
  int dim = 0;          // K
  int block_count = 0;  // n (POR-1) or m (POR-2); unused for NeuBA
  std::vector<Vec> vectors;  // one per trigger group
};

// POR-1: trigger j has blocks +1 for i < j and -1 for i >= j, j in 1..n+1.
// POR-2: distinct {-1,+1} sign patterns over m equal blocks, chosen by a
//        deterministic max-min-Hamming greedy sweep.
// NeuBA: rows of a Sylvester-Hadamard matrix (pairwise orthogonal; dim must
//        be a power of two).
TargetVectorSpec make_target_vectors(TargetScheme scheme, int dim, int block_count,
                                     int n_triggers);

}  // namespace ptrn
