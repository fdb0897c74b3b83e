#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "thermofuse/error.hpp"

namespace thermofuse {

inline constexpr std::size_t kNumAminoAcids = 20;

/// Canonical one-letter alphabet in alphabetical order. This order indexes
/// every one-hot vector, count grid and scan-matrix column in the library.
inline constexpr std::string_view kAlphabet = "ACDEFGHIKLMNPQRSTVWY";

inline constexpr char kUnknownResidue = 'X';

inline std::optional<std::size_t> aa_index(char code) {
  const auto pos = kAlphabet.find(code);
  if (pos == std::string_view::npos) return std::nullopt;
  return pos;
}

inline bool is_canonical(char code) { return aa_index(code).has_value(); }

inline std::size_t require_aa_index(char code) {
  auto idx = aa_index(code);
  if (!idx) fail(ErrorKind::domain, std::string("non-canonical amino-acid code '") + code + "'");
  return *idx;
}

inline char three_to_one(std::string_view name) {
  static constexpr std::array<std::pair<std::string_view, char>, 20> table{{
      {"ALA", 'A'}, {"CYS", 'C'}, {"ASP", 'D'}, {"GLU", 'E'}, {"PHE", 'F'},
      {"GLY", 'G'}, {"HIS", 'H'}, {"ILE", 'I'}, {"LYS", 'K'}, {"LEU", 'L'},
      {"MET", 'M'}, {"ASN", 'N'}, {"PRO", 'P'}, {"GLN", 'Q'}, {"ARG", 'R'},
      {"SER", 'S'}, {"THR", 'T'}, {"VAL", 'V'}, {"TRP", 'W'}, {"TYR", 'Y'},
  }};
  for (const auto& [three, one] : table) {
    if (three == name) return one;
  }
  return kUnknownResidue;
}

inline std::string_view one_to_three(char code) {
  switch (code) {
    case 'A': return "ALA"; case 'C': return "CYS"; case 'D': return "ASP";
    case 'E': return "GLU"; case 'F': return "PHE"; case 'G': return "GLY";
    case 'H': return "HIS"; case 'I': return "ILE"; case 'K': return "LYS";
    case 'L': return "LEU"; case 'M': return "MET"; case 'N': return "ASN";
    case 'P': return "PRO"; case 'Q': return "GLN"; case 'R': return "ARG";
    case 'S': return "SER"; case 'T': return "THR"; case 'V': return "VAL";
    case 'W': return "TRP"; case 'Y': return "TYR";
    default: return "UNK";
  }
}

}  // namespace thermofuse
