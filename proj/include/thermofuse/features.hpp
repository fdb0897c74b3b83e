#pragma once

// Amino-acid property tables, substitution matrices and the hand-engineered
// per-mutation feature vector.

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "thermofuse/amino_acids.hpp"
#include "thermofuse/error.hpp"
#include "thermofuse/structure.hpp"

namespace thermofuse {

struct AminoAcidTable {
  // indexed by kAlphabet position
  std::array<double, kNumAminoAcids> molecular_weight{};  // Da, free amino acid
  std::array<double, kNumAminoAcids> hydrophobicity{};    // Kyte-Doolittle

  static const AminoAcidTable& standard() {
    static const AminoAcidTable table{
        // A      C       D       E       F       G      H       I       K       L
        {89.09, 121.16, 133.10, 147.13, 165.19, 75.07, 155.16, 131.17, 146.19, 131.17,
         // M     N       P       Q       R       S       T       V       W       Y
         149.21, 132.12, 115.13, 146.15, 174.20, 105.09, 119.12, 117.15, 204.23, 181.19},
        {1.8, 2.5, -3.5, -3.5, 2.8, -0.4, -3.2, 4.5, -3.9, 3.8,
         1.9, -3.5, -1.6, -3.5, -4.5, -0.8, -0.7, 4.2, -0.9, -1.3},
    };
    return table;
  }

  double mw(char aa) const { return molecular_weight[require_aa_index(aa)]; }
  double hydro(char aa) const { return hydrophobicity[require_aa_index(aa)]; }

  /// Unit vector for canonical codes, all zeros for anything else.
  static std::array<double, kNumAminoAcids> one_hot(char aa) {
    std::array<double, kNumAminoAcids> v{};
    if (auto idx = aa_index(aa)) v[*idx] = 1.0;
    return v;
  }
};

struct SubstitutionMatrix {
  std::string name;
  std::array<std::array<double, kNumAminoAcids>, kNumAminoAcids> scores{};
  bool symmetric = false;

  void refresh_symmetry() {
    symmetric = true;
    for (std::size_t a = 0; a < kNumAminoAcids; ++a)
      for (std::size_t b = 0; b < a; ++b)
        if (scores[a][b] != scores[b][a]) symmetric = false;
  }
};

/// Score for substituting `wt` by `mut`; directional matrices are read as
/// row = wild type, column = mutant.
inline double lookup_substitution(const SubstitutionMatrix& m, char wt, char mut) {
  return m.scores[require_aa_index(wt)][require_aa_index(mut)];
}

/// Text format: a header line of one-letter codes, then one line per code
/// starting with the code followed by whitespace-separated scores. Lines
/// starting with '#' are comments. All 400 canonical cells must be present;
/// extra codes (B, Z, X, *) are ignored.
inline SubstitutionMatrix parse_substitution_matrix(std::istream& in, std::string name) {
  SubstitutionMatrix m;
  m.name = std::move(name);
  std::vector<char> columns;
  std::array<std::array<bool, kNumAminoAcids>, kNumAminoAcids> seen{};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first) || first[0] == '#') continue;
    if (columns.empty()) {
      columns.push_back(first[0]);
      std::string tok;
      while (fields >> tok) columns.push_back(tok[0]);
      continue;
    }
    if (first.size() != 1) fail(ErrorKind::format, m.name + ": bad row label on line " + std::to_string(line_no));
    const auto row = aa_index(first[0]);
    std::size_t col = 0;
    std::string tok;
    while (fields >> tok) {
      if (col >= columns.size()) fail(ErrorKind::format, m.name + ": too many values on line " + std::to_string(line_no));
      char* end = nullptr;
      const double value = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0' || !std::isfinite(value)) {
        fail(ErrorKind::format, m.name + ": bad score '" + tok + "' on line " + std::to_string(line_no));
      }
      const auto c = aa_index(columns[col]);
      if (row && c) {
        m.scores[*row][*c] = value;
        seen[*row][*c] = true;
      }
      ++col;
    }
    if (col != columns.size()) fail(ErrorKind::format, m.name + ": too few values on line " + std::to_string(line_no));
  }
  for (std::size_t a = 0; a < kNumAminoAcids; ++a)
    for (std::size_t b = 0; b < kNumAminoAcids; ++b)
      if (!seen[a][b]) {
        fail(ErrorKind::format, m.name + ": missing cell " + std::string{kAlphabet[a], kAlphabet[b]});
      }
  m.refresh_symmetry();
  return m;
}

inline SubstitutionMatrix load_substitution_matrix(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::format, "cannot open substitution matrix " + path.string());
  return parse_substitution_matrix(in, std::move(name));
}

inline std::string serialize_substitution_matrix(const SubstitutionMatrix& m) {
  std::ostringstream out;
  out << "# " << m.name << "\n ";
  for (char c : kAlphabet) out << "  " << c;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t a = 0; a < kNumAminoAcids; ++a) {
    out << kAlphabet[a];
    for (std::size_t b = 0; b < kNumAminoAcids; ++b) out << ' ' << m.scores[a][b];
    out << '\n';
  }
  return out.str();
}

inline constexpr std::string_view kBlosum62Text = R"(# BLOSUM62 (Henikoff & Henikoff 1992)
   A  R  N  D  C  Q  E  G  H  I  L  K  M  F  P  S  T  W  Y  V
A  4 -1 -2 -2  0 -1 -1  0 -2 -1 -1 -1 -1 -2 -1  1  0 -3 -2  0
R -1  5  0 -2 -3  1  0 -2  0 -3 -2  2 -1 -3 -2 -1 -1 -3 -2 -3
N -2  0  6  1 -3  0  0  0  1 -3 -3  0 -2 -3 -2  1  0 -4 -2 -3
D -2 -2  1  6 -3  0  2 -1 -1 -3 -4 -1 -3 -3 -1  0 -1 -4 -3 -3
C  0 -3 -3 -3  9 -3 -4 -3 -3 -1 -1 -3 -1 -2 -3 -1 -1 -2 -2 -1
Q -1  1  0  0 -3  5  2 -2  0 -3 -2  1  0 -3 -1  0 -1 -2 -1 -2
E -1  0  0  2 -4  2  5 -2  0 -3 -3  1 -2 -3 -1  0 -1 -3 -2 -2
G  0 -2  0 -1 -3 -2 -2  6 -2 -4 -4 -2 -3 -3 -2  0 -2 -2 -3 -3
H -2  0  1 -1 -3  0  0 -2  8 -3 -3 -1 -2 -1 -2 -1 -2 -2  2 -3
I -1 -3 -3 -3 -1 -3 -3 -4 -3  4  2 -3  1  0 -3 -2 -1 -3 -1  3
L -1 -2 -3 -4 -1 -2 -3 -4 -3  2  4 -2  2  0 -3 -2 -1 -2 -1  1
K -1  2  0 -1 -3  1  1 -2 -1 -3 -2  5 -1 -3 -1  0 -1 -3 -2 -2
M -1 -1 -2 -3 -1  0 -2 -3 -2  1  2 -1  5  0 -2 -1 -1 -1 -1  1
F -2 -3 -3 -3 -2 -3 -3 -3 -1  0  0 -3  0  6 -4 -2 -2  1  3 -1
P -1 -2 -2 -1 -3 -1 -1 -2 -2 -3 -3 -1 -2 -4  7 -1 -1 -4 -3 -2
S  1 -1  1  0 -1  0  0  0 -1 -2 -2  0 -1 -2 -1  4  1 -3 -2 -2
T  0 -1  0 -1 -1 -1 -1 -2 -2 -1 -1 -1 -1 -2 -1  1  5 -2 -2  0
W -3 -3 -4 -4 -2 -2 -3 -2 -2 -3 -2 -3 -1  1 -4 -3 -2 11  2 -3
Y -2 -2 -2 -3 -2 -1 -2 -3  2 -1 -1 -2 -1  3 -3 -2 -2  2  7 -1
V  0 -3 -3 -3 -1 -2 -2 -3 -3  3  1 -2  1 -1 -2 -2  0 -3 -1  4
)";

inline const SubstitutionMatrix& blosum62() {
  static const SubstitutionMatrix m = [] {
    std::istringstream in{std::string(kBlosum62Text)};
    return parse_substitution_matrix(in, "BLOSUM62");
  }();
  return m;
}

/// Directory searched for editable data assets: $THERMOFUSE_DATA_DIR, else "data".
inline std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("THERMOFUSE_DATA_DIR"); env && *env) return env;
  return "data";
}

/// BLOSUM62 plus the directional DeMaSK matrix from `<data_dir>/demask.txt`.
/// Without that file a zero placeholder is used and a warning is printed.
inline std::vector<SubstitutionMatrix> builtin_matrices(const std::filesystem::path& data_dir = default_data_dir()) {
  std::vector<SubstitutionMatrix> out{blosum62()};
  const auto path = data_dir / "demask.txt";
  if (std::filesystem::exists(path)) {
    try {
      out.push_back(load_substitution_matrix(path, "DeMaSK"));
    } catch (const Error& e) {
      fail(ErrorKind::startup, std::string("DeMaSK data asset malformed: ") + e.what());
    }
  } else {
    std::cerr << "warning: " << path.string() << " not found; DeMaSK scores are zero\n";
    SubstitutionMatrix zero;
    zero.name = "DeMaSK";
    zero.symmetric = false;
    out.push_back(zero);
  }
  return out;
}

struct FeatureTables {
  AminoAcidTable amino_acids = AminoAcidTable::standard();
  SubstitutionMatrix blosum = blosum62();
  SubstitutionMatrix demask;

  static FeatureTables from_matrices(const std::vector<SubstitutionMatrix>& ms) {
    FeatureTables t;
    for (const auto& m : ms) {
      if (m.name == "BLOSUM62") t.blosum = m;
      if (m.name == "DeMaSK") t.demask = m;
    }
    return t;
  }
};

struct FeatureSegment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
};

struct MutationFeatures {
  std::vector<double> vector;
  std::vector<FeatureSegment> layout;
  char wt = kUnknownResidue;
  char mut = kUnknownResidue;

  void append(std::string name, std::span<const double> values) {
    layout.push_back({std::move(name), vector.size(), values.size()});
    vector.insert(vector.end(), values.begin(), values.end());
    check_layout();
  }

  const FeatureSegment& segment(std::string_view name) const {
    for (const auto& s : layout)
      if (s.name == name) return s;
    fail(ErrorKind::bounds, "no feature segment named " + std::string(name));
  }

  std::span<const double> values(std::string_view name) const {
    const auto& s = segment(name);
    return {vector.data() + s.offset, s.length};
  }

  void check_layout() const {
    std::size_t total = 0;
    for (const auto& s : layout) {
      if (s.offset != total) fail(ErrorKind::shape, "feature layout has a gap before " + s.name);
      total += s.length;
    }
    if (total != vector.size()) fail(ErrorKind::shape, "feature layout does not cover the vector");
    for (double v : vector)
      if (!std::isfinite(v)) fail(ErrorKind::data, "non-finite feature value");
  }
};

/// Number of entries produced by mutation_features (before embedding context).
inline constexpr std::size_t kBaseFeatureDim = 20 + 20 + 1 + 1 + 1 + 1 + 9 + 3;

namespace detail {
inline void push_angle(std::vector<double>& out, const std::optional<double>& deg) {
  if (!deg) {
    out.insert(out.end(), {0.0, 0.0, 0.0});
    return;
  }
  const double rad = *deg * 3.14159265358979323846 / 180.0;
  out.insert(out.end(), {std::sin(rad), std::cos(rad), 1.0});
}
}  // namespace detail

/// Hand-engineered description of substituting residue `pos` (1-based ordinal
/// in the chain) from `wt` to `mut`. Segments: wt/mut one-hot, molecular
/// weight and hydrophobicity deltas, BLOSUM62 and DeMaSK scores, site torsions
/// as (sin, cos, present) triples, and window means of hydrophobicity and
/// molecular weight plus the in-chain fraction of the window.
inline MutationFeatures mutation_features(const BackboneStructure& s, const std::vector<DihedralTriple>& dihedrals,
                                          std::size_t pos, char wt, char mut, std::size_t window,
                                          const FeatureTables& tables) {
  if (pos < 1 || pos > s.length()) {
    fail(ErrorKind::bounds, "position " + std::to_string(pos) + " outside 1.." + std::to_string(s.length()));
  }
  if (window < 1 || window % 2 == 0) fail(ErrorKind::domain, "window must be a positive odd count");
  if (dihedrals.size() != s.length()) fail(ErrorKind::shape, "dihedral list does not match structure length");
  const char site = s.residues[pos - 1].aa;
  if (site != wt) {
    fail(ErrorKind::consistency, s.pdb_id + " position " + std::to_string(pos) + " is '" + std::string(1, site) +
                                     "' in the structure but the mutation says '" + std::string(1, wt) + "'");
  }
  if (!is_canonical(mut)) fail(ErrorKind::domain, std::string("non-canonical mutant code '") + mut + "'");

  const auto& aa = tables.amino_acids;
  const bool wt_known = is_canonical(wt);
  MutationFeatures f;
  f.wt = wt;
  f.mut = mut;
  f.append("one_hot_wt", AminoAcidTable::one_hot(wt));
  f.append("one_hot_mut", AminoAcidTable::one_hot(mut));
  const std::array<double, 1> dmw{wt_known ? aa.mw(mut) - aa.mw(wt) : 0.0};
  f.append("delta_molecular_weight", dmw);
  const std::array<double, 1> dhyd{wt_known ? aa.hydro(mut) - aa.hydro(wt) : 0.0};
  f.append("delta_hydrophobicity", dhyd);
  const std::array<double, 1> bl{wt_known ? lookup_substitution(tables.blosum, wt, mut) : 0.0};
  f.append("blosum62", bl);
  const std::array<double, 1> dm{wt_known ? lookup_substitution(tables.demask, wt, mut) : 0.0};
  f.append("demask", dm);

  std::vector<double> angles;
  const auto& d = dihedrals[pos - 1];
  detail::push_angle(angles, d.phi);
  detail::push_angle(angles, d.psi);
  detail::push_angle(angles, d.omega);
  f.append("site_dihedrals", angles);

  const std::size_t half = window / 2;
  const std::size_t lo = pos > half ? pos - half : 1;
  const std::size_t hi = std::min(s.length(), pos + half);
  double hyd = 0.0, mw = 0.0;
  std::size_t known = 0;
  for (std::size_t i = lo; i <= hi; ++i) {
    const char c = s.residues[i - 1].aa;
    if (!is_canonical(c)) continue;
    hyd += aa.hydro(c);
    mw += aa.mw(c);
    ++known;
  }
  const std::array<double, 3> agg{known ? hyd / known : 0.0, known ? mw / known : 0.0,
                                  static_cast<double>(hi - lo + 1) / static_cast<double>(window)};
  f.append("window_aggregates", agg);
  return f;
}

}  // namespace thermofuse
