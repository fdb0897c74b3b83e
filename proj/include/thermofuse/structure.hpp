#pragma once

// Backbone-only PDB reading/writing and torsion geometry.

#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "thermofuse/amino_acids.hpp"
#include "thermofuse/error.hpp"

namespace thermofuse {

using Vec3 = std::array<double, 3>;

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

enum BackboneAtom : unsigned { kN = 0, kCA = 1, kC = 2, kO = 3 };
inline constexpr std::array<std::string_view, 4> kBackboneNames{"N", "CA", "C", "O"};

struct Residue {
  int index = 0;  // residue sequence number from the file (1-based in practice)
  char aa = kUnknownResidue;
  std::array<Vec3, 4> atoms{};
  std::array<bool, 4> present{};

  bool has(BackboneAtom a) const { return present[a]; }
  const Vec3& atom(BackboneAtom a) const { return atoms[a]; }
};

struct BackboneStructure {
  std::string pdb_id;
  char chain = 'A';
  std::vector<Residue> residues;

  std::size_t length() const { return residues.size(); }

  std::string sequence() const {
    std::string s;
    s.reserve(residues.size());
    for (const auto& r : residues) s.push_back(r.aa);
    return s;
  }
};

struct DihedralTriple {
  std::optional<double> phi;
  std::optional<double> psi;
  std::optional<double> omega;
};

namespace detail {

inline std::string_view trimmed(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string_view column(std::string_view line, std::size_t begin, std::size_t end) {
  // 1-based inclusive PDB columns
  if (line.size() < begin) return {};
  return line.substr(begin - 1, std::min(end, line.size()) - (begin - 1));
}

inline double parse_coordinate(std::string_view field, std::size_t line_no) {
  const auto text = std::string(trimmed(field));
  if (text.empty()) fail(ErrorKind::parse, "empty coordinate on line " + std::to_string(line_no));
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    fail(ErrorKind::parse, "malformed coordinate '" + text + "' on line " + std::to_string(line_no));
  }
  if (used != text.size() || !std::isfinite(value)) {
    fail(ErrorKind::parse, "malformed coordinate '" + text + "' on line " + std::to_string(line_no));
  }
  return value;
}

}  // namespace detail

/// Reads ATOM records of one chain (first chain seen when `chain` is empty),
/// keeping N/CA/C/O only. MODEL 1 only; insertion-coded residues are skipped;
/// the first alternate location of an atom wins.
inline BackboneStructure parse_pdb(std::istream& in, std::optional<char> chain = std::nullopt,
                                   std::string pdb_id = {}) {
  BackboneStructure s;
  s.pdb_id = std::move(pdb_id);
  std::string line;
  std::size_t line_no = 0;
  bool seen_model = false;
  bool any_atom = false;
  std::optional<char> selected = chain;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view(line);
    const auto record = detail::column(view, 1, 6);
    if (record.starts_with("MODEL")) {
      if (seen_model) break;
      seen_model = true;
      continue;
    }
    if (record.starts_with("ENDMDL")) break;
    if (!(record == "ATOM  " || record == "ATOM")) continue;
    if (view.size() < 54) fail(ErrorKind::parse, "truncated ATOM record on line " + std::to_string(line_no));
    const char chain_id = view.size() >= 22 ? view[21] : ' ';
    if (!selected) selected = chain_id;
    if (chain_id != *selected) continue;
    if (view[26] != ' ') continue;  // insertion code

    const auto atom_name = detail::trimmed(detail::column(view, 13, 16));
    const auto res_name = detail::trimmed(detail::column(view, 18, 20));
    const auto seq_field = std::string(detail::trimmed(detail::column(view, 23, 26)));
    int res_seq = 0;
    try {
      res_seq = std::stoi(seq_field);
    } catch (const std::exception&) {
      fail(ErrorKind::parse, "malformed residue number on line " + std::to_string(line_no));
    }
    const double x = detail::parse_coordinate(detail::column(view, 31, 38), line_no);
    const double y = detail::parse_coordinate(detail::column(view, 39, 46), line_no);
    const double z = detail::parse_coordinate(detail::column(view, 47, 54), line_no);
    any_atom = true;

    if (s.residues.empty() || s.residues.back().index != res_seq) {
      if (!s.residues.empty() && res_seq < s.residues.back().index) {
        fail(ErrorKind::parse, "residue numbers not increasing on line " + std::to_string(line_no));
      }
      Residue r;
      r.index = res_seq;
      r.aa = three_to_one(res_name);
      s.residues.push_back(r);
    }
    auto& res = s.residues.back();
    for (unsigned a = 0; a < 4; ++a) {
      if (atom_name == kBackboneNames[a] && !res.present[a]) {
        res.atoms[a] = {x, y, z};
        res.present[a] = true;
      }
    }
  }
  if (!any_atom || s.residues.empty()) {
    fail(ErrorKind::empty_structure, "no ATOM records" + (chain ? std::string(" for chain ") + *chain : ""));
  }
  s.chain = selected.value_or('A');
  return s;
}

inline BackboneStructure parse_pdb(std::string_view text, std::optional<char> chain = std::nullopt,
                                   std::string pdb_id = {}) {
  std::istringstream in{std::string(text)};
  return parse_pdb(in, chain, std::move(pdb_id));
}

/// Writes the retained backbone atoms as fixed-column ATOM records.
inline std::string write_pdb(const BackboneStructure& s) {
  std::string out;
  char buf[96];
  int serial = 1;
  for (const auto& r : s.residues) {
    for (unsigned a = 0; a < 4; ++a) {
      if (!r.present[a]) continue;
      const auto name = kBackboneNames[a];
      // atom names of 1-3 characters start in column 14
      std::string padded = " " + std::string(name);
      padded.resize(4, ' ');
      std::snprintf(buf, sizeof buf, "ATOM  %5d %4s %3s %c%4d    %8.3f%8.3f%8.3f  1.00  0.00           %c\n",
                    serial++, padded.c_str(), std::string(one_to_three(r.aa)).c_str(), s.chain, r.index,
                    r.atoms[a][0], r.atoms[a][1], r.atoms[a][2], name[0]);
      out += buf;
    }
  }
  out += "TER\nEND\n";
  return out;
}

/// Signed torsion angle p1-p2-p3-p4 in degrees, range (-180, 180]. Positive
/// when, looking down p2->p3, the far bond is rotated clockwise from the near
/// bond (IUPAC convention): (0,1,0),(0,0,0),(1,0,0),(1,0,1) gives +90.
inline double dihedral(const Vec3& p1, const Vec3& p2, const Vec3& p3, const Vec3& p4) {
  const Vec3 b1 = p2 - p1;
  const Vec3 b2 = p3 - p2;
  const Vec3 b3 = p4 - p3;
  const double l1 = norm(b1), l2 = norm(b2), l3 = norm(b3);
  if (l1 <= 1e-9 || l2 <= 1e-9 || l3 <= 1e-9) fail(ErrorKind::geometry, "coincident points in dihedral");
  const Vec3 n1 = cross(b1, b2);
  const Vec3 n2 = cross(b2, b3);
  if (norm(n1) <= 1e-9 * l1 * l2 || norm(n2) <= 1e-9 * l2 * l3) {
    fail(ErrorKind::geometry, "collinear points in dihedral");
  }
  const double y = l2 * dot(b1, n2);
  const double x = dot(n1, n2);
  double deg = std::atan2(y, x) * 180.0 / 3.14159265358979323846;
  if (deg <= -180.0) deg += 360.0;
  return deg;
}

inline std::vector<DihedralTriple> backbone_dihedrals(const BackboneStructure& s) {
  std::vector<DihedralTriple> out(s.residues.size());
  auto torsion = [](const Residue& a, BackboneAtom aa, const Residue& b, BackboneAtom ba, const Residue& c,
                    BackboneAtom ca, const Residue& d, BackboneAtom da) -> std::optional<double> {
    if (!a.has(aa) || !b.has(ba) || !c.has(ca) || !d.has(da)) return std::nullopt;
    try {
      return dihedral(a.atom(aa), b.atom(ba), c.atom(ca), d.atom(da));
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  const auto& R = s.residues;
  for (std::size_t i = 0; i < R.size(); ++i) {
    // neighbours must be sequence-adjacent to count as bonded
    const bool has_prev = i > 0 && R[i - 1].index + 1 == R[i].index;
    const bool has_next = i + 1 < R.size() && R[i + 1].index == R[i].index + 1;
    if (has_prev) out[i].phi = torsion(R[i - 1], kC, R[i], kN, R[i], kCA, R[i], kC);
    if (has_next) {
      out[i].psi = torsion(R[i], kN, R[i], kCA, R[i], kC, R[i + 1], kN);
      out[i].omega = torsion(R[i], kCA, R[i], kC, R[i + 1], kN, R[i + 1], kCA);
    }
  }
  return out;
}

}  // namespace thermofuse
