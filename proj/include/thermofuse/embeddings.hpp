#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "thermofuse/features.hpp"
#include "thermofuse/io.hpp"
#include "thermofuse/nncore.hpp"
#include "thermofuse/structure.hpp"

namespace thermofuse {

enum class EmbeddingSource { external_file, desk_scale };

struct EmbeddingProvider {
  std::string name;
  std::size_t dim = 0;
  EmbeddingSource source = EmbeddingSource::desk_scale;
};

/// Per-residue vectors for one chain, one row per residue.
struct EmbeddingSet {
  std::string protein_id;
  std::string provider;
  Tensor2 vectors;  // L x dim

  std::size_t length() const { return vectors.rows; }
  std::size_t dim() const { return vectors.cols; }
  std::span<const double> row(std::size_t i) const { return vectors.row(i); }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

/// EMB1 layout (all little-endian): "EMB1", u32 L, u32 dim, u32 id byte
/// length, id bytes (UTF-8), then L*dim IEEE-754 binary32 values row-major.
inline std::string encode_emb1(const EmbeddingSet& e) {
  std::string out = "EMB1";
  detail::put_u32(out, static_cast<std::uint32_t>(e.length()));
  detail::put_u32(out, static_cast<std::uint32_t>(e.dim()));
  detail::put_u32(out, static_cast<std::uint32_t>(e.protein_id.size()));
  out += e.protein_id;
  for (double v : e.vectors.data) {
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) fail(ErrorKind::data, "embedding value not representable as a finite float");
    detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline EmbeddingSet decode_emb1(std::string_view bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 4 || bytes.substr(0, 4) != "EMB1") fail(ErrorKind::format, "missing EMB1 magic");
  if (bytes.size() < 16) fail(ErrorKind::length, "EMB1 header truncated");
  const std::uint32_t L = detail::get_u32(p + 4);
  const std::uint32_t dim = detail::get_u32(p + 8);
  const std::uint32_t id_len = detail::get_u32(p + 12);
  if (bytes.size() < 16ull + id_len) fail(ErrorKind::length, "EMB1 protein id truncated");
  EmbeddingSet e;
  e.protein_id = std::string(bytes.substr(16, id_len));
  e.provider = "external_file";
  const std::uint64_t count = static_cast<std::uint64_t>(L) * dim;
  const std::uint64_t payload = bytes.size() - 16ull - id_len;
  if (payload != 4 * count) {
    fail(ErrorKind::length, "EMB1 payload holds " + std::to_string(payload / 4) + " floats, header needs " +
                                std::to_string(count));
  }
  e.vectors = Tensor2(L, dim);
  const unsigned char* q = p + 16 + id_len;
  for (std::uint64_t i = 0; i < count; ++i) {
    const float f = std::bit_cast<float>(detail::get_u32(q + 4 * i));
    if (!std::isfinite(f)) fail(ErrorKind::data, "non-finite value at EMB1 element " + std::to_string(i));
    e.vectors.data[i] = f;
  }
  return e;
}

inline void write_embeddings(const EmbeddingSet& e, const std::filesystem::path& path) {
  write_file_atomic(path, encode_emb1(e));
}

inline EmbeddingSet load_embeddings(const std::filesystem::path& path) { return decode_emb1(read_file(path)); }

/// Width of the per-residue input to the desk-scale projection:
/// one-hot (20), sin/cos/present for phi, psi, omega (9), relative position (1).
inline constexpr std::size_t kDeskInputDim = 30;

inline std::vector<double> desk_residue_input(const BackboneStructure& s, const std::vector<DihedralTriple>& dihedrals,
                                              std::size_t i, bool include_position) {
  std::vector<double> x;
  x.reserve(kDeskInputDim);
  const auto oh = AminoAcidTable::one_hot(s.residues[i].aa);
  x.insert(x.end(), oh.begin(), oh.end());
  detail::push_angle(x, dihedrals[i].phi);
  detail::push_angle(x, dihedrals[i].psi);
  detail::push_angle(x, dihedrals[i].omega);
  const double rel = s.length() > 1 ? static_cast<double>(i) / static_cast<double>(s.length() - 1) : 0.0;
  x.push_back(include_position ? rel : 0.0);
  return x;
}

/// Fixed seeded projection, entries N(0, 1/kDeskInputDim).
inline Tensor2 desk_projection(std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  Tensor2 P(dim, kDeskInputDim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kDeskInputDim));
  for (auto& v : P.data) v = rng.normal() * scale;
  return P;
}

/// Deterministic stand-in for pretrained per-residue embeddings: a fixed
/// random linear map of residue identity, backbone torsions and position.
inline EmbeddingSet desk_scale_embed(const BackboneStructure& s, const std::vector<DihedralTriple>& dihedrals,
                                     const AminoAcidTable& table, std::size_t dim, std::uint64_t seed,
                                     bool include_position = true) {
  (void)table;  // one-hot encoding uses the shared canonical alphabet
  if (dim < 8) fail(ErrorKind::domain, "desk-scale embedding dim must be >= 8");
  if (dihedrals.size() != s.length()) fail(ErrorKind::shape, "dihedral list does not match structure length");
  const Tensor2 P = desk_projection(dim, seed);
  EmbeddingSet e;
  e.protein_id = s.pdb_id;
  e.provider = "desk_scale";
  e.vectors = Tensor2(s.length(), dim);
  for (std::size_t i = 0; i < s.length(); ++i) {
    const auto x = desk_residue_input(s, dihedrals, i, include_position);
    for (std::size_t r = 0; r < dim; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < kDeskInputDim; ++c) acc += P(r, c) * x[c];
      e.vectors(i, r) = acc;
    }
  }
  return e;
}

struct PooledEmbedding {
  std::vector<double> local;   // window * (dim + 1): row then presence flag
  std::vector<double> pooled;  // dim
};

inline PooledEmbedding pool_embeddings(const EmbeddingSet& e, std::size_t pos, std::size_t window) {
  const std::size_t L = e.length();
  if (pos < 1 || pos > L) fail(ErrorKind::bounds, "position " + std::to_string(pos) + " outside 1.." + std::to_string(L));
  if (window < 1 || window % 2 == 0) fail(ErrorKind::domain, "window must be a positive odd count");
  const std::size_t d = e.dim();
  PooledEmbedding out;
  out.local.reserve(window * (d + 1));
  const long half = static_cast<long>(window / 2);
  for (long off = -half; off <= half; ++off) {
    const long i = static_cast<long>(pos) - 1 + off;
    if (i < 0 || i >= static_cast<long>(L)) {
      out.local.insert(out.local.end(), d + 1, 0.0);
      continue;
    }
    const auto r = e.row(static_cast<std::size_t>(i));
    out.local.insert(out.local.end(), r.begin(), r.end());
    out.local.push_back(1.0);
  }
  out.pooled.assign(d, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    const auto r = e.row(i);
    for (std::size_t c = 0; c < d; ++c) out.pooled[c] += r[c];
  }
  for (auto& v : out.pooled) v /= static_cast<double>(L);
  return out;
}

/// Adds "local_embedding" and "pooled_embedding" segments to a feature vector.
inline void append_embedding_context(MutationFeatures& f, const EmbeddingSet& e, std::size_t pos, std::size_t window) {
  const auto p = pool_embeddings(e, pos, window);
  f.append("local_embedding", p.local);
  f.append("pooled_embedding", p.pooled);
}

}  // namespace thermofuse
