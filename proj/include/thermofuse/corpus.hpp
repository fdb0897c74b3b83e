#pragma once

// Proteins the dataset refers to: parsed backbone, torsions and the two
// per-residue embedding sets (external EMB1 files or desk-scale stand-ins).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "thermofuse/dataset.hpp"
#include "thermofuse/embeddings.hpp"
#include "thermofuse/structure.hpp"

namespace thermofuse {

struct EmbedderConfig {
  std::size_t struct_dim = 32;
  std::size_t seq_dim = 32;
  std::uint64_t struct_seed = 1001;
  std::uint64_t seq_seed = 2002;
};

struct ProteinEntry {
  BackboneStructure structure;
  std::vector<DihedralTriple> dihedrals;
  EmbeddingSet struct_emb;
  EmbeddingSet seq_emb;
};

inline ProteinEntry make_entry(BackboneStructure s, const EmbedderConfig& cfg,
                               std::optional<EmbeddingSet> external_struct = std::nullopt,
                               std::optional<EmbeddingSet> external_seq = std::nullopt) {
  ProteinEntry e;
  e.dihedrals = backbone_dihedrals(s);
  const auto& table = AminoAcidTable::standard();
  e.struct_emb = external_struct ? std::move(*external_struct)
                                 : desk_scale_embed(s, e.dihedrals, table, cfg.struct_dim, cfg.struct_seed);
  e.seq_emb = external_seq ? std::move(*external_seq) : desk_scale_embed(s, e.dihedrals, table, cfg.seq_dim, cfg.seq_seed);
  for (const auto* emb : {&e.struct_emb, &e.seq_emb}) {
    if (emb->length() != s.length()) {
      fail(ErrorKind::linkage, s.pdb_id + ": embedding has " + std::to_string(emb->length()) + " rows but structure has " +
                                   std::to_string(s.length()) + " residues");
    }
  }
  e.structure = std::move(s);
  return e;
}

class Corpus {
 public:
  void add(const std::string& id, ProteinEntry entry) { entries_.insert_or_assign(id, std::move(entry)); }

  const ProteinEntry* find(std::string_view id) const {
    auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const ProteinEntry& at(std::string_view id) const {
    if (const auto* e = find(id)) return *e;
    fail(ErrorKind::linkage, "unknown protein " + std::string(id));
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : entries_) out.push_back(id);
    return out;
  }

  std::size_t size() const { return entries_.size(); }

  std::size_t struct_dim() const { return entries_.empty() ? 0 : entries_.begin()->second.struct_emb.dim(); }
  std::size_t seq_dim() const { return entries_.empty() ? 0 : entries_.begin()->second.seq_emb.dim(); }

 private:
  std::map<std::string, ProteinEntry, std::less<>> entries_;
};

struct CorpusPaths {
  std::filesystem::path pdb_dir;
  std::filesystem::path emb_dir;  // optional: <id>.struct.emb1 / <id>.seq.emb1
};

inline std::optional<std::filesystem::path> find_pdb_file(const std::filesystem::path& dir, const std::string& id) {
  for (const auto& name : {id + ".pdb", id + ".ent"}) {
    if (std::filesystem::exists(dir / name)) return dir / name;
  }
  std::string lower = id;
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (std::filesystem::exists(dir / (lower + ".pdb"))) return dir / (lower + ".pdb");
  return std::nullopt;
}

inline ProteinEntry load_entry(const CorpusPaths& paths, const std::string& id, std::optional<char> chain,
                               const EmbedderConfig& cfg) {
  const auto file = find_pdb_file(paths.pdb_dir, id);
  if (!file) fail(ErrorKind::linkage, "no PDB file for " + id + " in " + paths.pdb_dir.string());
  std::ifstream in(*file);
  auto s = parse_pdb(in, chain, id);
  std::optional<EmbeddingSet> ext_struct, ext_seq;
  if (!paths.emb_dir.empty()) {
    const auto sp = paths.emb_dir / (id + ".struct.emb1");
    const auto qp = paths.emb_dir / (id + ".seq.emb1");
    if (std::filesystem::exists(sp)) ext_struct = load_embeddings(sp);
    if (std::filesystem::exists(qp)) ext_seq = load_embeddings(qp);
  }
  return make_entry(std::move(s), cfg, std::move(ext_struct), std::move(ext_seq));
}

/// Loads every protein named by `records` (chain from its first record), or
/// every PDB file in the directory when `records` is empty.
inline Corpus load_corpus(const CorpusPaths& paths, const std::vector<MutationRecord>& records,
                          const EmbedderConfig& cfg) {
  Corpus corpus;
  std::map<std::string, char> wanted;
  for (const auto& r : records) wanted.emplace(r.pdb_id, r.chain);
  if (records.empty()) {
    if (!std::filesystem::is_directory(paths.pdb_dir)) fail(ErrorKind::data, "not a directory: " + paths.pdb_dir.string());
    for (const auto& f : std::filesystem::directory_iterator(paths.pdb_dir)) {
      if (f.path().extension() == ".pdb") {
        const auto id = f.path().stem().string();
        corpus.add(id, load_entry(paths, id, std::nullopt, cfg));
      }
    }
    return corpus;
  }
  for (const auto& [id, chain] : wanted) corpus.add(id, load_entry(paths, id, chain, cfg));
  return corpus;
}

/// Throws a linkage error listing every record that does not resolve against
/// the corpus (unknown protein, chain, position or wild-type residue).
inline void check_linkage(const std::vector<MutationRecord>& records, const Corpus& corpus) {
  std::ostringstream problems;
  std::size_t count = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    std::string why;
    const auto* e = corpus.find(r.pdb_id);
    if (!e) why = "unknown protein";
    else if (e->structure.chain != r.chain) why = std::string("chain ") + r.chain + " not loaded";
    else if (r.position < 1 || r.position > e->structure.length()) why = "position out of range";
    else if (e->structure.residues[r.position - 1].aa != r.wt)
      why = std::string("structure has '") + e->structure.residues[r.position - 1].aa + "'";
    if (why.empty()) continue;
    if (count < 20) {
      problems << "\n  row " << (i + 1) << ": " << r.pdb_id << ' ' << r.chain << ' ' << r.wt << r.position << r.mut
               << " (" << why << ")";
    }
    ++count;
  }
  if (count) {
    fail(ErrorKind::linkage, std::to_string(count) + " record(s) do not resolve" + problems.str() +
                                 (count > 20 ? "\n  ..." : ""));
  }
}

}  // namespace thermofuse
