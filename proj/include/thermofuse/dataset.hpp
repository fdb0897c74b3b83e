#pragma once

// Mutation dataset rows: delimiter-separated text I/O, duplicate removal and
// the train/validation split.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "thermofuse/amino_acids.hpp"
#include "thermofuse/error.hpp"
#include "thermofuse/nncore.hpp"

namespace thermofuse {

enum class Split { train, val };

inline std::string_view to_string(Split s) { return s == Split::train ? "train" : "val"; }

struct MutationRecord {
  std::string pdb_id;
  char chain = 'A';
  std::size_t position = 0;  // 1-based ordinal in the parsed chain
  char wt = 'A';
  char mut = 'A';
  double ddg = 0.0;  // kcal/mol, positive = destabilizing
  Split split = Split::train;

  auto key() const { return std::tie(pdb_id, chain, position, wt, mut); }
};

/// Fraction of the validation split when the file has no split column.
inline constexpr double kDefaultValFraction = 0.13;

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

}  // namespace detail

/// Header must name pdb_id, chain, position, wt_aa, mut_aa, ddg and may name
/// split; column order is free. Comma- or tab-delimited, detected from the
/// header. Without a split column a seeded 87/13 train/val split is drawn.
inline std::vector<MutationRecord> read_dataset(std::istream& in, std::uint64_t split_seed = 0) {
  std::string header;
  if (!std::getline(in, header)) fail(ErrorKind::data, "dataset is empty");
  const char delim = header.find('\t') != std::string::npos ? '\t' : ',';
  const auto names = detail::split_fields(header, delim);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < names.size(); ++i) col[names[i]] = i;
  for (const char* required : {"pdb_id", "chain", "position", "wt_aa", "mut_aa", "ddg"}) {
    if (!col.count(required)) fail(ErrorKind::data, std::string("dataset header lacks column '") + required + "'");
  }
  const bool has_split = col.count("split") > 0;

  std::vector<MutationRecord> records;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_fields(line, delim);
    auto bad = [&](const std::string& what) {
      fail(ErrorKind::data, "dataset line " + std::to_string(line_no) + ": " + what);
    };
    if (f.size() < names.size()) bad("expected " + std::to_string(names.size()) + " fields");
    MutationRecord r;
    r.pdb_id = f[col["pdb_id"]];
    if (r.pdb_id.empty()) bad("empty pdb_id");
    const auto& chain = f[col["chain"]];
    r.chain = chain.empty() ? 'A' : chain[0];
    try {
      const long long p = std::stoll(f[col["position"]]);
      if (p < 1) bad("position must be >= 1");
      r.position = static_cast<std::size_t>(p);
      std::size_t used = 0;
      r.ddg = std::stod(f[col["ddg"]], &used);
      if (used != f[col["ddg"]].size()) bad("malformed ddg");
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      bad("malformed number");
    }
    if (!std::isfinite(r.ddg)) bad("non-finite ddg");
    const auto& wt = f[col["wt_aa"]];
    const auto& mut = f[col["mut_aa"]];
    if (wt.size() != 1 || !is_canonical(wt[0])) bad("wt_aa must be one canonical letter");
    if (mut.size() != 1 || !is_canonical(mut[0])) bad("mut_aa must be one canonical letter");
    r.wt = wt[0];
    r.mut = mut[0];
    if (r.wt == r.mut) bad("wt_aa equals mut_aa");
    if (has_split) {
      const auto& s = f[col["split"]];
      if (s == "train") r.split = Split::train;
      else if (s == "val" || s == "valid" || s == "validation") r.split = Split::val;
      else bad("split must be train or val");
    }
    records.push_back(std::move(r));
  }
  if (!has_split && !records.empty()) {
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(split_seed);
    rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(std::llround(kDefaultValFraction * static_cast<double>(records.size())));
    for (std::size_t i = 0; i < order.size(); ++i) records[order[i]].split = i < n_val ? Split::val : Split::train;
  }
  return records;
}

inline std::vector<MutationRecord> read_dataset_file(const std::string& path, std::uint64_t split_seed = 0) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data, "cannot open dataset " + path);
  return read_dataset(in, split_seed);
}

inline std::string write_dataset(const std::vector<MutationRecord>& records) {
  std::ostringstream out;
  out << "pdb_id,chain,position,wt_aa,mut_aa,ddg,split\n" << std::setprecision(17);
  for (const auto& r : records) {
    out << r.pdb_id << ',' << r.chain << ',' << r.position << ',' << r.wt << ',' << r.mut << ',' << r.ddg << ','
        << to_string(r.split) << '\n';
  }
  return out.str();
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t dataset_checksum(const std::vector<MutationRecord>& records) {
  return fnv1a(write_dataset(records));
}

struct DuplicateRow {
  std::size_t row = 0;            // index in the input list
  std::size_t first_row = 0;      // index of the kept occurrence
  bool conflicting_ddg = false;   // measurement differs from the kept one
};

struct DedupReport {
  std::size_t total_train = 0, total_val = 0;
  std::size_t removed_train = 0, removed_val = 0;
  std::vector<DuplicateRow> removed;

  double removed_fraction_train() const {
    return total_train ? static_cast<double>(removed_train) / static_cast<double>(total_train) : 0.0;
  }
  double removed_fraction_val() const {
    return total_val ? static_cast<double>(removed_val) / static_cast<double>(total_val) : 0.0;
  }
};

struct DedupResult {
  std::vector<MutationRecord> kept;
  DedupReport report;
};

/// Keeps the first occurrence of each (pdb_id, chain, position, wt, mut) key.
/// Fractions are removed rows over input rows, per split.
inline DedupResult dedup(const std::vector<MutationRecord>& records) {
  DedupResult out;
  std::map<std::tuple<std::string, char, std::size_t, char, char>, std::size_t> first;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    (r.split == Split::train ? out.report.total_train : out.report.total_val)++;
    auto [it, inserted] = first.emplace(std::make_tuple(r.pdb_id, r.chain, r.position, r.wt, r.mut), i);
    if (inserted) {
      out.kept.push_back(r);
      continue;
    }
    (r.split == Split::train ? out.report.removed_train : out.report.removed_val)++;
    out.report.removed.push_back({i, it->second, records[it->second].ddg != r.ddg});
  }
  return out;
}

}  // namespace thermofuse
