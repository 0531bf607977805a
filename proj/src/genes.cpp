// Copyright 2026 The tilegene Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tilegene/genes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "tilegene/binio.hpp"
#include "tilegene/errors.hpp"
#include "tilegene/rng.hpp"

namespace tilegene {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, '\t')) out.push_back(cell);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_expression(const std::string& cell, const std::string& source, std::size_t row) {
  double v = 0;
  try {
    std::size_t used = 0;
    v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
  } catch (const std::logic_error&) {
    throw FormatError(source + ": row " + std::to_string(row) + ": unparsable value \"" + cell + "\"", row);
  }
  if (!std::isfinite(v)) throw FormatError(source + ": row " + std::to_string(row) + ": non-finite value", row);
  if (v < 0) {
    throw FormatError(source + ": row " + std::to_string(row) + ": negative expression value " + cell, row);
  }
  return v;
}

}  // namespace

std::vector<double> GeneTable::gene_column(std::size_t g) const {
  std::vector<double> col(cases.size());
  for (std::size_t c = 0; c < cases.size(); ++c) col[c] = at(c, g);
  return col;
}

std::optional<std::size_t> GeneTable::case_index(const std::string& case_id) const {
  auto it = std::find(cases.begin(), cases.end(), case_id);
  if (it == cases.end()) return std::nullopt;
  return static_cast<std::size_t>(it - cases.begin());
}

GeneTable ingest_case_streams(const std::vector<std::pair<std::string, std::istream*>>& cases) {
  if (cases.empty()) throw InputError("ingest_expression: no cases given");
  GeneTable table;
  std::unordered_map<std::string, std::size_t> column;
  std::set<std::string> seen_cases;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const auto& [case_id, stream] = cases[ci];
    if (!seen_cases.insert(case_id).second) throw DataError("ingest_expression: duplicate case " + case_id);
    std::vector<double> row(table.gene_ids.size(), 0.0);
    std::vector<char> filled(table.gene_ids.size(), 0);
    std::unordered_set<std::string> ids_here;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(*stream, line)) {
      ++lineno;
      line = strip_cr(line);
      if (line.empty() || line[0] == '#') continue;
      auto cells = split_tabs(line);
      if (cells.size() != 2) {
        throw FormatError(case_id + ": row " + std::to_string(lineno) + ": expected gene_id<TAB>value", lineno);
      }
      const std::string& gene = cells[0];
      if (!ids_here.insert(gene).second) {
        throw FormatError(case_id + ": row " + std::to_string(lineno) + ": duplicate gene id " + gene, lineno);
      }
      const double v = parse_expression(cells[1], case_id, lineno);
      if (ci == 0) {
        column.emplace(gene, table.gene_ids.size());
        table.gene_ids.push_back(gene);
        row.push_back(v);
        filled.push_back(1);
      } else {
        auto it = column.find(gene);
        if (it == column.end()) {
          throw DataError(case_id + ": gene " + gene + " is not present in case " + cases[0].first);
        }
        row[it->second] = v;
        filled[it->second] = 1;
      }
    }
    for (std::size_t g = 0; g < filled.size(); ++g) {
      if (!filled[g]) throw DataError(case_id + ": missing gene " + table.gene_ids[g]);
    }
    table.cases.push_back(case_id);
    table.values.insert(table.values.end(), row.begin(), row.end());
  }
  if (table.gene_ids.empty()) throw FormatError("ingest_expression: no genes found", 0);
  return table;
}

GeneTable ingest_expression_files(const std::vector<std::pair<std::string, std::string>>& case_files) {
  std::vector<std::ifstream> files;
  files.reserve(case_files.size());
  std::vector<std::pair<std::string, std::istream*>> streams;
  for (const auto& [case_id, path] : case_files) {
    files.emplace_back(path);
    if (!files.back()) throw InputError("cannot open " + path);
  }
  for (std::size_t i = 0; i < case_files.size(); ++i) streams.emplace_back(case_files[i].first, &files[i]);
  return ingest_case_streams(streams);
}

GeneTable ingest_matrix_stream(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(source + ": empty matrix", 0);
  auto header = split_tabs(strip_cr(line));
  if (header.size() < 2) throw FormatError(source + ": header needs gene_id and at least one case", 1);
  GeneTable table;
  table.cases.assign(header.begin() + 1, header.end());
  const std::size_t nc = table.cases.size();
  std::vector<std::vector<double>> by_gene;
  std::unordered_set<std::string> ids;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    if (cells.size() != nc + 1) {
      throw FormatError(source + ": row " + std::to_string(lineno) + ": ragged row with " +
                            std::to_string(cells.size()) + " cells, expected " + std::to_string(nc + 1),
                        lineno);
    }
    if (!ids.insert(cells[0]).second) {
      throw FormatError(source + ": row " + std::to_string(lineno) + ": duplicate gene id " + cells[0], lineno);
    }
    table.gene_ids.push_back(cells[0]);
    std::vector<double> vals(nc);
    for (std::size_t c = 0; c < nc; ++c) vals[c] = parse_expression(cells[c + 1], source, lineno);
    by_gene.push_back(std::move(vals));
  }
  if (table.gene_ids.empty()) throw FormatError(source + ": no genes found", lineno);
  const std::size_t ng = table.gene_ids.size();
  table.values.resize(nc * ng);
  for (std::size_t g = 0; g < ng; ++g)
    for (std::size_t c = 0; c < nc; ++c) table.values[c * ng + g] = by_gene[g][c];
  return table;
}

GeneTable ingest_expression_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return ingest_matrix_stream(in, path);
}

double median(std::vector<double> values) {
  if (values.empty()) throw InputError("median of an empty set");
  const std::size_t n = values.size();
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double hi = *mid;
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), mid);
  return 0.5 * (lo + hi);
}

GeneTable filter_median_zero(const GeneTable& table) {
  if (table.transformed) throw ContractError("filter_median_zero: table is already log-transformed");
  GeneTable out;
  out.cases = table.cases;
  out.dropped_ids = table.dropped_ids;
  std::vector<std::size_t> keep;
  for (std::size_t g = 0; g < table.num_genes(); ++g) {
    if (median(table.gene_column(g)) > 0) {
      keep.push_back(g);
      out.gene_ids.push_back(table.gene_ids[g]);
    } else {
      out.dropped_ids.push_back(table.gene_ids[g]);
    }
  }
  out.values.reserve(keep.size() * table.num_cases());
  for (std::size_t c = 0; c < table.num_cases(); ++c)
    for (auto g : keep) out.values.push_back(table.at(c, g));
  return out;
}

GeneTable log_transform(const GeneTable& table) {
  if (table.transformed) throw ContractError("log_transform: table is already log-transformed");
  GeneTable out = table;
  for (auto& v : out.values) {
    if (v < 0) throw ContractError("log_transform: negative value");
    v = std::log10(1.0 + v);
  }
  out.transformed = true;
  return out;
}

void write_gene_matrix(const std::string& path, const GeneTable& table) {
  std::ostringstream out;
  out.precision(17);
  out << "gene_id";
  for (const auto& c : table.cases) out << "\t" << c;
  out << "\n";
  for (std::size_t g = 0; g < table.num_genes(); ++g) {
    out << table.gene_ids[g];
    for (std::size_t c = 0; c < table.num_cases(); ++c) out << "\t" << table.at(c, g);
    out << "\n";
  }
  binio::write_file(path, out.str());
}

void write_gene_index(const std::string& path, const GeneTable& table) {
  nlohmann::json j = {{"genes", table.gene_ids}, {"dropped", table.dropped_ids}, {"transformed", table.transformed}};
  binio::write_file(path, j.dump(1) + "\n");
}

std::vector<std::string> read_gene_index(const std::string& path) {
  auto bytes = binio::read_file(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end()).at("genes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad gene index: " + e.what(), 0);
  }
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw FormatError("unknown split \"" + s + "\"", 0);
}

Split SplitSpec::of(const std::string& case_id) const {
  auto it = assignment.find(case_id);
  if (it == assignment.end()) throw DataError("case " + case_id + " has no split assignment");
  return it->second;
}

std::vector<std::string> SplitSpec::cases_in(Split s) const {
  std::vector<std::string> out;
  for (const auto& [c, sp] : assignment)
    if (sp == s) out.push_back(c);
  return out;
}

SplitSpec split_cases(std::span<const CaseLabel> cases, std::array<double, 3> fractions, std::uint64_t seed,
                      std::optional<std::size_t> num_classes) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || *std::min_element(fractions.begin(), fractions.end()) < 0) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  std::map<std::uint32_t, std::vector<std::string>> by_class;
  std::map<std::string, std::uint32_t> label_of;
  for (const auto& c : cases) {
    auto [it, fresh] = label_of.emplace(c.case_id, c.label);
    if (!fresh) {
      if (it->second != c.label) throw DataError("case " + c.case_id + " carries conflicting labels");
      continue;
    }
    by_class[c.label].push_back(c.case_id);
  }
  if (num_classes) {
    for (std::uint32_t l = 0; l < *num_classes; ++l) {
      if (!by_class.count(l)) std::cerr << "warning: class " << l << " has no cases\n";
    }
  }
  SplitSpec spec;
  spec.fractions = fractions;
  for (auto& [label, ids] : by_class) {
    std::sort(ids.begin(), ids.end());
    Rng rng(derive_seed(seed, "split", label));
    shuffle(ids.begin(), ids.end(), rng);
    const std::size_t n = ids.size();
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      const double exact = fractions[s] * double(n);
      counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      rem[s] = exact - double(counts[s]);
      assigned += counts[s];
    }
    while (assigned < n) {
      int best = 0;
      for (int s = 1; s < 3; ++s)
        if (rem[s] > rem[best] + 1e-12) best = s;
      ++counts[best];
      rem[best] = -1.0;
      ++assigned;
    }
    std::size_t i = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t j = 0; j < counts[s]; ++j) spec.assignment[ids[i++]] = static_cast<Split>(s);
  }
  return spec;
}

}  // namespace tilegene
