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

#include "tilegene/dataset.hpp"

#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "tilegene/parallel.hpp"

namespace fs = std::filesystem;

namespace tilegene {

std::size_t DatasetManifest::bag_count() const {
  std::size_t n = 0;
  for (const auto& s : slides) n += s.bags.size();
  return n;
}

std::size_t DatasetManifest::slide_count(Split s) const {
  return static_cast<std::size_t>(std::count_if(slides.begin(), slides.end(), [&](const auto& e) { return e.split == s; }));
}

void DatasetManifest::validate() const {
  if (k == 0 || d == 0) throw DataError("manifest: k and d must be positive");
  if (classes < 2) throw DataError("manifest: need at least 2 classes");
  if (!class_names.empty() && class_names.size() != classes) throw DataError("manifest: class_names size != classes");
  std::set<std::string> seen;
  for (const auto& s : slides) {
    if (s.slide_id.empty() || s.slide_id.find('/') != std::string::npos || s.slide_id == "." || s.slide_id == "..") {
      throw DataError("manifest: invalid slide id \"" + s.slide_id + "\"");
    }
    if (!seen.insert(s.slide_id).second) throw DataError("manifest: duplicate slide id " + s.slide_id);
    if (s.label >= classes) throw DataError("manifest: slide " + s.slide_id + " label out of range");
  }
}

DatasetManifest read_manifest(const std::string& dir) {
  const auto path = (fs::path(dir) / "manifest.json").string();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  DatasetManifest m;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != kDatasetFormat) {
      throw DataError(path + ": unsupported format " + j.at("format").dump());
    }
    j.at("k").get_to(m.k);
    j.at("d").get_to(m.d);
    j.at("genes").get_to(m.genes);
    j.at("classes").get_to(m.classes);
    m.class_names = j.value("class_names", std::vector<std::string>{});
    m.gene_index = j.value("gene_index", std::string("genes.json"));
    if (j.contains("fractions")) j.at("fractions").get_to(m.fractions);
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& s : j.at("slides")) {
      SlideEntry e;
      s.at("slide_id").get_to(e.slide_id);
      s.at("case_id").get_to(e.case_id);
      s.at("label").get_to(e.label);
      e.split = parse_split(s.at("split").get<std::string>());
      s.at("bags").get_to(e.bags);
      m.slides.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError(path + ": " + e.what());
  }
  m.validate();
  return m;
}

void write_manifest(const std::string& dir, const DatasetManifest& m) {
  m.validate();
  nlohmann::json slides = nlohmann::json::array();
  for (const auto& s : m.slides) {
    slides.push_back({{"slide_id", s.slide_id},
                      {"case_id", s.case_id},
                      {"label", s.label},
                      {"split", split_name(s.split)},
                      {"bags", s.bags}});
  }
  nlohmann::json j = {{"format", kDatasetFormat},
                      {"k", m.k},
                      {"d", m.d},
                      {"genes", m.genes},
                      {"classes", m.classes},
                      {"class_names", m.class_names},
                      {"gene_index", m.gene_index},
                      {"fractions", m.fractions},
                      {"seed", m.seed},
                      {"slides", slides}};
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << j.dump(2) << '\n';
  if (!out) throw DataError("cannot write manifest in " + dir);
}

std::string bag_relpath(const std::string& slide_id, std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof name, "bag_%03zu.trnb", index);
  return "bags/" + slide_id + "/" + name;
}

void write_slide_bags(const std::string& dir, SlideEntry& slide, std::span<const Bag> bags) {
  fs::create_directories(fs::path(dir) / "bags" / slide.slide_id);
  slide.bags.clear();
  for (std::size_t i = 0; i < bags.size(); ++i) {
    slide.bags.push_back(bag_relpath(slide.slide_id, i));
    write_bag((fs::path(dir) / slide.bags.back()).string(), bags[i]);
  }
}

std::vector<const Bag*> LoadedDataset::in(Split s) const {
  std::vector<const Bag*> out;
  for (std::size_t i = 0; i < bags.size(); ++i)
    if (manifest.slides[slide_of[i]].split == s) out.push_back(&bags[i]);
  return out;
}

std::vector<std::size_t> LoadedDataset::indices_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bags.size(); ++i)
    if (manifest.slides[slide_of[i]].split == s) out.push_back(i);
  return out;
}

namespace {

BagExpectation expectation_of(const DatasetManifest& m) { return {m.k, m.d, m.genes, m.classes}; }

std::vector<std::string> check_bag(const Bag& bag, const SlideEntry& slide, const DatasetManifest& m) {
  auto problems = validate_bag(bag, expectation_of(m));
  if (bag.slide_id != slide.slide_id) {
    problems.push_back("slide id " + bag.slide_id + " does not match manifest entry " + slide.slide_id);
  }
  if (bag.label != slide.label) problems.push_back("label does not match manifest entry");
  return problems;
}

}  // namespace

LoadedDataset load_dataset(const std::string& dir, std::optional<Split> only, std::size_t workers) {
  LoadedDataset ds;
  ds.manifest = read_manifest(dir);
  std::vector<std::pair<std::size_t, std::string>> todo;
  for (std::size_t s = 0; s < ds.manifest.slides.size(); ++s) {
    const auto& slide = ds.manifest.slides[s];
    if (only && slide.split != *only) continue;
    for (const auto& b : slide.bags) todo.emplace_back(s, b);
  }
  ds.bags.resize(todo.size());
  ds.slide_of.resize(todo.size());
  parallel_for(todo.size(), workers, [&](std::size_t i) {
    const auto path = (fs::path(dir) / todo[i].second).string();
    Bag bag = read_bag(path);
    const auto problems = check_bag(bag, ds.manifest.slides[todo[i].first], ds.manifest);
    if (!problems.empty()) throw DataError(path + ": " + problems.front());
    ds.bags[i] = std::move(bag);
    ds.slide_of[i] = todo[i].first;
  });
  return ds;
}

std::vector<std::string> validate_dataset(const std::string& dir, std::size_t workers) {
  DatasetManifest m;
  try {
    m = read_manifest(dir);
  } catch (const std::exception& e) {
    return {e.what()};
  }
  std::vector<std::string> problems;
  const auto index_path = (fs::path(dir) / m.gene_index).string();
  try {
    const auto genes = read_gene_index(index_path);
    if (genes.size() != m.genes) {
      problems.push_back(index_path + ": lists " + std::to_string(genes.size()) + " genes, manifest declares " +
                         std::to_string(m.genes));
    }
  } catch (const std::exception& e) {
    problems.push_back(e.what());
  }
  std::vector<std::pair<std::size_t, std::string>> todo;
  for (std::size_t s = 0; s < m.slides.size(); ++s)
    for (const auto& b : m.slides[s].bags) todo.emplace_back(s, b);
  std::vector<std::vector<std::string>> found(todo.size());
  parallel_for(todo.size(), workers, [&](std::size_t i) {
    const auto path = (fs::path(dir) / todo[i].second).string();
    try {
      for (auto& p : check_bag(read_bag(path), m.slides[todo[i].first], m)) found[i].push_back(path + ": " + p);
    } catch (const std::exception& e) {
      found[i].push_back(e.what());
    }
  });
  for (auto& f : found) problems.insert(problems.end(), f.begin(), f.end());
  return problems;
}

}  // namespace tilegene
