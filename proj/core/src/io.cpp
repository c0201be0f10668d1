/*
 * Copyright 2026 The milcke Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include "milcke/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace milcke {

namespace {

using json = nlohmann::json;

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw ConfigError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string> load_names(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line.empty()) continue;
    names.push_back(line);
  }
  return names;
}

std::uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void append_u32_le(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

BoundingBox parse_box(const json& j, const std::string& source, std::size_t line, const char* key) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != 4) {
    throw ParseError(source, line, std::string("'") + key + "' must be an array of 4 numbers");
  }
  BoundingBox box;
  try {
    box = {j[key][0].get<double>(), j[key][1].get<double>(), j[key][2].get<double>(),
           j[key][3].get<double>()};
  } catch (const json::exception&) {
    throw ParseError(source, line, std::string("'") + key + "' must contain numbers");
  }
  if (!box.valid()) throw ParseError(source, line, std::string("invalid box in '") + key + "'");
  return box;
}

}  // namespace

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

EntityVocab load_entity_vocab(const std::filesystem::path& path) {
  return EntityVocab(load_names(path));
}

RelationSchema load_relation_schema(const std::filesystem::path& path) {
  return RelationSchema(load_names(path));
}

void write_names(const std::filesystem::path& path, const std::vector<std::string>& names) {
  auto out = open_out(path);
  for (const auto& n : names) out << n << '\n';
}

TripletFile parse_triplets(std::istream& in, const KnowledgeSchema& schema, const std::string& source) {
  TripletFile result;
  std::unordered_set<Triplet, TripletHash> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line, '\t');
    if (fields.size() != 3) {
      throw ParseError(source, line_no,
                       "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    }
    auto s = schema.entities.find(fields[0]);
    auto r = schema.relations.find(fields[1]);
    auto o = schema.entities.find(fields[2]);
    if (!s) throw ParseError(source, line_no, "unknown entity '" + fields[0] + "'");
    if (!r) throw ParseError(source, line_no, "unknown relation '" + fields[1] + "'");
    if (!o) throw ParseError(source, line_no, "unknown entity '" + fields[2] + "'");
    if (schema.relations.is_na(*r)) {
      throw ParseError(source, line_no, "NA is not a valid relation for a fact");
    }
    Triplet t{*s, *r, *o};
    if (seen.insert(t).second) {
      result.triplets.push_back(t);
    } else {
      ++result.duplicates;
    }
  }
  return result;
}

TripletFile load_triplets(const std::filesystem::path& path, const KnowledgeSchema& schema) {
  auto in = open_in(path);
  return parse_triplets(in, schema, path.string());
}

void write_triplets(std::ostream& out, const std::vector<Triplet>& triplets,
                    const KnowledgeSchema& schema) {
  for (const Triplet& t : triplets) {
    out << schema.entities.name(t.subject) << '\t' << schema.relations.name(t.relation) << '\t'
        << schema.entities.name(t.object) << '\n';
  }
}

void write_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets,
                    const KnowledgeSchema& schema) {
  auto out = open_out(path);
  write_triplets(out, triplets, schema);
}

Matrix decode_feature_file(const std::vector<unsigned char>& bytes) {
  constexpr std::size_t kHeader = 16;
  if (bytes.size() < kHeader) throw FormatError("feature file truncated: header incomplete");
  if (std::memcmp(bytes.data(), kFeatureMagic, sizeof(kFeatureMagic)) != 0) {
    throw FormatError("feature file has bad magic (expected MILFEAT1)");
  }
  const std::uint32_t count = read_u32_le(bytes.data() + 8);
  const std::uint32_t dim = read_u32_le(bytes.data() + 12);
  if (count == 0) throw FormatError("feature file declares zero rows");
  if (dim == 0) throw FormatError("feature file declares zero dimension");
  const std::uint64_t values = static_cast<std::uint64_t>(count) * dim;
  const std::uint64_t expected = kHeader + values * 4;
  if (bytes.size() < expected) {
    throw FormatError("feature file truncated: expected " + std::to_string(expected) +
                      " bytes, found " + std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw FormatError("feature file has " + std::to_string(bytes.size() - expected) +
                      " trailing bytes");
  }
  Matrix features(count, dim);
  const unsigned char* p = bytes.data() + kHeader;
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j, p += 4) {
      const float v = std::bit_cast<float>(read_u32_le(p));
      if (!std::isfinite(v)) {
        throw FormatError("feature file row " + std::to_string(i) + " contains a non-finite value");
      }
      features(i, j) = static_cast<double>(v);
    }
  }
  return features;
}

std::vector<unsigned char> encode_feature_file(const Matrix& features) {
  if (features.rows() == 0 || features.cols() == 0) {
    throw FormatError("cannot write an empty feature matrix");
  }
  std::vector<unsigned char> out(kFeatureMagic, kFeatureMagic + sizeof(kFeatureMagic));
  out.reserve(16 + static_cast<std::size_t>(features.size()) * 4);
  append_u32_le(out, static_cast<std::uint32_t>(features.rows()));
  append_u32_le(out, static_cast<std::uint32_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      append_u32_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(features(i, j))));
    }
  }
  return out;
}

Matrix read_feature_file(const std::filesystem::path& path) {
  try {
    return decode_feature_file(read_bytes(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_feature_file(const std::filesystem::path& path, const Matrix& features) {
  write_bytes(path, encode_feature_file(features));
}

std::vector<InstanceRecord> load_instance_manifest(const std::filesystem::path& path,
                                                   const EntityVocab& vocab) {
  auto in = open_in(path);
  const std::string source = path.string();
  std::vector<InstanceRecord> records;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(source, line_no, "expected a JSON object");
    for (const char* key : {"image_id", "subject", "object", "feature_row"}) {
      if (!j.contains(key)) throw ParseError(source, line_no, std::string("missing key '") + key + "'");
    }
    InstanceRecord rec;
    try {
      rec.image_id = j["image_id"].is_string() ? j["image_id"].get<std::string>()
                                               : j["image_id"].dump();
      const auto subject = j["subject"].get<std::string>();
      const auto object = j["object"].get<std::string>();
      auto s = vocab.find(subject);
      auto o = vocab.find(object);
      if (!s) throw ParseError(source, line_no, "unknown entity '" + subject + "'");
      if (!o) throw ParseError(source, line_no, "unknown entity '" + object + "'");
      rec.pair = {*s, *o};
      const auto row = j["feature_row"].get<std::int64_t>();
      if (row < 0) throw ParseError(source, line_no, "negative feature_row");
      rec.feature_row = static_cast<std::size_t>(row);
      if (j.contains("instance_id")) {
        rec.instance_id = j["instance_id"].is_string() ? j["instance_id"].get<std::string>()
                                                       : j["instance_id"].dump();
      } else {
        rec.instance_id = std::to_string(records.size());
      }
    } catch (const json::exception& e) {
      throw ParseError(source, line_no, std::string("bad field type: ") + e.what());
    }
    rec.subject_box = parse_box(j, source, line_no, "subject_box");
    rec.object_box = parse_box(j, source, line_no, "object_box");
    rec.manifest_index = records.size();
    if (!ids.insert(rec.instance_id).second) {
      throw ParseError(source, line_no, "duplicate instance id '" + rec.instance_id + "'");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_instance_manifest(const std::filesystem::path& path,
                             const std::vector<InstanceRecord>& instances,
                             const EntityVocab& vocab) {
  auto out = open_out(path);
  for (const auto& rec : instances) {
    const auto box = [](const BoundingBox& b) {
      return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
    };
    json j = {{"instance_id", rec.instance_id},
              {"image_id", rec.image_id},
              {"subject", vocab.name(rec.pair.subject)},
              {"object", vocab.name(rec.pair.object)},
              {"subject_box", box(rec.subject_box)},
              {"object_box", box(rec.object_box)},
              {"feature_row", rec.feature_row}};
    out << j.dump() << '\n';
  }
}

ScoreTable load_score_table(const std::filesystem::path& path) {
  auto in = open_in(path);
  ScoreTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_fields(line, '\t');
    if (fields.size() != 2) throw ParseError(path.string(), line_no, "expected instance_id<TAB>score");
    double score = 0;
    try {
      std::size_t used = 0;
      score = std::stod(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ParseError(path.string(), line_no, "invalid score '" + fields[1] + "'");
    }
    if (!std::isfinite(score)) throw ParseError(path.string(), line_no, "non-finite score");
    if (!table.emplace(fields[0], score).second) {
      throw ParseError(path.string(), line_no, "duplicate instance id '" + fields[0] + "'");
    }
  }
  return table;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  auto out = open_out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

}  // namespace milcke
