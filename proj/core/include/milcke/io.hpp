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


#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "milcke/types.hpp"

namespace milcke {

// Schema files hold one name per line. Blank lines are ignored; the relation
// schema must contain the literal line `NA`.
EntityVocab load_entity_vocab(const std::filesystem::path& path);
RelationSchema load_relation_schema(const std::filesystem::path& path);
void write_names(const std::filesystem::path& path, const std::vector<std::string>& names);

struct TripletFile {
  std::vector<Triplet> triplets;  // input order, first occurrence kept
  std::size_t duplicates = 0;
};

// Parses `subject<TAB>relation<TAB>object` lines. Throws ParseError naming the
// offending line for malformed lines and unknown names.
TripletFile parse_triplets(std::istream& in, const KnowledgeSchema& schema,
                           const std::string& source = "<stream>");
TripletFile load_triplets(const std::filesystem::path& path, const KnowledgeSchema& schema);
void write_triplets(std::ostream& out, const std::vector<Triplet>& triplets,
                    const KnowledgeSchema& schema);
void write_triplets(const std::filesystem::path& path, const std::vector<Triplet>& triplets,
                    const KnowledgeSchema& schema);

// MILFEAT1 feature file: 8-byte magic, u32 count, u32 dim, then count*dim
// float32 values, all little-endian, row-major.
inline constexpr char kFeatureMagic[8] = {'M', 'I', 'L', 'F', 'E', 'A', 'T', '1'};

Matrix decode_feature_file(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> encode_feature_file(const Matrix& features);
Matrix read_feature_file(const std::filesystem::path& path);
void write_feature_file(const std::filesystem::path& path, const Matrix& features);

// Instance manifest, one JSON object per line:
//   {"image_id": ..., "subject": ..., "object": ...,
//    "subject_box": [x_min, y_min, x_max, y_max], "object_box": [...],
//    "feature_row": k}
// An optional "instance_id" string overrides the default id, which is the
// zero-based line index.
std::vector<InstanceRecord> load_instance_manifest(const std::filesystem::path& path,
                                                   const EntityVocab& vocab);
void write_instance_manifest(const std::filesystem::path& path,
                             const std::vector<InstanceRecord>& instances,
                             const EntityVocab& vocab);

// Score table: `instance_id<TAB>score` per line, ids unique.
using ScoreTable = std::unordered_map<std::string, double>;
ScoreTable load_score_table(const std::filesystem::path& path);

std::vector<unsigned char> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

// Splits on a single character; keeps empty fields.
std::vector<std::string> split_fields(const std::string& line, char sep);

}  // namespace milcke
