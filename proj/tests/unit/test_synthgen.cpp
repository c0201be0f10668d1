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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "milcke/bagbuilder.hpp"
#include "milcke/io.hpp"
#include "milcke/synthgen.hpp"
#include "tempdir.hpp"

namespace milcke {
namespace {

SynthConfig small_config(std::uint64_t seed = 0) {
  SynthConfig c;
  c.entities = 12;
  c.train_bags = 60;
  c.validation_bags = 20;
  c.test_bags = 20;
  c.bag_size = 10;
  c.seed = seed;
  return c;
}

TEST(Synth, DefaultsDescribeTheDeskBenchmark) {
  const SynthConfig c;
  EXPECT_EQ(c.relations, 10u);
  EXPECT_EQ(c.dim, 16u);
  EXPECT_EQ(c.bag_size, 50u);
  EXPECT_EQ(c.informative_fraction, 0.3);
  EXPECT_EQ(c.noise_sigma, 0.5);
  EXPECT_NO_THROW(c.validate());
}

TEST(Synth, ShapesSchemaAndPrototypes) {
  const auto data = gen_synthetic(small_config());
  EXPECT_EQ(data.schema.relations.size(), 11u);
  EXPECT_EQ(data.schema.relations.name(data.schema.relations.na_id()), "NA");
  EXPECT_EQ(data.schema.entities.size(), 12u);
  EXPECT_EQ(data.split.train.size(), 60u);
  EXPECT_EQ(data.split.validation.size(), 20u);
  EXPECT_EQ(data.split.test.size(), 20u);
  for (Eigen::Index r = 0; r < data.truth.prototypes.rows(); ++r) {
    EXPECT_NEAR(data.truth.prototypes.row(r).norm(), 1.0, 1e-12);
  }
  EXPECT_NO_THROW(validate_split(data.split, data.schema.relations, 10));
}

TEST(Synth, InformativeCountsFollowTheFraction) {
  const auto data = gen_synthetic(small_config(3));
  const auto& rels = data.schema.relations;
  for (std::size_t b = 0; b < data.split.train.size(); ++b) {
    const Bag& bag = data.split.train[b];
    const auto& src = data.truth.train_sources[b];
    ASSERT_EQ(src.size(), 10u);
    if (bag.is_na(rels)) {
      for (RelationId s : src) EXPECT_FALSE(rels.is_na(s));
      continue;
    }
    for (RelationId g : bag.labels) EXPECT_EQ(std::count(src.begin(), src.end(), g), 3);
    for (RelationId s : src) EXPECT_FALSE(rels.is_na(s));
  }
}

TEST(Synth, FullyInformativeBagsHaveNoDistractors) {
  auto c = small_config(4);
  c.informative_fraction = 1.0;
  c.multi_label_rate = 0;
  const auto data = gen_synthetic(c);
  for (std::size_t b = 0; b < data.split.test.size(); ++b) {
    const Bag& bag = data.split.test[b];
    if (bag.is_na(data.schema.relations)) continue;
    for (RelationId s : data.truth.test_sources[b]) EXPECT_EQ(s, bag.labels.front());
  }
}

TEST(Synth, NoiseFreeInstancesSitOnPrototypes) {
  auto c = small_config(5);
  c.noise_sigma = 0;
  c.pair_offset_scale = 0;
  const auto data = gen_synthetic(c);
  const Bag& bag = data.split.train.front();
  for (Eigen::Index k = 0; k < bag.features.rows(); ++k) {
    const RelationId s = data.truth.train_sources.front()[std::size_t(k)];
    EXPECT_LT((bag.features.row(k) - data.truth.prototypes.row(s)).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Synth, SeededAndPairsDisjoint) {
  const auto a = gen_synthetic(small_config(6));
  const auto b = gen_synthetic(small_config(6));
  const auto other = gen_synthetic(small_config(7));
  EXPECT_EQ(a.split.train.front().features, b.split.train.front().features);
  EXPECT_NE(a.split.train.front().features, other.split.train.front().features);
}

TEST(Synth, StatisticsMatchTheConfig) {
  auto c = small_config(10);
  c.na_fraction = 0.25;
  c.multi_label_rate = 0;
  const auto data = gen_synthetic(c);
  for (const auto* part : {&data.split.train, &data.split.validation, &data.split.test}) {
    const auto na = std::count_if(part->begin(), part->end(), [&](const Bag& b) { return b.is_na(data.schema.relations); });
    EXPECT_EQ(std::size_t(na), std::size_t(std::lround(0.25 * double(part->size()))));
    for (const Bag& b : *part) {
      EXPECT_EQ(b.size(), 10u);
      EXPECT_EQ(b.labels.size(), 1u);
    }
  }
}

TEST(Synth, SeparableCaseLearnsInOneEpoch) {
  auto c = small_config(11);
  c.entities = 30;
  c.train_bags = 400;
  c.informative_fraction = 1.0;
  c.noise_sigma = 0;
  const auto data = gen_synthetic(c);
  auto cfg = desk_scale_training_config(11);
  cfg.bag_size = 10;
  cfg.max_epochs = 1;
  const auto res = train(data.split, Variant::kContrastiveAtt, cfg, data.schema);
  double loss = 0;
  const auto examples = expand_examples(data.split.train, false);
  for (const auto& ex : examples) loss += example_loss(res.params, ex.bag->features, ex.golden);
  EXPECT_LT(loss / double(examples.size()), std::log(double(data.schema.relations.size())));
}

TEST(Synth, RejectsImpossibleConfigs) {
  auto c = small_config();
  c.train_bags = 1000;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.informative_fraction = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.relations = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.na_fraction = 1;
  EXPECT_THROW(gen_synthetic(c), ConfigError);
}

TEST(AttentionQuality, LimitingCases) {
  const auto data = gen_synthetic(small_config(8));
  const auto r = data.schema.relations.size();
  // Zero queries attend uniformly.
  const auto flat = ModelParams::zeros(Variant::kContrastiveAtt, r, 16);
  EXPECT_NEAR(oracle_attention_quality(flat, data.split.test, data.truth.test_sources, data.schema.relations), 1.0,
              1e-12);
  // Queries along the prototypes concentrate on informative instances.
  auto sharp = flat;
  sharp.query = 20 * data.truth.prototypes;
  EXPECT_GT(oracle_attention_quality(sharp, data.split.test, data.truth.test_sources, data.schema.relations), 100.0);
  EXPECT_THROW(oracle_attention_quality(flat, data.split.test, data.truth.train_sources, data.schema.relations),
               ConfigError);
}

TEST(SynthCorpus, FeedsTheBagBuilder) {
  testing::TempDir dir;
  const auto data = gen_synthetic(small_config(9));
  write_synthetic_corpus(dir.path(), data, 9);
  const KnowledgeSchema schema{load_entity_vocab(dir / "entities.txt"), load_relation_schema(dir / "relations.txt")};
  const auto triplets = load_triplets(dir / "triplets.tsv", schema);
  const auto manifest = load_instance_manifest(dir / "manifest.jsonl", schema.entities);
  const Matrix features = read_feature_file(dir / "features.milfeat");
  EXPECT_EQ(features.rows(), Eigen::Index(100 * 10));
  EXPECT_EQ(manifest.size(), 1000u);

  std::map<std::string, bool> informative;
  std::ifstream src(dir / "sources.tsv");
  std::string line;
  while (std::getline(src, line)) {
    const auto f = split_fields(line, '\t');
    ASSERT_EQ(f.size(), 3u);
    informative[f[0]] = f[2] == "1";
  }
  EXPECT_EQ(informative.size(), 1000u);

  const auto built = build_bags(triplets.triplets, manifest, features, 3, OverlapRanking{}, {}, schema.relations);
  std::size_t positives = 0;
  for (const Bag& bag : built.bags) {
    if (bag.is_na(schema.relations)) continue;
    ++positives;
    // Three informative instances per label; overlap ranking puts them first.
    for (const auto& inst : bag.instances) EXPECT_TRUE(informative.at(inst.instance_id)) << inst.instance_id;
  }
  EXPECT_GT(positives, 0u);
}

}  // namespace
}  // namespace milcke
