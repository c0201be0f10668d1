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


#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <system_error>
#include <vector>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "config_json.hpp"
#include "json.hpp"
#include "milcke/bagbuilder.hpp"
#include "milcke/checkpoint.hpp"
#include "milcke/io.hpp"
#include "milcke/metrics.hpp"
#include "milcke/synthgen.hpp"
#include "milcke/trainer.hpp"

namespace milcke::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string log_level = "info";
  std::string workdir = ".";
};

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::vector<double> parse_doubles(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  for (const std::string& field : split_fields(text, ',')) {
    double v = 0;
    const char* first = field.data();
    const char* last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (field.empty() || ec != std::errc() || ptr != last) {
      throw ConfigError(flag + ": \"" + field + "\" is not a number");
    }
    values.push_back(v);
  }
  return values;
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> items = split_fields(text, ',');
  for (const auto& item : items) {
    if (item.empty()) throw ConfigError("empty entry in list \"" + text + "\"");
  }
  return items;
}

class Context {
 public:
  Context(const Globals& globals, std::string command, std::ostream& out, std::ostream& err)
      : globals_(globals), command_(std::move(command)), out_(out) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    log_ = std::make_shared<spdlog::logger>("milcke", std::move(sink));
    log_->set_pattern("[%l] %v");
    log_->set_level(spdlog::level::from_str(globals.log_level));
  }

  fs::path path(const std::string& p) const {
    fs::path raw(p);
    return raw.is_absolute() ? raw : fs::path(globals_.workdir) / raw;
  }

  std::uint64_t seed() const { return globals_.seed; }
  spdlog::logger& log() { return *log_; }
  std::ostream& out() { return out_; }

  // Writes <workdir>/<command>.resolved.json.
  void snapshot(const json& options) const {
    json j = {{"command", command_},
              {"seed", globals_.seed},
              {"log_level", globals_.log_level},
              {"workdir", globals_.workdir},
              {"options", options}};
    fs::create_directories(globals_.workdir);
    const fs::path target = fs::path(globals_.workdir) / (command_ + ".resolved.json");
    std::ofstream f(target);
    if (!f) throw ConfigError("cannot write " + target.string());
    f << j.dump(2) << '\n';
  }

 private:
  Globals globals_;
  std::string command_;
  std::ostream& out_;
  std::shared_ptr<spdlog::logger> log_;
};

KnowledgeSchema load_schema(const Context& ctx, const std::string& entities, const std::string& relations) {
  return {load_entity_vocab(ctx.path(entities)), load_relation_schema(ctx.path(relations))};
}

struct SplitView {
  std::vector<Bag> bags;
  std::vector<Triplet> facts;
};

SplitView select_split(const DatasetSplit& split, const std::string& name) {
  if (name == "train") return {split.train, split.train_facts};
  if (name == "validation") return {split.validation, split.validation_facts};
  if (name == "test") return {split.test, split.test_facts};
  SplitView all;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    all.bags.insert(all.bags.end(), part->begin(), part->end());
  }
  for (const auto* part : {&split.train_facts, &split.validation_facts, &split.test_facts}) {
    all.facts.insert(all.facts.end(), part->begin(), part->end());
  }
  std::sort(all.facts.begin(), all.facts.end());
  return all;
}

ModelParams load_model(const Context& ctx, const std::string& path, const KnowledgeSchema& schema,
                       const std::vector<Bag>& bags) {
  Checkpoint ck = read_checkpoint(ctx.path(path));
  if (ck.params.relations() != schema.relations.size()) {
    throw ConfigError(path + ": checkpoint has " + std::to_string(ck.params.relations()) +
                      " relations, bag directory has " + std::to_string(schema.relations.size()));
  }
  if (!bags.empty() && static_cast<Eigen::Index>(ck.params.dim()) != bags.front().features.cols()) {
    throw ConfigError(path + ": checkpoint feature dimension " + std::to_string(ck.params.dim()) +
                      " does not match the bags");
  }
  return std::move(ck.params);
}

ScoreMode parse_score_mode(const std::string& s) {
  return s == "logit" ? ScoreMode::kLogit : ScoreMode::kProbability;
}

std::string k_key(double k) { return format_double(k) + "%"; }

// synth ---------------------------------------------------------------------

struct SynthOpts {
  std::string out;
  SynthConfig config;
};

void add_synth(CLI::App& app, SynthOpts& o) {
  app.add_option("--out", o.out, "output directory")->required();
  app.add_option("--relations", o.config.relations, "relations excluding NA")->capture_default_str();
  app.add_option("--entities", o.config.entities)->capture_default_str();
  app.add_option("--dim", o.config.dim)->capture_default_str();
  app.add_option("--train-bags", o.config.train_bags)->capture_default_str();
  app.add_option("--validation-bags", o.config.validation_bags)->capture_default_str();
  app.add_option("--test-bags", o.config.test_bags)->capture_default_str();
  app.add_option("--bag-size", o.config.bag_size)->capture_default_str();
  app.add_option("--informative-fraction", o.config.informative_fraction)->capture_default_str();
  app.add_option("--noise-sigma", o.config.noise_sigma)->capture_default_str();
  app.add_option("--na-fraction", o.config.na_fraction)->capture_default_str();
  app.add_option("--multi-label-rate", o.config.multi_label_rate)->capture_default_str();
}

void cmd_synth(Context& ctx, SynthOpts& o) {
  SynthConfig& c = o.config;
  c.seed = ctx.seed();
  ctx.snapshot({{"out", o.out},
                {"relations", c.relations},
                {"entities", c.entities},
                {"dim", c.dim},
                {"train_bags", c.train_bags},
                {"validation_bags", c.validation_bags},
                {"test_bags", c.test_bags},
                {"bag_size", c.bag_size},
                {"informative_fraction", c.informative_fraction},
                {"noise_sigma", c.noise_sigma},
                {"na_fraction", c.na_fraction},
                {"multi_label_rate", c.multi_label_rate}});
  const SyntheticDataset data = gen_synthetic(c);
  write_synthetic_corpus(ctx.path(o.out), data, ctx.seed());
  ctx.log().info("wrote synthetic corpus to {}", ctx.path(o.out).string());
}

// build-bags ----------------------------------------------------------------

struct BuildBagsOpts {
  std::string triplets, manifest, features, entities, relations, out;
  std::string strategy = "overlap";
  std::size_t bag_size = 50;
  double na_ratio = 0.5;
  std::string split_ratios = "0.8,0.1,0.1";
};

void add_build_bags(CLI::App& app, BuildBagsOpts& o) {
  app.add_option("--triplets", o.triplets, "knowledge-base triplets TSV")->required();
  app.add_option("--manifest", o.manifest, "instance manifest JSONL")->required();
  app.add_option("--features", o.features, "MILFEAT1 feature file")->required();
  app.add_option("--entities", o.entities, "entity names, one per line")->required();
  app.add_option("--relations", o.relations, "relation names including NA")->required();
  app.add_option("--strategy", o.strategy, "overlap | random | scored:FILE")->capture_default_str();
  app.add_option("--bag-size", o.bag_size)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--na-ratio", o.na_ratio, "NA bags per positive bag")->capture_default_str();
  app.add_option("--split-ratios", o.split_ratios, "train,validation,test")->capture_default_str();
  app.add_option("--out", o.out, "output bag directory")->required();
}

RankingStrategy make_strategy(const Context& ctx, const std::string& spec) {
  if (spec == "overlap") return OverlapRanking{};
  if (spec == "random") return RandomRanking{ctx.seed()};
  if (spec.rfind("scored:", 0) == 0 && spec.size() > 7) {
    return ScoredRanking{load_score_table(ctx.path(spec.substr(7)))};
  }
  throw ConfigError("unknown strategy \"" + spec + "\" (expected overlap, random or scored:FILE)");
}

void cmd_build_bags(Context& ctx, BuildBagsOpts& o) {
  const std::vector<double> ratios = parse_doubles(o.split_ratios, "--split-ratios");
  if (ratios.size() != 3) throw ConfigError("--split-ratios needs exactly three values");
  if (!(o.na_ratio >= 0)) throw ConfigError("--na-ratio must be >= 0");
  ctx.snapshot({{"triplets", o.triplets},
                {"manifest", o.manifest},
                {"features", o.features},
                {"entities", o.entities},
                {"relations", o.relations},
                {"strategy", o.strategy},
                {"bag_size", o.bag_size},
                {"na_ratio", o.na_ratio},
                {"split_ratios", ratios},
                {"out", o.out}});

  const KnowledgeSchema schema = load_schema(ctx, o.entities, o.relations);
  const TripletFile triplets = load_triplets(ctx.path(o.triplets), schema);
  if (triplets.duplicates > 0) ctx.log().warn("ignored {} duplicate triplets", triplets.duplicates);
  const auto instances = load_instance_manifest(ctx.path(o.manifest), schema.entities);
  const Matrix features = read_feature_file(ctx.path(o.features));
  const RankingStrategy strategy = make_strategy(ctx, o.strategy);

  const BagBuildResult built = build_bags(triplets.triplets, instances, features, o.bag_size, strategy,
                                          {o.na_ratio, ctx.seed()}, schema.relations);
  const DatasetSplit split =
      split_dataset(built.bags, {ratios[0], ratios[1], ratios[2]}, ctx.seed(), schema.relations);
  write_bag_directory(ctx.path(o.out), schema, split, built.skipped);
  ctx.log().info("built {} bags ({} NA), skipped {} pairs", built.bags.size(), built.na_bags,
                 built.skipped.size());
  ctx.out() << "bags\t" << built.bags.size() << "\nna_bags\t" << built.na_bags << "\nskipped\t"
            << built.skipped.size() << "\ntrain\t" << split.train.size() << "\nvalidation\t"
            << split.validation.size() << "\ntest\t" << split.test.size() << '\n';
}

// train ---------------------------------------------------------------------

struct TrainOpts {
  std::string bags, variant, config, out_checkpoint, out_history;
};

void add_train(CLI::App& app, TrainOpts& o) {
  app.add_option("--bags", o.bags, "bag directory")->required();
  app.add_option("--variant", o.variant, "aggregator")
      ->required()
      ->check(CLI::IsMember({"avg", "one", "att", "cst-att"}));
  app.add_option("--config", o.config, "training config JSON");
  app.add_option("--out-checkpoint", o.out_checkpoint)->required();
  app.add_option("--out-history", o.out_history, "defaults to <checkpoint>.history.csv");
}

void cmd_train(Context& ctx, TrainOpts& o, bool seed_given) {
  TrainingConfig cfg = o.config.empty() ? TrainingConfig{} : load_training_config(ctx.path(o.config));
  if (seed_given || o.config.empty()) cfg.seed = ctx.seed();
  cfg.validate();
  const std::string history = o.out_history.empty() ? o.out_checkpoint + ".history.csv" : o.out_history;
  ctx.snapshot({{"bags", o.bags},
                {"variant", o.variant},
                {"config", o.config},
                {"out_checkpoint", o.out_checkpoint},
                {"out_history", history},
                {"training", json::parse(training_config_to_json(cfg))}});

  const BagDirectory dir = read_bag_directory(ctx.path(o.bags));
  const Variant variant = *parse_variant(o.variant);
  const TrainingResult result = train(dir.split, variant, cfg, dir.schema);
  write_checkpoint(ctx.path(o.out_checkpoint), {result.params, result.optimizer});
  result.history.write_csv(ctx.path(history).string());
  ctx.log().info("trained {} for {} epochs, best epoch {} (validation {})", o.variant,
                 result.history.epochs.size(), result.history.best_epoch, result.history.best_metric);
  ctx.out() << "epochs\t" << result.history.epochs.size() << "\nbest_epoch\t" << result.history.best_epoch
            << "\nbest_metric\t" << format_double(result.history.best_metric) << '\n';
}

// predict -------------------------------------------------------------------

struct PredictOpts {
  std::string checkpoint, bags, out;
  std::string split = "test";
  std::string score_mode = "probability";
};

void add_predict(CLI::App& app, PredictOpts& o) {
  app.add_option("--checkpoint", o.checkpoint)->required();
  app.add_option("--bags", o.bags, "bag directory")->required();
  app.add_option("--split", o.split)
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  app.add_option("--score-mode", o.score_mode)
      ->capture_default_str()
      ->check(CLI::IsMember({"probability", "logit"}));
  app.add_option("--out", o.out, "predictions TSV")->required();
}

void cmd_predict(Context& ctx, PredictOpts& o) {
  ctx.snapshot({{"checkpoint", o.checkpoint},
                {"bags", o.bags},
                {"split", o.split},
                {"score_mode", o.score_mode},
                {"out", o.out}});
  const BagDirectory dir = read_bag_directory(ctx.path(o.bags));
  const SplitView view = select_split(dir.split, o.split);
  const ModelParams params = load_model(ctx, o.checkpoint, dir.schema, view.bags);
  const RankedPredictions ranked = predict_all(params, view.bags, dir.schema, parse_score_mode(o.score_mode));
  write_predictions(ctx.path(o.out), ranked, dir.schema);
  ctx.log().info("wrote {} predictions", ranked.size());
  ctx.out() << "predictions\t" << ranked.size() << '\n';
}

// eval ----------------------------------------------------------------------

struct EvalOpts {
  std::string checkpoint, predictions, bags, heldout, variant;
  std::string split = "test";
  std::string k_percents = "2";
  std::string out_report, out_curve, out_macro_curve, out_details;
};

void add_eval(CLI::App& app, EvalOpts& o) {
  auto* ck = app.add_option("--checkpoint", o.checkpoint);
  auto* pred = app.add_option("--predictions", o.predictions, "predictions TSV instead of a checkpoint");
  ck->excludes(pred);
  app.add_option("--variant", o.variant, "expected checkpoint variant")
      ->check(CLI::IsMember({"avg", "one", "att", "cst-att"}));
  app.add_option("--bags", o.bags, "bag directory")->required();
  app.add_option("--heldout", o.heldout, "held-out triplets TSV; defaults to the split's facts");
  app.add_option("--split", o.split)
      ->capture_default_str()
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  app.add_option("--k-percents", o.k_percents, "comma-separated P@K% levels")->capture_default_str();
  app.add_option("--out-report", o.out_report, "metric report JSON")->required();
  app.add_option("--out-curve", o.out_curve, "micro PR curve CSV");
  app.add_option("--out-macro-curve", o.out_macro_curve, "averaged per-relation PR curve CSV");
  app.add_option("--out-details", o.out_details, "supplementary metrics JSON");
}

void cmd_eval(Context& ctx, EvalOpts& o) {
  if (o.checkpoint.empty() == o.predictions.empty()) {
    throw ConfigError("eval needs exactly one of --checkpoint or --predictions");
  }
  const std::vector<double> ks = parse_doubles(o.k_percents, "--k-percents");
  for (double k : ks) {
    if (!(k > 0 && k <= 100)) throw ConfigError("--k-percents values must lie in (0, 100]");
  }
  ctx.snapshot({{"checkpoint", o.checkpoint},
                {"predictions", o.predictions},
                {"variant", o.variant},
                {"bags", o.bags},
                {"heldout", o.heldout},
                {"split", o.split},
                {"k_percents", ks},
                {"out_report", o.out_report},
                {"out_curve", o.out_curve},
                {"out_macro_curve", o.out_macro_curve},
                {"out_details", o.out_details}});

  const BagDirectory dir = read_bag_directory(ctx.path(o.bags));
  const SplitView view = select_split(dir.split, o.split);
  std::vector<Triplet> heldout = view.facts;
  if (!o.heldout.empty()) heldout = load_triplets(ctx.path(o.heldout), dir.schema).triplets;
  if (heldout.empty()) throw ConfigError("held-out set is empty");

  RankedPredictions ranked;
  if (!o.checkpoint.empty()) {
    Checkpoint ck = read_checkpoint(ctx.path(o.checkpoint));
    if (!o.variant.empty() && *parse_variant(o.variant) != ck.params.variant) {
      throw ConfigError(o.checkpoint + ": checkpoint variant is " +
                        std::string(variant_name(ck.params.variant)) + ", expected " + o.variant);
    }
    const ModelParams params = load_model(ctx, o.checkpoint, dir.schema, view.bags);
    ranked = predict_all(params, view.bags, dir.schema);
  } else {
    ranked = load_predictions(ctx.path(o.predictions), dir.schema);
  }

  const Evaluation ev = evaluate(ranked, heldout, dir.schema.relations, ks);
  json report = json::object();
  report["AUC"] = ev.report.auc;
  report["F1"] = ev.report.max_f1;
  for (const auto& [k, v] : ev.report.p_at_k) report["P@" + k_key(k)] = v;
  report["mAUC"] = ev.report.mauc;
  report["mF1"] = ev.report.m_max_f1;
  for (const auto& [k, v] : ev.report.m_p_at_k) report["mP@" + k_key(k)] = v;
  {
    std::ofstream f(ctx.path(o.out_report));
    if (!f) throw ConfigError("cannot write " + o.out_report);
    f << report.dump(2) << '\n';
  }
  if (!o.out_curve.empty()) write_curve_csv(ctx.path(o.out_curve), ev.micro_curve);
  if (!o.out_macro_curve.empty()) write_curve_csv(ctx.path(o.out_macro_curve), ev.macro.curve);
  if (!o.out_details.empty()) {
    json details = {{"predictions", ranked.size()},
                    {"heldout", heldout.size()},
                    {"mean_relation_auc", ev.macro.mean_relation_auc},
                    {"mean_relation_max_f1", ev.macro.mean_relation_max_f1}};
    json included = json::array(), excluded = json::array();
    for (RelationId r : ev.macro.relations) included.push_back(dir.schema.relations.name(r));
    for (RelationId r : ev.macro.excluded) excluded.push_back(dir.schema.relations.name(r));
    details["macro_relations"] = included;
    details["excluded_relations"] = excluded;
    std::ofstream f(ctx.path(o.out_details));
    if (!f) throw ConfigError("cannot write " + o.out_details);
    f << details.dump(2) << '\n';
  }
  ctx.out() << report.dump(2) << '\n';
}

// ensemble ------------------------------------------------------------------

struct EnsembleOpts {
  std::string sources, weights, bags, heldout, out;
  bool search = false;
  double step = 0.1;
};

void add_ensemble(CLI::App& app, EnsembleOpts& o) {
  app.add_option("--sources", o.sources, "comma-separated predictions TSVs")->required();
  auto* w = app.add_option("--weights", o.weights, "comma-separated source weights");
  auto* s = app.add_flag("--search", o.search, "pick weights maximizing AUC on --heldout");
  w->excludes(s);
  app.add_option("--heldout", o.heldout, "held-out triplets for --search");
  app.add_option("--step", o.step, "weight grid step for --search")->capture_default_str();
  app.add_option("--bags", o.bags, "bag directory supplying the name schema");
  app.add_option("--out", o.out, "combined predictions TSV")->required();
}

void cmd_ensemble(Context& ctx, EnsembleOpts& o) {
  const std::vector<std::string> names = parse_list(o.sources);
  std::vector<fs::path> paths;
  for (const auto& n : names) paths.push_back(ctx.path(n));
  std::vector<double> weights;
  if (o.search) {
    if (o.heldout.empty()) throw ConfigError("--search needs --heldout");
    if (!(o.step > 0 && o.step <= 1)) throw ConfigError("--step must lie in (0, 1]");
  } else {
    if (o.weights.empty()) throw ConfigError("ensemble needs --weights or --search");
    weights = parse_doubles(o.weights, "--weights");
    if (weights.size() != names.size()) {
      throw ConfigError("got " + std::to_string(weights.size()) + " weights for " +
                        std::to_string(names.size()) + " sources");
    }
  }
  ctx.snapshot({{"sources", names},
                {"weights", weights},
                {"search", o.search},
                {"heldout", o.heldout},
                {"step", o.step},
                {"bags", o.bags},
                {"out", o.out}});

  const KnowledgeSchema schema =
      o.bags.empty() ? schema_from_predictions(paths) : read_bag_directory(ctx.path(o.bags)).schema;
  std::vector<RankedPredictions> sources;
  for (const auto& p : paths) sources.push_back(load_predictions(p, schema));
  if (o.search) {
    const auto heldout = load_triplets(ctx.path(o.heldout), schema).triplets;
    weights = search_ensemble_weights(sources, heldout, schema, o.step);
    std::string shown;
    for (double v : weights) shown += (shown.empty() ? "" : ",") + format_double(v);
    ctx.log().info("selected weights {}", shown);
    ctx.out() << "weights\t" << shown << '\n';
  }
  const RankedPredictions combined = ensemble(sources, weights, schema);
  write_predictions(ctx.path(o.out), combined, schema);
  ctx.out() << "predictions\t" << combined.size() << '\n';
}

// export-evidence -----------------------------------------------------------

struct EvidenceOpts {
  std::string checkpoint, bags, triplet, out;
};

void add_evidence(CLI::App& app, EvidenceOpts& o) {
  app.add_option("--checkpoint", o.checkpoint)->required();
  app.add_option("--bags", o.bags, "bag directory")->required();
  app.add_option("--triplet", o.triplet, "\"subject relation object\"")->required();
  app.add_option("--out", o.out, "evidence TSV")->required();
}

void cmd_export_evidence(Context& ctx, EvidenceOpts& o) {
  ctx.snapshot({{"checkpoint", o.checkpoint}, {"bags", o.bags}, {"triplet", o.triplet}, {"out", o.out}});
  std::istringstream words(o.triplet);
  std::string s, r, obj, extra;
  if (!(words >> s >> r >> obj) || (words >> extra)) {
    throw ConfigError("--triplet must be \"subject relation object\"");
  }
  const BagDirectory dir = read_bag_directory(ctx.path(o.bags));
  const auto subject = dir.schema.entities.find(s);
  const auto object = dir.schema.entities.find(obj);
  const auto relation = dir.schema.relations.find(r);
  if (!subject) throw ConfigError("unknown entity \"" + s + "\"");
  if (!object) throw ConfigError("unknown entity \"" + obj + "\"");
  if (!relation) throw ConfigError("unknown relation \"" + r + "\"");
  if (dir.schema.relations.is_na(*relation)) throw ConfigError("evidence is not defined for NA");

  const SplitView all = select_split(dir.split, "all");
  const EntityPair pair{*subject, *object};
  const auto it = std::find_if(all.bags.begin(), all.bags.end(), [&](const Bag& b) { return b.pair == pair; });
  if (it == all.bags.end()) throw ConfigError("no bag for pair " + s + " / " + obj);
  const ModelParams params = load_model(ctx, o.checkpoint, dir.schema, all.bags);

  std::vector<InstanceEvidence> evidence = instance_evidence(params, it->features, *relation);
  std::stable_sort(evidence.begin(), evidence.end(), [](const InstanceEvidence& a, const InstanceEvidence& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.score > b.score;
  });
  std::ofstream f(ctx.path(o.out));
  if (!f) throw ConfigError("cannot write " + o.out);
  f << "instance_id\timage_id\tweight\tscore\n";
  for (const auto& e : evidence) {
    const InstanceRef& ref = it->instances[e.position];
    f << ref.instance_id << '\t' << ref.image_id << '\t' << format_double(e.weight) << '\t'
      << format_double(e.score) << '\n';
  }
  ctx.out() << "instances\t" << evidence.size() << '\n';
}

// validate-features ---------------------------------------------------------

struct ValidateOpts {
  std::string features, manifest, entities;
  std::size_t dim = 0;
};

void add_validate(CLI::App& app, ValidateOpts& o) {
  app.add_option("--features", o.features, "MILFEAT1 feature file")->required();
  auto* m = app.add_option("--manifest", o.manifest, "instance manifest whose feature rows are checked");
  app.add_option("--entities", o.entities, "entity names for --manifest")->needs(m);
  m->needs("--entities");
  app.add_option("--dim", o.dim, "expected feature dimension");
}

void cmd_validate(Context& ctx, ValidateOpts& o) {
  ctx.snapshot({{"features", o.features}, {"manifest", o.manifest}, {"entities", o.entities}, {"dim", o.dim}});
  const Matrix features = read_feature_file(ctx.path(o.features));
  if (o.dim != 0 && static_cast<std::size_t>(features.cols()) != o.dim) {
    throw FormatError(o.features + ": dimension " + std::to_string(features.cols()) + ", expected " +
                      std::to_string(o.dim));
  }
  if (!o.manifest.empty()) {
    const EntityVocab vocab = load_entity_vocab(ctx.path(o.entities));
    const auto records = load_instance_manifest(ctx.path(o.manifest), vocab);
    for (const auto& rec : records) {
      if (rec.feature_row >= static_cast<std::size_t>(features.rows())) {
        throw FormatError(o.manifest + ":" + std::to_string(rec.manifest_index + 1) + ": feature_row " +
                          std::to_string(rec.feature_row) + " is out of range for " +
                          std::to_string(features.rows()) + " rows");
      }
    }
  }
  ctx.out() << "ok\t" << features.rows() << '\t' << features.cols() << '\n';
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-instance relation extraction toolkit", "milcke"};
  app.require_subcommand(1);
  Globals globals;
  auto* seed_opt = app.add_option("--seed", globals.seed, "root seed")->capture_default_str();
  app.add_option("--log-level", globals.log_level)
      ->capture_default_str()
      ->check(CLI::IsMember({"trace", "debug", "info", "warning", "error", "off"}));
  app.add_option("--workdir", globals.workdir, "base for relative paths and the config snapshot")
      ->capture_default_str();

  SynthOpts synth;
  BuildBagsOpts build;
  TrainOpts train_opts;
  PredictOpts predict;
  EvalOpts eval;
  EnsembleOpts ens;
  EvidenceOpts evidence;
  ValidateOpts validate;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic corpus");
  auto* c_build = app.add_subcommand("build-bags", "group instances into bags and split them");
  auto* c_train = app.add_subcommand("train", "train an aggregator");
  auto* c_predict = app.add_subcommand("predict", "rank candidate triplets");
  auto* c_eval = app.add_subcommand("eval", "held-out evaluation");
  auto* c_ens = app.add_subcommand("ensemble", "combine prediction files");
  auto* c_evidence = app.add_subcommand("export-evidence", "per-instance attention for one triplet");
  auto* c_validate = app.add_subcommand("validate-features", "check a feature file");
  add_synth(*c_synth, synth);
  add_build_bags(*c_build, build);
  add_train(*c_train, train_opts);
  add_predict(*c_predict, predict);
  add_eval(*c_eval, eval);
  add_ensemble(*c_ens, ens);
  add_evidence(*c_evidence, evidence);
  add_validate(*c_validate, validate);
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  Context ctx(globals, command, out, err);
  try {
    if (c_synth->parsed()) cmd_synth(ctx, synth);
    else if (c_build->parsed()) cmd_build_bags(ctx, build);
    else if (c_train->parsed()) cmd_train(ctx, train_opts, seed_opt->count() > 0);
    else if (c_predict->parsed()) cmd_predict(ctx, predict);
    else if (c_eval->parsed()) cmd_eval(ctx, eval);
    else if (c_ens->parsed()) cmd_ensemble(ctx, ens);
    else if (c_evidence->parsed()) cmd_export_evidence(ctx, evidence);
    else if (c_validate->parsed()) cmd_validate(ctx, validate);
  } catch (const NumericalError& e) {
    ctx.log().error("{}", e.what());
    return kExitNumerical;
  } catch (const Error& e) {
    ctx.log().error("{}", e.what());
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    ctx.log().error("{}", e.what());
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace milcke::cli
