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


#include "config_json.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace milcke::cli {

namespace {

using nlohmann::json;

ScoreMode parse_score_mode(const std::string& s) {
  if (s == "probability") return ScoreMode::kProbability;
  if (s == "logit") return ScoreMode::kLogit;
  throw ConfigError("score_mode must be \"probability\" or \"logit\", got \"" + s + "\"");
}

std::string score_mode_name(ScoreMode m) { return m == ScoreMode::kLogit ? "logit" : "probability"; }

template <typename T>
void take(const json& j, const char* key, T& field) {
  field = j.at(key).get<T>();
}

}  // namespace

TrainingConfig training_config_from_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(source + ": training config must be a JSON object");

  TrainingConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "bag_size") take(j, "bag_size", cfg.bag_size);
      else if (key == "learning_rate") take(j, "learning_rate", cfg.learning_rate);
      else if (key == "warmup_start_lr") take(j, "warmup_start_lr", cfg.warmup_start_lr);
      else if (key == "warmup_steps") take(j, "warmup_steps", cfg.warmup_steps);
      else if (key == "batch_size") take(j, "batch_size", cfg.batch_size);
      else if (key == "weight_decay") take(j, "weight_decay", cfg.weight_decay);
      else if (key == "plateau_patience") take(j, "plateau_patience", cfg.plateau_patience);
      else if (key == "decay_factor") take(j, "decay_factor", cfg.decay_factor);
      else if (key == "max_plateaus") take(j, "max_plateaus", cfg.max_plateaus);
      else if (key == "max_epochs") take(j, "max_epochs", cfg.max_epochs);
      else if (key == "seed") take(j, "seed", cfg.seed);
      else if (key == "plateau_threshold") take(j, "plateau_threshold", cfg.plateau_threshold);
      else if (key == "mask_sibling_positives") take(j, "mask_sibling_positives", cfg.mask_sibling_positives);
      else if (key == "score_mode") cfg.score_mode = parse_score_mode(value.get<std::string>());
      else throw ConfigError(source + ": unknown training config key \"" + key + "\"");
    } catch (const json::exception& e) {
      throw ConfigError(source + ": bad value for \"" + key + "\": " + e.what());
    }
    if (value.is_number_integer() && value.get<long long>() < 0 && key != "seed") {
      throw ConfigError(source + ": \"" + key + "\" must not be negative");
    }
  }
  cfg.validate();
  return cfg;
}

TrainingConfig load_training_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open training config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return training_config_from_json(buf.str(), path.string());
}

std::string training_config_to_json(const TrainingConfig& c) {
  json j = {
      {"bag_size", c.bag_size},
      {"learning_rate", c.learning_rate},
      {"warmup_start_lr", c.warmup_start_lr},
      {"warmup_steps", c.warmup_steps},
      {"batch_size", c.batch_size},
      {"weight_decay", c.weight_decay},
      {"plateau_patience", c.plateau_patience},
      {"decay_factor", c.decay_factor},
      {"max_plateaus", c.max_plateaus},
      {"max_epochs", c.max_epochs},
      {"seed", c.seed},
      {"plateau_threshold", c.plateau_threshold},
      {"mask_sibling_positives", c.mask_sibling_positives},
      {"score_mode", score_mode_name(c.score_mode)},
  };
  return j.dump(2);
}

}  // namespace milcke::cli
