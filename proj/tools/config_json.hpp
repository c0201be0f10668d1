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

#include <filesystem>
#include <string>

#include "milcke/trainer.hpp"

namespace milcke::cli {

// TrainingConfig <-> JSON object with the struct's field names. Unknown keys
// and wrongly typed values throw ConfigError; missing keys keep defaults.
TrainingConfig training_config_from_json(const std::string& text, const std::string& source);
TrainingConfig load_training_config(const std::filesystem::path& path);
std::string training_config_to_json(const TrainingConfig& config);

}  // namespace milcke::cli
