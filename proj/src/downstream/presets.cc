// Copyright (c) 2026 The pngbert-ja Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pngbert/downstream/presets.h"

#include <algorithm>

#include "pngbert/common/errors.h"

namespace pngbert::downstream {

int FinetunePreset::tuned_layer_count(int layers) const {
  if (tuned_layers == kAllLayers) return layers;
  return std::min(tuned_layers, layers);
}

FinetunePreset finetune_preset(const std::string& name) {
  FinetunePreset p;
  p.name = name;
  if (name == "PGB0") {
    p.tuned_layers = 0;
  } else if (name == "PGB2") {
    p.tuned_layers = 2;
    p.warm_start_from = "PGB0";
  } else if (name == "PGB4") {
    p.tuned_layers = 4;
    p.warm_start_from = "PGB2";
  } else if (name == "PGB6") {
    p.tuned_layers = 6;
    p.warm_start_from = "PGB4";
  } else if (name == "PGBN") {
    p.tuned_layers = kAllLayers;
    p.pretrained = false;
  } else if (name == "PGB2T") {
    p.tuned_layers = 2;
    p.tone_task = true;
    p.warm_start_from = "PGB0";
  } else if (name == "PGB2MC") {
    p.tuned_layers = 2;
    p.grapheme_mask = true;
    p.warm_start_from = "PGB2";
  } else if (name == "PB2MC") {
    p.tuned_layers = 2;
    p.grapheme_mask = true;
    p.phoneme_only_pretraining = true;
    p.frozen_warmup_fraction = 0.5;
  } else if (name == "TAC") {
    p.encoder = EncoderKind::kConvBiLstm;
    p.tuned_layers = kAllLayers;
    p.pretrained = false;
  } else if (name == "TACT") {
    p.encoder = EncoderKind::kConvBiLstm;
    p.tuned_layers = kAllLayers;
    p.pretrained = false;
    p.tone_input = true;
  } else {
    throw ConfigError("unknown fine-tuning preset '" + name + "'");
  }
  return p;
}

std::vector<std::string> preset_names() {
  return {"PGB0", "PGB2", "PGB4", "PGB6", "PGBN", "PGB2T", "PGB2MC", "PB2MC", "TAC", "TACT"};
}

}  // namespace pngbert::downstream
