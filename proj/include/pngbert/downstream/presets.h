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

#ifndef PNGBERT_DOWNSTREAM_PRESETS_H_
#define PNGBERT_DOWNSTREAM_PRESETS_H_

#include <string>
#include <vector>

namespace pngbert::downstream {

enum class EncoderKind { kPngBert, kConvBiLstm };

inline constexpr int kAllLayers = -1;

struct FinetunePreset {
  std::string name;
  EncoderKind encoder = EncoderKind::kPngBert;
  int tuned_layers = 0;  // kAllLayers: the whole encoder
  bool tone_task = false;
  bool grapheme_mask = false;
  bool pretrained = true;
  // Pretrained with graphemes masked out (phoneme-only encoder).
  bool phoneme_only_pretraining = false;
  // Tone labels enter the baseline encoder as an input channel.
  bool tone_input = false;
  // Fraction of steps run with the encoder fully frozen before the tuned
  // layers are released.
  double frozen_warmup_fraction = 0.0;
  // Preset whose checkpoint this one is normally warm-started from.
  std::string warm_start_from;

  // Layers actually tuned for an encoder of `layers` layers.
  int tuned_layer_count(int layers) const;
};

// PGB0 PGB2 PGB4 PGB6 PGBN PGB2T PGB2MC PB2MC TAC TACT. Throws ConfigError on
// other names.
FinetunePreset finetune_preset(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace pngbert::downstream

#endif  // PNGBERT_DOWNSTREAM_PRESETS_H_
