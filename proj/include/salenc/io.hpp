#pragma once

#include <string>
#include <vector>

#include "salenc/model.hpp"
#include "salenc/scene.hpp"
#include "salenc/tensor.hpp"

namespace salenc {

// 8-bit binary PGM; map values clamped from [0,1] to 0..255
void write_pgm(const std::string& path, const Tensor& map);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// one scene per line: {"seed":..., "image_size":..., "boxes":[...]}
void save_corpus(const std::string& path, const std::vector<SyntheticScene>& scenes);

// regenerates each scene from its stored seed and verifies the stored boxes
// match the regeneration (guards against config drift)
std::vector<SyntheticScene> load_corpus(const std::string& path, const SceneConfig& config);

// <base>.bin holds every parameter as raw 64-bit floats in named_tensors
// order; <base>.json lists names, shapes, offsets plus the resolved config
void save_checkpoint(const std::string& base_path, Model& model,
                     const std::string& resolved_config_json);
void load_checkpoint(const std::string& base_path, Model& model);

}  // namespace salenc
