#pragma once

#include <filesystem>
#include <string>

namespace dgtl::lm {

enum class PositionalScheme { AbsoluteLearned, Rotary };

std::string to_string(PositionalScheme scheme);
PositionalScheme positional_scheme_from_string(const std::string& name);

struct LMConfig {
  int n_layers = 4;
  int n_heads = 4;
  int model_dim = 128;
  int mlp_dim = 512;
  int vocab_size = 0;  // fixed when the vocabulary is built
  int max_positions = 512;
  PositionalScheme positional_scheme = PositionalScheme::Rotary;

  int head_dim() const { return model_dim / n_heads; }
  void validate() const;

  // Companion key=value file next to the checkpoint.
  void save(const std::filesystem::path& path) const;
  static LMConfig load(const std::filesystem::path& path);
};

}  // namespace dgtl::lm
