#include "dgtl/lm/config.hpp"

#include <fstream>
#include <map>

#include "dgtl/errors.hpp"

namespace dgtl::lm {

std::string to_string(PositionalScheme scheme) {
  return scheme == PositionalScheme::AbsoluteLearned ? "absolute_learned" : "rotary";
}

PositionalScheme positional_scheme_from_string(const std::string& name) {
  if (name == "absolute_learned") return PositionalScheme::AbsoluteLearned;
  if (name == "rotary") return PositionalScheme::Rotary;
  throw ConfigError("unknown positional scheme '" + name + "'");
}

void LMConfig::validate() const {
  if (n_layers <= 0 || n_heads <= 0 || model_dim <= 0 || mlp_dim <= 0 ||
      vocab_size <= 0 || max_positions <= 0) {
    throw ConfigError("language model dimensions must be positive");
  }
  if (model_dim % n_heads != 0) {
    throw ConfigError("model_dim " + std::to_string(model_dim) +
                      " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (positional_scheme == PositionalScheme::Rotary && head_dim() % 2 != 0) {
    throw ConfigError("rotary positions require an even head dimension, got " +
                      std::to_string(head_dim()));
  }
}

void LMConfig::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "n_layers=" << n_layers << '\n'
    << "n_heads=" << n_heads << '\n'
    << "model_dim=" << model_dim << '\n'
    << "mlp_dim=" << mlp_dim << '\n'
    << "vocab_size=" << vocab_size << '\n'
    << "max_positions=" << max_positions << '\n'
    << "positional_scheme=" << to_string(positional_scheme) << '\n';
}

LMConfig LMConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected key=value");
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get_int = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(path.string() + ": missing key " + key);
    try {
      return std::stoi(it->second);
    } catch (...) {
      throw ConfigError(path.string() + ": bad value for " + key);
    }
  };
  LMConfig cfg;
  cfg.n_layers = get_int("n_layers");
  cfg.n_heads = get_int("n_heads");
  cfg.model_dim = get_int("model_dim");
  cfg.mlp_dim = get_int("mlp_dim");
  cfg.vocab_size = get_int("vocab_size");
  cfg.max_positions = get_int("max_positions");
  const auto it = kv.find("positional_scheme");
  if (it == kv.end()) throw ConfigError(path.string() + ": missing key positional_scheme");
  cfg.positional_scheme = positional_scheme_from_string(it->second);
  cfg.validate();
  return cfg;
}

}  // namespace dgtl::lm
