#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace dgtl::lm {

// Closed word-level vocabulary. Tokens are whitespace-delimited words plus
// a few specials; multi-word entries (category names like "rule learning")
// are matched greedily longest-first so each category maps to a single
// token. Unknown words map to <unk>.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kNb = 2;   // reserved-slot placeholder
  static constexpr int kEos = 3;

  Vocabulary() = default;

  // Builds specials + categories + extra single tokens + corpus words by
  // descending frequency (ties lexicographic) up to max_size entries.
  static Vocabulary build(const std::vector<std::string>& corpus_lines,
                          const std::vector<std::string>& categories,
                          const std::vector<std::string>& extra_tokens,
                          std::size_t max_size);

  int size() const noexcept { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(int id) const;
  int id(const std::string& word) const;  // kUnk when absent
  bool contains(const std::string& word) const;

  std::vector<int> tokenize(const std::string& text) const;
  std::string detokenize(std::span<const int> ids) const;

  // One token per line; the line number is the id.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  int category_token(const std::string& category) const;  // throws if missing

 private:
  void reindex();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  int max_phrase_words_ = 1;
};

}  // namespace dgtl::lm
