#include "dgtl/lm/vocabulary.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "dgtl/errors.hpp"

namespace dgtl::lm {

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream is(text);
  std::string w;
  while (is >> w) words.push_back(std::move(w));
  return words;
}

}  // namespace

void Vocabulary::reindex() {
  index_.clear();
  max_phrase_words_ = 1;
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    index_.emplace(tokens_[i], i);
    const int words = 1 + static_cast<int>(std::count(tokens_[i].begin(),
                                                      tokens_[i].end(), ' '));
    max_phrase_words_ = std::max(max_phrase_words_, words);
  }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus_lines,
                             const std::vector<std::string>& categories,
                             const std::vector<std::string>& extra_tokens,
                             std::size_t max_size) {
  Vocabulary v;
  v.tokens_ = {"<pad>", "<unk>", "<nb>", "<eos>"};
  auto push_unique = [&](const std::string& t) {
    if (std::find(v.tokens_.begin(), v.tokens_.end(), t) == v.tokens_.end()) {
      v.tokens_.push_back(t);
    }
  };
  for (const auto& c : categories) {
    if (c.empty()) throw ValueError("empty category name");
    push_unique(c);
  }
  for (const auto& t : extra_tokens) push_unique(t);

  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus_lines) {
    for (auto& w : split_words(line)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> by_freq(counts.begin(), counts.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [word, count] : by_freq) {
    if (v.tokens_.size() >= max_size) break;
    push_unique(word);
  }
  v.reindex();
  return v;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) {
    throw ValueError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[id];
}

int Vocabulary::id(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& word) const {
  return index_.count(word) > 0;
}

std::vector<int> Vocabulary::tokenize(const std::string& text) const {
  const auto words = split_words(text);
  std::vector<int> ids;
  ids.reserve(words.size());
  std::size_t i = 0;
  while (i < words.size()) {
    bool matched = false;
    const std::size_t max_len =
        std::min<std::size_t>(max_phrase_words_, words.size() - i);
    for (std::size_t len = max_len; len >= 2; --len) {
      std::string phrase = words[i];
      for (std::size_t k = 1; k < len; ++k) phrase += ' ' + words[i + k];
      const auto it = index_.find(phrase);
      if (it != index_.end()) {
        ids.push_back(it->second);
        i += len;
        matched = true;
        break;
      }
    }
    if (!matched) {
      ids.push_back(id(words[i]));
      ++i;
    }
  }
  return ids;
}

std::string Vocabulary::detokenize(std::span<const int> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  for (const auto& t : tokens_) f << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  Vocabulary v;
  v.tokens_.clear();
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    v.tokens_.push_back(line);
  }
  while (!v.tokens_.empty() && v.tokens_.back().empty()) v.tokens_.pop_back();
  if (v.tokens_.size() < 4) throw IoError(path.string() + ": vocabulary too small");
  v.reindex();
  return v;
}

int Vocabulary::category_token(const std::string& category) const {
  const auto it = index_.find(category);
  if (it == index_.end()) {
    throw ValueError("category '" + category + "' has no vocabulary token");
  }
  return it->second;
}

}  // namespace dgtl::lm
