#pragma once

#include <filesystem>

#include "dgtl/graphdata/split.hpp"
#include "dgtl/graphdata/tag.hpp"

namespace dgtl::graphdata {

// On-disk dataset directory:
//   nodes.tsv       node_id TAB label_name_or_? TAB text   (backslash-escaped)
//   edges.tsv       u TAB v
//   categories.txt  one category per line, order defines indices
//   split.tsv       node_id TAB train|test                 (optional)
// All UTF-8, LF line endings.
TAGraph load_tag(const std::filesystem::path& dir);
void save_tag(const std::filesystem::path& dir, const TAGraph& graph);

Split load_split(const std::filesystem::path& dir, const TAGraph& graph);
void save_split(const std::filesystem::path& dir, const Split& split);

std::string escape_tsv(const std::string& raw);
std::string unescape_tsv(const std::string& escaped);

}  // namespace dgtl::graphdata
