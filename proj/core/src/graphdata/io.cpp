#include "dgtl/graphdata/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dgtl/errors.hpp"

namespace dgtl::graphdata {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

IoError line_error(const std::filesystem::path& path, std::size_t line_no,
                   const std::string& why) {
  return IoError(path.string() + ":" + std::to_string(line_no) + ": " + why);
}

}  // namespace

std::string escape_tsv(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape_tsv(const std::string& escaped) {
  std::string out;
  out.reserve(escaped.size());
  for (std::size_t i = 0; i < escaped.size(); ++i) {
    if (escaped[i] == '\\' && i + 1 < escaped.size()) {
      const char next = escaped[++i];
      switch (next) {
        case '\\': out.push_back('\\'); break;
        case 't': out.push_back('\t'); break;
        case 'n': out.push_back('\n'); break;
        default:
          out.push_back('\\');
          out.push_back(next);
      }
    } else {
      out.push_back(escaped[i]);
    }
  }
  return out;
}

TAGraph load_tag(const std::filesystem::path& dir) {
  const auto nodes_path = dir / "nodes.tsv";
  const auto edges_path = dir / "edges.tsv";
  const auto cats_path = dir / "categories.txt";

  std::vector<std::string> categories;
  for (const std::string& line : read_lines(cats_path)) {
    if (!line.empty()) categories.push_back(line);
  }
  if (categories.empty()) throw IoError(cats_path.string() + ": no categories");

  const auto node_lines = read_lines(nodes_path);
  std::vector<std::string> texts;
  std::vector<int> labels;
  std::size_t n_nodes = 0;
  for (const std::string& line : node_lines) {
    if (!line.empty()) ++n_nodes;
  }
  texts.resize(n_nodes);
  labels.assign(n_nodes, -1);
  std::vector<char> seen(n_nodes, 0);
  for (std::size_t i = 0; i < node_lines.size(); ++i) {
    const std::string& line = node_lines[i];
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw line_error(nodes_path, i + 1, "expected 3 tab-separated fields, got " +
                                              std::to_string(fields.size()));
    }
    int id;
    try {
      id = std::stoi(fields[0]);
    } catch (...) {
      throw line_error(nodes_path, i + 1, "bad node id '" + fields[0] + "'");
    }
    if (id < 0 || static_cast<std::size_t>(id) >= n_nodes) {
      throw line_error(nodes_path, i + 1, "node id " + std::to_string(id) +
                                              " outside [0," + std::to_string(n_nodes) + ")");
    }
    if (seen[id]) throw line_error(nodes_path, i + 1, "duplicate node id " + std::to_string(id));
    seen[id] = 1;
    if (fields[1] == "?") {
      labels[id] = -1;
    } else {
      const auto it = std::find(categories.begin(), categories.end(), fields[1]);
      if (it == categories.end()) {
        throw line_error(nodes_path, i + 1, "label '" + fields[1] + "' not in categories.txt");
      }
      labels[id] = static_cast<int>(it - categories.begin());
    }
    texts[id] = unescape_tsv(fields[2]);
    if (texts[id].empty()) throw line_error(nodes_path, i + 1, "empty node text");
  }

  const auto edge_lines = read_lines(edges_path);
  std::vector<std::pair<int, int>> edges;
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    const std::string& line = edge_lines[i];
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw line_error(edges_path, i + 1, "expected 2 tab-separated fields");
    }
    int u, v;
    try {
      u = std::stoi(fields[0]);
      v = std::stoi(fields[1]);
    } catch (...) {
      throw line_error(edges_path, i + 1, "bad edge endpoints");
    }
    if (u < 0 || static_cast<std::size_t>(u) >= n_nodes || v < 0 ||
        static_cast<std::size_t>(v) >= n_nodes) {
      throw line_error(edges_path, i + 1, "edge endpoint outside [0," +
                                              std::to_string(n_nodes) + ")");
    }
    if (u == v) throw line_error(edges_path, i + 1, "self-edge at node " + std::to_string(u));
    edges.emplace_back(u, v);
  }

  try {
    return TAGraph::build(std::move(texts), std::move(edges), std::move(labels),
                          std::move(categories));
  } catch (const Error& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
}

void save_tag(const std::filesystem::path& dir, const TAGraph& graph) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "categories.txt", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + (dir / "categories.txt").string());
    for (const auto& c : graph.categories()) f << c << '\n';
  }
  {
    std::ofstream f(dir / "nodes.tsv", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + (dir / "nodes.tsv").string());
    for (int u = 0; u < graph.node_count(); ++u) {
      const int y = graph.label(u);
      f << u << '\t' << (y < 0 ? std::string("?") : graph.categories()[y]) << '\t'
        << escape_tsv(graph.text(u)) << '\n';
    }
  }
  {
    std::ofstream f(dir / "edges.tsv", std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + (dir / "edges.tsv").string());
    for (auto [u, v] : graph.edges()) f << u << '\t' << v << '\n';
  }
}

Split load_split(const std::filesystem::path& dir, const TAGraph& graph) {
  const auto path = dir / "split.tsv";
  Split split;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split_tabs(lines[i]);
    if (fields.size() != 2) throw line_error(path, i + 1, "expected 2 fields");
    int id;
    try {
      id = std::stoi(fields[0]);
    } catch (...) {
      throw line_error(path, i + 1, "bad node id");
    }
    if (id < 0 || id >= graph.node_count()) {
      throw line_error(path, i + 1, "node id out of range");
    }
    if (fields[1] == "train") {
      split.train_nodes.push_back(id);
    } else if (fields[1] == "test") {
      split.test_nodes.push_back(id);
    } else {
      throw line_error(path, i + 1, "expected 'train' or 'test', got '" + fields[1] + "'");
    }
  }
  return split;
}

void save_split(const std::filesystem::path& dir, const Split& split) {
  std::ofstream f(dir / "split.tsv", std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + (dir / "split.tsv").string());
  for (int u : split.train_nodes) f << u << "\ttrain\n";
  for (int u : split.test_nodes) f << u << "\ttest\n";
}

}  // namespace dgtl::graphdata
