#ifndef SPARSESTRUCT_IO_HPP_
#define SPARSESTRUCT_IO_HPP_

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sparsestruct/cluster_search.hpp"
#include "sparsestruct/structure.hpp"

namespace sparsestruct {

using json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "1.0.0";

struct StructureDocument {
  Structure structure;
  std::vector<std::string> objects;
  std::optional<StructureScore> score;
  double beta = 0.0;
};

// {objects, clusters: [[members]], cluster_edges: [[i, j, s]], attach_weights,
//  sigma2, score: {loglik, penalty, total}, beta}
json structure_to_json(const StructureDocument& doc);
StructureDocument structure_from_json(const json& j);  // throws ParseError

std::string dump_json(const json& j);  // 2-space indent, trailing newline
json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

StructureDocument read_structure(const std::string& path);
void write_structure(const std::string& path, const StructureDocument& doc);

/// Objects as boxes, cluster nodes as gray circles, edge labels to 3 decimals.
void write_dot(std::ostream& out, const StructureDocument& doc);
std::string to_dot(const StructureDocument& doc);

json search_config_to_json(const SearchConfig& c);
SearchConfig search_config_from_json(const json& j);

/// Everything needed to rerun `discover`.
struct RunManifest {
  std::string command = "discover";
  std::string input_path;
  std::string input_kind = "features";  // features | similarity
  std::string input_format = "auto";    // auto | csv | tsv
  bool rescale = true;
  int similarity_features = 2000;
  bool large = false;
  SearchConfig config;
  std::string output_dir;
  std::vector<std::string> outputs;
  double seconds = 0.0;
  unsigned threads = 1;
  std::string version = kVersion;

  json to_json() const;
  static RunManifest from_json(const json& j);
};

}  // namespace sparsestruct

#endif  // SPARSESTRUCT_IO_HPP_
