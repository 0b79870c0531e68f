#include <fstream>

#include "json.hpp"
#include "spcit/forest.hpp"

namespace spcit::forest {

namespace {
constexpr int kFormatVersion = 1;
}

void save_forest(const ForestEnsemble& ensemble, const std::filesystem::path& path) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : ensemble.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes()) {
      nodes.push_back({{"f", n.feature},
                       {"thr", n.threshold},
                       {"l", n.left},
                       {"r", n.right},
                       {"v", n.value},
                       {"rows", n.rows}});
    }
    trees.push_back({{"n_features", tree.n_features()}, {"nodes", std::move(nodes)}});
  }
  const nlohmann::json doc = {{"format", "spcit-forest"},
                              {"version", kFormatVersion},
                              {"seed", ensemble.seed},
                              {"trees", std::move(trees)},
                              {"bootstrap_counts", ensemble.bootstrap_counts}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_forest: cannot open " + path.string());
  out << doc.dump();
  if (!out) throw std::runtime_error("save_forest: write failed for " + path.string());
}

ForestEnsemble load_forest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_forest: cannot open " + path.string());
  const auto doc = nlohmann::json::parse(in);
  if (doc.value("format", "") != "spcit-forest" || doc.value("version", 0) != kFormatVersion) {
    throw ValidationError("load_forest: " + path.string() + " is not a version-1 forest dump");
  }
  ForestEnsemble ensemble;
  ensemble.seed = doc.at("seed").get<std::uint64_t>();
  for (const auto& t : doc.at("trees")) {
    std::vector<TreeNode> nodes;
    for (const auto& jn : t.at("nodes")) {
      TreeNode n;
      n.feature = jn.at("f").get<int>();
      n.threshold = jn.at("thr").get<double>();
      n.left = jn.at("l").get<std::int32_t>();
      n.right = jn.at("r").get<std::int32_t>();
      n.value = jn.at("v").get<double>();
      n.rows = jn.at("rows").get<std::vector<std::uint32_t>>();
      nodes.push_back(std::move(n));
    }
    ensemble.trees.emplace_back(std::move(nodes), t.at("n_features").get<std::size_t>());
  }
  ensemble.bootstrap_counts =
      doc.at("bootstrap_counts").get<std::vector<std::vector<std::uint16_t>>>();
  if (ensemble.bootstrap_counts.size() != ensemble.trees.size()) {
    throw StructuralError("load_forest: tree and mask counts differ");
  }
  return ensemble;
}

}  // namespace spcit::forest
