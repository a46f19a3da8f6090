#include "sparsestruct/io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sparsestruct {

namespace {

std::string object_name(const StructureDocument& doc, int x) {
  return x < static_cast<int>(doc.objects.size()) ? doc.objects[x] : "o" + std::to_string(x);
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("structure json: missing '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("structure json: bad '") + key + "': " + e.what());
  }
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

json structure_to_json(const StructureDocument& doc) {
  const Structure& s = doc.structure;
  json j;
  std::vector<std::string> names;
  for (int x = 0; x < s.n_objects(); ++x) names.push_back(object_name(doc, x));
  j["objects"] = names;
  j["clusters"] = clusters_of(s.assignment);
  json edges = json::array();
  for (int a = 0; a < s.n_clusters(); ++a)
    for (int b = a + 1; b < s.n_clusters(); ++b)
      if (s.cluster_edges(a, b) > kEdgeFloor) edges.push_back({a, b, s.cluster_edges(a, b)});
  j["cluster_edges"] = edges;
  j["attach_weights"] = std::vector<double>(s.attach_weights.data(),
                                            s.attach_weights.data() + s.attach_weights.size());
  j["sigma2"] = s.sigma2;
  if (doc.score)
    j["score"] = {{"loglik", doc.score->loglik},
                  {"penalty", doc.score->penalty},
                  {"total", doc.score->total}};
  j["beta"] = doc.beta;
  return j;
}

StructureDocument structure_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("structure json: expected an object");
  StructureDocument doc;
  const auto clusters = field<std::vector<std::vector<int>>>(j, "clusters");
  int nx = 0;
  for (const auto& c : clusters) nx += static_cast<int>(c.size());
  if (j.contains("objects")) doc.objects = field<std::vector<std::string>>(j, "objects");
  if (!doc.objects.empty() && static_cast<int>(doc.objects.size()) != nx)
    throw ParseError("structure json: " + std::to_string(doc.objects.size()) +
                     " object names but clusters hold " + std::to_string(nx));

  Structure& s = doc.structure;
  s.assignment.assign(nx, -1);
  const int nz = static_cast<int>(clusters.size());
  for (int c = 0; c < nz; ++c) {
    if (clusters[c].empty()) throw ParseError("structure json: empty cluster " + std::to_string(c));
    for (int x : clusters[c]) {
      if (x < 0 || x >= nx || s.assignment[x] != -1)
        throw ParseError("structure json: clusters are not a partition of 0.." +
                         std::to_string(nx - 1));
      s.assignment[x] = c;
    }
  }
  s.cluster_edges = MatrixX<double>::Zero(nz, nz);
  if (j.contains("cluster_edges")) {
    for (const auto& e : j.at("cluster_edges")) {
      if (!e.is_array() || e.size() != 3) throw ParseError("structure json: edge must be [i, j, s]");
      const int a = e[0].get<int>();
      const int b = e[1].get<int>();
      const double w = e[2].get<double>();
      if (a < 0 || b < 0 || a >= nz || b >= nz || a == b || !(w >= 0.0))
        throw ParseError("structure json: bad edge [" + std::to_string(a) + ", " +
                         std::to_string(b) + "]");
      s.cluster_edges(a, b) = w;
      s.cluster_edges(b, a) = w;
    }
  }
  s.attach_weights = VectorX<double>::Ones(nx);
  if (j.contains("attach_weights")) {
    const auto w = field<std::vector<double>>(j, "attach_weights");
    if (static_cast<int>(w.size()) != nx)
      throw ParseError("structure json: attach_weights length " + std::to_string(w.size()) +
                       " != " + std::to_string(nx));
    for (int x = 0; x < nx; ++x) s.attach_weights[x] = w[x];
  }
  s.sigma2 = j.contains("sigma2") ? field<double>(j, "sigma2") : 1.0;
  if (j.contains("score")) {
    const json& sc = j.at("score");
    doc.score = StructureScore{field<double>(sc, "loglik"), field<double>(sc, "penalty"),
                               field<double>(sc, "total")};
  }
  if (j.contains("beta")) doc.beta = field<double>(j, "beta");
  try {
    validate(s);
  } catch (const InvariantError& e) {
    throw ParseError(std::string("structure json: ") + e.what());
  }
  return doc;
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out << text;
}

StructureDocument read_structure(const std::string& path) {
  try {
    return structure_from_json(read_json_file(path));
  } catch (const ParseError& e) {
    const std::string what = e.what();
    throw ParseError(what.rfind(path, 0) == 0 ? what : path + ": " + what);
  }
}

void write_structure(const std::string& path, const StructureDocument& doc) {
  write_text_file(path, dump_json(structure_to_json(doc)));
}

void write_dot(std::ostream& out, const StructureDocument& doc) {
  const Structure& s = doc.structure;
  out << "graph structure {\n";
  out << "  node [fontname=\"Helvetica\"];\n";
  for (int c = 0; c < s.n_clusters(); ++c)
    out << "  c" << c
        << " [shape=circle, style=filled, fillcolor=gray, label=\"\", width=0.2];\n";
  for (int x = 0; x < s.n_objects(); ++x)
    out << "  o" << x << " [shape=box, label=\"" << dot_escape(object_name(doc, x)) << "\"];\n";
  for (int a = 0; a < s.n_clusters(); ++a)
    for (int b = a + 1; b < s.n_clusters(); ++b)
      if (s.cluster_edges(a, b) > kEdgeFloor)
        out << "  c" << a << " -- c" << b << " [label=\"" << fixed3(s.cluster_edges(a, b))
            << "\"];\n";
  for (int x = 0; x < s.n_objects(); ++x)
    out << "  o" << x << " -- c" << s.assignment[x] << " [label=\""
        << fixed3(s.attach_weights[x]) << "\"];\n";
  out << "}\n";
}

std::string to_dot(const StructureDocument& doc) {
  std::ostringstream os;
  write_dot(os, doc);
  return os.str();
}

json search_config_to_json(const SearchConfig& c) {
  const SolverConfig& s = c.solver;
  return {
      {"beta", c.beta},
      {"n_restarts", c.n_restarts},
      {"max_score_decreases", c.max_score_decreases},
      {"split_seeds_per_node", c.split_seeds_per_node},
      {"move_budget", c.move_budget},
      {"swap_interval", c.swap_interval},
      {"rng_seed", c.rng_seed},
      {"flip_probability", c.flip_probability},
      {"coarse_k_values", c.coarse_k_values},
      {"kmeans_restarts", c.kmeans_restarts},
      {"swap_em_iters", c.swap_em_iters},
      {"solver",
       {{"lambda_grid", s.lambda_grid},
        {"include_attachments", s.include_attachments},
        {"max_sem_iters", s.max_sem_iters},
        {"sem_tol", s.sem_tol},
        {"em_tol", s.em_tol},
        {"max_em_iters", s.max_em_iters},
        {"mstep_max_iters", s.mstep_max_iters},
        {"mstep_pg_tol", s.mstep_pg_tol},
        {"threshold_cutoffs", s.threshold_cutoffs},
        {"refit_newton_steps", s.refit_newton_steps},
        {"prune", s.prune},
        {"prune_em_iters", s.prune_em_iters}}},
  };
}

SearchConfig search_config_from_json(const json& j) {
  SearchConfig c;
  try {
    c.beta = j.value("beta", c.beta);
    c.n_restarts = j.value("n_restarts", c.n_restarts);
    c.max_score_decreases = j.value("max_score_decreases", c.max_score_decreases);
    c.split_seeds_per_node = j.value("split_seeds_per_node", c.split_seeds_per_node);
    c.move_budget = j.value("move_budget", c.move_budget);
    c.swap_interval = j.value("swap_interval", c.swap_interval);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.flip_probability = j.value("flip_probability", c.flip_probability);
    c.coarse_k_values = j.value("coarse_k_values", c.coarse_k_values);
    c.kmeans_restarts = j.value("kmeans_restarts", c.kmeans_restarts);
    c.swap_em_iters = j.value("swap_em_iters", c.swap_em_iters);
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      SolverConfig& o = c.solver;
      o.lambda_grid = s.value("lambda_grid", o.lambda_grid);
      o.include_attachments = s.value("include_attachments", o.include_attachments);
      o.max_sem_iters = s.value("max_sem_iters", o.max_sem_iters);
      o.sem_tol = s.value("sem_tol", o.sem_tol);
      o.em_tol = s.value("em_tol", o.em_tol);
      o.max_em_iters = s.value("max_em_iters", o.max_em_iters);
      o.mstep_max_iters = s.value("mstep_max_iters", o.mstep_max_iters);
      o.mstep_pg_tol = s.value("mstep_pg_tol", o.mstep_pg_tol);
      o.threshold_cutoffs = s.value("threshold_cutoffs", o.threshold_cutoffs);
      o.refit_newton_steps = s.value("refit_newton_steps", o.refit_newton_steps);
      o.prune = s.value("prune", o.prune);
      o.prune_em_iters = s.value("prune_em_iters", o.prune_em_iters);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("search config: ") + e.what());
  }
  c.solver.beta = c.beta;
  return c;
}

json RunManifest::to_json() const {
  return {
      {"command", command},
      {"version", version},
      {"input", {{"path", input_path}, {"kind", input_kind}, {"format", input_format}}},
      {"rescale", rescale},
      {"similarity_features", similarity_features},
      {"large", large},
      {"config", search_config_to_json(config)},
      {"output_dir", output_dir},
      {"outputs", outputs},
      {"timing", {{"seconds", seconds}, {"threads", threads}}},
  };
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  try {
    m.command = j.value("command", m.command);
    m.version = j.value("version", m.version);
    const json& in = j.at("input");
    m.input_path = in.at("path").get<std::string>();
    m.input_kind = in.value("kind", m.input_kind);
    m.input_format = in.value("format", m.input_format);
    m.rescale = j.value("rescale", m.rescale);
    m.similarity_features = j.value("similarity_features", m.similarity_features);
    m.large = j.value("large", m.large);
    m.config = search_config_from_json(j.at("config"));
    m.output_dir = j.value("output_dir", m.output_dir);
    m.outputs = j.value("outputs", m.outputs);
    if (j.contains("timing")) {
      m.seconds = j.at("timing").value("seconds", 0.0);
      m.threads = j.at("timing").value("threads", 1u);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  if (m.command != "discover") throw ParseError("manifest: cannot replay '" + m.command + "'");
  return m;
}

}  // namespace sparsestruct
