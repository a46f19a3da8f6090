#include "sparsestruct/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sparsestruct/data_pipeline.hpp"
#include "sparsestruct/form_identifier.hpp"
#include "sparsestruct/induction.hpp"
#include "sparsestruct/synthetic.hpp"

namespace sparsestruct {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSimilarityStream = 0x51;

TableFormat parse_format(const std::string& f) {
  if (f == "auto") return TableFormat::kAuto;
  if (f == "csv") return TableFormat::kCsv;
  if (f == "tsv") return TableFormat::kTsv;
  throw ParseError("unknown table format '" + f + "'");
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir.empty() ? "." : dir) / name).string();
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ParseError(dir + ": cannot create directory: " + ec.message());
}

std::string labels_text(const std::vector<FormLabel>& labels) {
  if (labels.empty()) return "none";
  std::string s;
  for (const auto& l : labels) s += (s.empty() ? "" : ", ") + form_name(l.form);
  return s;
}

// Object indices from names or integers; "all" expands to every object.
std::vector<int> resolve_objects(const json& j, const std::vector<std::string>& names, int n) {
  std::vector<int> out;
  if (j.is_string() && j.get<std::string>() == "all") {
    for (int i = 0; i < n; ++i) out.push_back(i);
    return out;
  }
  if (!j.is_array()) throw ParseError("arguments: object list must be an array or \"all\"");
  for (const auto& e : j) {
    if (e.is_number_integer()) {
      const int i = e.get<int>();
      if (i < 0 || i >= n) throw ParseError("arguments: object index " + std::to_string(i) + " out of range");
      out.push_back(i);
    } else if (e.is_string()) {
      const auto it = std::find(names.begin(), names.end(), e.get<std::string>());
      if (it == names.end()) throw ParseError("arguments: unknown object '" + e.get<std::string>() + "'");
      out.push_back(static_cast<int>(it - names.begin()));
    } else {
      throw ParseError("arguments: objects must be names or indices");
    }
  }
  return out;
}

std::vector<double> read_last_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::vector<double> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cut = line.find_last_of(",\t");
    std::string cell = cut == std::string::npos ? line : line.substr(cut + 1);
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0') {
      if (header) {
        header = false;
        continue;
      }
      throw ParseError(path + ": non-numeric rank '" + cell + "'");
    }
    header = false;
    out.push_back(v);
  }
  return out;
}

StructureDocument discover_document(const SearchResult& r, const DataMatrix& data, double beta) {
  StructureDocument doc;
  doc.structure = canonicalize(r.structure);
  doc.objects = data.object_names;
  doc.score = r.score;
  doc.beta = beta;
  return doc;
}

}  // namespace

std::string run_discover(RunManifest& m, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  m.config.solver.beta = m.config.beta;
  m.config.validate();
  const TableFormat format = parse_format(m.input_format);
  const MatrixKind kind = m.input_kind == "similarity" ? MatrixKind::kSimilarity
                                                       : MatrixKind::kFeatures;
  if (m.input_kind != "similarity" && m.input_kind != "features")
    throw ParseError("unknown input kind '" + m.input_kind + "'");

  json report;
  DataMatrix data;
  LoadedMatrix loaded = load_matrix(m.input_path, kind, format);
  if (auto* sim = std::get_if<SimilarityMatrix>(&loaded)) {
    if (m.similarity_features <= 0) throw ParseError("--m must be positive");
    SampledFeatures sf = similarity_to_features(
        *sim, m.similarity_features, derive_seed(m.config.rng_seed, kSimilarityStream));
    report["similarity"] = {{"features", m.similarity_features},
                            {"clipped_eigenvalues", sf.clipped_eigenvalues},
                            {"clipped_mass", sf.clipped_mass}};
    data = std::move(sf.data);
  } else {
    data = std::get<DataMatrix>(std::move(loaded));
  }
  data.validate();
  if (m.rescale) {
    auto [scaled, rr] = rescale(data);
    report["rescale"] = {{"shift", rr.shift},
                         {"scale", rr.scale},
                         {"reference_columns", rr.reference_columns}};
    data = std::move(scaled);
  }

  log << "discover: " << data.n_objects() << " objects, " << data.n_features()
      << " features, beta " << m.config.beta << ", " << m.config.n_restarts << " runs\n";
  const SearchResult r = search(data, m.config);
  const StructureDocument doc = discover_document(r, data, m.config.beta);
  const std::string structure_text = dump_json(structure_to_json(doc));

  ensure_dir(m.output_dir);
  m.outputs = {"structure.json", "structure.dot", "trace.jsonl", "report.json", "manifest.json"};
  write_text_file(join_path(m.output_dir, "structure.json"), structure_text);
  write_text_file(join_path(m.output_dir, "structure.dot"), to_dot(doc));
  {
    std::ofstream trace(join_path(m.output_dir, "trace.jsonl"));
    if (!trace) throw ParseError(m.output_dir + ": cannot write trace.jsonl");
    r.trace.write_jsonl(trace);
  }
  report["score"] = {{"loglik", r.score.loglik}, {"penalty", r.score.penalty},
                     {"total", r.score.total}};
  report["n_objects"] = data.n_objects();
  report["n_features"] = data.n_features();
  report["n_clusters"] = r.structure.n_clusters();
  report["n_cluster_edges"] = cluster_edge_count(r.structure);
  report["best_restart"] = r.best_restart;
  report["restart_scores"] = r.restart_scores;
  report["warnings"] = r.warnings;
  report["forms"] = labels_text(check_laws(r.structure));
  report["sem_audit"] = {{"calls", r.audit.calls},
                         {"violations", r.audit.violations},
                         {"worst_drop", r.audit.worst_drop}};
  write_text_file(join_path(m.output_dir, "report.json"), dump_json(report));

  m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  m.threads = worker_count();
  write_text_file(join_path(m.output_dir, "manifest.json"), dump_json(m.to_json()));
  log << "score " << r.score.total << " (loglik " << r.score.loglik << ", penalty "
      << r.score.penalty << "), " << r.structure.n_clusters() << " clusters, "
      << cluster_edge_count(r.structure) << " cluster edges; forms: " << report["forms"].get<std::string>()
      << "\n";
  for (const auto& w : r.warnings) log << "warning: " << w << "\n";
  return structure_text;
}

namespace {

int cmd_discover_replay(const std::string& manifest_path, const std::string& out_dir,
                        std::ostream& out) {
  RunManifest m = RunManifest::from_json(read_json_file(manifest_path));
  if (!out_dir.empty()) m.output_dir = out_dir;
  run_discover(m, out);
  return kExitOk;
}

struct SynthArgs {
  std::string form = "ring";
  std::string experiment;
  std::string suite = "all";
  int n = 8;
  int rows = 3;
  int cols = 3;
  int branching = 2;
  int depth = 2;
  std::vector<int> chain_lengths{3, 4};
  bool multi_object = false;
  int m = 1000;
  int runs = 10;
  double beta = 6.0;
  double edge = 1.0;
  double attach = 16.0;
  double sigma2 = 100.0;
  std::string out_dir;
};

int cmd_synth(const SynthArgs& a, std::uint64_t seed, std::ostream& out) {
  if (!a.experiment.empty()) {
    if (a.experiment != "tables") throw ParseError("unknown experiment '" + a.experiment + "'");
    SearchConfig config;
    config.beta = a.beta;
    config.solver.beta = a.beta;
    std::vector<std::pair<std::string, std::vector<ExperimentCase>>> suites;
    if (a.suite == "all" || a.suite == "singleton") suites.emplace_back("Singleton clusters", singleton_suite());
    if (a.suite == "all" || a.suite == "multi") suites.emplace_back("Multi-object clusters", multi_object_suite());
    if (suites.empty()) throw ParseError("unknown suite '" + a.suite + "'");
    std::ostringstream md;
    for (const auto& [title, cases] : suites) {
      std::vector<CaseReport> reports;
      for (std::size_t i = 0; i < cases.size(); ++i) {
        reports.push_back(run_case(cases[i], a.m, a.runs, derive_seed(seed, i), config));
        std::cerr << "  " << cases[i].label << " done\n";
      }
      md << "### " << title << "\n\n";
      write_markdown_table(md, reports);
      md << "\n";
    }
    out << md.str();
    if (!a.out_dir.empty()) {
      ensure_dir(a.out_dir);
      write_text_file(join_path(a.out_dir, "tables.md"), md.str());
    }
    return kExitOk;
  }

  FormSpec spec;
  spec.kind = parse_form(a.form);
  spec.n = a.n;
  spec.rows = a.rows;
  spec.cols = a.cols;
  spec.branching = a.branching;
  spec.depth = a.depth;
  spec.chain_lengths = a.chain_lengths;
  spec.multi_object = a.multi_object;
  spec.size_seed = derive_seed(seed, 1);
  spec.edge_strength = a.edge;
  spec.attach_strength = a.attach;
  spec.sigma2 = a.sigma2;
  spec.validate();
  const Structure truth = build_form(spec);
  const DataMatrix data = sample_features(truth, a.m, derive_seed(seed, 0));

  StructureDocument doc;
  doc.structure = truth;
  doc.objects = data.object_names;
  ensure_dir(a.out_dir);
  write_structure(join_path(a.out_dir, "truth.json"), doc);
  write_text_file(join_path(a.out_dir, "truth.dot"), to_dot(doc));
  write_matrix_csv(join_path(a.out_dir, "data.csv"), data);
  out << "synth: " << form_name(spec.kind) << ", " << truth.n_objects() << " objects, "
      << truth.n_clusters() << " clusters, " << cluster_edge_count(truth)
      << " cluster edges, m = " << a.m << "\n";
  return kExitOk;
}

int cmd_identify(const std::string& path, bool show_laws, std::ostream& out) {
  const StructureDocument doc = read_structure(path);
  const ClusterRelation rel = ClusterRelation::of(doc.structure);
  out << labels_text(check_laws(rel)) << "\n";
  if (show_laws) {
    const LawSet laws = evaluate_laws(rel);
    for (int i = 0; i < 6; ++i) out << "law " << i + 1 << ": " << (laws[i] ? "holds" : "fails") << "\n";
  }
  return kExitOk;
}

struct InduceArgs {
  std::string structure;
  std::string covariance;
  std::string raw;
  bool raw_similarity = false;
  std::string arguments;
  std::string human_ranks;
  std::string out_path;
  std::int64_t samples = kDefaultInductionSamples;
};

int cmd_induce(const InduceArgs& a, std::uint64_t seed, std::ostream& out) {
  const int sources = !a.structure.empty() + !a.covariance.empty() + !a.raw.empty();
  if (sources != 1) throw ParseError("induce: give exactly one of --structure, --covariance, --raw");
  MatrixX<double> cov;
  std::vector<std::string> names;
  if (!a.structure.empty()) {
    const StructureDocument doc = read_structure(a.structure);
    cov = object_covariance(doc.structure);
    names = doc.objects;
  } else if (!a.covariance.empty()) {
    SimilarityMatrix c = load_square_matrix(a.covariance);
    cov = c.values;
    names = c.names;
  } else {
    LoadedMatrix loaded = load_matrix(
        a.raw, a.raw_similarity ? std::optional<MatrixKind>(MatrixKind::kSimilarity) : std::nullopt);
    if (auto* sim = std::get_if<SimilarityMatrix>(&loaded)) {
      cov = raw_covariance_baseline(*sim);
      names = sim->names;
    } else {
      auto [scaled, rr] = rescale(std::get<DataMatrix>(loaded));
      cov = raw_covariance_baseline(scaled);
      names = scaled.object_names;
    }
  }
  const int n = static_cast<int>(cov.rows());

  json spec = read_json_file(a.arguments);
  if (spec.is_object() && spec.contains("arguments")) spec = spec.at("arguments");
  if (!spec.is_array()) throw ParseError(a.arguments + ": expected a list of arguments");
  std::vector<InductionArgument> args;
  try {
    for (const auto& e : spec) {
      if (!e.is_object() || !e.contains("premises") || !e.contains("conclusion"))
        throw ParseError(a.arguments + ": each argument needs premises and conclusion");
      args.push_back({resolve_objects(e.at("premises"), names, n),
                      resolve_objects(e.at("conclusion"), names, n)});
      if (args.back().premises.empty()) throw ParseError(a.arguments + ": empty premise list");
    }
  } catch (const json::exception& e) {
    throw ParseError(a.arguments + ": " + e.what());
  }

  const FeaturePrior prior(cov, a.samples, seed);
  const std::vector<double> strengths = argument_strengths(prior, args);

  std::ostringstream csv;
  csv.precision(10);
  csv << "argument,strength\n";
  for (std::size_t i = 0; i < strengths.size(); ++i) csv << i << ',' << strengths[i] << '\n';
  if (a.out_path.empty()) {
    out << csv.str();
  } else {
    write_text_file(a.out_path, csv.str());
  }

  if (!a.human_ranks.empty()) {
    const std::vector<double> ranks = read_last_column(a.human_ranks);
    if (ranks.size() != strengths.size())
      throw ParseError(a.human_ranks + ": " + std::to_string(ranks.size()) + " ranks for " +
                       std::to_string(strengths.size()) + " arguments");
    out << "pearson_r," << evaluate_task(strengths, ranks) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse graph structure discovery"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  // discover
  auto* discover = app.add_subcommand("discover", "Learn a structure from a data matrix");
  std::string input;
  std::optional<double> beta;
  std::optional<int> move_budget;
  int runs = 10;
  bool large = false;
  bool no_rescale = false;
  bool similarity = false;
  int sim_m = kDefaultSimilarityFeatures;
  std::string format = "auto";
  std::string out_dir = ".";
  std::string replay;
  discover->add_option("input", input, "Feature or similarity matrix (CSV/TSV)");
  discover->add_option("--beta", beta, "Edge penalty per edge");
  discover->add_option("--runs", runs, "Independent searches; the best is kept")->check(CLI::PositiveNumber);
  discover->add_option("--seed", seed, "Base random seed (required)");
  discover->add_flag("--large", large, "Large-data settings: beta 18, move budget 8");
  discover->add_option("--move-budget", move_budget, "Candidates per move type per step")->check(CLI::PositiveNumber);
  discover->add_flag("--no-rescale", no_rescale, "Use the data as given");
  discover->add_flag("--similarity", similarity, "Input is a similarity matrix");
  discover->add_option("--m", sim_m, "Features sampled from a similarity matrix")->check(CLI::PositiveNumber);
  discover->add_option("--format", format, "Table format")->check(CLI::IsMember({"auto", "csv", "tsv"}));
  discover->add_option("--out", out_dir, "Output directory");
  discover->add_option("--replay", replay, "Rerun a manifest.json");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate data from a known structure");
  SynthArgs sa;
  synth->add_option("--form", sa.form, "ring, chain, grid, tree, peace, clusters, disjoint_chains, ring_of_trees, plane, tree_in_ring");
  synth->add_option("--experiment", sa.experiment, "'tables' runs the recovery benchmark");
  synth->add_option("--suite", sa.suite, "singleton, multi or all")->check(CLI::IsMember({"singleton", "multi", "all"}));
  synth->add_option("--n", sa.n, "Ring, chain or clusters size")->check(CLI::PositiveNumber);
  synth->add_option("--rows", sa.rows)->check(CLI::PositiveNumber);
  synth->add_option("--cols", sa.cols)->check(CLI::PositiveNumber);
  synth->add_option("--branching", sa.branching)->check(CLI::PositiveNumber);
  synth->add_option("--depth", sa.depth)->check(CLI::NonNegativeNumber);
  synth->add_option("--chain-lengths", sa.chain_lengths)->delimiter(',');
  synth->add_flag("--multi-object", sa.multi_object, "2 to 4 objects per cluster node");
  synth->add_option("--m", sa.m, "Features")->check(CLI::PositiveNumber);
  synth->add_option("--runs", sa.runs, "Searches per form (experiment)")->check(CLI::PositiveNumber);
  synth->add_option("--beta", sa.beta, "Edge penalty (experiment)");
  synth->add_option("--edge", sa.edge, "Cluster edge strength");
  synth->add_option("--attach", sa.attach, "Object attachment strength");
  synth->add_option("--sigma2", sa.sigma2, "Node variance");
  synth->add_option("--seed", seed, "Random seed (required)");
  synth->add_option("--out", sa.out_dir, "Output directory");

  // identify-form
  auto* identify = app.add_subcommand("identify-form", "Label a structure's cluster graph");
  std::string structure_path;
  bool show_laws = false;
  identify->add_option("structure", structure_path, "Structure JSON")->required();
  identify->add_flag("--laws", show_laws, "Print each law");
  identify->add_option("--seed", seed, "Accepted for uniformity; unused");

  // induce
  auto* induce = app.add_subcommand("induce", "Score inductive arguments");
  InduceArgs ia;
  induce->add_option("--structure", ia.structure, "Structure JSON");
  induce->add_option("--covariance", ia.covariance, "Object covariance CSV");
  induce->add_option("--raw", ia.raw, "Raw covariance baseline from a feature or similarity matrix");
  induce->add_flag("--similarity", ia.raw_similarity, "The --raw matrix is a similarity matrix");
  induce->add_option("--arguments", ia.arguments, "JSON list of {premises, conclusion}")->required();
  induce->add_option("--samples", ia.samples, "Monte Carlo samples")->check(CLI::PositiveNumber);
  induce->add_option("--human-ranks", ia.human_ranks, "Mean human ranks, one row per argument");
  induce->add_option("--out", ia.out_path, "Strengths CSV (default stdout)");
  induce->add_option("--seed", seed, "Random seed (required)");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitParse;
  }

  auto need_seed = [&](const char* cmd) {
    if (!seed) throw ParseError(std::string(cmd) + ": --seed is required");
    return *seed;
  };

  try {
    if (discover->parsed()) {
      if (!replay.empty())
        return cmd_discover_replay(replay, discover->count("--out") ? out_dir : "", out);
      if (input.empty()) throw ParseError("discover: input matrix required");
      RunManifest m;
      m.config = large ? SearchConfig::large_data() : SearchConfig{};
      if (beta) m.config.beta = *beta;
      if (move_budget) m.config.move_budget = *move_budget;
      m.config.n_restarts = runs;
      m.config.rng_seed = need_seed("discover");
      m.input_path = fs::absolute(input).string();
      m.input_kind = similarity ? "similarity" : "features";
      m.input_format = format;
      m.rescale = !no_rescale;
      m.similarity_features = sim_m;
      m.large = large;
      m.output_dir = out_dir;
      run_discover(m, out);
      return kExitOk;
    }
    if (synth->parsed()) return cmd_synth(sa, need_seed("synth"), out);
    if (identify->parsed()) return cmd_identify(structure_path, show_laws, out);
    if (induce->parsed()) return cmd_induce(ia, need_seed("induce"), out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const DegenerateDataError& e) {
    err << "degenerate data: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const InvariantError& e) {
    err << "solver invariant violated: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

int run_cli(int argc, char** argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace sparsestruct
