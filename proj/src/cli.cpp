#include "sensalign/cli.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sensalign/embedding_store.hpp"
#include "sensalign/error.hpp"
#include "sensalign/kernel.hpp"
#include "sensalign/neighbor_report.hpp"
#include "sensalign/sensory_axis.hpp"
#include "sensalign/stats.hpp"
#include "sensalign/sweep.hpp"
#include "sensalign/vqa.hpp"

namespace sensalign {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
  std::size_t k = kDefaultK;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::string out;
};

// Writes `text` to --out when given, otherwise to stdout.
void emit(const Options& opt, std::ostream& out, const std::string& text) {
  if (opt.out.empty()) {
    out << text;
    return;
  }
  std::ofstream file(opt.out, std::ios::trunc);
  if (!file) fail_io("cannot open " + opt.out + " for writing");
  file << text;
  if (!file) fail_io("write failed: " + opt.out);
}

int cmd_validate(const std::string& manifest_path, const std::vector<std::string>& paths,
                 const Options& opt, std::ostream& out) {
  const auto manifest = load_manifest(manifest_path);
  std::vector<EmbeddingMatrix> matrices;
  for (const auto& p : paths) matrices.push_back(load_matrix_unchecked(p));
  const auto report = validate_cell_set(manifest, matrices);
  json j = report_to_json(report);
  for (std::size_t i = 0; i < paths.size(); ++i) j["matrices"][i]["path"] = paths[i];
  j["n_items"] = manifest.n_items();
  emit(opt, out, j.dump(2) + "\n");
  return report.passed ? kExitOk : kExitValidation;
}

int cmd_align(const std::string& path_a, const std::string& path_b, const Options& opt,
              std::ostream& out) {
  const auto a = load_matrix(path_a);
  const auto b = load_matrix(path_b);
  json j;
  if (opt.bootstrap == 0) {
    const auto score = alignment(a, b, opt.k);
    j = {{"score", score.value}, {"se", nullptr}, {"k", opt.k}, {"n", score.n},
         {"B", 0}, {"seed", opt.seed}};
  } else {
    BootstrapOptions bo;
    bo.k = opt.k;
    bo.replicates = opt.bootstrap;
    bo.seed = opt.seed;
    bo.threads = opt.threads;
    bo.keep_replicates = false;
    const auto r = bootstrap_alignment(a, b, bo);
    j = {{"score", r.point_estimate}, {"se", r.standard_error}, {"k", r.k}, {"n", r.n},
         {"B", r.replicates}, {"seed", r.seed}, {"replicate_mean", r.replicate_mean}};
  }
  j["self_excluded"] = true;
  emit(opt, out, j.dump() + "\n");
  return kExitOk;
}

int cmd_cka(const std::string& path_a, const std::string& path_b, const Options& opt,
            std::ostream& out) {
  const auto a = load_matrix(path_a);
  const auto b = load_matrix(path_b);
  const json j = {{"cka", linear_cka(a, b)}, {"n", a.rows()}, {"variant", "linear-biased"}};
  emit(opt, out, j.dump() + "\n");
  return kExitOk;
}

int cmd_project(const std::string& see_path, const std::string& hear_path,
                const std::vector<std::string>& extras, std::size_t grid_points,
                const std::string& curves_path, const Options& opt, std::ostream& out) {
  const auto see = load_matrix(see_path);
  const auto hear = load_matrix(hear_path);
  std::map<std::string, EmbeddingMatrix> extra;
  for (const auto& arg : extras) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size()) {
      fail("--extra expects NAME=PATH, got \"" + arg + "\"");
    }
    extra.emplace(arg.substr(0, eq), load_matrix(arg.substr(eq + 1)));
  }
  const auto report = separation_report(see, hear, extra, grid_points);

  json conditions = json::object();
  for (const auto& [name, s] : report.summaries) {
    conditions[name] = {{"n", s.n},
                        {"mean", s.mean},
                        {"sd", s.sd},
                        {"bandwidth", report.curves.at(name).bandwidth}};
  }
  json j = {{"delta_mu", report.delta_mu},
            {"cohens_d", report.cohens_d},
            {"auroc", report.auroc},
            {"delta_norm", report.axis.delta_norm},
            {"positive_class", "see"},
            {"conditions", conditions}};

  std::ostringstream csv;
  csv << "condition,x,density\n";
  for (const auto& [name, curve] : report.curves) {
    for (std::size_t g = 0; g < curve.grid.size(); ++g) {
      csv << csv_escape(name) << ',' << format_double(curve.grid[g]) << ','
          << format_double(curve.density[g]) << '\n';
    }
  }
  if (curves_path.empty()) {
    json curves = json::object();
    for (const auto& [name, curve] : report.curves) {
      curves[name] = {{"grid", curve.grid}, {"density", curve.density}};
    }
    j["curves"] = curves;
  } else {
    std::ofstream file(curves_path, std::ios::trunc);
    if (!file) fail_io("cannot open " + curves_path + " for writing");
    file << csv.str();
    if (!file) fail_io("write failed: " + curves_path);
    j["curves_csv"] = curves_path;
  }
  emit(opt, out, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_neighbors(const std::string& manifest_path, const std::string& path_a,
                  const std::string& path_b, const std::string& ref_path, std::size_t top_m,
                  const Options& opt, std::ostream& out) {
  const auto manifest = load_manifest(manifest_path);
  const auto a = load_matrix(path_a);
  const auto b = load_matrix(path_b);
  const auto ref = load_matrix(ref_path);
  for (const auto* m : {&a, &b, &ref}) {
    if (m->rows() != manifest.n_items()) {
      fail("row count mismatch (" + std::to_string(m->rows()) + "≠" +
           std::to_string(manifest.n_items()) + ")");
    }
  }
  const auto na = topk_neighbors(cosine_kernel(a), opt.k);
  const auto nb = topk_neighbors(cosine_kernel(b), opt.k);
  const auto nr = topk_neighbors(cosine_kernel(ref), opt.k);
  const std::size_t m = top_m == 0 ? manifest.n_items() : top_m;
  const auto records = overlap_delta_ranking(na, nb, nr, m, manifest);

  std::ostringstream lines;
  write_jsonl(lines, records);
  emit(opt, out, lines.str());
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const Options& opt, bool threads_set,
              std::ostream& out) {
  auto config = load_sweep_config(config_path);
  if (threads_set) config.threads = opt.threads;
  if (!opt.out.empty()) config.output = opt.out;
  const auto rows = run_sweep(config);

  std::ostringstream csv;
  write_sweep_csv(csv, config, rows);
  if (config.output) {
    std::ofstream file(*config.output, std::ios::trunc);
    if (!file) fail_io("cannot open " + config.output->string() + " for writing");
    file << csv.str();
    if (!file) fail_io("write failed: " + config.output->string());
  } else {
    out << csv.str();
  }
  const bool all_ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.ok; });
  return all_ok ? kExitOk : kExitValidation;
}

int cmd_vqa_score(const std::string& log_path, const std::string& format, const Options& opt,
                  std::ostream& out) {
  std::ifstream in(log_path);
  if (!in) fail_io("cannot open " + log_path);
  const auto table = score_vqa(read_vqa_log(in));
  emit(opt, out, format == "json" ? vqa_to_json(table).dump(2) + "\n" : render_vqa_csv(table));
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Representational alignment between language models and sensory encoders",
               "sensalign"};
  app.require_subcommand(1);

  Options opt;
  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", opt.out, "Write the result here instead of stdout");
  };
  auto add_k = [&](CLI::App* sub) {
    sub->add_option("--k", opt.k, "Neighbors per item")->capture_default_str()->check(
        CLI::PositiveNumber);
  };
  auto add_bootstrap = [&](CLI::App* sub) {
    sub->add_option("--bootstrap", opt.bootstrap, "Bootstrap replicates (0 disables)")
        ->capture_default_str();
    sub->add_option("--seed", opt.seed, "Bootstrap seed")->capture_default_str();
    sub->add_option("--threads", opt.threads, "Worker threads (0 = all cores)")
        ->capture_default_str();
  };

  std::function<int()> action;

  std::string manifest_path;
  std::vector<std::string> matrix_paths;
  auto* validate = app.add_subcommand("validate", "Check matrices against a dataset manifest");
  validate->add_option("--manifest", manifest_path, "Dataset manifest (JSON)")->required();
  validate->add_option("matrices", matrix_paths, "Embedding files")->required();
  add_out(validate);
  validate->callback([&] {
    action = [&] { return cmd_validate(manifest_path, matrix_paths, opt, out); };
  });

  std::string path_a;
  std::string path_b;
  auto* align = app.add_subcommand("align", "Mutual-kNN alignment with bootstrap SE");
  align->add_option("a", path_a, "First embedding file")->required();
  align->add_option("b", path_b, "Second embedding file")->required();
  add_k(align);
  add_bootstrap(align);
  add_out(align);
  align->callback([&] { action = [&] { return cmd_align(path_a, path_b, opt, out); }; });

  auto* cka = app.add_subcommand("cka", "Linear centered kernel alignment");
  cka->add_option("a", path_a, "First embedding file")->required();
  cka->add_option("b", path_b, "Second embedding file")->required();
  add_out(cka);
  cka->callback([&] { action = [&] { return cmd_cka(path_a, path_b, opt, out); }; });

  std::string see_path;
  std::string hear_path;
  std::vector<std::string> extras;
  std::size_t grid_points = kDefaultGridPoints;
  std::string curves_path;
  auto* project_cmd = app.add_subcommand("project", "Visual-auditory axis separation report");
  project_cmd->add_option("--see", see_path, "SEE-cued embeddings")->required();
  project_cmd->add_option("--hear", hear_path, "HEAR-cued embeddings")->required();
  project_cmd->add_option("--extra", extras, "Extra condition to project, NAME=PATH");
  project_cmd->add_option("--grid-points", grid_points, "KDE grid size")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
  project_cmd->add_option("--curves", curves_path, "Write density curves CSV here");
  add_out(project_cmd);
  project_cmd->callback([&] {
    action = [&] {
      return cmd_project(see_path, hear_path, extras, grid_points, curves_path, opt, out);
    };
  });

  std::string ref_path;
  std::size_t top_m = 0;
  auto* neighbors = app.add_subcommand(
      "neighbors", "Per-item shared-neighbor gains between two prompt conditions");
  neighbors->add_option("--manifest", manifest_path, "Dataset manifest (JSON)")->required();
  neighbors->add_option("--cond-a", path_a, "Baseline condition embeddings")->required();
  neighbors->add_option("--cond-b", path_b, "Compared condition embeddings")->required();
  neighbors->add_option("--ref", ref_path, "Sensory encoder embeddings")->required();
  neighbors->add_option("--top", top_m, "Keep the top M items (0 = all)")->capture_default_str();
  add_k(neighbors);
  add_out(neighbors);
  neighbors->callback([&] {
    action = [&] {
      return cmd_neighbors(manifest_path, path_a, path_b, ref_path, top_m, opt, out);
    };
  });

  std::string config_path;
  auto* sweep = app.add_subcommand("sweep", "Alignment over a grid of cells, as CSV");
  sweep->add_option("config", config_path, "Sweep config (JSON or .toml)")->required();
  auto* sweep_threads =
      sweep->add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
  add_out(sweep);
  sweep->callback([&] {
    action = [&] { return cmd_sweep(config_path, opt, sweep_threads->count() > 0, out); };
  });

  std::string log_path;
  std::string format = "csv";
  auto* vqa = app.add_subcommand("vqa-score", "Per-category VQA accuracy table");
  vqa->add_option("log", log_path, "JSON-lines answer log")->required();
  vqa->add_option("--format", format, "csv or json")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "json"}));
  add_out(vqa);
  vqa->callback([&] { action = [&] { return cmd_vqa_score(log_path, format, opt, out); }; });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    return action();
  } catch (const Error& e) {
    const bool io = e.kind() == ErrorKind::io;
    out << json{{"error", e.what()}, {"kind", io ? "io" : "validation"}}.dump() << '\n';
    err << "sensalign " << command << ": error: " << e.what() << '\n';
    return io ? kExitIo : kExitValidation;
  }
}

}  // namespace sensalign
