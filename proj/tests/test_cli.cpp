#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "sensalign/cli.hpp"
#include "sensalign/embedding_store.hpp"
#include "sensalign/kernel.hpp"
#include "sensalign/stats.hpp"
#include "support.hpp"
#include "vqa_fixture.hpp"

using namespace sensalign;
using nlohmann::json;
using sensalign::testing::from_rows;
using sensalign::testing::noisy_copy;
using sensalign::testing::numbered_manifest;
using sensalign::testing::random_matrix;
using sensalign::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sensalign");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string save(const TempDir& dir, const std::string& name, EmbeddingMatrix m,
                 const std::string& model = "model") {
  m.meta().model_id = model;
  write_matrix(m, dir / name);
  return (dir / name).string();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

}  // namespace

TEST_CASE("align") {
  TempDir dir;
  const auto a = save(dir, "a.emb", random_matrix(40, 8, 1));
  const auto b = save(dir, "b.emb", noisy_copy(random_matrix(40, 8, 1), 0.5, 2));

  SUBCASE("identical files") {
    const auto r = cli({"align", a, a, "--k", "10", "--bootstrap", "50"});
    CHECK(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["score"] == 1.0);
    CHECK(j["se"] == 0.0);
    CHECK(j["k"] == 10);
    CHECK(j["n"] == 40);
    CHECK(j["B"] == 50);
    CHECK(j["seed"] == 0);
  }
  SUBCASE("swapped-pairs fixture") {
    const auto x = save(dir, "x.emb", from_rows({{1, 0}, {1, 0.01f}, {0, 1}, {0.01f, 1}}));
    const auto y = save(dir, "y.emb", from_rows({{1, 0}, {0, 1}, {1, 0.01f}, {0.01f, 1}}));
    const auto r = cli({"align", x, y, "--k", "1", "--bootstrap", "0"});
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["score"] == 0.0);
  }
  SUBCASE("agrees with the library and is deterministic") {
    const auto r1 = cli({"align", a, b, "--bootstrap", "30", "--seed", "7", "--threads", "1"});
    const auto r2 = cli({"align", a, b, "--bootstrap", "30", "--seed", "7", "--threads", "4"});
    CHECK(r1.out == r2.out);
    const auto j = json::parse(r1.out);
    BootstrapOptions opt;
    opt.replicates = 30;
    opt.seed = 7;
    const auto lib = bootstrap_alignment(load_matrix(a), load_matrix(b), opt);
    CHECK(j["score"].get<double>() == lib.point_estimate);
    CHECK(j["se"].get<double>() == lib.standard_error);
  }
  SUBCASE("row count mismatch exits 1") {
    const auto c = save(dir, "c.emb", random_matrix(39, 8, 3));
    const auto r = cli({"align", a, c, "--bootstrap", "10"});
    CHECK(r.code == 1);
    const auto j = json::parse(r.out);
    CHECK(j["error"].get<std::string>().starts_with("row count mismatch"));
    CHECK(j["kind"] == "validation");
    CHECK(r.err.find("row count mismatch") != std::string::npos);
  }
  SUBCASE("missing file exits 2") {
    const auto r = cli({"align", a, (dir / "nope.emb").string()});
    CHECK(r.code == 2);
    CHECK(json::parse(r.out)["kind"] == "io");
  }
  SUBCASE("--out writes the report to a file") {
    const auto out = (dir / "align.json").string();
    const auto r = cli({"align", a, b, "--bootstrap", "5", "--out", out});
    CHECK(r.code == 0);
    CHECK(r.out.empty());
    CHECK(json::parse(slurp(out))["n"] == 40);
  }
  SUBCASE("bad arguments exit 1") {
    CHECK(cli({"align", a}).code == 1);
    CHECK(cli({"frobnicate"}).code == 1);
    CHECK(cli({"--help"}).code == 0);
  }
}

TEST_CASE("validate") {
  TempDir dir;
  write_manifest(numbered_manifest(4), dir / "m.json");
  const auto a = save(dir, "a.emb", random_matrix(4, 8, 1));
  const auto b = save(dir, "b.emb", random_matrix(4, 3, 2));
  const auto short_m = save(dir, "s.emb", random_matrix(3, 8, 3));
  const auto zero = save(dir, "z.emb", from_rows({{1, 0}, {0, 1}, {0, 0}, {1, 1}}));

  auto ok = cli({"validate", "--manifest", (dir / "m.json").string(), a, b});
  CHECK(ok.code == 0);
  CHECK(json::parse(ok.out)["passed"] == true);

  auto bad = cli({"validate", "--manifest", (dir / "m.json").string(), a, short_m, zero});
  CHECK(bad.code == 1);
  const auto j = json::parse(bad.out);
  CHECK(j["passed"] == false);
  CHECK(j["matrices"][1]["violations"][0] == "row count mismatch (3≠4)");
  CHECK(j["matrices"][2]["zero_rows"] == json::array({2}));
  CHECK(j["matrices"][2]["path"] == zero);
}

TEST_CASE("cka") {
  TempDir dir;
  const auto a = save(dir, "a.emb", random_matrix(20, 5, 1));
  const auto r = cli({"cka", a, a});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["cka"].get<double>() == doctest::Approx(1.0).epsilon(1e-12));
  const auto c = save(dir, "c.emb", random_matrix(21, 5, 1));
  CHECK(cli({"cka", a, c}).code == 1);
}

TEST_CASE("project") {
  TempDir dir;
  auto shift = [](EmbeddingMatrix m, float by) {
    std::vector<float> d(m.data().begin(), m.data().end());
    for (std::size_t i = 0; i < m.rows(); ++i) d[i * m.cols()] += by;
    return EmbeddingMatrix(m.rows(), m.cols(), d);
  };
  const auto see = save(dir, "see.emb", shift(random_matrix(100, 6, 1), 4.0f));
  const auto hear = save(dir, "hear.emb", random_matrix(100, 6, 2));
  const auto none = save(dir, "none.emb", shift(random_matrix(80, 6, 3), 3.0f));
  const auto curves = (dir / "curves.csv").string();

  const auto r = cli({"project", "--see", see, "--hear", hear, "--extra", "none=" + none,
                      "--grid-points", "64", "--curves", curves});
  CHECK(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["auroc"].get<double>() >= 0.99);
  CHECK(j["cohens_d"].get<double>() >= 3.0);
  CHECK(j["delta_mu"].get<double>() == doctest::Approx(j["delta_norm"].get<double>()));
  CHECK(j["conditions"].contains("none"));
  CHECK(j["conditions"]["none"]["n"] == 80);

  const auto rows = csv_rows(slurp(curves));
  CHECK(rows.front() == std::vector<std::string>{"condition", "x", "density"});
  CHECK(rows.size() == 1 + 3 * 64);

  const auto inline_curves = cli({"project", "--see", see, "--hear", hear, "--grid-points", "16"});
  CHECK(json::parse(inline_curves.out)["curves"]["see"]["grid"].size() == 16);

  CHECK(cli({"project", "--see", see, "--hear", see}).code == 1);
  CHECK(cli({"project", "--see", see, "--hear", hear, "--extra", "broken"}).code == 1);
}

TEST_CASE("neighbors") {
  TempDir dir;
  write_manifest(numbered_manifest(30), dir / "m.json");
  const auto ref = random_matrix(30, 6, 1);
  const auto a = save(dir, "a.emb", random_matrix(30, 6, 2));
  const auto b = save(dir, "b.emb", noisy_copy(ref, 0.3, 3));
  const auto r_path = save(dir, "r.emb", ref);
  const auto out = (dir / "n.jsonl").string();

  const auto r = cli({"neighbors", "--manifest", (dir / "m.json").string(), "--cond-a", a,
                      "--cond-b", b, "--ref", r_path, "--k", "5", "--top", "4", "--out", out});
  CHECK(r.code == 0);
  std::istringstream lines(slurp(out));
  std::string line;
  std::vector<json> records;
  while (std::getline(lines, line)) records.push_back(json::parse(line));
  REQUIRE(records.size() == 4);
  for (std::size_t i = 1; i < records.size(); ++i) {
    CHECK(records[i - 1]["delta"].get<long>() >= records[i]["delta"].get<long>());
  }
  CHECK(records[0]["neighbors_ref"].size() == 5);
  CHECK(records[0]["item_id"].get<std::string>().starts_with("item"));

  const auto all = cli({"neighbors", "--manifest", (dir / "m.json").string(), "--cond-a", a,
                        "--cond-b", b, "--ref", r_path, "--k", "5"});
  CHECK(std::count(all.out.begin(), all.out.end(), '\n') == 30);

  const auto small = save(dir, "s.emb", random_matrix(29, 6, 4));
  CHECK(cli({"neighbors", "--manifest", (dir / "m.json").string(), "--cond-a", small,
             "--cond-b", b, "--ref", r_path})
            .code == 1);
}

TEST_CASE("sweep") {
  TempDir dir;
  const std::size_t n = 60;
  write_manifest(numbered_manifest(n), dir / "m.json");
  const auto ref = random_matrix(n, 16, 100);
  save(dir, "ref.emb", ref, "dinov2-base");

  SUBCASE("cells compose to align results bit-for-bit") {
    const auto see = save(dir, "see.emb", noisy_copy(ref, 0.5, 1), "qwen3-0.6b");
    const auto none = save(dir, "none.emb", noisy_copy(ref, 1.0, 2), "qwen3-0.6b");
    const json config = {
        {"manifest", "m.json"},
        {"reference", "ref.emb"},
        {"k", 5},
        {"bootstrap", 25},
        {"seed", 3},
        {"cells",
         {{{"matrix", "see.emb"}, {"model_id", "qwen3-0.6b"}, {"condition", "see"},
           {"token_budget", 128}},
          {{"matrix", "none.emb"}, {"model_id", "qwen3-0.6b"}, {"condition", "none"},
           {"token_budget", 128}}}}};
    std::ofstream(dir / "sweep.json") << config.dump();

    const auto r = cli({"sweep", (dir / "sweep.json").string()});
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][0] == "model_id");
    CHECK(rows[1][1] == "see");
    CHECK(rows[2][1] == "none");
    CHECK(rows[1][11] == "ok");

    const auto single = json::parse(cli({"align", see, (dir / "ref.emb").string(), "--k", "5",
                                         "--bootstrap", "25", "--seed", "3"})
                                        .out);
    CHECK(std::stod(rows[1][5]) == single["score"].get<double>());
    CHECK(std::stod(rows[1][6]) == single["se"].get<double>());
  }

  SUBCASE("token-budget sweep over progressively noised copies decreases") {
    json cells = json::array();
    const std::vector<double> noise{0.05, 0.3, 0.6, 1.0, 1.6, 3.0};
    for (std::size_t c = 0; c < noise.size(); ++c) {
      const std::string name = "t" + std::to_string(c) + ".emb";
      save(dir, name, noisy_copy(ref, noise[c], 10 + c));
      cells.push_back({{"matrix", name},
                       {"model_id", "m"},
                       {"condition", "see"},
                       {"token_budget", 32 << c}});
    }
    const json config = {{"manifest", "m.json"}, {"reference", "ref.emb"}, {"k", 10},
                         {"bootstrap", 10},      {"cells", cells},        {"output", "out.csv"}};
    std::ofstream(dir / "sweep.json") << config.dump();
    const auto r = cli({"sweep", (dir / "sweep.json").string(), "--threads", "3"});
    CHECK(r.code == 0);
    const auto rows = csv_rows(slurp(dir / "out.csv"));
    REQUIRE(rows.size() == 7);
    for (std::size_t i = 2; i < rows.size(); ++i) {
      CHECK(std::stod(rows[i][5]) < std::stod(rows[i - 1][5]));
      CHECK(rows[i][2] == std::to_string(32 << (i - 1)));
    }
  }

  SUBCASE("missing matrix becomes an error row") {
    save(dir, "ok.emb", noisy_copy(ref, 0.5, 1));
    const json config = {
        {"manifest", "m.json"},
        {"reference", "ref.emb"},
        {"k", 5},
        {"bootstrap", 5},
        {"cells",
         {{{"matrix", "ok.emb"}, {"model_id", "m"}, {"condition", "see"}},
          {{"matrix", "gone.emb"}, {"model_id", "m"}, {"condition", "hear"}}}}};
    std::ofstream(dir / "sweep.json") << config.dump();
    const auto r = cli({"sweep", (dir / "sweep.json").string()});
    CHECK(r.code != 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[1][11] == "ok");
    CHECK(rows[2][11] == "error");
    CHECK(rows[2][12].find("gone.emb") != std::string::npos);
  }

  SUBCASE("TOML config with a layer sweep") {
    for (int layer = 0; layer < 3; ++layer) {
      save(dir, "l" + std::to_string(layer) + ".emb", noisy_copy(ref, 0.4, 20 + layer));
    }
    std::ofstream(dir / "sweep.toml") << R"(manifest = "m.json"
reference = "ref.emb"
k = 5
bootstrap = 5
seed = 1

[[cells]]
matrix = "l0.emb"
model_id = "qwen3-0.6b"
condition = "see"
layer = 0

[[cells]]
matrix = "l1.emb"
model_id = "qwen3-0.6b"
condition = "see"
layer = 1

[[cells]]
matrix = "l2.emb"
model_id = "qwen3-0.6b"
condition = "see"
layer = 2
)";
    const auto r = cli({"sweep", (dir / "sweep.toml").string()});
    CHECK(r.code == 0);
    const auto rows = csv_rows(r.out);
    REQUIRE(rows.size() == 4);
    CHECK(rows[3][3] == "2");
  }

  SUBCASE("duplicate labels are rejected") {
    save(dir, "d.emb", noisy_copy(ref, 0.4, 1));
    const json config = {{"manifest", "m.json"},
                         {"reference", "ref.emb"},
                         {"cells",
                          {{{"matrix", "d.emb"}, {"model_id", "m"}, {"condition", "see"}},
                           {{"matrix", "d.emb"}, {"model_id", "m"}, {"condition", "see"}}}}};
    std::ofstream(dir / "sweep.json") << config.dump();
    const auto r = cli({"sweep", (dir / "sweep.json").string()});
    CHECK(r.code == 1);
    CHECK(json::parse(r.out)["error"].get<std::string>().starts_with("duplicate cell labels"));
  }
}

TEST_CASE("vqa-score") {
  TempDir dir;
  std::ofstream(dir / "log.jsonl") << testing::mme_log();
  const auto r = cli({"vqa-score", (dir / "log.jsonl").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find(",64.78\n") != std::string::npos);
  CHECK(r.out.find(",67.14\n") != std::string::npos);
  CHECK(r.out.find(",2334\n") != std::string::npos);

  const auto j = cli({"vqa-score", (dir / "log.jsonl").string(), "--format", "json"});
  CHECK(json::parse(j.out)["rows"].size() == 28);

  std::ofstream(dir / "bad.jsonl") << testing::mme_log().substr(0, 300) << "\n{oops\n";
  const auto bad = cli({"vqa-score", (dir / "bad.jsonl").string()});
  CHECK(bad.code == 1);
  CHECK(json::parse(bad.out)["error"].get<std::string>().starts_with("line "));
}
