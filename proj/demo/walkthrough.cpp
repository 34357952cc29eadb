// Synthetic shock study end to end: generate a corpus with a known effect,
// run every stage in memory and compare the estimates with the ground truth.
//
//   teamshock_demo [output_dir] [teams]

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <tuple>

#include "teamshock/teamshock.hpp"

using namespace teamshock;

int main(int argc, char** argv) {
  const std::string out = argc > 1 ? argv[1] : "demo_out";
  const std::string teams = argc > 2 ? argv[2] : "600";

  Config raw;
  raw.set("output_dir", out);
  raw.set("seed", "7");
  raw.set("synth_repos", teams);
  raw.set("synth_planted", "off_segment_len_16:0.2");
  raw.set("gbdt_trees", "100");
  raw.set("gbdt_learning_rate", "0.1");
  raw.set("gbdt_max_depth", "3");
  raw.set("gbdt_min_samples_leaf", "5");
  raw.set("rf_trees", "100");
  raw.set("rf_max_depth", "none");
  raw.set("rf_max_features", "sqrt");
  raw.set("bootstrap_iterations", "200");
  PipelineConfig cfg;
  try {
    cfg = parse_config(raw);
  } catch (const ConfigError& e) {
    std::cerr << "demo: " << e.what() << '\n';
    return 1;
  }

  std::cout << "generating " << teams << " synthetic teams with a shock in " << cfg.synthetic.shock.start.str() << "\n";
  auto synth = generate_synthetic(cfg.synthetic, cfg.seed);
  const auto true_effects = std::move(synth.truth);

  Pipeline pipeline(cfg, std::move(synth.corpus), synth.profiles, synth.languages, &std::cerr);
  try {
    pipeline.run_all();
  } catch (const std::exception& e) {
    std::cerr << "demo: " << e.what() << '\n';
    return 2;
  }

  // True effects averaged over the teams the pipeline scored.
  std::ifstream ite_in(std::filesystem::path(out) / "ite.csv");
  const auto ite = csv::read(ite_in, "ite.csv");
  std::set<std::tuple<std::string, std::string, int>> scored;
  for (const auto& row : ite.rows)
    scored.emplace(row[ite.column("repo_id")], row[ite.column("outcome")], std::stoi(row[ite.column("month")]));
  std::map<std::pair<std::string, int>, std::pair<double, int>> truth;  // (outcome, month) -> sum, n
  for (const auto& r : true_effects) {
    const int m = r.month - cfg.shock_month + 1;
    if (!scored.count({r.repo_id, r.outcome, m})) continue;
    auto& t = truth[{r.outcome, m}];
    t.first += r.ite;
    ++t.second;
  }

  std::ifstream in(std::filesystem::path(out) / "ate.csv");
  const auto ate = csv::read(in, "ate.csv");
  const auto c_outcome = ate.column("outcome"), c_month = ate.column("month"), c_mean = ate.column("mean_ite");
  std::printf("\n%-13s %5s %10s %10s\n", "outcome", "month", "estimate", "truth");
  for (const auto& row : ate.rows) {
    const int m = std::stoi(row[c_month]);
    const auto& t = truth[{row[c_outcome], m}];
    std::printf("%-13s %5d %10.3f %10.3f\n", row[c_outcome].c_str(), m, std::stod(row[c_mean]),
                t.second ? t.first / t.second : 0.0);
  }
  std::cout << "\ntables and plots written to " << out << "/\n";
  return 0;
}
