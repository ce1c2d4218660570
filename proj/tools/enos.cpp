/* Copyright 2026 The ENOS Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line driver: run operator searches, sweep lambda for energy-accuracy
// fronts, evaluate assignments, and inspect the embedded cost tables.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "enos/search.hpp"
#include "enos/svg.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRun = 2;
constexpr int kExitInfeasible = 3;

struct RunConfig {
  std::string strategy = "single";
  std::string mode = "digital";
  double lambda = 0.0;
  double gamma = 0.0;
  std::string cim_budget = "25%";  // bits or percentage of total weight-bits
  int samples = 16;
  int epochs = 40;
  int relearn_epochs = 40;
  int batch = 32;
  double lr_theta = 1e-3;
  double lr_alpha = 3e-3;
  double steepness = 10.0;
  std::uint64_t seed = 0;
  bool reinit_relearn = false;
  std::string dataset = "synthetic:blobs";
  std::string net = "mini-cnn";
  std::string energy_table;  // override file, empty = embedded defaults
  std::string out = "runs/run";
};

void add_common_options(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--strategy", rc.strategy, "single|bilevel|sequential|variational");
  cmd->add_option("--mode", rc.mode, "digital|hybrid");
  cmd->add_option("--lambda", rc.lambda, "energy regularizer weight");
  cmd->add_option("--gamma", rc.gamma, "CiM budget Lagrangian weight (hybrid)");
  cmd->add_option("--cim-budget", rc.cim_budget, "CiM budget in weight-bits, or N% of total");
  cmd->add_option("--samples", rc.samples, "variational population size");
  cmd->add_option("--epochs", rc.epochs, "search epoch budget");
  cmd->add_option("--relearn-epochs", rc.relearn_epochs, "relearn epoch budget");
  cmd->add_option("--batch", rc.batch, "minibatch size");
  cmd->add_option("--lr-theta", rc.lr_theta, "weight learning rate");
  cmd->add_option("--lr-alpha", rc.lr_alpha, "operator-logit learning rate");
  cmd->add_option("--steepness", rc.steepness, "surrogate gradient steepness k");
  cmd->add_option("--seed", rc.seed, "RNG seed");
  cmd->add_flag("--reinit-relearn", rc.reinit_relearn, "re-initialize weights before relearn");
  cmd->add_option("--dataset", rc.dataset, "synthetic:{blobs,rings,digits}, idx:..., csv:...");
  cmd->add_option("--net", rc.net, "preset (mini-cnn, mini-squeeze) or spec file path");
  cmd->add_option("--energy-table", rc.energy_table, "energy table override file");
  cmd->add_option("--out", rc.out, "output directory");
  cmd->set_config("--config", "", "flat key=value config file; flags override");
}

enos::NetworkSpec resolve_net(const RunConfig& rc, const enos::Dataset& data) {
  if (rc.net == "mini-cnn" || rc.net == "mini-squeeze")
    return enos::make_preset(rc.net, data.sample_shape, data.classes);
  return enos::parse_network_spec_file(rc.net);
}

enos::EnergyTable resolve_table(const RunConfig& rc) {
  return rc.energy_table.empty() ? enos::EnergyTable::defaults()
                                 : enos::EnergyTable::from_file(rc.energy_table);
}

// "25%" -> floor of that share of the network's maximum CiM footprint
// (total weights x the largest per-weight area in the table); plain numbers
// are bits as-is.
double resolve_budget_bits(const std::string& s, const enos::Network& net,
                           const enos::EnergyTable& table) {
  if (s.empty()) return 0.0;
  if (s.back() == '%') {
    double pct = std::stod(s.substr(0, s.size() - 1));
    if (pct < 0.0 || pct > 100.0)
      throw std::invalid_argument("cim-budget percentage out of [0,100]: " + s);
    double total_bits = static_cast<double>(net.plan().total_weights) *
                        enos::max_area_bits(table, net.choices());
    return std::floor(pct / 100.0 * total_bits);
  }
  double bits = std::stod(s);
  if (bits < 0.0) throw std::invalid_argument("cim-budget must be >= 0");
  return bits;
}

enos::SearchConfig to_search_config(const RunConfig& rc, double budget_bits) {
  enos::SearchConfig cfg;
  cfg.strategy = enos::strategy_from_name(rc.strategy);
  if (rc.mode != "digital" && rc.mode != "hybrid")
    throw std::invalid_argument("mode must be digital or hybrid, got '" + rc.mode + "'");
  cfg.hybrid = rc.mode == "hybrid";
  cfg.lambda = rc.lambda;
  cfg.gamma = rc.gamma;
  cfg.budget_bits = budget_bits;
  cfg.epochs = rc.epochs;
  cfg.relearn_epochs = rc.relearn_epochs;
  cfg.samples = rc.samples;
  cfg.batch = rc.batch;
  cfg.lr_theta = rc.lr_theta;
  cfg.lr_alpha = rc.lr_alpha;
  cfg.steepness = rc.steepness;
  cfg.seed = rc.seed;
  cfg.reinit_relearn = rc.reinit_relearn;
  return cfg;
}

json config_json(const RunConfig& rc, double budget_bits) {
  return json{{"strategy", rc.strategy},
              {"mode", rc.mode},
              {"lambda", rc.lambda},
              {"gamma", rc.gamma},
              {"cim_budget", rc.cim_budget},
              {"cim_budget_bits", budget_bits},
              {"samples", rc.samples},
              {"epochs", rc.epochs},
              {"relearn_epochs", rc.relearn_epochs},
              {"batch", rc.batch},
              {"lr_theta", rc.lr_theta},
              {"lr_alpha", rc.lr_alpha},
              {"steepness", rc.steepness},
              {"seed", rc.seed},
              {"reinit_relearn", rc.reinit_relearn},
              {"dataset", rc.dataset},
              {"net", rc.net},
              {"energy_table", rc.energy_table}};
}

std::string assignment_line(const std::vector<enos::OperatorChoice>& a) {
  std::string s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) s += ',';
    s += enos::choice_token(a[i]);
  }
  return s;
}

std::vector<enos::OperatorChoice> parse_assignment_line(const std::string& line,
                                                        std::size_t expect) {
  std::vector<enos::OperatorChoice> a;
  if (!line.empty())
    for (const auto& tok : enos::detail::split(line, ',')) a.push_back(enos::parse_choice_token(tok));
  if (a.size() != expect)
    throw std::invalid_argument("assignment has " + std::to_string(a.size()) + " entries, network has " +
                                std::to_string(expect) + " searchable layers");
  return a;
}

json report_json(const enos::SearchOutcome& out) {
  json rep{{"assignment", assignment_line(out.assignment)},
           {"train_acc", out.train_acc},
           {"val_acc", out.val_acc},
           {"test_acc", out.test_acc},
           {"quant_test_acc", out.quant_test_acc},
           {"feasible", out.feasible},
           {"energy",
            {{"per_layer_fj", out.energy.per_layer_fj},
             {"total_fj", out.energy.total_fj},
             {"normalized", out.energy.normalized},
             {"cim_bits", out.energy.cim_bits},
             {"budget_bits", out.energy.budget_bits},
             {"feasible", out.energy.feasible}}}};
  if (!out.population.empty()) {
    json pop = json::array();
    for (const auto& c : out.population)
      pop.push_back({{"assignment", assignment_line(c.assignment)},
                     {"val_acc", c.val_acc},
                     {"test_acc", c.test_acc},
                     {"energy_fj", c.energy.total_fj},
                     {"energy_norm", c.energy.normalized},
                     {"cim_bits", c.energy.cim_bits},
                     {"feasible", c.feasible}});
    rep["population"] = pop;
  }
  return rep;
}

json weights_json(const enos::Network& net) {
  json layers = json::array();
  for (std::size_t s = 0; s < net.num_searchable(); ++s) {
    const auto& m = net.mixture(s);
    layers.push_back({{"weight_shape", m.weight->shape},
                      {"weight", m.weight->value},
                      {"bias", m.bias->value},
                      {"alpha", m.alpha->value}});
  }
  return json{{"layers", layers}};
}

void load_weights_json(enos::Network& net, const json& j) {
  const auto& layers = j.at("layers");
  if (layers.size() != net.num_searchable())
    throw std::invalid_argument("weights file has " + std::to_string(layers.size()) +
                                " layers, network has " + std::to_string(net.num_searchable()));
  for (std::size_t s = 0; s < net.num_searchable(); ++s) {
    auto& m = net.mixture(s);
    std::vector<double> w = layers[s].at("weight").get<std::vector<double>>();
    std::vector<double> b = layers[s].at("bias").get<std::vector<double>>();
    std::vector<double> a = layers[s].at("alpha").get<std::vector<double>>();
    if (w.size() != m.weight->size() || b.size() != m.bias->size() || a.size() != m.alpha->size())
      throw std::invalid_argument("weights file shape mismatch at layer " + std::to_string(s));
    m.weight->value = std::move(w);
    m.bias->value = std::move(b);
    m.alpha->value = std::move(a);
  }
}

struct RunResult {
  enos::SearchOutcome outcome;
  double budget_bits = 0.0;
};

// Run one search and populate a self-describing run directory.
RunResult run_search_to_dir(const RunConfig& rc, const fs::path& dir) {
  enos::Dataset data = enos::load_dataset(rc.dataset, rc.seed);
  enos::NetworkSpec spec = resolve_net(rc, data);
  enos::EnergyTable table = resolve_table(rc);
  enos::SearchConfig probe = to_search_config(rc, 0.0);
  enos::Network net = enos::build_search_network(spec, probe);
  double budget_bits = probe.hybrid ? resolve_budget_bits(rc.cim_budget, net, table) : 0.0;
  enos::SearchConfig cfg = to_search_config(rc, budget_bits);

  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << config_json(rc, budget_bits).dump(2) << "\n";
  std::ofstream(dir / "netspec.txt") << enos::serialize_network_spec(spec);
  std::ofstream metrics(dir / "metrics.jsonl");
  auto sink = [&metrics](const enos::EpochMetrics& m) {
    json row{{"phase", m.phase},
             {"epoch", m.epoch},
             {"train_loss", m.train_loss},
             {"val_loss", m.val_loss},
             {"val_acc", m.val_acc},
             {"expected_energy", m.expected_energy_fj},
             {"expected_energy_norm", m.expected_energy_norm},
             {"penalty", m.penalty}};
    if (!m.alpha_softmax.empty()) row["alpha_softmax"] = m.alpha_softmax;
    metrics << row.dump() << "\n";
  };

  enos::SearchOutcome out = enos::run_search(net, data, cfg, table, sink);
  std::ofstream(dir / "assignment.txt") << assignment_line(out.assignment) << "\n";
  std::ofstream(dir / "report.json") << report_json(out).dump(2) << "\n";
  std::ofstream(dir / "weights.json") << weights_json(net).dump() << "\n";
  return {std::move(out), budget_bits};
}

int cmd_search(const RunConfig& rc) {
  RunResult r = run_search_to_dir(rc, rc.out);
  std::cout << "assignment: " << assignment_line(r.outcome.assignment) << "\n"
            << "test_acc: " << r.outcome.test_acc
            << "  quant_test_acc: " << r.outcome.quant_test_acc << "\n"
            << "energy_fj: " << r.outcome.energy.total_fj
            << "  energy_norm: " << r.outcome.energy.normalized << "\n"
            << "cim_bits: " << r.outcome.energy.cim_bits << "\n";
  if (!r.outcome.feasible) {
    std::cerr << "error: no candidate satisfied the CiM budget of " << r.budget_bits
              << " bits\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

int cmd_pareto(const RunConfig& rc, std::vector<double> lambdas) {
  if (lambdas.size() < 2) throw std::invalid_argument("pareto needs at least 2 lambda values");
  std::sort(lambdas.begin(), lambdas.end());
  fs::path dir(rc.out);
  fs::create_directories(dir);
  struct Row {
    double lambda;
    bool ok = false;
    std::string error;
    enos::SearchOutcome out;
  };
  std::vector<Row> rows;
  bool any_fail = false;
  for (double lam : lambdas) {
    Row row;
    row.lambda = lam;
    RunConfig sub = rc;
    sub.lambda = lam;
    std::ostringstream name;
    name << "lambda_" << lam;
    try {
      row.out = run_search_to_dir(sub, dir / name.str()).outcome;
      row.ok = true;
      if (!row.out.feasible) {
        row.error = "infeasible";
        any_fail = true;
      }
    } catch (const std::exception& e) {
      row.error = e.what();
      any_fail = true;
    }
    rows.push_back(std::move(row));
  }
  std::ofstream csv(dir / "pareto.csv");
  csv.precision(10);
  csv << "lambda,strategy,accuracy,energy_fj,energy_norm,cim_bits,assignment";
  if (any_fail) csv << ",status";
  csv << "\n";
  std::vector<enos::ScatterPoint> pts;
  for (const auto& r : rows) {
    csv << r.lambda << ',' << rc.strategy << ',';
    if (r.ok)
      csv << r.out.test_acc << ',' << r.out.energy.total_fj << ',' << r.out.energy.normalized
          << ',' << r.out.energy.cim_bits << ",\"" << assignment_line(r.out.assignment) << '"';
    else
      csv << ",,,,";
    if (any_fail) csv << ',' << (r.error.empty() ? "ok" : r.error);
    csv << "\n";
    if (r.ok) {
      std::ostringstream lbl;
      lbl << "λ=" << r.lambda;
      pts.push_back({r.out.energy.normalized, r.out.test_acc, lbl.str(), !r.out.feasible});
    }
  }
  std::ofstream(dir / "pareto.svg") << enos::render_scatter_svg(
      pts, "normalized energy", "test accuracy", "energy vs. accuracy (" + rc.strategy + ")");
  std::cout << "wrote " << (dir / "pareto.csv").string() << " and pareto.svg\n";
  return any_fail ? kExitRun : kExitOk;
}

int cmd_energy(const RunConfig& rc, const std::string& assignment_str) {
  enos::Dataset data = enos::load_dataset(rc.dataset, rc.seed);
  enos::NetworkSpec spec = resolve_net(rc, data);
  enos::EnergyTable table = resolve_table(rc);
  enos::SearchConfig probe = to_search_config(rc, 0.0);
  enos::Network net = enos::build_search_network(spec, probe);
  std::string line = assignment_str;
  // all-<token> shorthand expands to every searchable layer.
  if (line.rfind("all-", 0) == 0) {
    enos::OperatorChoice c = enos::parse_choice_token(line.substr(4));
    line = assignment_line(std::vector<enos::OperatorChoice>(net.num_searchable(), c));
  }
  auto assignment = parse_assignment_line(line, net.num_searchable());
  double budget = probe.hybrid ? resolve_budget_bits(rc.cim_budget, net, table) : -1.0;
  enos::EnergyReport rep =
      enos::assignment_energy(assignment, net.plan().n_ops, net.plan().n_ws, table, budget);
  std::cout.precision(10);
  for (std::size_t i = 0; i < rep.per_layer_fj.size(); ++i)
    std::cout << "layer " << i << " (" << enos::choice_token(assignment[i])
              << "): " << rep.per_layer_fj[i] << " fJ\n";
  std::cout << "total_fj: " << rep.total_fj << "\n"
            << "energy_norm: " << rep.normalized << "\n"
            << "baseline_ratio: " << (rep.total_fj > 0 ? 1.0 / rep.normalized : 0.0) << "\n"
            << "cim_bits: " << rep.cim_bits << "\n";
  if (budget >= 0.0)
    std::cout << "budget_bits: " << budget << "\nfeasible: " << (rep.feasible ? "yes" : "no")
              << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& run_dir, std::string split_name, bool quantized) {
  fs::path dir(run_dir);
  std::ifstream cf(dir / "config.json");
  if (!cf) throw std::invalid_argument("no config.json in '" + run_dir + "'");
  json cj = json::parse(cf);
  RunConfig rc;
  rc.dataset = cj.at("dataset");
  rc.seed = cj.at("seed");
  rc.mode = cj.at("mode");
  rc.steepness = cj.at("steepness");
  enos::Dataset data = enos::load_dataset(rc.dataset, rc.seed);
  enos::NetworkSpec spec = enos::parse_network_spec_file((dir / "netspec.txt").string());
  enos::SearchConfig probe = to_search_config(rc, 0.0);
  enos::Network net = enos::build_search_network(spec, probe);
  std::ifstream wf(dir / "weights.json");
  if (!wf) throw std::invalid_argument("no weights.json in '" + run_dir + "'");
  load_weights_json(net, json::parse(wf));
  std::ifstream af(dir / "assignment.txt");
  std::string line;
  std::getline(af, line);
  auto assignment = parse_assignment_line(line, net.num_searchable());
  enos::Split split = enos::Split::Test;
  if (split_name == "train") split = enos::Split::Train;
  else if (split_name == "val") split = enos::Split::Val;
  else if (split_name != "test")
    throw std::invalid_argument("split must be train|val|test, got '" + split_name + "'");
  enos::EvalResult ev = enos::evaluate(net, data, split, &assignment, quantized);
  std::cout << "split: " << split_name << (quantized ? " (quantized)" : " (float)") << "\n"
            << "accuracy: " << ev.accuracy << "\nmean_loss: " << ev.mean_loss << "\n";
  return kExitOk;
}

int cmd_dump_defaults() {
  std::cout << enos::EnergyTable::defaults().dump();
  RunConfig rc;
  std::cout << "---\n"
            << "strategy=" << rc.strategy << "\nmode=" << rc.mode << "\nlambda=" << rc.lambda
            << "\ngamma=" << rc.gamma << "\ncim-budget=" << rc.cim_budget
            << "\nsamples=" << rc.samples << "\nepochs=" << rc.epochs
            << "\nrelearn-epochs=" << rc.relearn_epochs << "\nbatch=" << rc.batch
            << "\nlr-theta=" << rc.lr_theta << "\nlr-alpha=" << rc.lr_alpha
            << "\nsteepness=" << rc.steepness << "\nseed=" << rc.seed << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layer-wise operator and compute-mode search with an energy regularizer"};
  app.require_subcommand(1);

  RunConfig rc;
  auto* search = app.add_subcommand("search", "run one operator search");
  add_common_options(search, rc);

  RunConfig prc;
  std::vector<double> lambdas{0.0, 0.1, 1.0, 10.0};
  auto* pareto = app.add_subcommand("pareto", "sweep lambda and emit CSV + SVG front");
  add_common_options(pareto, prc);
  pareto->add_option("--lambdas", lambdas, "lambda values to sweep")->expected(2, 64);

  RunConfig erc;
  std::string assignment_str;
  auto* energy = app.add_subcommand("energy", "energy report for a fixed assignment");
  add_common_options(energy, erc);
  energy->add_option("--assignment", assignment_str,
                     "comma-joined tokens (T,MF,B[,+cim]) or all-<token>")
      ->required();

  std::string run_dir, split_name = "test";
  bool quantized = false;
  auto* eval = app.add_subcommand("eval", "re-evaluate a stored run directory");
  eval->add_option("--run", run_dir, "run directory from `search`")->required();
  eval->add_option("--split", split_name, "train|val|test");
  eval->add_flag("--quantized", quantized, "simulate inference precision");

  app.add_subcommand("dump-defaults", "print the embedded energy table and config defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (search->parsed()) return cmd_search(rc);
    if (pareto->parsed()) return cmd_pareto(prc, lambdas);
    if (energy->parsed()) return cmd_energy(erc, assignment_str);
    if (eval->parsed()) return cmd_eval(run_dir, split_name, quantized);
    return cmd_dump_defaults();
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRun;
  }
}
