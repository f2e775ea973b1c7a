// fedsim: deterministic federated-training simulation driver.
//
// Subcommands:
//   run           train a federation and write per-round artifacts
//   compare       median final score per configuration across seeds
//   partition     deal a document manifest into client shards
//   gen-manifest  emit a synthetic manifest with benchmark cardinalities
//   compile       turn documents into masked sequence pairs
//   score         score predictions with the two-step average

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsim/experiment.hpp"
#include "fedsim/fsp.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/partitioner.hpp"

namespace {

using fedsim::DomainError;
using fedsim::ParseError;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, sep)) out.push_back(item);
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const std::string& item : split(text, ',')) {
    out.push_back(std::stoi(item));
  }
  return out;
}

std::vector<fedsim::MaskObjective> parse_objective_list(const std::string& text) {
  std::vector<fedsim::MaskObjective> out;
  for (const std::string& item : split(text, ',')) {
    auto o = fedsim::mask_objective_from_string(item);
    if (!o) throw DomainError("unknown objective '" + item + "'");
    out.push_back(*o);
  }
  return out;
}

struct RunOptions {
  std::string config_path;
  std::string scenario = "k10";
  std::string task = "sequence";
  std::string clients;
  std::string objectives = "tm,lm,tlm";
  std::string server_opt = "fedavg";
  std::string server_opt_pretrain;
  std::string server_opt_finetune;
  std::string aggregation = "literal";
  std::string count_mode = "questions";
  std::string manifest;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<double> fraction_pretrain;
  std::vector<double> fraction_finetune;
  int rounds_pretrain = 10;
  int rounds_finetune = 10;
  int epochs = 1;
  int batch_size = 16;
  double heterogeneity = 1.0;
  double data_scale = 0.1;
  std::uint64_t data_seed = 17;
  double eta_l = 0.0005;
  double weight_decay = 0.01;
  std::string client_opt = "adam";
  double eta_s = 0.001;
  int workers = 1;
  int loc_bins = 16;
};

fedsim::ExperimentSpec spec_from_options(const RunOptions& opt) {
  if (!opt.config_path.empty()) {
    std::ifstream in(opt.config_path);
    if (!in) throw DomainError("cannot open config '" + opt.config_path + "'");
    fedsim::ExperimentSpec spec =
        fedsim::ExperimentSpec::from_json(nlohmann::json::parse(in));
    spec.out_dir = opt.out_dir;
    return spec;
  }
  fedsim::ExperimentSpec spec;
  auto task = fedsim::task_from_string(opt.task);
  if (!task) throw DomainError("unknown task '" + opt.task + "'");
  spec.task = *task;
  spec.scenario = opt.scenario;
  if (!opt.clients.empty()) {
    spec.clients_per_dataset = parse_int_list(opt.clients);
    spec.scenario = "custom";
  }
  spec.objectives = parse_objective_list(opt.objectives);
  auto both = fedsim::server_opt_from_string(opt.server_opt);
  if (!both) throw DomainError("unknown server optimizer '" + opt.server_opt + "'");
  spec.server_opt_pretrain = *both;
  spec.server_opt_finetune = *both;
  if (!opt.server_opt_pretrain.empty()) {
    auto v = fedsim::server_opt_from_string(opt.server_opt_pretrain);
    if (!v) throw DomainError("unknown server optimizer '" + opt.server_opt_pretrain + "'");
    spec.server_opt_pretrain = *v;
  }
  if (!opt.server_opt_finetune.empty()) {
    auto v = fedsim::server_opt_from_string(opt.server_opt_finetune);
    if (!v) throw DomainError("unknown server optimizer '" + opt.server_opt_finetune + "'");
    spec.server_opt_finetune = *v;
  }
  auto agg = fedsim::aggregation_from_string(opt.aggregation);
  if (!agg) throw DomainError("unknown aggregation '" + opt.aggregation + "'");
  spec.aggregation = *agg;
  if (opt.count_mode == "questions") {
    spec.count_mode = fedsim::CountMode::questions;
  } else if (opt.count_mode == "documents") {
    spec.count_mode = fedsim::CountMode::documents;
  } else {
    throw DomainError("count mode must be questions or documents");
  }
  if (!opt.fraction_pretrain.empty()) {
    spec.fraction_pretrain = opt.fraction_pretrain.front();
  }
  if (!opt.fraction_finetune.empty()) {
    spec.fraction_finetune = opt.fraction_finetune.front();
  }
  spec.rounds_pretrain = opt.rounds_pretrain;
  spec.rounds_finetune = opt.rounds_finetune;
  spec.trainer.epochs = opt.epochs;
  spec.trainer.batch_size = opt.batch_size;
  spec.trainer.eta_l = opt.eta_l;
  spec.trainer.weight_decay = opt.weight_decay;
  auto copt = fedsim::client_opt_from_string(opt.client_opt);
  if (!copt) throw DomainError("client optimizer must be adam or gd");
  spec.trainer.optimizer = *copt;
  spec.server_hparams.eta_s = opt.eta_s;
  spec.heterogeneity = opt.heterogeneity;
  spec.data_scale = opt.data_scale;
  spec.data_seed = opt.data_seed;
  spec.loc_bins = opt.loc_bins;
  spec.workers = opt.workers;
  if (!opt.seeds.empty()) spec.seeds = opt.seeds;
  if (!opt.manifest.empty()) spec.manifest_path = opt.manifest;
  spec.out_dir = opt.out_dir;
  return spec;
}

int cmd_run(const RunOptions& opt) {
  fedsim::ExperimentSpec base = spec_from_options(opt);
  std::vector<fedsim::ExperimentSpec> grid;
  if (opt.config_path.empty()) {
    grid = fedsim::expand_fraction_grid(base, opt.fraction_pretrain,
                                        opt.fraction_finetune);
  } else {
    grid = {base};
  }
  for (const fedsim::ExperimentSpec& spec : grid) {
    for (const fedsim::RunResult& r : fedsim::run_experiment(spec)) {
      std::cout << r.dir.string() << '\n';
    }
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& metric) {
  fedsim::CompareTable table = fedsim::compare_runs(dirs, metric);
  std::cout << table.render();
  return 0;
}

int cmd_partition(const std::string& manifest_path, const std::string& scenario,
                  const std::string& clients, std::uint64_t seed,
                  const std::string& out_path) {
  std::ifstream in(manifest_path);
  if (!in) throw DomainError("cannot open manifest '" + manifest_path + "'");
  std::vector<fedsim::DatasetDescriptor> manifest = fedsim::read_manifest(in);
  std::vector<int> alloc;
  if (!clients.empty()) {
    alloc = parse_int_list(clients);
  } else {
    int k = scenario == "k3" ? 3 : scenario == "k10" ? 10 : scenario == "k30" ? 30 : 0;
    if (k == 0) throw DomainError("partition needs --scenario k3|k10|k30 or --clients");
    std::array<int, 3> a = fedsim::scenario_allocation(k);
    alloc.assign(a.begin(), a.end());
  }
  if (alloc.size() != manifest.size()) {
    throw DomainError("allocation covers " + std::to_string(alloc.size()) +
                      " datasets, manifest has " + std::to_string(manifest.size()));
  }
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    manifest[i].assigned_clients = alloc[i];
  }
  std::string json = fedsim::plan_to_json(fedsim::partition(manifest, seed));
  if (out_path.empty()) {
    std::cout << json << '\n';
  } else {
    std::ofstream out(out_path);
    out << json << '\n';
  }
  return 0;
}

int cmd_gen_manifest(double scale, const std::string& out_path) {
  std::vector<fedsim::DatasetDescriptor> manifest = fedsim::synthetic_manifest(scale);
  if (out_path.empty()) {
    fedsim::write_manifest(std::cout, manifest);
  } else {
    std::ofstream out(out_path);
    fedsim::write_manifest(out, manifest);
  }
  return 0;
}

// Documents arrive as JSON lines:
//   {"id": "...", "tokens": ["a", "b"], "boxes": [[x0,y0,x1,y1], ...]}
int cmd_compile(const std::string& docs_path, const std::string& objectives,
                int loc_bins, int cap, double mask_prob_override,
                std::uint64_t seed, const std::string& out_path) {
  std::ifstream in(docs_path);
  if (!in) throw DomainError("cannot open documents '" + docs_path + "'");
  std::vector<fedsim::MaskObjective> objs = parse_objective_list(objectives);
  fedsim::Discretizer discretizer(loc_bins);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    out = &file;
  }

  std::string line;
  std::size_t line_no = 0;
  std::size_t doc_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc_json;
    try {
      doc_json = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("documents line " + std::to_string(line_no) + ": " + e.what());
    }
    fedsim::DocumentExample doc;
    doc.image_ref = doc_json.value("id", std::to_string(doc_index));
    doc.tokens = doc_json.at("tokens").get<std::vector<std::string>>();
    for (const auto& b : doc_json.at("boxes")) {
      if (!b.is_array() || b.size() != 4) {
        throw ParseError("documents line " + std::to_string(line_no) +
                         ": box must be [x0,y0,x1,y1]");
      }
      doc.boxes.push_back(fedsim::Box{b[0].get<double>(), b[1].get<double>(),
                                      b[2].get<double>(), b[3].get<double>()});
    }
    doc.validate();
    for (std::size_t o = 0; o < objs.size(); ++o) {
      fedsim::Rng rng = fedsim::stream_rng(seed, {o, doc_index});
      double pm = mask_prob_override >= 0.0 ? mask_prob_override
                                            : fedsim::default_mask_prob(objs[o]);
      fedsim::MaskPlan plan = fedsim::sample_mask(
          objs[o], static_cast<int>(doc.tokens.size()), pm, cap, rng);
      fedsim::SequencePair pair =
          fedsim::build_pair(objs[o], doc, plan, discretizer);
      for (std::size_t i = 0; i < pair.input.size(); ++i) {
        if (i > 0) *out << ' ';
        *out << pair.input[i];
      }
      *out << '\t';
      for (std::size_t i = 0; i < pair.target.size(); ++i) {
        if (i > 0) *out << ' ';
        *out << pair.target[i];
      }
      *out << '\n';
    }
    ++doc_index;
  }
  return 0;
}

// Prediction records: dataset TAB prediction TAB gold1|gold2|...
int cmd_score(const std::string& in_path, double tau, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw DomainError("cannot open predictions '" + in_path + "'");
  std::vector<fedsim::EvalExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw ParseError("predictions line " + std::to_string(line_no) +
                       ": expected dataset TAB prediction TAB golds");
    }
    fedsim::EvalExample ex;
    ex.dataset = line.substr(0, t1);
    ex.prediction = line.substr(t1 + 1, t2 - t1 - 1);
    ex.golds = split(line.substr(t2 + 1), '|');
    if (ex.golds.empty()) {
      throw ParseError("predictions line " + std::to_string(line_no) +
                       ": empty gold set");
    }
    ex.kind = fedsim::metric_for_dataset(ex.dataset);
    examples.push_back(std::move(ex));
  }
  fedsim::ScoreReport report = fedsim::two_step_average(examples, tau);
  nlohmann::json j;
  nlohmann::json per = nlohmann::json::object();
  nlohmann::json per100 = nlohmann::json::object();
  for (const auto& [dataset, mean] : report.per_dataset) {
    per[dataset] = mean;
    per100[dataset] = 100.0 * mean;
  }
  j["per_dataset"] = per;
  j["per_dataset_x100"] = per100;
  j["final"] = report.final_score;
  j["final_x100"] = 100.0 * report.final_score;
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream out(out_path);
    out << j.dump(2) << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic federated-training simulator"};
  app.require_subcommand(1);

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand("run", "run a federated training experiment");
  run->add_option("--config", run_opt.config_path,
                  "load a run's config echo instead of flags");
  run->add_option("--task", run_opt.task, "sequence | quadratic");
  run->add_option("--scenario", run_opt.scenario, "k3 | k10 | k30 | custom");
  run->add_option("--clients", run_opt.clients,
                  "per-dataset client counts, e.g. 1,4,5 (implies custom)");
  run->add_option("--fraction-pretrain", run_opt.fraction_pretrain,
                  "C_pt (repeat for a grid)");
  run->add_option("--fraction-finetune", run_opt.fraction_finetune,
                  "C_ft (repeat for a grid)");
  run->add_option("--rounds-pretrain", run_opt.rounds_pretrain, "T_pt (0 skips)");
  run->add_option("--rounds-finetune", run_opt.rounds_finetune, "T_ft");
  run->add_option("--server-opt", run_opt.server_opt,
                  "fedavg | fedavgm | fedadam (both phases)");
  run->add_option("--server-opt-pretrain", run_opt.server_opt_pretrain,
                  "override the pretraining phase optimizer");
  run->add_option("--server-opt-finetune", run_opt.server_opt_finetune,
                  "override the finetuning phase optimizer");
  run->add_option("--server-lr", run_opt.eta_s, "server learning rate");
  run->add_option("--aggregation", run_opt.aggregation, "literal | normalized");
  run->add_option("--count-mode", run_opt.count_mode, "questions | documents");
  run->add_option("--epochs", run_opt.epochs, "local epochs E");
  run->add_option("--batch-size", run_opt.batch_size, "client batch size B");
  run->add_option("--client-opt", run_opt.client_opt, "adam | gd");
  run->add_option("--client-lr", run_opt.eta_l, "client learning rate");
  run->add_option("--weight-decay", run_opt.weight_decay, "client weight decay");
  run->add_option("--seed", run_opt.seeds, "training seed (repeatable)");
  run->add_option("--data-seed", run_opt.data_seed, "population seed");
  run->add_option("--data-scale", run_opt.data_scale, "manifest scale factor");
  run->add_option("--heterogeneity", run_opt.heterogeneity,
                  "inter-cluster divergence, 0 = IID");
  run->add_option("--objectives", run_opt.objectives,
                  "pretraining task subset, e.g. tm,lm,tlm");
  run->add_option("--loc-bins", run_opt.loc_bins, "coordinate vocabulary size");
  run->add_option("--manifest", run_opt.manifest, "document manifest file");
  run->add_option("--workers", run_opt.workers, "concurrent client trainings");
  run->add_option("--out", run_opt.out_dir, "output directory")->required();

  std::vector<std::string> compare_dirs;
  std::string compare_metric = "two_step";
  CLI::App* compare = app.add_subcommand("compare", "compare finished runs");
  compare->add_option("dirs", compare_dirs, "run directories")->required();
  compare->add_option("--metric", compare_metric, "two_step | val_loss");

  std::string part_manifest, part_scenario, part_clients, part_out;
  std::uint64_t part_seed = 0;
  CLI::App* part = app.add_subcommand("partition", "deal documents into shards");
  part->add_option("--manifest", part_manifest, "manifest file")->required();
  part->add_option("--scenario", part_scenario, "k3 | k10 | k30");
  part->add_option("--clients", part_clients, "per-dataset client counts");
  part->add_option("--seed", part_seed, "shuffle seed");
  part->add_option("--out", part_out, "plan output file (default stdout)");

  double gen_scale = 1.0;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-manifest", "emit a synthetic manifest");
  gen->add_option("--scale", gen_scale, "cardinality scale factor");
  gen->add_option("--out", gen_out, "manifest output file (default stdout)");

  std::string compile_docs, compile_objectives = "tm,lm,tlm", compile_out;
  int compile_bins = fedsim::kDefaultLocBins;
  int compile_cap = fedsim::kDefaultMaskCap;
  double compile_pm = -1.0;
  std::uint64_t compile_seed = 0;
  CLI::App* compile = app.add_subcommand("compile", "documents -> sequence pairs");
  compile->add_option("--docs", compile_docs, "documents as JSON lines")->required();
  compile->add_option("--objectives", compile_objectives, "tm,lm,tlm subset");
  compile->add_option("--loc-bins", compile_bins, "coordinate vocabulary size");
  compile->add_option("--cap", compile_cap, "mask count cap L_M");
  compile->add_option("--mask-prob", compile_pm,
                      "override per-objective masking probability");
  compile->add_option("--seed", compile_seed, "mask sampling seed");
  compile->add_option("--out", compile_out, "pairs output file (default stdout)");

  std::string score_in, score_out;
  double score_tau = 0.5;
  CLI::App* score = app.add_subcommand("score", "score predictions");
  score->add_option("--in", score_in, "prediction records")->required();
  score->add_option("--tau", score_tau, "similarity threshold (0 = raw)");
  score->add_option("--out", score_out, "report output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(run_opt);
    if (compare->parsed()) return cmd_compare(compare_dirs, compare_metric);
    if (part->parsed()) {
      return cmd_partition(part_manifest, part_scenario, part_clients,
                           part_seed, part_out);
    }
    if (gen->parsed()) return cmd_gen_manifest(gen_scale, gen_out);
    if (compile->parsed()) {
      return cmd_compile(compile_docs, compile_objectives, compile_bins,
                         compile_cap, compile_pm, compile_seed, compile_out);
    }
    if (score->parsed()) return cmd_score(score_in, score_tau, score_out);
  } catch (const fedsim::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const fedsim::DomainError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const fedsim::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
