#include "fedsim/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fedsim {

namespace {

bool log_enabled() {
  const char* env = std::getenv("FEDSIM_LOG");
  return env == nullptr || std::string_view(env) != "quiet";
}

std::string objectives_label(const std::vector<MaskObjective>& objectives) {
  std::string out;
  for (MaskObjective o : objectives) {
    if (!out.empty()) out += "+";
    out += to_string(o);
  }
  return out.empty() ? "none" : out;
}

std::vector<MaskObjective> parse_objectives(const nlohmann::json& arr) {
  std::vector<MaskObjective> out;
  for (const auto& item : arr) {
    auto o = mask_objective_from_string(item.get<std::string>());
    if (!o) {
      throw ParseError("config: unknown objective '" +
                       item.get<std::string>() + "'");
    }
    out.push_back(*o);
  }
  return out;
}

template <typename T>
T parse_enum(const nlohmann::json& j, const char* key,
             std::optional<T> (*parse)(std::string_view)) {
  std::string raw = j.at(key).get<std::string>();
  auto v = parse(raw);
  if (!v) {
    throw ParseError(std::string("config: bad value '") + raw + "' for " + key);
  }
  return *v;
}

}  // namespace

const char* to_string(TaskKind task) {
  return task == TaskKind::sequence ? "sequence" : "quadratic";
}

std::optional<TaskKind> task_from_string(std::string_view name) {
  if (name == "sequence") return TaskKind::sequence;
  if (name == "quadratic") return TaskKind::quadratic;
  return std::nullopt;
}

void ExperimentSpec::validate() const {
  if (seeds.empty()) {
    throw DomainError("experiment: at least one seed is required");
  }
  if (!(fraction_pretrain > 0.0 && fraction_pretrain <= 1.0) ||
      !(fraction_finetune > 0.0 && fraction_finetune <= 1.0)) {
    throw DomainError("experiment: client fractions must be in (0, 1]");
  }
  if (rounds_pretrain < 0 || rounds_finetune < 0) {
    throw DomainError("experiment: round counts must be >= 0");
  }
  if (scenario != "k3" && scenario != "k10" && scenario != "k30" &&
      scenario != "custom") {
    throw DomainError("experiment: scenario must be k3, k10, k30 or custom");
  }
  if (scenario == "custom" && clients_per_dataset.empty()) {
    throw DomainError("experiment: custom scenario needs --clients");
  }
  if (task == TaskKind::sequence && rounds_pretrain > 0 && objectives.empty()) {
    throw DomainError("experiment: pretraining rounds need >= 1 objective");
  }
  if (!(data_scale > 0.0)) {
    throw DomainError("experiment: data scale must be positive");
  }
  if (workers < 1) {
    throw DomainError("experiment: workers must be >= 1");
  }
}

std::vector<int> ExperimentSpec::allocation() const {
  if (scenario == "custom") {
    return clients_per_dataset;
  }
  int k = scenario == "k3" ? 3 : scenario == "k10" ? 10 : 30;
  std::array<int, 3> a = scenario_allocation(k);
  return {a[0], a[1], a[2]};
}

nlohmann::json ExperimentSpec::to_json(
    std::optional<std::uint64_t> seed_override) const {
  nlohmann::json j;
  j["task"] = to_string(task);
  j["scenario"] = scenario;
  j["clients_per_dataset"] = clients_per_dataset;
  j["data_scale"] = data_scale;
  j["data_seed"] = data_seed;
  j["heterogeneity"] = heterogeneity;
  j["quad_dims"] = quad_dims;
  j["feature_dim"] = feature_dim;
  j["output_dim"] = output_dim;
  j["loc_bins"] = loc_bins;
  nlohmann::json objs = nlohmann::json::array();
  for (MaskObjective o : objectives) objs.push_back(to_string(o));
  j["objectives"] = std::move(objs);
  j["val_docs_per_dataset"] = val_docs_per_dataset;
  j["fraction_pretrain"] = fraction_pretrain;
  j["fraction_finetune"] = fraction_finetune;
  j["rounds_pretrain"] = rounds_pretrain;
  j["rounds_finetune"] = rounds_finetune;
  j["server_opt_pretrain"] = to_string(server_opt_pretrain);
  j["server_opt_finetune"] = to_string(server_opt_finetune);
  j["server"] = {{"eta_s", server_hparams.eta_s},
                 {"momentum", server_hparams.momentum},
                 {"beta1", server_hparams.beta1},
                 {"beta2", server_hparams.beta2},
                 {"epsilon", server_hparams.epsilon},
                 {"fedavg_scaled", server_hparams.fedavg_scaled}};
  j["aggregation"] = to_string(aggregation);
  j["count_mode"] = to_string(count_mode);
  j["trainer"] = {{"optimizer", to_string(trainer.optimizer)},
                  {"eta_l", trainer.eta_l},
                  {"weight_decay", trainer.weight_decay},
                  {"beta1", trainer.beta1},
                  {"beta2", trainer.beta2},
                  {"epsilon", trainer.epsilon},
                  {"batch_size", trainer.batch_size},
                  {"epochs", trainer.epochs}};
  if (seed_override.has_value()) {
    j["seed"] = *seed_override;
  } else {
    j["seeds"] = seeds;
  }
  j["workers"] = workers;
  j["manifest"] = manifest_path.has_value() ? nlohmann::json(*manifest_path)
                                            : nlohmann::json(nullptr);
  return j;
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  std::string task_raw = j.at("task").get<std::string>();
  auto task = task_from_string(task_raw);
  if (!task) throw ParseError("config: bad task '" + task_raw + "'");
  spec.task = *task;
  spec.scenario = j.at("scenario").get<std::string>();
  spec.clients_per_dataset = j.at("clients_per_dataset").get<std::vector<int>>();
  spec.data_scale = j.at("data_scale").get<double>();
  spec.data_seed = j.at("data_seed").get<std::uint64_t>();
  spec.heterogeneity = j.at("heterogeneity").get<double>();
  spec.quad_dims = j.at("quad_dims").get<std::size_t>();
  spec.feature_dim = j.at("feature_dim").get<std::uint32_t>();
  spec.output_dim = j.at("output_dim").get<std::uint32_t>();
  spec.loc_bins = j.at("loc_bins").get<int>();
  spec.objectives = parse_objectives(j.at("objectives"));
  spec.val_docs_per_dataset = j.at("val_docs_per_dataset").get<int>();
  spec.fraction_pretrain = j.at("fraction_pretrain").get<double>();
  spec.fraction_finetune = j.at("fraction_finetune").get<double>();
  spec.rounds_pretrain = j.at("rounds_pretrain").get<int>();
  spec.rounds_finetune = j.at("rounds_finetune").get<int>();
  spec.server_opt_pretrain =
      parse_enum<ServerOpt>(j, "server_opt_pretrain", server_opt_from_string);
  spec.server_opt_finetune =
      parse_enum<ServerOpt>(j, "server_opt_finetune", server_opt_from_string);
  const nlohmann::json& server = j.at("server");
  spec.server_hparams.eta_s = server.at("eta_s").get<double>();
  spec.server_hparams.momentum = server.at("momentum").get<double>();
  spec.server_hparams.beta1 = server.at("beta1").get<double>();
  spec.server_hparams.beta2 = server.at("beta2").get<double>();
  spec.server_hparams.epsilon = server.at("epsilon").get<double>();
  spec.server_hparams.fedavg_scaled = server.at("fedavg_scaled").get<bool>();
  spec.aggregation =
      parse_enum<AggregationMode>(j, "aggregation", aggregation_from_string);
  std::string count_raw = j.at("count_mode").get<std::string>();
  if (count_raw == "questions") {
    spec.count_mode = CountMode::questions;
  } else if (count_raw == "documents") {
    spec.count_mode = CountMode::documents;
  } else {
    throw ParseError("config: bad count_mode '" + count_raw + "'");
  }
  const nlohmann::json& trainer = j.at("trainer");
  std::string opt_raw = trainer.at("optimizer").get<std::string>();
  auto opt = client_opt_from_string(opt_raw);
  if (!opt) throw ParseError("config: bad client optimizer '" + opt_raw + "'");
  spec.trainer.optimizer = *opt;
  spec.trainer.eta_l = trainer.at("eta_l").get<double>();
  spec.trainer.weight_decay = trainer.at("weight_decay").get<double>();
  spec.trainer.beta1 = trainer.at("beta1").get<double>();
  spec.trainer.beta2 = trainer.at("beta2").get<double>();
  spec.trainer.epsilon = trainer.at("epsilon").get<double>();
  spec.trainer.batch_size = trainer.at("batch_size").get<int>();
  spec.trainer.epochs = trainer.at("epochs").get<int>();
  if (j.contains("seed")) {
    spec.seeds = {j.at("seed").get<std::uint64_t>()};
  } else {
    spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  }
  spec.workers = j.at("workers").get<int>();
  if (!j.at("manifest").is_null()) {
    spec.manifest_path = j.at("manifest").get<std::string>();
  }
  return spec;
}

std::string ExperimentSpec::config_label() const {
  std::ostringstream s;
  s << to_string(task) << ' ' << scenario;
  if (scenario == "custom") {
    s << '[';
    for (std::size_t i = 0; i < clients_per_dataset.size(); ++i) {
      if (i > 0) s << ',';
      s << clients_per_dataset[i];
    }
    s << ']';
  }
  s << " agg=" << to_string(aggregation);
  if (rounds_pretrain > 0) {
    s << " pt[C=" << fraction_pretrain << ",T=" << rounds_pretrain << ','
      << to_string(server_opt_pretrain) << ",obj=" << objectives_label(objectives)
      << ']';
  } else {
    s << " pt[none]";
  }
  s << " ft[C=" << fraction_finetune << ",T=" << rounds_finetune << ','
    << to_string(server_opt_finetune) << ']';
  s << " het=" << heterogeneity << " scale=" << data_scale
    << " dseed=" << data_seed;
  return s.str();
}

std::shared_ptr<ClientPopulation> build_population(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<int> alloc = spec.allocation();
  if (spec.task == TaskKind::quadratic) {
    QuadraticFederation::Config config;
    config.clients_per_cluster = alloc;
    config.total_clients = 0;
    for (int c : alloc) config.total_clients += c;
    config.heterogeneity = spec.heterogeneity;
    config.dims = spec.quad_dims;
    config.seed = spec.data_seed;
    const std::int64_t doc_counts[3] = {1346, 10194, 13163};
    config.examples_per_cluster.clear();
    for (std::size_t i = 0; i < alloc.size(); ++i) {
      std::int64_t base = i < 3 ? doc_counts[i] : doc_counts[2];
      config.examples_per_cluster.push_back(std::max<std::int64_t>(
          alloc[i],
          std::llround(static_cast<double>(base) * spec.data_scale)));
    }
    return std::make_shared<QuadraticFederation>(config);
  }

  std::vector<DatasetDescriptor> manifest;
  if (spec.manifest_path.has_value()) {
    std::ifstream in(*spec.manifest_path);
    if (!in) {
      throw DomainError("experiment: cannot open manifest '" +
                        *spec.manifest_path + "'");
    }
    manifest = read_manifest(in);
  } else {
    manifest = synthetic_manifest(spec.data_scale);
  }
  if (manifest.size() != alloc.size()) {
    throw DomainError("experiment: allocation lists " +
                      std::to_string(alloc.size()) + " datasets, manifest has " +
                      std::to_string(manifest.size()));
  }
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    manifest[i].assigned_clients = alloc[i];
  }

  DocumentFederation::Config config;
  config.manifest = std::move(manifest);
  config.heterogeneity = spec.heterogeneity;
  config.feature_dim = spec.feature_dim;
  config.output_dim = spec.output_dim;
  config.loc_bins = spec.loc_bins;
  config.objectives = spec.objectives;
  config.count_mode = spec.count_mode;
  config.val_docs_per_dataset = spec.val_docs_per_dataset;
  config.data_seed = spec.data_seed;
  return std::make_shared<DocumentFederation>(config);
}

TrainingResult run_single(const ExperimentSpec& spec,
                          const ClientPopulation& population,
                          std::uint64_t seed) {
  TrainingPlan plan;
  if (spec.rounds_pretrain > 0) {
    PhasePlan pt;
    pt.kind = Phase::pretrain;
    pt.client_fraction = spec.fraction_pretrain;
    pt.rounds = spec.rounds_pretrain;
    pt.server_opt = spec.server_opt_pretrain;
    pt.server_hparams = spec.server_hparams;
    plan.phases.push_back(pt);
  }
  if (spec.rounds_finetune > 0) {
    PhasePlan ft;
    ft.kind = Phase::finetune;
    ft.client_fraction = spec.fraction_finetune;
    ft.rounds = spec.rounds_finetune;
    ft.server_opt = spec.server_opt_finetune;
    ft.server_hparams = spec.server_hparams;
    plan.phases.push_back(ft);
  }
  plan.run.seed = seed;
  plan.run.aggregation = spec.aggregation;
  plan.run.trainer = spec.trainer;
  plan.run.workers = spec.workers;
  return run_training(plan, population);
}

std::vector<RunResult> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.out_dir.empty()) {
    throw DomainError("experiment: output directory is required");
  }
  std::shared_ptr<ClientPopulation> population = build_population(spec);
  std::vector<std::string> datasets = population->dataset_names();

  std::vector<RunResult> results;
  for (std::uint64_t seed : spec.seeds) {
    auto start = std::chrono::steady_clock::now();
    TrainingResult training = run_single(spec, *population, seed);
    double wall = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();

    std::filesystem::path dir =
        std::filesystem::path(spec.out_dir) / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir);

    nlohmann::json echo = spec.to_json(seed);
    {
      std::ofstream out(dir / "config.json");
      out << echo.dump(2) << '\n';
    }
    {
      std::ofstream out(dir / "rounds.csv");
      write_rounds_csv(out, training.records, datasets);
    }

    const RoundRecord* last =
        training.records.empty() ? nullptr : &training.records.back();
    nlohmann::json summary;
    summary["format_version"] = 1;
    summary["config"] = echo;
    nlohmann::json res;
    res["rounds"] = training.records.size();
    res["final_val_loss"] = last ? last->val_loss : 0.0;
    res["final_two_step"] = last ? last->two_step : 0.0;
    nlohmann::json per_dataset = nlohmann::json::object();
    if (last) {
      for (const auto& [name, value] : last->per_dataset) {
        per_dataset[name] = value;
      }
    }
    res["final_per_dataset"] = per_dataset;
    if (spec.task == TaskKind::sequence && last) {
      res["final_two_step_x100"] = 100.0 * last->two_step;
    }
    summary["results"] = std::move(res);
    {
      std::ofstream out(dir / "summary.json");
      out << summary.dump(2) << '\n';
    }
    {
      // Wall time lives outside summary.json so replays stay byte-identical.
      std::ofstream out(dir / "timing.txt");
      out << "wall_seconds=" << wall << '\n';
    }

    RunResult r;
    r.seed = seed;
    r.dir = dir;
    r.final_val_loss = last ? last->val_loss : 0.0;
    r.final_two_step = last ? last->two_step : 0.0;
    results.push_back(std::move(r));
    if (log_enabled()) {
      std::cerr << "[fedsim] seed " << seed << " -> " << dir.string()
                << " (final val_loss " << (last ? last->val_loss : 0.0) << ")\n";
    }
  }
  return results;
}

std::vector<ExperimentSpec> expand_fraction_grid(
    const ExperimentSpec& base, std::span<const double> fractions_pretrain,
    std::span<const double> fractions_finetune) {
  std::vector<double> pts(fractions_pretrain.begin(), fractions_pretrain.end());
  std::vector<double> fts(fractions_finetune.begin(), fractions_finetune.end());
  if (pts.empty()) pts.push_back(base.fraction_pretrain);
  if (fts.empty()) fts.push_back(base.fraction_finetune);
  std::vector<ExperimentSpec> out;
  bool single = pts.size() == 1 && fts.size() == 1;
  for (double pt : pts) {
    for (double ft : fts) {
      ExperimentSpec spec = base;
      spec.fraction_pretrain = pt;
      spec.fraction_finetune = ft;
      if (!single) {
        std::ostringstream tag;
        tag << "cpt" << pt << "_cft" << ft;
        spec.out_dir =
            (std::filesystem::path(base.out_dir) / tag.str()).string();
      }
      out.push_back(std::move(spec));
    }
  }
  return out;
}

double median_of(std::vector<double> values) {
  if (values.empty()) {
    throw DomainError("median: empty sample");
  }
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

CompareTable compare_runs(std::span<const std::string> run_dirs,
                          const std::string& metric) {
  if (run_dirs.empty()) {
    throw DomainError("compare: no run directories given");
  }
  if (metric != "two_step" && metric != "val_loss") {
    throw DomainError("compare: metric must be two_step or val_loss");
  }
  std::map<std::string, CompareRow> grouped;
  for (const std::string& dir : run_dirs) {
    std::filesystem::path path = std::filesystem::path(dir) / "summary.json";
    std::ifstream in(path);
    if (!in) {
      throw DomainError("compare: missing " + path.string());
    }
    nlohmann::json summary = nlohmann::json::parse(in);
    ExperimentSpec spec = ExperimentSpec::from_json(summary.at("config"));
    double value = metric == "two_step"
                       ? summary.at("results").at("final_two_step").get<double>()
                       : summary.at("results").at("final_val_loss").get<double>();
    CompareRow& row = grouped[spec.config_label()];
    row.label = spec.config_label();
    row.per_seed.emplace_back(spec.seeds.front(), value);
  }
  CompareTable table;
  table.metric = metric;
  for (auto& [label, row] : grouped) {
    std::sort(row.per_seed.begin(), row.per_seed.end());
    std::vector<double> values;
    for (const auto& [_, v] : row.per_seed) values.push_back(v);
    row.median = median_of(std::move(values));
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const CompareRow& a, const CompareRow& b) {
              if (a.median != b.median) return a.median < b.median;
              return a.label < b.label;
            });
  return table;
}

std::string CompareTable::render() const {
  std::ostringstream out;
  out << "metric: " << metric << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const CompareRow& row = rows[i];
    bool tie = (i > 0 && rows[i - 1].median == row.median) ||
               (i + 1 < rows.size() && rows[i + 1].median == row.median);
    out << "  median=" << format_double(row.median) << (tie ? " (tie)" : "")
        << "  n=" << row.per_seed.size() << "  " << row.label << "\n    seeds:";
    for (const auto& [seed, value] : row.per_seed) {
      out << ' ' << seed << ':' << format_double(value);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace fedsim
