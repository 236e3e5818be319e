// chaosode: generate data, train, evaluate, run scenario sweeps, emit plot data.
//
// Exit codes: 0 success, 2 usage or config error, 3 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "chaosode/bench.hpp"
#include "chaosode/config.hpp"
#include "chaosode/data_io.hpp"
#include "chaosode/errors.hpp"
#include "chaosode/pipeline.hpp"

namespace fs = std::filesystem;
using namespace chaosode;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 3;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  bool resume = false;
  std::string figure;
  std::string input;
  std::string setup = "all";
  std::string scenario_id;
};

RunConfig load(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (o.workers) {
    c.scenario.workers = *o.workers;
    c.pipeline.workers = std::max<std::size_t>(1, *o.workers);
  }
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

int cmd_generate(const Options& o) {
  RunConfig c = load(o);
  if (o.seed) c.data.seed = *o.seed;
  const auto data = generate_data(c.data.n, c.data.sigma, c.data.seed, c.data.x0, c.data.span);
  const std::string path = o.out.empty() ? (fs::path(c.output.directory) / "data.csv").string() : o.out;
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  write_observations(data, path);
  std::printf("wrote %zu observations to %s\n", data.size(), path.c_str());
  return 0;
}

int cmd_train(const Options& o) {
  RunConfig c = load(o);
  if (o.seed) c.pipeline.seed = *o.seed;
  const auto data = read_observations(o.input);
  const std::string path = o.out.empty() ? (fs::path(c.output.directory) / "model.json").string() : o.out;
  const std::string log_path = fs::path(path).replace_extension(".log").string();
  TrainedModel model;
  try {
    model = train(data, c.pipeline);
  } catch (const AllStagesFailed& e) {
    write_text(log_path, std::string(e.what()) + '\n');
    throw;
  }
  const std::string table = stage_table(model);
  auto doc = to_json(model);
  doc["config"] = pipeline_echo(c.pipeline);
  write_text(path, doc.dump(2) + '\n');
  write_text(log_path, table);
  std::printf("%s", table.c_str());
  std::printf("final loss %.6e\n", model.final_loss);
  std::printf("ex_it mse %.6e\n", evaluate(model, eval_setup(SetupName::ex_it), 200, c.pipeline.step));
  std::printf("wrote %s\n", path.c_str());
  return 0;
}

TrainedModel read_model(const std::string& path, StepPolicy& step) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (doc.contains("config")) step = pipeline_from_echo(doc.at("config")).step;
  return trained_model_from_json(doc);
}

int cmd_eval(const Options& o) {
  StepPolicy step;
  const TrainedModel model = read_model(o.input, step);
  std::vector<SetupName> setups;
  if (o.setup == "all") {
    for (const auto& s : eval_setups()) setups.push_back(s.name);
  } else {
    try {
      setups.push_back(setup_from_string(o.setup));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string(e.what()) + "; expected all, ex_it, ex_oot or ex_ood");
    }
  }
  nlohmann::json out = nlohmann::json::array();
  for (SetupName name : setups) {
    const EvalSetup& s = eval_setup(name);
    const double mse = evaluate(model, s, 200, step);
    std::printf("%-6s span=(%g,%g) x0=(%g,%g) mse=%.6e success=%s\n", to_string(name).c_str(), s.t_start, s.t_end,
                s.x0[0], s.x0[1], mse, is_success(mse) ? "yes" : "no");
    out.push_back({{"setup", to_string(name)},
                   {"t_start", s.t_start},
                   {"t_end", s.t_end},
                   {"x0", s.x0},
                   {"mse", std::isfinite(mse) ? nlohmann::json(mse) : nlohmann::json(nullptr)},
                   {"success", is_success(mse)}});
  }
  if (!o.out.empty()) write_text(o.out, out.dump(2) + '\n');
  return 0;
}

std::string results_csv(const std::vector<ScenarioRecord>& records, const nlohmann::json& echo) {
  std::string text = "# config: " + echo.dump() + '\n' + csv_header() + '\n';
  for (const auto& r : records) text += to_csv_row(r) + '\n';
  return text;
}

int cmd_scenario(const Options& o) {
  RunConfig c = load(o);
  if (!o.scenario_id.empty()) c.scenario.id = o.scenario_id;
  if (o.seed) c.scenario.seed_offset = *o.seed;
  if (c.scenario.id != "S1" && c.scenario.id != "S2" && c.scenario.id != "S3" && c.scenario.id != "S4")
    throw ConfigError("scenario id must be one of S1, S2, S3, S4");
  const fs::path dir = o.out.empty() ? fs::path(c.output.directory) : fs::path(o.out);
  fs::create_directories(dir / "figures");
  const std::string jsonl = (dir / "results.jsonl").string();

  const auto cells = scenario_cells(c.scenario);
  std::map<std::string, std::size_t> order;
  for (std::size_t i = 0; i < cells.size(); ++i) order[cells[i].key()] = i;

  std::vector<ScenarioRecord> done;
  if (o.resume) {
    for (auto& r : read_records(jsonl))
      if (order.contains(r.cell_key())) done.push_back(std::move(r));
  }
  std::set<std::string> skip;
  for (const auto& r : done) skip.insert(r.cell_key());
  {
    // Rewrite what survived so a truncated tail does not linger.
    std::string text;
    for (const auto& r : done) text += to_json(r).dump() + '\n';
    write_text(jsonl, text);
  }
  std::printf("%s: %zu cells, %zu already done\n", c.scenario.id.c_str(), cells.size(), skip.size());
  if (std::any_of(cells.begin(), cells.end(), [](const Cell& cell) { return cell.sigma == 0.1; }))
    std::printf("note: sigma=0.1 is an inserted level between 0.01 and 1.0, not a reference noise level\n");
  std::fflush(stdout);

  std::ofstream append(jsonl, std::ios::app);
  std::size_t finished = skip.size();
  auto fresh = run_scenario(c.scenario, c.pipeline, skip, [&](const ScenarioRecord& r) {
    append << to_json(r).dump() << '\n';
    append.flush();
    ++finished;
    std::printf("[%zu/%zu] %s %s ex_it=%.3e ex_ood=%.3e (%.1fs)\n", finished, cells.size(), r.cell_key().c_str(),
                r.status.c_str(), r.mse_ex_it, r.mse_ex_ood, r.wall_time);
    std::fflush(stdout);
  });
  append.close();

  std::vector<ScenarioRecord> all = std::move(done);
  for (auto& r : fresh) all.push_back(std::move(r));
  std::sort(all.begin(), all.end(), [&](const ScenarioRecord& a, const ScenarioRecord& b) {
    return order.at(a.cell_key()) < order.at(b.cell_key());
  });
  std::string text;
  for (const auto& r : all) text += to_json(r).dump() + '\n';
  write_text(jsonl, text);

  auto echo = to_json(c);
  echo["scenario"].erase("workers");
  echo["pipeline"].erase("workers");
  write_text((dir / "config.json").string(), echo.dump(2) + '\n');
  if (std::find(c.output.formats.begin(), c.output.formats.end(), "csv") != c.output.formats.end())
    write_text((dir / "results.csv").string(), results_csv(all, echo));
  for (const auto& id : figure_ids()) {
    try {
      write_text((dir / "figures" / (id + ".csv")).string(), figure_csv(all, id));
    } catch (const EmptyGroup&) {
    }
  }
  std::size_t failed = 0;
  for (const auto& r : all) failed += r.status != "ok";
  std::printf("wrote %zu records to %s (%zu failed)\n", all.size(), jsonl.c_str(), failed);
  return 0;
}

int cmd_report(const Options& o) {
  if (std::find(figure_ids().begin(), figure_ids().end(), o.figure) == figure_ids().end()) {
    std::string ids;
    for (const auto& id : figure_ids()) ids += (ids.empty() ? "" : ", ") + id;
    throw ConfigError("unknown figure '" + o.figure + "'; valid ids: " + ids);
  }
  if (!fs::exists(o.input)) throw InputError("cannot open " + o.input);
  const std::string csv = figure_csv(read_records(o.input), o.figure);
  if (o.out.empty())
    std::cout << csv;
  else
    write_text(o.out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn ODE right-hand sides from trajectory data"};
  app.require_subcommand(1);
  Options o;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--workers", o.workers, "Worker threads (0: one per hardware thread)");
  };

  auto* gen = app.add_subcommand("generate", "Write Lotka-Volterra observations as CSV plus a JSON sidecar");
  common(gen);
  gen->add_option("--out", o.out, "Data CSV path");
  gen->add_option("--seed", o.seed, "Noise seed (overrides data.seed)");

  auto* tr = app.add_subcommand("train", "Train a model on a data CSV");
  common(tr);
  tr->add_option("data", o.input, "Data CSV")->required();
  tr->add_option("--out", o.out, "Model JSON path; the stage log goes next to it");
  tr->add_option("--seed", o.seed, "Pipeline seed (overrides pipeline.seed)");

  auto* ev = app.add_subcommand("eval", "Evaluate a trained model on the benchmark setups");
  ev->add_option("model", o.input, "Model JSON")->required();
  ev->add_option("--setup", o.setup, "all, ex_it, ex_oot or ex_ood");
  ev->add_option("--out", o.out, "Metrics JSON path");

  auto* sc = app.add_subcommand("scenario", "Run a benchmark sweep");
  common(sc);
  sc->add_option("id", o.scenario_id, "S1, S2, S3 or S4 (overrides scenario.id)");
  sc->add_option("--out", o.out, "Output directory");
  sc->add_option("--seed", o.seed, "First seed of the sweep (overrides scenario.seed_offset)");
  sc->add_option("--resume", o.resume, "Skip cells already in results.jsonl")->default_str("false");

  auto* rp = app.add_subcommand("report", "Emit plot data for one figure");
  rp->add_option("results", o.input, "results.jsonl")->required();
  rp->add_option("--figure", o.figure, "Figure id")->required();
  rp->add_option("--out", o.out, "CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*tr) return cmd_train(o);
    if (*ev) return cmd_eval(o);
    if (*sc) return cmd_scenario(o);
    if (*rp) return cmd_report(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
