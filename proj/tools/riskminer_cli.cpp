// riskminer command-line front end.
//
// Exit codes:
//   0  success
//   2  usage error (bad flags, unknown subcommand)
//   3  configuration error
//   4  data, I/O or checkpoint error
//   5  expression error (parse, arity, typing, evaluation)
//   6  other domain error (empty overlap, empty pool, universe too small, ...)
//   1  unexpected internal error
//
// Errors print one line to stderr:
//   error kind=<Kind> message="<text>"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "riskminer/backtest.hpp"
#include "riskminer/config.hpp"
#include "riskminer/errors.hpp"
#include "riskminer/expression.hpp"
#include "riskminer/metrics.hpp"
#include "riskminer/pipeline.hpp"
#include "riskminer/pool.hpp"

namespace fs = std::filesystem;
using namespace riskminer;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

AppConfig resolve_config(const Common& common) {
  AppConfig cfg = common.config_path.empty() ? AppConfig{} : load_config(common.config_path);
  for (const auto& o : common.overrides) apply_override(cfg, o);
  return cfg;
}

fs::path output_dir(const AppConfig& cfg) {
  fs::path dir = cfg.output.dir;
  if (dir.is_relative()) {
    const char* root = std::getenv("RISKMINER_OUTPUT_ROOT");
    if (root && *root) dir = fs::path(root) / dir;
  }
  fs::create_directories(dir);
  return dir;
}

void add_common(CLI::App* cmd, Common& common) {
  cmd->add_option("-c,--config", common.config_path, "Config file")->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", common.overrides, "Override as section.key=value (repeatable)");
}

AlphaPool load_pool(const std::string& path, const AppConfig& cfg,
                    const std::shared_ptr<const Panel>& panel, const SplitSpec& split) {
  return AlphaPool::load(path, panel, training_target(*panel, split, cfg.run.horizon), cfg.run.fit);
}

std::string quote(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out;
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << "error kind=" << kind << " message=\"" << quote(message) << "\"\n";
  return code;
}

int exit_code_for(const Error& e) {
  const std::string& k = e.kind();
  if (k == "ConfigError") return 3;
  if (k == "IoError" || k == "SchemaError" || k == "DataError" || k == "CheckpointError") return 4;
  if (k == "ParseError" || k == "ArityError" || k == "InvalidExpression" ||
      k == "EvaluationError") {
    return 5;
  }
  if (k == "ArgumentError") return 3;
  return 6;
}

int cmd_gen_data(const AppConfig& cfg) {
  const auto panel = make_panel(cfg.data);
  const fs::path out = output_dir(cfg) / "panel.csv";
  write_csv(*panel, out);
  std::cout << "wrote " << out.string() << " (" << panel->n_stocks() << " stocks, "
            << panel->n_days() << " days)\n";
  return 0;
}

int cmd_mine(const AppConfig& cfg, bool resume, bool quiet) {
  const auto panel = make_panel(cfg.data);
  const SplitSpec split = make_split(cfg.split, *panel);
  const fs::path dir = output_dir(cfg);
  {
    std::ofstream out(dir / "config.txt");
    out << dump_config(cfg);
  }
  Miner miner(panel, split, cfg.run);
  if (resume && fs::exists(dir / "state.txt")) miner.load_checkpoint(dir);
  miner.save_checkpoint(dir);
  miner.run(dir, [&](const IterationReport& r) {
    if (quiet) return;
    std::cout << "iteration " << r.iteration << " train_ic=" << r.train_ic
              << " valid_ic=" << r.valid_ic << " pool=" << r.pool_size << " q=" << r.quantile
              << '\n';
  });
  std::cout << "pool " << (dir / "pool.txt").string() << "\nreport "
            << (dir / "report.csv").string() << '\n';
  return 0;
}

int cmd_eval(const AppConfig& cfg, const std::string& pool_path, const std::string& split_name) {
  const auto panel = make_panel(cfg.data);
  const SplitSpec split = make_split(cfg.split, *panel);
  const DateRange range = split.by_name(split_name);
  const AlphaPool pool = load_pool(pool_path, cfg, panel, split);
  if (pool.empty()) throw EmptyPool("pool checkpoint has no alphas");
  const Matrix target = restrict_target(panel->forward_returns(cfg.run.horizon), range,
                                        cfg.run.horizon);
  const MetricReport report = compute_ic(pool.composite(range), target, range,
                                         panel->tradable_mask());
  const fs::path dir = output_dir(cfg);
  {
    std::ofstream out(dir / ("metrics_" + split_name + ".csv"));
    if (!out) throw IoError("cannot write metrics file");
    char line[256];
    std::snprintf(line, sizeof line, "%s,%.17g,%.17g,%.17g,%.17g,%zu\n", split_name.c_str(),
                  report.ic, report.icir, report.rank_ic, report.rank_icir, report.per_day.size());
    out << "split,ic,icir,rank_ic,rank_icir,days\n" << line;
  }
  write_metric_csv(report, panel->dates(), dir / ("daily_" + split_name + ".csv"));
  std::cout << metric_summary_json(report) << '\n';
  return 0;
}

int cmd_sweep(const AppConfig& cfg, const std::vector<double>& levels) {
  const auto panel = make_panel(cfg.data);
  const SplitSpec split = make_split(cfg.split, *panel);
  const auto rows = quantile_sweep(panel, split, cfg.run, levels);
  const fs::path out = output_dir(cfg) / "sweep.csv";
  write_sweep_csv(rows, out);
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

int cmd_backtest(AppConfig cfg, const std::string& pool_path, const std::string& split_name,
                 std::size_t k, bool grid) {
  const auto panel = make_panel(cfg.data);
  const SplitSpec split = make_split(cfg.split, *panel);
  const AlphaPool pool = load_pool(pool_path, cfg, panel, split);
  if (pool.empty()) throw EmptyPool("pool checkpoint has no alphas");
  const fs::path dir = output_dir(cfg);
  if (k > 0) cfg.backtest.k = k;
  if (grid) {
    const auto points = grid_search_k(pool.composite(split.valid), *panel, cfg.backtest,
                                      split.valid, cfg.k_grid);
    std::ofstream out(dir / "k_grid.csv");
    out << "k,cumulative_return\n";
    for (const auto& p : points) {
      char line[64];
      std::snprintf(line, sizeof line, "%zu,%.17g\n", p.k, p.cumulative_return);
      out << line;
    }
    cfg.backtest.k = best_k(points);
  }
  const DateRange range = split.by_name(split_name);
  const EquityCurve curve = run_backtest(pool.composite(range), *panel, cfg.backtest, range);
  write_equity_csv(curve, dir / "equity.csv");
  write_holdings_csv(curve, *panel, dir / "holdings.csv");
  std::cout << "k=" << cfg.backtest.k << " cumulative_return=" << cumulative_return(curve) << '\n';
  return 0;
}

int cmd_report(const AppConfig& cfg, bool dump, const std::string& pool_path) {
  if (dump) {
    std::cout << dump_config(cfg);
    return 0;
  }
  if (pool_path.empty()) throw ArgumentError("report needs --pool or --dump-config");
  const auto panel = make_panel(cfg.data);
  const SplitSpec split = make_split(cfg.split, *panel);
  const AlphaPool pool = load_pool(pool_path, cfg, panel, split);
  std::cout << "weight\texpression\n";
  for (const auto& e : pool.entries()) {
    char w[32];
    std::snprintf(w, sizeof w, "%+.6f", e.weight);
    std::cout << w << '\t' << unparse(e.expression) << '\n';
  }
  std::cout << "train_ic\t" << pool.composite_ic() << "\nvalid_ic\t"
            << composite_ic_on(pool, split.valid, cfg.run.horizon) << "\ntest_ic\t"
            << composite_ic_on(pool, split.test, cfg.run.horizon) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Formulaic alpha mining with tree search and a risk-seeking policy"};
  app.require_subcommand(1);

  Common common;
  bool resume = false;
  bool quiet = false;
  std::string pool_path;
  std::string split_name = "test";
  std::size_t k = 0;
  bool grid = false;
  bool dump = false;
  std::vector<double> levels{0.6, 0.85, 0.95};

  auto* gen = app.add_subcommand("gen-data", "Write the configured panel (synthetic or loaded) as CSV");
  add_common(gen, common);

  auto* mine = app.add_subcommand("mine", "Run the mining loop and checkpoint the pool");
  add_common(mine, common);
  mine->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");
  mine->add_flag("-q,--quiet", quiet, "No per-iteration progress");

  auto* eval = app.add_subcommand("eval", "IC, ICIR, RankIC and RankICIR of a pool on a split");
  add_common(eval, common);
  eval->add_option("--pool", pool_path, "Pool checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split_name, "train, valid or test")
      ->check(CLI::IsMember({"train", "valid", "test"}));

  auto* sweep = app.add_subcommand("sweep", "One run per quantile level");
  add_common(sweep, common);
  sweep->add_option("--levels", levels, "Quantile levels in (0, 1)")->delimiter(',');

  auto* bt = app.add_subcommand("backtest", "Top-k equal-weight backtest of a pool's composite");
  add_common(bt, common);
  bt->add_option("--pool", pool_path, "Pool checkpoint")->required()->check(CLI::ExistingFile);
  bt->add_option("--split", split_name, "train, valid or test")
      ->check(CLI::IsMember({"train", "valid", "test"}));
  bt->add_option("--k", k, "Portfolio size (overrides backtest.k)");
  bt->add_flag("--grid", grid, "Pick k on the validation split from backtest.k_grid");

  auto* report = app.add_subcommand("report", "Print a pool or the resolved configuration");
  add_common(report, common);
  report->add_flag("--dump-config", dump, "Print every config key with its value");
  report->add_option("--pool", pool_path, "Pool checkpoint")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    return fail("UsageError", e.what(), 2);
  }

  try {
    const AppConfig cfg = resolve_config(common);
    if (gen->parsed()) return cmd_gen_data(cfg);
    if (mine->parsed()) return cmd_mine(cfg, resume, quiet);
    if (eval->parsed()) return cmd_eval(cfg, pool_path, split_name);
    if (sweep->parsed()) return cmd_sweep(cfg, levels);
    if (bt->parsed()) return cmd_backtest(cfg, pool_path, split_name, k, grid);
    if (report->parsed()) return cmd_report(cfg, dump, pool_path);
  } catch (const Error& e) {
    return fail(e.kind(), e.what(), exit_code_for(e));
  } catch (const fs::filesystem_error& e) {
    return fail("IoError", e.what(), 4);
  } catch (const std::exception& e) {
    return fail("InternalError", e.what(), 1);
  }
  return 0;
}
