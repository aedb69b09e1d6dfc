#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "riskminer/backtest.hpp"
#include "riskminer/panel.hpp"
#include "riskminer/pipeline.hpp"

namespace riskminer {

struct DataConfig {
  std::string csv;  // panel file; empty selects the synthetic generator
  std::size_t synthetic_stocks = 50;
  std::size_t synthetic_days = 500;
  std::uint64_t synthetic_seed = 7;
  std::string planted;  // expression planted into the synthetic 5-day returns
  double planted_weight = 0.8;
};

struct SplitConfig {
  // Date boundaries win over fractions when both are set.
  std::string train_end;
  std::string valid_end;
  double train_fraction = 0.6;
  double valid_fraction = 0.2;
};

struct OutputConfig {
  std::string dir = "run";  // relative paths resolve under the output root
};

/// Everything a command needs, read from one sectioned key = value file:
///
///   # comment
///   [data]
///   csv = prices.csv
///   [run]
///   pool_size = 100
///   vocabulary = close, vwap, 5, Mean, Div
///
/// Sections: data, split, run, backtest, output. Unknown sections or keys
/// are errors.
struct AppConfig {
  DataConfig data;
  SplitConfig split;
  RunConfig run;
  StrategyConfig backtest;
  std::vector<std::size_t> k_grid{10, 20, 30, 40, 50, 60};
  OutputConfig output;
};

/// Parses config text; `source` names it in error messages.
AppConfig parse_config(std::string_view text, const std::string& source = "<config>");
AppConfig load_config(const std::filesystem::path& path);

/// Applies "section.key=value". Throws ConfigError on an unknown key or a bad value.
void apply_override(AppConfig& config, std::string_view assignment);

/// Sets one key; throws ConfigError naming `section.key`.
void set_config_value(AppConfig& config, const std::string& section, const std::string& key,
                      const std::string& value);

/// Every key with its current value, in a form parse_config reads back to
/// an equal configuration.
std::string dump_config(const AppConfig& config);

/// Loads or generates the panel described by `data`.
std::shared_ptr<const Panel> make_panel(const DataConfig& data);

SplitSpec make_split(const SplitConfig& split, const Panel& panel);

}  // namespace riskminer
