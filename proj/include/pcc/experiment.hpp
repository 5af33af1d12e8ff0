#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pcc/batch.hpp"
#include "pcc/errors.hpp"
#include "pcc/inference.hpp"
#include "pcc/scenes.hpp"
#include "pcc/train.hpp"

// The ablation grid: {cycle subsets} x {masking on, off} x {overlap keeps}
// x {seeds}. Every cell trains from scratch on its own seeded dataset,
// tunes theta on a shared validation split, and reports test F1. Cells
// persist as one file each, so an interrupted grid resumes where it
// stopped instead of retraining finished cells.

namespace pcc {

struct ExperimentGrid {
  std::vector<std::string> cycle_sets = {"v1", "v0,v1,v2,v3"};
  std::vector<double> keeps = {1.0, 0.8, 0.6};
  int seeds = 5;
  TrainConfig base;          // everything but cycles, masking and seed
  DatasetConfig dataset;     // geometry; per-cell seeds overwrite scene.seed
  std::uint64_t train_scene_seed_base = 100;
  std::uint64_t train_seed_base = 1000;
  std::uint64_t val_seed = 901;
  std::uint64_t test_seed = 900;
  int val_scenes = 2;
  int test_scenes = 4;
};

inline void validate(const ExperimentGrid& grid) {
  if (grid.cycle_sets.empty()) throw ConfigError("experiment: no cycle sets");
  for (const std::string& s : grid.cycle_sets) parse_cycle_set(s);
  if (grid.keeps.empty()) throw ConfigError("experiment: no keep fractions");
  for (double keep : grid.keeps)
    if (!(keep > 0.0 && keep <= 1.0))
      throw ConfigError("experiment: keep fractions must be in (0, 1]");
  if (grid.seeds < 1) throw ConfigError("experiment: need at least one seed");
  if (grid.val_scenes < 1 || grid.test_scenes < 1)
    throw ConfigError("experiment: need validation and test scenes");
}

struct ExperimentRow {
  std::string cycles;
  bool masking = false;
  std::vector<double> mean_f1;  // one per keep, in grid order
  std::vector<double> std_f1;
};

struct ExperimentResult {
  std::vector<double> keeps;
  std::vector<ExperimentRow> rows;
};

namespace detail {

inline std::string keep_label(double keep) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d",
                static_cast<int>(std::lround(keep * 100.0)));
  return buf;
}

inline std::string cell_name(const std::string& cycles, bool masking,
                             double keep, int seed_index) {
  std::string cyc = cycles;
  for (char& ch : cyc)
    if (ch == ',') ch = '+';
  return "cyc-" + cyc + "_mask-" + (masking ? "on" : "off") + "_keep-" +
         keep_label(keep) + "_seed-" + std::to_string(seed_index);
}

// A finished cell is one line: "f1 <value>". Anything else is treated as
// an interrupted write and the cell reruns.
inline bool read_cell(const std::filesystem::path& path, double& f1) {
  std::ifstream in(path);
  if (!in) return false;
  std::string key;
  if (!(in >> key >> f1) || key != "f1") return false;
  return true;
}

inline void write_cell(const std::filesystem::path& path, double f1) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cell result: " + path.string());
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", f1);
  out << "f1 " << buf << "\n";
  if (!out) throw DataError("failed writing cell result: " + path.string());
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(xs.size() - 1))};
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentGrid& grid,
                                       const std::filesystem::path& out_dir,
                                       std::ostream& log) {
  validate(grid);
  validate(grid.base);
  const std::filesystem::path cells_dir = out_dir / "cells";
  std::filesystem::create_directories(cells_dir);

  // Validation and test splits are shared by every method at a given
  // keep; training data is per (keep, seed).
  std::map<double, std::pair<Dataset, Dataset>> eval_cache;
  auto eval_splits = [&](double keep) -> const std::pair<Dataset, Dataset>& {
    auto it = eval_cache.find(keep);
    if (it == eval_cache.end()) {
      DatasetConfig vc = grid.dataset;
      vc.scene.seed = grid.val_seed;
      vc.n_scenes = grid.val_scenes;
      DatasetConfig tc = grid.dataset;
      tc.scene.seed = grid.test_seed;
      tc.n_scenes = grid.test_scenes;
      Dataset val = generate_dataset(vc);
      Dataset test = generate_dataset(tc);
      if (keep < 1.0) {
        val = reduce_fov(val, keep);
        test = reduce_fov(test, keep);
      }
      it = eval_cache.emplace(keep, std::make_pair(std::move(val),
                                                   std::move(test))).first;
    }
    return it->second;
  };

  std::map<std::pair<double, int>, Dataset> train_cache;
  auto train_split = [&](double keep, int s) -> const Dataset& {
    const auto key = std::make_pair(keep, s);
    auto it = train_cache.find(key);
    if (it == train_cache.end()) {
      DatasetConfig tc = grid.dataset;
      tc.scene.seed = grid.train_scene_seed_base + static_cast<std::uint64_t>(s);
      Dataset train = generate_dataset(tc);
      if (keep < 1.0) train = reduce_fov(train, keep);
      it = train_cache.emplace(key, std::move(train)).first;
    }
    return it->second;
  };

  ExperimentResult result;
  result.keeps = grid.keeps;
  for (const std::string& cycles : grid.cycle_sets) {
    for (bool masking : {false, true}) {
      ExperimentRow row;
      row.cycles = cycles;
      row.masking = masking;
      for (double keep : grid.keeps) {
        std::vector<double> f1s;
        for (int s = 1; s <= grid.seeds; ++s) {
          const std::string name = detail::cell_name(cycles, masking, keep, s);
          const std::filesystem::path cell_path = cells_dir / (name + ".txt");
          double f1 = 0.0;
          if (detail::read_cell(cell_path, f1)) {
            log << name << ": cached " << f1 << "\n";
          } else {
            TrainConfig cfg = grid.base;
            cfg.cycles = parse_cycle_set(cycles);
            cfg.masking = masking;
            cfg.seed = grid.train_seed_base + static_cast<std::uint64_t>(s);
            const TrainResult trained = train(train_split(keep, s), cfg);
            const auto& [val, test] = eval_splits(keep);
            const double theta = tune_theta(trained.encoder, val, {});
            f1 = evaluate(trained.encoder, test, theta).f1;
            detail::write_cell(cell_path, f1);
            log << name << ": f1 " << f1 << "\n";
          }
          f1s.push_back(f1);
        }
        const auto [mean, sd] = detail::mean_std(f1s);
        row.mean_f1.push_back(mean);
        row.std_f1.push_back(sd);
      }
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

// Wide CSV, one row per method, overlap columns in grid order (full
// training overlap first, then the reduced columns).
inline void write_experiment_csv(const ExperimentResult& result,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "cycles,masking";
  for (double keep : result.keeps) {
    const std::string label = detail::keep_label(keep);
    out << ",keep" << label << "_mean,keep" << label << "_std";
  }
  out << "\n";
  for (const auto& row : result.rows) {
    out << row.cycles << ',' << (row.masking ? "on" : "off");
    for (std::size_t k = 0; k < result.keeps.size(); ++k)
      out << ',' << detail::fmt6(row.mean_f1[k]) << ','
          << detail::fmt6(row.std_f1[k]);
    out << "\n";
  }
  if (!out) throw DataError("failed writing: " + path);
}

// Human-readable table, mean (std) per overlap column.
inline std::string format_experiment_table(const ExperimentResult& result) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-16s %-8s", "cycles", "masking");
  out << buf;
  for (double keep : result.keeps) {
    char label[24];
    std::snprintf(label, sizeof label, "keep %.2f", keep);
    std::snprintf(buf, sizeof buf, "  %-17s", label);
    out << buf;
  }
  out << "\n";
  for (const auto& row : result.rows) {
    std::snprintf(buf, sizeof buf, "%-16s %-8s", row.cycles.c_str(),
                  row.masking ? "on" : "off");
    out << buf;
    for (std::size_t k = 0; k < result.keeps.size(); ++k) {
      std::snprintf(buf, sizeof buf, "  %.4f (%.4f)   ", row.mean_f1[k],
                    row.std_f1[k]);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace pcc
