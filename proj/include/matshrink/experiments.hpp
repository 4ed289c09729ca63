#pragma once

// Risk-eigenvalue experiments over grids of singular-value spectra, including
// the preset grids used for the four published figures.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "matshrink/estimators.hpp"
#include "matshrink/risk.hpp"

namespace matshrink {

// One CSV worth of work: an estimator swept over a spectrum grid.
struct Panel {
    std::string name;  // CSV basename, e.g. "fig1_svs"
    ProblemDims dims;
    EstimatorSpec spec;
    std::vector<SingularSpectrum> grid;
};

// 1e5 for n <= 10, 1e4 for n <= 100, 1e3 beyond.
long default_n_reps(ProblemDims dims);

struct FigureOverrides {
    std::optional<long> n_reps;
    std::optional<long> is_samples;
    std::uint64_t seed = 0;
    // keep only panels whose name contains this string
    std::optional<std::string> panel_filter;
};

std::vector<std::string> figure_names();

// Panels of preset "fig1" .. "fig4". Throws InvalidArgument for other names.
std::vector<Panel> figure_panels(const std::string& figure, const FigureOverrides& overrides = {});

struct ExperimentConfig {
    ProblemDims dims{5, 3};
    std::vector<EstimatorSpec> estimators;
    std::vector<SingularSpectrum> spectra;
    std::optional<std::string> preset;  // figure name; replaces dims/estimators/spectra
    std::optional<long> n_reps;
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = ".";
    int workers = 1;
};

// Checks the invariants (nonempty grid and estimator list, spectra of length
// p, output_dir creatable and writable).
void validate(const ExperimentConfig& cfg);

struct PanelResult {
    Panel panel;
    long n_reps = 0;
    std::vector<SweepRow> rows;
    std::filesystem::path csv_path;
};

// Runs every grid point of the panel with mc_risk (same seed for all points)
// and writes <output_dir>/<name>.csv. with_minimax adds the minimax_pass
// column.
PanelResult run_panel(const Panel& panel, long n_reps, std::uint64_t seed, int workers,
                      const std::filesystem::path& output_dir, bool with_minimax = false);

std::vector<PanelResult> run_figure(const std::string& figure, const FigureOverrides& overrides, int workers,
                                    const std::filesystem::path& output_dir);

// Panels described by a config: its preset, or one panel per estimator named
// "sweep_<kind>" (with an index suffix when kinds repeat).
std::vector<Panel> config_panels(const ExperimentConfig& cfg);

}  // namespace matshrink
