#include "matshrink/experiments.hpp"

#include <fstream>
#include <map>
#include <system_error>

namespace matshrink {

long default_n_reps(ProblemDims dims)
{
    if (dims.n <= 10) return 100000;
    if (dims.n <= 100) return 10000;
    return 1000;
}

std::vector<std::string> figure_names()
{
    return {"fig1", "fig2", "fig3", "fig4"};
}

namespace {

SingularSpectrum leading(int p, std::vector<double> head)
{
    head.resize(static_cast<std::size_t>(p), 0.0);
    return SingularSpectrum(std::move(head));
}

std::vector<double> steps(double from, double to, double by)
{
    std::vector<double> out;
    for (int k = 0;; ++k) {
        const double v = from + k * by;
        if (v > to + 1e-9) break;
        out.push_back(v);
    }
    return out;
}

GeneralizedBayesSpec bayes(PriorSpec prior, const FigureOverrides& o)
{
    GeneralizedBayesSpec s;
    s.prior = std::move(prior);
    s.is.n_samples = o.is_samples.value_or(10000);
    s.is.seed = RngState{o.seed, 0};
    return s;
}

}  // namespace

std::vector<Panel> figure_panels(const std::string& figure, const FigureOverrides& o)
{
    std::vector<Panel> panels;
    if (figure == "fig1" || figure == "fig2") {
        const ProblemDims dims{5, 3};
        std::vector<SingularSpectrum> grid;
        for (double v : steps(0, 10, 1)) {
            grid.push_back(figure == "fig1" ? leading(3, {10.0, v, 0.0}) : leading(3, {v, 0.0, 0.0}));
        }
        panels.push_back({figure + "_svs", dims, bayes(SvsPrior{}, o), grid});
        panels.push_back({figure + "_stein", dims, bayes(SteinFrobeniusPrior{}, o), grid});
    } else if (figure == "fig3") {
        const ProblemDims dims{100, 20};
        std::vector<SingularSpectrum> grid;
        for (double s1 : steps(0, 50, 5)) {
            std::vector<double> head{s1};
            for (int i = 2; i <= 5; ++i) {
                head.push_back((6.0 - i) / 5.0 * s1);
            }
            grid.push_back(leading(dims.p, head));
        }
        panels.push_back({"fig3_em", dims, EfronMorrisSpec{}, grid});
        panels.push_back({"fig3_js", dims, JamesSteinSpec{}, grid});
    } else if (figure == "fig4") {
        for (int p : {10, 20, 30, 40, 50}) {
            const ProblemDims dims{100, p};
            std::vector<SingularSpectrum> grid;
            for (double s1 : steps(0, 30, 1)) grid.push_back(leading(p, {s1}));
            panels.push_back({"fig4_n100_p" + std::to_string(p), dims, EfronMorrisSpec{}, grid});
        }
        for (int p : {100, 200, 300, 400, 500}) {
            const ProblemDims dims{1000, p};
            std::vector<SingularSpectrum> grid;
            for (double s1 : steps(0, 100, 5)) grid.push_back(leading(p, {s1}));
            panels.push_back({"fig4_n1000_p" + std::to_string(p), dims, EfronMorrisSpec{}, grid});
        }
    } else {
        throw InvalidArgument("unknown figure '" + figure + "' (expected fig1, fig2, fig3 or fig4)");
    }
    if (o.panel_filter) {
        std::erase_if(panels, [&](const Panel& p) { return p.name.find(*o.panel_filter) == std::string::npos; });
        if (panels.empty()) {
            throw InvalidArgument("no panel of " + figure + " matches '" + *o.panel_filter + "'");
        }
    }
    return panels;
}

void validate(const ExperimentConfig& cfg)
{
    if (!cfg.preset) {
        if (cfg.estimators.empty()) {
            throw InvalidArgument("experiment config lists no estimators");
        }
        if (cfg.spectra.empty()) {
            throw InvalidArgument("experiment config has an empty spectra grid");
        }
        for (const auto& s : cfg.spectra) {
            if (s.size() != cfg.dims.p) {
                throw DimensionMismatch("spectrum of length " + std::to_string(s.size()) + " for p=" +
                                        std::to_string(cfg.dims.p));
            }
        }
        for (const auto& e : cfg.estimators) {
            validate(e, cfg.dims);
        }
    }
    if (cfg.n_reps && *cfg.n_reps < 2) {
        throw InvalidArgument("n_reps must be >= 2");
    }
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec || !std::filesystem::is_directory(cfg.output_dir)) {
        throw InvalidArgument("output_dir " + cfg.output_dir.string() + " is not a writable directory");
    }
    const auto probe = cfg.output_dir / ".matshrink_write_probe";
    {
        std::ofstream out(probe);
        if (!out) {
            throw InvalidArgument("output_dir " + cfg.output_dir.string() + " is not writable");
        }
    }
    std::filesystem::remove(probe, ec);
}

PanelResult run_panel(const Panel& panel, long n_reps, std::uint64_t seed, int workers,
                      const std::filesystem::path& output_dir, bool with_minimax)
{
    PanelResult res{panel, n_reps, {}, output_dir / (panel.name + ".csv")};
    res.rows = minimaxity_sweep(panel.spec, panel.dims, panel.grid, n_reps, RngState{seed, 0}, workers);
    std::filesystem::create_directories(output_dir);
    std::ofstream out(res.csv_path);
    if (!out) {
        throw Error("cannot write " + res.csv_path.string());
    }
    write_risk_csv(out, res.rows, with_minimax);
    return res;
}

std::vector<PanelResult> run_figure(const std::string& figure, const FigureOverrides& overrides, int workers,
                                    const std::filesystem::path& output_dir)
{
    std::vector<PanelResult> out;
    for (const Panel& panel : figure_panels(figure, overrides)) {
        const long reps = overrides.n_reps.value_or(default_n_reps(panel.dims));
        out.push_back(run_panel(panel, reps, overrides.seed, workers, output_dir));
    }
    return out;
}

std::vector<Panel> config_panels(const ExperimentConfig& cfg)
{
    if (cfg.preset) {
        FigureOverrides o;
        o.seed = cfg.seed;
        o.n_reps = cfg.n_reps;
        return figure_panels(*cfg.preset, o);
    }
    std::map<std::string, int> seen;
    for (const auto& e : cfg.estimators) ++seen[estimator_kind(e)];
    std::map<std::string, int> used;
    std::vector<Panel> panels;
    for (const auto& e : cfg.estimators) {
        const std::string kind = estimator_kind(e);
        std::string name = "sweep_" + kind;
        if (seen[kind] > 1) {
            name += "_" + std::to_string(++used[kind]);
        }
        panels.push_back({name, cfg.dims, e, cfg.spectra});
    }
    return panels;
}

}  // namespace matshrink
