#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "matshrink/experiments.hpp"
#include "matshrink/io.hpp"
#include "matshrink/parallel.hpp"
#include "matshrink/serialize.hpp"
#include "matshrink/superharmonic.hpp"

namespace matshrink {

namespace {

namespace fs = std::filesystem;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<long> reps;
    int workers = default_workers();
    std::optional<std::string> out;
};

// Inline JSON, or @path to read it from a file.
Json load_json_arg(const std::string& arg)
{
    std::string text = arg;
    if (!arg.empty() && arg.front() == '@') {
        std::ifstream in(arg.substr(1));
        if (!in) throw ParseError("cannot open " + arg.substr(1));
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
}

std::vector<double> parse_list(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ParseError("not a number in list: '" + tok + "'");
        }
    }
    if (out.empty()) throw ParseError("empty list");
    return out;
}

void emit_json(const Json& j, const Globals& g, std::ostream& out)
{
    if (g.out) {
        std::ofstream f(*g.out);
        if (!f) throw Error("cannot write " + *g.out);
        f << j.dump(2) << '\n';
    } else {
        out << j.dump(2) << '\n';
    }
}

// Mean matrix from --mean FILE or from --spectrum with --n/--p.
MeanMatrix mean_from_args(const std::optional<std::string>& file, const std::optional<std::string>& spectrum,
                          std::optional<int> n, std::optional<int> p)
{
    if (file && spectrum) throw ParseError("give either --mean or --spectrum, not both");
    if (file) return MeanMatrix(read_matrix_file(*file));
    if (!spectrum || !n) throw ParseError("need --mean FILE, or --spectrum with --n");
    SingularSpectrum sigma(parse_list(*spectrum));
    const int pp = p.value_or(sigma.size());
    return embed_spectrum(ProblemDims(*n, pp), sigma);
}

void apply_seed(EstimatorSpec& spec, const Globals& g)
{
    if (auto* gb = std::get_if<GeneralizedBayesSpec>(&spec); gb && g.seed) {
        gb->is.seed.seed = *g.seed;
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Shrinkage estimation of a normal mean matrix under matrix quadratic loss", "matshrink"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "base random seed");
    app.add_option("--reps", g.reps, "Monte Carlo replicates")->check(CLI::PositiveNumber);
    app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "output file (estimate, risk, certify, sure-check) or directory (figure, sweep)");

    // estimate
    auto* est = app.add_subcommand("estimate", "apply an estimator to a matrix file");
    std::string est_input, est_spec;
    est->add_option("--input", est_input, "matrix file")->required();
    est->add_option("--spec", est_spec, "estimator JSON or @file")->required();

    // risk
    auto* risk = app.add_subcommand("risk", "Monte Carlo matrix quadratic risk at one mean");
    std::string risk_spec;
    std::optional<std::string> risk_mean, risk_spectrum;
    std::optional<int> risk_n, risk_p;
    risk->add_option("--spec", risk_spec, "estimator JSON or @file")->required();
    risk->add_option("--mean", risk_mean, "mean matrix file");
    risk->add_option("--spectrum", risk_spectrum, "comma-separated singular values (with --n)");
    risk->add_option("--n", risk_n, "rows");
    risk->add_option("--p", risk_p, "columns");

    // figure
    auto* fig = app.add_subcommand("figure", "reproduce a figure's risk-eigenvalue CSVs");
    std::string fig_name;
    std::optional<std::string> fig_panel;
    std::optional<long> fig_is;
    fig->add_option("name", fig_name, "fig1, fig2, fig3 or fig4")->required();
    fig->add_option("--panel", fig_panel, "only panels whose name contains this");
    fig->add_option("--is-samples", fig_is, "importance samples per Bayes estimate");

    // certify
    auto* cert = app.add_subcommand("certify", "check matrix superharmonicity of a prior");
    std::string cert_prior;
    int cert_n = 0, cert_p = 0, cert_per_scale = 5, cert_nodes = 20000;
    bool cert_fd = false;
    std::optional<std::string> cert_points;
    cert->add_option("--prior", cert_prior, "prior JSON or @file")->required();
    cert->add_option("--n", cert_n, "rows")->required()->check(CLI::PositiveNumber);
    cert->add_option("--p", cert_p, "columns")->required()->check(CLI::PositiveNumber);
    cert->add_option("--per-scale", cert_per_scale, "random test points per scale")->check(CLI::NonNegativeNumber);
    cert->add_option("--nodes", cert_nodes, "sphere node pairs per average")->check(CLI::Range(2, 1 << 30));
    cert->add_option("--points", cert_points, "JSON array of test matrices (or @file) instead of the defaults");
    cert->add_flag("--fd", cert_fd, "finite-difference Laplacian instead of the closed form");

    // sure-check
    auto* sc = app.add_subcommand("sure-check", "compare averaged SURE with Monte Carlo risk");
    std::string sc_spec;
    std::optional<std::string> sc_mean, sc_spectrum;
    std::optional<int> sc_n, sc_p;
    sc->add_option("--spec", sc_spec, "estimator JSON or @file")->required();
    sc->add_option("--mean", sc_mean, "mean matrix file");
    sc->add_option("--spectrum", sc_spectrum, "comma-separated singular values (with --n)");
    sc->add_option("--n", sc_n, "rows");
    sc->add_option("--p", sc_p, "columns");

    // sweep
    auto* sw = app.add_subcommand("sweep", "minimaxity sweep from an experiment config");
    std::string sw_config;
    sw->add_option("--config", sw_config, "ExperimentConfig JSON or @file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 1;
    }

    try {
        if (*est) {
            EstimatorSpec spec = estimator_from_json(load_json_arg(est_spec));
            apply_seed(spec, g);
            if (auto* gb = std::get_if<GeneralizedBayesSpec>(&spec)) gb->is.workers = g.workers;
            const EstimateResult r = estimate(spec, Observation(read_matrix_file(est_input)));
            if (r.diagnostics) {
                err << "diagnostics: " << diagnostics_to_json(*r.diagnostics).dump() << '\n';
                if (r.diagnostics->low_ess) err << "warning: effective sample size below floor\n";
            }
            if (g.out) {
                write_matrix_file(*g.out, r.estimate.matrix());
            } else {
                write_matrix(out, r.estimate.matrix());
            }
            return 0;
        }
        if (*risk) {
            EstimatorSpec spec = estimator_from_json(load_json_arg(risk_spec));
            apply_seed(spec, g);
            const MeanMatrix m = mean_from_args(risk_mean, risk_spectrum, risk_n, risk_p);
            const long reps = g.reps.value_or(default_n_reps(m.dims()));
            const RiskReport rep = mc_risk(spec, m, reps, RngState{g.seed.value_or(0), 0}, g.workers);
            emit_json(risk_report_to_json(rep), g, out);
            return 0;
        }
        if (*fig) {
            FigureOverrides o;
            o.n_reps = g.reps;
            o.is_samples = fig_is;
            o.seed = g.seed.value_or(0);
            o.panel_filter = fig_panel;
            const fs::path dir = g.out.value_or(".");
            for (const PanelResult& pr : run_figure(fig_name, o, g.workers, dir)) {
                out << pr.panel.name << ": " << pr.rows.size() << " points, n_reps=" << pr.n_reps << " -> "
                    << pr.csv_path.string() << '\n';
                for (const auto& row : pr.rows) {
                    if (row.report.min_ess_fraction && row.report.low_ess_count > 0) {
                        err << "warning: " << pr.panel.name << ": " << row.report.low_ess_count
                            << " replicates below the ESS floor (min fraction " << *row.report.min_ess_fraction
                            << ")\n";
                    }
                }
            }
            return 0;
        }
        if (*cert) {
            const PriorSpec prior = prior_from_json(load_json_arg(cert_prior));
            const ProblemDims dims(cert_n, cert_p);
            const std::uint64_t seed = g.seed.value_or(0);
            std::vector<MeanMatrix> points;
            if (cert_points) {
                const Json arr = load_json_arg(*cert_points);
                if (!arr.is_array() || arr.empty()) throw ParseError("--points must be a nonempty JSON array");
                for (const auto& m : arr) {
                    MeanMatrix mm(matrix_from_json(m));
                    if (!(mm.dims() == dims)) throw ParseError("--points matrices must be n x p");
                    points.push_back(std::move(mm));
                }
            } else {
                points = default_test_points(dims, RngState{seed, 1}, cert_per_scale);
            }
            CertifyOptions opt;
            opt.use_closed_form = !cert_fd;
            opt.workers = g.workers;
            const SuperharmonicReport rep =
                certify(prior, points, default_perturbations(dims.p, RngState{seed, 2}, cert_nodes), opt,
                        RngState{seed, 3});
            Json j = superharmonic_report_to_json(rep);
            j["prior"] = prior_to_json(prior);
            j["claimed_matrix_superharmonic"] = claimed_matrix_superharmonic(prior, dims);
            emit_json(j, g, out);
            switch (rep.verdict) {
            case Verdict::certified_nsd:
                return 0;
            case Verdict::violation_found:
                return 2;
            case Verdict::inconclusive:
                return 3;
            }
            return 3;
        }
        if (*sc) {
            const EstimatorSpec spec = estimator_from_json(load_json_arg(sc_spec));
            if (is_bayes(spec)) throw Unsupported("Unsupported: SURE is not available for generalized Bayes estimators");
            const MeanMatrix m = mean_from_args(sc_mean, sc_spectrum, sc_n, sc_p);
            const long reps = g.reps.value_or(default_n_reps(m.dims()));
            const SureCheckReport rep =
                sure_unbiasedness_check(spec, m, reps, RngState{g.seed.value_or(0), 0}, g.workers);
            Json j = sure_check_to_json(rep);
            j["estimator"] = estimator_to_json(spec);
            emit_json(j, g, out);
            return 0;
        }
        if (*sw) {
            ExperimentConfig cfg = config_from_json(load_json_arg(sw_config));
            if (g.seed) cfg.seed = *g.seed;
            if (g.reps) cfg.n_reps = *g.reps;
            if (g.out) cfg.output_dir = *g.out;
            if (app.get_option("--workers")->count() > 0) cfg.workers = g.workers;
            validate(cfg);
            for (const Panel& panel : config_panels(cfg)) {
                const long reps = cfg.n_reps.value_or(default_n_reps(panel.dims));
                const PanelResult pr = run_panel(panel, reps, cfg.seed, cfg.workers, cfg.output_dir, true);
                long fails = 0;
                for (const auto& row : pr.rows) fails += row.minimax_pass ? 0 : 1;
                out << pr.panel.name << ": " << pr.rows.size() << " points, " << fails
                    << " above n + 4 SE -> " << pr.csv_path.string() << '\n';
            }
            return 0;
        }
    } catch (const Unsupported& e) {
        const std::string msg = e.what();
        err << (msg.rfind("Unsupported", 0) == 0 ? "" : "Unsupported: ") << msg << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace matshrink
