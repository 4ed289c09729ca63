#include "matshrink/serialize.hpp"

#include <set>

namespace matshrink {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& what)
{
    if (!j.is_object()) {
        throw ParseError(what + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ParseError("unknown key '" + key + "' in " + what);
        }
    }
}

double get_number(const Json& j, const char* key, const std::string& what)
{
    const Json& v = j.at(key);
    if (!v.is_number()) {
        throw ParseError("'" + std::string(key) + "' in " + what + " must be a number");
    }
    return v.get<double>();
}

std::optional<double> opt_number(const Json& j, const char* key, const std::string& what)
{
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return get_number(j, key, what);
}

std::uint64_t get_uint(const Json& j, const char* key, const std::string& what)
{
    const Json& v = j.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        throw ParseError("'" + std::string(key) + "' in " + what + " must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

long get_long(const Json& j, const char* key, const std::string& what)
{
    const Json& v = j.at(key);
    if (!v.is_number_integer()) {
        throw ParseError("'" + std::string(key) + "' in " + what + " must be an integer");
    }
    return v.get<long>();
}

std::string get_string(const Json& j, const char* key, const std::string& what)
{
    const Json& v = j.at(key);
    if (!v.is_string()) {
        throw ParseError("'" + std::string(key) + "' in " + what + " must be a string");
    }
    return v.get<std::string>();
}

Json vector_to_json(const Vector& v)
{
    return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Json rng_to_json(RngState s)
{
    return Json{{"seed", s.seed}, {"stream", s.stream}};
}

}  // namespace

Json matrix_to_json(const Matrix& m)
{
    Json rows = Json::array();
    for (Eigen::Index a = 0; a < m.rows(); ++a) {
        Json row = Json::array();
        for (Eigen::Index i = 0; i < m.cols(); ++i) row.push_back(m(a, i));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j)
{
    if (!j.is_array() || j.empty() || !j.front().is_array() || j.front().empty()) {
        throw ParseError("matrix must be a nonempty array of nonempty rows");
    }
    const auto n = static_cast<Eigen::Index>(j.size());
    const auto p = static_cast<Eigen::Index>(j.front().size());
    Matrix m(n, p);
    for (Eigen::Index a = 0; a < n; ++a) {
        const Json& row = j[static_cast<std::size_t>(a)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != p) {
            throw ParseError("matrix rows must all have length " + std::to_string(p));
        }
        for (Eigen::Index i = 0; i < p; ++i) {
            const Json& v = row[static_cast<std::size_t>(i)];
            if (!v.is_number()) throw ParseError("matrix entries must be numbers");
            m(a, i) = v.get<double>();
        }
    }
    return m;
}

Json prior_to_json(const PriorSpec& prior)
{
    Json j{{"family", family_name(prior)}};
    if (const auto* t = std::get_if<MatrixTPrior>(&prior)) {
        if (t->alpha) j["alpha"] = *t->alpha;
        j["beta"] = t->beta;
    } else if (const auto* s = std::get_if<SteinFrobeniusPrior>(&prior)) {
        if (s->c) j["c"] = *s->c;
        j["beta"] = s->beta;
    } else if (const auto* c = std::get_if<ColumnwiseSteinPrior>(&prior)) {
        if (c->c) j["c"] = *c->c;
        j["beta"] = c->beta;
    }
    return j;
}

PriorSpec prior_from_json(const Json& j)
{
    const std::string what = "prior";
    reject_unknown(j, {"family", "alpha", "beta", "c"}, what);
    if (!j.contains("family")) throw ParseError("prior needs a 'family'");
    const std::string family = get_string(j, "family", what);
    const double beta = opt_number(j, "beta", what).value_or(0.0);
    auto forbid = [&](const char* key) {
        if (j.contains(key)) throw ParseError("prior family '" + family + "' takes no '" + key + "'");
    };
    PriorSpec out;
    if (family == "matrix_t") {
        forbid("c");
        out = MatrixTPrior{opt_number(j, "alpha", what), beta};
    } else if (family == "svs") {
        forbid("c");
        forbid("alpha");
        forbid("beta");
        out = SvsPrior{};
    } else if (family == "stein") {
        forbid("alpha");
        out = SteinFrobeniusPrior{opt_number(j, "c", what), beta};
    } else if (family == "columnwise") {
        forbid("alpha");
        out = ColumnwiseSteinPrior{opt_number(j, "c", what), beta};
    } else if (family == "flat") {
        forbid("c");
        forbid("alpha");
        forbid("beta");
        out = FlatPrior{};
    } else {
        throw ParseError("unknown prior family '" + family + "'");
    }
    try {
        validate(out);
    } catch (const InvalidArgument& e) {
        throw ParseError(e.what());
    }
    return out;
}

Json is_config_to_json(const ISConfig& cfg)
{
    return Json{{"n_samples", cfg.n_samples},
                {"seed", cfg.seed.seed},
                {"stream", cfg.seed.stream},
                {"ess_floor", cfg.ess_floor},
                {"force_importance_sampling", cfg.force_importance_sampling}};
}

ISConfig is_config_from_json(const Json& j)
{
    const std::string what = "is";
    reject_unknown(j, {"n_samples", "seed", "stream", "ess_floor", "force_importance_sampling"}, what);
    ISConfig cfg;
    if (j.contains("n_samples")) cfg.n_samples = get_long(j, "n_samples", what);
    if (j.contains("seed")) cfg.seed.seed = get_uint(j, "seed", what);
    if (j.contains("stream")) cfg.seed.stream = get_uint(j, "stream", what);
    if (j.contains("ess_floor")) cfg.ess_floor = get_number(j, "ess_floor", what);
    if (j.contains("force_importance_sampling")) {
        if (!j.at("force_importance_sampling").is_boolean()) {
            throw ParseError("'force_importance_sampling' must be a boolean");
        }
        cfg.force_importance_sampling = j.at("force_importance_sampling").get<bool>();
    }
    if (cfg.n_samples < 100) throw ParseError("'n_samples' must be >= 100");
    if (!(cfg.ess_floor > 0.0 && cfg.ess_floor <= 1.0)) throw ParseError("'ess_floor' must lie in (0, 1]");
    return cfg;
}

Json estimator_to_json(const EstimatorSpec& spec)
{
    Json j{{"kind", estimator_kind(spec)}};
    if (const auto* c = std::get_if<ColumnwiseJsSpec>(&spec)) {
        if (c->c) j["c"] = *c->c;
    } else if (const auto* g = std::get_if<GeneralizedShrinkageSpec>(&spec)) {
        j["c"] = g->c;
    } else if (const auto* b = std::get_if<GeneralizedBayesSpec>(&spec)) {
        j["prior"] = prior_to_json(b->prior);
        j["is"] = is_config_to_json(b->is);
    }
    return j;
}

EstimatorSpec estimator_from_json(const Json& j)
{
    const std::string what = "estimator";
    reject_unknown(j, {"kind", "c", "prior", "is"}, what);
    if (!j.contains("kind")) throw ParseError("estimator needs a 'kind'");
    const std::string kind = get_string(j, "kind", what);
    auto forbid = [&](const char* key) {
        if (j.contains(key)) throw ParseError("estimator kind '" + kind + "' takes no '" + key + "'");
    };
    if (kind != "gb") {
        forbid("prior");
        forbid("is");
    }
    if (kind == "mle" || kind == "em" || kind == "js") {
        forbid("c");
        if (kind == "mle") return MleSpec{};
        if (kind == "em") return EfronMorrisSpec{};
        return JamesSteinSpec{};
    }
    if (kind == "cjs") {
        const auto c = opt_number(j, "c", what);
        if (c && *c < 0.0) throw ParseError("'c' must be >= 0");
        return ColumnwiseJsSpec{c};
    }
    if (kind == "gshrink") {
        if (!j.contains("c")) throw ParseError("estimator kind 'gshrink' needs 'c'");
        const double c = get_number(j, "c", what);
        if (c < 0.0) throw ParseError("'c' must be >= 0");
        return GeneralizedShrinkageSpec{c};
    }
    if (kind == "gb") {
        forbid("c");
        GeneralizedBayesSpec s;
        if (j.contains("prior")) s.prior = prior_from_json(j.at("prior"));
        if (j.contains("is")) s.is = is_config_from_json(j.at("is"));
        return s;
    }
    throw ParseError("unknown estimator kind '" + kind + "'");
}

Json config_to_json(const ExperimentConfig& cfg)
{
    Json j{{"n", cfg.dims.n}, {"p", cfg.dims.p}, {"seed", cfg.seed}, {"output_dir", cfg.output_dir.string()},
           {"workers", cfg.workers}};
    if (cfg.preset) {
        j["preset"] = *cfg.preset;
    } else {
        Json specs = Json::array();
        for (const auto& e : cfg.estimators) specs.push_back(estimator_to_json(e));
        j["estimators"] = specs;
        Json spectra = Json::array();
        for (const auto& s : cfg.spectra) spectra.push_back(s.values());
        j["spectra"] = spectra;
    }
    if (cfg.n_reps) j["n_reps"] = *cfg.n_reps;
    return j;
}

ExperimentConfig config_from_json(const Json& j)
{
    const std::string what = "config";
    reject_unknown(j, {"n", "p", "estimators", "spectra", "preset", "n_reps", "seed", "output_dir", "workers"}, what);
    ExperimentConfig cfg;
    try {
        if (j.contains("preset")) {
            cfg.preset = get_string(j, "preset", what);
            if (j.contains("spectra") || j.contains("estimators")) {
                throw ParseError("config: give either 'preset' or 'estimators' + 'spectra', not both");
            }
            figure_panels(*cfg.preset);  // rejects unknown names
        } else {
            if (!j.contains("n") || !j.contains("p")) throw ParseError("config needs 'n' and 'p'");
            cfg.dims = ProblemDims(static_cast<int>(get_long(j, "n", what)), static_cast<int>(get_long(j, "p", what)));
            if (!j.contains("estimators") || !j.at("estimators").is_array()) {
                throw ParseError("config needs an 'estimators' array");
            }
            for (const auto& e : j.at("estimators")) cfg.estimators.push_back(estimator_from_json(e));
            if (!j.contains("spectra") || !j.at("spectra").is_array()) {
                throw ParseError("config needs a 'spectra' array");
            }
            for (const auto& s : j.at("spectra")) {
                if (!s.is_array()) throw ParseError("each spectrum must be an array of numbers");
                std::vector<double> v;
                for (const auto& x : s) {
                    if (!x.is_number()) throw ParseError("each spectrum must be an array of numbers");
                    v.push_back(x.get<double>());
                }
                cfg.spectra.emplace_back(std::move(v));
            }
        }
        if (j.contains("n_reps")) cfg.n_reps = get_long(j, "n_reps", what);
        if (j.contains("seed")) cfg.seed = get_uint(j, "seed", what);
        if (j.contains("output_dir")) cfg.output_dir = get_string(j, "output_dir", what);
        if (j.contains("workers")) cfg.workers = static_cast<int>(get_long(j, "workers", what));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw ParseError(std::string("config: ") + e.what());
    }
    if (cfg.workers < 1) throw ParseError("'workers' must be >= 1");
    return cfg;
}

Json diagnostics_to_json(const BayesDiagnostics& d)
{
    Json j{{"method", d.method}, {"n_samples", d.n_samples}, {"ess_fraction", d.ess_fraction},
           {"low_ess", d.low_ess}};
    j["ess"] = d.ess ? Json(*d.ess) : Json(nullptr);
    if (d.std_error.size() > 0) j["max_std_error"] = d.std_error.maxCoeff();
    return j;
}

Json risk_report_to_json(const RiskReport& r)
{
    Json j{{"estimator", r.estimator},
           {"mean_risk", matrix_to_json(r.mean_risk.matrix())},
           {"eigenvalues", vector_to_json(r.eigenvalues)},
           {"eig_std_errors", vector_to_json(r.eig_std_errors)},
           {"frobenius_risk", r.frobenius_risk},
           {"frobenius_se", r.frobenius_se},
           {"n_reps", r.n_reps},
           {"n_batches", r.n_batches},
           {"seed", rng_to_json(r.seed)}};
    if (r.min_ess_fraction) {
        j["min_ess_fraction"] = *r.min_ess_fraction;
        j["low_ess_count"] = r.low_ess_count;
    }
    return j;
}

Json sure_report_to_json(const SureReport& r)
{
    return Json{{"estimate", matrix_to_json(r.estimate.matrix())},
                {"divergence_method", divergence_method_name(r.divergence_method)}};
}

Json sure_check_to_json(const SureCheckReport& r)
{
    return Json{{"mean_sure", matrix_to_json(r.mean_sure.matrix())},
                {"mean_risk", matrix_to_json(r.mean_risk.matrix())},
                {"discrepancy", matrix_to_json(r.discrepancy)},
                {"std_error", matrix_to_json(r.std_error)},
                {"max_abs_discrepancy", r.max_abs_discrepancy},
                {"se_at_max", r.se_at_max},
                {"max_z", r.max_z},
                {"within_4se", r.within(4.0)},
                {"n_reps", r.n_reps},
                {"divergence_method", divergence_method_name(r.divergence_method)}};
}

Json superharmonic_report_to_json(const SuperharmonicReport& r)
{
    Json j{{"verdict", verdict_name(r.verdict)},
           {"points_tested", r.points_tested},
           {"sphere_tests", r.sphere_tests},
           {"max_laplacian_eigenvalue", r.max_laplacian_eigenvalue},
           {"laplacian_method", r.laplacian_method},
           {"non_finite_nodes", r.non_finite_nodes},
           {"assumptions", r.assumptions}};
    j["worst_point"] = r.worst_point ? matrix_to_json(*r.worst_point) : Json(nullptr);
    Json lap = Json::array();
    for (const auto& l : r.laplacian_results) {
        lap.push_back(Json{{"point", l.point_index},
                           {"max_eigenvalue", l.max_eigenvalue},
                           {"scale", l.scale},
                           {"violation", l.violation}});
    }
    j["laplacian"] = lap;
    Json sv = Json::array();
    for (const auto& v : r.sphere_violations) {
        sv.push_back(Json{{"point", v.point_index},
                          {"perturbation", v.perturbation_index},
                          {"x", matrix_to_json(v.x)},
                          {"rho", vector_to_json(v.rho)},
                          {"l_estimate", v.l_estimate},
                          {"f_value", v.f_value},
                          {"std_error", v.std_error}});
    }
    j["sphere_violations"] = sv;
    Json sk = Json::array();
    for (const auto& s : r.skipped) sk.push_back(Json{{"point", s.point_index}, {"reason", s.reason}});
    j["skipped"] = sk;
    return j;
}

}  // namespace matshrink
