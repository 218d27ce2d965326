#include "nhclt/experiment.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "nhclt/altsub.hpp"
#include "nhclt/decomposition.hpp"
#include "nhclt/inventory.hpp"
#include "nhclt/kernel_io.hpp"
#include "nhclt/montecarlo.hpp"
#include "nhclt/reference_models.hpp"
#include "nhclt/rng.hpp"

namespace nhclt {

namespace {

using json = nlohmann::json;

constexpr double kAltSubLimit = 0.5857864376269049;  // 2 - sqrt 2
constexpr std::size_t kMaxGridStates = 4096;

// Reads one JSON object, applies defaults, and records every violation.
class Fields {
public:
    Fields(const json& src, std::string where, std::vector<std::string>& errors)
        : src_(src), where_(std::move(where)), errors_(errors), resolved_(json::object()) {
        if (!src_.is_object()) {
            fail("", "must be a JSON object");
            ok_ = false;
        }
    }

    bool has(const std::string& key) const { return ok_ && src_.contains(key); }

    double real(const std::string& key, std::optional<double> def,
                std::function<bool(double)> valid = nullptr, const char* rule = nullptr) {
        seen_.insert(key);
        if (!has(key)) {
            if (!def) return missing(key), std::numeric_limits<double>::quiet_NaN();
            resolved_[key] = *def;
            return *def;
        }
        const json& v = src_.at(key);
        if (!v.is_number()) return fail(key, "must be a number"), std::numeric_limits<double>::quiet_NaN();
        double x = v.get<double>();
        if (!std::isfinite(x) || (valid && !valid(x))) fail(key, rule ? rule : "out of range");
        resolved_[key] = v;
        return x;
    }

    std::uint64_t integer(const std::string& key, std::optional<std::uint64_t> def, std::uint64_t min = 0,
                          std::uint64_t max = std::numeric_limits<std::uint64_t>::max()) {
        seen_.insert(key);
        if (!has(key)) {
            if (!def) return missing(key), 0;
            resolved_[key] = *def;
            return *def;
        }
        const json& v = src_.at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
            return fail(key, "must be a non-negative integer"), 0;
        std::uint64_t x = v.get<std::uint64_t>();
        if (x < min || x > max)
            fail(key, "must be in [" + std::to_string(min) + ", " + std::to_string(max) + "]");
        resolved_[key] = x;
        return x;
    }

    std::vector<std::size_t> int_list(const std::string& key, std::optional<std::vector<std::size_t>> def,
                                      std::size_t min = 1) {
        seen_.insert(key);
        if (!has(key)) {
            if (!def) return missing(key), std::vector<std::size_t>{};
            resolved_[key] = *def;
            return *def;
        }
        const json& v = src_.at(key);
        std::vector<std::size_t> out;
        if (!v.is_array() || v.empty()) return fail(key, "must be a nonempty array of integers"), out;
        for (const auto& e : v) {
            if (!e.is_number_unsigned() || e.get<std::size_t>() < min)
                return fail(key, "entries must be integers >= " + std::to_string(min)), std::vector<std::size_t>{};
            out.push_back(e.get<std::size_t>());
        }
        resolved_[key] = out;
        return out;
    }

    std::vector<double> real_list(const std::string& key, std::optional<std::vector<double>> def) {
        seen_.insert(key);
        if (!has(key)) {
            if (!def) return missing(key), std::vector<double>{};
            resolved_[key] = *def;
            return *def;
        }
        const json& v = src_.at(key);
        std::vector<double> out;
        if (!v.is_array()) return fail(key, "must be an array of numbers"), out;
        for (const auto& e : v) {
            if (!e.is_number() || !std::isfinite(e.get<double>()))
                return fail(key, "entries must be finite numbers"), std::vector<double>{};
            out.push_back(e.get<double>());
        }
        resolved_[key] = out;
        return out;
    }

    std::string text(const std::string& key, std::optional<std::string> def, const std::vector<std::string>& allowed) {
        seen_.insert(key);
        if (!has(key)) {
            if (!def) return missing(key), std::string{};
            resolved_[key] = *def;
            return *def;
        }
        const json& v = src_.at(key);
        if (!v.is_string()) return fail(key, "must be a string"), std::string{};
        std::string s = v.get<std::string>();
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), s) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            fail(key, "unknown value '" + s + "' (allowed: " + list + ")");
        }
        resolved_[key] = s;
        return s;
    }

    bool flag(const std::string& key, bool def) {
        seen_.insert(key);
        if (!has(key)) return resolved_[key] = def, def;
        const json& v = src_.at(key);
        if (!v.is_boolean()) return fail(key, "must be true or false"), def;
        resolved_[key] = v;
        return v.get<bool>();
    }

    // Raw sub-document; the caller validates it.
    const json* raw(const std::string& key, bool required) {
        seen_.insert(key);
        if (!has(key)) {
            if (required) missing(key);
            return nullptr;
        }
        return &src_.at(key);
    }

    void set(const std::string& key, json v) { resolved_[key] = std::move(v); }

    void fail(const std::string& key, const std::string& problem) {
        errors_.push_back(where_ + (key.empty() ? "" : (where_.empty() ? "" : ".") + key) + ": " + problem);
    }

    // Unknown keys are violations too.
    json finish() {
        if (ok_)
            for (auto it = src_.begin(); it != src_.end(); ++it)
                if (!seen_.count(it.key())) fail(it.key(), "unknown field");
        return resolved_;
    }

    const std::string& where() const { return where_; }

private:
    void missing(const std::string& key) { fail(key, "required field missing"); }

    const json& src_;
    std::string where_;
    std::vector<std::string>& errors_;
    json resolved_;
    std::set<std::string> seen_;
    bool ok_ = true;
};

// ---- inventory parameters ----

void resolve_inventory_params(Fields& f) {
    double c = f.real("c", std::nullopt);
    double c_h = f.real("c_h", std::nullopt);
    double c_p = f.real("c_p", std::nullopt);
    json demand = {{"kind", "uniform"}, {"params", json::array()}, {"J", 1.0}};
    if (const json* d = f.raw("demand", false)) {
        try {
            demand = DemandModel::from_json(*d).to_json();
        } catch (const std::exception& e) {
            f.fail("demand", e.what());
        }
    }
    f.set("demand", demand);
    double J = demand.value("J", 1.0);
    double h = f.real("grid_step", J / 400.0, [](double x) { return x > 0.0; }, "must be positive");
    f.real("start_state", 0.0, [](double x) { return x >= 0.0; }, "must be >= 0");
    if (std::isfinite(c) && std::isfinite(c_h) && std::isfinite(c_p) && std::isfinite(h)) {
        if (!(c > 0.0 && c < c_p)) f.fail("c", "model invariant 0 < c < c_p violated (c must be below c_p)");
        if (!(c_h > 0.0)) f.fail("c_h", "model invariant c_h > 0 violated");
        if (h > J / 2.0) f.fail("grid_step", "too coarse for the demand support");
        if (J / h > 20000.0) f.fail("grid_step", "lattice larger than 20000 cells");
    }
}

InventoryModel inventory_model(const json& p) {
    return InventoryModel(p.at("c").get<double>(), p.at("c_h").get<double>(), p.at("c_p").get<double>(),
                          DemandModel::from_json(p.at("demand")), p.at("grid_step").get<double>());
}

// ---- model block for decompose / clt ----

const std::vector<std::string> kModelTypes = {"random", "counterexample", "inventory", "altsub", "bundle"};

void resolve_counterexample_params(Fields& f) {
    auto grid = f.real_list("grid", std::vector<double>{0.0, 1.0});
    if (grid.size() < 2) f.fail("grid", "needs at least two points (single-point grid has zero variance)");
    for (std::size_t a = 1; a < grid.size(); ++a)
        if (!(grid[a] > grid[a - 1])) {
            f.fail("grid", "must be strictly increasing");
            break;
        }
    if (f.has("probs")) {
        auto probs = f.real_list("probs", std::nullopt);
        if (probs.size() != grid.size()) f.fail("probs", "must have one entry per grid point");
        double total = 0.0;
        for (double p : probs) {
            if (p < 0.0) f.fail("probs", "entries must be >= 0");
            total += p;
        }
        if (std::abs(total - 1.0) > kRowSumTolerance) f.fail("probs", "must sum to 1");
    } else {
        f.raw("probs", false);
    }
}

json resolve_model(const json& src, const std::string& where, std::vector<std::string>& errors,
                   std::uint64_t seed) {
    Fields f(src, where, errors);
    std::string type = f.text("type", std::nullopt, kModelTypes);
    if (type == "random") {
        f.integer("states", 3, 2, 64);
        f.integer("m", 1, 0, 1);
        f.real("reward_scale", 1.0, [](double x) { return x > 0.0; }, "must be positive");
        f.integer("seed", seed, 0);
    } else if (type == "counterexample") {
        resolve_counterexample_params(f);
    } else if (type == "inventory") {
        resolve_inventory_params(f);
    } else if (type == "altsub") {
        f.integer("grid_points", 401, 3, kMaxGridStates);
    } else if (type == "bundle") {
        if (const json* doc = f.raw("instance", true)) {
            try {
                bundle_from_json(*doc);
                f.set("instance", *doc);
            } catch (const std::exception& e) {
                f.fail("instance", e.what());
            }
        }
    }
    return f.finish();
}

struct Instance {
    ChainLaw law;
    RewardFunctionArray rewards;
};

Instance build_instance(const json& model, std::size_t n) {
    const std::string type = model.at("type");
    if (type == "random") {
        auto b = random_instance(model.at("seed").get<std::uint64_t>(), model.at("states").get<std::size_t>(), n,
                                 model.at("m").get<std::size_t>(), model.at("reward_scale").get<double>());
        return {std::move(b.law), std::move(b.rewards)};
    }
    if (type == "counterexample") {
        std::vector<double> probs;
        if (model.contains("probs")) probs = model.at("probs").get<std::vector<double>>();
        auto b = parity_counterexample(n, model.at("grid").get<std::vector<double>>(), probs);
        return {std::move(b.law), std::move(b.rewards)};
    }
    if (type == "inventory") {
        auto im = inventory_model(model);
        auto sol = solve_base_stock(im, n);
        auto chain = build_inventory_chain(im, sol, n, model.at("start_state").get<double>());
        return {std::move(chain.law), std::move(chain.rewards)};
    }
    if (type == "altsub") {
        auto sol = solve_alt_thresholds(n, model.at("grid_points").get<std::size_t>());
        auto chain = build_altsub_chain(sol, n);
        return {std::move(chain.law), std::move(chain.rewards)};
    }
    auto b = bundle_from_json(model.at("instance"));
    if (b.law.horizon() != n) throw DomainError("bundle horizon differs from n");
    return {std::move(b.law), std::move(b.rewards)};
}

// alpha_n over reachable rows, as used by the decomposition.
double reachable_alpha(const ChainLaw& law) {
    if (law.horizon() < 2) return 1.0;
    return minimal_ergodic_coefficient(law.seq(), support_masks(marginals(law))).alpha_n;
}

ConditionRow condition_row(const ChainLaw& law, const RewardFunctionArray& rewards) {
    ConditionRow row;
    row.n = law.horizon();
    row.C_n = center_rewards(law, rewards).bound();
    row.alpha_n = reachable_alpha(law);
    row.variance = moments_exact(law, rewards).variance;
    return row;
}

json num(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

// ---- run context ----

struct Run {
    const ExperimentConfig& cfg;
    json results = json::object();
    json certificates = json::array();
    std::map<std::string, std::string> files;  // name -> content, written before report.json
    std::size_t workers;

    void cert(const std::string& name, bool pass, json detail = json::object()) {
        detail["name"] = name;
        detail["pass"] = pass;
        certificates.push_back(std::move(detail));
    }
    void cert(const CheckResult& c) {
        json j = to_json(c);
        certificates.push_back(j);
    }
};

void add_clt(Run& run, const ChainLaw& law, const RewardFunctionArray& rewards, std::size_t N,
             std::optional<Moments> exact, double C_n, double alpha_n, std::optional<double> ks_max,
             std::optional<double> ks_min) {
    auto batch = sample_totals(law, rewards, run.cfg.seed, N, run.workers);
    auto rep = normality_report(batch, exact, C_n, alpha_n);
    run.results["clt"] = to_json(rep);
    run.files["totals.csv"] = totals_csv(batch);
    if (!rep.degenerate) run.files["histogram.csv"] = histogram_csv(standardized_sample(batch, rep));
    double ks = rep.ks_distance.value_or(std::numeric_limits<double>::quiet_NaN());
    if (ks_max)
        run.cert("ks_distance_le_max", rep.ks_distance.has_value() && ks <= *ks_max,
                 {{"lhs", num(ks)}, {"rhs", *ks_max}});
    if (ks_min)
        run.cert("ks_distance_ge_min", rep.ks_distance.has_value() && ks >= *ks_min,
                 {{"lhs", num(ks)}, {"rhs", *ks_min}});
}

std::optional<double> opt_real(const json& r, const char* key) {
    if (r.contains(key)) return r.at(key).get<double>();
    return std::nullopt;
}

// ---- kinds ----

void run_coeff(Run& run) {
    const json& r = run.cfg.resolved;
    std::vector<KernelSequence> seqs;
    if (r.contains("kernels")) {
        seqs.push_back(kernel_sequence_from_json(r.at("kernels")));
    } else {
        const json& rnd = r.at("random");
        std::size_t count = rnd.at("count"), states = rnd.at("states"), n = rnd.at("n"), m = rnd.at("m");
        for (std::size_t t = 0; t < count; ++t)
            seqs.push_back(random_instance(substream_seed(run.cfg.seed, t), states, n, m).law.seq());
    }
    double worst_product = -1.0, worst_multi = -1.0, worst_osc = -1.0;  // lhs - rhs, maximized
    std::size_t product_checks = 0, multi_checks = 0, osc_checks = 0;
    json first;
    for (std::size_t t = 0; t < seqs.size(); ++t) {
        const auto& seq = seqs[t];
        std::vector<double> deltas;
        for (std::size_t i = 1; i <= seq.length(); ++i) deltas.push_back(dobrushin_delta(seq.step(i)));
        for (std::size_t i = 1; i + 1 <= seq.length(); ++i) {
            double lhs = dobrushin_delta(compose(seq.step(i), seq.step(i + 1)));
            worst_product = std::max(worst_product, lhs - deltas[i - 1] * deltas[i]);
            ++product_checks;
        }
        double alpha = 1.0;
        if (seq.horizon() >= 2) {
            alpha = minimal_ergodic_coefficient(seq).alpha_n;
            for (std::size_t i = 1; i < seq.horizon(); ++i)
                for (std::size_t j = i + 1; j <= seq.horizon(); ++j) {
                    double lhs = dobrushin_delta(multistep(seq, i, j));
                    worst_multi = std::max(worst_multi, lhs - std::pow(1.0 - alpha, static_cast<double>(j - i)));
                    ++multi_checks;
                }
        }
        std::mt19937_64 rng(substream_seed(run.cfg.seed ^ 0x5eedULL, t));
        for (std::size_t i = 1; i <= seq.length(); ++i) {
            std::vector<double> h(seq.grid()->size());
            for (auto& v : h) v = 2.0 * uniform01(rng) - 1.0;
            double lhs = oscillation(seq.step(i).apply(h));
            worst_osc = std::max(worst_osc, lhs - deltas[i - 1] * oscillation(h));
            ++osc_checks;
        }
        if (t == 0) first = {{"per_step_delta", deltas}, {"alpha_n", alpha}};
    }
    const double tol = 1e-12;
    run.results["instances"] = seqs.size();
    run.results["first_instance"] = first;
    run.cert("product_inequality", worst_product <= tol, {{"checks", product_checks}, {"max_excess", worst_product}});
    run.cert("multistep_bound", worst_multi <= tol, {{"checks", multi_checks}, {"max_excess", worst_multi}});
    run.cert("oscillation_contraction", worst_osc <= tol, {{"checks", osc_checks}, {"max_excess", worst_osc}});
}

void run_decompose(Run& run) {
    const json& r = run.cfg.resolved;
    std::size_t n = r.at("n");
    auto inst = build_instance(r.at("model"), n);
    auto rep = decompose(inst.law, inst.rewards);
    auto vi = variance_identity_check(rep);
    run.results["decomposition"] = r.at("include_vectors").get<bool>()
                                       ? to_json(rep)
                                       : json{{"n", rep.n}, {"m", rep.m}, {"mean_Sn", rep.mean_Sn},
                                              {"var_Sn", rep.var_Sn}, {"C_n", rep.C_n}, {"alpha_n", rep.alpha_n}};
    run.files["decomposition.csv"] = decomposition_csv(rep);
    run.cert("variance_identity", vi.pass, {{"lhs", vi.lhs}, {"rhs", vi.rhs}, {"residual", vi.residual}});
    run.cert(vi.sandwich);
    run.cert("martingale_difference", rep.max_conditional_mean <= kConditionalMeanTolerance * std::max(1.0, rep.C_n),
             {{"max_conditional_mean", rep.max_conditional_mean}});
    run.cert(delta_n_l2_check(rep));
    if (rep.m == 0) run.cert(dobrushin_lower_bound_check(inst.law, inst.rewards));
    if (r.at("suite").get<bool>()) {
        auto suite = oscillation_bound_suite(inst.law, rep);
        for (const auto& c : suite.checks) run.cert(c);
    }
}

void run_inventory(Run& run) {
    const json& r = run.cfg.resolved;
    std::size_t n = r.at("n");
    auto model = inventory_model(r);
    auto sol = solve_base_stock(model, n);
    auto chain = build_inventory_chain(model, sol, n, r.at("start_state").get<double>());
    run.files["levels.csv"] = sol.levels_csv();

    auto st = inventory_structure_check(model, sol, chain);
    run.results["structure"] = {{"s1", st.s1},
                                {"s1_quantile", st.s1_quantile},
                                {"s_n", st.sn},
                                {"s_inf_quantile", st.s_inf_quantile},
                                {"monotone", st.monotone},
                                {"convex", st.convex},
                                {"min_second_difference", st.min_second_difference},
                                {"max_reachable_state", st.max_reachable_state},
                                {"states", chain.law.states()}};
    run.cert("base_stock_structure", st.pass);

    std::vector<double> eps;
    for (std::size_t k = 1; k <= 20; ++k) eps.push_back(static_cast<double>(k) * model.demand.support_bound() / 20.0);
    auto typical = typical_class_check(model.demand, eps, model.h);
    run.cert("typical_class", typical.is_typical, {{"failing_eps", typical.failing_eps}});
    if (typical.is_typical) {
        auto ac = inventory_alpha_certificate(model, chain);
        run.results["alpha_certificate"] = {{"alpha_n", ac.alpha_n},         {"bound", ac.bound},
                                            {"tolerance", ac.tolerance},     {"max_tv_error", ac.max_tv_error},
                                            {"max_row_tv", ac.max_row_tv},   {"probability_bound", ac.probability_bound},
                                            {"pairs", ac.pairs}};
        run.cert("alpha_lower_bound", ac.pass, {{"lhs", ac.alpha_n}, {"rhs", ac.bound - 2.0 * model.h}});
    }
    if (r.at("bivariate").get<bool>() && n >= 3) {
        auto bv = bivariate_degeneracy_demo(chain);
        run.results["bivariate"] = {{"step", bv.step},         {"delta_hat", bv.delta_hat},
                                    {"alpha_hat", bv.alpha_hat}, {"rho_hat", bv.rho_hat},
                                    {"witness_residual", bv.witness_residual}};
        run.cert("bivariate_degeneracy", bv.pass);
    }

    auto mom = moments_exact(chain.law, chain.rewards);
    double C_n = center_rewards(chain.law, chain.rewards).bound();
    double alpha = reachable_alpha(chain.law);
    run.results["exact"] = {{"mean_Sn", mom.mean}, {"var_Sn", mom.variance}, {"C_n", C_n}, {"alpha_n", alpha}};

    if (r.contains("n_list")) {
        auto vg = inventory_variance_growth(model, r.at("n_list").get<std::vector<std::size_t>>(),
                                            r.at("start_state").get<double>());
        std::vector<double> lower, lower_rig;
        for (std::size_t n2 : vg.n_list) {
            lower.push_back(vg.beta * static_cast<double>(n2));
            lower_rig.push_back(vg.beta_rigorous * static_cast<double>(n2));
        }
        run.results["variance_growth"] = {{"n_list", vg.n_list},
                                          {"var_Sn", vg.variance},
                                          {"doubling_ratio", vg.doubling_ratio},
                                          {"slope", vg.slope},
                                          {"beta_displayed", vg.beta},
                                          {"beta_displayed_times_n", lower},
                                          {"beta_displayed_bound_holds", vg.beta_bound_holds},
                                          {"beta_corrected", vg.beta_rigorous},
                                          {"beta_corrected_times_n", lower_rig}};
        run.cert("variance_doubling_band", vg.doubling_ok && vg.slope > 0.0, {{"ratios", vg.doubling_ratio}});
        run.cert("variance_lower_bound_corrected_beta", vg.rigorous_bound_holds);
        if (r.at("check_displayed_beta").get<bool>())
            run.cert("variance_lower_bound_displayed_beta", vg.beta_bound_holds);
    }
    if (r.contains("N"))
        add_clt(run, chain.law, chain.rewards, r.at("N"), mom, C_n, alpha, opt_real(r, "ks_max"), std::nullopt);
}

void run_altsub(Run& run) {
    const json& r = run.cfg.resolved;
    std::size_t n = r.at("n");
    auto sol = solve_alt_thresholds(n, r.at("grid_points"));
    auto props = altsub_threshold_properties(sol, r.at("k_identity"));
    run.files["thresholds.csv"] = sol.thresholds_csv(std::min<std::size_t>(n, r.at("csv_k_max")));
    run.results["thresholds"] = {{"identity_max_error", props.identity_max_error},
                                 {"min_threshold", props.min_threshold},
                                 {"step", sol.step()}};
    run.cert("threshold_identity_on_upper_third", props.identity_exact);
    run.cert("threshold_lower_bound", props.lower_bound,
             {{"lhs", props.min_threshold}, {"rhs", 1.0 / 6.0 - 2.0 * sol.step()}});
    run.cert("values_monotone_in_horizon", props.monotone_values);
    run.cert("acceptance_upper_sets", props.upper_sets);

    auto chain = build_altsub_chain(sol, n);
    if (n >= 4) {
        auto ac = altsub_alpha_certificate(chain, sol.step());
        run.results["alpha_certificate"] = {{"steps", ac.steps},
                                            {"max_delta", ac.max_delta},
                                            {"alpha", ac.alpha},
                                            {"max_reachable_state", ac.max_reachable_state},
                                            {"tolerance", ac.tolerance}};
        run.cert("alpha_lower_bound", ac.pass, {{"lhs", ac.alpha}, {"rhs", 1.0 / 6.0 - ac.tolerance}});
    }
    auto mom = moments_exact(chain.law, chain.rewards);
    double nd = static_cast<double>(n);
    double C_n = center_rewards(chain.law, chain.rewards).bound();
    double alpha = reachable_alpha(chain.law);
    run.results["exact"] = {{"mean_A", mom.mean}, {"var_A", mom.variance}, {"mean_per_n", mom.mean / nd},
                            {"var_per_n", mom.variance / nd}, {"C_n", C_n}, {"alpha_n", alpha}};
    double dev = std::abs(mom.mean / nd - kAltSubLimit);
    run.cert("mean_rate", dev <= 10.0 / nd + 0.01, {{"lhs", dev}, {"rhs", 10.0 / nd + 0.01}});
    if (r.contains("N"))
        add_clt(run, chain.law, chain.rewards, r.at("N"), mom, C_n, alpha, opt_real(r, "ks_max"), std::nullopt);
}

void run_clt(Run& run) {
    const json& r = run.cfg.resolved;
    std::size_t n = r.at("n");
    auto inst = build_instance(r.at("model"), n);
    std::optional<Moments> exact;
    if (r.at("exact_moments").get<bool>()) exact = moments_exact(inst.law, inst.rewards);
    double C_n = center_rewards(inst.law, inst.rewards).bound();
    double alpha = reachable_alpha(inst.law);
    auto ks_max = opt_real(r, "ks_max"), ks_min = opt_real(r, "ks_min");
    add_clt(run, inst.law, inst.rewards, r.at("N"), exact, C_n, alpha, ks_max, ks_min);
    if (r.contains("n_list")) {
        std::vector<ConditionRow> rows;
        for (std::size_t n2 : r.at("n_list").get<std::vector<std::size_t>>()) {
            auto other = build_instance(r.at("model"), n2);
            rows.push_back(condition_row(other.law, other.rewards));
        }
        auto cr = clt_condition_report(rows);
        run.results["condition"] = to_json(cr);
        bool expect_pass = r.at("expect_condition").get<std::string>() == "pass";
        run.cert(expect_pass ? "condition_verdict_pass" : "condition_verdict_fail_expected",
                 cr.pass == expect_pass, {{"verdict", cr.pass ? "pass" : "fail"}});
    }
}

// Var[f_i] for each period from the window laws (m <= 1).
std::vector<double> period_variances(const ChainLaw& law, const RewardFunctionArray& f) {
    auto mu = marginals(law);
    const std::size_t s = law.states();
    std::vector<double> out;
    for (std::size_t i = 1; i <= f.horizon(); ++i) {
        double e1 = 0.0, e2 = 0.0;
        for (std::size_t x = 0; x < s; ++x) {
            double px = mu[i - 1][x];
            if (px == 0.0) continue;
            if (f.lookahead() == 0) {
                double v = f.at(i, x);
                e1 += px * v;
                e2 += px * v * v;
                continue;
            }
            auto row = law.seq().step(i).row(x);
            for (std::size_t y = 0; y < s; ++y) {
                double v = f.at(i, x, y);
                e1 += px * row[y] * v;
                e2 += px * row[y] * v * v;
            }
        }
        out.push_back(e2 - e1 * e1);
    }
    return out;
}

void run_counterexample(Run& run) {
    const json& r = run.cfg.resolved;
    std::size_t n = r.at("n");
    auto grid = r.at("grid").get<std::vector<double>>();
    std::vector<double> probs;
    if (r.contains("probs")) probs = r.at("probs").get<std::vector<double>>();
    auto b = parity_counterexample(n, grid, probs);

    std::vector<double> p = probs.empty() ? std::vector<double>(grid.size(), 1.0 / static_cast<double>(grid.size()))
                                          : probs;
    double ex = 0.0;
    for (std::size_t a = 0; a < grid.size(); ++a) ex += p[a] * grid[a];
    double var_x = 0.0;
    for (std::size_t a = 0; a < grid.size(); ++a) var_x += p[a] * (grid[a] - ex) * (grid[a] - ex);

    auto mom = moments_exact(b.law, b.rewards);
    double expected = (n % 2 == 0) ? 0.0 : var_x;
    double tol = 1e-12 * std::max(1.0, var_x);
    run.results["exact"] = {{"mean_Sn", mom.mean}, {"var_Sn", mom.variance}, {"var_X", var_x}};
    run.cert("parity_variance", std::abs(mom.variance - expected) <= tol,
             {{"lhs", mom.variance}, {"rhs", expected}, {"parity", n % 2 == 0 ? "even" : "odd"}});
    auto pv = period_variances(b.law, b.rewards);
    double sum = 0.0;
    for (double v : pv) sum += v;
    double target = static_cast<double>(n) * var_x;
    run.results["sum_individual_variances"] = sum;
    run.cert("individual_variances_sum", std::abs(sum - target) <= tol * static_cast<double>(n),
             {{"lhs", sum}, {"rhs", target}});

    std::vector<ConditionRow> rows;
    for (std::size_t n2 : r.at("n_list").get<std::vector<std::size_t>>()) {
        auto other = parity_counterexample(n2, grid, probs);
        rows.push_back(condition_row(other.law, other.rewards));
    }
    auto cr = clt_condition_report(rows);
    run.results["condition"] = to_json(cr);
    run.cert("condition_verdict_fail_expected", !cr.pass, {{"verdict", cr.pass ? "pass" : "fail"}});

    if (r.contains("N")) {
        double C_n = center_rewards(b.law, b.rewards).bound();
        add_clt(run, b.law, b.rewards, r.at("N"), mom, C_n, 1.0, std::nullopt, opt_real(r, "ks_min"));
        bool degenerate = run.results["clt"]["degenerate"].get<bool>();
        run.cert("degenerate_flag_matches_parity", degenerate == (n % 2 == 0));
    }
}

void resolve_sampling(Fields& f, bool required_N) {
    if (required_N || f.has("N")) f.integer("N", std::nullopt, 100);
    if (f.has("ks_max")) f.real("ks_max", std::nullopt, [](double x) { return x > 0.0 && x <= 1.0; }, "must be in (0, 1]");
    if (f.has("ks_min")) f.real("ks_min", std::nullopt, [](double x) { return x >= 0.0 && x < 1.0; }, "must be in [0, 1)");
}

}  // namespace

std::string kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::Coeff: return "coeff";
        case ExperimentKind::Decompose: return "decompose";
        case ExperimentKind::Inventory: return "inventory";
        case ExperimentKind::AltSub: return "altsub";
        case ExperimentKind::Clt: return "clt";
        case ExperimentKind::Counterexample: return "counterexample";
    }
    return "";
}

std::optional<ExperimentKind> kind_from_name(const std::string& s) {
    for (auto k : {ExperimentKind::Coeff, ExperimentKind::Decompose, ExperimentKind::Inventory, ExperimentKind::AltSub,
                   ExperimentKind::Clt, ExperimentKind::Counterexample})
        if (kind_name(k) == s) return k;
    return std::nullopt;
}

ConfigParse parse_config(const std::string& text, std::optional<std::string> kind_override,
                         std::optional<std::uint64_t> seed_override) {
    ConfigParse out;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        out.errors.push_back(std::string("malformed JSON: ") + e.what());
        return out;
    }
    if (!doc.is_object()) {
        out.errors.push_back("config: must be a JSON object");
        return out;
    }
    auto& errors = out.errors;
    Fields f(doc, "config", errors);
    std::string kind_text;
    if (doc.contains("kind") && doc.at("kind").is_string()) kind_text = doc.at("kind").get<std::string>();
    if (kind_override) {
        if (!kind_text.empty() && kind_text != *kind_override)
            errors.push_back("config.kind: '" + kind_text + "' conflicts with subcommand '" + *kind_override + "'");
        kind_text = *kind_override;
    }
    f.raw("kind", false);
    auto kind = kind_from_name(kind_text);
    if (!kind) {
        errors.push_back(kind_text.empty() ? std::string("config.kind: required field missing (allowed: ") +
                                                 kAllowedKinds + ")"
                                           : "config.kind: unknown experiment kind '" + kind_text +
                                                 "' (allowed: " + kAllowedKinds + ")");
    }
    std::uint64_t seed = f.integer("seed", 1, 1);
    if (seed_override) {
        if (*seed_override == 0) errors.push_back("--seed: must be positive");
        seed = *seed_override;
        f.set("seed", seed);
    }
    if (f.has("out")) f.text("out", std::nullopt, {});
    std::uint64_t workers = f.has("workers") ? f.integer("workers", std::nullopt, 1, 1024) : 0;

    if (kind) {
        switch (*kind) {
            case ExperimentKind::Coeff: {
                if (const json* k = f.raw("kernels", false)) {
                    try {
                        kernel_sequence_from_json(*k);
                        f.set("kernels", *k);
                    } catch (const std::exception& e) {
                        f.fail("kernels", e.what());
                    }
                } else {
                    const json* rnd = f.raw("random", false);
                    json empty = json::object();
                    Fields rf(rnd ? *rnd : empty, "config.random", errors);
                    rf.integer("states", 4, 2, 64);
                    rf.integer("n", 6, 1, 10000);
                    rf.integer("m", 0, 0, 1);
                    rf.integer("count", 200, 1, 100000);
                    f.set("random", rf.finish());
                }
                break;
            }
            case ExperimentKind::Decompose: {
                f.integer("n", std::nullopt, 1, 100000);
                if (const json* m = f.raw("model", true)) f.set("model", resolve_model(*m, "config.model", errors, seed));
                f.flag("suite", true);
                f.flag("include_vectors", true);
                break;
            }
            case ExperimentKind::Inventory: {
                f.integer("n", std::nullopt, 1, 100000);
                resolve_inventory_params(f);
                if (f.has("n_list")) f.int_list("n_list", std::nullopt);
                f.flag("bivariate", true);
                f.flag("check_displayed_beta", false);
                resolve_sampling(f, false);
                if (f.has("N") && !f.has("ks_max")) f.set("ks_max", 0.05);
                break;
            }
            case ExperimentKind::AltSub: {
                std::uint64_t n = f.integer("n", std::nullopt, 1, 100000);
                f.integer("grid_points", 401, 3, kMaxGridStates);
                f.integer("k_identity", std::min<std::uint64_t>(50, std::max<std::uint64_t>(n, 1)), 1);
                f.integer("csv_k_max", 50, 1);
                resolve_sampling(f, false);
                if (f.has("N") && !f.has("ks_max")) f.set("ks_max", 0.05);
                break;
            }
            case ExperimentKind::Clt: {
                f.integer("n", std::nullopt, 1, 100000);
                if (const json* m = f.raw("model", true)) f.set("model", resolve_model(*m, "config.model", errors, seed));
                resolve_sampling(f, true);
                if (!f.has("ks_max") && !f.has("ks_min")) f.set("ks_max", 0.05);
                f.flag("exact_moments", true);
                if (f.has("n_list")) f.int_list("n_list", std::nullopt);
                f.text("expect_condition", "pass", {"pass", "fail"});
                break;
            }
            case ExperimentKind::Counterexample: {
                std::uint64_t n = f.integer("n", std::nullopt, 1, 100000);
                resolve_counterexample_params(f);
                f.int_list("n_list", std::vector<std::size_t>{n, 2 * n + 1, 4 * n + 1});
                resolve_sampling(f, false);
                break;
            }
        }
    }
    json resolved = f.finish();
    if (!errors.empty()) return out;
    resolved.erase("workers");  // parallelism never changes results, so it stays out of reports

    if (kind_override && !doc.contains("kind")) resolved["kind"] = *kind_override;
    else resolved["kind"] = kind_text;
    ExperimentConfig cfg;
    cfg.kind = *kind;
    cfg.original = doc;
    cfg.resolved = resolved;
    cfg.seed = seed;
    cfg.workers = workers;
    if (resolved.contains("out")) cfg.out_dir = resolved.at("out").get<std::string>();
    out.config = std::move(cfg);
    return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << text;
        if (!os.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentResult res;
    Run run{cfg, json::object(), json::array(), {}, resolve_workers(cfg.workers)};
    std::string error;
    try {
        switch (cfg.kind) {
            case ExperimentKind::Coeff: run_coeff(run); break;
            case ExperimentKind::Decompose: run_decompose(run); break;
            case ExperimentKind::Inventory: run_inventory(run); break;
            case ExperimentKind::AltSub: run_altsub(run); break;
            case ExperimentKind::Clt: run_clt(run); break;
            case ExperimentKind::Counterexample: run_counterexample(run); break;
        }
    } catch (const std::exception& e) {
        error = e.what();
    }

    bool pass = error.empty();
    for (const auto& c : run.certificates) pass = pass && c.at("pass").get<bool>();
    res.exit_code = !error.empty() ? kExitRuntimeError : (pass ? kExitPass : kExitCertificateFail);

    json report = {{"artifact", "nhclt"},
                   {"version", NHCLT_VERSION},
                   {"kind", kind_name(cfg.kind)},
                   {"seed", cfg.seed},
                   {"config", cfg.original},
                   {"resolved_config", cfg.resolved},
                   {"results", run.results},
                   {"certificates", run.certificates},
                   {"pass", pass},
                   {"exit_code", res.exit_code}};
    if (!error.empty()) report["error"] = error;

    std::ostringstream summary;
    summary << kind_name(cfg.kind) << ": " << (error.empty() ? (pass ? "PASS" : "FAIL") : "ERROR") << '\n';
    for (const auto& c : run.certificates)
        summary << "  [" << (c.at("pass").get<bool>() ? "pass" : "FAIL") << "] " << c.at("name").get<std::string>()
                << '\n';
    if (!error.empty()) summary << "  error: " << error << '\n';
    res.summary = summary.str();

    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        if (error.empty()) {
            for (const auto& [name, content] : run.files) {
                write_atomic(cfg.out_dir / name, content);
                res.files.push_back(name);
            }
        }
        write_atomic(cfg.out_dir / "report.json", dump_json(report) + "\n");
        res.files.push_back("report.json");
    }
    res.report = std::move(report);
    return res;
}

}  // namespace nhclt
