#include "nhclt/inventory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/beta.hpp>

namespace nhclt {

namespace {

constexpr double kDensityNormTolerance = 1e-8;

void require(bool ok, const std::string& what) {
    if (!ok) throw DomainError(what);
}

std::size_t cells_for(double J, double h) {
    return static_cast<std::size_t>(std::ceil(J / h - 1e-9));
}

}  // namespace

DemandModel::DemandModel(Kind kind, std::vector<double> params, double J)
    : kind_(kind), params_(std::move(params)), J_(J) {
    require(std::isfinite(J_) && J_ > 0.0, "demand support must have positive length (J > 0)");
    if (kind_ == Kind::Beta) {
        require(params_.size() == 2 && params_[0] >= 1.0 && params_[1] >= 1.0 && std::isfinite(params_[0]) &&
                    std::isfinite(params_[1]),
                "beta demand needs parameters a >= 1, b >= 1");
    } else if (kind_ == Kind::TruncatedExponential) {
        require(params_.size() == 1 && params_[0] > 0.0 && std::isfinite(params_[0]),
                "truncated exponential demand needs a positive rate");
    } else if (kind_ == Kind::Table) {
        require(!params_.empty(), "table demand needs at least one weight");
        double total = 0.0;
        for (double w : params_) {
            require(w >= 0.0 && std::isfinite(w), "table demand weights must be finite and >= 0");
            total += w;
        }
        require(std::abs(total - 1.0) <= kDensityNormTolerance, "table demand weights must sum to 1");
        table_cdf_.assign(params_.size() + 1, 0.0);
        for (std::size_t b = 0; b < params_.size(); ++b) table_cdf_[b + 1] = table_cdf_[b] + params_[b] / total;
    }
}

DemandModel DemandModel::uniform(double J) { return DemandModel(Kind::Uniform, {}, J); }
DemandModel DemandModel::beta(double a, double b, double J) { return DemandModel(Kind::Beta, {a, b}, J); }
DemandModel DemandModel::truncated_exponential(double rate, double J) {
    return DemandModel(Kind::TruncatedExponential, {rate}, J);
}
DemandModel DemandModel::table(std::vector<double> weights, double J) {
    return DemandModel(Kind::Table, std::move(weights), J);
}

double DemandModel::pdf(double w) const {
    if (w < 0.0 || w > J_) return 0.0;
    switch (kind_) {
        case Kind::Uniform:
            return 1.0 / J_;
        case Kind::Beta: {
            boost::math::beta_distribution<double> d(params_[0], params_[1]);
            return boost::math::pdf(d, w / J_) / J_;
        }
        case Kind::TruncatedExponential: {
            double r = params_[0];
            return r * std::exp(-r * w) / -std::expm1(-r * J_);
        }
        case Kind::Table: {
            std::size_t bins = params_.size();
            auto b = std::min(bins - 1, static_cast<std::size_t>(w / J_ * static_cast<double>(bins)));
            return params_[b] * static_cast<double>(bins) / J_;
        }
    }
    return 0.0;
}

double DemandModel::cdf(double w) const {
    if (w <= 0.0) return 0.0;
    if (w >= J_) return 1.0;
    switch (kind_) {
        case Kind::Uniform:
            return w / J_;
        case Kind::Beta: {
            boost::math::beta_distribution<double> d(params_[0], params_[1]);
            return boost::math::cdf(d, w / J_);
        }
        case Kind::TruncatedExponential: {
            double r = params_[0];
            return std::expm1(-r * w) / std::expm1(-r * J_);
        }
        case Kind::Table: {
            double pos = w / J_ * static_cast<double>(params_.size());
            auto b = std::min(params_.size() - 1, static_cast<std::size_t>(pos));
            return table_cdf_[b] + (pos - static_cast<double>(b)) * params_[b];
        }
    }
    return 0.0;
}

double DemandModel::quantile(double p) const {
    require(p >= 0.0 && p <= 1.0, "quantile level must lie in [0, 1]");
    switch (kind_) {
        case Kind::Uniform:
            return p * J_;
        case Kind::Beta: {
            boost::math::beta_distribution<double> d(params_[0], params_[1]);
            return J_ * boost::math::quantile(d, p);
        }
        case Kind::TruncatedExponential: {
            double r = params_[0];
            return -std::log1p(p * std::expm1(-r * J_)) / r;
        }
        case Kind::Table: {
            // Smallest w with cdf(w) >= p.
            for (std::size_t b = 0; b < params_.size(); ++b) {
                if (table_cdf_[b + 1] >= p && params_[b] > 0.0) {
                    double frac = std::clamp((p - table_cdf_[b]) / params_[b], 0.0, 1.0);
                    return J_ * (static_cast<double>(b) + frac) / static_cast<double>(params_.size());
                }
            }
            return J_;
        }
    }
    return 0.0;
}

double DemandModel::pdf_max() const {
    switch (kind_) {
        case Kind::Uniform:
            return 1.0 / J_;
        case Kind::TruncatedExponential:
            return pdf(0.0);
        case Kind::Table:
            return *std::max_element(params_.begin(), params_.end()) * static_cast<double>(params_.size()) / J_;
        case Kind::Beta: {
            double a = params_[0], b = params_[1];
            if (a == 1.0 && b == 1.0) return 1.0 / J_;
            double mode = (a + b > 2.0) ? (a - 1.0) / (a + b - 2.0) : 0.5;
            return pdf(mode * J_);
        }
    }
    return 0.0;
}

nlohmann::json DemandModel::to_json() const {
    static const char* names[] = {"uniform", "beta", "truncated_exponential", "table"};
    return {{"kind", names[static_cast<int>(kind_)]}, {"params", params_}, {"J", J_}};
}

DemandModel DemandModel::from_json(const nlohmann::json& doc) {
    auto kind = doc.at("kind").get<std::string>();
    double J = doc.value("J", 1.0);
    std::vector<double> params;
    if (doc.contains("params")) {
        const auto& p = doc.at("params");
        if (p.is_array()) {
            params = p.get<std::vector<double>>();
        } else if (p.is_object()) {
            if (kind == "beta") params = {p.at("a").get<double>(), p.at("b").get<double>()};
            if (kind == "truncated_exponential") params = {p.at("rate").get<double>()};
            if (kind == "table") params = p.at("weights").get<std::vector<double>>();
        }
    }
    if (kind == "uniform") return uniform(J);
    if (kind == "beta") return DemandModel(Kind::Beta, params, J);
    if (kind == "truncated_exponential") return DemandModel(Kind::TruncatedExponential, params, J);
    if (kind == "table") return DemandModel(Kind::Table, params, J);
    throw DomainError("unknown demand kind '" + kind + "' (allowed: uniform, beta, truncated_exponential, table)");
}

InventoryModel::InventoryModel(double c_, double c_h_, double c_p_, DemandModel demand_, double h_)
    : c(c_), c_h(c_h_), c_p(c_p_), demand(std::move(demand_)), h(h_) {
    require(std::isfinite(c) && std::isfinite(c_h) && std::isfinite(c_p), "cost rates must be finite");
    require(c > 0.0 && c < c_p, "model invariant violated: need 0 < c < c_p");
    require(c_h > 0.0, "model invariant violated: need c_h > 0");
    if (h == 0.0) h = demand.support_bound() / 400.0;
    require(std::isfinite(h) && h > 0.0, "grid step must be positive");
    require(h <= demand.support_bound() / 2.0, "grid step too coarse for the demand support");
}

double InventoryModel::s1_quantile() const { return demand.quantile((c_p - c) / (c_h + c_p)); }
double InventoryModel::s_inf_quantile() const { return demand.quantile(c_p / (c_h + c_p)); }
std::size_t InventoryModel::lattice_cells() const { return cells_for(demand.support_bound(), h); }

std::vector<double> lattice_demand(const DemandModel& demand, double h) {
    std::size_t N = cells_for(demand.support_bound(), h);
    std::vector<double> pmf(N + 1, 0.0);
    double prev = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        double next = demand.cdf(static_cast<double>(k + 1) * h);
        double mass = next - prev;
        prev = next;
        pmf[k] += 0.5 * mass;
        pmf[k + 1] += 0.5 * mass;
    }
    double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
    for (auto& p : pmf) p /= total;
    return pmf;
}

std::string BaseStockSolution::levels_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "k,s_k\n";
    for (std::size_t k = 1; k <= n; ++k) out << k << ',' << levels[k - 1] << '\n';
    return out.str();
}

double BaseStockSolution::value(std::size_t k, double x) const {
    const auto& v = values.at(k);
    double lo = dp_points.front();
    double pos = (x - lo) / h;
    if (pos <= 0.0) {
        double slope = (k == 0) ? 0.0 : (v[1] - v[0]) / h;
        return v[0] + slope * (x - lo);
    }
    auto j = static_cast<std::size_t>(pos);
    if (j + 1 >= v.size()) return v.back();
    double t = pos - static_cast<double>(j);
    return v[j] + t * (v[j + 1] - v[j]);
}

BaseStockSolution solve_base_stock(const InventoryModel& model, std::size_t n) {
    require(n >= 1, "horizon must be at least 1");
    const double h = model.h;
    const std::size_t N = model.lattice_cells();
    const long Nl = static_cast<long>(N);
    BaseStockSolution sol;
    sol.n = n;
    sol.h = h;
    sol.s_inf = model.s_inf_quantile();
    sol.demand_pmf = lattice_demand(model.demand, h);
    const auto& p = sol.demand_pmf;

    // DP lattice j = -N..N stored at offset N; w is evaluated on -2N..N.
    const std::size_t width = 2 * N + 1;
    sol.dp_points.resize(width);
    for (std::size_t a = 0; a < width; ++a) sol.dp_points[a] = static_cast<double>(static_cast<long>(a) - Nl) * h;
    sol.values.assign(1, std::vector<double>(width, 0.0));

    std::vector<double> w(3 * N + 1), G(width);
    for (std::size_t k = 1; k <= n; ++k) {
        const auto& prev = sol.values[k - 1];
        // Below the lattice v_{k-1} is affine with slope -c (slope 0 for v_0).
        double slope = (k == 1) ? 0.0 : -model.c;
        for (std::size_t a = 0; a < w.size(); ++a) {
            long j = static_cast<long>(a) - 2 * Nl;
            double x = static_cast<double>(j) * h;
            double v = (j >= -Nl) ? prev[static_cast<std::size_t>(j + Nl)]
                                  : prev[0] + slope * (x - sol.dp_points[0]);
            w[a] = model.carrying_cost(x) + v;
        }
        for (std::size_t a = 0; a < width; ++a) {
            // y = (a - N) h; y - k' h sits at w index a + N - k'.
            double acc = 0.0;
            for (std::size_t d = 0; d <= N; ++d) acc += p[d] * w[a + N - d];
            G[a] = model.c * sol.dp_points[a] + acc;
        }
        std::size_t best = 0;
        for (std::size_t a = 1; a < width; ++a)
            if (G[a] < G[best] - 1e-12 * (1.0 + std::abs(G[best]))) best = a;
        sol.level_index.push_back(static_cast<long>(best) - Nl);
        sol.levels.push_back(sol.dp_points[best]);

        std::vector<double> v(width);
        double run = std::numeric_limits<double>::infinity();
        for (std::size_t a = width; a-- > 0;) {
            run = std::min(run, G[a]);
            v[a] = run - model.c * sol.dp_points[a];
        }
        sol.values.push_back(std::move(v));
    }
    return sol;
}

TypicalClassCertificate typical_class_check(const DemandModel& demand, const std::vector<double>& probe_eps,
                                            double h) {
    require(h > 0.0, "scan step must be positive");
    TypicalClassCertificate cert;
    const double J = demand.support_bound();
    const double tol = 1e-12 * std::max(1.0, demand.pdf_max());
    for (double eps : probe_eps) {
        require(eps >= 0.0, "probe eps must be >= 0");
        auto steps = static_cast<long>(std::ceil((J + eps) / h));
        int phase = 0;  // 0: nothing yet, 1: seen negative, 2: seen positive
        bool ok = true;
        double w_hat = J;
        bool crossed = false;
        for (long s = 0; s <= steps; ++s) {
            double w = -eps + static_cast<double>(s) * h;
            double diff = demand.pdf(w) - demand.pdf(w + eps);
            if (diff > tol) {
                if (!crossed) {
                    w_hat = w;
                    crossed = true;
                }
                phase = 2;
            } else if (diff < -tol) {
                if (phase == 2) ok = false;
                phase = 1;
            }
        }
        if (eps == 0.0) w_hat = 0.0;
        cert.crossing_points[eps] = w_hat;
        if (!ok) {
            cert.is_typical = false;
            cert.failing_eps.push_back(eps);
        }
    }
    return cert;
}

InventoryChain build_inventory_chain(const InventoryModel& model, const BaseStockSolution& sol, std::size_t n,
                                     double start_state) {
    require(n >= 1 && n <= sol.n, "chain horizon must not exceed the solved horizon");
    require(std::isfinite(start_state) && std::abs(start_state) <= sol.s_inf + 1e-12,
            "start state must lie in [-s_inf, s_inf]");
    const double h = model.h;
    const long N = static_cast<long>(model.lattice_cells());
    long top = static_cast<long>(std::ceil(sol.s_inf / h - 1e-9));
    for (std::size_t k = 1; k <= n; ++k) top = std::max(top, sol.level_index[k - 1]);
    const long lo = -N;
    const auto S = static_cast<std::size_t>(top - lo + 1);
    auto grid = std::make_shared<const StateGrid>(StateGrid::uniform(static_cast<double>(lo) * h, h, S));
    const auto& p = sol.demand_pmf;

    std::map<long, std::tuple<KernelPtr, Tensor, std::shared_ptr<const std::vector<std::size_t>>>> by_level;
    std::vector<KernelPtr> kernels;
    std::vector<Tensor> tensors;
    std::vector<std::shared_ptr<const std::vector<std::size_t>>> gammas;
    for (std::size_t i = 1; i <= n; ++i) {
        long level = sol.level_index[n - i];
        auto it = by_level.find(level);
        if (it == by_level.end()) {
            auto L = static_cast<std::size_t>(level - lo);
            auto gamma = std::make_shared<std::vector<std::size_t>>(S);
            std::vector<double> rows(S * S, 0.0);
            auto f = std::make_shared<std::vector<double>>(S * S);
            for (std::size_t x = 0; x < S; ++x) {
                std::size_t g = std::max(x, L);
                (*gamma)[x] = g;
                for (std::size_t d = 0; d < p.size(); ++d) rows[x * S + (g - d)] += p[d];
                double order = model.c * (static_cast<double>(g) - static_cast<double>(x)) * h;
                for (std::size_t y = 0; y < S; ++y) (*f)[x * S + y] = order + model.carrying_cost((*grid)[y]);
            }
            auto k = std::make_shared<const StochasticKernel>(grid, std::move(rows));
            it = by_level.emplace(level, std::make_tuple(k, Tensor(f), std::shared_ptr<const std::vector<std::size_t>>(gamma)))
                     .first;
        }
        kernels.push_back(std::get<0>(it->second));
        tensors.push_back(std::get<1>(it->second));
        gammas.push_back(std::get<2>(it->second));
    }
    std::size_t start = grid->nearest(start_state);
    std::vector<double> initial(S, 0.0);
    initial[start] = 1.0;
    return InventoryChain{ChainLaw(std::move(initial), KernelSequence(grid, n, 1, std::move(kernels))),
                          RewardFunctionArray(S, n, 1, std::move(tensors)), lo, start, std::move(gammas)};
}

InventoryStructureReport inventory_structure_check(const InventoryModel& model, const BaseStockSolution& sol,
                                                   const InventoryChain& chain) {
    InventoryStructureReport r;
    const double tol = 2.0 * model.h;
    r.s1 = sol.levels.front();
    r.s1_quantile = model.s1_quantile();
    r.sn = sol.levels.back();
    r.s_inf_quantile = model.s_inf_quantile();
    for (std::size_t k = 1; k < sol.n; ++k) r.monotone = r.monotone && sol.levels[k] >= sol.levels[k - 1];
    r.min_second_difference = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= sol.n; ++k) {
        const auto& v = sol.values[k];
        for (std::size_t a = 1; a + 1 < v.size(); ++a)
            r.min_second_difference = std::min(r.min_second_difference, v[a + 1] - 2.0 * v[a] + v[a - 1]);
    }
    r.convex = r.min_second_difference >= -1e-9;
    auto mu = marginals(chain.law);
    const auto& grid = *chain.law.grid();
    double lowest = std::numeric_limits<double>::infinity();
    r.max_reachable_state = -std::numeric_limits<double>::infinity();
    for (const auto& m : mu)
        for (std::size_t x = 0; x < m.size(); ++x)
            if (m[x] >= kReachableMass) {
                r.max_reachable_state = std::max(r.max_reachable_state, grid[x]);
                lowest = std::min(lowest, grid[x]);
            }
    double J = model.demand.support_bound();
    r.pass = std::abs(r.s1 - r.s1_quantile) <= tol && r.sn <= r.s_inf_quantile + tol && r.monotone && r.convex &&
             r.max_reachable_state <= r.s_inf_quantile + tol && lowest >= -J - 1e-12;
    return r;
}

AlphaCertificate inventory_alpha_certificate(const InventoryModel& model, const InventoryChain& chain) {
    AlphaCertificate cert;
    const double h = model.h;
    const auto& seq = chain.law.seq();
    const std::size_t S = chain.law.states();
    cert.bound = std::min(model.c_h, model.c_p - model.c) / (model.c_h + model.c_p);
    cert.probability_bound = std::max(model.c_p, model.c_h + model.c) / (model.c_h + model.c_p);
    cert.tolerance = 2.0 * h * std::max(1.0, model.demand.pdf_max() * model.demand.support_bound());

    // Probe states: evenly spread over the grid plus the start state.
    std::vector<std::size_t> probes;
    const std::size_t count = 16;
    for (std::size_t a = 0; a < count; ++a) probes.push_back(a * (S - 1) / (count - 1));
    probes.push_back(chain.start_index);

    std::map<const StochasticKernel*, std::size_t> seen;
    std::vector<double> eps_list;
    struct Pair {
        double tv;
        double eps;
    };
    std::vector<Pair> pairs;
    const std::size_t last = std::max<std::size_t>(seq.horizon(), 2) - 1;
    for (std::size_t i = 1; i <= std::min(last, seq.length()); ++i) {
        const StochasticKernel* k = seq.step_ptr(i).get();
        if (!seen.emplace(k, i).second) continue;
        const auto& gamma = *chain.gamma[i - 1];
        for (std::size_t a = 0; a < probes.size(); ++a)
            for (std::size_t b = a + 1; b < probes.size(); ++b) {
                std::size_t x = probes[a], x2 = probes[b];
                double tv = tv_distance(k->row(x), k->row(x2));
                double g1 = static_cast<double>(gamma[x]), g2 = static_cast<double>(gamma[x2]);
                double eps = std::abs(g2 - g1) * h;
                pairs.push_back({tv, eps});
                eps_list.push_back(eps);
            }
    }
    std::sort(eps_list.begin(), eps_list.end());
    eps_list.erase(std::unique(eps_list.begin(), eps_list.end()), eps_list.end());
    auto typical = typical_class_check(model.demand, eps_list, h);
    if (!typical.is_typical)
        throw DomainError("inventory alpha certificate needs a demand density in the typical class");

    for (const auto& pr : pairs) {
        double w_hat = typical.crossing_points.at(pr.eps);
        double predicted = model.demand.cdf(w_hat + pr.eps) - model.demand.cdf(w_hat);
        cert.max_tv_error = std::max(cert.max_tv_error, std::abs(pr.tv - predicted));
        cert.max_row_tv = std::max(cert.max_row_tv, pr.tv);
        ++cert.pairs;
    }
    cert.alpha_n = seq.horizon() >= 2 ? minimal_ergodic_coefficient(seq).alpha_n : 1.0;
    cert.pass = cert.max_tv_error <= cert.tolerance && cert.max_row_tv <= cert.probability_bound + cert.tolerance &&
                cert.alpha_n >= cert.bound - 2.0 * h;
    return cert;
}

namespace {

// Row of the enlarged kernel at step i from (a, b): mass K_{i+1}(b, z) on (b, z).
std::vector<double> bivariate_row(const KernelSequence& seq, std::size_t i, std::size_t b) {
    std::size_t S = seq.grid()->size();
    std::vector<double> row(S * S, 0.0);
    auto r = seq.step(i + 1).row(b);
    std::copy(r.begin(), r.end(), row.begin() + static_cast<std::ptrdiff_t>(b * S));
    return row;
}

}  // namespace

StochasticKernel bivariate_kernel(const KernelSequence& seq, std::size_t i) {
    std::size_t S = seq.grid()->size();
    require(i >= 1 && i + 1 <= seq.length(), "bivariate step needs K_{i+1} in the sequence");
    require(S * S <= 4096, "dense bivariate kernel is limited to 64 grid points");
    std::vector<double> pts(S * S);
    std::iota(pts.begin(), pts.end(), 0.0);
    auto grid = std::make_shared<const StateGrid>(std::move(pts));
    std::vector<double> rows(S * S * S * S, 0.0);
    for (std::size_t a = 0; a < S; ++a)
        for (std::size_t b = 0; b < S; ++b) {
            auto r = bivariate_row(seq, i, b);
            std::copy(r.begin(), r.end(), rows.begin() + static_cast<std::ptrdiff_t>((a * S + b) * S * S));
        }
    return StochasticKernel(grid, std::move(rows));
}

BivariateReport bivariate_degeneracy_demo(const InventoryChain& chain) {
    const auto& law = chain.law;
    const auto& seq = law.seq();
    const std::size_t S = law.states();
    auto mu = marginals(law);
    BivariateReport rep;

    // Witness step: (X_i, X_{i+1}) -> (X_{i+1}, X_{i+2}) with two reachable second coordinates.
    bool found = false;
    for (std::size_t i = 1; i + 1 <= seq.length() && !found; ++i) {
        const auto& k = seq.step(i);
        for (std::size_t x = 0; x < S && !found; ++x) {
            if (mu[i - 1][x] < kReachableMass) continue;
            auto row = k.row(x);
            std::size_t first = S;
            for (std::size_t y = 0; y < S; ++y) {
                if (row[y] == 0.0) continue;
                if (first == S) {
                    first = y;
                    continue;
                }
                rep.step = i;
                rep.x = rep.x2 = x;
                rep.y = first;
                rep.y2 = y;
                found = true;
                break;
            }
        }
    }
    require(found, "bivariate demo needs a chain with two reachable states at some step");
    auto r1 = bivariate_row(seq, rep.step, rep.y);
    auto r2 = bivariate_row(seq, rep.step, rep.y2);
    rep.delta_hat = tv_distance(r1, r2);
    rep.alpha_hat = 1.0 - rep.delta_hat;

    // rho witness g(X^_i) = X_i - E[X_i], conditioned on X^_{i-1} = (X_{i-1}, X_i), i = step + 1.
    const std::size_t t = rep.step + 1;
    const auto& grid = *law.grid();
    double mean = 0.0;
    for (std::size_t b = 0; b < S; ++b) mean += mu[t - 1][b] * grid[b];
    double residual = 0.0, num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < S; ++b) {
        if (mu[t - 1][b] == 0.0) continue;
        // Every atom of the enlarged row from (a, b) has first coordinate b, so the
        // conditional expectation of g is g(b) itself.
        auto row = bivariate_row(seq, t - 1, b);
        double cond = 0.0;
        bool measurable = true;
        for (std::size_t e = 0; e < row.size(); ++e)
            if (row[e] != 0.0 && e / S != b) measurable = false;
        require(measurable, "enlarged kernel lost the shared coordinate");
        double g = grid[b] - mean;
        cond = g;
        residual = std::max(residual, std::abs(cond - g));
        num += mu[t - 1][b] * cond * cond;
        den += mu[t - 1][b] * g * g;
    }
    rep.witness_residual = residual;
    rep.rho_hat = den > 0.0 ? std::sqrt(num) / std::sqrt(den) : 0.0;
    rep.pass = rep.delta_hat == 1.0 && rep.alpha_hat == 0.0 && rep.rho_hat == 1.0 && rep.witness_residual == 0.0;
    return rep;
}

double inventory_beta(const InventoryModel& model, std::size_t scan_points) {
    const auto& d = model.demand;
    double s1 = model.s1_quantile();
    double sinf = model.s_inf_quantile();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a <= scan_points; ++a) {
        double w = s1 + (sinf - s1) * static_cast<double>(a) / static_cast<double>(scan_points);
        double left = d.cdf(w - 2.0 * s1 / 3.0) - d.cdf(w - s1);
        double right = d.cdf(w) - d.cdf(w - s1 / 3.0);
        best = std::min(best, left * right);
    }
    return s1 * s1 / 9.0 * best;
}

VarianceGrowthReport inventory_variance_growth(const InventoryModel& model, const std::vector<std::size_t>& n_list,
                                               double start_state) {
    require(!n_list.empty(), "n_list must be nonempty");
    VarianceGrowthReport rep;
    rep.n_list = n_list;
    std::size_t n_max = *std::max_element(n_list.begin(), n_list.end());
    auto sol = solve_base_stock(model, n_max);
    rep.beta = inventory_beta(model);
    rep.beta_rigorous = 0.5 * (model.c_h - model.c) * (model.c_h - model.c) * rep.beta;
    for (std::size_t n : n_list) {
        auto chain = build_inventory_chain(model, sol, n, start_state);
        double v = moments_exact(chain.law, chain.rewards).variance;
        rep.variance.push_back(v);
        rep.beta_bound_holds = rep.beta_bound_holds && v >= rep.beta * static_cast<double>(n);
        rep.rigorous_bound_holds = rep.rigorous_bound_holds && v >= rep.beta_rigorous * static_cast<double>(n);
    }
    for (std::size_t a = 0; a + 1 < n_list.size(); ++a) {
        double ratio = rep.variance[a + 1] / rep.variance[a];
        rep.doubling_ratio.push_back(ratio);
        if (n_list[a + 1] == 2 * n_list[a]) rep.doubling_ok = rep.doubling_ok && ratio >= 1.5 && ratio <= 2.5;
    }
    // Least-squares slope of Var against n.
    double mn = 0.0, mv = 0.0;
    for (std::size_t a = 0; a < n_list.size(); ++a) {
        mn += static_cast<double>(n_list[a]);
        mv += rep.variance[a];
    }
    mn /= static_cast<double>(n_list.size());
    mv /= static_cast<double>(n_list.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t a = 0; a < n_list.size(); ++a) {
        double dx = static_cast<double>(n_list[a]) - mn;
        sxy += dx * (rep.variance[a] - mv);
        sxx += dx * dx;
    }
    rep.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    rep.pass = rep.slope > 0.0 && rep.doubling_ok && rep.rigorous_bound_holds;
    return rep;
}

}  // namespace nhclt
