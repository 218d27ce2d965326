#include "nhclt/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "nhclt/rng.hpp"

namespace nhclt {

namespace {

std::vector<double> cumulative(std::span<const double> p) {
    std::vector<double> c(p.size());
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t y = 0; y < p.size(); ++y) {
        acc += p[y];
        c[y] = acc;
        if (p[y] > 0.0) last = y;
    }
    // Rounding can leave the total just below 1; the last atom absorbs it.
    for (std::size_t y = last; y < p.size(); ++y) c[y] = std::numeric_limits<double>::infinity();
    return c;
}

std::size_t invert(const double* cum, std::size_t s, double u) {
    return static_cast<std::size_t>(std::upper_bound(cum, cum + s, u) - cum);
}

// Runs body(p) for p in [0, N) over contiguous chunks; rethrows the first failure.
template <class Body>
void parallel_for(std::size_t N, std::size_t workers, Body body) {
    workers = std::max<std::size_t>(1, std::min(workers, N));
    if (workers == 1) {
        for (std::size_t p = 0; p < N; ++p) body(p);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t p = w * N / workers; p < (w + 1) * N / workers; ++p) body(p);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

nlohmann::json number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

}  // namespace

std::size_t resolve_workers(std::size_t requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv(kWorkersEnv)) {
        char* end = nullptr;
        long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

PathSampler::PathSampler(const ChainLaw& law) : s_(law.states()), initial_cum_(cumulative(law.initial())) {
    std::map<const StochasticKernel*, std::size_t> seen;
    const auto& seq = law.seq();
    for (std::size_t i = 1; i <= seq.length(); ++i) {
        const StochasticKernel* k = seq.step_ptr(i).get();
        auto [it, fresh] = seen.emplace(k, tables_.size());
        if (fresh) {
            std::vector<double> t(s_ * s_);
            for (std::size_t x = 0; x < s_; ++x) {
                auto c = cumulative(k->row(x));
                std::copy(c.begin(), c.end(), t.begin() + x * s_);
            }
            tables_.push_back(std::move(t));
        }
        step_table_.push_back(it->second);
    }
}

void PathSampler::draw(std::mt19937_64& rng, std::span<std::size_t> path) const {
    if (path.size() != length()) throw DomainError("path buffer has the wrong length");
    path[0] = invert(initial_cum_.data(), s_, uniform01(rng));
    for (std::size_t i = 1; i < path.size(); ++i) {
        const double* row = tables_[step_table_[i - 1]].data() + path[i - 1] * s_;
        path[i] = invert(row, s_, uniform01(rng));
    }
}

std::vector<std::vector<std::size_t>> sample_paths(const ChainLaw& law, std::uint64_t seed, std::size_t N,
                                                   std::size_t workers) {
    if (N == 0) throw DomainError("N must be positive");
    PathSampler sampler(law);
    std::vector<std::vector<std::size_t>> paths(N, std::vector<std::size_t>(sampler.length()));
    parallel_for(N, resolve_workers(workers), [&](std::size_t p) {
        std::mt19937_64 rng(substream_seed(seed, p));
        sampler.draw(rng, paths[p]);
    });
    return paths;
}

double path_total(const RewardFunctionArray& rewards, std::span<const std::size_t> path) {
    const std::size_t n = rewards.horizon(), m = rewards.lookahead();
    if (path.size() != n + m) throw DomainError("path length must be n + m");
    double total = 0.0;
    for (std::size_t i = 1; i <= n; ++i) total += rewards(i, path.subspan(i - 1, m + 1));
    return total;
}

SampleBatch total_reward_samples(const std::vector<std::vector<std::size_t>>& paths,
                                 const RewardFunctionArray& rewards, std::uint64_t seed) {
    SampleBatch b;
    b.master_seed = seed;
    b.n = rewards.horizon();
    b.m = rewards.lookahead();
    b.totals.reserve(paths.size());
    for (const auto& p : paths) b.totals.push_back(path_total(rewards, p));
    return b;
}

SampleBatch sample_totals(const ChainLaw& law, const RewardFunctionArray& rewards, std::uint64_t seed,
                          std::size_t N, std::size_t workers) {
    if (N == 0) throw DomainError("N must be positive");
    if (rewards.horizon() != law.horizon() || rewards.lookahead() != law.lookahead() ||
        rewards.states() != law.states())
        throw DomainError("rewards do not match the chain law");
    PathSampler sampler(law);
    SampleBatch b;
    b.master_seed = seed;
    b.n = rewards.horizon();
    b.m = rewards.lookahead();
    b.totals.assign(N, 0.0);
    parallel_for(N, resolve_workers(workers), [&](std::size_t p) {
        thread_local std::vector<std::size_t> path;
        path.resize(sampler.length());
        std::mt19937_64 rng(substream_seed(seed, p));
        sampler.draw(rng, path);
        b.totals[p] = path_total(rewards, path);
    });
    return b;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_distance_normal(std::vector<double> z) {
    if (z.empty()) throw DomainError("empty sample");
    std::sort(z.begin(), z.end());
    const double N = static_cast<double>(z.size());
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double f = normal_cdf(z[i]);
        d = std::max({d, (static_cast<double>(i) + 1.0) / N - f, f - static_cast<double>(i) / N});
    }
    return std::min(d, 1.0);
}

CltReport normality_report(const SampleBatch& batch, std::optional<Moments> exact, double C_n, double alpha_n) {
    const std::size_t N = batch.totals.size();
    if (N < 100) throw DomainError("normality_report needs N >= 100");
    CltReport r;
    r.n = batch.n;
    r.N = N;
    r.seed = batch.master_seed;
    double sum = 0.0;
    for (double t : batch.totals) sum += t;
    r.sample_mean = sum / static_cast<double>(N);
    double ss = 0.0;
    for (double t : batch.totals) ss += (t - r.sample_mean) * (t - r.sample_mean);
    r.sample_var = ss / static_cast<double>(N - 1);

    r.standardized_by_exact = exact.has_value();
    r.mean_used = exact ? exact->mean : r.sample_mean;
    r.var_used = exact ? exact->variance : r.sample_var;
    double scale = std::max(1.0, C_n * C_n);
    r.degenerate = r.sample_var <= 1e-24 * scale || r.var_used <= 1e-24 * scale;
    double a = alpha_n > 0.0 ? alpha_n : 0.0;
    if (r.degenerate || a == 0.0)
        r.condition_ratio = std::numeric_limits<double>::infinity();
    else
        r.condition_ratio = C_n * C_n / (a * a) / r.var_used;
    if (!r.degenerate) r.ks_distance = ks_distance_normal(standardized_sample(batch, r));
    return r;
}

std::vector<double> standardized_sample(const SampleBatch& batch, const CltReport& rep) {
    if (rep.degenerate) return {};
    double sd = std::sqrt(rep.var_used);
    std::vector<double> z(batch.totals.size());
    for (std::size_t p = 0; p < z.size(); ++p) z[p] = (batch.totals[p] - rep.mean_used) / sd;
    return z;
}

ConditionReport clt_condition_report(std::vector<ConditionRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const ConditionRow& a, const ConditionRow& b) { return a.n < b.n; });
    ConditionReport r;
    for (auto& row : rows) {
        if (row.variance <= 0.0 || row.alpha_n <= 0.0)
            row.ratio = std::numeric_limits<double>::infinity();
        else
            row.ratio = row.C_n * row.C_n / (row.alpha_n * row.alpha_n) / row.variance;
        if (!std::isfinite(row.ratio)) r.finite = false;
    }
    for (std::size_t k = 1; k < rows.size(); ++k)
        if (!(rows[k].ratio < rows[k - 1].ratio)) r.decreasing = false;
    if (r.finite && rows.size() >= 2) {
        double mx = 0.0, my = 0.0;
        for (const auto& row : rows) {
            mx += std::log(static_cast<double>(row.n));
            my += std::log(std::max(row.ratio, 1e-300));
        }
        mx /= static_cast<double>(rows.size());
        my /= static_cast<double>(rows.size());
        double sxy = 0.0, sxx = 0.0;
        for (const auto& row : rows) {
            double dx = std::log(static_cast<double>(row.n)) - mx;
            sxy += dx * (std::log(std::max(row.ratio, 1e-300)) - my);
            sxx += dx * dx;
        }
        r.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    } else {
        r.slope = std::numeric_limits<double>::quiet_NaN();
    }
    r.pass = rows.size() >= 2 && r.finite && r.decreasing && r.slope <= kConditionSlopeMax;
    r.rows = std::move(rows);
    return r;
}

std::string totals_csv(const SampleBatch& batch) {
    std::ostringstream os;
    os.precision(17);
    os << "path,total\n";
    for (std::size_t p = 0; p < batch.totals.size(); ++p) os << p << ',' << batch.totals[p] << '\n';
    return os.str();
}

std::string histogram_csv(const std::vector<double>& z, std::size_t bins) {
    const double lo = -4.0, hi = 4.0, w = (hi - lo) / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    for (double v : z) {
        if (v < lo || v >= hi) continue;
        counts[std::min(bins - 1, static_cast<std::size_t>((v - lo) / w))]++;
    }
    std::ostringstream os;
    os.precision(10);
    os << "bin_center,empirical_density,normal_density\n";
    const double norm = z.empty() ? 1.0 : static_cast<double>(z.size()) * w;
    for (std::size_t b = 0; b < bins; ++b) {
        double x = lo + (static_cast<double>(b) + 0.5) * w;
        os << x << ',' << static_cast<double>(counts[b]) / norm << ','
           << std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI) << '\n';
    }
    return os.str();
}

nlohmann::json to_json(const CltReport& r) {
    nlohmann::json j;
    j["n"] = r.n;
    j["N"] = r.N;
    j["seed"] = r.seed;
    j["mean"] = number(r.sample_mean);
    j["var"] = number(r.sample_var);
    j["standardized_by_exact"] = r.standardized_by_exact;
    j["mean_used"] = number(r.mean_used);
    j["var_used"] = number(r.var_used);
    j["degenerate"] = r.degenerate;
    j["ks"] = r.ks_distance ? nlohmann::json(*r.ks_distance) : nlohmann::json(nullptr);
    j["ratio"] = number(r.condition_ratio);
    return j;
}

nlohmann::json to_json(const ConditionReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"n", row.n},
                        {"C_n", number(row.C_n)},
                        {"alpha_n", number(row.alpha_n)},
                        {"var_Sn", number(row.variance)},
                        {"ratio", number(row.ratio)}});
    return {{"rows", rows},
            {"finite", r.finite},
            {"decreasing", r.decreasing},
            {"slope", number(r.slope)},
            {"pass", r.pass}};
}

}  // namespace nhclt
