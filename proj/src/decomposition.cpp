#include "nhclt/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nhclt {

namespace {

void require_exact_window(std::size_t m) {
    if (m > 1)
        throw WindowBlowupError("window blowup: exact engine supports look-ahead m <= 1, got m = " +
                                std::to_string(m));
}

void require_compatible(const ChainLaw& law, const RewardFunctionArray& f) {
    if (f.states() != law.states() || f.horizon() != law.horizon() || f.lookahead() != law.lookahead())
        throw DomainError("reward array dimensions (states, n, m) do not match the chain law");
}

// E[Z_{n,i} | X_{n,i} = x] for m <= 1.
std::vector<double> one_step_reward(const ChainLaw& law, const RewardFunctionArray& f, std::size_t i) {
    std::size_t s = law.states();
    std::vector<double> r(s);
    if (law.lookahead() == 0) {
        for (std::size_t x = 0; x < s; ++x) r[x] = f.at(i, x);
        return r;
    }
    const auto& k = law.seq().step(i);
    for (std::size_t x = 0; x < s; ++x) {
        auto row = k.row(x);
        double acc = 0.0;
        for (std::size_t y = 0; y < s; ++y)
            if (row[y] != 0.0) acc += row[y] * f.at(i, x, y);
        r[x] = acc;
    }
    return r;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sup_abs(std::span<const double> h, const std::vector<char>& active) {
    double best = 0.0;
    for (std::size_t x = 0; x < h.size(); ++x)
        if (active[x]) best = std::max(best, std::abs(h[x]));
    return best;
}

}  // namespace

ChainLaw::ChainLaw(std::vector<double> initial, KernelSequence seq)
    : initial_(std::move(initial)), seq_(std::move(seq)) {
    if (initial_.size() != seq_.grid()->size())
        throw DomainError("initial distribution length must equal grid length");
    double s = 0.0;
    for (double p : initial_) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("initial distribution must be nonnegative");
        s += p;
    }
    if (std::abs(s - 1.0) > kRowSumTolerance) throw DomainError("initial distribution must sum to 1");
}

RewardFunctionArray::RewardFunctionArray(std::size_t states, std::size_t horizon, std::size_t lookahead,
                                         std::vector<Tensor> tensors, std::vector<double> offsets)
    : s_(states), n_(horizon), m_(lookahead), tensors_(std::move(tensors)), offsets_(std::move(offsets)) {
    if (offsets_.empty()) offsets_.assign(n_, 0.0);
    if (tensors_.size() != n_ || offsets_.size() != n_)
        throw DomainError("reward array needs one tensor and one offset per period");
    std::size_t expected = 1;
    for (std::size_t k = 0; k <= m_; ++k) expected *= s_;
    tensor_min_.resize(n_);
    tensor_max_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        if (!tensors_[i] || tensors_[i]->size() != expected)
            throw DomainError("reward tensor rank must be 1+m over the grid");
        if (!std::isfinite(offsets_[i])) throw DomainError("reward offsets must be finite");
        if (i > 0 && tensors_[i] == tensors_[i - 1]) {
            tensor_min_[i] = tensor_min_[i - 1];
            tensor_max_[i] = tensor_max_[i - 1];
            continue;
        }
        const auto& t = *tensors_[i];
        for (double v : t)
            if (!std::isfinite(v)) throw DomainError("reward entries must be finite");
        auto [lo, hi] = std::minmax_element(t.begin(), t.end());
        tensor_min_[i] = *lo;
        tensor_max_[i] = *hi;
    }
}

double RewardFunctionArray::operator()(std::size_t i, std::span<const std::size_t> window) const {
    if (window.size() != m_ + 1) throw DomainError("reward window must have 1+m coordinates");
    std::size_t flat = 0;
    for (std::size_t w : window) flat = flat * s_ + w;
    return (*tensors_[i - 1])[flat] - offsets_[i - 1];
}

double RewardFunctionArray::bound() const {
    double c = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
        c = std::max({c, std::abs(tensor_max_[i] - offsets_[i]), std::abs(tensor_min_[i] - offsets_[i])});
    return c;
}

RewardFunctionArray RewardFunctionArray::shifted(std::span<const double> shift) const {
    if (shift.size() != n_) throw DomainError("shift must have one entry per period");
    std::vector<double> off = offsets_;
    for (std::size_t i = 0; i < n_; ++i) off[i] += shift[i];
    return RewardFunctionArray(s_, n_, m_, tensors_, std::move(off));
}

std::vector<std::vector<double>> marginals(const ChainLaw& law) {
    std::size_t total = law.horizon() + law.lookahead();
    std::vector<std::vector<double>> mu;
    mu.reserve(total);
    mu.push_back(law.initial());
    for (std::size_t t = 1; t < total; ++t) mu.push_back(law.seq().step(t).push(mu.back()));
    return mu;
}

std::vector<std::vector<char>> support_masks(const std::vector<std::vector<double>>& mu) {
    std::vector<std::vector<char>> out;
    out.reserve(mu.size());
    for (const auto& v : mu) {
        std::vector<char> mask(v.size());
        for (std::size_t x = 0; x < v.size(); ++x) mask[x] = v[x] >= kReachableMass;
        out.push_back(std::move(mask));
    }
    return out;
}

std::vector<double> reward_means(const ChainLaw& law, const RewardFunctionArray& rewards) {
    require_compatible(law, rewards);
    require_exact_window(law.lookahead());
    auto mu = marginals(law);
    std::vector<double> means(law.horizon());
    for (std::size_t i = 1; i <= law.horizon(); ++i)
        means[i - 1] = dot(mu[i - 1], one_step_reward(law, rewards, i));
    return means;
}

RewardFunctionArray center_rewards(const ChainLaw& law, const RewardFunctionArray& rewards) {
    return rewards.shifted(reward_means(law, rewards));
}

Moments moments_exact(const ChainLaw& law, const RewardFunctionArray& rewards) {
    require_compatible(law, rewards);
    require_exact_window(law.lookahead());
    const std::size_t s = law.states();
    const std::size_t n = law.horizon();
    auto means = reward_means(law, rewards);

    Moments out;
    for (double e : means) out.mean += e;

    // p = P(X_t = x), a = E[T 1{X_t = x}], b = E[T^2 1{X_t = x}], T the centered partial sum.
    std::vector<double> p = law.initial();
    std::vector<double> a(s, 0.0), b(s, 0.0);
    std::vector<double> p2(s), a2(s), b2(s);

    if (law.lookahead() == 0) {
        auto add_period = [&](std::size_t i) {
            for (std::size_t x = 0; x < s; ++x) {
                double z = rewards.at(i, x) - means[i - 1];
                b[x] += 2.0 * a[x] * z + p[x] * z * z;
                a[x] += p[x] * z;
            }
        };
        add_period(1);
        for (std::size_t t = 1; t < n; ++t) {
            const auto& k = law.seq().step(t);
            p = k.push(p);
            a = k.push(a);
            b = k.push(b);
            add_period(t + 1);
        }
    } else {
        for (std::size_t t = 1; t <= n; ++t) {
            const auto& k = law.seq().step(t);
            std::fill(p2.begin(), p2.end(), 0.0);
            std::fill(a2.begin(), a2.end(), 0.0);
            std::fill(b2.begin(), b2.end(), 0.0);
            for (std::size_t x = 0; x < s; ++x) {
                if (p[x] == 0.0 && a[x] == 0.0 && b[x] == 0.0) continue;
                auto row = k.row(x);
                for (std::size_t y = 0; y < s; ++y) {
                    double q = row[y];
                    if (q == 0.0) continue;
                    double z = rewards.at(t, x, y) - means[t - 1];
                    p2[y] += q * p[x];
                    a2[y] += q * (a[x] + p[x] * z);
                    b2[y] += q * (b[x] + 2.0 * a[x] * z + p[x] * z * z);
                }
            }
            std::swap(p, p2);
            std::swap(a, a2);
            std::swap(b, b2);
        }
    }
    double second = 0.0;
    for (double v : b) second += v;
    out.variance = std::max(second, 0.0);
    return out;
}

double state_functional_variance(const ChainLaw& law,
                                 const std::vector<std::pair<std::size_t, std::vector<double>>>& terms) {
    const std::size_t s = law.states();
    const std::size_t total = law.horizon() + law.lookahead();
    std::vector<std::vector<const std::vector<double>*>> at_time(total + 1);
    for (const auto& [t, g] : terms) {
        if (t < 1 || t > total) throw DomainError("state functional time out of range");
        if (g.size() != s) throw DomainError("state functional length must equal grid length");
        at_time[t].push_back(&g);
    }
    std::size_t last = 0;
    for (std::size_t t = 1; t <= total; ++t)
        if (!at_time[t].empty()) last = t;
    if (last == 0) return 0.0;

    std::vector<double> p = law.initial();
    std::vector<double> a(s, 0.0), b(s, 0.0);
    for (std::size_t t = 1; t <= last; ++t) {
        if (t > 1) {
            const auto& k = law.seq().step(t - 1);
            p = k.push(p);
            a = k.push(a);
            b = k.push(b);
        }
        for (const auto* g : at_time[t]) {
            double mean = dot(p, *g);
            for (std::size_t x = 0; x < s; ++x) {
                double z = (*g)[x] - mean;
                b[x] += 2.0 * a[x] * z + p[x] * z * z;
                a[x] += p[x] * z;
            }
        }
    }
    double second = 0.0;
    for (double v : b) second += v;
    return std::max(second, 0.0);
}

double DecompositionReport::sum_d_second_moments() const {
    double s = 0.0;
    for (double v : d_second_moments) s += v;
    return s;
}

DecompositionReport decompose(const ChainLaw& law, const RewardFunctionArray& rewards) {
    require_compatible(law, rewards);
    require_exact_window(law.lookahead());
    const std::size_t s = law.states();
    const std::size_t n = law.horizon();
    const std::size_t m = law.lookahead();

    DecompositionReport rep;
    rep.n = n;
    rep.m = m;
    rep.centered = true;
    rep.original_means = reward_means(law, rewards);
    auto centered = std::make_shared<const RewardFunctionArray>(rewards.shifted(rep.original_means));
    rep.centered_rewards = centered;
    const auto& f = *centered;
    rep.C_n = f.bound();
    rep.marginals = marginals(law);
    rep.support = support_masks(rep.marginals);
    rep.alpha_n = n >= 2 ? minimal_ergodic_coefficient(law.seq(), rep.support).alpha_n : 1.0;

    // Backward sweep: W_i(x) = E[sum_{j >= i} Z_j | X_i = x].
    std::vector<std::vector<double>> W(n + 2, std::vector<double>(s, 0.0));
    for (std::size_t i = n; i >= 1; --i) {
        auto r = one_step_reward(law, f, i);
        if (m == 1 || i < n) {
            auto tail = law.seq().step(i).apply(W[i + 1]);
            for (std::size_t x = 0; x < s; ++x) r[x] += tail[x];
        }
        W[i] = std::move(r);
    }

    rep.V.assign(n + 1, std::vector<double>(s, 0.0));
    if (m == 1) {
        for (std::size_t i = 1; i <= n; ++i) rep.V[i - 1] = W[i];
    } else {
        double v0 = dot(law.initial(), W[1]);
        rep.V[0].assign(s, v0);
        for (std::size_t i = 1; i < n; ++i)
            for (std::size_t x = 0; x < s; ++x) rep.V[i][x] = W[i][x] - f.at(i, x);
    }

    // Martingale differences d_i(prev, cur) and their conditional moments.
    rep.d_second_moments.resize(n);
    rep.eta.assign(n, std::vector<double>(s, 0.0));
    for (std::size_t i = 1 + m; i <= n + m; ++i) {
        auto& eta = rep.eta[i - 1 - m];
        if (i == 1) {
            // m = 0, first difference: trivial conditioning sigma-field.
            double mean = 0.0, second = 0.0;
            for (std::size_t y = 0; y < s; ++y) {
                double d = mds_value(rep, 1, 0, y);
                mean += law.initial()[y] * d;
                second += law.initial()[y] * d * d;
            }
            eta.assign(s, second);
            rep.max_conditional_mean = std::max(rep.max_conditional_mean, std::abs(mean));
            rep.d_second_moments[0] = second;
            continue;
        }
        const auto& k = law.seq().step(i - 1);
        const auto& mask = rep.support[i - 2];
        for (std::size_t x = 0; x < s; ++x) {
            auto row = k.row(x);
            double mean = 0.0, second = 0.0;
            for (std::size_t y = 0; y < s; ++y) {
                if (row[y] == 0.0) continue;
                double d = mds_value(rep, i, x, y);
                mean += row[y] * d;
                second += row[y] * d * d;
            }
            eta[x] = second;
            if (mask[x]) rep.max_conditional_mean = std::max(rep.max_conditional_mean, std::abs(mean));
        }
        rep.d_second_moments[i - 1 - m] = dot(rep.marginals[i - 2], eta);
    }

    auto mom = moments_exact(law, rewards);
    rep.mean_Sn = mom.mean;
    rep.var_Sn = mom.variance;

    const auto& vm = rep.V[0];
    rep.e_vm_squared = 0.0;
    if (m == 0) {
        rep.e_vm_squared = vm[0] * vm[0];
    } else {
        for (std::size_t x = 0; x < s; ++x) rep.e_vm_squared += law.initial()[x] * vm[x] * vm[x];
    }

    std::vector<std::pair<std::size_t, std::vector<double>>> terms;
    for (std::size_t i = std::max<std::size_t>(2, 1 + m); i <= n + m; ++i)
        terms.emplace_back(i - 1, rep.eta[i - 1 - m]);
    rep.delta_n_second_moment = state_functional_variance(law, terms);
    return rep;
}

double mds_value(const DecompositionReport& rep, std::size_t i, std::size_t prev, std::size_t cur) {
    const auto& f = *rep.centered_rewards;
    if (rep.m == 0) {
        double before = (i == 1) ? rep.V[0][0] : rep.V[i - 1][prev];
        return rep.V[i][cur] - before + f.at(i, cur);
    }
    return rep.V[i - 1][cur] - rep.V[i - 2][prev] + f.at(i - 1, prev, cur);
}

double pathwise_residual(const DecompositionReport& rep, std::span<const std::size_t> path) {
    const std::size_t n = rep.n, m = rep.m;
    if (path.size() != n + m) throw DomainError("path length must be n+m");
    const auto& f = *rep.centered_rewards;
    double sn = 0.0;
    for (std::size_t i = 1; i <= n; ++i) sn += f(i, path.subspan(i - 1, m + 1));
    double rhs = (m == 0) ? rep.V[0][0] : rep.V[0][path[0]];
    for (std::size_t i = 1 + m; i <= n + m; ++i)
        rhs += mds_value(rep, i, i >= 2 ? path[i - 2] : 0, path[i - 1]);
    return sn - rhs;
}

VarianceIdentityResult variance_identity_check(const DecompositionReport& rep) {
    VarianceIdentityResult out;
    out.lhs = rep.var_Sn;
    out.rhs = rep.e_vm_squared + rep.sum_d_second_moments();
    double scale = std::max({std::abs(out.lhs), std::abs(out.rhs),
                             1e-6 * rep.C_n * rep.C_n, std::numeric_limits<double>::min()});
    out.residual = std::abs(out.lhs - out.rhs) / scale;
    out.pass = out.residual <= kIdentityRelativeTolerance;

    auto& sw = out.sandwich;
    sw.name = "variance_sandwich";
    double mconst = static_cast<double>((rep.m + 2) * (rep.m + 2));
    double slack = rep.alpha_n > 0.0 ? mconst * rep.C_n * rep.C_n / (rep.alpha_n * rep.alpha_n)
                                     : std::numeric_limits<double>::infinity();
    double sum_d = rep.sum_d_second_moments();
    double tol = kIdentityRelativeTolerance * std::max(1.0, std::abs(rep.var_Sn));
    bool upper = sum_d <= rep.var_Sn + tol;
    bool lower = rep.var_Sn - slack <= sum_d + tol;
    sw.pass = upper && lower;
    sw.lhs = rep.var_Sn - sum_d;
    sw.rhs = slack;
    sw.worst_ratio = slack > 0.0 ? std::max(0.0, sw.lhs) / slack : 0.0;
    sw.instances = 1;
    out.pass = out.pass && sw.pass;
    return out;
}

CheckResult dobrushin_lower_bound_check(const ChainLaw& law, const RewardFunctionArray& rewards) {
    require_compatible(law, rewards);
    if (law.lookahead() != 0)
        throw DomainError("variance lower bound applies only to m = 0; no analog exists for m >= 1");
    CheckResult c;
    c.name = "dobrushin_variance_lower_bound";
    auto mu = marginals(law);
    double sum_var = 0.0;
    for (std::size_t i = 1; i <= law.horizon(); ++i) {
        double e1 = 0.0, e2 = 0.0;
        for (std::size_t x = 0; x < law.states(); ++x) {
            double v = rewards.at(i, x);
            e1 += mu[i - 1][x] * v;
            e2 += mu[i - 1][x] * v * v;
        }
        sum_var += std::max(0.0, e2 - e1 * e1);
    }
    double alpha = law.horizon() >= 2
                       ? minimal_ergodic_coefficient(law.seq(), support_masks(mu)).alpha_n
                       : 1.0;
    c.lhs = 0.25 * alpha * sum_var;
    c.rhs = moments_exact(law, rewards).variance;
    c.pass = c.lhs <= c.rhs * (1.0 + kIdentityRelativeTolerance) + 1e-300;
    c.worst_ratio = c.rhs > 0.0 ? c.lhs / c.rhs : (c.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    c.instances = 1;
    return c;
}

double delta_n_constant(std::size_t m) {
    // sum Var[eta_i] <= |d|_inf^2 sum E[eta_i], cross terms <= 2 M_osc C^2 alpha^-2 sum E[eta_i],
    // with |d|_inf <= (2m+5) C / alpha and sum E[eta_i] <= Var[S_n].
    double dm = static_cast<double>(2 * m + 5);
    return dm * dm + 2.0 * sum_d_squared_oscillation_constant(m);
}

CheckResult delta_n_l2_check(const DecompositionReport& rep) {
    CheckResult c;
    c.name = "delta_n_l2_bound";
    c.lhs = rep.delta_n_second_moment;
    double base = rep.alpha_n > 0.0 ? rep.C_n * rep.C_n / (rep.alpha_n * rep.alpha_n) * rep.var_Sn
                                    : std::numeric_limits<double>::infinity();
    c.rhs = delta_n_constant(rep.m) * base;
    double tol = 1e-12 * std::max(1.0, rep.C_n * rep.C_n);
    c.pass = c.lhs <= c.rhs + tol;
    c.worst_ratio = base > 0.0 ? c.lhs / base : (c.lhs > tol ? std::numeric_limits<double>::infinity() : 0.0);
    c.instances = 1;
    return c;
}

nlohmann::json to_json(const CheckResult& c) {
    auto finite_or_string = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
    };
    return {{"name", c.name},
            {"pass", c.pass},
            {"lhs", finite_or_string(c.lhs)},
            {"rhs", finite_or_string(c.rhs)},
            {"worst_ratio", finite_or_string(c.worst_ratio)},
            {"instances", c.instances}};
}

nlohmann::json to_json(const DecompositionReport& rep) {
    nlohmann::json j;
    j["n"] = rep.n;
    j["m"] = rep.m;
    j["centered"] = rep.centered;
    j["original_means"] = rep.original_means;
    j["mean_Sn"] = rep.mean_Sn;
    j["var_Sn"] = rep.var_Sn;
    j["C_n"] = rep.C_n;
    j["alpha_n"] = rep.alpha_n;
    j["V"] = rep.V;
    j["d_second_moments"] = rep.d_second_moments;
    j["eta"] = rep.eta;
    j["max_conditional_mean"] = rep.max_conditional_mean;
    j["e_vm_squared"] = rep.e_vm_squared;
    j["delta_n_second_moment"] = rep.delta_n_second_moment;
    return j;
}

std::string decomposition_csv(const DecompositionReport& rep) {
    std::ostringstream out;
    out.precision(17);
    out << "i,E_d2,sup_abs_V\n";
    for (std::size_t i = 1 + rep.m; i <= rep.n + rep.m; ++i) {
        const auto& v = rep.value(i);
        double sup = sup_abs(v, rep.support[i - 1]);
        out << i << ',' << rep.d_second_moments[i - 1 - rep.m] << ',' << sup << '\n';
    }
    return out.str();
}

}  // namespace nhclt
