#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "nhclt/decomposition.hpp"

namespace nhclt {

namespace {

// Kernel with duplicate rows folded and zero entries dropped; apply() is the hot loop
// of the pullbacks K_{i,j} h.
class CompressedKernel {
public:
    explicit CompressedKernel(const StochasticKernel& k) : n_(k.size()), cls_(k.size()) {
        std::map<std::vector<double>, std::size_t> seen;
        for (std::size_t x = 0; x < n_; ++x) {
            auto row = k.row(x);
            std::vector<double> key(row.begin(), row.end());
            auto [it, fresh] = seen.emplace(std::move(key), start_.size());
            if (fresh) {
                start_.push_back(cols_.size());
                for (std::size_t y = 0; y < n_; ++y) {
                    if (row[y] == 0.0) continue;
                    cols_.push_back(y);
                    vals_.push_back(row[y]);
                }
            }
            cls_[x] = it->second;
        }
        start_.push_back(cols_.size());
    }

    std::vector<double> apply(const std::vector<double>& h) const {
        std::size_t reps = start_.size() - 1;
        std::vector<double> r(reps);
        for (std::size_t c = 0; c < reps; ++c) {
            double s = 0.0;
            for (std::size_t e = start_[c]; e < start_[c + 1]; ++e) s += vals_[e] * h[cols_[e]];
            r[c] = s;
        }
        std::vector<double> out(n_);
        for (std::size_t x = 0; x < n_; ++x) out[x] = r[cls_[x]];
        return out;
    }

private:
    std::size_t n_;
    std::vector<std::size_t> cls_;
    std::vector<std::size_t> start_;
    std::vector<std::size_t> cols_;
    std::vector<double> vals_;
};

double sup_norm_on(const std::vector<double>& h, const std::vector<char>& active) {
    double best = 0.0;
    for (std::size_t x = 0; x < h.size(); ++x)
        if (active[x]) best = std::max(best, std::abs(h[x]));
    return best;
}

class Tally {
public:
    Tally(std::string name, double scale) : scale_(scale) { c_.name = std::move(name); }

    void add(double lhs, double rhs) {
        ++c_.instances;
        double tol = 1e-9 * std::max(scale_, 1e-300);
        if (lhs > rhs + tol) c_.pass = false;
        // Noise-level lhs against an underflowing rhs is not a violation; measure against the tolerance.
        double ratio = lhs <= tol ? 0.0 : lhs / std::max(rhs, tol);
        if (c_.instances == 1 || ratio > c_.worst_ratio) {
            c_.worst_ratio = ratio;
            c_.lhs = lhs;
            c_.rhs = rhs;
        }
    }

    const CheckResult& result() const { return c_; }

private:
    CheckResult c_;
    double scale_;
};

}  // namespace

double sum_d_squared_oscillation_constant(std::size_t m) {
    // Osc(V^2) + S0 + S1 + S2 + S3 + S4, each bounded by its constant times C^2 alpha^-2.
    double mm = static_cast<double>(m);
    return 2.0 * (mm + 2.0) * (mm + 2.0) + 2.0 * (1.0 + mm) + 8.0 * mm * mm + 12.0 * mm + 4.0 * mm + 12.0;
}

OscillationSuiteResult oscillation_bound_suite(const ChainLaw& law, const RewardFunctionArray& rewards) {
    return oscillation_bound_suite(law, decompose(law, rewards));
}

OscillationSuiteResult oscillation_bound_suite(const ChainLaw& law, const DecompositionReport& rep) {
    const std::size_t s = law.states();
    const std::size_t n = rep.n;
    const std::size_t m = rep.m;
    const auto& f = *rep.centered_rewards;
    const double C = rep.C_n;
    const double a = rep.alpha_n;
    const double rho = 1.0 - a;
    const double C2 = C * C;
    const auto& support = rep.support;
    auto pw = [&](std::size_t e) { return std::pow(rho, static_cast<double>(e)); };
    auto osc = [&](const std::vector<double>& h, std::size_t t) { return oscillation(h, support[t - 1]); };

    std::map<const StochasticKernel*, CompressedKernel> cache;
    auto K = [&](std::size_t t) -> const CompressedKernel& {
        const StochasticKernel* p = law.seq().step_ptr(t).get();
        auto it = cache.find(p);
        if (it == cache.end()) it = cache.emplace(p, CompressedKernel(*p)).first;
        return it->second;
    };

    // r_j = E[Z_j | X_j], s_j = E[Z_j^2 | X_j].
    std::vector<std::vector<double>> r(n + 1), sq(n + 1);
    for (std::size_t j = 1; j <= n; ++j) {
        r[j].assign(s, 0.0);
        sq[j].assign(s, 0.0);
        for (std::size_t x = 0; x < s; ++x) {
            if (m == 0) {
                double v = f.at(j, x);
                r[j][x] = v;
                sq[j][x] = v * v;
                continue;
            }
            auto row = law.seq().step(j).row(x);
            for (std::size_t y = 0; y < s; ++y) {
                if (row[y] == 0.0) continue;
                double v = f.at(j, x, y);
                r[j][x] += row[y] * v;
                sq[j][x] += row[y] * v * v;
            }
        }
    }

    Tally mean_sup("conditional_mean_sup_le_osc", C);
    Tally mean_osc("conditional_mean_osc", C);
    Tally second_osc("conditional_second_moment_osc", C2);
    Tally range1("cross_moment_range1", C2);
    Tally range2("cross_moment_range2", C2);
    Tally range3("cross_moment_range3", C2);
    Tally range4("cross_moment_range4", C2);
    Tally v_sup("value_to_go_sup", C);
    Tally d_sup("mds_sup", C);
    Tally mds_mean("martingale_conditional_mean", 1.0);
    Tally tail_osc("sum_d_squared_osc", C2);
    Tally s0("osc_sum_S0", C2), s1("osc_sum_S1", C2), s2("osc_sum_S2", C2), s3("osc_sum_S3", C2),
        s4("osc_sum_S4", C2);

    const std::size_t first_i = std::max<std::size_t>(m, 1);
    std::vector<double> S0(n + m + 1, 0.0), S1(n + m + 1, 0.0), S2(n + m + 1, 0.0), S3(n + m + 1, 0.0),
        S4(n + m + 1, 0.0);

    // Conditional moments: E[Z_j | F_i] = K_{i,j} r_j, E[Z_j^2 | F_i] = K_{i,j} s_j.
    for (std::size_t j = 1; j <= n; ++j) {
        if (m == 1 && j >= first_i) S0[j] += osc(sq[j], j);
        auto u = r[j];
        auto v = sq[j];
        for (std::size_t i = j - 1; i >= 1; --i) {
            u = K(i).apply(u);
            v = K(i).apply(v);
            double ou = osc(u, i);
            mean_sup.add(sup_norm_on(u, support[i - 1]), ou);
            mean_osc.add(ou, 2.0 * C * pw(j - i));
            double ov = osc(v, i);
            second_osc.add(ov, 2.0 * C2 * pw(j - i));
            if (i >= first_i) S0[i] += ov;
        }
    }

    // Cross moments E[Z_j Z_k | F_i], j < k <= n.
    for (std::size_t k = 2; k <= n; ++k) {
        auto w = r[k];  // K_{t,k} r_k as a function of X_t, t = k initially
        for (std::size_t j = k - 1; j >= 1; --j) {
            std::vector<double> q(s, 0.0);
            if (m == 0) {
                w = K(j).apply(w);
                for (std::size_t x = 0; x < s; ++x) q[x] = f.at(j, x) * w[x];
            } else {
                const auto& kj = law.seq().step(j);
                for (std::size_t x = 0; x < s; ++x) {
                    auto row = kj.row(x);
                    double acc = 0.0;
                    for (std::size_t y = 0; y < s; ++y)
                        if (row[y] != 0.0) acc += row[y] * f.at(j, x, y) * w[y];
                    q[x] = acc;
                }
                w = K(j).apply(w);
                // i = j: Range 1 (k = j+1) or Range 2.
                double oq = osc(q, j);
                if (k == j + 1) {
                    range1.add(oq, 4.0 * C2);
                    S1[j] += 2.0 * oq;
                } else {
                    range2.add(oq, 6.0 * C2 * pw(k - j - m));
                    S2[j] += 2.0 * oq;
                }
            }
            bool near = k <= j + m;
            auto u = std::move(q);
            for (std::size_t i = j - 1; i >= 1; --i) {
                u = K(i).apply(u);
                double ou = osc(u, i);
                if (near) {
                    range3.add(ou, 2.0 * C2 * pw(j - i));
                    S3[i] += 2.0 * ou;
                } else {
                    range4.add(ou, 6.0 * C2 * pw(k - i - m));
                    S4[i] += 2.0 * ou;
                }
            }
        }
    }

    double ainv = a > 0.0 ? 1.0 / a : std::numeric_limits<double>::infinity();
    double md = static_cast<double>(m);
    for (std::size_t i = first_i; i + m <= n + m && i <= n; ++i) {
        s0.add(S0[i], 2.0 * (1.0 + md) * C2 * ainv);
        s1.add(S1[i], 8.0 * md * md * C2);
        s2.add(S2[i], 12.0 * md * C2 * ainv);
        s3.add(S3[i], 4.0 * md * C2 * ainv);
        s4.add(S4[i], 12.0 * C2 * ainv * ainv);
    }

    // L-infinity bounds for V and d over reachable windows.
    for (std::size_t i = m; i <= n + m; ++i) {
        const auto& v = rep.value(i);
        double sup = (i == 0) ? std::abs(v[0]) : sup_norm_on(v, support[i - 1]);
        v_sup.add(sup, (md + 2.0) * C * ainv);
    }
    for (std::size_t i = 1 + m; i <= n + m; ++i) {
        double sup = 0.0;
        double worst_mean = 0.0;
        if (i == 1) {
            double mean = 0.0;
            for (std::size_t y = 0; y < s; ++y) {
                if (law.initial()[y] == 0.0) continue;
                double d = mds_value(rep, 1, 0, y);
                sup = std::max(sup, std::abs(d));
                mean += law.initial()[y] * d;
            }
            worst_mean = std::abs(mean);
        } else {
            const auto& k = law.seq().step(i - 1);
            for (std::size_t x = 0; x < s; ++x) {
                if (!support[i - 2][x]) continue;
                auto row = k.row(x);
                double mean = 0.0;
                for (std::size_t y = 0; y < s; ++y) {
                    if (row[y] == 0.0) continue;
                    double d = mds_value(rep, i, x, y);
                    sup = std::max(sup, std::abs(d));
                    mean += row[y] * d;
                }
                worst_mean = std::max(worst_mean, std::abs(mean));
            }
        }
        d_sup.add(sup, (2.0 * md + 5.0) * C * ainv);
        mds_mean.add(worst_mean, kConditionalMeanTolerance * std::max(1.0, C));
    }

    // T_i = sum_{j > i} E[d_j^2 | F_i] = eta_{i+1} + K_i T_{i+1}.
    std::vector<double> T(s, 0.0);
    double tail_bound = sum_d_squared_oscillation_constant(m) * C2 * ainv * ainv;
    for (std::size_t i = n + m - 1; i >= first_i; --i) {
        auto next = K(i).apply(T);
        const auto& eta = rep.eta[i - m];
        for (std::size_t x = 0; x < s; ++x) next[x] += eta[x];
        T = std::move(next);
        tail_osc.add(osc(T, i), tail_bound);
        if (i == 1) break;
    }

    OscillationSuiteResult out;
    for (const Tally* t : {&mean_sup, &mean_osc, &second_osc, &range1, &range2, &range3, &range4, &v_sup,
                           &d_sup, &mds_mean, &tail_osc, &s0, &s1, &s2, &s3, &s4}) {
        out.checks.push_back(t->result());
        out.pass = out.pass && t->result().pass;
    }
    return out;
}

}  // namespace nhclt
