#include "rlfi/econ.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "rlfi/csv.hpp"
#include "rlfi/stats.hpp"

namespace rlfi::econ {

std::size_t Dataset::rows() const {
    if (!num.empty()) return num.begin()->second.size();
    if (!cat.empty()) return cat.begin()->second.size();
    return 0;
}

const std::vector<double>& Dataset::numeric(const std::string& name) const {
    auto it = num.find(name);
    if (it == num.end()) throw std::invalid_argument("no numeric column '" + name + "'");
    return it->second;
}

const std::vector<std::string>& Dataset::factor(const std::string& name) const {
    auto it = cat.find(name);
    if (it == cat.end()) throw std::invalid_argument("no factor column '" + name + "'");
    return it->second;
}

namespace {

struct EncodedFactor {
    std::vector<int> ids;  // per row
    int levels = 0;
};

EncodedFactor encode(const Dataset& data, const FixedEffect& fe) {
    if (fe.factors.empty() || fe.factors.size() > 2)
        throw std::invalid_argument("fixed effect must name 1 or 2 factors");
    const std::size_t n = data.rows();
    EncodedFactor out;
    out.ids.resize(n);
    std::unordered_map<std::string, int> levels;
    const auto& a = data.factor(fe.factors[0]);
    const std::vector<std::string>* b =
        fe.factors.size() == 2 ? &data.factor(fe.factors[1]) : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string key = b ? a[i] + "\x1f" + (*b)[i] : a[i];
        auto [it, inserted] = levels.emplace(key, out.levels);
        if (inserted) ++out.levels;
        out.ids[i] = it->second;
    }
    return out;
}

// Within-demeaning over one grouping for every column of M.
// Returns the largest group-mean magnitude subtracted.
double demean_pass(Eigen::MatrixXd& m, const EncodedFactor& fe) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(fe.levels, m.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(fe.levels);
    const auto n = static_cast<Eigen::Index>(fe.ids.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(fe.ids[static_cast<std::size_t>(i)]) += m.row(i);
        counts(fe.ids[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int g = 0; g < fe.levels; ++g) sums.row(g) /= counts(g);
    for (Eigen::Index i = 0; i < n; ++i)
        m.row(i) -= sums.row(fe.ids[static_cast<std::size_t>(i)]);
    return sums.cwiseAbs().maxCoeff();
}

// Rank of the absorbed dummy matrix. For two factors each connected
// component of the bipartite level graph contributes one redundancy.
std::size_t absorbed_rank(const std::vector<EncodedFactor>& fes) {
    if (fes.empty()) return 0;
    if (fes.size() == 1) return static_cast<std::size_t>(fes[0].levels);
    const int l1 = fes[0].levels, l2 = fes[1].levels;
    std::vector<int> parent(static_cast<std::size_t>(l1 + l2));
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    for (std::size_t i = 0; i < fes[0].ids.size(); ++i) {
        const int a = find(fes[0].ids[i]);
        const int b = find(l1 + fes[1].ids[i]);
        if (a != b) parent[static_cast<std::size_t>(a)] = b;
    }
    std::set<int> roots;
    for (int x = 0; x < l1 + l2; ++x) roots.insert(find(x));
    return static_cast<std::size_t>(l1 + l2 - static_cast<int>(roots.size()));
}

double two_sided_p_normal(double t) {
    boost::math::normal dist;
    return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

double two_sided_p_t(double t, double dof) {
    if (dof <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(dist, -std::abs(t));
}

double ci_quantile(bool use_t, double dof) {
    if (use_t && dof > 0.0) {
        boost::math::students_t dist(dof);
        return boost::math::quantile(dist, 0.975);
    }
    boost::math::normal dist;
    return boost::math::quantile(dist, 0.975);
}

std::vector<int> cluster_ids_for(const Dataset& data, const std::string& name) {
    const auto& col = data.factor(name);
    std::unordered_map<std::string, int> levels;
    std::vector<int> ids(col.size());
    int next = 0;
    for (std::size_t i = 0; i < col.size(); ++i) {
        auto [it, inserted] = levels.emplace(col[i], next);
        if (inserted) ++next;
        ids[i] = it->second;
    }
    return ids;
}

}  // namespace

RegressionResult ols(const RegressionSpec& spec, const Dataset& data) {
    const std::size_t n = data.rows();
    if (n == 0) throw std::invalid_argument("ols: empty data");

    const auto& y_raw = data.numeric(spec.outcome);
    const bool has_fe = !spec.fixed_effects.empty();
    const std::size_t k_reg = spec.regressors.size();
    const std::size_t k = k_reg + (has_fe ? 0 : 1);

    RegressionResult res;
    res.n_obs = n;
    res.names = spec.regressors;
    if (!has_fe) res.names.push_back("const");

    // Assemble [y | X]; demean jointly so one pass handles all columns.
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(1 + k));
    for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), 0) = y_raw[i];
    for (std::size_t j = 0; j < k_reg; ++j) {
        const auto& col = data.numeric(spec.regressors[j]);
        const bool std_this =
            std::find(spec.standardize.begin(), spec.standardize.end(),
                      spec.regressors[j]) != spec.standardize.end();
        double mu = 0.0, sd = 1.0;
        if (std_this) {
            mu = stats::mean(col);
            sd = stats::sample_sd(col);
            if (sd == 0.0)
                throw std::invalid_argument("cannot standardize constant column '" +
                                            spec.regressors[j] + "'");
        }
        for (std::size_t i = 0; i < n; ++i)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(1 + j)) =
                (col[i] - mu) / sd;
    }
    if (!has_fe)
        m.col(static_cast<Eigen::Index>(k)) =
            Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));

    std::vector<EncodedFactor> fes;
    for (const auto& fe : spec.fixed_effects) fes.push_back(encode(data, fe));
    if (fes.size() > 2)
        throw std::invalid_argument("at most two fixed-effect groups supported");
    if (fes.size() == 1) {
        demean_pass(m, fes[0]);
    } else if (fes.size() == 2) {
        double delta = std::numeric_limits<double>::max();
        for (int sweep = 0; sweep < spec.demean_max_sweeps && delta > spec.demean_tol;
             ++sweep) {
            delta = 0.0;
            for (const auto& fe : fes) delta = std::max(delta, demean_pass(m, fe));
        }
        if (delta > spec.demean_tol)
            throw std::runtime_error("fixed-effect demeaning did not converge");
    }

    Eigen::VectorXd y = m.col(0);
    Eigen::MatrixXd X = m.rightCols(static_cast<Eigen::Index>(k));

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    const auto rank = static_cast<std::size_t>(qr.rank());
    if (rank < k) {
        const auto perm = qr.colsPermutation().indices();
        std::string collinear;
        for (std::size_t j = rank; j < k; ++j) {
            if (!collinear.empty()) collinear += ", ";
            collinear += res.names[static_cast<std::size_t>(perm(static_cast<Eigen::Index>(j)))];
        }
        throw std::invalid_argument("design matrix is rank deficient; collinear: " +
                                    collinear);
    }

    res.coef = qr.solve(y);
    res.resid = y - X * res.coef;
    res.X = std::move(X);

    Eigen::MatrixXd xtx = res.X.transpose() * res.X;
    res.xtx_inv = xtx.ldlt().solve(
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));

    const std::size_t df_absorbed = absorbed_rank(fes);
    res.n_params = k + df_absorbed;
    if (res.n_params >= n)
        throw std::invalid_argument("no residual degrees of freedom");

    const double ssr = res.resid.squaredNorm();
    const double y_mean = stats::mean(y_raw);
    double sst = 0.0;
    for (double v : y_raw) sst += (v - y_mean) * (v - y_mean);
    res.r2 = sst > 0.0 ? 1.0 - ssr / sst : 0.0;
    res.adj_r2 = 1.0 - (1.0 - res.r2) * (static_cast<double>(n) - 1.0) /
                           (static_cast<double>(n) - static_cast<double>(res.n_params));

    res.se.resize(static_cast<Eigen::Index>(k));
    res.tstat.resize(static_cast<Eigen::Index>(k));
    res.pval.resize(static_cast<Eigen::Index>(k));

    if (spec.cluster) {
        const auto ids = cluster_ids_for(data, *spec.cluster);
        res.se = cluster_se(res, ids);
        res.clustered = true;
        res.n_clusters =
            static_cast<std::size_t>(*std::max_element(ids.begin(), ids.end())) + 1;
        for (Eigen::Index j = 0; j < res.coef.size(); ++j) {
            res.tstat(j) = res.coef(j) / res.se(j);
            res.pval(j) = spec.t_dof_clusters
                              ? two_sided_p_t(res.tstat(j),
                                              static_cast<double>(res.n_clusters) - 1.0)
                              : two_sided_p_normal(res.tstat(j));
        }
    } else {
        const double s2 = ssr / (static_cast<double>(n) - static_cast<double>(res.n_params));
        for (Eigen::Index j = 0; j < res.coef.size(); ++j) {
            res.se(j) = std::sqrt(s2 * res.xtx_inv(j, j));
            res.tstat(j) = res.coef(j) / res.se(j);
            res.pval(j) = two_sided_p_t(
                res.tstat(j), static_cast<double>(n) - static_cast<double>(res.n_params));
        }
    }
    return res;
}

Eigen::VectorXd cluster_se(const RegressionResult& result,
                           const std::vector<int>& cluster_ids) {
    const auto n = static_cast<std::size_t>(result.X.rows());
    const auto k = result.X.cols();
    if (cluster_ids.size() != n)
        throw std::invalid_argument("cluster assignment length mismatch");
    const int n_groups = *std::max_element(cluster_ids.begin(), cluster_ids.end()) + 1;
    if (n_groups < 2) throw std::invalid_argument("clustered SEs need at least 2 clusters");

    // Meat: sum over clusters of (X_g' e_g)(X_g' e_g)'.
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_groups, k);
    for (std::size_t i = 0; i < n; ++i)
        scores.row(cluster_ids[i]) +=
            result.resid(static_cast<Eigen::Index>(i)) *
            result.X.row(static_cast<Eigen::Index>(i));
    Eigen::MatrixXd meat = scores.transpose() * scores;

    const double g = static_cast<double>(n_groups);
    const double nn = static_cast<double>(n);
    const double kk = static_cast<double>(result.n_params);
    const double scale = g / (g - 1.0) * (nn - 1.0) / (nn - kk);
    Eigen::MatrixXd vcov = scale * result.xtx_inv * meat * result.xtx_inv;
    return vcov.diagonal().cwiseSqrt();
}

double implied_peak(double b_linear, double b_quadratic) {
    if (b_quadratic >= 0.0)
        throw std::invalid_argument("implied peak requires a negative quadratic coefficient");
    return -b_linear / (2.0 * b_quadratic);
}

double implied_peak(const RegressionResult& result, const std::string& linear_name,
                    const std::string& quadratic_name) {
    auto idx_of = [&](const std::string& name) {
        const auto it = std::find(result.names.begin(), result.names.end(), name);
        if (it == result.names.end())
            throw std::invalid_argument("no coefficient named '" + name + "'");
        return static_cast<Eigen::Index>(it - result.names.begin());
    };
    return implied_peak(result.coef(idx_of(linear_name)), result.coef(idx_of(quadratic_name)));
}

BalancedPanel balance_panel(const std::vector<PanelObservation>& obs) {
    BalancedPanel out;
    std::set<YearMonth> period_set;
    for (const auto& o : obs) period_set.insert(o.period);
    out.periods.assign(period_set.begin(), period_set.end());

    std::map<std::string, std::map<YearMonth, const PanelObservation*>> by_occ;
    for (const auto& o : obs) by_occ[o.soc_code][o.period] = &o;

    for (const auto& [soc, months] : by_occ) {
        bool complete = months.size() == out.periods.size();
        if (complete)
            for (const auto& [p, ptr] : months)
                if (ptr->job_openings <= 0) { complete = false; break; }
        if (complete)
            out.occupations.push_back(soc);
        else
            out.dropped.push_back(soc);
    }
    for (const auto& soc : out.occupations)
        for (const auto& p : out.periods)
            out.observations.push_back(*by_occ[soc][p]);
    return out;
}

namespace {

struct PanelFrame {
    Dataset data;
    std::vector<std::string> missing_exposure;
    double mean_raw = 0.0;
    double sd_raw = 0.0;
    std::map<std::string, double> z;  // standardized exposure per occupation
    std::vector<const PanelObservation*> rows;
};

// Drops balanced occupations without exposure, standardizes over the rest,
// and lays out the shared outcome/factor columns.
PanelFrame panel_frame(const BalancedPanel& panel,
                       const std::map<std::string, double>& exposure) {
    PanelFrame f;
    std::vector<std::string> usable;
    std::vector<double> raw;
    for (const auto& soc : panel.occupations) {
        auto it = exposure.find(soc);
        if (it == exposure.end()) {
            f.missing_exposure.push_back(soc);
        } else {
            usable.push_back(soc);
            raw.push_back(it->second);
        }
    }
    if (usable.size() < 2)
        throw std::invalid_argument("panel estimation needs >= 2 occupations with exposure");
    f.mean_raw = stats::mean(raw);
    f.sd_raw = stats::sample_sd(raw);
    if (f.sd_raw == 0.0)
        throw std::invalid_argument("exposure has zero variance across panel occupations");
    for (std::size_t i = 0; i < usable.size(); ++i)
        f.z[usable[i]] = (raw[i] - f.mean_raw) / f.sd_raw;

    auto& d = f.data;
    for (const auto& o : panel.observations) {
        if (f.z.find(o.soc_code) == f.z.end()) continue;
        f.rows.push_back(&o);
        d.num["log_openings"].push_back(std::log(static_cast<double>(o.job_openings)));
        d.cat["occupation"].push_back(o.soc_code);
        d.cat["soc2"].push_back(o.soc2);
        d.cat["period"].push_back(o.period.str());
    }
    return f;
}

}  // namespace

DidResult did(const BalancedPanel& panel, const std::map<std::string, double>& exposure,
              const YearMonth& cutoff, bool t_dof_clusters) {
    PanelFrame f = panel_frame(panel, exposure);
    auto& treat = f.data.num["post_x_exposure"];
    treat.reserve(f.rows.size());
    for (const auto* o : f.rows)
        treat.push_back(o->period < cutoff ? 0.0 : f.z[o->soc_code]);

    RegressionSpec spec;
    spec.outcome = "log_openings";
    spec.regressors = {"post_x_exposure"};
    spec.fixed_effects = {{{"occupation"}}, {{"soc2", "period"}}};
    spec.cluster = "occupation";
    spec.t_dof_clusters = t_dof_clusters;

    DidResult out;
    out.regression = ols(spec, f.data);
    out.n_occupations = f.z.size();
    out.missing_exposure = f.missing_exposure;
    out.exposure_mean_raw = f.mean_raw;
    out.exposure_sd_raw = f.sd_raw;
    return out;
}

EventStudyResult event_study(const BalancedPanel& panel,
                             const std::map<std::string, double>& exposure,
                             const YearMonth& reference, bool t_dof_clusters) {
    if (std::find(panel.periods.begin(), panel.periods.end(), reference) ==
        panel.periods.end())
        throw std::invalid_argument("reference period " + reference.str() +
                                    " not present in the panel");
    PanelFrame f = panel_frame(panel, exposure);

    RegressionSpec spec;
    spec.outcome = "log_openings";
    spec.fixed_effects = {{{"occupation"}}, {{"soc2", "period"}}};
    spec.cluster = "occupation";
    spec.t_dof_clusters = t_dof_clusters;

    for (const auto& p : panel.periods) {
        if (p == reference) continue;
        const std::string name = "exposure_x_" + p.str();
        auto& col = f.data.num[name];
        col.reserve(f.rows.size());
        for (const auto* o : f.rows)
            col.push_back(o->period == p ? f.z[o->soc_code] : 0.0);
        spec.regressors.push_back(name);
    }

    EventStudyResult out;
    out.regression = ols(spec, f.data);
    out.reference = reference;
    out.periods = panel.periods;
    out.n_occupations = f.z.size();

    const auto np = static_cast<Eigen::Index>(panel.periods.size());
    out.coef = Eigen::VectorXd::Zero(np);
    out.se = Eigen::VectorXd::Zero(np);
    out.ci_lo = Eigen::VectorXd::Zero(np);
    out.ci_hi = Eigen::VectorXd::Zero(np);
    const double q =
        ci_quantile(t_dof_clusters, static_cast<double>(out.regression.n_clusters) - 1.0);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < np; ++i) {
        if (panel.periods[static_cast<std::size_t>(i)] == reference) continue;  // stays 0
        out.coef(i) = out.regression.coef(j);
        out.se(i) = out.regression.se(j);
        out.ci_lo(i) = out.coef(i) - q * out.se(i);
        out.ci_hi(i) = out.coef(i) + q * out.se(i);
        ++j;
    }
    return out;
}

std::string stars(double p) {
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.1) return "*";
    return "";
}

void write_regression_csv(const std::string& path, const RegressionResult& r,
                          const std::string& meta_comment) {
    const std::vector<std::string> header = {"term", "coef", "se", "t", "p", "stars"};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t j = 0; j < r.names.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        rows.push_back({r.names[j], csv::format_double(r.coef(i)), csv::format_double(r.se(i)),
                        csv::format_double(r.tstat(i)), csv::format_double(r.pval(i)),
                        stars(r.pval(i))});
    }
    csv::write_csv(path, header, rows, meta_comment);
}

nlohmann::json regression_to_json(const RegressionResult& r) {
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t j = 0; j < r.names.size(); ++j) {
        const auto i = static_cast<Eigen::Index>(j);
        terms.push_back({{"term", r.names[j]},
                         {"coef", r.coef(i)},
                         {"se", r.se(i)},
                         {"t", r.tstat(i)},
                         {"p", r.pval(i)},
                         {"stars", stars(r.pval(i))}});
    }
    nlohmann::json j{{"terms", terms},
                     {"r2", r.r2},
                     {"adj_r2", r.adj_r2},
                     {"n_obs", r.n_obs},
                     {"n_params", r.n_params}};
    if (r.clustered) j["n_clusters"] = r.n_clusters;
    return j;
}

void write_event_study_csv(const std::string& path, const EventStudyResult& es,
                           const std::string& meta_comment) {
    const std::vector<std::string> header = {"period", "coef", "se", "ci_lo", "ci_hi"};
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < es.periods.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        rows.push_back({es.periods[i].str(), csv::format_double(es.coef(j)),
                        csv::format_double(es.se(j)), csv::format_double(es.ci_lo(j)),
                        csv::format_double(es.ci_hi(j))});
    }
    csv::write_csv(path, header, rows, meta_comment);
}

}  // namespace rlfi::econ
