#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rlfi/types.hpp"

namespace rlfi::econ {

// Column-oriented estimation sample: numeric columns plus categorical
// factors, all aligned on row index.
struct Dataset {
    std::map<std::string, std::vector<double>> num;
    std::map<std::string, std::vector<std::string>> cat;

    std::size_t rows() const;
    const std::vector<double>& numeric(const std::string& name) const;
    const std::vector<std::string>& factor(const std::string& name) const;
};

// A fixed effect: one factor name, or two names treated as their interaction.
struct FixedEffect {
    std::vector<std::string> factors;  // size 1 or 2
};

struct RegressionSpec {
    std::string outcome;
    std::vector<std::string> regressors;
    std::vector<FixedEffect> fixed_effects;
    std::optional<std::string> cluster;
    std::vector<std::string> standardize;  // z-scored (n-1 sd) before fitting
    bool t_dof_clusters = false;  // clustered p-values from t(G-1) instead of normal
    // Demeaning iteration bounds for multi-way absorption.
    double demean_tol = 1e-10;
    int demean_max_sweeps = 200;
};

struct RegressionResult {
    std::vector<std::string> names;
    Eigen::VectorXd coef;
    Eigen::VectorXd se;
    Eigen::VectorXd tstat;
    Eigen::VectorXd pval;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_params = 0;   // regressors (+ intercept) + absorbed FE rank
    std::size_t n_clusters = 0;
    bool clustered = false;
    Eigen::VectorXd resid;
    Eigen::MatrixXd X;          // design actually fit (demeaned under FE)
    Eigen::MatrixXd xtx_inv;
};

// OLS with optional fixed-effect absorption by within-demeaning (iterated
// for multi-way FE). Without fixed effects an intercept ("const") is
// included. Classical SEs unless spec.cluster is set, then the one-way CR1
// cluster sandwich. Throws naming collinear columns on rank deficiency.
RegressionResult ols(const RegressionSpec& spec, const Dataset& data);

// CR1 cluster sandwich: (X'X)^-1 (sum_g X_g' e_g e_g' X_g) (X'X)^-1 scaled
// by G/(G-1) * (N-1)/(N-K). With one cluster per row this equals HC1.
Eigen::VectorXd cluster_se(const RegressionResult& result,
                           const std::vector<int>& cluster_ids);

// Interior maximum of b_lin*x + b_quad*x^2; requires b_quad < 0.
double implied_peak(double b_linear, double b_quadratic);
double implied_peak(const RegressionResult& result, const std::string& linear_name,
                    const std::string& quadratic_name);

struct BalancedPanel {
    std::vector<PanelObservation> observations;  // sorted by (soc_code, period)
    std::vector<YearMonth> periods;
    std::vector<std::string> occupations;
    std::vector<std::string> dropped;  // occupations removed (zero/missing months)
};

// Keeps occupations with positive openings in every period observed in the
// window; everything else is dropped and reported.
BalancedPanel balance_panel(const std::vector<PanelObservation>& obs);

struct DidResult {
    RegressionResult regression;
    std::size_t n_occupations = 0;
    std::vector<std::string> missing_exposure;  // balanced occupations without exposure
    double exposure_mean_raw = 0.0;  // over estimation occupations, pre-standardization
    double exposure_sd_raw = 0.0;
};

// log(openings) on post-cutoff x standardized exposure with occupation and
// soc2 x period fixed effects, clustered by occupation. Exposure is
// standardized (mean 0, sd 1, n-1) across the occupations in the balanced
// panel before interaction.
DidResult did(const BalancedPanel& panel, const std::map<std::string, double>& exposure,
              const YearMonth& cutoff, bool t_dof_clusters = false);

struct EventStudyResult {
    std::vector<YearMonth> periods;   // all panel periods, reference included
    Eigen::VectorXd coef;             // reference entry is exactly 0
    Eigen::VectorXd se;               // reference entry is exactly 0
    Eigen::VectorXd ci_lo;
    Eigen::VectorXd ci_hi;
    YearMonth reference;
    RegressionResult regression;
    std::size_t n_occupations = 0;
};

EventStudyResult event_study(const BalancedPanel& panel,
                             const std::map<std::string, double>& exposure,
                             const YearMonth& reference, bool t_dof_clusters = false);

// Regression table artifacts: stars at 0.1 / 0.05 / 0.01.
std::string stars(double p);
void write_regression_csv(const std::string& path, const RegressionResult& r,
                          const std::string& meta_comment);
nlohmann::json regression_to_json(const RegressionResult& r);
void write_event_study_csv(const std::string& path, const EventStudyResult& es,
                           const std::string& meta_comment);

}  // namespace rlfi::econ
