#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rlfi/index.hpp"

namespace rlfi::factor {

// Gate-passing task scores as an n x 8 matrix (rows = tasks, columns = D1..D8),
// with the task keys aligned to the rows. Throws when fewer than two
// gate-passing tasks exist.
struct ScoreMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> soc_codes;
    std::vector<std::int64_t> task_ids;
};

ScoreMatrix gate_passing_matrix(const std::vector<idx::TaskScore>& scores);

// Symmetric eigendecomposition, eigenvalues descending, eigenvectors in
// matching columns. Throws on non-symmetric input (tolerance 1e-10).
struct SymEigen {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
};
SymEigen sym_eigen(const Eigen::MatrixXd& m);

// Pearson correlation matrix of the columns; errors on a zero-variance
// column, naming the dimension.
Eigen::MatrixXd dimension_correlations(const ScoreMatrix& m);

struct PcaResult {
    Eigen::VectorXd eigenvalues;      // descending, tiny negatives clamped to 0
    Eigen::VectorXd explained_pct;
    Eigen::VectorXd cumulative_pct;
    Eigen::MatrixXd loadings;         // variable x component
    Eigen::MatrixXd scores;           // observation x component projections
};

// PCA on a correlation matrix; projections computed from the standardized
// data (sample sd, n-1). Component signs fixed so the largest-magnitude
// loading in each column is positive.
PcaResult pca(const Eigen::MatrixXd& corr, const ScoreMatrix& data);

struct ParallelAnalysisResult {
    Eigen::VectorXd simulated_p95;  // per rank
    std::set<int> retained;         // 1-based component indices
    int n_simulations = 0;
    std::uint64_t seed = 0;
};

// Horn's parallel analysis: per-rank 95th percentile eigenvalues of
// correlation matrices of n_obs x n_vars standard-normal draws, compared
// against the observed eigenvalues. Child seeds derive from the master
// seed per simulation, so results are independent of thread scheduling.
ParallelAnalysisResult parallel_analysis(const Eigen::VectorXd& observed_eigenvalues,
                                         int n_obs, int n_vars, int n_sims,
                                         std::uint64_t seed, int n_threads = 0);

// alpha = k/(k-1) * (1 - sum(item variances) / variance(item sum)).
double cronbach_alpha(const ScoreMatrix& m);

nlohmann::json pca_to_json(const PcaResult& p);
nlohmann::json parallel_to_json(const ParallelAnalysisResult& p,
                                const Eigen::VectorXd& observed);

void write_corr_csv(const std::string& path, const Eigen::MatrixXd& corr,
                    const std::string& meta_comment);

// Plot-ready biplot: per-task PC1/PC2 projections plus dimension loading
// vectors scaled by sqrt(eigenvalue) and a common visibility factor.
void write_biplot_csv(const std::string& path, const ScoreMatrix& data,
                      const PcaResult& p, const std::string& meta_comment);

}  // namespace rlfi::factor
