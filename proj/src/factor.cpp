#include "rlfi/factor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "rlfi/csv.hpp"
#include "rlfi/stats.hpp"

namespace rlfi::factor {

ScoreMatrix gate_passing_matrix(const std::vector<idx::TaskScore>& scores) {
    ScoreMatrix m;
    std::size_t n = 0;
    for (const auto& s : scores)
        if (s.gate_pass) ++n;
    if (n < 2) throw std::invalid_argument("need at least 2 gate-passing tasks");
    m.values.resize(static_cast<Eigen::Index>(n), kNumDimensions);
    m.soc_codes.reserve(n);
    m.task_ids.reserve(n);
    Eigen::Index row = 0;
    for (const auto& s : scores) {
        if (!s.gate_pass) continue;
        for (int d = 0; d < kNumDimensions; ++d) {
            const auto& v = s.dimension_scores[static_cast<std::size_t>(d)];
            if (!v)
                throw std::invalid_argument("gate-passing task " + s.key() + " missing " +
                                            dimension_label(d));
            m.values(row, d) = *v;
        }
        m.soc_codes.push_back(s.soc_code);
        m.task_ids.push_back(s.task_id);
        ++row;
    }
    return m;
}

SymEigen sym_eigen(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("matrix must be square");
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition failed");
    // Eigen returns ascending order; flip to descending.
    const Eigen::Index k = m.rows();
    SymEigen out;
    out.values.resize(k);
    out.vectors.resize(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        out.values(i) = solver.eigenvalues()(k - 1 - i);
        out.vectors.col(i) = solver.eigenvectors().col(k - 1 - i);
    }
    return out;
}

Eigen::MatrixXd dimension_correlations(const ScoreMatrix& m) {
    const Eigen::Index n = m.values.rows();
    const Eigen::Index k = m.values.cols();
    if (n < 2) throw std::invalid_argument("need at least 2 observations");

    Eigen::MatrixXd centered = m.values.rowwise() - m.values.colwise().mean();
    Eigen::VectorXd sd(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double var = centered.col(j).squaredNorm() / static_cast<double>(n - 1);
        if (var <= 0.0)
            throw std::invalid_argument("dimension " +
                                        dimension_label(static_cast<int>(j)) +
                                        " has zero variance");
        sd(j) = std::sqrt(var);
    }
    Eigen::MatrixXd corr =
        (centered.transpose() * centered) / static_cast<double>(n - 1);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) corr(i, j) /= sd(i) * sd(j);
    for (Eigen::Index i = 0; i < k; ++i) corr(i, i) = 1.0;
    return corr;
}

PcaResult pca(const Eigen::MatrixXd& corr, const ScoreMatrix& data) {
    const auto eig = sym_eigen(corr);  // validates symmetry
    const Eigen::Index k = corr.rows();

    PcaResult out;
    out.eigenvalues = eig.values.cwiseMax(0.0);  // clamp fp noise
    if (eig.values.minCoeff() < -1e-8)
        throw std::invalid_argument("correlation matrix is not positive semidefinite");
    out.loadings = eig.vectors;

    // Sign convention: largest-|loading| entry per component positive.
    for (Eigen::Index j = 0; j < k; ++j) {
        Eigen::Index imax = 0;
        out.loadings.col(j).cwiseAbs().maxCoeff(&imax);
        if (out.loadings(imax, j) < 0.0) out.loadings.col(j) *= -1.0;
    }

    const double total = out.eigenvalues.sum();
    out.explained_pct = out.eigenvalues * (100.0 / total);
    out.cumulative_pct.resize(k);
    double run = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
        run += out.explained_pct(j);
        out.cumulative_pct(j) = run;
    }

    // Project standardized data onto the components.
    const Eigen::Index n = data.values.rows();
    if (n >= 2 && data.values.cols() == k) {
        Eigen::MatrixXd z = data.values.rowwise() - data.values.colwise().mean();
        for (Eigen::Index j = 0; j < k; ++j) {
            const double sd =
                std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n - 1));
            if (sd > 0.0) z.col(j) /= sd;
        }
        out.scores = z * out.loadings;
    }
    return out;
}

namespace {

// Eigenvalues of the correlation matrix of one standard-normal draw.
Eigen::VectorXd simulated_eigenvalues(int n_obs, int n_vars, stats::Rng rng) {
    Eigen::MatrixXd x(n_obs, n_vars);
    for (Eigen::Index i = 0; i < n_obs; ++i)
        for (Eigen::Index j = 0; j < n_vars; ++j) x(i, j) = rng.next_normal();
    Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    Eigen::MatrixXd corr =
        (centered.transpose() * centered) / static_cast<double>(n_obs - 1);
    Eigen::VectorXd sd = corr.diagonal().cwiseSqrt();
    for (Eigen::Index i = 0; i < n_vars; ++i)
        for (Eigen::Index j = 0; j < n_vars; ++j) corr(i, j) /= sd(i) * sd(j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(corr);
    Eigen::VectorXd ev = solver.eigenvalues().reverse();
    return ev;
}

}  // namespace

ParallelAnalysisResult parallel_analysis(const Eigen::VectorXd& observed_eigenvalues,
                                         int n_obs, int n_vars, int n_sims,
                                         std::uint64_t seed, int n_threads) {
    if (n_sims < 100) throw std::invalid_argument("parallel analysis needs >= 100 simulations");
    if (n_obs < 3) throw std::invalid_argument("parallel analysis needs n_obs >= 3");

    // One child stream per simulation: identical results under any scheduling.
    stats::Rng master(seed);
    std::vector<stats::Rng> streams;
    streams.reserve(static_cast<std::size_t>(n_sims));
    for (int s = 0; s < n_sims; ++s)
        streams.push_back(master.spawn(static_cast<std::uint64_t>(s)));

    Eigen::MatrixXd sims(n_sims, n_vars);
    if (n_threads <= 0)
        n_threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    n_threads = std::min(n_threads, n_sims);

    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n_sims) return;
                sims.row(i) =
                    simulated_eigenvalues(n_obs, n_vars, streams[static_cast<std::size_t>(i)])
                        .transpose();
            }
        });
    for (auto& th : pool) th.join();

    ParallelAnalysisResult out;
    out.n_simulations = n_sims;
    out.seed = seed;
    out.simulated_p95.resize(n_vars);
    for (int j = 0; j < n_vars; ++j) {
        std::vector<double> rank_vals(static_cast<std::size_t>(n_sims));
        for (int i = 0; i < n_sims; ++i)
            rank_vals[static_cast<std::size_t>(i)] = sims(i, j);
        out.simulated_p95(j) = stats::quantile(std::move(rank_vals), 0.95);
    }
    // Sequential stopping rule: retain leading components while each
    // observed eigenvalue clears its simulated threshold.
    for (int j = 0; j < std::min<int>(n_vars, static_cast<int>(observed_eigenvalues.size()));
         ++j) {
        if (observed_eigenvalues(j) <= out.simulated_p95(j)) break;
        out.retained.insert(j + 1);
    }
    return out;
}

double cronbach_alpha(const ScoreMatrix& m) {
    const Eigen::Index n = m.values.rows();
    const Eigen::Index k = m.values.cols();
    if (k < 2 || n < 2)
        throw std::invalid_argument("cronbach_alpha needs >= 2 items and >= 2 observations");
    Eigen::VectorXd totals = m.values.rowwise().sum();
    const double total_mean = totals.mean();
    double total_var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        total_var += (totals(i) - total_mean) * (totals(i) - total_mean);
    total_var /= static_cast<double>(n - 1);
    if (total_var == 0.0) throw std::invalid_argument("cronbach_alpha: zero total variance");

    double item_var_sum = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
        const double mu = m.values.col(j).mean();
        double v = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            v += (m.values(i, j) - mu) * (m.values(i, j) - mu);
        item_var_sum += v / static_cast<double>(n - 1);
    }
    const double kk = static_cast<double>(k);
    return kk / (kk - 1.0) * (1.0 - item_var_sum / total_var);
}

nlohmann::json pca_to_json(const PcaResult& p) {
    nlohmann::json j;
    const auto n = p.eigenvalues.size();
    nlohmann::json comps = nlohmann::json::array();
    for (Eigen::Index i = 0; i < n; ++i)
        comps.push_back({{"component", i + 1},
                         {"eigenvalue", p.eigenvalues(i)},
                         {"explained_pct", p.explained_pct(i)},
                         {"cumulative_pct", p.cumulative_pct(i)}});
    j["components"] = comps;
    nlohmann::json loadings = nlohmann::json::object();
    for (Eigen::Index v = 0; v < p.loadings.rows(); ++v) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < p.loadings.cols(); ++c)
            row.push_back(p.loadings(v, c));
        loadings[dimension_label(static_cast<int>(v))] = row;
    }
    j["loadings"] = loadings;
    return j;
}

nlohmann::json parallel_to_json(const ParallelAnalysisResult& p,
                                const Eigen::VectorXd& observed) {
    nlohmann::json ranks = nlohmann::json::array();
    for (Eigen::Index i = 0; i < p.simulated_p95.size(); ++i)
        ranks.push_back({{"component", i + 1},
                         {"observed", i < observed.size() ? observed(i) : 0.0},
                         {"simulated_p95", p.simulated_p95(i)}});
    return nlohmann::json{{"n_simulations", p.n_simulations},
                          {"seed", p.seed},
                          {"ranks", ranks},
                          {"retained", std::vector<int>(p.retained.begin(), p.retained.end())}};
}

void write_corr_csv(const std::string& path, const Eigen::MatrixXd& corr,
                    const std::string& meta_comment) {
    std::vector<std::string> header = {"dimension"};
    for (int d = 0; d < static_cast<int>(corr.cols()); ++d)
        header.push_back(dimension_label(d));
    std::vector<std::vector<std::string>> rows;
    for (Eigen::Index i = 0; i < corr.rows(); ++i) {
        std::vector<std::string> row = {dimension_label(static_cast<int>(i))};
        for (Eigen::Index j = 0; j < corr.cols(); ++j)
            row.push_back(csv::format_double(corr(i, j)));
        rows.push_back(std::move(row));
    }
    csv::write_csv(path, header, rows, meta_comment);
}

void write_biplot_csv(const std::string& path, const ScoreMatrix& data,
                      const PcaResult& p, const std::string& meta_comment) {
    if (p.scores.cols() < 2 || p.scores.rows() != static_cast<Eigen::Index>(data.task_ids.size()))
        throw std::invalid_argument("biplot needs projections on >= 2 components");

    const double max_score_radius = std::max(
        p.scores.col(0).cwiseAbs().maxCoeff(), p.scores.col(1).cwiseAbs().maxCoeff());
    Eigen::MatrixXd arrows(p.loadings.rows(), 2);
    for (Eigen::Index v = 0; v < p.loadings.rows(); ++v) {
        arrows(v, 0) = p.loadings(v, 0) * std::sqrt(p.eigenvalues(0));
        arrows(v, 1) = p.loadings(v, 1) * std::sqrt(p.eigenvalues(1));
    }
    const double max_arrow = arrows.cwiseAbs().maxCoeff();
    const double scale = max_arrow > 0.0 ? 0.8 * max_score_radius / max_arrow : 1.0;

    const std::vector<std::string> header = {"kind", "label", "soc_code",
                                             "task_id", "pc1", "pc2"};
    std::vector<std::vector<std::string>> rows;
    rows.reserve(static_cast<std::size_t>(p.scores.rows()) + kNumDimensions);
    for (Eigen::Index i = 0; i < p.scores.rows(); ++i)
        rows.push_back({"task", "", data.soc_codes[static_cast<std::size_t>(i)],
                        std::to_string(data.task_ids[static_cast<std::size_t>(i)]),
                        csv::format_double(p.scores(i, 0)),
                        csv::format_double(p.scores(i, 1))});
    for (Eigen::Index v = 0; v < arrows.rows(); ++v)
        rows.push_back({"loading", dimension_label(static_cast<int>(v)), "", "",
                        csv::format_double(arrows(v, 0) * scale),
                        csv::format_double(arrows(v, 1) * scale)});
    csv::write_csv(path, header, rows, meta_comment);
}

}  // namespace rlfi::factor
