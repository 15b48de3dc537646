#include "quasilin/classical_oracle.hpp"

#include "quasilin/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace quasilin {

namespace {

constexpr std::size_t kJackknifeBlocks = 50;

inline Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// F with F F^T = a, from a pivoted LDL^T factorization.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& a, const char* what) {
    if (a.size() == 0) return a;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    const Eigen::VectorXd d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || d.minCoeff() < -1e-10 * scale) {
        throw NotPositiveSemidefinite(std::string(what) + " is not positive semi-definite");
    }
    const Eigen::MatrixXd l = ldlt.matrixL();
    Eigen::MatrixXd f = l * d.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    f = ldlt.transpositionsP().transpose() * f;
    if ((f * f.transpose() - a).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw NotPositiveSemidefinite(std::string(what) + " is not positive semi-definite");
    }
    return f;
}

std::vector<double> row_major(const Eigen::MatrixXd& m) {
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    }
    return out;
}

struct BlockSums {
    std::vector<double> sums;
    std::size_t count = 0;
};

}  // namespace

void ClassicalSde::validate() const {
    const auto n = a_mat.rows();
    const auto m = const_disp.cols();
    if (n == 0 || a_mat.cols() != n) throw std::invalid_argument("ClassicalSde: A must be square and non-empty");
    if (beta.size() != n) throw std::invalid_argument("ClassicalSde: beta has wrong length");
    if (const_disp.rows() != n) throw std::invalid_argument("ClassicalSde: b0 must be n x m");
    if (static_cast<Eigen::Index>(lin_disp.size()) != m) {
        throw std::invalid_argument("ClassicalSde: need one linear dispersion matrix per channel");
    }
    for (const auto& b : lin_disp) {
        if (b.rows() != n || b.cols() != n) throw std::invalid_argument("ClassicalSde: B_j must be n x n");
    }
    if (noise_cov.rows() != m || noise_cov.cols() != m) throw std::invalid_argument("ClassicalSde: V must be m x m");
    if (noise_cov != noise_cov.transpose()) throw std::invalid_argument("ClassicalSde: V must be symmetric");
}

QuasilinearSystem ClassicalSde::to_quasilinear() const {
    validate();
    QuasilinearSystem sys;
    sys.a_mat = a_mat;
    sys.beta = beta;
    sys.b_mat = const_disp;
    sys.lin_disp = lin_disp;
    sys.theta = Eigen::MatrixXd::Zero(a_mat.rows(), a_mat.rows());
    sys.v_mat = noise_cov;
    sys.j_mat = Eigen::MatrixXd::Zero(noise_cov.rows(), noise_cov.cols());
    return sys;
}

McResult simulate(const ClassicalSde& sde, const InitialDistribution& x0, const McOptions& options) {
    sde.validate();
    const std::size_t n = sde.dimension();
    const std::size_t m = sde.channels();
    if (x0.mean.size() != ix(n) || x0.cov.rows() != ix(n) || x0.cov.cols() != ix(n)) {
        throw std::invalid_argument("simulate: initial distribution has wrong shape");
    }
    if (options.paths < 1000) throw std::invalid_argument("simulate: at least 1000 paths are required");
    if (!(options.t_final > 0.0) || !(options.dt > 0.0) || options.dt > 1e-2 * options.t_final) {
        throw std::invalid_argument("simulate: need t_final > 0 and 0 < dt <= t_final / 100");
    }

    McResult result{MomentIndexSpace(n, options.r_max), {}, {}, options.paths, 0, 0.0, options.t_final};
    std::size_t steps = static_cast<std::size_t>(std::llround(options.t_final / options.dt));
    if (std::abs(static_cast<double>(steps) * options.dt - options.t_final) > 1e-9 * options.t_final) {
        steps = static_cast<std::size_t>(std::ceil(options.t_final / options.dt));
    }
    const double dt = options.t_final / static_cast<double>(steps);
    result.steps = steps;
    result.dt = dt;

    const Eigen::MatrixXd init_factor = psd_factor(x0.cov, "initial covariance");
    const Eigen::MatrixXd noise_factor = psd_factor(sde.noise_cov, "noise covariance V") * std::sqrt(dt);

    const std::vector<double> a = row_major(sde.a_mat);
    const std::vector<double> f0 = row_major(init_factor);
    const std::vector<double> fw = row_major(noise_factor);
    const std::vector<double> b0 = row_major(sde.const_disp);  // b0[p * m + j]
    std::vector<std::vector<double>> bl;
    for (const auto& b : sde.lin_disp) bl.push_back(row_major(b));
    const std::vector<double> beta(sde.beta.data(), sde.beta.data() + n);
    const std::vector<double> mean0(x0.mean.data(), x0.mean.data() + n);

    const std::size_t k_size = result.space.size();
    std::vector<std::vector<std::size_t>> words;
    for (std::size_t k = 0; k < k_size; ++k) words.push_back(result.space.index(k).indices());

    const std::size_t blocks = std::min(kJackknifeBlocks, options.paths);
    std::vector<BlockSums> block_sums(blocks);

    auto run_block = [&](std::size_t b) {
        const std::size_t first = b * options.paths / blocks;
        const std::size_t last = (b + 1) * options.paths / blocks;
        BlockSums acc{std::vector<double>(k_size, 0.0), last - first};
        std::vector<double> x(n), xn(n), z(std::max(n, m)), dw(m);
        for (std::size_t path = first; path < last; ++path) {
            std::mt19937_64 rng(splitmix64(options.seed ^ splitmix64(path)));
            std::normal_distribution<double> normal;
            for (std::size_t i = 0; i < n; ++i) z[i] = normal(rng);
            for (std::size_t p = 0; p < n; ++p) {
                double v = mean0[p];
                for (std::size_t i = 0; i < n; ++i) v += f0[p * n + i] * z[i];
                x[p] = v;
            }
            for (std::size_t step = 0; step < steps; ++step) {
                for (std::size_t s = 0; s < m; ++s) z[s] = normal(rng);
                for (std::size_t j = 0; j < m; ++j) {
                    double v = 0.0;
                    for (std::size_t s = 0; s < m; ++s) v += fw[j * m + s] * z[s];
                    dw[j] = v;
                }
                for (std::size_t p = 0; p < n; ++p) {
                    double drift = beta[p];
                    for (std::size_t q = 0; q < n; ++q) drift += a[p * n + q] * x[q];
                    double noise = 0.0;
                    for (std::size_t j = 0; j < m; ++j) {
                        double g = b0[p * m + j];
                        const std::vector<double>& bj = bl[j];
                        for (std::size_t q = 0; q < n; ++q) g += bj[p * n + q] * x[q];
                        noise += g * dw[j];
                    }
                    xn[p] = x[p] + drift * dt + noise;
                }
                std::swap(x, xn);
            }
            for (std::size_t k = 0; k < k_size; ++k) {
                double prod = 1.0;
                for (const std::size_t i : words[k]) prod *= x[i];
                acc.sums[k] += prod;
            }
        }
        block_sums[b] = std::move(acc);
    };

    std::size_t workers = options.threads != 0 ? options.threads : std::thread::hardware_concurrency();
    workers = std::clamp<std::size_t>(workers, 1, blocks);
    if (workers == 1) {
        for (std::size_t b = 0; b < blocks; ++b) run_block(b);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t b = next++; b < blocks; b = next++) run_block(b);
            });
        }
        for (auto& t : pool) t.join();
    }

    // Merge in block order so the floating-point sums are reproducible.
    Eigen::VectorXd total = Eigen::VectorXd::Zero(ix(k_size));
    for (const auto& bs : block_sums) {
        for (std::size_t k = 0; k < k_size; ++k) total(ix(k)) += bs.sums[k];
    }
    const double n_paths = static_cast<double>(options.paths);
    result.mean = total / n_paths;

    Eigen::MatrixXd loo(ix(blocks), ix(k_size));
    for (std::size_t b = 0; b < blocks; ++b) {
        const double rest = n_paths - static_cast<double>(block_sums[b].count);
        for (std::size_t k = 0; k < k_size; ++k) {
            loo(ix(b), ix(k)) = (total(ix(k)) - block_sums[b].sums[k]) / rest;
        }
    }
    const Eigen::RowVectorXd loo_mean = loo.colwise().mean();
    const double nb = static_cast<double>(blocks);
    result.std_error =
        ((loo.rowwise() - loo_mean).array().square().colwise().sum() * ((nb - 1.0) / nb)).sqrt().transpose();
    return result;
}

Eigen::VectorXd predicted_moments(const ClassicalSde& sde, const InitialDistribution& x0, std::size_t r_max,
                                  double t_final) {
    const QuasilinearSystem sys = sde.to_quasilinear();
    const MomentGenerator gen = build_generator(sys, r_max);
    const Eigen::VectorXcd mu0 = gaussian_initial_moments({x0.mean, x0.cov}, sys.theta, gen.space);
    const std::vector<double> grid{0.0, t_final};
    const MomentTrajectory traj = propagate(gen, mu0, grid);
    const Eigen::VectorXcd& mu = traj.values.back();
    if (mu.imag().cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, mu.cwiseAbs().maxCoeff())) {
        throw std::logic_error("predicted_moments: commutative moments acquired an imaginary part");
    }
    return mu.real();
}

ZScoreReport compare(const McResult& mc, const Eigen::VectorXd& predicted, double threshold) {
    if (static_cast<std::size_t>(predicted.size()) != mc.space.size()) {
        throw std::invalid_argument("compare: predicted moments do not match the Monte-Carlo index space");
    }
    ZScoreReport report;
    report.threshold = threshold;
    for (std::size_t k = 0; k < mc.space.size(); ++k) {
        ZScoreEntry e;
        e.label = mc.space.label(k);
        e.empirical = mc.mean(ix(k));
        e.predicted = predicted(ix(k));
        e.std_error = mc.std_error(ix(k));
        const double diff = e.empirical - e.predicted;
        if (e.std_error > 0.0) {
            e.z = diff / e.std_error;
        } else {
            e.z = std::abs(diff) <= 1e-12 * std::max(1.0, std::abs(e.predicted))
                      ? 0.0
                      : std::copysign(std::numeric_limits<double>::infinity(), diff);
        }
        report.max_abs_z = std::max(report.max_abs_z, std::abs(e.z));
        report.entries.push_back(std::move(e));
    }
    report.passed = report.max_abs_z <= threshold;
    return report;
}

}  // namespace quasilin
