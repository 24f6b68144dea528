#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "pelm/rng.hpp"

// Trainable readouts and evaluation protocols: ridge regression with k-fold
// lambda selection, single-basis and one-vs-all (winner-takes-all) linear
// classification, multinomial logistic regression, and Monte Carlo
// cross-validation. Only the readout is ever trained; the hidden layer is
// fixed by construction.

namespace pelm::learn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class TargetMode { regression_single, one_vs_all };

/// Regression targets derived from class labels: either one numeric code per
/// class (single basis) or one-hot rows (one per-class basis).
struct TargetSpec {
    TargetMode mode = TargetMode::regression_single;
    std::vector<int> labels;
    Matrix numeric_targets;            // n x 1 (single) or n x K (one_vs_all)
    std::vector<double> class_values;  // single mode: numeric code per class

    static TargetSpec single(const std::vector<int>& labels, std::vector<double> class_values) {
        TargetSpec t;
        t.mode = TargetMode::regression_single;
        t.labels = labels;
        t.class_values = std::move(class_values);
        t.numeric_targets.resize(static_cast<Eigen::Index>(labels.size()), 1);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const int c = labels[i];
            if (c < 0 || static_cast<std::size_t>(c) >= t.class_values.size())
                throw std::invalid_argument("TargetSpec: label out of range");
            t.numeric_targets(static_cast<Eigen::Index>(i), 0) =
                t.class_values[static_cast<std::size_t>(c)];
        }
        return t;
    }

    static TargetSpec one_vs_all(const std::vector<int>& labels, int classes) {
        if (classes < 2) throw std::invalid_argument("TargetSpec: need at least two classes");
        TargetSpec t;
        t.mode = TargetMode::one_vs_all;
        t.labels = labels;
        t.numeric_targets = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const int c = labels[i];
            if (c < 0 || c >= classes) throw std::invalid_argument("TargetSpec: label out of range");
            t.numeric_targets(static_cast<Eigen::Index>(i), c) = 1.0;
        }
        return t;
    }

    int class_count() const {
        return mode == TargetMode::regression_single ? static_cast<int>(class_values.size())
                                                     : static_cast<int>(numeric_targets.cols());
    }
};

/// Linear readout beta with unpenalized intercept.
struct RidgeModel {
    Vector weights;
    double intercept = 0.0;
    double lambda = 0.0;
    bool degenerate = false;  // rank-deficient at lambda = 0: minimum-norm solution returned

    Vector predict(const Matrix& H) const {
        return (H * weights).array() + intercept;
    }
};

/// Minimizes ||H beta + beta0 - t||^2 + lambda^2 ||beta||^2 via centered
/// normal equations; lambda = 0 falls back to the minimum-norm least-squares
/// solution (Moore-Penrose semantics).
inline RidgeModel ridge_fit(const Matrix& H, const Vector& t, double lambda) {
    if (H.rows() < 1) throw std::invalid_argument("ridge_fit: need at least one sample");
    if (H.rows() != t.size()) throw std::invalid_argument("ridge_fit: row/target mismatch");
    if (!(lambda >= 0.0)) throw std::domain_error("ridge_fit: lambda must be non-negative");

    const Eigen::RowVectorXd mu = H.colwise().mean();
    const Matrix Hc = H.rowwise() - mu;
    const double tm = t.mean();
    const Vector tc = t.array() - tm;

    RidgeModel model;
    model.lambda = lambda;
    if (lambda > 0.0) {
        Matrix G = Hc.transpose() * Hc;
        G.diagonal().array() += lambda * lambda;
        model.weights = G.ldlt().solve(Hc.transpose() * tc);
    } else {
        Eigen::BDCSVD<Matrix> svd(Hc, Eigen::ComputeThinU | Eigen::ComputeThinV);
        model.weights = svd.solve(tc);
        model.degenerate = svd.rank() < Hc.cols();
    }
    model.intercept = tm - mu * model.weights;
    return model;
}

/// 25 log-spaced regularization values in [1e-6, 1e2].
inline std::vector<double> default_lambda_grid() {
    std::vector<double> grid(25);
    for (int i = 0; i < 25; ++i)
        grid[static_cast<std::size_t>(i)] = std::pow(10.0, -6.0 + 8.0 * i / 24.0);
    return grid;
}

/// k-fold cross-validated lambda selection over a grid. Folds are contiguous
/// chunks of a seeded shuffle; ties break toward larger lambda.
inline double select_lambda(const Matrix& H, const Vector& t, std::vector<double> grid,
                            int folds, std::uint64_t seed) {
    if (grid.empty()) throw std::invalid_argument("select_lambda: empty grid");
    if (folds < 2) throw std::invalid_argument("select_lambda: need at least two folds");
    const auto n = H.rows();
    if (n < folds) throw std::invalid_argument("select_lambda: fewer samples than folds");
    std::sort(grid.begin(), grid.end());

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng::Stream stream{seed};
    stream.shuffle(order);

    std::vector<double> sse(grid.size(), 0.0);
    for (int f = 0; f < folds; ++f) {
        const auto lo = static_cast<std::size_t>(f) * static_cast<std::size_t>(n) /
                        static_cast<std::size_t>(folds);
        const auto hi = (static_cast<std::size_t>(f) + 1) * static_cast<std::size_t>(n) /
                        static_cast<std::size_t>(folds);
        const auto n_val = static_cast<Eigen::Index>(hi - lo);
        const auto n_tr = n - n_val;

        Matrix Htr(n_tr, H.cols()), Hval(n_val, H.cols());
        Vector ttr(n_tr), tval(n_val);
        Eigen::Index itr = 0, ival = 0;
        for (std::size_t k = 0; k < order.size(); ++k) {
            if (k >= lo && k < hi) {
                Hval.row(ival) = H.row(order[k]);
                tval(ival++) = t(order[k]);
            } else {
                Htr.row(itr) = H.row(order[k]);
                ttr(itr++) = t(order[k]);
            }
        }

        // one centered Gram per fold; each lambda only re-solves
        const Eigen::RowVectorXd mu = Htr.colwise().mean();
        const Matrix Hc = Htr.rowwise() - mu;
        const double tm = ttr.mean();
        const Matrix G = Hc.transpose() * Hc;
        const Vector rhs = Hc.transpose() * (ttr.array() - tm).matrix();

        for (std::size_t gi = 0; gi < grid.size(); ++gi) {
            Vector beta;
            if (grid[gi] > 0.0) {
                Matrix Gl = G;
                Gl.diagonal().array() += grid[gi] * grid[gi];
                beta = Gl.ldlt().solve(rhs);
            } else {
                beta = ridge_fit(Htr, ttr, 0.0).weights;
            }
            const double b0 = tm - mu * beta;
            sse[gi] += (((Hval * beta).array() + b0) - tval.array()).square().sum();
        }
    }

    std::size_t best = 0;
    for (std::size_t gi = 1; gi < grid.size(); ++gi)
        if (sse[gi] <= sse[best]) best = gi;  // <= : ties go to the larger lambda
    return grid[best];
}

/// One ridge readout per class against its one-hot target, lambda selected
/// independently per class.
inline std::vector<RidgeModel> ridge_fit_one_vs_all(const Matrix& H, const TargetSpec& targets,
                                                    const std::vector<double>& grid, int folds,
                                                    std::uint64_t seed) {
    if (targets.mode != TargetMode::one_vs_all)
        throw std::invalid_argument("ridge_fit_one_vs_all: targets must be one_vs_all");
    std::vector<RidgeModel> models;
    models.reserve(static_cast<std::size_t>(targets.numeric_targets.cols()));
    for (Eigen::Index k = 0; k < targets.numeric_targets.cols(); ++k) {
        const Vector t = targets.numeric_targets.col(k);
        const double lam = select_lambda(H, t, grid, folds, seed + static_cast<std::uint64_t>(k));
        models.push_back(ridge_fit(H, t, lam));
    }
    return models;
}

/// Assigns each prediction to the class whose numeric code is nearest;
/// exact midpoints break toward the smaller code.
inline std::vector<int> classify_single_basis(const Vector& predictions,
                                              const std::vector<double>& class_values) {
    if (class_values.empty()) throw std::invalid_argument("classify_single_basis: no classes");
    std::vector<int> out(static_cast<std::size_t>(predictions.size()));
    for (Eigen::Index i = 0; i < predictions.size(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < class_values.size(); ++c) {
            const double d = std::abs(predictions(i) - class_values[c]);
            const bool closer =
                d < best_d || (d == best_d && class_values[c] < class_values[static_cast<std::size_t>(best)]);
            if (closer) {
                best = static_cast<int>(c);
                best_d = d;
            }
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

/// Winner-takes-all: argmax over per-class scores, ties toward the lowest
/// class index (tie count reported if requested).
inline std::vector<int> classify_wta(const Matrix& class_scores, int* tie_count = nullptr) {
    if (class_scores.cols() < 2) throw std::invalid_argument("classify_wta: need at least 2 classes");
    std::vector<int> out(static_cast<std::size_t>(class_scores.rows()));
    int ties = 0;
    for (Eigen::Index i = 0; i < class_scores.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < class_scores.cols(); ++c) {
            if (class_scores(i, c) > class_scores(i, best)) best = c;
            else if (class_scores(i, c) == class_scores(i, best)) ++ties;
        }
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    if (tie_count) *tie_count = ties;
    return out;
}

struct LogisticOptions {
    double l2 = 0.03;  // on weights only, intercepts unpenalized
    int max_iters = 10000;
    double tol = 1e-8;  // on the gradient 2-norm
};

struct LogisticModel {
    Matrix weights;     // classes x features
    Vector intercepts;  // per class
    double l2 = 0.0;
    bool converged = false;
    int iterations = 0;
    double grad_norm = 0.0;

    Matrix predict_scores(const Matrix& H) const {
        Matrix Z = H * weights.transpose();
        Z.rowwise() += intercepts.transpose();
        return Z;
    }

    /// Row-stochastic softmax probabilities.
    Matrix predict_proba(const Matrix& H) const {
        Matrix Z = predict_scores(H);
        for (Eigen::Index i = 0; i < Z.rows(); ++i) {
            const double m = Z.row(i).maxCoeff();
            Z.row(i) = (Z.row(i).array() - m).exp();
            Z.row(i) /= Z.row(i).sum();
        }
        return Z;
    }

    std::vector<int> predict(const Matrix& H) const { return classify_wta(predict_scores(H)); }
};

/// Mean cross-entropy + (l2/2)||W||^2 and its gradient at (W, b).
inline double logistic_value_and_gradient(const Matrix& W, const Vector& b, const Matrix& H,
                                          const std::vector<int>& labels, double l2,
                                          Matrix* grad_W = nullptr, Vector* grad_b = nullptr) {
    const auto n = H.rows();
    const auto K = W.rows();
    Matrix Z = H * W.transpose();
    Z.rowwise() += b.transpose();

    double loss = 0.0;
    Matrix P(n, K);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = Z.row(i).maxCoeff();
        const double lse = m + std::log((Z.row(i).array() - m).exp().sum());
        loss += lse - Z(i, labels[static_cast<std::size_t>(i)]);
        P.row(i) = (Z.row(i).array() - lse).exp();
    }
    loss /= static_cast<double>(n);
    loss += 0.5 * l2 * W.squaredNorm();

    if (grad_W || grad_b) {
        for (Eigen::Index i = 0; i < n; ++i) P(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
        if (grad_W) *grad_W = P.transpose() * H / static_cast<double>(n) + l2 * W;
        if (grad_b) *grad_b = P.colwise().sum().transpose() / static_cast<double>(n);
    }
    return loss;
}

/// Full-batch gradient descent with backtracking (Armijo) line search.
/// Returns the model with convergence diagnostics; non-convergence is
/// reported, not thrown, since the objective is convex.
inline LogisticModel logistic_fit(const Matrix& H, const std::vector<int>& labels, int classes,
                                  const LogisticOptions& opts = {}) {
    if (static_cast<Eigen::Index>(labels.size()) != H.rows())
        throw std::invalid_argument("logistic_fit: row/label mismatch");
    if (classes < 2) throw std::invalid_argument("logistic_fit: need at least two classes");
    if (!(opts.l2 >= 0.0)) throw std::domain_error("logistic_fit: l2 must be non-negative");
    std::vector<char> seen(static_cast<std::size_t>(classes), 0);
    for (int c : labels) {
        if (c < 0 || c >= classes) throw std::invalid_argument("logistic_fit: label out of range");
        seen[static_cast<std::size_t>(c)] = 1;
    }
    if (std::count(seen.begin(), seen.end(), 1) < 2)
        throw std::invalid_argument("logistic_fit: training data contains a single class");

    LogisticModel model;
    model.l2 = opts.l2;
    model.weights = Matrix::Zero(classes, H.cols());
    model.intercepts = Vector::Zero(classes);

    Matrix gW;
    Vector gb;
    double f = logistic_value_and_gradient(model.weights, model.intercepts, H, labels, opts.l2,
                                           &gW, &gb);
    double step = 1.0;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        const double g2 = gW.squaredNorm() + gb.squaredNorm();
        model.grad_norm = std::sqrt(g2);
        if (model.grad_norm < opts.tol) {
            model.converged = true;
            break;
        }
        step = std::min(step * 2.0, 1e8);
        Matrix W2;
        Vector b2;
        double f2 = 0.0;
        while (true) {
            W2 = model.weights - step * gW;
            b2 = model.intercepts - step * gb;
            f2 = logistic_value_and_gradient(W2, b2, H, labels, opts.l2);
            if (f2 <= f - 1e-4 * step * g2 || step < 1e-18) break;
            step *= 0.5;
        }
        if (step < 1e-18) break;  // no descent possible at double precision
        model.weights = W2;
        model.intercepts = b2;
        f = logistic_value_and_gradient(model.weights, model.intercepts, H, labels, opts.l2, &gW,
                                        &gb);
    }
    model.iterations = it;
    return model;
}

/// Disjoint seeded train/test split covering all samples.
struct SplitPlan {
    std::vector<Eigen::Index> train_indices;
    std::vector<Eigen::Index> test_indices;
};

inline SplitPlan random_split(Eigen::Index n, double train_ratio, rng::Stream& stream) {
    if (!(train_ratio > 0.0 && train_ratio < 1.0))
        throw std::invalid_argument("random_split: ratio must lie in (0,1)");
    if (n < 2) throw std::invalid_argument("random_split: need at least two samples");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    stream.shuffle(order);
    auto n_train = static_cast<std::size_t>(std::lround(train_ratio * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, static_cast<std::size_t>(n) - 1);
    SplitPlan plan;
    plan.train_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    plan.test_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return plan;
}

struct CvResult {
    double mean = 0.0;
    double variance = 0.0;  // sample variance across repetitions
    std::vector<double> per_rep;
    int resampled_splits = 0;  // splits redrawn because a class was missing from training
};

/// Monte Carlo cross-validation: per repetition a fresh seeded split at
/// `ratio`, evaluated by `eval(plan, rep)`. Splits that leave a class out of
/// the training set are redrawn and counted. Deterministic in (seed, config),
/// independent of `threads`.
template <typename EvalFn>
CvResult monte_carlo_cv(Eigen::Index n, const std::vector<int>& labels, double ratio,
                        int repetitions, std::uint64_t seed, EvalFn&& eval, int threads = 1) {
    if (repetitions < 1) throw std::invalid_argument("monte_carlo_cv: repetitions must be >= 1");
    if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != n)
        throw std::invalid_argument("monte_carlo_cv: label count mismatch");

    const int n_classes =
        labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;

    CvResult result;
    result.per_rep.resize(static_cast<std::size_t>(repetitions));
    std::vector<int> rep_attempts(static_cast<std::size_t>(repetitions), 0);

    const auto run_rep = [&](int rep) {
        for (int attempt = 0; attempt < 1000; ++attempt) {
            rng::Stream stream{seed, static_cast<std::uint64_t>(rep),
                               static_cast<std::uint64_t>(attempt)};
            SplitPlan plan = random_split(n, ratio, stream);
            if (n_classes > 0) {
                std::vector<char> seen(static_cast<std::size_t>(n_classes), 0);
                for (auto i : plan.train_indices) seen[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])] = 1;
                if (std::count(seen.begin(), seen.end(), 1) < n_classes) {
                    ++rep_attempts[static_cast<std::size_t>(rep)];
                    continue;
                }
            }
            result.per_rep[static_cast<std::size_t>(rep)] = eval(plan, rep);
            return;
        }
        throw std::invalid_argument("monte_carlo_cv: could not draw a split covering all classes");
    };

    if (threads <= 1 || repetitions == 1) {
        for (int rep = 0; rep < repetitions; ++rep) run_rep(rep);
    } else {
        const int workers = std::min(threads, repetitions);
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int rep = w; rep < repetitions; rep += workers) run_rep(rep);
            });
        for (auto& th : pool) th.join();
    }

    result.resampled_splits =
        std::accumulate(rep_attempts.begin(), rep_attempts.end(), 0);
    double mean = 0.0;
    for (double v : result.per_rep) mean += v;
    mean /= static_cast<double>(repetitions);
    double var = 0.0;
    for (double v : result.per_rep) var += (v - mean) * (v - mean);
    result.mean = mean;
    result.variance = repetitions > 1 ? var / static_cast<double>(repetitions - 1) : 0.0;
    return result;
}

}  // namespace pelm::learn
