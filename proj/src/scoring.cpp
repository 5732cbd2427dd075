#include "mevmix/scoring.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "mevmix/errors.hpp"

namespace mevmix {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double norm_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

void check_ensemble(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& y) {
    if (ensemble.rows() < 2) throw UsageError("need at least two ensemble members");
    if (ensemble.cols() != y.size()) {
        throw UsageError("ensemble and observation dimensions differ");
    }
}

/// Sum of distances between all unordered member pairs.
double pair_distance_sum(const Eigen::MatrixXd& ensemble) {
    double sum = 0.0;
    for (Eigen::Index m = 0; m < ensemble.rows(); ++m) {
        for (Eigen::Index k = m + 1; k < ensemble.rows(); ++k) {
            sum += (ensemble.row(m) - ensemble.row(k)).norm();
        }
    }
    return sum;
}

double mean_member_distance(const Eigen::MatrixXd& ensemble,
                            const Eigen::VectorXd& y) {
    double sum = 0.0;
    for (Eigen::Index m = 0; m < ensemble.rows(); ++m) {
        sum += (ensemble.row(m).transpose() - y).norm();
    }
    return sum / static_cast<double>(ensemble.rows());
}

} // namespace

WeightScheme WeightScheme::hard_quantile(Eigen::VectorXd thresholds,
                                         std::string label) {
    if (thresholds.size() < 1) throw UsageError("empty threshold vector");
    WeightScheme out;
    out.kind = Kind::HardQuantile;
    out.label = std::move(label);
    out.q = std::move(thresholds);
    return out;
}

WeightScheme WeightScheme::gaussian_cdf(MvnParams moments, std::string label) {
    WeightScheme out;
    out.kind = Kind::GaussianCdf;
    out.label = std::move(label);
    out.gauss = std::move(moments);
    return out;
}

Eigen::Index WeightScheme::dim() const {
    return kind == Kind::HardQuantile ? q.size() : gauss->dim();
}

double energy_score(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& y) {
    check_ensemble(ensemble, y);
    const double m = static_cast<double>(ensemble.rows());
    return mean_member_distance(ensemble, y) -
           pair_distance_sum(ensemble) / (m * (m - 1.0));
}

double weight(const Eigen::VectorXd& x, const WeightScheme& scheme) {
    if (x.size() != scheme.dim()) throw UsageError("weight dimension mismatch");
    if (scheme.kind == WeightScheme::Kind::HardQuantile) {
        return (x.array() > scheme.q.array()).all() ? 1.0 : 0.0;
    }
    return mvn_cdf(x, *scheme.gauss);
}

double owes(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& y,
            const WeightScheme& scheme) {
    check_ensemble(ensemble, y);
    if (scheme.dim() != y.size()) throw UsageError("weight dimension mismatch");
    const double wy = weight(y, scheme);
    if (wy == 0.0) return 0.0;

    const Eigen::Index n = ensemble.rows();
    Eigen::VectorXd w(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        w(m) = weight(ensemble.row(m).transpose(), scheme);
    }
    const double total = w.sum();
    const double total_sq = w.squaredNorm();
    const double pair_norm = total * total - total_sq;
    if (total <= 0.0 || pair_norm <= 0.0) return kNaN;

    double cross = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
        cross += w(m) * (ensemble.row(m).transpose() - y).norm();
    }
    cross /= total;
    double pair = 0.0;
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index k = m + 1; k < n; ++k) {
            pair += w(m) * w(k) * (ensemble.row(m) - ensemble.row(k)).norm();
        }
    }
    return wy * (cross - pair / pair_norm);
}

Eigen::VectorXd chain_map(const Eigen::VectorXd& x, const WeightScheme& scheme) {
    if (x.size() != scheme.dim()) throw UsageError("chain dimension mismatch");
    if (scheme.kind == WeightScheme::Kind::HardQuantile) {
        return x.cwiseMax(scheme.q);
    }
    const MvnParams& g = *scheme.gauss;
    Eigen::VectorXd out(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double mj = g.mean(j);
        const double sj = g.sd(j);
        const double z = (x(j) - mj) / sj;
        // Antiderivative of Phi(z) in x, shifted so the map is close to the
        // identity six standard deviations below the center.
        out(j) = (x(j) - mj) * norm_cdf(z) + sj * norm_pdf(z) + (mj - 6.0 * sj);
    }
    return out;
}

double twes(const Eigen::MatrixXd& ensemble, const Eigen::VectorXd& y,
            const WeightScheme& scheme) {
    check_ensemble(ensemble, y);
    if (scheme.dim() != y.size()) throw UsageError("weight dimension mismatch");
    Eigen::MatrixXd mapped(ensemble.rows(), ensemble.cols());
    for (Eigen::Index m = 0; m < ensemble.rows(); ++m) {
        mapped.row(m) = chain_map(ensemble.row(m).transpose(), scheme).transpose();
    }
    return energy_score(mapped, chain_map(y, scheme));
}

ScoreTable score_table(
    const std::vector<std::pair<std::string, Eigen::MatrixXd>>& model_ensembles,
    const Eigen::MatrixXd& y_series, const std::vector<WeightScheme>& schemes) {
    if (model_ensembles.empty()) throw UsageError("no model ensembles given");
    if (y_series.rows() == 0) throw UsageError("empty observation series");
    const Eigen::Index d = y_series.cols();
    for (const auto& [name, ens] : model_ensembles) {
        if (ens.rows() < 2) {
            throw UsageError("model " + name + " needs at least two members");
        }
        if (ens.cols() != d) {
            throw UsageError("model " + name + " dimension mismatch");
        }
    }
    for (const WeightScheme& s : schemes) {
        if (s.dim() != d) throw UsageError("scheme dimension mismatch");
    }

    ScoreTable table;
    table.columns.push_back("es");
    for (const WeightScheme& s : schemes) table.columns.push_back("owes_" + s.label);
    for (const WeightScheme& s : schemes) table.columns.push_back("twes_" + s.label);
    const Eigen::Index n_cols = static_cast<Eigen::Index>(table.columns.size());
    const Eigen::Index n_models = static_cast<Eigen::Index>(model_ensembles.size());
    const Eigen::Index n_obs = y_series.rows();
    table.means = Eigen::MatrixXd::Zero(n_models, n_cols);
    table.n_valid = Eigen::MatrixXi::Zero(n_models, n_cols);

    for (Eigen::Index mi = 0; mi < n_models; ++mi) {
        const auto& [name, ens] = model_ensembles[static_cast<std::size_t>(mi)];
        table.models.push_back(name);
        const double m = static_cast<double>(ens.rows());

        // Everything destination-independent is computed once per model:
        // member pair distances, member weights, and the chain images.
        const double pair_plain = pair_distance_sum(ens) / (m * (m - 1.0));
        struct SchemeCache {
            Eigen::VectorXd w;
            double total = 0.0;
            double pair_norm = 0.0;
            double pair_weighted = 0.0;
            Eigen::MatrixXd mapped;
            double pair_mapped = 0.0;
        };
        std::vector<SchemeCache> caches;
        for (const WeightScheme& s : schemes) {
            SchemeCache c;
            c.w.resize(ens.rows());
            for (Eigen::Index r = 0; r < ens.rows(); ++r) {
                c.w(r) = weight(ens.row(r).transpose(), s);
            }
            c.total = c.w.sum();
            c.pair_norm = c.total * c.total - c.w.squaredNorm();
            for (Eigen::Index r = 0; r < ens.rows(); ++r) {
                for (Eigen::Index k = r + 1; k < ens.rows(); ++k) {
                    c.pair_weighted +=
                        c.w(r) * c.w(k) * (ens.row(r) - ens.row(k)).norm();
                }
            }
            c.mapped.resize(ens.rows(), d);
            for (Eigen::Index r = 0; r < ens.rows(); ++r) {
                c.mapped.row(r) = chain_map(ens.row(r).transpose(), s).transpose();
            }
            c.pair_mapped = pair_distance_sum(c.mapped) / (m * (m - 1.0));
            caches.push_back(std::move(c));
        }

        Eigen::VectorXd sums = Eigen::VectorXd::Zero(n_cols);
        Eigen::VectorXi counts = Eigen::VectorXi::Zero(n_cols);
        for (Eigen::Index t = 0; t < n_obs; ++t) {
            const Eigen::VectorXd y = y_series.row(t).transpose();
            sums(0) += mean_member_distance(ens, y) - pair_plain;
            counts(0) += 1;
            for (std::size_t si = 0; si < caches.size(); ++si) {
                const SchemeCache& c = caches[si];
                const WeightScheme& s = schemes[si];
                const Eigen::Index owes_col = 1 + static_cast<Eigen::Index>(si);
                const Eigen::Index twes_col =
                    1 + static_cast<Eigen::Index>(schemes.size() + si);

                const double wy = weight(y, s);
                if (wy == 0.0) {
                    counts(owes_col) += 1;  // a defined zero contribution
                } else if (c.total > 0.0 && c.pair_norm > 0.0) {
                    double cross = 0.0;
                    for (Eigen::Index r = 0; r < ens.rows(); ++r) {
                        cross += c.w(r) * (ens.row(r).transpose() - y).norm();
                    }
                    sums(owes_col) +=
                        wy * (cross / c.total - c.pair_weighted / c.pair_norm);
                    counts(owes_col) += 1;
                }  // else: sentinel, excluded

                sums(twes_col) +=
                    mean_member_distance(c.mapped, chain_map(y, s)) - c.pair_mapped;
                counts(twes_col) += 1;
            }
        }
        for (Eigen::Index col = 0; col < n_cols; ++col) {
            table.means(mi, col) =
                counts(col) > 0 ? sums(col) / counts(col) : kNaN;
            table.n_valid(mi, col) = counts(col);
        }
    }
    return table;
}

} // namespace mevmix
