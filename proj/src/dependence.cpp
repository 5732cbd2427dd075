#include "mevmix/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace mevmix {

namespace {

void check_grid(const Eigen::VectorXd& r_grid) {
    if (r_grid.size() == 0) throw UsageError("empty level grid");
    for (Eigen::Index k = 0; k < r_grid.size(); ++k) {
        if (!(r_grid(k) > 0.0 && r_grid(k) < 1.0)) {
            throw UsageError("levels must lie strictly inside (0, 1)");
        }
        if (k > 0 && !(r_grid(k) > r_grid(k - 1))) {
            throw UsageError("levels must be strictly increasing");
        }
    }
}

void check_bivariate(const Eigen::MatrixXd& data, Eigen::Index min_rows) {
    if (data.cols() != 2) throw UsageError("need a two-column data matrix");
    if (data.rows() < min_rows) {
        throw UsageError("need at least " + std::to_string(min_rows) + " rows");
    }
    if (!data.allFinite()) throw UsageError("data contains non-finite values");
}

/// Mid-ranks divided by n + 1, so ties share a rank and every value lies
/// strictly inside (0, 1).
Eigen::VectorXd pseudo_observations(const Eigen::VectorXd& col) {
    const Eigen::Index n = col.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return col(a) < col(b); });
    Eigen::VectorXd out(n);
    Eigen::Index i = 0;
    while (i < n) {
        Eigen::Index j = i;
        while (j + 1 < n && col(order[j + 1]) == col(order[i])) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) {
            out(order[k]) = midrank / static_cast<double>(n + 1);
        }
        i = j + 1;
    }
    return out;
}

/// Sorts `y` in place by merge sort and returns the number of inversions.
long long count_inversions(std::vector<double>& y) {
    std::vector<double> buf(y.size());
    std::function<long long(std::size_t, std::size_t)> rec =
        [&](std::size_t lo, std::size_t hi) -> long long {
        if (hi - lo < 2) return 0;
        const std::size_t mid = lo + (hi - lo) / 2;
        long long inv = rec(lo, mid) + rec(mid, hi);
        std::size_t a = lo, b = mid, k = lo;
        while (a < mid && b < hi) {
            if (y[b] < y[a]) {
                inv += static_cast<long long>(mid - a);
                buf[k++] = y[b++];
            } else {
                buf[k++] = y[a++];
            }
        }
        while (a < mid) buf[k++] = y[a++];
        while (b < hi) buf[k++] = y[b++];
        std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo),
                  buf.begin() + static_cast<std::ptrdiff_t>(k),
                  y.begin() + static_cast<std::ptrdiff_t>(lo));
        return inv;
    };
    return rec(0, y.size());
}

/// Sum of t (t - 1) / 2 over runs of equal values in a sorted sequence.
template <class Iter, class Equal>
long long tie_pairs(Iter first, Iter last, Equal equal) {
    long long total = 0;
    while (first != last) {
        Iter run = first;
        long long t = 1;
        while (std::next(run) != last && equal(*run, *std::next(run))) {
            ++run;
            ++t;
        }
        total += t * (t - 1) / 2;
        first = std::next(run);
    }
    return total;
}

} // namespace

DependenceCurve chi_empirical(const Eigen::MatrixXd& data,
                              const Eigen::VectorXd& r_grid) {
    check_bivariate(data, 50);
    check_grid(r_grid);
    const Eigen::Index n = data.rows();
    const Eigen::VectorXd p1 = pseudo_observations(data.col(0));
    const Eigen::VectorXd p2 = pseudo_observations(data.col(1));

    const double r_max = 1.0 - 1.0 / static_cast<double>(n);
    std::vector<double> levels, values;
    for (Eigen::Index k = 0; k < r_grid.size(); ++k) {
        const double r = r_grid(k);
        if (r >= r_max) continue;
        Eigen::Index joint = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (p1(i) > r && p2(i) > r) ++joint;
        }
        const double raw = static_cast<double>(joint) /
                           (static_cast<double>(n) * (1.0 - r));
        levels.push_back(r);
        values.push_back(std::min(raw, 1.0));
    }
    if (levels.empty()) {
        throw UsageError("no level is estimable from this sample size");
    }
    DependenceCurve out;
    out.r_grid = Eigen::Map<Eigen::VectorXd>(levels.data(),
                                             static_cast<Eigen::Index>(levels.size()));
    out.values = Eigen::Map<Eigen::VectorXd>(values.data(),
                                             static_cast<Eigen::Index>(values.size()));
    out.n_used = n;
    return out;
}

DependenceCurve chibar_empirical(const Eigen::MatrixXd& data,
                                 const Eigen::VectorXd& r_grid) {
    check_bivariate(data, 50);
    check_grid(r_grid);
    const Eigen::Index n = data.rows();
    const Eigen::VectorXd p1 = pseudo_observations(data.col(0));
    const Eigen::VectorXd p2 = pseudo_observations(data.col(1));

    std::vector<double> levels, values;
    for (Eigen::Index k = 0; k < r_grid.size(); ++k) {
        const double r = r_grid(k);
        Eigen::Index joint = 0, marginal = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (p1(i) > r) ++marginal;
            if (p1(i) > r && p2(i) > r) ++joint;
        }
        // Tail counts below five make the log ratio meaningless noise.
        if (joint < 5) continue;
        double value;
        if (joint == n) {
            value = 1.0;  // every row exceeds jointly: comonotone-like limit
        } else {
            const double log_marg =
                std::log(static_cast<double>(marginal) / static_cast<double>(n));
            const double log_joint =
                std::log(static_cast<double>(joint) / static_cast<double>(n));
            value = 2.0 * log_marg / log_joint - 1.0;
        }
        levels.push_back(r);
        values.push_back(value);
    }
    if (levels.empty()) {
        throw UsageError("no level has enough joint exceedances");
    }
    DependenceCurve out;
    out.r_grid = Eigen::Map<Eigen::VectorXd>(levels.data(),
                                             static_cast<Eigen::Index>(levels.size()));
    out.values = Eigen::Map<Eigen::VectorXd>(values.data(),
                                             static_cast<Eigen::Index>(values.size()));
    out.n_used = n;
    return out;
}

double kendall_tau(const Eigen::MatrixXd& data) {
    if (data.cols() != 2) throw UsageError("need a two-column data matrix");
    const Eigen::Index n = data.rows();
    if (n < 2) throw UsageError("need at least two rows");
    if (!data.allFinite()) throw UsageError("data contains non-finite values");

    std::vector<std::pair<double, double>> xy(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        xy[static_cast<std::size_t>(i)] = {data(i, 0), data(i, 1)};
    }
    std::sort(xy.begin(), xy.end());

    const long long n0 = static_cast<long long>(n) * (n - 1) / 2;
    const long long ties_x = tie_pairs(xy.begin(), xy.end(),
                                       [](const auto& a, const auto& b) {
                                           return a.first == b.first;
                                       });
    const long long ties_xy = tie_pairs(xy.begin(), xy.end(),
                                        [](const auto& a, const auto& b) {
                                            return a == b;
                                        });

    std::vector<double> y(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = xy[i].second;
    // After the (x, y) sort, pairs tied in x are already ordered by y and
    // contribute no inversions, so the count below is exactly the number
    // of discordant pairs.
    const long long discordant = count_inversions(y);
    const long long ties_y = tie_pairs(y.begin(), y.end(),
                                       [](double a, double b) { return a == b; });

    const long long denom_x = n0 - ties_x;
    const long long denom_y = n0 - ties_y;
    if (denom_x == 0 || denom_y == 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const long long net = n0 - ties_x - ties_y + ties_xy - 2 * discordant;
    return static_cast<double>(net) /
           std::sqrt(static_cast<double>(denom_x) * static_cast<double>(denom_y));
}

} // namespace mevmix
