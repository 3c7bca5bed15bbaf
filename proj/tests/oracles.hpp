#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace testing {

// Equality-constrained Newton on sum X_j log p_j subject to c.p = B, over the
// occupied lots. Knows nothing about the closed form.
inline std::vector<double> newton_maximise(const std::vector<int>& x, const std::vector<double>& c, double budget) {
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < x.size(); ++j)
        if (x[j] > 0) support.push_back(j);
    const auto m = static_cast<Eigen::Index>(support.size());
    Eigen::VectorXd p(m), cs(m), w(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        cs[i] = c[support[i]];
        w[i] = x[support[i]];
        p[i] = budget / (static_cast<double>(m) * cs[i]);
    }
    for (int it = 0; it < 200; ++it) {
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + 1, m + 1);
        Eigen::VectorXd rhs(m + 1);
        for (Eigen::Index i = 0; i < m; ++i) {
            kkt(i, i) = -w[i] / (p[i] * p[i]);
            kkt(i, m) = cs[i];
            kkt(m, i) = cs[i];
            rhs[i] = -w[i] / p[i];
        }
        rhs[m] = budget - cs.dot(p);
        const Eigen::VectorXd step = kkt.partialPivLu().solve(rhs).head(m);
        double t = 1.0;
        while ((p + t * step).minCoeff() <= 0.0) t *= 0.5;
        p += t * step;
        if (t * step.cwiseAbs().maxCoeff() <= 1e-16 * p.cwiseAbs().maxCoeff()) break;
    }
    std::vector<double> out(x.size(), 0.0);
    for (Eigen::Index i = 0; i < m; ++i) out[support[i]] = p[i];
    return out;
}


}  // namespace testing
