#include "drsafe/ambiguity.hpp"

#include "drsafe/errors.hpp"
#include "drsafe/oracle.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace drsafe {

void MomentSpec::validate() const {
    const auto l = static_cast<Eigen::Index>(support.dim());
    if (l == 0) throw ConfigurationError("ambiguity support is empty");
    if (mean.size() != l || mean_tol.size() != l) {
        throw ConfigurationError("ambiguity mean / mean_tol dimension does not match support");
    }
    if (second_moment.rows() != l || second_moment.cols() != l) {
        throw ConfigurationError("ambiguity second-moment matrix has wrong shape");
    }
    for (Eigen::Index i = 0; i < l; ++i) {
        if (!(mean_tol[i] >= 0.0)) throw ConfigurationError("mean tolerance b must be >= 0");
    }
    if (!(scale >= 1.0)) throw ConfigurationError("second-moment scale c must be >= 1");
    const double asym = (second_moment - second_moment.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, second_moment.cwiseAbs().maxCoeff())) {
        throw ConfigurationError("second-moment matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(second_moment);
    if (eig.eigenvalues().minCoeff() < -1e-10) {
        throw ConfigurationError("second-moment matrix is not positive semidefinite");
    }
}

FeasibilityReport check_feasible(const MomentSpec& spec, std::size_t atoms_per_dim) {
    spec.validate();
    FeasibilityReport report;
    report.atoms_per_dim = atoms_per_dim;
    AtomSet grid = oracle::product_grid(spec.support, atoms_per_dim);
    const std::vector<double> zero(grid.size(), 0.0);
    try {
        oracle::PrimalResult r = oracle::primal_on_atoms(spec, grid, zero);
        report.feasible = true;
        // keep only the atoms that carry mass
        AtomSet w;
        w.dim = r.atoms.dim;
        for (std::size_t k = 0; k < r.atoms.size(); ++k) {
            if (r.atoms.weights[k] <= 0.0) continue;
            const auto p = r.atoms.point(k);
            w.points.insert(w.points.end(), p.begin(), p.end());
            w.weights.push_back(r.atoms.weights[k]);
        }
        report.witness = std::move(w);
    } catch (const RefineGridError&) {
        report.feasible = false;
    }
    return report;
}

MomentAmbiguitySet::MomentAmbiguitySet(MomentSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(spec_.second_moment);
    const Vector clamped = eig.eigenvalues().cwiseMax(0.0);
    spec_.second_moment =
        eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
    FeasibilityReport report = check_feasible(spec_);
    if (!report.feasible) {
        throw ConfigurationError("ambiguity set is infeasible on a " +
                                 std::to_string(report.atoms_per_dim) +
                                 "-cell support grid (retry with a finer grid if the "
                                 "moment constraints are nearly tight)");
    }
    witness_ = std::move(report.witness);
}

MomentAmbiguitySet scalar_ambiguity(double lo, double hi, double mean, double mean_tol,
                                    double second_moment, double scale) {
    return MomentAmbiguitySet(MomentSpec{Box::interval(lo, hi), Vector::Constant(1, mean),
                                         Vector::Constant(1, mean_tol),
                                         Matrix::Constant(1, 1, second_moment), scale});
}

NominalDistribution NominalDistribution::uniform(Box support) {
    NominalDistribution d;
    d.kind_ = Kind::Uniform;
    d.support_ = std::move(support);
    return d;
}

NominalDistribution NominalDistribution::truncated_normal(Vector mean, Vector stddev,
                                                          Box support) {
    const auto l = static_cast<Eigen::Index>(support.dim());
    if (mean.size() != l || stddev.size() != l) {
        throw ConfigurationError("truncated normal parameters do not match support dimension");
    }
    for (Eigen::Index i = 0; i < l; ++i) {
        if (!(stddev[i] > 0.0)) throw ConfigurationError("truncated normal stddev must be > 0");
    }
    NominalDistribution d;
    d.kind_ = Kind::TruncatedNormal;
    d.support_ = std::move(support);
    d.mean_ = std::move(mean);
    d.stddev_ = std::move(stddev);
    return d;
}

NominalDistribution NominalDistribution::atoms(AtomSet atoms) {
    if (atoms.size() == 0 || atoms.points.size() != atoms.size() * atoms.dim) {
        throw ConfigurationError("atom list is empty or malformed");
    }
    double total = 0.0;
    for (double w : atoms.weights) {
        if (w < 0.0) throw ConfigurationError("atom weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw ConfigurationError("atom weights must sum to 1");
    }
    Vector lo = Vector::Constant(static_cast<Eigen::Index>(atoms.dim), INFINITY);
    Vector hi = Vector::Constant(static_cast<Eigen::Index>(atoms.dim), -INFINITY);
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        for (std::size_t i = 0; i < atoms.dim; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            lo[ii] = std::min(lo[ii], atoms.point(k)[i]);
            hi[ii] = std::max(hi[ii], atoms.point(k)[i]);
        }
    }
    NominalDistribution d;
    d.kind_ = Kind::Atoms;
    d.support_ = Box(lo, hi);
    d.atoms_ = std::move(atoms);
    return d;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

struct Marginal {
    std::vector<double> points;
    std::vector<double> weights;
};

Marginal marginal(const NominalDistribution& nom, std::size_t i, std::size_t cells) {
    const double lo = nom.support().lo(i);
    const double hi = nom.support().hi(i);
    Marginal out;
    if (lo == hi) {
        out.points = {lo};
        out.weights = {1.0};
        return out;
    }
    const double width = (hi - lo) / static_cast<double>(cells);
    for (std::size_t k = 0; k < cells; ++k) {
        const double a = lo + width * static_cast<double>(k);
        const double b = (k + 1 == cells) ? hi : lo + width * static_cast<double>(k + 1);
        out.points.push_back(0.5 * (a + b));
        if (nom.kind() == NominalDistribution::Kind::Uniform) {
            out.weights.push_back(b - a);
        } else {
            const auto ii = static_cast<Eigen::Index>(i);
            const double mu = nom.mean()[ii];
            const double sd = nom.stddev()[ii];
            out.weights.push_back(normal_cdf((b - mu) / sd) - normal_cdf((a - mu) / sd));
        }
    }
    const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
    if (!(total > 0.0)) {
        throw ConfigurationError("nominal distribution has no mass on its support box");
    }
    for (double& w : out.weights) w /= total;
    return out;
}

} // namespace

AtomSet singleton(const NominalDistribution& nominal, std::size_t atoms_per_dim) {
    if (nominal.kind() == NominalDistribution::Kind::Atoms) return nominal.atom_list();
    if (atoms_per_dim < 2) throw ConfigurationError("singleton needs at least 2 atoms per dim");

    const std::size_t l = nominal.dim();
    std::vector<Marginal> marg;
    marg.reserve(l);
    std::size_t total = 1;
    for (std::size_t i = 0; i < l; ++i) {
        marg.push_back(marginal(nominal, i, atoms_per_dim));
        total *= marg.back().points.size();
    }

    AtomSet out;
    out.dim = l;
    out.points.reserve(total * l);
    out.weights.reserve(total);
    std::vector<std::size_t> idx(l, 0);
    for (std::size_t k = 0; k < total; ++k) {
        double w = 1.0;
        for (std::size_t i = 0; i < l; ++i) {
            out.points.push_back(marg[i].points[idx[i]]);
            w *= marg[i].weights[idx[i]];
        }
        out.weights.push_back(w);
        for (std::size_t i = l; i-- > 0;) {
            if (++idx[i] < marg[i].points.size()) break;
            idx[i] = 0;
        }
    }
    const double sum = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
    for (double& w : out.weights) w /= sum;
    return out;
}

double TclDisturbance::uniform_halfwidth() const { return std::sqrt(3.0 * variance); }

double TclDisturbance::literal_halfwidth() const { return 0.5 * std::sqrt(variance / 12.0); }

} // namespace drsafe
