#include "qsdlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <string>

#include "qsdlab/errors.hpp"

namespace qsd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Hermite {
    double value;
    double slope;
};

// Cubic Hermite through (y0, m0) and (y1, m1) on an interval of width H.
Hermite hermite(double t, double H, double y0, double m0, double y1, double m1) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double value = (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * H * m0 +
                         (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * H * m1;
    const double slope = (6 * t2 - 6 * t) * (y0 - y1) / H + (3 * t2 - 4 * t + 1) * m0 +
                         (3 * t2 - 2 * t) * m1;
    return {value, slope};
}

std::vector<double> split_csv_numbers(const std::string& line) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
        } catch (const std::exception&) {
            throw ValidationError("potential table: non-numeric cell `" + cell + "`");
        }
    }
    return out;
}

}  // namespace

PotentialSpec PotentialSpec::zero() {
    PotentialSpec s;
    s.family_ = PotentialFamily::zero;
    s.domain_min_ = -kInf;
    s.domain_max_ = kInf;
    return s;
}

PotentialSpec PotentialSpec::quadratic(double lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw ValidationError("potential.lambda must be > 0 for the quadratic family");
    }
    PotentialSpec s;
    s.family_ = PotentialFamily::quadratic;
    s.parameter_ = lambda;
    s.domain_min_ = -kInf;
    s.domain_max_ = kInf;
    return s;
}

PotentialSpec PotentialSpec::shifted_power(double delta) {
    if (!(delta > 2.0) || !std::isfinite(delta)) {
        throw ValidationError("potential.delta must be > 2 for the shifted-power family");
    }
    PotentialSpec s;
    s.family_ = PotentialFamily::shifted_power;
    s.parameter_ = delta;
    s.domain_min_ = -1.0;
    s.domain_max_ = kInf;
    s.cdfi_ = true;
    return s;
}

PotentialSpec PotentialSpec::tabulated(std::vector<double> x, std::vector<double> v,
                                       std::vector<double> dv, std::vector<double> d2v) {
    const std::size_t m = x.size();
    if (m < 2 || v.size() != m || dv.size() != m || d2v.size() != m) {
        throw ValidationError("potential table needs at least two complete rows");
    }
    for (std::size_t k = 0; k < m; ++k) {
        if (!std::isfinite(x[k]) || !std::isfinite(v[k]) || !std::isfinite(dv[k]) ||
            !std::isfinite(d2v[k])) {
            throw ValidationError("potential table contains non-finite values");
        }
        if (k > 0 && !(x[k] > x[k - 1])) {
            throw ValidationError("potential table x column must be strictly increasing");
        }
    }
    PotentialSpec s;
    s.family_ = PotentialFamily::tabulated;
    s.domain_min_ = x.front();
    s.domain_max_ = x.back();
    s.tx_ = std::move(x);
    s.tv_ = std::move(v);
    s.tdv_ = std::move(dv);
    s.td2v_ = std::move(d2v);
    return s;
}

PotentialSpec PotentialSpec::read_table_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("potential table is empty");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,V,Vp,Vpp") {
        throw ValidationError("potential table must start with header `x,V,Vp,Vpp`");
    }
    std::vector<double> x, v, dv, d2v;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto row = split_csv_numbers(line);
        if (row.size() != 4) {
            throw ValidationError("potential table rows need 4 columns");
        }
        x.push_back(row[0]);
        v.push_back(row[1]);
        dv.push_back(row[2]);
        d2v.push_back(row[3]);
    }
    return tabulated(std::move(x), std::move(v), std::move(dv), std::move(d2v));
}

std::string PotentialSpec::name() const {
    switch (family_) {
        case PotentialFamily::zero: return "zero";
        case PotentialFamily::quadratic: return "quadratic";
        case PotentialFamily::shifted_power: return "shifted-power";
        case PotentialFamily::tabulated: return "tabulated";
    }
    return "unknown";
}

PotentialSpec PotentialSpec::with_cdfi(bool on) const {
    PotentialSpec s = *this;
    s.cdfi_ = on;
    return s;
}

PotentialValue PotentialSpec::evaluate(double x) const {
    if (!(x >= domain_min_ && x <= domain_max_)) {
        std::ostringstream msg;
        msg << "potential " << name() << " evaluated outside its domain at x = " << x;
        throw ValidationError(msg.str());
    }
    switch (family_) {
        case PotentialFamily::zero:
            return {0.0, 0.0, 0.0};
        case PotentialFamily::quadratic: {
            const double l = parameter_;
            return {l * x * x, 2.0 * l * x, 2.0 * l};
        }
        case PotentialFamily::shifted_power: {
            const double d = parameter_;
            const double y = x + 1.0;
            return {std::pow(y, d), d * std::pow(y, d - 1.0), d * (d - 1.0) * std::pow(y, d - 2.0)};
        }
        case PotentialFamily::tabulated:
            return interpolate(x);
    }
    return {};
}

PotentialValue PotentialSpec::interpolate(double x) const {
    auto it = std::upper_bound(tx_.begin(), tx_.end(), x);
    std::size_t k = it == tx_.begin() ? 0 : static_cast<std::size_t>(it - tx_.begin()) - 1;
    k = std::min(k, tx_.size() - 2);
    const double H = tx_[k + 1] - tx_[k];
    const double t = (x - tx_[k]) / H;
    const Hermite v = hermite(t, H, tv_[k], tdv_[k], tv_[k + 1], tdv_[k + 1]);
    const Hermite dv = hermite(t, H, tdv_[k], td2v_[k], tdv_[k + 1], td2v_[k + 1]);
    return {v.value, dv.value, dv.slope};
}

Infimum be_constant(std::span<const double> second_derivatives) {
    if (second_derivatives.empty()) {
        throw ValidationError("be_constant: empty sample array");
    }
    const auto it = std::min_element(second_derivatives.begin(), second_derivatives.end());
    return {*it, static_cast<std::size_t>(it - second_derivatives.begin())};
}

std::vector<double> log_second_difference(std::span<const double> eta, const Grid1D& grid) {
    const std::size_t n = grid.size();
    if (eta.size() != n) {
        throw ValidationError("eta length does not match the grid");
    }
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(eta[i] > 0.0)) {
            throw ValidationError("eta must be positive at every interior node");
        }
        s[i] = std::log(eta[i]);
    }
    const double h2 = grid.spacing() * grid.spacing();
    std::vector<double> d2(n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        d2[i] = (s[i + 1] - 2.0 * s[i] + s[i - 1]) / h2;
    }
    if (n == 3) {
        d2[0] = d2[2] = d2[1];
    } else {
        d2[0] = (2.0 * s[0] - 5.0 * s[1] + 4.0 * s[2] - s[3]) / h2;
        d2[n - 1] = (2.0 * s[n - 1] - 5.0 * s[n - 2] + 4.0 * s[n - 3] - s[n - 4]) / h2;
    }
    return d2;
}

EffectivePotential effective_potential(const PotentialSpec& spec, const EigenPair& eigen,
                                       const Grid1D& grid) {
    EffectivePotential w;
    const auto d2 = log_second_difference(eigen.eta, grid);
    w.log_eta.resize(grid.size());
    w.w_second.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        w.log_eta[i] = std::log(eigen.eta[i]);
        w.w_second[i] = spec.evaluate(grid.node(i)).d2v - 2.0 * d2[i];
    }
    return w;
}

std::vector<double> effective_second_derivative(const PotentialSpec& spec, const EigenPair& eigen,
                                                const Grid1D& grid) {
    return effective_potential(spec, eigen, grid).w_second;
}

CdfiRate cdfi_rate(const PotentialSpec& spec, double lambda0, const Grid1D& grid, CdfiForm form,
                   std::optional<double> probe_min, std::optional<double> probe_max) {
    if (!(lambda0 > 0.0) || !std::isfinite(lambda0)) {
        throw ValidationError("cdfi_rate: lambda0 must be > 0");
    }
    const double lo = probe_min.value_or(-kInf);
    const double hi = probe_max.value_or(kInf);
    CdfiRate best{kInf, 0, 0.0};
    bool any = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double x = grid.node(i);
        if (x < lo || x > hi) continue;
        const PotentialValue p = spec.evaluate(x);
        const double ev = std::exp(-p.v);
        double value = p.d2v + 8.0 * lambda0 * ev;
        if (form == CdfiForm::refined) {
            if (!(p.dv > 0.0)) {
                std::ostringstream msg;
                msg << "cdfi_rate: refined form needs V' > 0, but V'(" << x << ") = " << p.dv;
                throw ValidationError(msg.str());
            }
            const double r = (1.0 - 2.0 * ev) / p.dv;
            value += 8.0 * lambda0 * lambda0 * r * r;
        }
        if (value < best.value) best = {value, i, x};
        any = true;
    }
    if (!any) {
        throw ValidationError("cdfi_rate: probe window contains no grid node");
    }
    return best;
}

}  // namespace qsd
