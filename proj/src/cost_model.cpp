#include "pqkv/cost_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

namespace pqkv {

void CostModel::validate() const {
    if (!(beta1 > 0.0)) throw std::invalid_argument("cost model: beta1 must be > 0");
    if (gamma2 < 0.0) throw std::invalid_argument("cost model: gamma2 must be >= 0");
    if (!(offload_bandwidth > 0.0))
        throw std::invalid_argument("cost model: offload_bandwidth must be > 0");
    if (!(fetch_bandwidth > 0.0))
        throw std::invalid_argument("cost model: fetch_bandwidth must be > 0");
}

namespace {

// Simple linear regression y = a + b*x with x centered for stability.
void fit_line(const std::vector<double>& x, const std::vector<double>& y, double& a,
              double& b) {
    std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit: degenerate design, all x equal");
    b = sxy / sxx;
    a = my - b * mx;
}

}  // namespace

ClusteringFit fit_clustering(std::span<const ClusteringSample> samples) {
    if (samples.size() < 2) throw std::invalid_argument("fit: need at least two samples");
    std::vector<double> x, y;
    x.reserve(samples.size());
    y.reserve(samples.size());
    for (const ClusteringSample& smp : samples) {
        if (smp.s <= 0.0 || smp.iterations <= 0.0)
            throw std::invalid_argument("fit: samples need positive s and iterations");
        x.push_back(smp.s * smp.iterations);
        y.push_back(smp.seconds);
    }
    ClusteringFit fit;
    fit_line(x, y, fit.alpha1, fit.beta1);
    return fit;
}

ComputeFit fit_compute(std::span<const ComputeSample> samples) {
    std::set<double> distinct;
    for (const ComputeSample& smp : samples) distinct.insert(smp.s);
    if (distinct.size() < 3)
        throw std::invalid_argument("fit: need samples at three or more distinct s");

    // Center and scale s so the normal equations stay well conditioned, then
    // expand the quadratic in u = (s - mu) / sigma back to s.
    std::size_t n = samples.size();
    double mu = 0.0;
    for (const ComputeSample& smp : samples) mu += smp.s;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (const ComputeSample& smp : samples) var += (smp.s - mu) * (smp.s - mu);
    double sigma = std::sqrt(var / static_cast<double>(n));

    double m[3][3] = {};
    double rhs[3] = {};
    for (const ComputeSample& smp : samples) {
        double u = (smp.s - mu) / sigma;
        double row[3] = {1.0, u, u * u};
        for (int i = 0; i < 3; ++i) {
            rhs[i] += row[i] * smp.seconds;
            for (int j = 0; j < 3; ++j) m[i][j] += row[i] * row[j];
        }
    }

    // Gaussian elimination with partial pivoting on the 3x3 system.
    int perm[3] = {0, 1, 2};
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(m[perm[r]][col]) > std::fabs(m[perm[pivot]][col])) pivot = r;
        std::swap(perm[col], perm[pivot]);
        double diag = m[perm[col]][col];
        if (diag == 0.0) throw std::invalid_argument("fit: singular design");
        for (int r = col + 1; r < 3; ++r) {
            double f = m[perm[r]][col] / diag;
            for (int c = col; c < 3; ++c) m[perm[r]][c] -= f * m[perm[col]][c];
            rhs[perm[r]] -= f * rhs[perm[col]];
        }
    }
    double c[3];
    for (int i = 2; i >= 0; --i) {
        double v = rhs[perm[i]];
        for (int j = i + 1; j < 3; ++j) v -= m[perm[i]][j] * c[j];
        c[i] = v / m[perm[i]][i];
    }

    // y = c0 + c1*u + c2*u^2 with u = (s - mu)/sigma
    ComputeFit fit;
    fit.gamma2 = c[2] / (sigma * sigma);
    fit.beta2 = c[1] / sigma - 2.0 * c[2] * mu / (sigma * sigma);
    fit.alpha2 = c[0] - c[1] * mu / sigma + c[2] * mu * mu / (sigma * sigma);
    return fit;
}

double t_max_preclip(const CostModel& model, double s) {
    if (!(model.beta1 > 0.0)) throw std::invalid_argument("t_max: beta1 must be > 0");
    if (!(s > 0.0)) throw std::invalid_argument("t_max: s must be > 0");
    return (model.gamma2 * s * s + model.beta2 * s + model.alpha2 - model.alpha1) /
           (model.beta1 * s);
}

std::size_t t_max(const CostModel& model, double s, std::size_t clip_lo,
                  std::size_t clip_hi) {
    if (clip_lo < 1 || clip_lo > clip_hi)
        throw std::invalid_argument("t_max: need 1 <= clip_lo <= clip_hi");
    double raw = std::floor(t_max_preclip(model, s));
    if (raw <= static_cast<double>(clip_lo)) return clip_lo;
    if (raw >= static_cast<double>(clip_hi)) return clip_hi;
    return static_cast<std::size_t>(raw);
}

void write_cost_model(std::ostream& out, const CostModel& model) {
    auto line = [&](const char* name, double v) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << name << '=' << buf << '\n';
    };
    line("alpha1", model.alpha1);
    line("beta1", model.beta1);
    line("alpha2", model.alpha2);
    line("beta2", model.beta2);
    line("gamma2", model.gamma2);
    line("offload_bandwidth", model.offload_bandwidth);
    line("fetch_bandwidth", model.fetch_bandwidth);
}

CostModel read_cost_model(std::istream& in) {
    std::map<std::string, double> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("cost model: expected key=value, got '" + line + "'");
        std::string key = line.substr(0, eq);
        try {
            kv[key] = std::stod(line.substr(eq + 1));
        } catch (const std::exception&) {
            throw std::runtime_error("cost model: bad number for key '" + key + "'");
        }
    }
    auto take = [&](const char* name) {
        auto it = kv.find(name);
        if (it == kv.end())
            throw std::runtime_error(std::string("cost model: missing key '") + name + "'");
        double v = it->second;
        kv.erase(it);
        return v;
    };
    CostModel model;
    model.alpha1 = take("alpha1");
    model.beta1 = take("beta1");
    model.alpha2 = take("alpha2");
    model.beta2 = take("beta2");
    model.gamma2 = take("gamma2");
    model.offload_bandwidth = take("offload_bandwidth");
    model.fetch_bandwidth = take("fetch_bandwidth");
    if (!kv.empty())
        throw std::runtime_error("cost model: unknown key '" + kv.begin()->first + "'");
    return model;
}

void save_cost_model(const std::string& path, const CostModel& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cost model: cannot open " + path);
    write_cost_model(out, model);
}

CostModel load_cost_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cost model: cannot open " + path);
    return read_cost_model(in);
}

}  // namespace pqkv
